#include "monilog/service.hpp"

#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <mutex>
#include <sstream>

namespace monilog {

namespace fs = std::filesystem;

std::string encode_cursor(ReportId id) {
    std::ostringstream out;
    out << 'r' << std::hex << id;
    return out.str();
}

ReportId decode_cursor(std::string_view cursor) {
    if (cursor.size() < 2 || cursor.size() > 17 || cursor.front() != 'r') {
        throw ValidationError("malformed cursor '" + std::string(cursor) + "'");
    }
    ReportId id = 0;
    for (const char c : cursor.substr(1)) {
        int digit = 0;
        if (c >= '0' && c <= '9') {
            digit = c - '0';
        } else if (c >= 'a' && c <= 'f') {
            digit = c - 'a' + 10;
        } else {
            throw ValidationError("malformed cursor '" + std::string(cursor) + "'");
        }
        id = id * 16 + static_cast<ReportId>(digit);
    }
    return id;
}

// ---------------------------------------------------------------------------

class Service::Journal {
public:
    explicit Journal(fs::path path) : path_(std::move(path)) {}

    ~Journal() {
        if (file_ != nullptr) {
            std::fclose(file_);
        }
    }

    Journal(const Journal&) = delete;
    Journal& operator=(const Journal&) = delete;

    /// Returns once the line is on stable storage.
    void append(const std::string& line) {
        if (file_ == nullptr) {
            file_ = std::fopen(path_.c_str(), "ab");
            if (file_ == nullptr) {
                throw IoError("cannot open journal '" + path_.string() + "': " +
                              std::strerror(errno));
            }
        }
        const std::string data = line + '\n';
        if (std::fwrite(data.data(), 1, data.size(), file_) != data.size() ||
            std::fflush(file_) != 0 || ::fsync(::fileno(file_)) != 0) {
            throw IoError("cannot append to journal '" + path_.string() + "': " +
                          std::strerror(errno));
        }
    }

    /// Entries in file order. A torn final line (crash mid-append) is
    /// dropped; damage anywhere else is an error.
    std::vector<Json> read() const {
        std::vector<Json> out;
        std::ifstream in(path_);
        if (!in) {
            return out;
        }
        std::vector<std::string> lines;
        std::string line;
        while (std::getline(in, line)) {
            lines.push_back(line);
        }
        for (std::size_t i = 0; i < lines.size(); ++i) {
            if (lines[i].empty()) {
                continue;
            }
            try {
                out.push_back(parse_json(lines[i]));
            } catch (const ValidationError& e) {
                if (i + 1 == lines.size()) {
                    break;
                }
                throw Error("journal '" + path_.string() + "' is corrupt at line " +
                            std::to_string(i + 1));
            }
        }
        return out;
    }

    const fs::path& path() const { return path_; }

private:
    fs::path path_;
    std::FILE* file_ = nullptr;
};

// ---------------------------------------------------------------------------

struct Service::Core {
    TemplateMiner miner;
    Preprocessor preprocessor;
    StreamDetector detector;
    ClassifierState classifier;
    std::map<ReportId, StoredReport> reports;
    std::uint64_t last_op = 0;
    std::uint64_t next_seq = 0;
    bool trained = false;

    void upsert(const AnomalyReport& report, bool open, std::vector<ReportId>* fresh) {
        auto [it, inserted] = reports.try_emplace(report.report_id);
        auto& stored = it->second;
        if (!inserted && !stored.open) {
            return;
        }
        stored.report = report;
        stored.open = open;
        stored.features = featurize(report);
        assign_predicted(stored.assignment, predict(classifier, stored.features));
        if (inserted && fresh != nullptr) {
            fresh->push_back(report.report_id);
        }
    }

    void process(const std::vector<RawLogRecord>& records, bool flush,
                 std::vector<ReportId>* fresh) {
        for (const auto& r : records) {
            detector.push(parse_record(miner, preprocessor, r));
            next_seq = std::max(next_seq, r.seq_no + 1);
        }
        if (flush) {
            detector.flush();
        }
        for (const auto& report : detector.take_closed()) {
            upsert(report, false, fresh);
        }
        for (const auto& report : detector.open_reports()) {
            upsert(report, true, fresh);
        }
    }

    void apply(const FeedbackEvent& e) {
        apply_feedback(classifier, e);
        switch (e.kind) {
            case FeedbackKind::moved_pool: {
                auto& a = reports.at(e.report_id).assignment;
                a.pool = decode_pool(e.to_value);
                a.human_pool = true;
                break;
            }
            case FeedbackKind::set_criticality: {
                auto& a = reports.at(e.report_id).assignment;
                a.criticality = parse_criticality(e.to_value);
                a.human_criticality = true;
                break;
            }
            case FeedbackKind::create_pool:
                break;
            case FeedbackKind::delete_pool: {
                const PoolId id = decode_pool(e.from_value);
                for (auto& [rid, stored] : reports) {
                    if (stored.assignment.pool == id) {
                        stored.assignment.pool = kDefaultPoolId;
                        stored.assignment.human_pool = false;
                    }
                }
                break;
            }
        }
    }

    static PoolId decode_pool(const std::string& text) { return std::stoull(text); }

    Json to_snapshot(Timestamp at) const {
        Json j;
        j["version"] = kSnapshotVersion;
        j["created_at"] = format_timestamp(at);
        j["last_op"] = last_op;
        j["next_seq"] = next_seq;
        j["trained"] = trained;
        j["miner"] = to_json(miner.state());
        j["detector"] = to_json(detector.state());
        j["classifier"] = to_json(classifier);
        Json rs = Json::array();
        for (const auto& [id, s] : reports) {
            Json e;
            e["report"] = to_json(s.report);
            Json f = Json::array();
            for (const auto& [k, x] : s.features) {
                f.push_back(Json::array({k, x}));
            }
            e["features"] = std::move(f);
            e["pool_id"] = s.assignment.pool;
            e["criticality"] = std::string(to_string(s.assignment.criticality));
            e["confidence"] = encode_double(s.assignment.confidence);
            e["human_pool"] = s.assignment.human_pool;
            e["human_criticality"] = s.assignment.human_criticality;
            e["open"] = s.open;
            rs.push_back(std::move(e));
        }
        j["reports"] = std::move(rs);
        return j;
    }

    static Core from_snapshot(const Json& j) {
        try {
            if (!j.is_object() || !j.contains("version")) {
                throw ValidationError("snapshot has no version");
            }
            if (j.at("version").get<int>() != kSnapshotVersion) {
                throw ValidationError("snapshot version " + j.at("version").dump() +
                                      " is not supported (expected " +
                                      std::to_string(kSnapshotVersion) + ")");
            }
            Core c{TemplateMiner::restore(miner_state_from_json(j.at("miner"))),
                   Preprocessor{},
                   StreamDetector(detector_state_from_json(j.at("detector"))),
                   classifier_state_from_json(j.at("classifier")),
                   {},
                   j.at("last_op").get<std::uint64_t>(),
                   j.at("next_seq").get<std::uint64_t>(),
                   j.at("trained").get<bool>()};
            for (const auto& e : j.at("reports")) {
                StoredReport s;
                s.report = report_from_json(e.at("report"));
                for (const auto& f : e.at("features")) {
                    s.features[f.at(0).get<std::uint64_t>()] = f.at(1).get<double>();
                }
                s.assignment.pool = e.at("pool_id").get<PoolId>();
                s.assignment.criticality = parse_criticality(e.at("criticality").get<std::string>());
                s.assignment.confidence = decode_double(e.at("confidence"));
                s.assignment.human_pool = e.at("human_pool").get<bool>();
                s.assignment.human_criticality = e.at("human_criticality").get<bool>();
                s.open = e.at("open").get<bool>();
                if (c.classifier.pools.count(s.assignment.pool) == 0) {
                    throw ValidationError("snapshot report in unknown pool");
                }
                c.reports.emplace(s.report.report_id, std::move(s));
            }
            return c;
        } catch (const nlohmann::json::exception& e) {
            throw ValidationError(std::string("corrupt snapshot: ") + e.what());
        }
    }
};

// ---------------------------------------------------------------------------

Service::Service(ServiceConfig config) : config_(std::move(config)) {
    config_.parser.validate();
    config_.detector.validate();
    if (config_.max_batch == 0) {
        throw ValidationError("max_batch must be > 0");
    }
    std::optional<fs::path> snapshot_path;
    if (!config_.data_dir.empty()) {
        std::error_code ec;
        fs::create_directories(config_.data_dir, ec);
        if (ec) {
            throw IoError("cannot create data dir '" + config_.data_dir.string() +
                          "': " + ec.message());
        }
        feedback_log_ = std::make_unique<Journal>(config_.data_dir / "feedback.ndjson");
        ingest_log_ = std::make_unique<Journal>(config_.data_dir / "ingest.wal");
        if (fs::exists(default_snapshot_path())) {
            snapshot_path = default_snapshot_path();
        }
    }
    core_ = std::make_unique<Core>(load(snapshot_path));
    if (!snapshot_path && config_.learn_path && !config_.data_dir.empty()) {
        snapshot();
    }
}

Service::~Service() = default;

fs::path Service::default_snapshot_path() const {
    return config_.data_dir.empty() ? fs::path{} : config_.data_dir / "snapshot.json";
}

Timestamp Service::now() const {
    if (config_.clock) {
        return config_.clock();
    }
    return std::chrono::time_point_cast<std::chrono::milliseconds>(
        std::chrono::system_clock::now());
}

Service::Core Service::load(const std::optional<fs::path>& snapshot_path) const {
    std::optional<Core> core;
    if (snapshot_path) {
        std::ifstream in(*snapshot_path);
        if (!in) {
            throw IoError("cannot open snapshot '" + snapshot_path->string() + "'");
        }
        std::stringstream text;
        text << in.rdbuf();
        core.emplace(Core::from_snapshot(parse_json(text.str())));
    } else {
        core.emplace(Core{TemplateMiner(config_.parser), Preprocessor{},
                          StreamDetector(config_.detector),
                          make_classifier_state(config_.assignment_threshold), {}, 0, 0, false});
        if (config_.learn_path) {
            const auto training = read_stream(config_.learn_path->string(), ReadOptions{});
            for (const auto& r : training.records) {
                core->detector.train(parse_record(core->miner, core->preprocessor, r));
            }
            core->detector.finish_training();
            core->trained = true;
        }
    }

    // Replay journal entries newer than the snapshot, in op order.
    struct Entry {
        std::uint64_t op;
        const Json* ingest;
        std::optional<FeedbackEvent> feedback;
    };
    std::vector<Json> ingest_entries;
    std::vector<Json> feedback_entries;
    if (ingest_log_) {
        ingest_entries = ingest_log_->read();
        feedback_entries = feedback_log_->read();
    }
    std::vector<Entry> entries;
    for (const auto& j : ingest_entries) {
        const auto op = j.at("op").get<std::uint64_t>();
        if (op > core->last_op) {
            entries.push_back({op, &j, std::nullopt});
        }
    }
    for (const auto& j : feedback_entries) {
        auto e = feedback_event_from_json(j);
        if (e.event_id > core->last_op) {
            entries.push_back({e.event_id, nullptr, std::move(e)});
        }
    }
    std::sort(entries.begin(), entries.end(),
              [](const Entry& a, const Entry& b) { return a.op < b.op; });
    for (const auto& entry : entries) {
        if (entry.ingest != nullptr) {
            std::vector<RawLogRecord> records;
            for (const auto& r : entry.ingest->at("records")) {
                records.push_back(parse_structured_line(r.dump()));
                records.back().seq_no = r.at("seq_no").get<std::uint64_t>();
            }
            core->process(records, entry.ingest->at("flush").get<bool>(), nullptr);
        } else {
            core->apply(*entry.feedback);
        }
        core->last_op = entry.op;
    }
    return std::move(*core);
}

IngestResult Service::ingest(const Json& records, bool flush) {
    if (!records.is_array()) {
        throw ValidationError("ingest expects an array of records");
    }
    if (records.size() > config_.max_batch) {
        throw BatchTooLargeError("batch of " + std::to_string(records.size()) +
                                 " records exceeds the limit of " +
                                 std::to_string(config_.max_batch));
    }
    std::unique_lock lock(mutex_);
    IngestResult result;
    std::vector<RawLogRecord> accepted;
    for (std::size_t i = 0; i < records.size(); ++i) {
        try {
            if (!records[i].is_object()) {
                throw ValidationError("record is not an object");
            }
            auto r = parse_structured_line(records[i].dump());
            r.seq_no = core_->next_seq + accepted.size();
            accepted.push_back(std::move(r));
        } catch (const ValidationError& e) {
            result.errors.push_back({i, e.what()});
        }
    }
    result.accepted = accepted.size();
    if (accepted.empty() && !flush) {
        return result;
    }
    const std::uint64_t op = core_->last_op + 1;
    if (ingest_log_) {
        Json entry;
        entry["op"] = op;
        entry["flush"] = flush;
        Json rs = Json::array();
        for (const auto& r : accepted) {
            rs.push_back(parse_json(format_structured_line(r)));
        }
        entry["records"] = std::move(rs);
        ingest_log_->append(entry.dump(-1, ' ', false, Json::error_handler_t::replace));
    }
    core_->process(accepted, flush, &result.new_reports);
    core_->last_op = op;
    return result;
}

AnomalyPage Service::list_anomalies(const std::string& cursor, std::size_t limit) const {
    std::shared_lock lock(mutex_);
    ReportId after = 0;
    if (!cursor.empty()) {
        after = decode_cursor(cursor);
        if (after != 0 && core_->reports.count(after) == 0) {
            throw NotFoundError("unknown cursor '" + cursor + "'");
        }
    }
    AnomalyPage page;
    page.next_cursor = cursor;
    for (auto it = core_->reports.upper_bound(after);
         it != core_->reports.end() && page.reports.size() < limit; ++it) {
        page.reports.push_back(it->second);
        page.next_cursor = encode_cursor(it->first);
    }
    return page;
}

StoredReport Service::report(ReportId id) const {
    std::shared_lock lock(mutex_);
    const auto it = core_->reports.find(id);
    if (it == core_->reports.end()) {
        throw NotFoundError("unknown report " + std::to_string(id));
    }
    return it->second;
}

std::vector<PoolSummary> Service::pools() const {
    std::shared_lock lock(mutex_);
    std::vector<PoolSummary> out;
    for (const auto& [id, pool] : core_->classifier.pools) {
        PoolSummary s{pool, 0, 0};
        if (const auto m = core_->classifier.models.find(id); m != core_->classifier.models.end()) {
            s.examples = m->second.examples;
        }
        for (const auto& [rid, r] : core_->reports) {
            s.reports += r.assignment.pool == id ? 1 : 0;
        }
        out.push_back(std::move(s));
    }
    return out;
}

Pool Service::create_pool(const std::string& name, const std::string& actor) {
    std::unique_lock lock(mutex_);
    const auto event = make_create_pool_event(core_->classifier, core_->last_op + 1, name, actor,
                                              now());
    if (feedback_log_) {
        feedback_log_->append(to_json(event).dump());
    }
    core_->apply(event);
    core_->last_op = event.event_id;
    return core_->classifier.pools.at(*event.pool);
}

std::size_t Service::delete_pool(PoolId id, const std::string& actor) {
    std::unique_lock lock(mutex_);
    const auto event = make_delete_pool_event(core_->classifier, core_->last_op + 1, id, actor,
                                              now());
    std::size_t moved = 0;
    for (const auto& [rid, r] : core_->reports) {
        moved += r.assignment.pool == id ? 1 : 0;
    }
    if (feedback_log_) {
        feedback_log_->append(to_json(event).dump());
    }
    core_->apply(event);
    core_->last_op = event.event_id;
    return moved;
}

std::optional<EventId> Service::move_anomaly(ReportId id, PoolId to, const std::string& actor) {
    std::unique_lock lock(mutex_);
    const auto it = core_->reports.find(id);
    if (it == core_->reports.end()) {
        throw NotFoundError("unknown report " + std::to_string(id));
    }
    if (core_->classifier.pools.count(to) == 0) {
        throw NotFoundError("unknown pool " + std::to_string(to));
    }
    if (it->second.assignment.pool == to) {
        return std::nullopt;
    }
    FeedbackEvent e;
    e.event_id = core_->last_op + 1;
    e.report_id = id;
    e.kind = FeedbackKind::moved_pool;
    e.from_value = std::to_string(it->second.assignment.pool);
    e.to_value = std::to_string(to);
    e.actor = actor;
    e.at = now();
    e.features = it->second.features;
    if (feedback_log_) {
        feedback_log_->append(to_json(e).dump());
    }
    core_->apply(e);
    core_->last_op = e.event_id;
    return e.event_id;
}

std::optional<EventId> Service::set_criticality(ReportId id, Criticality level,
                                                const std::string& actor) {
    std::unique_lock lock(mutex_);
    const auto it = core_->reports.find(id);
    if (it == core_->reports.end()) {
        throw NotFoundError("unknown report " + std::to_string(id));
    }
    const auto& a = it->second.assignment;
    if (a.criticality == level && a.human_criticality) {
        return std::nullopt;
    }
    FeedbackEvent e;
    e.event_id = core_->last_op + 1;
    e.report_id = id;
    e.kind = FeedbackKind::set_criticality;
    e.from_value = std::string(to_string(a.criticality));
    e.to_value = std::string(to_string(level));
    e.actor = actor;
    e.at = now();
    e.pool = a.pool;
    e.features = it->second.features;
    if (feedback_log_) {
        feedback_log_->append(to_json(e).dump());
    }
    core_->apply(e);
    core_->last_op = e.event_id;
    return e.event_id;
}

std::vector<Template> Service::templates() const {
    std::shared_lock lock(mutex_);
    return core_->miner.export_templates();
}

namespace {

Json health_json(const Service::Core& core);

}  // namespace

Json Service::health() const {
    std::shared_lock lock(mutex_);
    return health_json(*core_);
}

namespace {

Json health_json(const Service::Core& core) {
    std::size_t open = 0;
    for (const auto& [id, r] : core.reports) {
        open += r.open ? 1 : 0;
    }
    Json j;
    j["status"] = "ok";
    j["trained"] = core.trained;
    j["templates"] = core.miner.template_count();
    j["reports"] = core.reports.size();
    j["open_reports"] = open;
    j["processed"] = core.detector.counters().processed;
    j["last_op"] = core.last_op;
    return j;
}

}  // namespace

fs::path Service::snapshot(const fs::path& path) {
    const fs::path target = path.empty() ? default_snapshot_path() : path;
    if (target.empty()) {
        throw ValidationError("no snapshot path and no data dir configured");
    }
    std::string text;
    {
        std::shared_lock lock(mutex_);
        text = core_->to_snapshot(now()).dump();
    }
    fs::path tmp = target;
    tmp += ".tmp";
    std::FILE* f = std::fopen(tmp.c_str(), "wb");
    if (f == nullptr) {
        throw IoError("cannot write snapshot '" + tmp.string() + "': " + std::strerror(errno));
    }
    const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size() &&
                    std::fflush(f) == 0 && ::fsync(::fileno(f)) == 0;
    std::fclose(f);
    if (!ok) {
        throw IoError("cannot write snapshot '" + tmp.string() + "'");
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        throw IoError("cannot move snapshot into place: " + ec.message());
    }
    return target;
}

void Service::restore(const fs::path& path) {
    const fs::path source = path.empty() ? default_snapshot_path() : path;
    if (source.empty()) {
        throw ValidationError("no snapshot path and no data dir configured");
    }
    std::unique_lock lock(mutex_);
    auto fresh = std::make_unique<Core>(load(source));
    core_ = std::move(fresh);
}

Json report_view_json(const StoredReport& r, const std::string& pool_name) {
    Json j;
    j["report_id"] = r.report.report_id;
    j["cursor"] = encode_cursor(r.report.report_id);
    j["trigger"] = std::string(to_string(r.report.trigger));
    j["source"] = r.report.source;
    j["created_at"] = format_timestamp(r.report.created_at);
    j["score"] = encode_double(r.report.score);
    j["status"] = r.open ? "open" : "closed";
    j["pool_id"] = r.assignment.pool;
    j["pool_name"] = pool_name;
    j["criticality"] = std::string(to_string(r.assignment.criticality));
    j["confidence"] = encode_double(r.assignment.confidence);
    j["human_pool"] = r.assignment.human_pool;
    j["human_criticality"] = r.assignment.human_criticality;
    j["trigger_record"] = to_json(r.report.trigger_record);
    j["context_records"] = Json::array();
    for (const auto& c : r.report.context_records) {
        j["context_records"].push_back(to_json(c));
    }
    return j;
}

Json Service::read_view() const {
    std::shared_lock lock(mutex_);
    Json j;
    Json anomalies = Json::array();
    for (const auto& [id, r] : core_->reports) {
        anomalies.push_back(report_view_json(r, core_->classifier.pools.at(r.assignment.pool).name));
    }
    j["anomalies"] = std::move(anomalies);
    Json pools = Json::array();
    for (const auto& [id, p] : core_->classifier.pools) {
        pools.push_back(to_json(p));
    }
    j["pools"] = std::move(pools);
    j["templates"] = templates_to_json(core_->miner.export_templates());
    j["health"] = health_json(*core_);
    return j;
}

ClassifierState Service::classifier_state() const {
    std::shared_lock lock(mutex_);
    return core_->classifier;
}

std::uint64_t Service::last_op() const {
    std::shared_lock lock(mutex_);
    return core_->last_op;
}

}  // namespace monilog
