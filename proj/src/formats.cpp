#include "monilog/formats.hpp"

#include <cmath>
#include <istream>
#include <limits>
#include <ostream>

namespace monilog {

namespace {

template <class F>
auto guarded(std::string_view what, F&& f) -> decltype(f()) {
    try {
        return f();
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string(what) + ": " + e.what());
    }
}

Json encode_ts(Timestamp ts) { return format_timestamp(ts); }
Timestamp decode_ts(const Json& j) { return parse_timestamp(j.get<std::string>()); }

Json context_to_json(const std::deque<TemplateId>& ids) {
    Json a = Json::array();
    for (const auto id : ids) {
        a.push_back(id);
    }
    return a;
}

std::deque<TemplateId> deque_from_json(const Json& j) {
    std::deque<TemplateId> out;
    for (const auto& x : j) {
        out.push_back(x.get<TemplateId>());
    }
    return out;
}

Json records_to_json(const auto& records) {
    Json a = Json::array();
    for (const auto& r : records) {
        a.push_back(to_json(r));
    }
    return a;
}

std::vector<ParsedLog> records_from_json(const Json& j) {
    std::vector<ParsedLog> out;
    for (const auto& r : j) {
        out.push_back(parsed_log_from_json(r));
    }
    return out;
}

}  // namespace

Json encode_double(double x) {
    if (std::isnan(x)) {
        return "nan";
    }
    if (std::isinf(x)) {
        return x > 0 ? "inf" : "-inf";
    }
    return x;
}

double decode_double(const Json& j) {
    if (j.is_string()) {
        const auto s = j.get<std::string>();
        if (s == "inf") {
            return std::numeric_limits<double>::infinity();
        }
        if (s == "-inf") {
            return -std::numeric_limits<double>::infinity();
        }
        if (s == "nan") {
            return std::numeric_limits<double>::quiet_NaN();
        }
        throw ValidationError("expected a number, got '" + s + "'");
    }
    if (!j.is_number()) {
        throw ValidationError("expected a number");
    }
    return j.get<double>();
}

Json parse_json(std::string_view text) {
    return guarded("malformed JSON", [&] { return Json::parse(text); });
}

Json to_json(const ParserParams& p) {
    Json j;
    j["tree_depth"] = p.tree_depth;
    j["sim_threshold"] = p.sim_threshold;
    j["max_children"] = p.max_children;
    return j;
}

ParserParams parser_params_from_json(const Json& j) {
    return guarded("parser params", [&] {
        ParserParams p;
        p.tree_depth = j.at("tree_depth").get<std::size_t>();
        p.sim_threshold = j.at("sim_threshold").get<double>();
        p.max_children = j.at("max_children").get<std::size_t>();
        p.validate();
        return p;
    });
}

Json to_json(const ParsedLog& log) {
    Json j;
    j["seq_no"] = log.record.seq_no;
    j["ts"] = encode_ts(log.record.timestamp);
    j["source"] = log.record.source;
    j["level"] = log.record.level;
    j["message"] = log.record.message;
    j["template_id"] = log.template_id;
    Json values = Json::array();
    Json slots = Json::array();
    for (const auto& b : log.bindings) {
        values.push_back(b.value);
        slots.push_back(b.position);
    }
    j["bindings"] = std::move(values);
    j["slots"] = std::move(slots);
    Json payload = Json::object();
    for (const auto& [k, v] : log.payload) {
        payload[k] = v;
    }
    j["payload"] = std::move(payload);
    return j;
}

ParsedLog parsed_log_from_json(const Json& j) {
    return guarded("parsed record", [&] {
        ParsedLog log;
        log.record.seq_no = j.at("seq_no").get<std::uint64_t>();
        log.record.timestamp = decode_ts(j.at("ts"));
        log.record.source = j.at("source").get<std::string>();
        log.record.level = j.at("level").get<std::string>();
        log.record.message = j.at("message").get<std::string>();
        log.template_id = j.at("template_id").get<TemplateId>();
        const auto& values = j.at("bindings");
        const auto& slots = j.at("slots");
        if (!values.is_array() || !slots.is_array() || values.size() != slots.size()) {
            throw ValidationError("parsed record: bindings and slots differ in length");
        }
        for (std::size_t i = 0; i < values.size(); ++i) {
            log.bindings.push_back({slots[i].get<std::size_t>(), values[i].get<std::string>()});
        }
        if (j.contains("payload")) {
            for (const auto& [k, v] : j.at("payload").items()) {
                log.payload.emplace_back(k, v.get<std::string>());
            }
        }
        return log;
    });
}

void write_parsed_stream(std::ostream& out, std::span<const ParsedLog> logs) {
    for (const auto& log : logs) {
        out << to_json(log).dump(-1, ' ', false, Json::error_handler_t::replace) << '\n';
    }
}

std::vector<ParsedLog> read_parsed_stream(std::istream& in) {
    std::vector<ParsedLog> out;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            out.push_back(parsed_log_from_json(parse_json(line)));
        } catch (const ValidationError& e) {
            throw ValidationError("parsed stream line " + std::to_string(line_no) + ": " +
                                  e.what());
        }
    }
    if (in.bad()) {
        throw IoError("read failure in parsed stream");
    }
    return out;
}

Json templates_to_json(std::span<const Template> templates) {
    Json a = Json::array();
    for (const auto& t : templates) {
        Json j;
        j["id"] = t.id;
        j["template"] = t.render();
        j["support"] = t.support;
        a.push_back(std::move(j));
    }
    return a;
}

Json to_json(const MinerState& state) {
    Json j;
    j["params"] = to_json(state.params);
    Json templates = Json::array();
    for (std::size_t i = 0; i < state.templates.size(); ++i) {
        const auto& t = state.templates[i];
        Json tj;
        tj["id"] = t.id;
        tj["tokens"] = t.tokens;
        tj["support"] = t.support;
        tj["route"] = i < state.routes.size() ? Json(state.routes[i]) : Json::array();
        templates.push_back(std::move(tj));
    }
    j["templates"] = std::move(templates);
    return j;
}

MinerState miner_state_from_json(const Json& j) {
    return guarded("miner state", [&] {
        MinerState state;
        state.params = parser_params_from_json(j.at("params"));
        for (const auto& tj : j.at("templates")) {
            Template t;
            t.id = tj.at("id").get<TemplateId>();
            t.tokens = tj.at("tokens").get<std::vector<std::string>>();
            t.support = tj.at("support").get<std::uint64_t>();
            state.templates.push_back(std::move(t));
            state.routes.push_back(tj.at("route").get<std::vector<std::string>>());
        }
        return state;
    });
}

Json to_json(const AnomalyReport& report) {
    Json j;
    j["report_id"] = report.report_id;
    j["trigger"] = std::string(to_string(report.trigger));
    j["source"] = report.source;
    j["created_at"] = encode_ts(report.created_at);
    j["score"] = encode_double(report.score);
    j["trigger_record"] = to_json(report.trigger_record);
    j["context_records"] = records_to_json(report.context_records);
    return j;
}

AnomalyReport report_from_json(const Json& j) {
    return guarded("anomaly report", [&] {
        AnomalyReport r;
        r.report_id = j.at("report_id").get<ReportId>();
        r.trigger = parse_trigger_kind(j.at("trigger").get<std::string>());
        r.source = j.at("source").get<std::string>();
        r.created_at = decode_ts(j.at("created_at"));
        r.score = decode_double(j.at("score"));
        r.trigger_record = parsed_log_from_json(j.at("trigger_record"));
        r.context_records = records_from_json(j.at("context_records"));
        return r;
    });
}

namespace {

Json features_to_json(const FeatureVector& v) {
    Json a = Json::array();
    for (const auto& [k, x] : v) {
        a.push_back(Json::array({k, x}));
    }
    return a;
}

FeatureVector features_from_json(const Json& j) {
    FeatureVector v;
    for (const auto& e : j) {
        v[e.at(0).get<std::uint64_t>()] = e.at(1).get<double>();
    }
    return v;
}

}  // namespace

Json to_json(const FeedbackEvent& e) {
    Json j;
    j["event_id"] = e.event_id;
    j["report_id"] = e.report_id;
    j["kind"] = std::string(to_string(e.kind));
    j["from"] = e.from_value;
    j["to"] = e.to_value;
    j["actor"] = e.actor;
    j["at"] = encode_ts(e.at);
    j["pool"] = e.pool ? Json(*e.pool) : Json(nullptr);
    j["features"] = features_to_json(e.features);
    return j;
}

FeedbackEvent feedback_event_from_json(const Json& j) {
    return guarded("feedback event", [&] {
        FeedbackEvent e;
        e.event_id = j.at("event_id").get<EventId>();
        e.report_id = j.at("report_id").get<ReportId>();
        e.kind = parse_feedback_kind(j.at("kind").get<std::string>());
        e.from_value = j.at("from").get<std::string>();
        e.to_value = j.at("to").get<std::string>();
        e.actor = j.at("actor").get<std::string>();
        e.at = decode_ts(j.at("at"));
        if (j.contains("pool") && !j.at("pool").is_null()) {
            e.pool = j.at("pool").get<PoolId>();
        }
        if (j.contains("features")) {
            e.features = features_from_json(j.at("features"));
        }
        return e;
    });
}

Json to_json(const Pool& pool) {
    Json j;
    j["pool_id"] = pool.pool_id;
    j["name"] = pool.name;
    j["created_at"] = encode_ts(pool.created_at);
    j["deletable"] = pool.deletable;
    return j;
}

Json to_json(const ClassifierState& s) {
    Json j;
    j["assignment_threshold"] = s.assignment_threshold;
    Json pools = Json::array();
    for (const auto& [id, p] : s.pools) {
        pools.push_back(to_json(p));
    }
    j["pools"] = std::move(pools);
    Json models = Json::array();
    for (const auto& [id, m] : s.models) {
        Json mj;
        mj["pool_id"] = id;
        mj["examples"] = m.examples;
        mj["histogram"] = m.histogram;
        mj["sum"] = features_to_json(m.sum);
        models.push_back(std::move(mj));
    }
    j["models"] = std::move(models);
    Json contributions = Json::array();
    for (const auto& [r, p] : s.contributions) {
        contributions.push_back(Json::array({r, p}));
    }
    j["contributions"] = std::move(contributions);
    Json counted = Json::array();
    for (const auto& [r, pc] : s.counted) {
        counted.push_back(Json::array({r, pc.first, std::string(to_string(pc.second))}));
    }
    j["counted"] = std::move(counted);
    j["applied"] = s.applied;
    j["next_pool_id"] = s.next_pool_id;
    return j;
}

ClassifierState classifier_state_from_json(const Json& j) {
    return guarded("classifier state", [&] {
        ClassifierState s;
        s.assignment_threshold = j.at("assignment_threshold").get<double>();
        for (const auto& pj : j.at("pools")) {
            Pool p;
            p.pool_id = pj.at("pool_id").get<PoolId>();
            p.name = pj.at("name").get<std::string>();
            p.created_at = decode_ts(pj.at("created_at"));
            p.deletable = pj.at("deletable").get<bool>();
            s.pools.emplace(p.pool_id, std::move(p));
        }
        for (const auto& mj : j.at("models")) {
            PoolModel m;
            m.examples = mj.at("examples").get<std::uint64_t>();
            m.histogram = mj.at("histogram").get<std::array<std::uint64_t, 3>>();
            m.sum = features_from_json(mj.at("sum"));
            s.models.emplace(mj.at("pool_id").get<PoolId>(), std::move(m));
        }
        for (const auto& c : j.at("contributions")) {
            s.contributions.emplace(c.at(0).get<ReportId>(), c.at(1).get<PoolId>());
        }
        for (const auto& c : j.at("counted")) {
            s.counted.emplace(c.at(0).get<ReportId>(),
                              std::pair{c.at(1).get<PoolId>(),
                                        parse_criticality(c.at(2).get<std::string>())});
        }
        s.applied = j.at("applied").get<std::set<EventId>>();
        s.next_pool_id = j.at("next_pool_id").get<PoolId>();
        const auto def = s.pools.find(kDefaultPoolId);
        if (def == s.pools.end() || def->second.deletable) {
            throw ValidationError("classifier state: default pool missing");
        }
        return s;
    });
}

Json to_json(const DetectorParams& p) {
    Json j;
    j["context_len"] = p.sequence.context_len;
    j["min_support"] = p.sequence.min_support;
    j["top_g"] = p.sequence.top_g;
    j["z_threshold"] = p.quant.z_threshold;
    j["min_samples"] = p.quant.min_samples;
    j["max_seen_values"] = p.quant.max_seen_values;
    j["reorder_window"] = p.normalizer.reorder_window;
    j["drop_duplicates"] = p.normalizer.drop_duplicates;
    j["report_window"] = p.report_window;
    j["after_timeout_ms"] = p.after_timeout.count();
    j["online_update"] = p.online_update;
    j["judge_novel_templates"] = p.judge_novel_templates;
    return j;
}

DetectorParams detector_params_from_json(const Json& j) {
    return guarded("detector params", [&] {
        DetectorParams p;
        p.sequence.context_len = j.at("context_len").get<std::size_t>();
        p.sequence.min_support = j.at("min_support").get<std::uint64_t>();
        p.sequence.top_g = j.at("top_g").get<std::size_t>();
        p.quant.z_threshold = j.at("z_threshold").get<double>();
        p.quant.min_samples = j.at("min_samples").get<std::uint64_t>();
        p.quant.max_seen_values = j.at("max_seen_values").get<std::size_t>();
        p.normalizer.reorder_window = j.at("reorder_window").get<std::size_t>();
        p.normalizer.drop_duplicates = j.at("drop_duplicates").get<bool>();
        p.report_window = j.at("report_window").get<std::size_t>();
        p.after_timeout = std::chrono::milliseconds{j.at("after_timeout_ms").get<std::int64_t>()};
        p.online_update = j.at("online_update").get<bool>();
        p.judge_novel_templates = j.at("judge_novel_templates").get<bool>();
        p.validate();
        return p;
    });
}

Json to_json(const DetectorState& s) {
    Json j;
    j["params"] = to_json(s.params);

    Json model = Json::array();
    for (const auto& [source, contexts] : s.model.counts()) {
        for (const auto& [context, next] : contexts) {
            Json e;
            e["source"] = source;
            e["context"] = context;
            Json n = Json::array();
            for (const auto& [id, count] : next) {
                n.push_back(Json::array({id, count}));
            }
            e["next"] = std::move(n);
            model.push_back(std::move(e));
        }
    }
    j["model"] = std::move(model);

    Json stats = Json::array();
    for (const auto& [key, slot] : s.stats.slots()) {
        Json e;
        e["template_id"] = key.first;
        e["position"] = key.second;
        e["count"] = slot.count;
        e["mean"] = slot.mean;
        e["m2"] = slot.m2;
        e["seen"] = slot.seen_values;
        stats.push_back(std::move(e));
    }
    j["stats"] = std::move(stats);

    Json normalizer;
    normalizer["dropped"] = s.normalizer.dropped_duplicates();
    Json buffers = Json::array();
    for (const auto& [source, b] : s.normalizer.buffers()) {
        Json e;
        e["source"] = source;
        e["held"] = records_to_json(b.held);
        e["recent"] = b.recent;
        e["last_released"] = b.last_released ? encode_ts(*b.last_released) : Json(nullptr);
        buffers.push_back(std::move(e));
    }
    normalizer["buffers"] = std::move(buffers);
    j["normalizer"] = std::move(normalizer);

    Json training = Json::object();
    for (const auto& [source, h] : s.training_history) {
        training[source] = context_to_json(h);
    }
    j["training_history"] = std::move(training);

    Json sources = Json::array();
    for (const auto& [source, src] : s.sources) {
        Json e;
        e["source"] = source;
        e["history"] = context_to_json(src.history);
        e["recent"] = records_to_json(src.recent);
        Json pending = Json::array();
        for (const auto& p : src.pending) {
            Json pj;
            pj["report_id"] = p.report_id;
            pj["trigger"] = std::string(to_string(p.trigger));
            pj["score"] = encode_double(p.score);
            pj["trigger_seq_no"] = p.trigger_seq_no;
            pj["after"] = p.after;
            pj["records"] = records_to_json(p.records);
            pending.push_back(std::move(pj));
        }
        e["pending"] = std::move(pending);
        sources.push_back(std::move(e));
    }
    j["sources"] = std::move(sources);
    j["next_report_id"] = s.next_report_id;
    j["counters"] = {{"trained", s.counters.trained},
                     {"processed", s.counters.processed},
                     {"sequential_anomalies", s.counters.sequential_anomalies},
                     {"quantitative_anomalies", s.counters.quantitative_anomalies}};
    return j;
}

DetectorState detector_state_from_json(const Json& j) {
    return guarded("detector state", [&] {
        const auto params = detector_params_from_json(j.at("params"));

        SequenceModel::Counts counts;
        for (const auto& e : j.at("model")) {
            auto& next = counts[e.at("source").get<std::string>()]
                               [e.at("context").get<Context>()];
            for (const auto& n : e.at("next")) {
                next[n.at(0).get<TemplateId>()] = n.at(1).get<std::uint64_t>();
            }
        }

        std::map<SlotKey, SlotStats> slots;
        for (const auto& e : j.at("stats")) {
            SlotStats st;
            st.count = e.at("count").get<std::uint64_t>();
            st.mean = e.at("mean").get<double>();
            st.m2 = e.at("m2").get<double>();
            st.seen_values = e.at("seen").get<std::set<std::string>>();
            slots.emplace(SlotKey{e.at("template_id").get<TemplateId>(),
                                  e.at("position").get<std::size_t>()},
                          std::move(st));
        }

        std::map<std::string, StreamNormalizer::SourceBuffer> buffers;
        const auto& nj = j.at("normalizer");
        for (const auto& e : nj.at("buffers")) {
            StreamNormalizer::SourceBuffer b;
            b.held = records_from_json(e.at("held"));
            b.recent = e.at("recent").get<std::deque<std::string>>();
            if (!e.at("last_released").is_null()) {
                b.last_released = decode_ts(e.at("last_released"));
            }
            buffers.emplace(e.at("source").get<std::string>(), std::move(b));
        }

        DetectorState s{params,
                        SequenceModel(params.sequence, std::move(counts)),
                        VariableStats(params.quant, std::move(slots)),
                        StreamNormalizer(params.normalizer, std::move(buffers),
                                         nj.at("dropped").get<std::uint64_t>()),
                        {},
                        {},
                        j.at("next_report_id").get<ReportId>(),
                        {}};
        for (const auto& [source, h] : j.at("training_history").items()) {
            s.training_history[source] = deque_from_json(h);
        }
        for (const auto& e : j.at("sources")) {
            SourceDetectionState src;
            src.history = deque_from_json(e.at("history"));
            for (auto& r : records_from_json(e.at("recent"))) {
                src.recent.push_back(std::move(r));
            }
            for (const auto& pj : e.at("pending")) {
                PendingReport p;
                p.report_id = pj.at("report_id").get<ReportId>();
                p.trigger = parse_trigger_kind(pj.at("trigger").get<std::string>());
                p.score = decode_double(pj.at("score"));
                p.trigger_seq_no = pj.at("trigger_seq_no").get<std::uint64_t>();
                p.after = pj.at("after").get<std::size_t>();
                p.records = records_from_json(pj.at("records"));
                if (p.records.size() <= p.after) {
                    throw ValidationError("detector state: pending report without its trigger");
                }
                src.pending.push_back(std::move(p));
            }
            s.sources.emplace(e.at("source").get<std::string>(), std::move(src));
        }
        const auto& c = j.at("counters");
        s.counters.trained = c.at("trained").get<std::uint64_t>();
        s.counters.processed = c.at("processed").get<std::uint64_t>();
        s.counters.sequential_anomalies = c.at("sequential_anomalies").get<std::uint64_t>();
        s.counters.quantitative_anomalies = c.at("quantitative_anomalies").get<std::uint64_t>();
        return s;
    });
}

Json to_json(const DetectionMetrics& m) {
    Json j;
    j["precision"] = m.precision;
    j["recall"] = m.recall;
    j["f1"] = m.f1;
    return j;
}

Json to_json(const CalibrationResult& result) {
    Json j;
    j["chosen"] = to_json(result.chosen);
    j["sample_size"] = result.sample_size;
    Json grid = Json::array();
    for (const auto& g : result.grid_scores) {
        Json e = to_json(g.params);
        e["score"] = g.score;
        e["template_count"] = g.template_count;
        grid.push_back(std::move(e));
    }
    j["grid"] = std::move(grid);
    return j;
}

}  // namespace monilog
