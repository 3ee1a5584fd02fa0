#include "monilog/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>

#include "json.hpp"
#include "rng.hpp"

namespace monilog {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

InputFormat parse_input_format(std::string_view name) {
    if (name == "plain") {
        return InputFormat::plain;
    }
    if (name == "structured" || name == "structured-lines") {
        return InputFormat::structured;
    }
    throw ValidationError("unknown input format '" + std::string(name) + "'");
}

RawLogRecord parse_structured_line(std::string_view line) {
    json doc;
    try {
        doc = json::parse(line);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) {
        throw ValidationError("record is not a JSON object");
    }
    const auto string_field = [&](const char* name) -> std::string {
        const auto it = doc.find(name);
        if (it == doc.end()) {
            throw ValidationError(std::string("missing field '") + name + "'");
        }
        if (!it->is_string()) {
            throw ValidationError(std::string("field '") + name + "' is not a string");
        }
        return it->get<std::string>();
    };
    RawLogRecord record;
    record.timestamp = parse_timestamp(string_field("ts"));
    record.source = string_field("source");
    if (record.source.empty()) {
        throw ValidationError("field 'source' is empty");
    }
    record.level = string_field("level");
    record.message = string_field("message");
    return record;
}

std::string format_structured_line(const RawLogRecord& record) {
    ordered_json doc;
    doc["seq_no"] = record.seq_no;
    doc["ts"] = format_timestamp(record.timestamp);
    doc["source"] = record.source;
    doc["level"] = record.level;
    doc["message"] = record.message;
    return doc.dump(-1, ' ', false, json::error_handler_t::replace);
}

void write_stream(std::ostream& out, const std::vector<RawLogRecord>& records) {
    for (const auto& record : records) {
        out << format_structured_line(record) << '\n';
    }
}

ReadResult read_stream(std::istream& in, const ReadOptions& options) {
    if (options.format == InputFormat::plain && options.default_source.empty()) {
        throw ValidationError("plain input needs a non-empty default source");
    }
    ReadResult result;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        const std::uint64_t seq = result.records.size();
        if (options.format == InputFormat::plain) {
            RawLogRecord record;
            record.seq_no = seq;
            record.timestamp = Timestamp{std::chrono::milliseconds{static_cast<long>(seq)}};
            record.source = options.default_source;
            record.message = line;
            result.records.push_back(std::move(record));
            continue;
        }
        if (line.find_first_not_of(" \t") == std::string::npos) {
            continue;
        }
        try {
            RawLogRecord record = parse_structured_line(line);
            record.seq_no = seq;
            result.records.push_back(std::move(record));
        } catch (const ValidationError& e) {
            result.errors.push_back({line_no, e.what()});
        }
    }
    if (in.bad()) {
        throw IoError("read failure after line " + std::to_string(line_no));
    }
    return result;
}

ReadResult read_stream(const std::string& path, const ReadOptions& options) {
    std::ifstream in(path);
    if (!in) {
        throw IoError("cannot open '" + path + "'");
    }
    return read_stream(in, options);
}

// ---------------------------------------------------------------------------

void NoiseSpec::validate() const {
    const auto check = [](double p, const char* name) {
        if (!(p >= 0.0 && p <= 1.0)) {
            throw ValidationError(std::string(name) + " must lie in [0,1]");
        }
    };
    check(duplicate_prob, "duplicate_prob");
    check(shuffle_prob, "shuffle_prob");
    check(twist_prob, "twist_prob");
}

namespace {

std::string random_token(detail::Rng& rng) {
    const std::size_t length = 3 + rng.index(5);
    std::string token(length, 'a');
    for (auto& c : token) {
        c = static_cast<char>('a' + rng.index(26));
    }
    return token;
}

std::string join(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) {
            out += ' ';
        }
        out += tokens[i];
    }
    return out;
}

}  // namespace

std::string twist_message(std::string_view message, TwistKind kind, std::uint64_t seed) {
    detail::Rng rng(seed);
    std::vector<std::string> tokens;
    for (const auto piece : split_whitespace(message)) {
        tokens.emplace_back(piece);
    }
    if (tokens.empty()) {
        kind = TwistKind::insert;
    }
    switch (kind) {
        case TwistKind::insert: {
            const auto pos = rng.index(tokens.size() + 1);
            tokens.insert(tokens.begin() + static_cast<std::ptrdiff_t>(pos), random_token(rng));
            break;
        }
        case TwistKind::remove: {
            const auto pos = rng.index(tokens.size());
            tokens.erase(tokens.begin() + static_cast<std::ptrdiff_t>(pos));
            break;
        }
        case TwistKind::replace: {
            const auto pos = rng.index(tokens.size());
            std::string token = random_token(rng);
            while (token == tokens[pos]) {
                token = random_token(rng);
            }
            tokens[pos] = std::move(token);
            break;
        }
    }
    return join(tokens);
}

NoisyStream inject_noise_traced(const std::vector<RawLogRecord>& records, const NoiseSpec& spec) {
    spec.validate();
    detail::Rng rng(spec.seed);

    std::uint64_t next_seq = 0;
    for (const auto& r : records) {
        next_seq = std::max(next_seq, r.seq_no + 1);
    }

    NoisyStream staged;
    staged.records.reserve(records.size());
    for (std::size_t i = 0; i < records.size(); ++i) {
        RawLogRecord record = records[i];
        bool twisted = false;
        if (rng.bernoulli(spec.twist_prob)) {
            const auto kind = static_cast<TwistKind>(rng.index(3));
            record.message = twist_message(record.message, kind, rng.next());
            twisted = true;
        }
        const bool duplicate = rng.bernoulli(spec.duplicate_prob);
        staged.records.push_back(record);
        staged.origin.push_back(i);
        staged.duplicate.push_back(false);
        staged.twisted.push_back(twisted);
        if (duplicate) {
            record.seq_no = next_seq++;
            staged.records.push_back(std::move(record));
            staged.origin.push_back(i);
            staged.duplicate.push_back(true);
            staged.twisted.push_back(twisted);
        }
    }

    if (spec.shuffle_window == 0 || spec.shuffle_prob <= 0.0) {
        return staged;
    }

    // Each record gets a sort key i + d with d in [0, w]; sorting by (key, i)
    // keeps every record within w positions of where it started.
    const std::size_t n = staged.records.size();
    std::vector<std::size_t> key(n);
    for (std::size_t i = 0; i < n; ++i) {
        key[i] = i;
        if (rng.bernoulli(spec.shuffle_prob)) {
            key[i] += rng.index(spec.shuffle_window + 1);
        }
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });

    NoisyStream out;
    out.records.reserve(n);
    for (const auto idx : order) {
        out.records.push_back(std::move(staged.records[idx]));
        out.origin.push_back(staged.origin[idx]);
        out.duplicate.push_back(staged.duplicate[idx]);
        out.twisted.push_back(staged.twisted[idx]);
    }
    return out;
}

std::vector<RawLogRecord> inject_noise(const std::vector<RawLogRecord>& records,
                                       const NoiseSpec& spec) {
    return inject_noise_traced(records, spec).records;
}

// ---------------------------------------------------------------------------

std::string_view to_string(AnomalyKind kind) {
    switch (kind) {
        case AnomalyKind::none:
            return "none";
        case AnomalyKind::sequential:
            return "seq";
        case AnomalyKind::quantitative:
            return "quant";
    }
    return "none";
}

AnomalyKind parse_anomaly_kind(std::string_view text) {
    if (text == "none") {
        return AnomalyKind::none;
    }
    if (text == "seq" || text == "sequential") {
        return AnomalyKind::sequential;
    }
    if (text == "quant" || text == "quantitative") {
        return AnomalyKind::quantitative;
    }
    throw ValidationError("unknown anomaly kind '" + std::string(text) + "'");
}

namespace {

std::size_t slot_count(const std::string& text) {
    std::size_t n = 0;
    for (const auto token : split_whitespace(text)) {
        if (token == kWildcard) {
            ++n;
        }
    }
    return n;
}

}  // namespace

void SyntheticCorpusSpec::validate() const {
    if (templates.empty()) {
        throw ValidationError("synthetic corpus needs at least one template");
    }
    for (std::size_t t = 0; t < templates.size(); ++t) {
        const auto& tpl = templates[t];
        const auto name = "template " + std::to_string(t);
        if (split_whitespace(tpl.text).empty()) {
            throw ValidationError(name + " has no tokens");
        }
        if (slot_count(tpl.text) != tpl.slots.size()) {
            throw ValidationError(name + ": slot generator count does not match <*> count");
        }
        for (const auto& slot : tpl.slots) {
            if (const auto* range = std::get_if<NumericRange>(&slot)) {
                if (range->lo > range->hi) {
                    throw ValidationError(name + ": numeric range lo > hi");
                }
            } else {
                const auto& set = std::get<ValueSet>(slot);
                if (set.values.empty()) {
                    throw ValidationError(name + ": empty value set");
                }
                for (const auto& v : set.values) {
                    if (v.empty() || split_whitespace(v).size() != 1) {
                        throw ValidationError(name + ": value '" + v +
                                              "' must be a single non-empty token");
                    }
                }
            }
        }
    }
    for (const auto& [source, edges] : workflow) {
        if (source.empty()) {
            throw ValidationError("workflow source name is empty");
        }
        if (edges.empty()) {
            throw ValidationError("workflow of source '" + source + "' has no edges");
        }
        for (const auto& e : edges) {
            if (e.from >= templates.size() || e.to >= templates.size()) {
                throw ValidationError("workflow edge of source '" + source +
                                      "' references an undefined template");
            }
        }
    }
    for (const auto& inj : anomaly_injections) {
        if (!(inj.rate >= 0.0 && inj.rate <= 1.0)) {
            throw ValidationError("anomaly injection rate must lie in [0,1]");
        }
        if (inj.kind == AnomalyKind::none) {
            throw ValidationError("anomaly injection kind must be seq or quant");
        }
    }
}

namespace {

struct SourceWalk {
    std::string name;
    std::size_t start = 0;
    std::map<std::size_t, std::vector<std::size_t>> successors;
    std::vector<std::size_t> local_templates;
    std::optional<std::size_t> current;
};

std::int64_t out_of_range_value(const NumericRange& range, detail::Rng& rng) {
    const std::int64_t span = range.hi - range.lo + 1;
    const auto factor = static_cast<std::int64_t>(10 + rng.index(90));
    if (span > (INT64_MAX - range.hi) / factor) {
        return range.lo > INT64_MIN / 2 ? range.lo - span : INT64_MAX;
    }
    return range.hi + span * factor;
}

}  // namespace

SyntheticCorpus generate_synthetic(const SyntheticCorpusSpec& spec, std::uint64_t seed) {
    spec.validate();
    detail::Rng rng(seed);

    std::vector<SourceWalk> walks;
    if (spec.workflow.empty()) {
        // No workflow: one source over the complete transition graph.
        SourceWalk walk;
        walk.name = "synthetic";
        for (std::size_t t = 0; t < spec.templates.size(); ++t) {
            walk.local_templates.push_back(t);
        }
        for (std::size_t from = 0; from < spec.templates.size(); ++from) {
            walk.successors[from] = walk.local_templates;
        }
        walks.push_back(std::move(walk));
    }
    for (const auto& [name, edges] : spec.workflow) {
        SourceWalk walk;
        walk.name = name;
        walk.start = edges.front().from;
        std::set<std::size_t> local;
        for (const auto& e : edges) {
            auto& succ = walk.successors[e.from];
            if (std::find(succ.begin(), succ.end(), e.to) == succ.end()) {
                succ.push_back(e.to);
            }
            local.insert(e.from);
            local.insert(e.to);
        }
        walk.local_templates.assign(local.begin(), local.end());
        walks.push_back(std::move(walk));
    }

    std::vector<std::vector<std::string>> template_tokens;
    for (const auto& tpl : spec.templates) {
        std::vector<std::string> tokens;
        for (const auto piece : split_whitespace(tpl.text)) {
            tokens.emplace_back(piece);
        }
        template_tokens.push_back(std::move(tokens));
    }

    SyntheticCorpus corpus;
    corpus.records.reserve(spec.n_lines);
    corpus.truth.lines.reserve(spec.n_lines);
    for (std::size_t line = 0; line < spec.n_lines; ++line) {
        auto& walk = walks[rng.index(walks.size())];
        const std::vector<std::size_t>* successors = nullptr;
        std::size_t next = walk.start;
        if (walk.current) {
            const auto it = walk.successors.find(*walk.current);
            if (it != walk.successors.end() && !it->second.empty()) {
                successors = &it->second;
                next = (*successors)[rng.index(successors->size())];
            }
        }

        AnomalyKind anomaly = AnomalyKind::none;
        std::optional<std::size_t> quant_slot;
        for (const auto& inj : spec.anomaly_injections) {
            if (!rng.bernoulli(inj.rate)) {
                continue;
            }
            if (inj.kind == AnomalyKind::sequential && walk.current) {
                const auto allowed = [&](std::size_t t) {
                    return successors != nullptr &&
                           std::find(successors->begin(), successors->end(), t) !=
                               successors->end();
                };
                std::vector<std::size_t> candidates;
                for (const auto t : walk.local_templates) {
                    if (!allowed(t)) {
                        candidates.push_back(t);
                    }
                }
                if (candidates.empty()) {
                    for (std::size_t t = 0; t < spec.templates.size(); ++t) {
                        if (!allowed(t)) {
                            candidates.push_back(t);
                        }
                    }
                }
                if (!candidates.empty()) {
                    next = candidates[rng.index(candidates.size())];
                    anomaly = AnomalyKind::sequential;
                }
            } else if (inj.kind == AnomalyKind::quantitative) {
                std::vector<std::size_t> numeric;
                const auto& slots = spec.templates[next].slots;
                for (std::size_t s = 0; s < slots.size(); ++s) {
                    if (std::holds_alternative<NumericRange>(slots[s])) {
                        numeric.push_back(s);
                    }
                }
                if (!numeric.empty()) {
                    quant_slot = numeric[rng.index(numeric.size())];
                    anomaly = AnomalyKind::quantitative;
                }
            }
            break;
        }

        const auto& tpl = spec.templates[next];
        TruthLine truth;
        truth.line_no = line;
        truth.template_id = next;
        truth.anomaly = anomaly;
        std::string message;
        std::size_t slot = 0;
        for (const auto& token : template_tokens[next]) {
            if (!message.empty()) {
                message += ' ';
            }
            if (token != kWildcard) {
                message += token;
                truth.token_labels.push_back(TokenLabel::S);
                continue;
            }
            const auto& gen = tpl.slots[slot];
            if (const auto* range = std::get_if<NumericRange>(&gen)) {
                const std::int64_t value =
                    quant_slot && *quant_slot == slot
                        ? out_of_range_value(*range, rng)
                        : range->lo + static_cast<std::int64_t>(rng.index(
                                          static_cast<std::uint64_t>(range->hi - range->lo) + 1));
                message += std::to_string(value);
            } else {
                const auto& values = std::get<ValueSet>(gen).values;
                message += values[rng.index(values.size())];
            }
            truth.token_labels.push_back(TokenLabel::V);
            ++slot;
        }

        RawLogRecord record;
        record.seq_no = line;
        record.timestamp = spec.start_time + spec.line_interval * static_cast<long>(line);
        record.source = walk.name;
        record.level = "INFO";
        record.message = std::move(message);
        corpus.records.push_back(std::move(record));
        corpus.truth.lines.push_back(std::move(truth));
        walk.current = next;
    }
    return corpus;
}

SyntheticCorpusSpec default_corpus_spec(std::size_t n_lines) {
    const ValueSet ips{{"10.250.11.53", "10.250.11.54", "10.250.14.2", "10.251.0.17",
                        "10.251.3.120"}};
    const ValueSet hosts{{"cmp-01", "cmp-02", "cmp-03", "cmp-07", "cmp-12"}};
    const ValueSet instances{{"i-7f3a9c01", "i-0b22d4e7", "i-91cc0a3f", "i-5d7e2b90",
                              "i-c4a10f66"}};
    const ValueSet volumes{{"vol-01a", "vol-02b", "vol-0c9", "vol-17f"}};
    const ValueSet devices{{"/dev/vdb", "/dev/vdc", "/dev/vdd"}};
    const ValueSet routers{{"r-1a", "r-2b", "r-3c"}};
    const ValueSet tenants{{"acme", "globex", "initech", "umbrella"}};
    const ValueSet users{{"alice", "bob", "carol", "dave"}};
    const ValueSet macs{{"fa:16:3e:01:aa:02", "fa:16:3e:5c:19:7d", "fa:16:3e:b2:00:41"}};
    const ValueSet paths{{"/user/root/part-00001", "/user/root/part-00002",
                          "/tmp/job_201/split.3", "/data/blk_882/meta.1"}};
    const ValueSet ifaces{{"eth0", "eth1", "bond0", "ens3"}};
    const ValueSet groups{{"sg-01", "sg-02", "sg-09"}};
    const NumericRange block{1000000, 9999999};
    const NumericRange port{1024, 65535};

    SyntheticCorpusSpec spec;
    spec.n_lines = n_lines;
    spec.templates = {
        {"Receiving block <*> src: <*> dest: <*>", {block, ips, ips}},
        {"Received block <*> of size <*> from <*>", {block, NumericRange{1024, 67108864}, ips}},
        {"PacketResponder <*> for block <*> terminating", {NumericRange{0, 2}, block}},
        {"Verification succeeded for block <*>", {block}},
        {"Deleting block <*> file <*>", {block, paths}},
        {"BLOCK* NameSystem.allocateBlock: <*> <*>", {paths, block}},
        {"Sending <*> bytes src: <*> dest: <*>", {NumericRange{100, 2000}, ips, ips}},
        {"Link <*> state changed to up", {ifaces}},
        {"Allocated port <*> on router <*> for tenant <*>", {port, routers, tenants}},
        {"Security group rule <*> added to <*>", {NumericRange{1, 500}, groups}},
        {"DHCP lease renewed for <*> ip <*> ttl <*>", {macs, ips, NumericRange{300, 86400}}},
        {"Flow table updated with <*> entries in <*> ms",
         {NumericRange{10, 5000}, NumericRange{1, 250}}},
        {"Tunnel <*> established to peer <*>", {NumericRange{1, 4096}, ips}},
        {"Released port <*> on router <*>", {port, routers}},
        {"Instance <*> spawned on host <*> in <*> seconds",
         {instances, hosts, NumericRange{2, 90}}},
        {"Attaching volume <*> to instance <*> at <*>", {volumes, instances, devices}},
        {"Instance <*> health check passed latency <*> ms", {instances, NumericRange{1, 400}}},
        {"Snapshot <*> created for volume <*> size <*> GB",
         {NumericRange{1, 99999}, volumes, NumericRange{1, 2048}}},
        {"Instance <*> stopped by user <*>", {instances, users}},
        {"Migrating instance <*> from <*> to <*>", {instances, hosts, hosts}},
    };
    spec.workflow = {
        {"storage",
         {{5, 0}, {0, 1}, {1, 2}, {2, 3}, {2, 4}, {3, 5}, {3, 6}, {4, 5}, {6, 0}, {6, 5}}},
        {"network", {{7, 8}, {8, 9}, {8, 12}, {9, 10}, {10, 11}, {11, 8}, {11, 13}, {12, 10},
                     {13, 7}}},
        {"compute", {{14, 15}, {14, 16}, {15, 16}, {16, 17}, {16, 18}, {17, 16}, {17, 19},
                     {18, 19}, {19, 14}}},
    };
    return spec;
}

// ---------------------------------------------------------------------------

std::string format_truth_line(const TruthLine& line) {
    ordered_json doc;
    doc["line_no"] = line.line_no;
    doc["template_id"] = line.template_id;
    auto labels = ordered_json::array();
    for (const auto label : line.token_labels) {
        labels.push_back(label == TokenLabel::S ? "S" : "V");
    }
    doc["token_labels"] = std::move(labels);
    doc["anomaly"] = std::string(to_string(line.anomaly));
    return doc.dump();
}

TruthLine parse_truth_line(std::string_view text) {
    try {
        const auto doc = json::parse(text);
        TruthLine line;
        line.line_no = doc.at("line_no").get<std::size_t>();
        line.template_id = doc.at("template_id").get<std::size_t>();
        for (const auto& label : doc.at("token_labels")) {
            const auto s = label.get<std::string>();
            if (s == "S") {
                line.token_labels.push_back(TokenLabel::S);
            } else if (s == "V") {
                line.token_labels.push_back(TokenLabel::V);
            } else {
                throw ValidationError("token label must be S or V, got '" + s + "'");
            }
        }
        line.anomaly = parse_anomaly_kind(doc.at("anomaly").get<std::string>());
        return line;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed ground-truth record: ") + e.what());
    }
}

void write_truth(std::ostream& out, const GroundTruth& truth) {
    for (const auto& line : truth.lines) {
        out << format_truth_line(line) << '\n';
    }
}

GroundTruth read_truth(std::istream& in) {
    GroundTruth truth;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            truth.lines.push_back(parse_truth_line(line));
        } catch (const ValidationError& e) {
            throw ValidationError("ground truth line " + std::to_string(line_no) + ": " +
                                  e.what());
        }
    }
    return truth;
}

SyntheticCorpusSpec parse_corpus_spec(std::string_view json_text) {
    try {
        const auto doc = json::parse(json_text);
        SyntheticCorpusSpec spec;
        for (const auto& t : doc.at("templates")) {
            TemplateSpec tpl;
            tpl.text = t.at("text").get<std::string>();
            for (const auto& slot : t.value("slots", json::array())) {
                if (slot.contains("range")) {
                    const auto& r = slot.at("range");
                    tpl.slots.emplace_back(
                        NumericRange{r.at(0).get<std::int64_t>(), r.at(1).get<std::int64_t>()});
                } else {
                    tpl.slots.emplace_back(
                        ValueSet{slot.at("values").get<std::vector<std::string>>()});
                }
            }
            spec.templates.push_back(std::move(tpl));
        }
        if (doc.contains("workflow")) {
            for (const auto& [source, edges] : doc.at("workflow").items()) {
                auto& list = spec.workflow[source];
                for (const auto& e : edges) {
                    list.push_back({e.at(0).get<std::size_t>(), e.at(1).get<std::size_t>()});
                }
            }
        }
        spec.n_lines = doc.value("n_lines", std::size_t{0});
        for (const auto& a : doc.value("anomalies", json::array())) {
            spec.anomaly_injections.push_back(
                {parse_anomaly_kind(a.at("kind").get<std::string>()), a.at("rate").get<double>()});
        }
        spec.validate();
        return spec;
    } catch (const json::exception& e) {
        throw ValidationError(std::string("malformed corpus spec: ") + e.what());
    }
}

}  // namespace monilog
