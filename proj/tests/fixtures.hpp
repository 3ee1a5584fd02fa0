#pragma once

#include <array>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "monilog/classify.hpp"
#include "monilog/detect.hpp"
#include "monilog/formats.hpp"
#include "monilog/ingest.hpp"
#include "monilog/parser.hpp"

namespace monilog::testing {

inline const std::array<std::string, 4> kTable1 = {
    "Sending 138 bytes src: 10.250.11.53 dest: /10.250.11.53",
    "Error while receiving data src: 10.250.11.53 dest: /10.250.11.53",
    "Sending 745675869 bytes src: 10.250.11.53 dest: /10.250.11.53",
    "Failed to verify data integrity src: 10.250.11.53 dest: /10.250.11.53",
};

inline std::vector<std::string> words(const std::string& text) {
    std::vector<std::string> out;
    for (const auto piece : split_whitespace(text)) {
        out.emplace_back(piece);
    }
    return out;
}

inline RawLogRecord make_record(std::uint64_t seq, std::string message,
                                std::string source = "node", std::int64_t ms = -1) {
    RawLogRecord r;
    r.seq_no = seq;
    r.timestamp = Timestamp{std::chrono::milliseconds{ms < 0 ? static_cast<std::int64_t>(seq) * 10
                                                             : ms}};
    r.source = std::move(source);
    r.level = "INFO";
    r.message = std::move(message);
    return r;
}

/// Parses every record in order with one miner.
inline std::vector<ParsedLog> parse_all(TemplateMiner& miner,
                                        const std::vector<RawLogRecord>& records) {
    const Preprocessor pre;
    std::vector<ParsedLog> out;
    out.reserve(records.size());
    for (const auto& r : records) {
        out.push_back(parse_record(miner, pre, r));
    }
    return out;
}

/// Parsed log with a given template and nothing else; for detector tests.
inline ParsedLog parsed(std::uint64_t seq, TemplateId id, std::string source = "node",
                        std::vector<Binding> bindings = {}) {
    ParsedLog p;
    p.record = make_record(seq, "t" + std::to_string(id), std::move(source));
    p.template_id = id;
    p.bindings = std::move(bindings);
    return p;
}

/// Runs a trained detector over a stream and returns every report.
inline std::vector<AnomalyReport> run_detector(StreamDetector detector,
                                               const std::vector<ParsedLog>& stream) {
    for (const auto& r : stream) {
        detector.push(r);
    }
    detector.flush();
    return detector.take_closed();
}

/// Report whose context holds the given template ids (trigger = last one).
inline AnomalyReport family_report(ReportId id, const std::vector<TemplateId>& templates,
                                   TriggerKind kind = TriggerKind::sequential) {
    AnomalyReport r;
    r.report_id = id;
    r.trigger = kind;
    r.source = "node";
    for (std::size_t i = 0; i < templates.size(); ++i) {
        r.context_records.push_back(parsed(i, templates[i]));
    }
    r.trigger_record = r.context_records.back();
    return r;
}

/// Random report from a family: 8..14 context records drawn from `pool`.
inline AnomalyReport sample_family(std::mt19937_64& rng, ReportId id,
                                   const std::vector<TemplateId>& pool,
                                   TriggerKind kind = TriggerKind::sequential) {
    std::uniform_int_distribution<std::size_t> len(8, 14);
    std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
    std::vector<TemplateId> ids;
    const auto n = len(rng);
    for (std::size_t i = 0; i < n; ++i) {
        ids.push_back(pool[pick(rng)]);
    }
    return family_report(id, ids, kind);
}

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path temp_dir(const std::string& name) {
    static std::mt19937_64 rng(std::random_device{}());
    auto dir = std::filesystem::temp_directory_path() /
               ("monilog-" + name + "-" + std::to_string(rng() % 1000000000));
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

inline const std::vector<std::string> kWorkflow = {"alpha step begins", "beta step runs",
                                                   "gamma step ends", "delta step cleans"};

/// Wire-format record `i` of a stream with 100 ms spacing.
inline Json record_json(std::size_t i, const std::string& message,
                        const std::string& source = "web") {
    Json j;
    j["ts"] = format_timestamp(Timestamp{std::chrono::milliseconds{1704067200000 + 100 * i}});
    j["source"] = source;
    j["level"] = "INFO";
    j["message"] = message;
    return j;
}

/// `n` workflow lines starting at stream position `first`; `swap` replaces
/// the line at that offset with the one two steps ahead.
inline Json workflow_batch(std::size_t first, std::size_t n,
                           std::optional<std::size_t> swap = {}) {
    Json batch = Json::array();
    for (std::size_t i = 0; i < n; ++i) {
        const auto step = (first + i) % kWorkflow.size();
        const auto use = swap && *swap == i ? (step + 2) % kWorkflow.size() : step;
        batch.push_back(record_json(first + i, kWorkflow[use]));
    }
    return batch;
}

/// Writes a training stream of the plain workflow and returns its path.
inline std::filesystem::path write_training(const std::filesystem::path& dir,
                                            std::size_t n = 400) {
    const auto path = dir / "train.ndjson";
    std::ofstream out(path);
    for (const auto& j : workflow_batch(0, n)) {
        out << j.dump() << '\n';
    }
    return path;
}

}  // namespace monilog::testing
