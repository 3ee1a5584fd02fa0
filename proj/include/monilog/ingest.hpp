#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "monilog/common.hpp"

namespace monilog {

/// One ingested log line: HEADER fields plus the free-text MESSAGE.
struct RawLogRecord {
    std::uint64_t seq_no = 0;
    Timestamp timestamp{};
    std::string source;
    std::string level;
    std::string message;

    bool operator==(const RawLogRecord&) const = default;
};

enum class InputFormat { plain, structured };

InputFormat parse_input_format(std::string_view name);

struct LineError {
    std::size_t line_no = 0;  // 1-based
    std::string message;
};

struct ReadResult {
    std::vector<RawLogRecord> records;
    std::vector<LineError> errors;
};

struct ReadOptions {
    InputFormat format = InputFormat::structured;
    /// Source assigned to plain-format lines.
    std::string default_source = "default";
};

/// Reads a stream of records. Malformed structured lines are reported in
/// `errors` and skipped; seq_no counts accepted records from 0. Plain lines
/// get timestamp epoch + seq_no milliseconds so arrival order is preserved
/// by any timestamp-ordering stage downstream.
ReadResult read_stream(std::istream& in, const ReadOptions& options);

/// File variant; throws IoError if the file cannot be opened.
ReadResult read_stream(const std::string& path, const ReadOptions& options);

/// Validates one structured record object (as decoded from JSON text).
/// Throws ValidationError describing the first problem found.
RawLogRecord parse_structured_line(std::string_view line);

/// Newline-delimited structured record (fields ts, source, level, message,
/// seq_no).
std::string format_structured_line(const RawLogRecord& record);

void write_stream(std::ostream& out, const std::vector<RawLogRecord>& records);

// ---------------------------------------------------------------------------
// Noise injection

struct NoiseSpec {
    double duplicate_prob = 0.0;
    std::size_t shuffle_window = 0;
    double shuffle_prob = 0.0;
    double twist_prob = 0.0;
    std::uint64_t seed = 0;

    /// Throws ValidationError when a probability lies outside [0,1].
    void validate() const;
};

enum class TwistKind { insert, remove, replace };

struct NoisyStream {
    std::vector<RawLogRecord> records;
    /// Index into the input sequence that each output record came from.
    std::vector<std::size_t> origin;
    /// Output positions that are duplicated copies (not the first emission).
    std::vector<bool> duplicate;
    /// Output positions whose message was twisted.
    std::vector<bool> twisted;
};

/// Twist, then duplicate, then bounded-displacement shuffle. Duplicates are
/// emitted right after their original with fresh seq_no values above the
/// input's maximum; all other header fields are untouched.
std::vector<RawLogRecord> inject_noise(const std::vector<RawLogRecord>& records,
                                       const NoiseSpec& spec);

/// Same as inject_noise but also returns provenance for each output record.
NoisyStream inject_noise_traced(const std::vector<RawLogRecord>& records, const NoiseSpec& spec);

/// Applies one token insert, remove or replace to a whitespace-tokenized
/// message. `kind` is forced to insert for empty messages.
std::string twist_message(std::string_view message, TwistKind kind, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Synthetic corpora with ground truth

struct NumericRange {
    std::int64_t lo = 0;
    std::int64_t hi = 0;
};

struct ValueSet {
    std::vector<std::string> values;
};

using SlotGenerator = std::variant<NumericRange, ValueSet>;

struct TemplateSpec {
    /// Whitespace-separated tokens; each "<*>" token is a variable slot.
    std::string text;
    /// One generator per slot, in slot order.
    std::vector<SlotGenerator> slots;
};

struct WorkflowEdge {
    std::size_t from = 0;
    std::size_t to = 0;
    bool operator<(const WorkflowEdge& o) const {
        return from != o.from ? from < o.from : to < o.to;
    }
    bool operator==(const WorkflowEdge&) const = default;
};

enum class AnomalyKind { none, sequential, quantitative };

std::string_view to_string(AnomalyKind kind);
AnomalyKind parse_anomaly_kind(std::string_view text);

struct AnomalyInjection {
    AnomalyKind kind = AnomalyKind::sequential;
    double rate = 0.0;
};

struct SyntheticCorpusSpec {
    std::vector<TemplateSpec> templates;
    /// Allowed template transitions, per source name. The first edge's
    /// `from` is where each source's walk starts.
    std::map<std::string, std::vector<WorkflowEdge>> workflow;
    std::size_t n_lines = 0;
    std::vector<AnomalyInjection> anomaly_injections;
    Timestamp start_time = Timestamp{std::chrono::milliseconds{1704067200000}};  // 2024-01-01
    std::chrono::milliseconds line_interval{10};

    void validate() const;
};

enum class TokenLabel { S, V };

struct TruthLine {
    std::size_t line_no = 0;
    std::size_t template_id = 0;
    std::vector<TokenLabel> token_labels;
    AnomalyKind anomaly = AnomalyKind::none;
};

struct GroundTruth {
    std::vector<TruthLine> lines;
};

struct SyntheticCorpus {
    std::vector<RawLogRecord> records;
    GroundTruth truth;
};

SyntheticCorpus generate_synthetic(const SyntheticCorpusSpec& spec, std::uint64_t seed);

/// The 20-template, three-source storage/network/compute corpus used by the
/// CLI `gen` default and the benchmarks.
SyntheticCorpusSpec default_corpus_spec(std::size_t n_lines);

std::string format_truth_line(const TruthLine& line);
TruthLine parse_truth_line(std::string_view text);
void write_truth(std::ostream& out, const GroundTruth& truth);
GroundTruth read_truth(std::istream& in);

SyntheticCorpusSpec parse_corpus_spec(std::string_view json_text);

}  // namespace monilog
