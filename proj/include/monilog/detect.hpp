#pragma once

#include <chrono>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "monilog/parser.hpp"

namespace monilog {

// ---------------------------------------------------------------------------
// Sequential model: per-source (context of h template ids) -> next counters.

struct SequenceParams {
    std::size_t context_len = 3;
    std::uint64_t min_support = 5;
    std::size_t top_g = 9;

    void validate() const;
    bool operator==(const SequenceParams&) const = default;
};

using Context = std::vector<TemplateId>;
using SuccessorCounts = std::map<TemplateId, std::uint64_t>;

class SequenceModel {
public:
    using SourceCounts = std::map<Context, SuccessorCounts>;
    using Counts = std::map<std::string, SourceCounts>;

    explicit SequenceModel(SequenceParams params = {});
    SequenceModel(SequenceParams params, Counts counts);

    void observe(const std::string& source, std::span<const TemplateId> context, TemplateId next);

    /// nullptr when the context was never observed for this source.
    const SuccessorCounts* successors(const std::string& source,
                                      std::span<const TemplateId> context) const;
    std::uint64_t context_total(const std::string& source,
                                std::span<const TemplateId> context) const;

    /// True when the template occurred in training (as context or successor).
    bool knows(TemplateId id) const { return vocabulary_.count(id) != 0; }

    bool empty() const { return counts_.empty(); }
    const SequenceParams& params() const { return params_; }
    const Counts& counts() const { return counts_; }

    bool operator==(const SequenceModel& o) const {
        return params_ == o.params_ && counts_ == o.counts_;
    }

private:
    SequenceParams params_;
    Counts counts_;
    std::set<TemplateId> vocabulary_;
};

/// Slides a window of `context_len` over each source's sub-stream.
SequenceModel train_sequence_model(std::span<const ParsedLog> stream, const SequenceParams& params);

enum class VerdictKind { normal, anomalous, no_verdict };

std::string_view to_string(VerdictKind kind);

struct Verdict {
    VerdictKind kind = VerdictKind::no_verdict;
    double score = 0.0;
    /// Quantitative verdicts: token position of the max-|z| slot.
    std::optional<std::size_t> position;
};

/// No verdict when the context was seen fewer than min_support times;
/// otherwise anomalous iff `next` is outside the top_g successors (ranked by
/// count, then by lower id). Score is 1 - P(next | context).
Verdict detect_sequential(const SequenceModel& model, const std::string& source,
                          std::span<const TemplateId> context, TemplateId next);

// ---------------------------------------------------------------------------
// Quantitative model: running moments per (template, token position).

struct QuantParams {
    double z_threshold = 3.0;
    std::uint64_t min_samples = 50;
    std::size_t max_seen_values = 1000;

    void validate() const;
    bool operator==(const QuantParams&) const = default;
};

struct SlotStats {
    std::uint64_t count = 0;
    double mean = 0.0;
    double m2 = 0.0;
    std::set<std::string> seen_values;

    /// Sample variance; 0 below two observations.
    double variance() const;
    double stddev() const;

    bool operator==(const SlotStats&) const = default;
};

using SlotKey = std::pair<TemplateId, std::size_t>;

class VariableStats {
public:
    explicit VariableStats(QuantParams params = {});
    VariableStats(QuantParams params, std::map<SlotKey, SlotStats> slots);

    /// Numeric values update the moments; others enter the capped seen set.
    void update(TemplateId id, std::span<const Binding> bindings);

    const SlotStats* find(TemplateId id, std::size_t position) const;
    const QuantParams& params() const { return params_; }
    const std::map<SlotKey, SlotStats>& slots() const { return slots_; }

    bool operator==(const VariableStats&) const = default;

private:
    QuantParams params_;
    std::map<SlotKey, SlotStats> slots_;
};

/// Anomalous iff some numeric slot with at least min_samples observations
/// has |z| above z_threshold; no verdict when no slot qualifies.
Verdict detect_quantitative(const VariableStats& stats, TemplateId id,
                            std::span<const Binding> bindings);

// ---------------------------------------------------------------------------
// Reports

enum class TriggerKind { sequential, quantitative };

std::string_view to_string(TriggerKind kind);
TriggerKind parse_trigger_kind(std::string_view text);

struct AnomalyReport {
    ReportId report_id = 0;
    TriggerKind trigger = TriggerKind::sequential;
    std::string source;
    ParsedLog trigger_record;
    std::vector<ParsedLog> context_records;
    Timestamp created_at{};
    double score = 0.0;

    bool operator==(const AnomalyReport&) const = default;
};

/// Builds a report from a same-source, time-ordered buffer: up to `window`
/// records before and after the trigger. Aborts if the trigger (matched by
/// seq_no) is not in the buffer.
AnomalyReport assemble_report(std::span<const ParsedLog> buffer, std::uint64_t trigger_seq_no,
                              std::size_t window, ReportId id, TriggerKind kind, double score);

// ---------------------------------------------------------------------------
// Stream normalization: per-source timestamp reordering and duplicate drop.

struct NormalizerParams {
    /// Records held per source before release; 0 disables reordering.
    std::size_t reorder_window = 8;
    bool drop_duplicates = true;

    bool operator==(const NormalizerParams&) const = default;
};

class StreamNormalizer {
public:
    struct SourceBuffer {
        std::vector<ParsedLog> held;              // sorted by (timestamp, seq_no)
        std::deque<std::string> recent;           // fingerprints of released records
        std::optional<Timestamp> last_released;

        bool operator==(const SourceBuffer&) const = default;
    };

    explicit StreamNormalizer(NormalizerParams params = {});
    StreamNormalizer(NormalizerParams params, std::map<std::string, SourceBuffer> buffers,
                     std::uint64_t dropped);

    /// Appends records that are ready, in per-source timestamp order.
    void push(ParsedLog record, std::vector<ParsedLog>& out);
    void flush(std::vector<ParsedLog>& out);

    std::uint64_t dropped_duplicates() const { return dropped_; }
    const NormalizerParams& params() const { return params_; }
    const std::map<std::string, SourceBuffer>& buffers() const { return buffers_; }

    bool operator==(const StreamNormalizer&) const = default;

private:
    void release(SourceBuffer& buffer, ParsedLog record, std::vector<ParsedLog>& out);

    NormalizerParams params_;
    std::map<std::string, SourceBuffer> buffers_;
    std::uint64_t dropped_ = 0;
};

// ---------------------------------------------------------------------------
// Online driver

struct DetectorParams {
    SequenceParams sequence;
    QuantParams quant;
    NormalizerParams normalizer;
    std::size_t report_window = 10;
    std::chrono::milliseconds after_timeout{5000};
    /// Keep learning from the detection stream.
    bool online_update = false;
    /// Judge transitions into templates never seen in training. Off by
    /// default: new templates stem from changed log statements, which the
    /// sequence model has no basis to judge.
    bool judge_novel_templates = false;

    void validate() const;
    bool operator==(const DetectorParams&) const = default;
};

struct PendingReport {
    ReportId report_id = 0;
    TriggerKind trigger = TriggerKind::sequential;
    double score = 0.0;
    std::vector<ParsedLog> records;
    std::uint64_t trigger_seq_no = 0;
    std::size_t after = 0;

    bool operator==(const PendingReport&) const = default;
};

struct SourceDetectionState {
    std::deque<TemplateId> history;
    std::deque<ParsedLog> recent;
    std::vector<PendingReport> pending;

    bool operator==(const SourceDetectionState&) const = default;
};

struct DetectorCounters {
    std::uint64_t trained = 0;
    std::uint64_t processed = 0;
    std::uint64_t sequential_anomalies = 0;
    std::uint64_t quantitative_anomalies = 0;

    bool operator==(const DetectorCounters&) const = default;
};

/// Full serializable state of a StreamDetector.
struct DetectorState {
    DetectorParams params;
    SequenceModel model;
    VariableStats stats;
    StreamNormalizer normalizer;
    std::map<std::string, std::deque<TemplateId>> training_history;
    std::map<std::string, SourceDetectionState> sources;
    ReportId next_report_id = 1;
    DetectorCounters counters;

    bool operator==(const DetectorState&) const = default;
};

/// Train phase feeds the models; detect phase emits reports. Single-writer.
class StreamDetector {
public:
    explicit StreamDetector(DetectorParams params = {});
    explicit StreamDetector(DetectorState state);

    void train(const ParsedLog& record);
    /// Drains the normalizer into the models and clears training history.
    void finish_training();

    void push(const ParsedLog& record);
    /// Releases held records and closes every pending report.
    void flush();

    /// Reports whose after-window closed since the last call, by id.
    std::vector<AnomalyReport> take_closed();
    /// Reports still collecting after-context, as assembled so far.
    std::vector<AnomalyReport> open_reports() const;

    const SequenceModel& model() const { return state_.model; }
    const VariableStats& stats() const { return state_.stats; }
    const DetectorState& state() const { return state_; }
    const DetectorCounters& counters() const { return state_.counters; }

private:
    void learn(const ParsedLog& record, std::deque<TemplateId>& history);
    void detect(const ParsedLog& record);
    void close(const PendingReport& pending, const std::string& source);

    DetectorState state_;
    std::vector<AnomalyReport> closed_;
};

}  // namespace monilog
