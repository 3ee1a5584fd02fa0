#include "monilog/detect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace monilog {

void SequenceParams::validate() const {
    if (context_len < 1) {
        throw ValidationError("context length h must be >= 1");
    }
    if (top_g < 1) {
        throw ValidationError("top_g must be >= 1");
    }
}

SequenceModel::SequenceModel(SequenceParams params) : params_(params) { params_.validate(); }

SequenceModel::SequenceModel(SequenceParams params, Counts counts)
    : params_(params), counts_(std::move(counts)) {
    params_.validate();
    for (const auto& [source, contexts] : counts_) {
        for (const auto& [context, next] : contexts) {
            if (context.size() != params_.context_len) {
                throw ValidationError("sequence model context has the wrong length");
            }
            vocabulary_.insert(context.begin(), context.end());
            for (const auto& [id, n] : next) {
                vocabulary_.insert(id);
            }
        }
    }
}

void SequenceModel::observe(const std::string& source, std::span<const TemplateId> context,
                            TemplateId next) {
    check_invariant(context.size() == params_.context_len, "context length mismatch");
    ++counts_[source][Context(context.begin(), context.end())][next];
    vocabulary_.insert(context.begin(), context.end());
    vocabulary_.insert(next);
}

const SuccessorCounts* SequenceModel::successors(const std::string& source,
                                                 std::span<const TemplateId> context) const {
    const auto s = counts_.find(source);
    if (s == counts_.end()) {
        return nullptr;
    }
    const auto c = s->second.find(Context(context.begin(), context.end()));
    return c == s->second.end() ? nullptr : &c->second;
}

std::uint64_t SequenceModel::context_total(const std::string& source,
                                           std::span<const TemplateId> context) const {
    const auto* next = successors(source, context);
    std::uint64_t total = 0;
    if (next != nullptr) {
        for (const auto& [id, n] : *next) {
            total += n;
        }
    }
    return total;
}

SequenceModel train_sequence_model(std::span<const ParsedLog> stream, const SequenceParams& params) {
    SequenceModel model(params);
    std::map<std::string, std::deque<TemplateId>> history;
    for (const auto& record : stream) {
        auto& h = history[record.record.source];
        if (h.size() == params.context_len) {
            const Context context(h.begin(), h.end());
            model.observe(record.record.source, context, record.template_id);
            h.pop_front();
        }
        h.push_back(record.template_id);
    }
    return model;
}

std::string_view to_string(VerdictKind kind) {
    switch (kind) {
        case VerdictKind::normal:
            return "normal";
        case VerdictKind::anomalous:
            return "anomalous";
        case VerdictKind::no_verdict:
            return "no-verdict";
    }
    return "no-verdict";
}

Verdict detect_sequential(const SequenceModel& model, const std::string& source,
                          std::span<const TemplateId> context, TemplateId next) {
    const auto& params = model.params();
    const auto total = model.context_total(source, context);
    if (total < params.min_support) {
        return {VerdictKind::no_verdict, 0.0, std::nullopt};
    }
    std::vector<std::pair<std::uint64_t, TemplateId>> ranked;
    std::uint64_t next_count = 0;
    if (const auto* succ = model.successors(source, context)) {
        for (const auto& [id, n] : *succ) {
            ranked.emplace_back(n, id);
            if (id == next) {
                next_count = n;
            }
        }
    }
    std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
        return a.first != b.first ? a.first > b.first : a.second < b.second;
    });
    const std::size_t g = std::min(params.top_g, ranked.size());
    const bool in_top = std::any_of(ranked.begin(), ranked.begin() + static_cast<std::ptrdiff_t>(g),
                                    [&](const auto& r) { return r.second == next; });
    const double p = total == 0 ? 0.0 : static_cast<double>(next_count) / static_cast<double>(total);
    return {in_top ? VerdictKind::normal : VerdictKind::anomalous, 1.0 - p, std::nullopt};
}

// ---------------------------------------------------------------------------

void QuantParams::validate() const {
    if (!(z_threshold > 0.0)) {
        throw ValidationError("z_threshold must be > 0");
    }
}

double SlotStats::variance() const {
    return count < 2 ? 0.0 : m2 / static_cast<double>(count - 1);
}

double SlotStats::stddev() const { return std::sqrt(variance()); }

VariableStats::VariableStats(QuantParams params) : params_(params) { params_.validate(); }

VariableStats::VariableStats(QuantParams params, std::map<SlotKey, SlotStats> slots)
    : params_(params), slots_(std::move(slots)) {
    params_.validate();
}

void VariableStats::update(TemplateId id, std::span<const Binding> bindings) {
    for (const auto& b : bindings) {
        auto& slot = slots_[{id, b.position}];
        double x = 0.0;
        if (parse_number(b.value, x)) {
            // Welford's single-pass update
            ++slot.count;
            const double delta = x - slot.mean;
            slot.mean += delta / static_cast<double>(slot.count);
            slot.m2 += delta * (x - slot.mean);
        } else if (slot.seen_values.size() < params_.max_seen_values) {
            slot.seen_values.insert(b.value);
        }
    }
}

const SlotStats* VariableStats::find(TemplateId id, std::size_t position) const {
    const auto it = slots_.find({id, position});
    return it == slots_.end() ? nullptr : &it->second;
}

Verdict detect_quantitative(const VariableStats& stats, TemplateId id,
                            std::span<const Binding> bindings) {
    const auto& params = stats.params();
    Verdict verdict;
    bool judged = false;
    for (const auto& b : bindings) {
        double x = 0.0;
        if (!parse_number(b.value, x)) {
            continue;
        }
        const auto* slot = stats.find(id, b.position);
        if (slot == nullptr || slot->count < params.min_samples) {
            continue;
        }
        judged = true;
        const double sd = slot->stddev();
        double z = 0.0;
        if (sd > 0.0) {
            z = std::abs(x - slot->mean) / sd;
        } else if (x != slot->mean) {
            z = std::numeric_limits<double>::infinity();
        }
        if (!verdict.position || z > verdict.score) {
            verdict.score = z;
            verdict.position = b.position;
        }
    }
    if (!judged) {
        return {};
    }
    verdict.kind = verdict.score > params.z_threshold ? VerdictKind::anomalous : VerdictKind::normal;
    return verdict;
}

// ---------------------------------------------------------------------------

std::string_view to_string(TriggerKind kind) {
    return kind == TriggerKind::sequential ? "sequential" : "quantitative";
}

TriggerKind parse_trigger_kind(std::string_view text) {
    if (text == "sequential") {
        return TriggerKind::sequential;
    }
    if (text == "quantitative") {
        return TriggerKind::quantitative;
    }
    throw ValidationError("unknown trigger kind '" + std::string(text) + "'");
}

AnomalyReport assemble_report(std::span<const ParsedLog> buffer, std::uint64_t trigger_seq_no,
                              std::size_t window, ReportId id, TriggerKind kind, double score) {
    const auto it = std::find_if(buffer.begin(), buffer.end(), [&](const ParsedLog& r) {
        return r.record.seq_no == trigger_seq_no;
    });
    check_invariant(it != buffer.end(), "report trigger is not in the context buffer");
    const auto index = static_cast<std::size_t>(it - buffer.begin());
    const std::size_t first = index > window ? index - window : 0;
    const std::size_t last = std::min(buffer.size(), index + window + 1);

    AnomalyReport report;
    report.report_id = id;
    report.trigger = kind;
    report.source = it->record.source;
    report.trigger_record = *it;
    report.context_records.assign(buffer.begin() + static_cast<std::ptrdiff_t>(first),
                                  buffer.begin() + static_cast<std::ptrdiff_t>(last));
    report.created_at = it->record.timestamp;
    report.score = score;
    return report;
}

// ---------------------------------------------------------------------------

namespace {

std::string fingerprint(const RawLogRecord& r) {
    std::string fp = std::to_string(r.timestamp.time_since_epoch().count());
    fp += '\x1f';
    fp += r.level;
    fp += '\x1f';
    fp += r.message;
    return fp;
}

bool arrives_before(const ParsedLog& a, const ParsedLog& b) {
    return a.record.timestamp != b.record.timestamp ? a.record.timestamp < b.record.timestamp
                                                    : a.record.seq_no < b.record.seq_no;
}

}  // namespace

StreamNormalizer::StreamNormalizer(NormalizerParams params) : params_(params) {}

StreamNormalizer::StreamNormalizer(NormalizerParams params,
                                   std::map<std::string, SourceBuffer> buffers,
                                   std::uint64_t dropped)
    : params_(params), buffers_(std::move(buffers)), dropped_(dropped) {}

void StreamNormalizer::release(SourceBuffer& buffer, ParsedLog record, std::vector<ParsedLog>& out) {
    if (params_.drop_duplicates) {
        auto fp = fingerprint(record.record);
        if (std::find(buffer.recent.begin(), buffer.recent.end(), fp) != buffer.recent.end()) {
            ++dropped_;
            return;
        }
        buffer.recent.push_back(std::move(fp));
        const std::size_t keep = 2 * std::max<std::size_t>(params_.reorder_window, 1);
        while (buffer.recent.size() > keep) {
            buffer.recent.pop_front();
        }
    }
    if (!buffer.last_released || *buffer.last_released < record.record.timestamp) {
        buffer.last_released = record.record.timestamp;
    }
    out.push_back(std::move(record));
}

void StreamNormalizer::push(ParsedLog record, std::vector<ParsedLog>& out) {
    auto& buffer = buffers_[record.record.source];
    if (params_.reorder_window == 0 ||
        (buffer.last_released && record.record.timestamp < *buffer.last_released)) {
        // Nothing to reorder, or too late to be reordered.
        release(buffer, std::move(record), out);
        return;
    }
    const auto pos = std::upper_bound(buffer.held.begin(), buffer.held.end(), record, arrives_before);
    buffer.held.insert(pos, std::move(record));
    while (buffer.held.size() > params_.reorder_window) {
        ParsedLog first = std::move(buffer.held.front());
        buffer.held.erase(buffer.held.begin());
        release(buffer, std::move(first), out);
    }
}

void StreamNormalizer::flush(std::vector<ParsedLog>& out) {
    for (auto& [source, buffer] : buffers_) {
        for (auto& record : buffer.held) {
            release(buffer, std::move(record), out);
        }
        buffer.held.clear();
    }
}

// ---------------------------------------------------------------------------

void DetectorParams::validate() const {
    sequence.validate();
    quant.validate();
    if (after_timeout.count() < 0) {
        throw ValidationError("after-window timeout must be >= 0");
    }
}

StreamDetector::StreamDetector(DetectorParams params)
    : state_{params,
             SequenceModel(params.sequence),
             VariableStats(params.quant),
             StreamNormalizer(params.normalizer),
             {},
             {},
             1,
             {}} {
    params.validate();
}

StreamDetector::StreamDetector(DetectorState state) : state_(std::move(state)) {
    state_.params.validate();
}

void StreamDetector::learn(const ParsedLog& record, std::deque<TemplateId>& history) {
    const auto h = state_.params.sequence.context_len;
    if (history.size() == h) {
        const Context context(history.begin(), history.end());
        state_.model.observe(record.record.source, context, record.template_id);
    }
    history.push_back(record.template_id);
    while (history.size() > h) {
        history.pop_front();
    }
    state_.stats.update(record.template_id, record.bindings);
}

void StreamDetector::train(const ParsedLog& record) {
    std::vector<ParsedLog> ready;
    state_.normalizer.push(record, ready);
    for (const auto& r : ready) {
        learn(r, state_.training_history[r.record.source]);
        ++state_.counters.trained;
    }
}

void StreamDetector::finish_training() {
    std::vector<ParsedLog> ready;
    state_.normalizer.flush(ready);
    for (const auto& r : ready) {
        learn(r, state_.training_history[r.record.source]);
        ++state_.counters.trained;
    }
    state_.training_history.clear();
    // Detection starts a fresh timeline: no duplicate/late carry-over.
    state_.normalizer = StreamNormalizer(state_.params.normalizer);
}

void StreamDetector::push(const ParsedLog& record) {
    std::vector<ParsedLog> ready;
    state_.normalizer.push(record, ready);
    for (const auto& r : ready) {
        detect(r);
    }
}

void StreamDetector::flush() {
    std::vector<ParsedLog> ready;
    state_.normalizer.flush(ready);
    for (const auto& r : ready) {
        detect(r);
    }
    for (auto& [source, s] : state_.sources) {
        for (const auto& pending : s.pending) {
            close(pending, source);
        }
        s.pending.clear();
    }
}

void StreamDetector::close(const PendingReport& pending, const std::string& source) {
    (void)source;
    closed_.push_back(assemble_report(pending.records, pending.trigger_seq_no,
                                      state_.params.report_window, pending.report_id,
                                      pending.trigger, pending.score));
}

void StreamDetector::detect(const ParsedLog& record) {
    const auto& params = state_.params;
    const auto& source = record.record.source;
    auto& s = state_.sources[source];
    ++state_.counters.processed;

    // Feed the after-windows of reports still open on this source.
    std::vector<PendingReport> still_open;
    for (auto& pending : s.pending) {
        const auto& trigger_ts = pending.records[pending.records.size() - 1 - pending.after]
                                     .record.timestamp;
        if (record.record.timestamp > trigger_ts + params.after_timeout) {
            close(pending, source);
            continue;
        }
        pending.records.push_back(record);
        if (++pending.after >= params.report_window) {
            close(pending, source);
            continue;
        }
        still_open.push_back(std::move(pending));
    }
    s.pending = std::move(still_open);

    Verdict sequential;
    const bool full_context = s.history.size() == params.sequence.context_len;
    if (full_context && (params.judge_novel_templates || state_.model.knows(record.template_id))) {
        const Context context(s.history.begin(), s.history.end());
        sequential = detect_sequential(state_.model, source, context, record.template_id);
    }
    const Verdict quantitative =
        detect_quantitative(state_.stats, record.template_id, record.bindings);

    std::optional<PendingReport> opened;
    if (sequential.kind == VerdictKind::anomalous) {
        ++state_.counters.sequential_anomalies;
        opened = PendingReport{state_.next_report_id++, TriggerKind::sequential, sequential.score,
                               {}, record.record.seq_no, 0};
    } else if (quantitative.kind == VerdictKind::anomalous) {
        ++state_.counters.quantitative_anomalies;
        opened = PendingReport{state_.next_report_id++, TriggerKind::quantitative,
                               quantitative.score, {}, record.record.seq_no, 0};
    }
    if (opened) {
        opened->records.assign(s.recent.begin(), s.recent.end());
        opened->records.push_back(record);
        if (params.report_window == 0) {
            close(*opened, source);
        } else {
            s.pending.push_back(std::move(*opened));
        }
    }

    if (params.online_update) {
        learn(record, s.history);
    } else {
        s.history.push_back(record.template_id);
        while (s.history.size() > params.sequence.context_len) {
            s.history.pop_front();
        }
    }
    if (params.report_window > 0) {
        s.recent.push_back(record);
        while (s.recent.size() > params.report_window) {
            s.recent.pop_front();
        }
    }
}

std::vector<AnomalyReport> StreamDetector::take_closed() {
    std::sort(closed_.begin(), closed_.end(),
              [](const auto& a, const auto& b) { return a.report_id < b.report_id; });
    std::vector<AnomalyReport> out;
    out.swap(closed_);
    return out;
}

std::vector<AnomalyReport> StreamDetector::open_reports() const {
    std::vector<AnomalyReport> out;
    for (const auto& [source, s] : state_.sources) {
        for (const auto& pending : s.pending) {
            out.push_back(assemble_report(pending.records, pending.trigger_seq_no,
                                          state_.params.report_window, pending.report_id,
                                          pending.trigger, pending.score));
        }
    }
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.report_id < b.report_id; });
    return out;
}

}  // namespace monilog
