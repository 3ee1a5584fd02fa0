#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "fixtures.hpp"
#include "monilog/detect.hpp"

using namespace monilog;
using namespace monilog::testing;

namespace {

std::vector<ParsedLog> cycle(const std::vector<TemplateId>& ids, std::size_t repeats,
                             const std::string& source = "node", std::uint64_t first_seq = 0) {
    std::vector<ParsedLog> out;
    for (std::size_t r = 0; r < repeats; ++r) {
        for (const auto id : ids) {
            out.push_back(parsed(first_seq + out.size(), id, source));
        }
    }
    return out;
}

std::vector<Binding> value(const std::string& v, std::size_t position = 1) {
    return {Binding{position, v}};
}

struct TwoPass {
    double mean = 0.0;
    double variance = 0.0;
};

TwoPass two_pass(const std::vector<double>& xs) {
    TwoPass r;
    for (const double x : xs) {
        r.mean += x;
    }
    r.mean /= static_cast<double>(xs.size());
    for (const double x : xs) {
        r.variance += (x - r.mean) * (x - r.mean);
    }
    r.variance /= static_cast<double>(xs.size() - 1);
    return r;
}

StreamDetector trained_detector(const DetectorParams& params, const std::vector<ParsedLog>& stream) {
    StreamDetector d(params);
    for (const auto& r : stream) {
        d.train(r);
    }
    d.finish_training();
    return d;
}

}  // namespace

// Sequence model

TEST(TrainSequenceModel, AlternatingStreamHasTwoContexts) {
    const auto model = train_sequence_model(cycle({1, 2}, 4), SequenceParams{1, 1, 1});
    const auto& counts = model.counts().at("node");
    ASSERT_EQ(counts.size(), 2u);
    EXPECT_EQ(counts.at(Context{1}), (SuccessorCounts{{2, 4}}));
    EXPECT_EQ(counts.at(Context{2}), (SuccessorCounts{{1, 3}}));
}

TEST(TrainSequenceModel, EmptyStreamGivesEmptyModel) {
    const auto model = train_sequence_model({}, SequenceParams{});
    EXPECT_TRUE(model.empty());
    EXPECT_THROW(SequenceModel(SequenceParams{0, 1, 1}), ValidationError);
    EXPECT_THROW(SequenceModel(SequenceParams{1, 1, 0}), ValidationError);
}

TEST(TrainSequenceModel, SourcesAreModeledSeparately) {
    std::vector<ParsedLog> stream;
    for (std::uint64_t i = 0; i < 10; ++i) {
        stream.push_back(parsed(2 * i, 1 + i % 2, "a"));
        stream.push_back(parsed(2 * i + 1, 5, "b"));
    }
    const auto model = train_sequence_model(stream, SequenceParams{1, 1, 1});
    EXPECT_EQ(model.counts().at("a").size(), 2u);
    EXPECT_EQ(model.counts().at("b").at(Context{5}), (SuccessorCounts{{5, 9}}));
}

TEST(TrainSequenceModel, ObservedPairsFollowWorkflowEdges) {
    const auto spec = default_corpus_spec(3000);
    const auto corpus = generate_synthetic(spec, 31);
    std::vector<ParsedLog> stream;
    for (std::size_t i = 0; i < corpus.records.size(); ++i) {
        auto p = parsed(i, corpus.truth.lines[i].template_id, corpus.records[i].source);
        stream.push_back(p);
    }
    const auto model = train_sequence_model(stream, SequenceParams{1, 1, 1});
    for (const auto& [source, contexts] : model.counts()) {
        std::set<WorkflowEdge> edges(spec.workflow.at(source).begin(), spec.workflow.at(source).end());
        for (const auto& [context, next] : contexts) {
            for (const auto& [id, n] : next) {
                EXPECT_TRUE(edges.count({context[0], id})) << source << " " << context[0] << "->" << id;
            }
        }
    }
}

// Sequential detection

TEST(DetectSequential, OnlyObservedSuccessorIsNormal) {
    const auto model = train_sequence_model(cycle({1, 2}, 10), SequenceParams{1, 5, 1});
    const auto v = detect_sequential(model, "node", Context{1}, 2);
    EXPECT_EQ(v.kind, VerdictKind::normal);
    EXPECT_DOUBLE_EQ(v.score, 0.0);
    const auto bad = detect_sequential(model, "node", Context{1}, 3);
    EXPECT_EQ(bad.kind, VerdictKind::anomalous);
    EXPECT_DOUBLE_EQ(bad.score, 1.0);
}

TEST(DetectSequential, Table1DeviationNeedsSupportOrZeroFloor) {
    // Normal flow L1 -> L2; the deviation puts L4 between them.
    const auto flow = cycle({1, 2}, 20);
    const auto strict = train_sequence_model(flow, SequenceParams{2, 5, 9});
    EXPECT_EQ(detect_sequential(strict, "node", Context{1, 4}, 2).kind, VerdictKind::no_verdict);
    const auto loose = train_sequence_model(flow, SequenceParams{2, 0, 1});
    const auto v = detect_sequential(loose, "node", Context{1, 4}, 2);
    EXPECT_EQ(v.kind, VerdictKind::anomalous);
    EXPECT_DOUBLE_EQ(v.score, 1.0);
}

TEST(DetectSequential, TopGRanksByCountThenLowerId) {
    SequenceModel model(SequenceParams{1, 1, 2});
    const Context ctx{7};
    for (const auto [id, n] : {std::pair<TemplateId, int>{3, 5}, {4, 2}, {5, 2}, {6, 1}}) {
        for (int i = 0; i < n; ++i) {
            model.observe("s", ctx, id);
        }
    }
    EXPECT_EQ(detect_sequential(model, "s", ctx, 3).kind, VerdictKind::normal);
    EXPECT_EQ(detect_sequential(model, "s", ctx, 4).kind, VerdictKind::normal);
    EXPECT_EQ(detect_sequential(model, "s", ctx, 5).kind, VerdictKind::anomalous);
    EXPECT_NEAR(detect_sequential(model, "s", ctx, 5).score, 1.0 - 2.0 / 10.0, 1e-12);
    EXPECT_EQ(detect_sequential(model, "other", ctx, 3).kind, VerdictKind::no_verdict);
}

TEST(DetectSequentialProperty, LargeTopGIsNeverAnomalousForSeenSuccessors) {
    std::mt19937_64 rng(41);
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<ParsedLog> stream;
        for (std::uint64_t i = 0; i < 200; ++i) {
            stream.push_back(parsed(i, 1 + rng() % 6));
        }
        const auto model = train_sequence_model(stream, SequenceParams{1, 1, 6});
        for (TemplateId c = 1; c <= 6; ++c) {
            for (TemplateId n = 1; n <= 6; ++n) {
                EXPECT_NE(detect_sequential(model, "node", Context{c}, n).kind, VerdictKind::anomalous);
            }
        }
    }
}

TEST(DetectSequentialProperty, OrderPreservingRelabelingKeepsVerdicts) {
    std::mt19937_64 rng(42);
    const auto relabel = [](TemplateId id) { return 3 * id + 11; };
    for (int trial = 0; trial < 20; ++trial) {
        const SequenceParams params{2, 1 + rng() % 3, 1 + rng() % 4};
        std::vector<ParsedLog> stream;
        std::vector<ParsedLog> mapped;
        for (std::uint64_t i = 0; i < 300; ++i) {
            const TemplateId id = 1 + rng() % 5;
            stream.push_back(parsed(i, id));
            mapped.push_back(parsed(i, relabel(id)));
        }
        const auto a = train_sequence_model(stream, params);
        const auto b = train_sequence_model(mapped, params);
        for (TemplateId x = 1; x <= 5; ++x) {
            for (TemplateId y = 1; y <= 5; ++y) {
                for (TemplateId n = 1; n <= 6; ++n) {
                    const auto va = detect_sequential(a, "node", Context{x, y}, n);
                    const auto vb =
                        detect_sequential(b, "node", Context{relabel(x), relabel(y)}, relabel(n));
                    EXPECT_EQ(va.kind, vb.kind);
                    EXPECT_DOUBLE_EQ(va.score, vb.score);
                }
            }
        }
    }
}

TEST(DetectSequentialProperty, ColdStartNeverFlags) {
    std::mt19937_64 rng(43);
    const auto model = train_sequence_model({}, SequenceParams{3, 1, 1});
    for (int i = 0; i < 200; ++i) {
        const Context ctx{rng() % 9, rng() % 9, rng() % 9};
        EXPECT_EQ(detect_sequential(model, "node", ctx, rng() % 9).kind, VerdictKind::no_verdict);
    }
}

// Variable statistics

TEST(VariableStats, TwoPointMoments) {
    VariableStats stats;
    stats.update(1, value("2"));
    stats.update(1, value("4"));
    const auto* slot = stats.find(1, 1);
    ASSERT_NE(slot, nullptr);
    EXPECT_EQ(slot->count, 2u);
    EXPECT_DOUBLE_EQ(slot->mean, 3.0);
    EXPECT_DOUBLE_EQ(slot->variance(), 2.0);
}

TEST(VariableStats, NonNumericValuesEnterSeenSet) {
    VariableStats stats(QuantParams{3.0, 50, 2});
    stats.update(1, value("alice"));
    const auto* slot = stats.find(1, 1);
    ASSERT_NE(slot, nullptr);
    EXPECT_EQ(slot->count, 0u);
    EXPECT_DOUBLE_EQ(slot->mean, 0.0);
    EXPECT_EQ(slot->seen_values, (std::set<std::string>{"alice"}));
    stats.update(1, value("bob"));
    stats.update(1, value("carol"));
    EXPECT_EQ(stats.find(1, 1)->seen_values.size(), 2u);
    EXPECT_EQ(stats.find(2, 1), nullptr);
}

TEST(VariableStatsProperty, MomentsMatchTwoPassOracle) {
    std::mt19937_64 rng(44);
    for (int trial = 0; trial < 20; ++trial) {
        std::uniform_real_distribution<double> spread(0.1, 1e6);
        std::normal_distribution<double> draw(spread(rng), spread(rng));
        VariableStats stats;
        std::vector<double> xs;
        const std::size_t n = 2 + rng() % 1000;
        for (std::size_t i = 0; i < n; ++i) {
            char buf[64];
            std::snprintf(buf, sizeof buf, "%.17g", draw(rng));
            xs.push_back(std::stod(buf));
            stats.update(4, value(buf, 0));
        }
        const auto oracle = two_pass(xs);
        const auto* slot = stats.find(4, 0);
        EXPECT_NEAR(slot->mean, oracle.mean, 1e-9 * std::abs(oracle.mean));
        EXPECT_NEAR(slot->variance(), oracle.variance, 1e-9 * oracle.variance);
    }
}

// Quantitative detection

TEST(DetectQuantitative, Table1ByteCountOutlier) {
    VariableStats stats;
    std::mt19937_64 rng(45);
    std::uniform_int_distribution<int> near(130, 146);
    for (int i = 0; i < 60; ++i) {
        stats.update(1, value(std::to_string(near(rng))));
    }
    EXPECT_EQ(detect_quantitative(stats, 1, value("138")).kind, VerdictKind::normal);
    const auto v = detect_quantitative(stats, 1, value("745675869"));
    EXPECT_EQ(v.kind, VerdictKind::anomalous);
    EXPECT_EQ(v.position, 1u);
    EXPECT_GT(v.score, 1e6);
}

TEST(DetectQuantitative, MeanValueScoresZero) {
    VariableStats stats(QuantParams{3.0, 2, 1000});
    stats.update(1, value("2"));
    stats.update(1, value("4"));
    const auto v = detect_quantitative(stats, 1, value("3"));
    EXPECT_EQ(v.kind, VerdictKind::normal);
    EXPECT_DOUBLE_EQ(v.score, 0.0);
}

TEST(DetectQuantitative, UniformSampleCenterIsNormal) {
    std::mt19937_64 rng(46);
    std::uniform_real_distribution<double> u(100.0, 200.0);
    VariableStats stats;
    std::vector<double> xs;
    for (int i = 0; i < 100; ++i) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.17g", u(rng));
        xs.push_back(std::stod(buf));
        stats.update(1, value(buf));
    }
    const auto oracle = two_pass(xs);
    const auto v = detect_quantitative(stats, 1, value("150"));
    EXPECT_EQ(v.kind, VerdictKind::normal);
    EXPECT_NEAR(v.score, std::abs(150.0 - oracle.mean) / std::sqrt(oracle.variance), 1e-9);
}

TEST(DetectQuantitative, ConstantSlotFlagsAnyOtherValue) {
    VariableStats stats(QuantParams{3.0, 5, 1000});
    for (int i = 0; i < 5; ++i) {
        stats.update(1, value("7"));
    }
    EXPECT_EQ(detect_quantitative(stats, 1, value("7")).kind, VerdictKind::normal);
    const auto v = detect_quantitative(stats, 1, value("8"));
    EXPECT_EQ(v.kind, VerdictKind::anomalous);
    EXPECT_TRUE(std::isinf(v.score));
}

TEST(DetectQuantitative, NoVerdictBelowMinSamplesOrWithoutNumbers) {
    VariableStats stats(QuantParams{3.0, 10, 1000});
    for (int i = 0; i < 9; ++i) {
        stats.update(1, value(std::to_string(i)));
    }
    EXPECT_EQ(detect_quantitative(stats, 1, value("1000")).kind, VerdictKind::no_verdict);
    EXPECT_EQ(detect_quantitative(stats, 1, value("abc")).kind, VerdictKind::no_verdict);
    EXPECT_EQ(detect_quantitative(stats, 2, {}).kind, VerdictKind::no_verdict);
}

TEST(DetectQuantitative, ReportsMaxZSlot) {
    VariableStats stats(QuantParams{3.0, 3, 1000});
    for (const auto* v : {"10", "11", "12", "13"}) {
        stats.update(1, std::vector<Binding>{{0, v}, {2, v}});
    }
    const auto v = detect_quantitative(stats, 1, std::vector<Binding>{{0, "14"}, {2, "40"}});
    EXPECT_EQ(v.kind, VerdictKind::anomalous);
    EXPECT_EQ(v.position, 2u);
}

// Report assembly

TEST(AssembleReport, WindowAroundMiddleTrigger) {
    const auto buffer = cycle({1, 2, 3, 4, 5}, 1);
    const auto r = assemble_report(buffer, 2, 2, 9, TriggerKind::sequential, 0.5);
    EXPECT_EQ(r.report_id, 9u);
    EXPECT_EQ(r.context_records.size(), 5u);
    EXPECT_EQ(r.trigger_record, buffer[2]);
    EXPECT_EQ(r.created_at, buffer[2].record.timestamp);
    EXPECT_EQ(r.source, "node");
}

TEST(AssembleReport, TriggerAtStreamStart) {
    const auto buffer = cycle({1, 2, 3, 4, 5}, 1);
    const auto r = assemble_report(buffer, 0, 2, 1, TriggerKind::quantitative, 4.0);
    ASSERT_EQ(r.context_records.size(), 3u);
    EXPECT_EQ(r.context_records.front(), buffer[0]);
}

TEST(AssembleReportDeathTest, AbsentTriggerAborts) {
    const auto buffer = cycle({1, 2, 3}, 1);
    EXPECT_DEATH(assemble_report(buffer, 99, 2, 1, TriggerKind::sequential, 1.0),
                 "trigger is not in the context buffer");
}

// Stream normalization

TEST(StreamNormalizer, ReordersWithinWindow) {
    StreamNormalizer n(NormalizerParams{3, true});
    std::vector<ParsedLog> out;
    for (const std::uint64_t seq : {1, 0, 3, 2, 4}) {
        n.push(parsed(seq, seq + 1), out);
    }
    n.flush(out);
    ASSERT_EQ(out.size(), 5u);
    for (std::uint64_t i = 0; i < 5; ++i) {
        EXPECT_EQ(out[i].record.seq_no, i);
    }
}

TEST(StreamNormalizer, DropsAdjacentDuplicates) {
    StreamNormalizer n;
    std::vector<ParsedLog> out;
    auto a = parsed(0, 1);
    auto copy = a;
    copy.record.seq_no = 100;
    n.push(a, out);
    n.push(copy, out);
    n.push(parsed(1, 2), out);
    n.flush(out);
    EXPECT_EQ(out.size(), 2u);
    EXPECT_EQ(n.dropped_duplicates(), 1u);
}

TEST(StreamNormalizer, LateRecordsPassThroughAfterRelease) {
    StreamNormalizer n(NormalizerParams{1, true});
    std::vector<ParsedLog> out;
    n.push(parsed(5, 1), out);
    n.push(parsed(6, 2), out);
    ASSERT_EQ(out.size(), 1u);
    n.push(parsed(2, 3), out);
    EXPECT_EQ(out.size(), 2u);
    EXPECT_EQ(out.back().record.seq_no, 2u);
}

TEST(StreamNormalizerProperty, ShuffledStreamIsRestored) {
    std::mt19937_64 rng(47);
    for (int trial = 0; trial < 30; ++trial) {
        const std::size_t w = 1 + rng() % 5;
        std::vector<RawLogRecord> records;
        for (std::uint64_t i = 0; i < 80; ++i) {
            records.push_back(make_record(i, "m " + std::to_string(i)));
        }
        const auto noisy = inject_noise(records, NoiseSpec{0.2, w, 0.7, 0.0, rng()});
        StreamNormalizer n(NormalizerParams{2 * w, true});
        std::vector<ParsedLog> out;
        for (const auto& r : noisy) {
            ParsedLog p;
            p.record = r;
            n.push(p, out);
        }
        n.flush(out);
        ASSERT_EQ(out.size(), records.size());
        for (std::size_t i = 0; i < out.size(); ++i) {
            EXPECT_EQ(out[i].record.message, records[i].message);
        }
    }
}

// Online driver

TEST(StreamDetector, ReportsTable1DeviationWithContext) {
    DetectorParams params;
    params.sequence = SequenceParams{1, 5, 1};
    params.report_window = 2;
    params.judge_novel_templates = true;
    auto detector = trained_detector(params, cycle({1, 2}, 20));
    std::vector<ParsedLog> stream = cycle({1, 2}, 3, "node", 1000);
    stream.push_back(parsed(1006, 1));
    stream.push_back(parsed(1007, 4));
    stream.push_back(parsed(1008, 2));
    for (auto& r : cycle({1, 2}, 3, "node", 1009)) {
        stream.push_back(r);
    }
    const auto reports = run_detector(detector, stream);
    ASSERT_GE(reports.size(), 1u);
    const auto& r = reports.front();
    EXPECT_EQ(r.trigger, TriggerKind::sequential);
    EXPECT_EQ(r.trigger_record.record.seq_no, 1007u);
    ASSERT_EQ(r.context_records.size(), 5u);
    EXPECT_EQ(r.context_records.front().record.seq_no, 1005u);
    EXPECT_EQ(r.context_records.back().record.seq_no, 1009u);
}

TEST(StreamDetector, NovelTemplatesAreJudgedOnlyWhenEnabled) {
    DetectorParams params;
    params.sequence = SequenceParams{1, 5, 1};
    const auto training = cycle({1, 2}, 20);
    std::vector<ParsedLog> stream = cycle({1, 2}, 2, "node", 1000);
    stream.push_back(parsed(1004, 9));
    EXPECT_TRUE(run_detector(trained_detector(params, training), stream).empty());
    params.judge_novel_templates = true;
    EXPECT_EQ(run_detector(trained_detector(params, training), stream).size(), 1u);
}

TEST(StreamDetector, TwoCloseTriggersGiveOverlappingReports) {
    DetectorParams params;
    params.sequence = SequenceParams{1, 5, 1};
    params.quant.min_samples = 5;
    params.report_window = 3;
    std::vector<ParsedLog> training;
    for (std::uint64_t i = 0; i < 40; ++i) {
        training.push_back(parsed(i, 1, "node", value(std::to_string(100 + i % 5))));
    }
    auto detector = trained_detector(params, training);
    std::vector<ParsedLog> stream;
    for (std::uint64_t i = 0; i < 10; ++i) {
        const bool spike = i == 4 || i == 5;
        stream.push_back(parsed(1000 + i, 1, "node", value(spike ? "99999" : "102")));
    }
    const auto reports = run_detector(detector, stream);
    ASSERT_EQ(reports.size(), 2u);
    EXPECT_LT(reports[0].report_id, reports[1].report_id);
    EXPECT_EQ(reports[0].trigger, TriggerKind::quantitative);
    EXPECT_EQ(reports[0].trigger_record.record.seq_no, 1004u);
    EXPECT_EQ(reports[1].trigger_record.record.seq_no, 1005u);
    // Windows [1001..1007] and [1002..1008] overlap in six records.
    EXPECT_EQ(reports[0].context_records.front().record.seq_no, 1001u);
    EXPECT_EQ(reports[1].context_records.back().record.seq_no, 1008u);
}

TEST(StreamDetector, AfterWindowClosesOnTimeout) {
    DetectorParams params;
    params.sequence = SequenceParams{1, 5, 1};
    params.report_window = 5;
    params.after_timeout = std::chrono::milliseconds{100};
    auto detector = trained_detector(params, cycle({1, 2}, 20));
    detector.push(parsed(1000, 1));
    detector.push(parsed(1001, 1));
    EXPECT_EQ(detector.open_reports().size(), 0u);  // still held by the normalizer
    // Far-later records push the trigger out and close its window.
    std::vector<ParsedLog> later;
    for (std::uint64_t i = 0; i < 20; ++i) {
        auto p = parsed(2000 + i, i % 2 == 0 ? 2 : 1);
        p.record.timestamp = Timestamp{std::chrono::milliseconds{100000 + 10 * i}};
        detector.push(p);
    }
    const auto closed = detector.take_closed();
    ASSERT_EQ(closed.size(), 1u);
    EXPECT_EQ(closed[0].trigger_record.record.seq_no, 1001u);
    EXPECT_EQ(closed[0].context_records.back().record.seq_no, 1001u);
}

TEST(StreamDetector, OpenReportIsVisibleBeforeItCloses) {
    DetectorParams params;
    params.sequence = SequenceParams{1, 5, 1};
    params.normalizer.reorder_window = 0;
    params.report_window = 4;
    auto detector = trained_detector(params, cycle({1, 2}, 20));
    detector.push(parsed(1000, 1));
    detector.push(parsed(1001, 1));
    detector.push(parsed(1002, 2));
    const auto open = detector.open_reports();
    ASSERT_EQ(open.size(), 1u);
    EXPECT_EQ(open[0].context_records.size(), 3u);
    EXPECT_TRUE(detector.take_closed().empty());
    detector.flush();
    const auto closed = detector.take_closed();
    ASSERT_EQ(closed.size(), 1u);
    EXPECT_EQ(closed[0].report_id, open[0].report_id);
    EXPECT_TRUE(detector.open_reports().empty());
}

TEST(StreamDetector, StateRoundTripContinuesIdentically) {
    DetectorParams params;
    params.sequence = SequenceParams{2, 3, 2};
    std::mt19937_64 rng(48);
    std::vector<ParsedLog> stream;
    for (std::uint64_t i = 0; i < 400; ++i) {
        stream.push_back(parsed(i, 1 + rng() % 4, i % 3 == 0 ? "a" : "b"));
    }
    auto original = trained_detector(params, {stream.begin(), stream.begin() + 200});
    for (std::size_t i = 200; i < 300; ++i) {
        original.push(stream[i]);
    }
    original.take_closed();
    StreamDetector copy(original.state());
    EXPECT_EQ(copy.state(), original.state());
    const std::vector<ParsedLog> rest(stream.begin() + 300, stream.end());
    EXPECT_EQ(run_detector(copy, rest), run_detector(original, rest));
}

TEST(StreamDetectorProperty, EveryReportHasAnAnomalousVerdict) {
    std::mt19937_64 rng(49);
    for (int trial = 0; trial < 10; ++trial) {
        DetectorParams params;
        params.sequence = SequenceParams{1 + rng() % 3, 1 + rng() % 5, 1 + rng() % 3};
        params.quant.min_samples = 10;
        params.normalizer.reorder_window = 0;
        std::vector<ParsedLog> training;
        std::vector<ParsedLog> stream;
        for (std::uint64_t i = 0; i < 600; ++i) {
            const TemplateId id = 1 + rng() % 4;
            auto p = parsed(i, id, "n", value(std::to_string(rng() % (i % 97 == 0 ? 100000 : 50))));
            (i < 300 ? training : stream).push_back(p);
        }
        auto detector = trained_detector(params, training);
        const auto model = detector.model();
        const auto stats = detector.stats();
        const auto reports = run_detector(detector, stream);
        for (const auto& r : reports) {
            const auto& t = r.trigger_record;
            if (r.trigger == TriggerKind::quantitative) {
                EXPECT_EQ(detect_quantitative(stats, t.template_id, t.bindings).kind,
                          VerdictKind::anomalous);
                continue;
            }
            const auto h = params.sequence.context_len;
            const auto pos = static_cast<std::size_t>(t.record.seq_no - 300);
            ASSERT_GE(pos, h);
            Context ctx;
            for (std::size_t k = pos - h; k < pos; ++k) {
                ctx.push_back(stream[k].template_id);
            }
            EXPECT_EQ(detect_sequential(model, "n", ctx, t.template_id).kind, VerdictKind::anomalous);
        }
    }
}
