#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "fixtures.hpp"
#include "monilog/eval.hpp"

using namespace monilog;
using namespace monilog::testing;

namespace {

LabeledLine labeled(const std::string& text, const std::string& pattern) {
    const auto toks = words(text);
    LabeledLine line;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        line.push_back({pattern[i] == 'V' ? TokenLabel::V : TokenLabel::S, toks[i]});
    }
    return line;
}

std::vector<ParsedLine> table1_parsed(const std::vector<TemplateId>& ids) {
    std::vector<ParsedLine> out;
    for (std::size_t i = 0; i < kTable1.size(); ++i) {
        out.push_back({ids[i], words(kTable1[i])});
    }
    return out;
}

}  // namespace

TEST(GroupingAccuracy, IdenticalGroupsScoreOne) {
    const std::vector<std::uint64_t> truth{1, 2, 1, 3};
    EXPECT_DOUBLE_EQ(grouping_accuracy(truth, truth), 1.0);
}

TEST(GroupingAccuracy, MergingEverythingScoresZero) {
    const std::vector<std::uint64_t> truth{1, 2, 1, 3};
    const std::vector<std::uint64_t> merged{7, 7, 7, 7};
    EXPECT_DOUBLE_EQ(grouping_accuracy(merged, truth), 0.0);
}

TEST(GroupingAccuracy, IdsAreIrrelevant) {
    const std::vector<std::uint64_t> truth{1, 2, 1, 3};
    const std::vector<std::uint64_t> relabeled{9, 4, 9, 0};
    EXPECT_DOUBLE_EQ(grouping_accuracy(relabeled, truth), 1.0);
}

TEST(GroupingAccuracy, PartialSplitCountsOnlyExactGroups) {
    // {L1},{L3} split a true pair: only L2 and L4 are correct.
    const std::vector<std::uint64_t> truth{1, 2, 1, 3};
    const std::vector<std::uint64_t> split{1, 2, 5, 3};
    EXPECT_DOUBLE_EQ(grouping_accuracy(split, truth), 0.5);
}

TEST(GroupingAccuracy, MismatchedSizesThrow) {
    const std::vector<std::uint64_t> a{1, 2};
    const std::vector<std::uint64_t> b{1};
    EXPECT_THROW(grouping_accuracy(a, b), ValidationError);
}

TEST(TokenAccuracy, MeanOfPerLineMeans) {
    const std::vector<LabeledLine> truth{labeled("a b", "SS"), labeled("c d", "SV")};
    const std::vector<LabeledLine> predicted{labeled("a b", "SS"), labeled("c d", "SS")};
    EXPECT_DOUBLE_EQ(token_accuracy(truth, truth), 1.0);
    EXPECT_DOUBLE_EQ(token_accuracy(predicted, truth), 0.75);
}

TEST(TokenAccuracy, Table1LineWithOneMislabel) {
    const std::vector<LabeledLine> truth{labeled(kTable1[0], "SVSSVSV")};
    const std::vector<LabeledLine> predicted{labeled(kTable1[0], "SSSSVSV")};
    EXPECT_NEAR(token_accuracy(predicted, truth), 6.0 / 7.0, 1e-12);
}

TEST(TokenAccuracy, StaticLiteralsMustAgree) {
    const std::vector<LabeledLine> truth{labeled("a b", "SS")};
    const std::vector<LabeledLine> predicted{labeled("a x", "SS")};
    EXPECT_DOUBLE_EQ(token_accuracy(predicted, truth), 0.5);
}

TEST(TokenAccuracy, CountMismatchThrowsNamingLine) {
    const std::vector<LabeledLine> truth{labeled("a", "S"), labeled("a b", "SS")};
    const std::vector<LabeledLine> predicted{labeled("a", "S"), labeled("a", "S")};
    try {
        token_accuracy(predicted, truth);
        FAIL() << "expected ValidationError";
    } catch (const ValidationError& e) {
        EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos);
    }
}

TEST(TokenAccuracyProperty, AppendingLineAtMeanKeepsScore) {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 50; ++trial) {
        // Lines of 4 tokens, each with a random number of mislabels.
        std::vector<LabeledLine> truth;
        std::vector<LabeledLine> predicted;
        const std::size_t n = 1 + rng() % 8;
        std::size_t wrong_total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t wrong = rng() % 5;
            wrong_total += wrong;
            truth.push_back(labeled("a b c d", "SSSS"));
            predicted.push_back(labeled("a b c d", std::string(wrong, 'V') + std::string(4 - wrong, 'S')));
        }
        const double before = token_accuracy(predicted, truth);
        // A 4n-token line with wrong_total mislabels scores exactly the mean.
        std::string text;
        for (std::size_t j = 0; j < 4 * n; ++j) {
            text += "t ";
        }
        truth.push_back(labeled(text, std::string(4 * n, 'S')));
        predicted.push_back(
            labeled(text, std::string(wrong_total, 'V') + std::string(4 * n - wrong_total, 'S')));
        EXPECT_NEAR(token_accuracy(predicted, truth), before, 1e-12);
    }
}

TEST(DetectionMetrics, Examples) {
    const auto perfect = detection_metrics({1, 0, 0});
    EXPECT_DOUBLE_EQ(perfect.precision, 1.0);
    EXPECT_DOUBLE_EQ(perfect.recall, 1.0);
    EXPECT_DOUBLE_EQ(perfect.f1, 1.0);
    const auto half = detection_metrics({5, 5, 5});
    EXPECT_DOUBLE_EQ(half.precision, 0.5);
    EXPECT_DOUBLE_EQ(half.recall, 0.5);
    EXPECT_DOUBLE_EQ(half.f1, 0.5);
    const auto none = detection_metrics({0, 0, 3});
    EXPECT_EQ(none.precision, 0.0);
    EXPECT_EQ(none.recall, 0.0);
    EXPECT_EQ(none.f1, 0.0);
}

TEST(DetectionMetricsProperty, F1BoundsAndZeroes) {
    std::mt19937_64 rng(22);
    for (int trial = 0; trial < 1000; ++trial) {
        const EvalCounts c{rng() % 20, rng() % 20, rng() % 20};
        const auto m = detection_metrics(c);
        EXPECT_LE(m.f1, 2.0 * std::min(m.precision, m.recall) + 1e-12);
        EXPECT_GE(m.f1, std::min(m.precision, m.recall) - 1e-12);
        EXPECT_EQ(m.f1 == 0.0, m.precision == 0.0 || m.recall == 0.0);
    }
}

TEST(UnsupervisedScore, IdenticalLinesScoreOne) {
    const std::vector<ParsedLine> corpus(5, ParsedLine{1, {"disk", "ok"}});
    const std::vector<Template> templates{{0, {}, 0}, {1, {"disk", "ok"}, 5}};
    EXPECT_DOUBLE_EQ(unsupervised_score(corpus, templates), 1.0);
}

TEST(UnsupervisedScore, SingletonsAreBoundedByOneOverN) {
    std::vector<ParsedLine> corpus;
    std::vector<Template> templates{{0, {}, 0}};
    for (TemplateId id = 1; id <= 6; ++id) {
        corpus.push_back({id, {"line", std::to_string(id)}});
        templates.push_back({id, {"line", std::to_string(id)}, 1});
    }
    const auto s = unsupervised_score_detail(corpus, templates);
    EXPECT_NEAR(s.parsimony, 1.0 / 6.0, 1e-12);
    EXPECT_LE(s.score, 1.0 / 6.0 + 1e-12);
}

TEST(UnsupervisedScore, Table1HandComputed) {
    // {L1,L3} vary only at the wildcard, L2 and L4 are literal singletons:
    // homogeneity 1, parsimony 1 - (3 - 1) / 4.
    const std::vector<Template> templates{
        {0, {}, 0},
        {1, words("Sending <*> bytes src: 10.250.11.53 dest: /10.250.11.53"), 2},
        {2, words(kTable1[1]), 1},
        {3, words(kTable1[3]), 1}};
    const auto s = unsupervised_score_detail(table1_parsed({1, 2, 1, 3}), templates);
    EXPECT_DOUBLE_EQ(s.homogeneity, 1.0);
    EXPECT_DOUBLE_EQ(s.parsimony, 0.5);
    EXPECT_DOUBLE_EQ(s.score, 0.5);
    EXPECT_EQ(s.template_count, 3u);
}

TEST(UnsupervisedScore, PenalizesConstantWildcards) {
    // Position 2 is a wildcard whose values never differ: 2 of 3 positions good.
    const std::vector<ParsedLine> corpus{{1, {"a", "1", "x"}}, {1, {"a", "2", "x"}}};
    const std::vector<Template> templates{{0, {}, 0}, {1, {"a", "<*>", "<*>"}, 2}};
    EXPECT_NEAR(unsupervised_score(corpus, templates), 2.0 / 3.0, 1e-12);
}

TEST(UnsupervisedScore, Errors) {
    const std::vector<Template> templates{{0, {}, 0}, {1, {"a"}, 1}};
    EXPECT_THROW(unsupervised_score(std::vector<ParsedLine>{}, templates), ValidationError);
    EXPECT_THROW(unsupervised_score(std::vector<ParsedLine>{{9, {"a"}}}, templates),
                 ValidationError);
    EXPECT_THROW(unsupervised_score(std::vector<ParsedLine>{{1, {"a", "b"}}}, templates),
                 ValidationError);
}

TEST(UnsupervisedScoreProperty, InvariantUnderReordering) {
    std::mt19937_64 rng(23);
    const auto corpus = generate_synthetic(default_corpus_spec(300), 4).records;
    TemplateMiner miner;
    std::vector<ParsedLine> lines;
    for (const auto& p : parse_all(miner, corpus)) {
        lines.push_back({p.template_id, words(p.record.message)});
    }
    const auto templates = miner.export_templates();
    const double base = unsupervised_score(lines, templates);
    for (int trial = 0; trial < 10; ++trial) {
        std::shuffle(lines.begin(), lines.end(), rng);
        EXPECT_NEAR(unsupervised_score(lines, templates), base, 1e-12);
    }
}

TEST(Calibrate, SingleGridPointIsChosen) {
    const auto sample = generate_synthetic(default_corpus_spec(200), 1).records;
    const std::vector<ParserParams> grid{{5, 0.6, 50}};
    const auto r = calibrate(sample, grid);
    EXPECT_EQ(r.chosen, grid[0]);
    EXPECT_EQ(r.grid_scores.size(), 1u);
    EXPECT_EQ(r.sample_size, 200u);
}

TEST(Calibrate, TiesGoToLowerThresholdThenDepth) {
    const std::vector<RawLogRecord> sample(10, make_record(0, "disk check ok"));
    const std::vector<ParserParams> by_sim{{5, 0.7, 100}, {3, 0.5, 100}, {4, 0.3, 100}};
    EXPECT_EQ(calibrate(sample, by_sim).chosen, by_sim[2]);
    const std::vector<ParserParams> by_depth{{5, 0.4, 100}, {3, 0.4, 100}};
    EXPECT_EQ(calibrate(sample, by_depth).chosen, by_depth[1]);
}

TEST(Calibrate, PrefersFewerTemplatesOnDistinctScores) {
    // Merging the two lines keeps homogeneity 1 and raises parsimony.
    const std::vector<RawLogRecord> sample{make_record(0, "user ann in"),
                                           make_record(1, "user bob in")};
    const std::vector<ParserParams> grid{{2, 0.9, 100}, {2, 0.5, 100}};
    const auto r = calibrate(sample, grid);
    EXPECT_EQ(r.chosen, grid[1]);
    EXPECT_EQ(r.grid_scores[0].template_count, 2u);
    EXPECT_EQ(r.grid_scores[1].template_count, 1u);
}

TEST(Calibrate, RejectsEmptyInputs) {
    const std::vector<RawLogRecord> sample{make_record(0, "a b")};
    EXPECT_THROW(calibrate(std::vector<RawLogRecord>{}, default_calibration_grid()),
                 ValidationError);
    EXPECT_THROW(calibrate(sample, std::vector<ParserParams>{}), ValidationError);
}

TEST(Calibrate, Deterministic) {
    const auto sample = generate_synthetic(default_corpus_spec(500), 6).records;
    const auto grid = default_calibration_grid();
    const auto a = calibrate(sample, grid);
    const auto b = calibrate(sample, grid);
    EXPECT_EQ(a.chosen, b.chosen);
    ASSERT_EQ(a.grid_scores.size(), b.grid_scores.size());
    for (std::size_t i = 0; i < a.grid_scores.size(); ++i) {
        EXPECT_EQ(a.grid_scores[i].score, b.grid_scores[i].score);
    }
}

TEST(EvaluateParsing, PerfectOnCleanCorpus) {
    const auto corpus = generate_synthetic(default_corpus_spec(2000), 3);
    TemplateMiner miner(ParserParams{3, 0.2, 100});
    const auto parsed = parse_all(miner, corpus.records);
    const auto q = evaluate_parsing(parsed, miner.export_templates(), corpus.truth);
    EXPECT_GE(q.grouping_accuracy, 0.95);
    EXPECT_GE(q.token_accuracy, 0.95);
    const std::vector<ParsedLog> short_stream(parsed.begin(), parsed.begin() + 3);
    EXPECT_THROW(evaluate_parsing(short_stream, miner.export_templates(), corpus.truth),
                 ValidationError);
}

TEST(EvaluateParsingProperty, InvariantUnderIdRelabeling) {
    const auto corpus = generate_synthetic(default_corpus_spec(800), 5);
    TemplateMiner miner;
    auto parsed = parse_all(miner, corpus.records);
    auto templates = miner.export_templates();
    const auto base = evaluate_parsing(parsed, templates, corpus.truth);
    constexpr TemplateId kShift = 1000;
    for (auto& t : templates) {
        t.id += kShift;
    }
    for (auto& p : parsed) {
        p.template_id += kShift;
    }
    const auto shifted = evaluate_parsing(parsed, templates, corpus.truth);
    EXPECT_EQ(shifted.grouping_accuracy, base.grouping_accuracy);
    EXPECT_EQ(shifted.token_accuracy, base.token_accuracy);
}
