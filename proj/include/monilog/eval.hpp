#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "monilog/ingest.hpp"
#include "monilog/parser.hpp"

namespace monilog {

/// A token with its static/variable label. For S labels the literal is part
/// of the comparison; for V labels it is informational only.
struct LabeledToken {
    TokenLabel label = TokenLabel::S;
    std::string literal;
};

using LabeledLine = std::vector<LabeledToken>;

/// Fraction of lines whose predicted group (set of lines sharing the
/// predicted id) equals their true group. Ids themselves are irrelevant.
double grouping_accuracy(std::span<const std::uint64_t> predicted,
                         std::span<const std::uint64_t> truth);

/// Mean over lines of the per-line fraction of correctly labeled tokens.
/// A token is correct when the labels agree and, for S, the literals agree.
double token_accuracy(std::span<const LabeledLine> predicted, std::span<const LabeledLine> truth);

struct EvalCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t fn = 0;
};

struct DetectionMetrics {
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Precision, recall and F1 with every 0/0 ratio defined as 0.
DetectionMetrics detection_metrics(const EvalCounts& counts);

/// One line of a parsed corpus as seen by the unsupervised score.
struct ParsedLine {
    TemplateId template_id = kEmptyTemplateId;
    std::vector<std::string> tokens;
};

struct UnsupervisedScore {
    double homogeneity = 0.0;
    double parsimony = 0.0;
    double score = 0.0;
    std::size_t template_count = 0;
};

/// homogeneity x parsimony. Homogeneity is the support-weighted mean over
/// templates of the fraction of positions that behave as labeled: static
/// positions identical across members, wildcard positions not all identical.
/// Parsimony is 1 - (templates - 1) / lines.
UnsupervisedScore unsupervised_score_detail(std::span<const ParsedLine> corpus,
                                            std::span<const Template> templates);

double unsupervised_score(std::span<const ParsedLine> corpus, std::span<const Template> templates);

struct GridScore {
    ParserParams params;
    double score = 0.0;
    std::size_t template_count = 0;
};

struct CalibrationResult {
    ParserParams chosen;
    std::vector<GridScore> grid_scores;
    std::size_t sample_size = 0;
};

/// tree_depth {3,4,5} x sim_threshold {0.2 .. 0.7}.
std::vector<ParserParams> default_calibration_grid();

inline constexpr std::size_t kDefaultCalibrationSample = 10000;

/// Parses the sample once per grid point in a fresh miner and picks the best
/// unsupervised score; ties go to fewer templates, then lower sim_threshold,
/// then lower tree_depth.
CalibrationResult calibrate(std::span<const RawLogRecord> sample,
                            std::span<const ParserParams> grid,
                            const Preprocessor& preprocessor = Preprocessor{});

/// Labels each token of a line from the template it was assigned to.
LabeledLine predicted_labels(const Template& tpl, std::span<const std::string> tokens);

/// Ground-truth labels for a generated line; S literals are the line tokens.
LabeledLine truth_labels(const TruthLine& truth, std::span<const std::string> tokens);

struct ParseQuality {
    double grouping_accuracy = 0.0;
    double token_accuracy = 0.0;
};

/// Scores a parsed stream (in truth line order) against generator ground
/// truth, labeling tokens from the final templates.
ParseQuality evaluate_parsing(std::span<const ParsedLog> parsed,
                              std::span<const Template> templates, const GroundTruth& truth,
                              const Preprocessor& preprocessor = Preprocessor{});

}  // namespace monilog
