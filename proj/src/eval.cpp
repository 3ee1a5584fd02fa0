#include "monilog/eval.hpp"

#include <algorithm>
#include <future>
#include <map>
#include <tuple>
#include <unordered_map>

namespace monilog {

double grouping_accuracy(std::span<const std::uint64_t> predicted,
                         std::span<const std::uint64_t> truth) {
    if (predicted.size() != truth.size()) {
        throw ValidationError("grouping_accuracy: predicted and truth cover different lines (" +
                              std::to_string(predicted.size()) + " vs " +
                              std::to_string(truth.size()) + ")");
    }
    if (predicted.empty()) {
        return 0.0;
    }
    std::unordered_map<std::uint64_t, std::size_t> truth_size;
    for (const auto g : truth) {
        ++truth_size[g];
    }
    // A predicted group is correct iff all of its lines share one true group
    // and that true group has no other lines.
    struct Group {
        std::uint64_t truth_id = 0;
        std::size_t size = 0;
        bool pure = true;
    };
    std::unordered_map<std::uint64_t, Group> groups;
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        auto [it, inserted] = groups.try_emplace(predicted[i]);
        auto& g = it->second;
        if (inserted) {
            g.truth_id = truth[i];
        } else if (g.truth_id != truth[i]) {
            g.pure = false;
        }
        ++g.size;
    }
    std::size_t correct = 0;
    for (const auto& [id, g] : groups) {
        if (g.pure && truth_size[g.truth_id] == g.size) {
            correct += g.size;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(predicted.size());
}

double token_accuracy(std::span<const LabeledLine> predicted, std::span<const LabeledLine> truth) {
    if (predicted.size() != truth.size()) {
        throw ValidationError("token_accuracy: predicted and truth line counts differ");
    }
    if (truth.empty()) {
        throw ValidationError("token_accuracy: empty corpus");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const auto& p = predicted[i];
        const auto& t = truth[i];
        if (p.size() != t.size()) {
            throw ValidationError("token_accuracy: line " + std::to_string(i) + " has " +
                                  std::to_string(p.size()) + " predicted tokens but " +
                                  std::to_string(t.size()) + " truth tokens");
        }
        if (t.empty()) {
            sum += 1.0;
            continue;
        }
        std::size_t correct = 0;
        for (std::size_t j = 0; j < t.size(); ++j) {
            if (p[j].label != t[j].label) {
                continue;
            }
            if (t[j].label == TokenLabel::V || p[j].literal == t[j].literal) {
                ++correct;
            }
        }
        sum += static_cast<double>(correct) / static_cast<double>(t.size());
    }
    return sum / static_cast<double>(truth.size());
}

DetectionMetrics detection_metrics(const EvalCounts& counts) {
    const auto ratio = [](double num, double den) { return den == 0.0 ? 0.0 : num / den; };
    DetectionMetrics m;
    const auto tp = static_cast<double>(counts.tp);
    m.precision = ratio(tp, tp + static_cast<double>(counts.fp));
    m.recall = ratio(tp, tp + static_cast<double>(counts.fn));
    m.f1 = ratio(2.0 * m.precision * m.recall, m.precision + m.recall);
    return m;
}

UnsupervisedScore unsupervised_score_detail(std::span<const ParsedLine> corpus,
                                            std::span<const Template> templates) {
    if (corpus.empty()) {
        throw ValidationError("unsupervised_score: empty corpus");
    }
    std::unordered_map<TemplateId, const Template*> by_id;
    for (const auto& t : templates) {
        by_id[t.id] = &t;
    }
    std::map<TemplateId, std::vector<const ParsedLine*>> members;
    for (const auto& line : corpus) {
        const auto it = by_id.find(line.template_id);
        if (it == by_id.end()) {
            throw ValidationError("unsupervised_score: line references unknown template " +
                                  std::to_string(line.template_id));
        }
        if (it->second->tokens.size() != line.tokens.size()) {
            throw ValidationError("unsupervised_score: token count differs from template " +
                                  std::to_string(line.template_id));
        }
        members[line.template_id].push_back(&line);
    }

    double weighted = 0.0;
    for (const auto& [id, lines] : members) {
        const auto& tokens = by_id[id]->tokens;
        double homogeneity = 1.0;
        if (!tokens.empty()) {
            std::size_t good = 0;
            for (std::size_t j = 0; j < tokens.size(); ++j) {
                const auto& first = lines.front()->tokens[j];
                const bool all_same = std::all_of(lines.begin(), lines.end(), [&](const auto* l) {
                    return l->tokens[j] == first;
                });
                if (tokens[j] == kWildcard) {
                    good += all_same ? 0 : 1;
                } else {
                    good += (all_same && first == tokens[j]) ? 1 : 0;
                }
            }
            homogeneity = static_cast<double>(good) / static_cast<double>(tokens.size());
        }
        weighted += homogeneity * static_cast<double>(lines.size());
    }

    const auto n = static_cast<double>(corpus.size());
    UnsupervisedScore s;
    s.template_count = members.size();
    s.homogeneity = std::clamp(weighted / n, 0.0, 1.0);
    s.parsimony = std::clamp(1.0 - (static_cast<double>(members.size()) - 1.0) / n, 0.0, 1.0);
    s.score = s.homogeneity * s.parsimony;
    return s;
}

double unsupervised_score(std::span<const ParsedLine> corpus, std::span<const Template> templates) {
    return unsupervised_score_detail(corpus, templates).score;
}

std::vector<ParserParams> default_calibration_grid() {
    std::vector<ParserParams> grid;
    for (const std::size_t depth : {3, 4, 5}) {
        for (const double sim : {0.2, 0.3, 0.4, 0.5, 0.6, 0.7}) {
            grid.push_back(ParserParams{depth, sim, 100});
        }
    }
    return grid;
}

namespace {

GridScore score_grid_point(const std::vector<std::vector<std::string>>& sample_tokens,
                           const ParserParams& params) {
    TemplateMiner miner(params);
    std::vector<ParsedLine> corpus;
    corpus.reserve(sample_tokens.size());
    for (const auto& tokens : sample_tokens) {
        corpus.push_back({miner.parse(tokens).template_id, tokens});
    }
    const auto templates = miner.export_templates();
    const auto detail = unsupervised_score_detail(corpus, templates);
    return {params, detail.score, miner.template_count()};
}

}  // namespace

CalibrationResult calibrate(std::span<const RawLogRecord> sample,
                            std::span<const ParserParams> grid, const Preprocessor& preprocessor) {
    if (sample.empty()) {
        throw ValidationError("calibrate: empty sample");
    }
    if (grid.empty()) {
        throw ValidationError("calibrate: empty grid");
    }
    for (const auto& p : grid) {
        p.validate();
    }
    std::vector<std::vector<std::string>> sample_tokens;
    sample_tokens.reserve(sample.size());
    for (const auto& record : sample) {
        std::vector<std::string> tokens;
        for (auto& t : preprocessor(record.message).free_text_tokens) {
            tokens.push_back(std::move(t.text));
        }
        sample_tokens.push_back(std::move(tokens));
    }

    // Grid points are independent; each runs in its own miner.
    std::vector<std::future<GridScore>> pending;
    pending.reserve(grid.size());
    for (const auto& params : grid) {
        pending.push_back(std::async(std::launch::async, score_grid_point,
                                     std::cref(sample_tokens), params));
    }
    CalibrationResult result;
    result.sample_size = sample.size();
    for (auto& f : pending) {
        result.grid_scores.push_back(f.get());
    }

    constexpr double kTie = 1e-12;
    const GridScore* best = nullptr;
    for (const auto& g : result.grid_scores) {
        if (best == nullptr) {
            best = &g;
            continue;
        }
        if (g.score > best->score + kTie) {
            best = &g;
        } else if (g.score >= best->score - kTie) {
            const auto key = [](const GridScore& s) {
                return std::tuple(s.template_count, s.params.sim_threshold, s.params.tree_depth);
            };
            if (key(g) < key(*best)) {
                best = &g;
            }
        }
    }
    result.chosen = best->params;
    return result;
}

LabeledLine predicted_labels(const Template& tpl, std::span<const std::string> tokens) {
    if (tpl.tokens.size() != tokens.size()) {
        throw ValidationError("template " + std::to_string(tpl.id) +
                              " length differs from its line");
    }
    LabeledLine line;
    line.reserve(tokens.size());
    for (std::size_t j = 0; j < tokens.size(); ++j) {
        if (tpl.tokens[j] == kWildcard) {
            line.push_back({TokenLabel::V, tokens[j]});
        } else {
            line.push_back({TokenLabel::S, tpl.tokens[j]});
        }
    }
    return line;
}

LabeledLine truth_labels(const TruthLine& truth, std::span<const std::string> tokens) {
    if (truth.token_labels.size() != tokens.size()) {
        throw ValidationError("ground truth line " + std::to_string(truth.line_no) + " has " +
                              std::to_string(truth.token_labels.size()) + " labels for " +
                              std::to_string(tokens.size()) + " tokens");
    }
    LabeledLine line;
    line.reserve(tokens.size());
    for (std::size_t j = 0; j < tokens.size(); ++j) {
        line.push_back({truth.token_labels[j], tokens[j]});
    }
    return line;
}

ParseQuality evaluate_parsing(std::span<const ParsedLog> parsed,
                              std::span<const Template> templates, const GroundTruth& truth,
                              const Preprocessor& preprocessor) {
    if (parsed.size() != truth.lines.size()) {
        throw ValidationError("evaluate_parsing: " + std::to_string(parsed.size()) +
                              " parsed lines vs " + std::to_string(truth.lines.size()) +
                              " ground-truth lines");
    }
    std::unordered_map<TemplateId, const Template*> by_id;
    for (const auto& t : templates) {
        by_id[t.id] = &t;
    }
    std::vector<std::uint64_t> predicted_groups;
    std::vector<std::uint64_t> truth_groups;
    std::vector<LabeledLine> predicted;
    std::vector<LabeledLine> expected;
    for (std::size_t i = 0; i < parsed.size(); ++i) {
        const auto it = by_id.find(parsed[i].template_id);
        if (it == by_id.end()) {
            throw ValidationError("evaluate_parsing: unknown template " +
                                  std::to_string(parsed[i].template_id));
        }
        std::vector<std::string> tokens;
        for (auto& t : preprocessor(parsed[i].record.message).free_text_tokens) {
            tokens.push_back(std::move(t.text));
        }
        predicted_groups.push_back(parsed[i].template_id);
        truth_groups.push_back(truth.lines[i].template_id);
        predicted.push_back(predicted_labels(*it->second, tokens));
        expected.push_back(truth_labels(truth.lines[i], tokens));
    }
    return {grouping_accuracy(predicted_groups, truth_groups), token_accuracy(predicted, expected)};
}

}  // namespace monilog
