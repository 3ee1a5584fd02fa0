#include "monilog/parser.hpp"

#include <algorithm>
#include <cctype>

namespace monilog {

void ParserParams::validate() const {
    if (tree_depth < 2) {
        throw ValidationError("tree_depth must be >= 2");
    }
    if (!(sim_threshold > 0.0 && sim_threshold <= 1.0)) {
        throw ValidationError("sim_threshold must lie in (0,1]");
    }
    if (max_children < 2) {
        throw ValidationError("max_children must be >= 2");
    }
}

std::size_t Template::wildcard_count() const {
    return static_cast<std::size_t>(std::count(tokens.begin(), tokens.end(), kWildcard));
}

std::string Template::render() const {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (i > 0) {
            out += ' ';
        }
        out += tokens[i];
    }
    return out;
}

double template_similarity(std::span<const std::string> tokens,
                           std::span<const std::string> template_tokens) {
    if (tokens.size() != template_tokens.size()) {
        return 0.0;
    }
    if (tokens.empty()) {
        return 1.0;
    }
    std::size_t same = 0;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (template_tokens[i] == kWildcard || template_tokens[i] == tokens[i]) {
            ++same;
        }
    }
    return static_cast<double>(same) / static_cast<double>(tokens.size());
}

namespace {

bool has_digit(const std::string& token) {
    return std::any_of(token.begin(), token.end(),
                       [](char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; });
}

}  // namespace

TemplateMiner::TemplateMiner(ParserParams params) : params_(params) {
    params_.validate();
    nodes_.emplace_back();  // unused root slot, keeps node index 0 invalid as a child
    templates_.push_back(Template{kEmptyTemplateId, {}, 0});
    routes_.emplace_back();
}

std::size_t TemplateMiner::child(std::size_t node, const std::string& key) {
    const auto it = nodes_[node].children.find(key);
    if (it != nodes_[node].children.end()) {
        return it->second;
    }
    const std::size_t created = nodes_.size();
    nodes_.emplace_back();
    nodes_[node].children.emplace(key, created);
    if (key != kWildcard) {
        ++nodes_[node].literal_children;
    }
    return created;
}

std::string TemplateMiner::branch_key(std::size_t node, const std::string& token) const {
    if (has_digit(token)) {
        return std::string(kWildcard);
    }
    const auto& n = nodes_[node];
    if (n.children.count(token) != 0 || n.literal_children + 1 < params_.max_children) {
        return token;
    }
    return std::string(kWildcard);
}

ParseResult TemplateMiner::parse(const std::vector<Token>& tokens) {
    std::vector<std::string> texts;
    texts.reserve(tokens.size());
    for (const auto& t : tokens) {
        texts.push_back(t.text);
    }
    return parse(texts);
}

ParseResult TemplateMiner::parse(std::span<const std::string> tokens) {
    if (tokens.empty()) {
        ++templates_[kEmptyTemplateId].support;
        return {kEmptyTemplateId, {}};
    }

    std::vector<std::string> route;
    route.push_back(std::to_string(tokens.size()));
    auto root = length_roots_.find(tokens.size());
    if (root == length_roots_.end()) {
        const std::size_t created = nodes_.size();
        nodes_.emplace_back();
        root = length_roots_.emplace(tokens.size(), created).first;
    }
    std::size_t node = root->second;
    const std::size_t depth = std::min(params_.tree_depth - 1, tokens.size());
    for (std::size_t i = 0; i < depth; ++i) {
        auto key = branch_key(node, tokens[i]);
        node = child(node, key);
        route.push_back(std::move(key));
    }

    TemplateId best = kEmptyTemplateId;
    double best_sim = -1.0;
    for (const auto id : nodes_[node].templates) {
        check_invariant(id < templates_.size(), "leaf references unknown template id");
        const double sim = template_similarity(tokens, templates_[id].tokens);
        if (sim > best_sim) {
            best_sim = sim;
            best = id;
        }
    }

    ParseResult result;
    if (best != kEmptyTemplateId && best_sim >= params_.sim_threshold) {
        auto& tpl = templates_[best];
        for (std::size_t i = 0; i < tokens.size(); ++i) {
            if (tpl.tokens[i] != kWildcard && tpl.tokens[i] != tokens[i]) {
                tpl.tokens[i] = std::string(kWildcard);
            }
        }
        ++tpl.support;
        result.template_id = best;
    } else {
        const TemplateId id = templates_.size();
        templates_.push_back(Template{id, {tokens.begin(), tokens.end()}, 1});
        routes_.push_back(std::move(route));
        nodes_[node].templates.push_back(id);
        result.template_id = id;
    }

    const auto& tpl = templates_[result.template_id];
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        if (tpl.tokens[i] == kWildcard) {
            result.bindings.push_back({i, tokens[i]});
        }
    }
    return result;
}

std::vector<Template> TemplateMiner::export_templates() const { return templates_; }

const Template* TemplateMiner::find(TemplateId id) const {
    return id < templates_.size() ? &templates_[id] : nullptr;
}

MinerState TemplateMiner::state() const { return {params_, templates_, routes_}; }

TemplateMiner TemplateMiner::restore(const MinerState& state) {
    TemplateMiner miner(state.params);
    if (state.templates.empty() || state.templates.size() != state.routes.size()) {
        throw ValidationError("miner state: template and route tables differ in size");
    }
    miner.templates_ = state.templates;
    miner.routes_ = state.routes;
    for (TemplateId id = 0; id < state.templates.size(); ++id) {
        const auto& tpl = state.templates[id];
        if (tpl.id != id) {
            throw ValidationError("miner state: template ids are not dense");
        }
        if (id == kEmptyTemplateId) {
            if (!tpl.tokens.empty()) {
                throw ValidationError("miner state: reserved template must be empty");
            }
            continue;
        }
        const auto& route = state.routes[id];
        if (tpl.tokens.empty() || route.empty() || route.front() != std::to_string(tpl.tokens.size())) {
            throw ValidationError("miner state: route does not match template " +
                                  std::to_string(id));
        }
        auto root = miner.length_roots_.find(tpl.tokens.size());
        if (root == miner.length_roots_.end()) {
            const std::size_t created = miner.nodes_.size();
            miner.nodes_.emplace_back();
            root = miner.length_roots_.emplace(tpl.tokens.size(), created).first;
        }
        std::size_t node = root->second;
        for (std::size_t i = 1; i < route.size(); ++i) {
            node = miner.child(node, route[i]);
        }
        miner.nodes_[node].templates.push_back(id);
    }
    return miner;
}

ParsedLog parse_record(TemplateMiner& miner, const Preprocessor& preprocessor,
                       const RawLogRecord& record) {
    auto pre = preprocessor(record.message);
    auto result = miner.parse(pre.free_text_tokens);
    ParsedLog parsed;
    parsed.record = record;
    parsed.template_id = result.template_id;
    parsed.bindings = std::move(result.bindings);
    parsed.payload = std::move(pre.payload);
    return parsed;
}

}  // namespace monilog
