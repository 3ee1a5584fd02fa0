#include "monilog/classify.hpp"

#include <cmath>

namespace monilog {

std::string_view to_string(Criticality level) {
    switch (level) {
        case Criticality::low:
            return "low";
        case Criticality::moderate:
            return "moderate";
        case Criticality::high:
            return "high";
    }
    return "low";
}

Criticality parse_criticality(std::string_view text) {
    if (text == "low") {
        return Criticality::low;
    }
    if (text == "moderate") {
        return Criticality::moderate;
    }
    if (text == "high") {
        return Criticality::high;
    }
    throw ValidationError("unknown criticality '" + std::string(text) + "'");
}

std::string_view to_string(FeedbackKind kind) {
    switch (kind) {
        case FeedbackKind::moved_pool:
            return "moved_pool";
        case FeedbackKind::set_criticality:
            return "set_criticality";
        case FeedbackKind::create_pool:
            return "create_pool";
        case FeedbackKind::delete_pool:
            return "delete_pool";
    }
    return "moved_pool";
}

FeedbackKind parse_feedback_kind(std::string_view text) {
    for (const auto kind : {FeedbackKind::moved_pool, FeedbackKind::set_criticality,
                            FeedbackKind::create_pool, FeedbackKind::delete_pool}) {
        if (text == to_string(kind)) {
            return kind;
        }
    }
    throw ValidationError("unknown feedback kind '" + std::string(text) + "'");
}

double dot(const FeatureVector& a, const FeatureVector& b) {
    const auto& small = a.size() <= b.size() ? a : b;
    const auto& large = a.size() <= b.size() ? b : a;
    double sum = 0.0;
    for (const auto& [k, v] : small) {
        const auto it = large.find(k);
        if (it != large.end()) {
            sum += v * it->second;
        }
    }
    return sum;
}

double l2_norm(const FeatureVector& v) { return std::sqrt(dot(v, v)); }

FeatureVector normalized(const FeatureVector& v) {
    const double n = l2_norm(v);
    if (n == 0.0) {
        return v;
    }
    FeatureVector out;
    for (const auto& [k, x] : v) {
        out.emplace(k, x / n);
    }
    return out;
}

FeatureVector featurize(const AnomalyReport& report) {
    FeatureVector v;
    for (const auto& record : report.context_records) {
        v[record.template_id] += 1.0;
    }
    v[kTriggerFeatureBase + static_cast<std::uint64_t>(report.trigger)] = 1.0;
    return normalized(v);
}

ClassifierState make_classifier_state(double assignment_threshold, Timestamp created_at) {
    if (!(assignment_threshold >= 0.0 && assignment_threshold <= 1.0)) {
        throw ValidationError("assignment_threshold must lie in [0,1]");
    }
    ClassifierState state;
    state.assignment_threshold = assignment_threshold;
    state.pools.emplace(kDefaultPoolId,
                        Pool{kDefaultPoolId, std::string(kDefaultPoolName), created_at, false});
    state.models.emplace(kDefaultPoolId, PoolModel{});
    return state;
}

FeatureVector centroid(const ClassifierState& state, PoolId pool) {
    const auto it = state.models.find(pool);
    if (it == state.models.end() || it->second.examples == 0) {
        return {};
    }
    return normalized(it->second.sum);
}

namespace {

Criticality histogram_mode(const PoolModel* model) {
    if (model == nullptr) {
        return Criticality::low;
    }
    std::size_t best = 0;
    for (std::size_t i = 1; i < model->histogram.size(); ++i) {
        if (model->histogram[i] > model->histogram[best]) {
            best = i;
        }
    }
    return static_cast<Criticality>(best);
}

const PoolModel* model_of(const ClassifierState& state, PoolId pool) {
    const auto it = state.models.find(pool);
    return it == state.models.end() ? nullptr : &it->second;
}

PoolId parse_pool_value(std::string_view text) {
    double x = 0.0;
    if (!parse_number(text, x) || x < 0.0 || x != std::floor(x)) {
        throw ValidationError("malformed pool id '" + std::string(text) + "'");
    }
    return static_cast<PoolId>(x);
}

void require_pool(const ClassifierState& state, PoolId pool) {
    if (state.pools.count(pool) == 0) {
        throw NotFoundError("unknown pool " + std::to_string(pool));
    }
}

void add_scaled(FeatureVector& into, const FeatureVector& v, double sign) {
    for (const auto& [k, x] : v) {
        auto& slot = into[k];
        slot += sign * x;
        if (std::abs(slot) < 1e-12) {
            into.erase(k);
        }
    }
}

}  // namespace

Prediction predict(const ClassifierState& state, const FeatureVector& features) {
    constexpr double kTie = 1e-12;
    const auto x = normalized(features);
    std::optional<PoolId> best;
    double best_sim = 0.0;
    std::uint64_t best_examples = 0;
    for (const auto& [id, model] : state.models) {
        if (model.examples == 0) {
            continue;
        }
        const double sim = dot(x, normalized(model.sum));
        const bool better =
            !best || sim > best_sim + kTie ||
            (sim >= best_sim - kTie && model.examples > best_examples);
        if (better) {
            best = id;
            best_sim = sim;
            best_examples = model.examples;
        }
    }
    Prediction p;
    p.confidence = best ? best_sim : 0.0;
    p.pool = best && best_sim >= state.assignment_threshold ? *best : kDefaultPoolId;
    p.criticality = histogram_mode(model_of(state, p.pool));
    return p;
}

void apply_feedback(ClassifierState& state, const FeedbackEvent& event) {
    if (state.applied.count(event.event_id) != 0) {
        return;
    }
    switch (event.kind) {
        case FeedbackKind::moved_pool: {
            const PoolId to = parse_pool_value(event.to_value);
            require_pool(state, to);
            const auto prev = state.contributions.find(event.report_id);
            if (prev != state.contributions.end() && prev->second == to) {
                break;
            }
            if (prev != state.contributions.end()) {
                auto& old = state.models.at(prev->second);
                add_scaled(old.sum, event.features, -1.0);
                check_invariant(old.examples > 0, "pool example count underflow");
                if (--old.examples == 0) {
                    old.sum.clear();
                }
            }
            auto& dest = state.models[to];
            add_scaled(dest.sum, event.features, 1.0);
            ++dest.examples;
            state.contributions[event.report_id] = to;
            // A counted criticality follows the report to its new pool.
            const auto counted = state.counted.find(event.report_id);
            if (counted != state.counted.end() && counted->second.first != to) {
                const auto level = static_cast<std::size_t>(counted->second.second);
                --state.models.at(counted->second.first).histogram[level];
                ++dest.histogram[level];
                counted->second.first = to;
            }
            break;
        }
        case FeedbackKind::set_criticality: {
            const auto to = parse_criticality(event.to_value);
            if (!event.from_value.empty()) {
                parse_criticality(event.from_value);
            }
            if (!event.pool) {
                throw ValidationError("set_criticality event lacks the report's pool");
            }
            require_pool(state, *event.pool);
            const auto counted = state.counted.find(event.report_id);
            if (counted != state.counted.end()) {
                const auto level = static_cast<std::size_t>(counted->second.second);
                --state.models.at(counted->second.first).histogram[level];
            }
            ++state.models[*event.pool].histogram[static_cast<std::size_t>(to)];
            state.counted[event.report_id] = {*event.pool, to};
            break;
        }
        case FeedbackKind::create_pool: {
            if (event.to_value.empty()) {
                throw ValidationError("pool name must not be empty");
            }
            for (const auto& [id, pool] : state.pools) {
                if (pool.name == event.to_value) {
                    throw ValidationError("pool '" + event.to_value + "' already exists");
                }
            }
            const PoolId id = event.pool.value_or(state.next_pool_id);
            if (id < state.next_pool_id) {
                throw ValidationError("pool id " + std::to_string(id) + " was already issued");
            }
            state.pools.emplace(id, Pool{id, event.to_value, event.at, true});
            state.models.emplace(id, PoolModel{});
            state.next_pool_id = id + 1;
            break;
        }
        case FeedbackKind::delete_pool: {
            const PoolId id = parse_pool_value(event.from_value);
            require_pool(state, id);
            if (!state.pools.at(id).deletable) {
                throw ValidationError("the default pool cannot be deleted");
            }
            state.pools.erase(id);
            state.models.erase(id);
            std::erase_if(state.contributions, [&](const auto& c) { return c.second == id; });
            std::erase_if(state.counted, [&](const auto& c) { return c.second.first == id; });
            break;
        }
    }
    state.applied.insert(event.event_id);
}

FeedbackEvent make_create_pool_event(const ClassifierState& state, EventId id, std::string name,
                                     std::string actor, Timestamp at) {
    if (name.empty()) {
        throw ValidationError("pool name must not be empty");
    }
    for (const auto& [pid, pool] : state.pools) {
        if (pool.name == name) {
            throw ValidationError("pool '" + name + "' already exists");
        }
    }
    FeedbackEvent e;
    e.event_id = id;
    e.kind = FeedbackKind::create_pool;
    e.to_value = std::move(name);
    e.actor = std::move(actor);
    e.at = at;
    e.pool = state.next_pool_id;
    return e;
}

FeedbackEvent make_delete_pool_event(const ClassifierState& state, EventId id, PoolId pool,
                                     std::string actor, Timestamp at) {
    require_pool(state, pool);
    if (!state.pools.at(pool).deletable) {
        throw ValidationError("the default pool cannot be deleted");
    }
    FeedbackEvent e;
    e.event_id = id;
    e.kind = FeedbackKind::delete_pool;
    e.from_value = std::to_string(pool);
    e.actor = std::move(actor);
    e.at = at;
    return e;
}

void assign_predicted(Assignment& a, const Prediction& p) {
    if (!a.human_pool) {
        a.pool = p.pool;
        a.confidence = p.confidence;
    }
    if (!a.human_criticality) {
        a.criticality = p.criticality;
    }
}

void reassign_deleted_pool(AssignmentTable& table, PoolId pool) {
    for (auto& [id, a] : table) {
        if (a.pool == pool) {
            a.pool = kDefaultPoolId;
            a.human_pool = false;
        }
    }
}

}  // namespace monilog
