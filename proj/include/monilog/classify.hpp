#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "monilog/common.hpp"
#include "monilog/detect.hpp"

namespace monilog {

enum class Criticality { low = 0, moderate = 1, high = 2 };

std::string_view to_string(Criticality level);
Criticality parse_criticality(std::string_view text);

inline constexpr PoolId kDefaultPoolId = 0;
inline constexpr std::string_view kDefaultPoolName = "default";

struct Pool {
    PoolId pool_id = kDefaultPoolId;
    std::string name;
    Timestamp created_at{};
    bool deletable = true;

    bool operator==(const Pool&) const = default;
};

/// Sparse vector keyed by template id; trigger-kind indicators live at
/// kTriggerFeatureBase + kind, above every template id.
using FeatureVector = std::map<std::uint64_t, double>;

inline constexpr std::uint64_t kTriggerFeatureBase = std::uint64_t{1} << 63;

/// Template-id counts over the context records plus a trigger indicator,
/// L2-normalized.
FeatureVector featurize(const AnomalyReport& report);

double l2_norm(const FeatureVector& v);
double dot(const FeatureVector& a, const FeatureVector& b);
/// Unit-norm copy; the zero vector maps to itself.
FeatureVector normalized(const FeatureVector& v);

enum class FeedbackKind { moved_pool, set_criticality, create_pool, delete_pool };

std::string_view to_string(FeedbackKind kind);
FeedbackKind parse_feedback_kind(std::string_view text);

/// One administrator action. moved_pool: from/to are pool ids. set_criticality:
/// from/to are level names and `pool` is the report's pool. create_pool: `to`
/// is the name and `pool` the id it receives. delete_pool: `from` is the id.
/// Report features travel with the event so the log replays on its own.
struct FeedbackEvent {
    EventId event_id = 0;
    ReportId report_id = 0;
    FeedbackKind kind = FeedbackKind::moved_pool;
    std::string from_value;
    std::string to_value;
    std::string actor;
    Timestamp at{};
    std::optional<PoolId> pool;
    FeatureVector features;

    bool operator==(const FeedbackEvent&) const = default;
};

/// Learned part of one pool. The centroid is `sum` normalized; keeping the
/// raw sum makes removals exact and replay order-deterministic.
struct PoolModel {
    FeatureVector sum;
    std::uint64_t examples = 0;
    std::array<std::uint64_t, 3> histogram{};

    bool operator==(const PoolModel&) const = default;
};

struct ClassifierState {
    double assignment_threshold = 0.2;
    std::map<PoolId, Pool> pools;
    std::map<PoolId, PoolModel> models;
    /// Pool each report's features currently count toward (feedback only).
    std::map<ReportId, PoolId> contributions;
    /// Histogram bucket each report currently occupies.
    std::map<ReportId, std::pair<PoolId, Criticality>> counted;
    std::set<EventId> applied;
    PoolId next_pool_id = 1;

    bool operator==(const ClassifierState&) const = default;
};

/// State with only the undeletable default pool.
ClassifierState make_classifier_state(double assignment_threshold = 0.2,
                                      Timestamp created_at = Timestamp{});

/// Unit-norm centroid; empty when the pool has no examples.
FeatureVector centroid(const ClassifierState& state, PoolId pool);

struct Prediction {
    PoolId pool = kDefaultPoolId;
    Criticality criticality = Criticality::low;
    double confidence = 0.0;

    bool operator==(const Prediction&) const = default;
};

/// Nearest centroid by cosine. Below the threshold the default pool is
/// chosen. Ties go to more examples, then lower pool id. Criticality is the
/// chosen pool's histogram mode, lower level on ties.
Prediction predict(const ClassifierState& state, const FeatureVector& features);

/// Applies one event; a repeated event_id is a no-op. Throws NotFoundError
/// for unknown pools and ValidationError for malformed events, leaving the
/// state unchanged.
void apply_feedback(ClassifierState& state, const FeedbackEvent& event);

/// Builds (without applying) a create_pool event; rejects duplicate names.
FeedbackEvent make_create_pool_event(const ClassifierState& state, EventId id,
                                     std::string name, std::string actor, Timestamp at);
/// Builds (without applying) a delete_pool event; rejects the default pool.
FeedbackEvent make_delete_pool_event(const ClassifierState& state, EventId id, PoolId pool,
                                     std::string actor, Timestamp at);

/// Current placement of one report.
struct Assignment {
    PoolId pool = kDefaultPoolId;
    Criticality criticality = Criticality::low;
    double confidence = 0.0;
    bool human_pool = false;
    bool human_criticality = false;

    bool operator==(const Assignment&) const = default;
};

using AssignmentTable = std::map<ReportId, Assignment>;

/// Applies a prediction to the fields not yet set by a human.
void assign_predicted(Assignment& a, const Prediction& p);

/// Moves every report of `pool` to the default pool.
void reassign_deleted_pool(AssignmentTable& table, PoolId pool);

}  // namespace monilog
