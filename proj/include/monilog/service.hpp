#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "monilog/classify.hpp"
#include "monilog/detect.hpp"
#include "monilog/formats.hpp"
#include "monilog/parser.hpp"

namespace monilog {

/// Raised when an ingest batch exceeds the size limit; the batch is refused.
class BatchTooLargeError : public ValidationError {
public:
    using ValidationError::ValidationError;
};

inline constexpr int kSnapshotVersion = 1;

struct ServiceConfig {
    /// Holds feedback.ndjson, ingest.wal and snapshot.json. Empty: no
    /// persistence.
    std::filesystem::path data_dir;
    ParserParams parser;
    DetectorParams detector;
    double assignment_threshold = 0.2;
    std::size_t max_batch = 10000;
    /// Structured stream to train on when no snapshot exists yet.
    std::optional<std::filesystem::path> learn_path;
    std::function<Timestamp()> clock;
};

struct IngestError {
    std::size_t index = 0;
    std::string message;
};

struct IngestResult {
    std::size_t accepted = 0;
    std::vector<IngestError> errors;
    /// Reports that became visible during this batch.
    std::vector<ReportId> new_reports;
};

struct StoredReport {
    AnomalyReport report;
    FeatureVector features;
    Assignment assignment;
    bool open = false;

    bool operator==(const StoredReport&) const = default;
};

struct AnomalyPage {
    std::vector<StoredReport> reports;
    std::string next_cursor;
};

struct PoolSummary {
    Pool pool;
    std::uint64_t examples = 0;
    std::size_t reports = 0;
};

std::string encode_cursor(ReportId id);
/// Throws ValidationError on text that is not a cursor.
ReportId decode_cursor(std::string_view cursor);

/// Ingest -> parse -> detect -> classify pipeline with durable feedback.
/// Every mutation is journaled (fsync) before it is applied; journal entries
/// share one op counter, so snapshot + replay of ops after the snapshot
/// reproduces the state. Thread-safe: mutations are serialized, reads share.
class Service {
public:
    explicit Service(ServiceConfig config);
    ~Service();

    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Valid records are journaled and processed in order; invalid ones are
    /// reported by index. `flush` releases held records and closes reports.
    IngestResult ingest(const Json& records, bool flush = false);

    /// Reports with id above the cursor, ascending. Throws NotFoundError on
    /// an unknown cursor.
    AnomalyPage list_anomalies(const std::string& cursor, std::size_t limit) const;
    StoredReport report(ReportId id) const;

    std::vector<PoolSummary> pools() const;
    Pool create_pool(const std::string& name, const std::string& actor);
    /// Returns the number of reports moved to the default pool.
    std::size_t delete_pool(PoolId id, const std::string& actor);

    /// Returns the event id, or nothing for a no-op.
    std::optional<EventId> move_anomaly(ReportId id, PoolId to, const std::string& actor);
    std::optional<EventId> set_criticality(ReportId id, Criticality level,
                                           const std::string& actor);

    std::vector<Template> templates() const;
    Json health() const;

    /// Writes the snapshot atomically; empty path means data_dir/snapshot.json.
    std::filesystem::path snapshot(const std::filesystem::path& path = {});
    /// Loads a snapshot, then replays later journal entries. On any error
    /// the current state is kept.
    void restore(const std::filesystem::path& path = {});

    /// Everything a client can read, for equality checks.
    Json read_view() const;
    ClassifierState classifier_state() const;
    std::uint64_t last_op() const;

    struct Core;

private:
    class Journal;

    std::filesystem::path default_snapshot_path() const;
    Timestamp now() const;
    Core load(const std::optional<std::filesystem::path>& snapshot_path) const;

    ServiceConfig config_;
    std::unique_ptr<Core> core_;
    std::unique_ptr<Journal> feedback_log_;
    std::unique_ptr<Journal> ingest_log_;
    mutable std::shared_mutex mutex_;
};

/// Report as served over the API (with its current placement).
Json report_view_json(const StoredReport& r, const std::string& pool_name);

}  // namespace monilog
