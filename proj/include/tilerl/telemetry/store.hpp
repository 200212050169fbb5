#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tilerl/kernel/level.hpp"
#include "tilerl/train/rollout.hpp"
#include "tilerl/train/trainer.hpp"

namespace tilerl::telemetry {

inline constexpr int kTrajectorySchemaVersion = 1;
inline constexpr int kManifestSchemaVersion = 1;
inline constexpr int kMetricsSchemaVersion = 1;
inline constexpr const char* kCodeVersion = "0.1.0";

struct TurnEntry {
  std::vector<std::string> buttons;  // canonical order, e.g. {"a", "right"}
  double reward = 0.0;
  int frames = 0;
  bool fallback = false;
  bool normalized = false;
  std::optional<std::string> reply_text;  // protocol path only, verbatim
  std::optional<double> advantage;        // exported for external optimisers

  friend bool operator==(const TurnEntry&, const TurnEntry&) = default;
};

struct TrajectoryRecord {
  int schema_version = kTrajectorySchemaVersion;
  std::string run_id;
  std::string level_id;
  std::uint64_t seed = 0;
  std::int64_t max_turns = 0;
  std::int64_t batch = 0;
  std::vector<TurnEntry> turns;
  std::string termination;  // terminated | truncated | aborted
  std::string death;        // none | enemy | pit
  bool finished = false;
  double x_spawn = 0.0;
  double x_final = 0.0;

  friend bool operator==(const TrajectoryRecord&, const TrajectoryRecord&) = default;
};

TrajectoryRecord make_record(const std::string& run_id, std::int64_t batch, const train::Trajectory& t, std::int64_t max_turns,
                             const std::vector<double>* advantages = nullptr);

// One JSON object per line. Parsing rejects a missing field, a wrong type or
// another schema version with a SchemaError naming the problem.
std::string serialize_record(const TrajectoryRecord& r);
TrajectoryRecord parse_record(const std::string& line);

// Append-only NDJSON log; appends from several threads go through one lock
// and each record is flushed as a whole line.
class TrajectoryLog {
 public:
  TrajectoryLog(std::filesystem::path path, std::string run_id);
  void append(const TrajectoryRecord& r);
  [[nodiscard]] const std::filesystem::path& path() const { return path_; }
  [[nodiscard]] std::int64_t appended() const;

 private:
  std::filesystem::path path_;
  std::string run_id_;
  std::ofstream out_;
  mutable std::mutex mu_;
  std::int64_t count_ = 0;
};

std::vector<TrajectoryRecord> read_log(const std::filesystem::path& path);

struct RunManifest {
  int schema_version = kManifestSchemaVersion;
  std::string run_id;
  std::string command;
  std::string config;  // the dumped run configuration
  std::string level_set_version;
  int trajectory_schema = kTrajectorySchemaVersion;
  int metrics_schema = kMetricsSchemaVersion;
  std::string code_version;
  std::string started_at;  // UTC, ISO 8601
  std::uint64_t seed_root = 0;
};

std::string manifest_json(const RunManifest& m);
RunManifest parse_manifest(const std::string& text);
// Refuses to overwrite an existing manifest; the file is written once.
void write_manifest(const std::filesystem::path& path, const RunManifest& m);
RunManifest read_manifest(const std::filesystem::path& path);
std::string utc_timestamp();
// run id from the start time and seed, e.g. 20260101T120000Z-s7
std::string make_run_id(std::uint64_t seed);

// metrics.csv gets one row per step and per evaluation (column `kind`);
// progress.csv holds the evaluation curve in long form for plotting.
// Columns depend on the level list and are listed by the two header
// functions; both files are append-only.
class MetricsWriter {
 public:
  MetricsWriter(const std::filesystem::path& run_dir, std::vector<kernel::LevelId> levels);
  void write_step(const train::StepStats& s, const train::Trainer& trainer);
  void write_eval(const train::EvalRow& row, const train::Trainer& trainer);

 private:
  void write_metrics(const std::vector<std::string>& cells);
  std::ofstream metrics_;
  std::ofstream progress_;
  std::vector<kernel::LevelId> levels_;
};

std::vector<std::string> metrics_header(const std::vector<kernel::LevelId>& levels);
std::vector<std::string> progress_header();

struct AuditMismatch {
  std::size_t record = 0;
  std::string level_id;
  std::uint64_t seed = 0;
  int turn = 0;  // first divergent turn
  std::string detail;
};

struct AuditReport {
  std::size_t checked = 0;
  std::size_t skipped = 0;  // aborted trajectories have nothing to compare
  std::vector<AuditMismatch> mismatches;
  [[nodiscard]] bool ok() const { return mismatches.empty(); }
};

// Re-simulates each record from (level_id, seed, actions) and compares
// rewards, frames and the termination state. Records of other runs are
// ignored when run_id is non-empty.
AuditReport replay_audit(const std::vector<TrajectoryRecord>& records, const kernel::LevelSet& levels,
                         const std::string& run_id = "", double death_penalty = 0.0);
// Rebuilds a Trajectory, features included, by re-simulating a record.
// Throws SchemaError when the replay diverges from the recorded rewards.
train::Trajectory replay_record(const TrajectoryRecord& record, const kernel::LevelSet& levels, double death_penalty = 0.0);

// Checks the manifest's level-set version first; a mismatch refuses the audit
// with a SchemaError.
AuditReport replay_audit_run(const std::filesystem::path& run_dir, const kernel::LevelSet& levels);

}  // namespace tilerl::telemetry
