#include "tilerl/telemetry/store.hpp"

#include <json.hpp>

#include <chrono>
#include <cmath>
#include <ctime>
#include <sstream>

#include "tilerl/error.hpp"
#include "tilerl/kernel/world.hpp"

namespace tilerl::telemetry {

namespace {

using json = nlohmann::json;

template <typename T>
T field(const json& j, const char* name) {
  if (!j.contains(name)) throw SchemaError(std::string("missing field '") + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw SchemaError(std::string("field '") + name + "' has the wrong type");
  }
}

std::string termination_of(const train::Trajectory& t) {
  if (t.aborted) return "aborted";
  return t.terminated ? "terminated" : "truncated";
}

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

}  // namespace

TrajectoryRecord make_record(const std::string& run_id, std::int64_t batch, const train::Trajectory& t, std::int64_t max_turns,
                             const std::vector<double>* advantages) {
  if (advantages && advantages->size() != t.turns.size()) {
    throw ValidationError("advantage vector does not match the trajectory length");
  }
  TrajectoryRecord r;
  r.run_id = run_id;
  r.level_id = kernel::to_string(t.level);
  r.seed = t.seed;
  r.max_turns = max_turns;
  r.batch = batch;
  for (std::size_t i = 0; i < t.turns.size(); ++i) {
    const auto& turn = t.turns[i];
    TurnEntry e;
    for (auto b : turn.action.buttons()) e.buttons.emplace_back(kernel::to_string(b));
    e.reward = turn.reward;
    e.frames = turn.frames;
    e.fallback = turn.fallback;
    e.normalized = turn.normalized;
    if (!turn.reply_text.empty()) e.reply_text = turn.reply_text;
    if (advantages) e.advantage = (*advantages)[i];
    r.turns.push_back(std::move(e));
  }
  r.termination = termination_of(t);
  r.death = std::string(kernel::to_string(t.death));
  r.finished = t.finished;
  r.x_spawn = t.x_spawn;
  r.x_final = t.x_final;
  return r;
}

std::string serialize_record(const TrajectoryRecord& r) {
  if (r.level_id.empty()) throw SchemaError("trajectory record has no level_id");
  json turns = json::array();
  for (const auto& t : r.turns) {
    json j{{"buttons", t.buttons}, {"reward", t.reward}, {"frames", t.frames}, {"fallback", t.fallback}, {"normalized", t.normalized}};
    if (t.reply_text) j["reply_text"] = *t.reply_text;
    if (t.advantage) j["advantage"] = *t.advantage;
    turns.push_back(std::move(j));
  }
  json j{{"schema_version", r.schema_version},
         {"run_id", r.run_id},
         {"level_id", r.level_id},
         {"seed", r.seed},
         {"max_turns", r.max_turns},
         {"batch", r.batch},
         {"turns", std::move(turns)},
         {"termination", r.termination},
         {"death", r.death},
         {"finished", r.finished},
         {"x_spawn", r.x_spawn},
         {"x_final", r.x_final}};
  return j.dump();
}

TrajectoryRecord parse_record(const std::string& line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("trajectory record is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw SchemaError("trajectory record is not an object");
  TrajectoryRecord r;
  r.schema_version = field<int>(j, "schema_version");
  if (r.schema_version != kTrajectorySchemaVersion) {
    throw SchemaError("trajectory schema version " + std::to_string(r.schema_version) + ", expected " +
                      std::to_string(kTrajectorySchemaVersion));
  }
  r.run_id = field<std::string>(j, "run_id");
  r.level_id = field<std::string>(j, "level_id");
  if (r.level_id.empty()) throw SchemaError("field 'level_id' is empty");
  r.seed = field<std::uint64_t>(j, "seed");
  r.max_turns = field<std::int64_t>(j, "max_turns");
  r.batch = field<std::int64_t>(j, "batch");
  r.termination = field<std::string>(j, "termination");
  r.death = field<std::string>(j, "death");
  r.finished = field<bool>(j, "finished");
  r.x_spawn = field<double>(j, "x_spawn");
  r.x_final = field<double>(j, "x_final");
  if (!j.contains("turns") || !j["turns"].is_array()) throw SchemaError("field 'turns' missing or not an array");
  for (const auto& t : j["turns"]) {
    if (!t.is_object()) throw SchemaError("turn entry is not an object");
    TurnEntry e;
    e.buttons = field<std::vector<std::string>>(t, "buttons");
    e.reward = field<double>(t, "reward");
    e.frames = field<int>(t, "frames");
    e.fallback = field<bool>(t, "fallback");
    e.normalized = field<bool>(t, "normalized");
    if (t.contains("reply_text")) e.reply_text = field<std::string>(t, "reply_text");
    if (t.contains("advantage")) e.advantage = field<double>(t, "advantage");
    r.turns.push_back(std::move(e));
  }
  return r;
}

TrajectoryLog::TrajectoryLog(std::filesystem::path path, std::string run_id)
    : path_(std::move(path)), run_id_(std::move(run_id)) {
  out_.open(path_, std::ios::app);
  if (!out_) throw Error("cannot open trajectory log " + path_.string());
}

void TrajectoryLog::append(const TrajectoryRecord& r) {
  if (r.schema_version != kTrajectorySchemaVersion) {
    throw SchemaError("refusing record with schema version " + std::to_string(r.schema_version) + "; log is version " +
                      std::to_string(kTrajectorySchemaVersion));
  }
  if (r.run_id != run_id_) throw ValidationError("record for run '" + r.run_id + "' appended to log of '" + run_id_ + "'");
  const std::string line = serialize_record(r) + "\n";
  std::lock_guard lock(mu_);
  out_ << line;
  out_.flush();
  if (!out_) throw Error("write to " + path_.string() + " failed");
  ++count_;
}

std::int64_t TrajectoryLog::appended() const {
  std::lock_guard lock(mu_);
  return count_;
}

std::vector<TrajectoryRecord> read_log(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot read trajectory log " + path.string());
  std::vector<TrajectoryRecord> out;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      out.push_back(parse_record(line));
    } catch (const SchemaError& e) {
      throw SchemaError(path.string() + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

std::string manifest_json(const RunManifest& m) {
  json j{{"schema_version", m.schema_version},
         {"run_id", m.run_id},
         {"command", m.command},
         {"config", m.config},
         {"level_set_version", m.level_set_version},
         {"trajectory_schema", m.trajectory_schema},
         {"metrics_schema", m.metrics_schema},
         {"code_version", m.code_version},
         {"started_at", m.started_at},
         {"seed_root", m.seed_root}};
  return j.dump(2) + "\n";
}

RunManifest parse_manifest(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("manifest is not JSON: ") + e.what());
  }
  RunManifest m;
  m.schema_version = field<int>(j, "schema_version");
  if (m.schema_version != kManifestSchemaVersion) {
    throw SchemaError("manifest schema version " + std::to_string(m.schema_version) + ", expected " +
                      std::to_string(kManifestSchemaVersion));
  }
  m.run_id = field<std::string>(j, "run_id");
  m.command = field<std::string>(j, "command");
  m.config = field<std::string>(j, "config");
  m.level_set_version = field<std::string>(j, "level_set_version");
  m.trajectory_schema = field<int>(j, "trajectory_schema");
  m.metrics_schema = field<int>(j, "metrics_schema");
  m.code_version = field<std::string>(j, "code_version");
  m.started_at = field<std::string>(j, "started_at");
  m.seed_root = field<std::uint64_t>(j, "seed_root");
  return m;
}

void write_manifest(const std::filesystem::path& path, const RunManifest& m) {
  if (std::filesystem::exists(path)) throw ValidationError("manifest already exists: " + path.string());
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    out << manifest_json(m);
    if (!out) throw Error("cannot write " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw NotFoundError("cannot read manifest " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str());
}

std::string utc_timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

std::string make_run_id(std::uint64_t seed) {
  std::string ts = utc_timestamp();
  std::erase(ts, '-');
  std::erase(ts, ':');
  return ts + "-s" + std::to_string(seed);
}

std::vector<std::string> metrics_header(const std::vector<kernel::LevelId>& levels) {
  std::vector<std::string> h{"kind",          "step",           "total_samples",  "batch_samples",      "trajectories",
                             "aborted",       "mean_progress",  "finish_rate",    "mean_length",        "degenerate",
                             "degenerate_batches", "critic_loss", "critic_updates", "policy_minibatches", "surrogate",
                             "mean_ratio",    "clip_fraction",  "approx_kl",      "entropy",            "early_stopped",
                             "negative_advantages"};
  for (const auto& id : levels) {
    const auto s = kernel::to_string(id);
    h.push_back("progress_" + s);
    h.push_back("se_" + s);
    h.push_back("samples_" + s);
    h.push_back("weight_" + s);
  }
  return h;
}

std::vector<std::string> progress_header() {
  return {"step", "total_samples", "level", "mean_progress", "std_error", "finish_rate", "episodes"};
}

namespace {

void write_csv_row(std::ofstream& out, const std::vector<std::string>& cells) {
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (i) out << ',';
    out << cells[i];
  }
  out << '\n';
  out.flush();
}

void open_csv(std::ofstream& out, const std::filesystem::path& path, const std::vector<std::string>& header) {
  const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
  out.open(path, std::ios::app);
  if (!out) throw Error("cannot open " + path.string());
  if (fresh) write_csv_row(out, header);
}

}  // namespace

MetricsWriter::MetricsWriter(const std::filesystem::path& run_dir, std::vector<kernel::LevelId> levels)
    : levels_(std::move(levels)) {
  std::filesystem::create_directories(run_dir);
  open_csv(metrics_, run_dir / "metrics.csv", metrics_header(levels_));
  open_csv(progress_, run_dir / "progress.csv", progress_header());
}

void MetricsWriter::write_metrics(const std::vector<std::string>& cells) { write_csv_row(metrics_, cells); }

void MetricsWriter::write_step(const train::StepStats& s, const train::Trainer& trainer) {
  std::vector<std::string> c{"step",
                             std::to_string(s.step),
                             std::to_string(s.total_samples),
                             std::to_string(s.batch_samples),
                             std::to_string(s.trajectories),
                             std::to_string(s.aborted),
                             fmt(s.mean_progress),
                             fmt(s.finish_rate),
                             fmt(s.mean_length),
                             s.degenerate ? "1" : "0",
                             std::to_string(trainer.degenerate_batches()),
                             fmt(s.critic.loss),
                             std::to_string(trainer.critic_updates()),
                             std::to_string(trainer.policy_minibatches()),
                             fmt(s.policy.surrogate),
                             fmt(s.policy.mean_ratio),
                             fmt(s.policy.clip_fraction),
                             fmt(s.policy.approx_kl),
                             fmt(s.policy.entropy),
                             s.policy.early_stopped ? "1" : "0",
                             std::to_string(trainer.negative_advantages())};
  const auto& cur = trainer.curriculum();
  for (const auto& id : levels_) {
    const std::size_t k = cur.index_of(id);
    c.push_back(k < s.level_progress.size() ? fmt(s.level_progress[k]) : "");
    c.push_back("");
    c.push_back(k < s.level_samples.size() ? std::to_string(s.level_samples[k]) : "");
    c.push_back(k < s.weights.size() ? fmt(s.weights[k]) : "");
  }
  write_metrics(c);
}

void MetricsWriter::write_eval(const train::EvalRow& row, const train::Trainer& trainer) {
  std::vector<std::string> c{"eval", std::to_string(row.step), std::to_string(row.total_samples), "", "", "",
                             fmt(row.mean_progress())};
  double fin = 0.0;
  for (const auto& s : row.scores) fin += s.finish_rate;
  c.push_back(row.scores.empty() ? "" : fmt(fin / static_cast<double>(row.scores.size())));
  while (c.size() < 10) c.push_back("");
  c.push_back(std::to_string(trainer.degenerate_batches()));
  c.push_back("");
  c.push_back(std::to_string(trainer.critic_updates()));
  c.push_back(std::to_string(trainer.policy_minibatches()));
  while (c.size() < 20) c.push_back("");
  c.push_back(std::to_string(trainer.negative_advantages()));
  for (const auto& id : levels_) {
    const train::LevelScore* found = nullptr;
    for (const auto& s : row.scores) {
      if (s.level == id) found = &s;
    }
    c.push_back(found ? fmt(found->mean_progress) : "");
    c.push_back(found ? fmt(found->std_error) : "");
    c.push_back("");
    c.push_back("");
  }
  write_metrics(c);
  for (const auto& s : row.scores) {
    write_csv_row(progress_, {std::to_string(row.step), std::to_string(row.total_samples), kernel::to_string(s.level),
                              fmt(s.mean_progress), fmt(s.std_error), fmt(s.finish_rate), std::to_string(s.episodes)});
  }
}

AuditReport replay_audit(const std::vector<TrajectoryRecord>& records, const kernel::LevelSet& levels, const std::string& run_id,
                         double death_penalty) {
  AuditReport report;
  kernel::KernelOptions opts;
  opts.death_penalty = death_penalty;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    if (!run_id.empty() && r.run_id != run_id) continue;
    if (r.termination == "aborted") {
      ++report.skipped;
      continue;
    }
    ++report.checked;
    auto mismatch = [&](int turn, std::string detail) {
      report.mismatches.push_back({i, r.level_id, r.seed, turn, std::move(detail)});
    };
    kernel::WorldState w;
    try {
      w = kernel::reset(levels, kernel::parse_level_id(r.level_id), r.seed, r.max_turns);
    } catch (const Error& e) {
      mismatch(0, std::string("reset failed: ") + e.what());
      continue;
    }
    if (w.x_tiles() != r.x_spawn) {
      mismatch(0, "spawn x differs");
      continue;
    }
    bool diverged = false;
    for (std::size_t t = 0; t < r.turns.size() && !diverged; ++t) {
      const auto& e = r.turns[t];
      kernel::ActionSet a;
      for (const auto& name : e.buttons) {
        const auto b = kernel::parse_button(name);
        if (!b) {
          mismatch(static_cast<int>(t), "unknown button '" + name + "'");
          diverged = true;
          break;
        }
        a.insert(*b);
      }
      if (diverged) break;
      if (w.done()) {
        mismatch(static_cast<int>(t), "episode already over in replay");
        diverged = true;
        break;
      }
      if (e.frames == 0 && t + 1 == r.turns.size() && r.termination == "terminated") break;  // strict protocol stop
      kernel::StepOutcome out;
      try {
        out = kernel::step(w, a, opts);
      } catch (const Error& ex) {
        mismatch(static_cast<int>(t), std::string("step failed: ") + ex.what());
        diverged = true;
        break;
      }
      if (out.reward != e.reward) {
        std::ostringstream d;
        d.precision(17);
        d << "reward " << out.reward << " != recorded " << e.reward;
        mismatch(static_cast<int>(t), d.str());
        diverged = true;
      } else if (out.frames_consumed != e.frames) {
        mismatch(static_cast<int>(t), "frames " + std::to_string(out.frames_consumed) + " != recorded " + std::to_string(e.frames));
        diverged = true;
      }
    }
    if (diverged) continue;
    const int T = static_cast<int>(r.turns.size());
    if (w.x_tiles() != r.x_final) {
      mismatch(T, "final x differs");
    } else if (w.finished != r.finished || std::string(kernel::to_string(w.death)) != r.death) {
      mismatch(T, "termination state differs");
    } else if (r.termination == "truncated" && !w.truncated()) {
      mismatch(T, "recorded truncation not reproduced");
    }
  }
  return report;
}

train::Trajectory replay_record(const TrajectoryRecord& r, const kernel::LevelSet& levels, double death_penalty) {
  if (r.termination == "aborted") throw SchemaError("aborted trajectories cannot be rebuilt");
  std::vector<kernel::ActionSet> actions;
  for (const auto& e : r.turns) {
    kernel::ActionSet a;
    for (const auto& name : e.buttons) {
      const auto b = kernel::parse_button(name);
      if (!b) throw SchemaError("unknown button '" + name + "'");
      a.insert(*b);
    }
    actions.push_back(a);
  }
  const auto backend = train::ScriptedBackend::sequence(actions.empty() ? std::vector{kernel::ActionSet{kernel::Button::Noop}} : actions);
  kernel::KernelOptions opts;
  opts.death_penalty = death_penalty;
  std::mt19937_64 rng(0);
  const auto id = kernel::parse_level_id(r.level_id);
  auto t = train::run_episode(backend, levels, id, r.seed, static_cast<int>(std::min<std::int64_t>(r.max_turns, static_cast<std::int64_t>(r.turns.size()))), rng, opts, true);
  if (t.turns.size() != r.turns.size()) throw SchemaError("replay of " + r.level_id + " ended after " + std::to_string(t.turns.size()) + " turns, record has " + std::to_string(r.turns.size()));
  for (std::size_t i = 0; i < t.turns.size(); ++i) {
    if (t.turns[i].reward != r.turns[i].reward) throw SchemaError("replay diverges at turn " + std::to_string(i));
  }
  // The replay horizon is the record length; restore the recorded end state.
  t.terminated = r.termination == "terminated";
  t.truncated = r.termination == "truncated";
  return t;
}

AuditReport replay_audit_run(const std::filesystem::path& run_dir, const kernel::LevelSet& levels) {
  const auto m = read_manifest(run_dir / "manifest.json");
  if (m.level_set_version != levels.version()) {
    throw SchemaError("level set version " + levels.version() + " does not match the run's " + m.level_set_version +
                      "; audit refused");
  }
  double penalty = 0.0;
  if (!m.config.empty()) penalty = train::parse_run_config(m.config).rollout.death_penalty;
  const auto log = run_dir / "trajectories.ndjson";
  if (!std::filesystem::exists(log)) return {};
  return replay_audit(read_log(log), levels, m.run_id, penalty);
}

}  // namespace tilerl::telemetry
