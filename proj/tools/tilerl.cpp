// Command-line front end: train, eval, rollout, compare-estimators, replay,
// gradcheck and serve-env.
#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>

#include "tilerl/advantage/estimators.hpp"
#include "tilerl/error.hpp"
#include "tilerl/kernel/level.hpp"
#include "tilerl/nn/checkpoint.hpp"
#include "tilerl/nn/gradcheck.hpp"
#include "tilerl/serve/env_server.hpp"
#include "tilerl/telemetry/store.hpp"
#include "tilerl/train/trainer.hpp"

#include <json.hpp>

namespace fs = std::filesystem;
using namespace tilerl;

namespace {

constexpr int kExitError = 1;
constexpr int kExitNumeric = 3;

std::optional<std::string> env(const char* name) {
  const char* v = std::getenv(name);
  if (!v || !*v) return std::nullopt;
  return std::string(v);
}

std::uint64_t env_seed(std::uint64_t fallback) {
  if (auto s = env("TILERL_SEED")) {
    try {
      return std::stoull(*s);
    } catch (const std::exception&) {
      throw ValidationError("TILERL_SEED: not an unsigned integer: '" + *s + "'");
    }
  }
  return fallback;
}

// --out, else $TILERL_OUT_DIR/<run_id>, else the fallback.
fs::path resolve_out(const std::string& flag, const std::string& run_id, const fs::path& fallback) {
  if (!flag.empty()) return flag;
  if (auto d = env("TILERL_OUT_DIR")) return fs::path(*d) / run_id;
  return fallback;
}

const kernel::LevelSet& level_set(const std::string& dir) {
  static std::optional<kernel::LevelSet> custom;
  if (dir.empty()) return kernel::LevelSet::builtin();
  if (!custom) custom = kernel::LevelSet::load_directory(dir);
  return *custom;
}

telemetry::RunManifest manifest_for(const std::string& command, const std::string& run_id, const std::string& config,
                                    const kernel::LevelSet& levels, std::uint64_t seed) {
  telemetry::RunManifest m;
  m.run_id = run_id;
  m.command = command;
  m.config = config;
  m.level_set_version = levels.version();
  m.code_version = telemetry::kCodeVersion;
  m.started_at = telemetry::utc_timestamp();
  m.seed_root = seed;
  return m;
}

std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// Backend selection shared by eval and rollout.
struct BackendFlags {
  std::string checkpoint;
  std::string remote;
  std::string scripted;
  bool greedy = false;
  double temperature = 1.0;
  double top_p = 1.0;
  bool strict = false;
  int max_buttons = 2;

  void add(CLI::App* app) {
    auto* c = app->add_option("--checkpoint", checkpoint, "checkpoint holding an 'actor' entry");
    auto* r = app->add_option("--remote", remote, "URL of a remote text policy (e.g. http://127.0.0.1:8000/act)");
    auto* s = app->add_option("--scripted", scripted, "built-in scripted policy")
                  ->check(CLI::IsMember({"noop", "right", "right_jump"}));
    c->excludes(r)->excludes(s);
    r->excludes(s);
    app->add_flag("--greedy", greedy, "argmax instead of sampling (rollout.selection = greedy)");
    app->add_option("--temperature", temperature, "rollout.temperature")->check(CLI::PositiveNumber);
    app->add_option("--top-p", top_p, "rollout.top_p")->check(CLI::Range(0.0, 1.0));
    app->add_flag("--strict", strict, "remote replies that fail validation end the episode");
    app->add_option("--max-buttons", max_buttons, "buttons allowed per remote answer")->check(CLI::PositiveNumber);
  }
};

struct LoadedBackend {
  std::shared_ptr<const train::PolicyBackend> backend;
  std::shared_ptr<nn::Network<float>> actor;  // keeps the ActorBackend's network alive
  kernel::ActionSpace space = kernel::ActionSpace::Original;
};

LoadedBackend make_backend(const BackendFlags& f) {
  LoadedBackend out;
  if (!f.checkpoint.empty()) {
    const auto ck = nn::load_checkpoint(f.checkpoint);
    out.actor = std::make_shared<nn::Network<float>>(ck.get("actor").net);
    const auto meta = nlohmann::json::parse(ck.metadata_json, nullptr, false);
    if (meta.is_object() && meta.contains("config") && meta["config"].is_string()) {
      out.space = train::parse_run_config(meta["config"].get<std::string>()).rollout.action_space;
    }
    train::SamplingOptions s{f.temperature, f.top_p, f.greedy ? train::ActionSelection::Greedy : train::ActionSelection::Sample};
    out.backend = std::make_shared<train::ActorBackend>(*out.actor, out.space, s);
  } else if (!f.remote.empty()) {
    train::RemoteBackend::Options o;
    o.url = f.remote;
    o.validation.strict = f.strict;
    o.validation.max_buttons = f.max_buttons;
    out.backend = std::make_shared<train::RemoteBackend>(o);
  } else if (!f.scripted.empty()) {
    using kernel::Button;
    if (f.scripted == "noop") {
      out.backend = std::make_shared<train::ScriptedBackend>(train::ScriptedBackend::constant({Button::Noop}));
    } else if (f.scripted == "right") {
      out.backend = std::make_shared<train::ScriptedBackend>(train::ScriptedBackend::constant({Button::Right}));
    } else {
      out.backend = std::make_shared<train::ScriptedBackend>(
          [](const kernel::WorldState& w) {
            return w.turn_count % 2 == 0 ? kernel::ActionSet{Button::Right, Button::A} : kernel::ActionSet{Button::Right};
          },
          "scripted_right_jump");
    }
  } else {
    throw ValidationError("choose a policy with --checkpoint, --remote or --scripted");
  }
  return out;
}

// ---------------------------------------------------------------- train

struct TrainFlags {
  std::string config_path;
  std::string preset;
  std::vector<std::string> sets;
  std::string estimator, levels, curriculum, action_space, out, run_id, resume, remote, levels_dir;
  std::optional<std::int64_t> steps, max_samples, eval_interval;
  std::optional<int> eval_episodes, trajectories, max_turns;
  std::optional<std::uint64_t> seed;
  int log_every = 10;
  bool print_fields = false;
};

void add_train(CLI::App& app, TrainFlags& f) {
  auto* c = app.add_subcommand("train", "train a policy and write manifest, metrics, checkpoints and trajectory logs");
  c->add_option("--config", f.config_path, "INI run configuration ([run], [rollout], [train])");
  c->add_option("--preset", f.preset, "run.preset: comparison or classical defaults")
      ->check(CLI::IsMember({"comparison", "classical"}));
  c->add_option("--set", f.sets, "override any field, e.g. --set train.gamma=0.9 (see --fields)");
  c->add_option("--estimator", f.estimator, "train.estimator");
  c->add_option("--levels", f.levels, "rollout.levels, e.g. 1-1,1-2 or 1-1:2-2");
  c->add_option("--curriculum", f.curriculum, "train.curriculum");
  c->add_option("--action-space", f.action_space, "rollout.action_space");
  c->add_option("--steps", f.steps, "train.total_steps");
  c->add_option("--max-samples", f.max_samples, "train.max_samples");
  c->add_option("--trajectories", f.trajectories, "rollout.trajectories_per_batch");
  c->add_option("--max-turns", f.max_turns, "rollout.max_turns");
  c->add_option("--eval-interval", f.eval_interval, "train.eval_interval_samples");
  c->add_option("--eval-episodes", f.eval_episodes, "train.eval_episodes");
  c->add_option("--seed", f.seed, "rollout.seed and train.init_seed (env TILERL_SEED)");
  c->add_option("--out", f.out, "output directory (env TILERL_OUT_DIR/<run id>)");
  c->add_option("--run-id", f.run_id, "run identifier; default from time and seed");
  c->add_option("--resume", f.resume, "checkpoint to continue from");
  c->add_option("--remote", f.remote, "collect with a remote text policy; advantages are exported, no policy update");
  c->add_option("--log-every", f.log_every, "write trajectories of every n-th step; 0 disables")->check(CLI::NonNegativeNumber);
  c->add_option("--levels-dir", f.levels_dir, "level directory (env TILERL_LEVEL_DIR)");
  c->add_flag("--fields", f.print_fields, "list every config field and exit");
}

int run_train(const TrainFlags& f) {
  if (f.print_fields) {
    for (const auto& [path, help] : train::config_fields()) std::cout << path << "\t" << help << "\n";
    return 0;
  }
  const auto& levels = level_set(f.levels_dir);
  train::RunConfig rc;
  if (!f.config_path.empty()) rc = train::load_run_config(f.config_path);
  if (f.preset == "classical") {
    rc.train = train::classical_defaults();
    rc.rollout = train::classical_rollout_defaults();
  }
  auto set = [&](const std::string& path, const std::string& v) { train::apply_override(rc, path, v); };
  if (!f.estimator.empty()) set("train.estimator", f.estimator);
  if (!f.levels.empty()) rc.rollout.levels = kernel::parse_level_list(f.levels, levels);
  if (!f.curriculum.empty()) set("train.curriculum", f.curriculum);
  if (!f.action_space.empty()) set("rollout.action_space", f.action_space);
  if (f.steps) rc.train.total_steps = *f.steps;
  if (f.max_samples) rc.train.max_samples = *f.max_samples;
  if (f.trajectories) rc.rollout.trajectories_per_batch = *f.trajectories;
  if (f.max_turns) rc.rollout.max_turns = *f.max_turns;
  if (f.eval_interval) rc.train.eval_interval_samples = *f.eval_interval;
  if (f.eval_episodes) rc.train.eval_episodes = *f.eval_episodes;
  const std::uint64_t seed = f.seed ? *f.seed : env_seed(rc.rollout.seed);
  rc.rollout.seed = seed;
  if (f.seed || env("TILERL_SEED")) rc.train.init_seed = seed;
  for (const auto& kv : f.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ValidationError("--set expects section.key=value, got '" + kv + "'");
    set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  train::validate(rc);
  if (rc.train.curriculum == train::CurriculumMode::InverseLength && rc.rollout.levels.size() == 1) {
    std::cerr << "warning: inverse_length curriculum with a single level is the same as uniform\n";
  }
  rc.run_id = f.run_id.empty() ? telemetry::make_run_id(seed) : f.run_id;
  const fs::path out = resolve_out(f.out, rc.run_id, fs::path(rc.output_dir) / rc.run_id);
  rc.output_dir = out.string();

  telemetry::write_manifest(out / "manifest.json", manifest_for("train", rc.run_id, train::dump_run_config(rc), levels, seed));

  std::unique_ptr<train::Trainer> trainer;
  if (!f.remote.empty()) {
    train::RemoteBackend::Options o;
    o.url = f.remote;
    trainer = std::make_unique<train::Trainer>(rc, levels, std::make_shared<train::RemoteBackend>(o));
  } else {
    trainer = std::make_unique<train::Trainer>(rc, levels);
  }
  if (!f.resume.empty()) trainer->restore(nn::load_checkpoint(f.resume));

  telemetry::MetricsWriter metrics(out, rc.rollout.levels);
  std::unique_ptr<telemetry::TrajectoryLog> log;
  if (f.log_every > 0) log = std::make_unique<telemetry::TrajectoryLog>(out / "trajectories.ndjson", rc.run_id);
  fs::create_directories(out / "checkpoints");
  fs::path last_good;
  auto save = [&](const std::string& name) {
    const fs::path p = out / "checkpoints" / name;
    nn::save_checkpoint(p, trainer->checkpoint());
    last_good = p;
  };

  train::TrainHooks hooks;
  hooks.on_step = [&](const train::Trainer& t, const train::StepStats& s) {
    metrics.write_step(s, t);
    if (log && s.step % f.log_every == 0) {
      const auto& batch = t.last_batch();
      const auto& adv = t.last_advantages();
      for (std::size_t i = 0; i < batch.trajectories.size(); ++i) {
        const std::vector<double>* a = i < adv.size() ? &adv[i].values : nullptr;
        log->append(telemetry::make_record(rc.run_id, s.step, batch.trajectories[i], rc.rollout.max_turns, a));
      }
    }
    if (rc.train.checkpoint_interval_steps > 0 && s.step % rc.train.checkpoint_interval_steps == 0) {
      char name[32];
      std::snprintf(name, sizeof name, "step_%06lld.ckpt", static_cast<long long>(s.step));
      save(name);
    }
    std::cerr << "step " << s.step << " samples " << s.total_samples << " progress " << fixed(s.mean_progress, 2)
              << (s.degenerate ? " (degenerate: " + s.degenerate_reason + ")" : "") << "\n";
  };
  hooks.on_eval = [&](const train::Trainer& t, const train::EvalRow& row) {
    metrics.write_eval(row, t);
    std::cerr << "eval at " << row.total_samples << " samples: mean progress " << fixed(row.mean_progress(), 2) << "\n";
  };
  try {
    train::run_training(*trainer, hooks);
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    std::cerr << "training halted; last good checkpoint: " << (last_good.empty() ? "none" : last_good.string()) << "\n";
    return kExitNumeric;
  }
  save("final.ckpt");
  std::cout << out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- eval

struct EvalFlags {
  BackendFlags backend;
  std::string levels = "1-1";
  int episodes = 256;
  int max_turns = 80;
  std::optional<std::uint64_t> seed;
  std::string out, levels_dir;
};

int run_eval(const EvalFlags& f) {
  const auto& levels = level_set(f.levels_dir);
  const auto ids = kernel::parse_level_list(f.levels, levels);
  const std::uint64_t seed = f.seed ? *f.seed : env_seed(0);
  auto be = make_backend(f.backend);
  std::optional<fs::path> out;
  if (!f.out.empty() || env("TILERL_OUT_DIR")) {
    const std::string id = telemetry::make_run_id(seed);
    out = resolve_out(f.out, id, id);
    telemetry::write_manifest(*out / "manifest.json", manifest_for("eval", id, "", levels, seed));
  }
  const auto scores = train::evaluate(*be.backend, levels, ids, f.episodes, seed, f.max_turns);
  std::ostringstream table;
  table << "level\tepisodes\tmean_progress\tstd_error\tfinish_rate\n";
  for (const auto& s : scores) {
    table << kernel::to_string(s.level) << "\t" << s.episodes << "\t" << fixed(s.mean_progress) << "\t" << fixed(s.std_error)
          << "\t" << fixed(s.finish_rate) << "\n";
  }
  std::cout << table.str();
  if (out) std::ofstream(*out / "eval.tsv") << table.str();
  return 0;
}

// ---------------------------------------------------------------- rollout

struct RolloutFlags {
  BackendFlags backend;
  std::string levels = "1-1";
  int trajectories = 16;
  int max_turns = 80;
  std::optional<std::uint64_t> seed;
  std::string out, levels_dir;
  double death_penalty = 0.0;
};

int run_rollout(const RolloutFlags& f) {
  const auto& levels = level_set(f.levels_dir);
  train::RunConfig rc;
  rc.rollout.levels = kernel::parse_level_list(f.levels, levels);
  rc.rollout.trajectories_per_batch = f.trajectories;
  rc.rollout.max_turns = f.max_turns;
  rc.rollout.seed = f.seed ? *f.seed : env_seed(0);
  rc.rollout.death_penalty = f.death_penalty;
  rc.rollout.temperature = f.backend.temperature;
  rc.rollout.top_p = f.backend.top_p;
  rc.rollout.selection = f.backend.greedy ? train::ActionSelection::Greedy : train::ActionSelection::Sample;
  train::validate(rc);
  rc.run_id = telemetry::make_run_id(rc.rollout.seed);
  const fs::path out = resolve_out(f.out, rc.run_id, fs::path("runs") / rc.run_id);
  auto be = make_backend(f.backend);
  rc.rollout.action_space = be.space;
  telemetry::write_manifest(out / "manifest.json",
                            manifest_for("rollout", rc.run_id, train::dump_run_config(rc), levels, rc.rollout.seed));
  telemetry::TrajectoryLog log(out / "trajectories.ndjson", rc.run_id);
  const auto cur = train::make_curriculum(rc.rollout.levels, train::CurriculumMode::Uniform);
  const auto batch = train::collect_rollouts(*be.backend, levels, rc.rollout, cur, 0, false);
  double progress = 0.0;
  for (const auto& t : batch.trajectories) {
    log.append(telemetry::make_record(rc.run_id, 0, t, rc.rollout.max_turns));
    progress += t.progress();
  }
  std::cout << "trajectories\t" << batch.trajectories.size() << "\naborted\t" << batch.aborted << "\nsamples\t"
            << batch.samples() << "\nmean_progress\t"
            << fixed(batch.trajectories.empty() ? 0.0 : progress / static_cast<double>(batch.trajectories.size())) << "\nlog\t"
            << log.path().string() << "\n";
  for (const auto& why : batch.abort_reasons) std::cerr << "aborted: " << why << "\n";
  return 0;
}

// ---------------------------------------------------------------- compare-estimators

struct CompareFlags {
  std::string log;
  std::string critic;
  bool zero_critic = false;
  std::string estimators;
  std::string levels = "1-1";
  int trajectories = 16;
  int max_turns = 80;
  std::optional<std::uint64_t> seed;
  std::string scripted = "right_jump";
  double gamma = 0.95;
  double lambda = 0.95;
  bool bootstrap = false;
  std::string out, levels_dir;
};

std::vector<double> ranks(const std::vector<double>& x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = avg;
    i = j + 1;
  }
  return r;
}

// Pearson correlation of the average ranks; NaN when either side is constant.
double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const auto ma = advantage::moments(ra);
  const auto mb = advantage::moments(rb);
  if (ma.sigma == 0.0 || mb.sigma == 0.0) return std::nan("");
  double c = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) c += (ra[i] - ma.mean) * (rb[i] - mb.mean);
  return c / static_cast<double>(ra.size()) / (ma.sigma * mb.sigma);
}

int run_compare(const CompareFlags& f) {
  const auto& levels = level_set(f.levels_dir);
  std::vector<advantage::EstimatorKind> kinds;
  if (f.estimators.empty()) {
    kinds = advantage::all_estimators();
  } else {
    std::stringstream ss(f.estimators);
    std::string name;
    while (std::getline(ss, name, ',')) {
      const auto k = advantage::parse_estimator(name);
      if (!k) throw ValidationError("unknown estimator '" + name + "'");
      kinds.push_back(*k);
    }
  }
  const bool critic_needed = std::any_of(kinds.begin(), kinds.end(), advantage::needs_critic);
  if (critic_needed && f.critic.empty() && !f.zero_critic) {
    throw ValidationError("ppo_critic, ppo_critic_positive and gae need --critic CHECKPOINT (or --zero-critic for V = 0)");
  }
  const std::uint64_t seed = f.seed ? *f.seed : env_seed(0);

  // Trajectories with features, from a log or a fresh scripted rollout.
  std::vector<train::Trajectory> trajs;
  if (!f.log.empty()) {
    for (const auto& r : telemetry::read_log(f.log)) {
      if (r.termination == "aborted") continue;
      trajs.push_back(telemetry::replay_record(r, levels));
    }
  } else {
    RolloutFlags rf;
    rf.backend.scripted = f.scripted;
    auto be = make_backend(rf.backend);
    train::RolloutConfig rc;
    rc.levels = kernel::parse_level_list(f.levels, levels);
    rc.trajectories_per_batch = f.trajectories;
    rc.max_turns = f.max_turns;
    rc.seed = seed;
    trajs = train::collect_rollouts(*be.backend, levels, rc, train::make_curriculum(rc.levels, train::CurriculumMode::Uniform), 0)
                .trajectories;
  }
  if (trajs.empty()) throw ValidationError("no trajectories to compare");

  std::optional<nn::Network<float>> critic;
  if (!f.critic.empty()) critic = nn::load_checkpoint(f.critic).get("critic").net;
  advantage::TrajectoryBatch plain;
  for (const auto& t : trajs) {
    advantage::BatchItem item;
    item.level_id = kernel::to_string(t.level);
    for (const auto& turn : t.turns) item.seq.rewards.push_back(turn.reward);
    item.seq.terminated = t.terminated;
    item.seq.truncated = t.truncated;
    if (critic) {
      const auto v = train::critic_values(*critic, t.features.data(), t.turns.size() + 1);
      item.values.assign(v.begin(), v.end() - 1);
      item.bootstrap = t.truncated ? v.back() : 0.0;
    } else {
      item.values.assign(t.turns.size(), 0.0);
    }
    plain.push_back(std::move(item));
  }
  // GAE always bootstraps truncation; the PPO estimators only on request.
  advantage::TrajectoryBatch no_boot = plain;
  for (auto& item : no_boot) item.bootstrap = 0.0;

  advantage::EstimatorOptions eo;
  eo.gamma = f.gamma;
  eo.lambda = f.lambda;
  std::vector<advantage::AdvantageResult> results;
  for (auto k : kinds) {
    const bool boot = k == advantage::EstimatorKind::Gae || f.bootstrap;
    results.push_back(advantage::compute_advantages(k, boot ? plain : no_boot, eo));
  }

  const std::string id = telemetry::make_run_id(seed);
  const fs::path out = resolve_out(f.out, id, fs::path("reports") / id);
  telemetry::write_manifest(out / "manifest.json", manifest_for("compare-estimators", id, "", levels, seed));

  std::ofstream turns(out / "advantages.tsv");
  turns << "trajectory\tlevel\tturn\treward\treturn_to_go\tvalue";
  for (auto k : kinds) turns << "\t" << advantage::to_string(k);
  turns << "\n";
  std::vector<std::vector<double>> flat(kinds.size());
  for (std::size_t i = 0; i < plain.size(); ++i) {
    const auto ret = advantage::return_to_go(plain[i].seq, f.gamma);
    for (std::size_t t = 0; t < ret.size(); ++t) {
      turns << i << "\t" << plain[i].level_id << "\t" << t << "\t" << plain[i].seq.rewards[t] << "\t" << ret[t] << "\t"
            << plain[i].values[t];
      for (std::size_t k = 0; k < kinds.size(); ++k) {
        const double a = results[k].per_trajectory[i].values[t];
        turns << "\t" << a;
        flat[k].push_back(a);
      }
      turns << "\n";
    }
  }

  std::ostringstream summary;
  summary << "estimator\tdegenerate\treason\tsigma\tmean\tstd\tmin\tmax\tfrac_positive\tfrac_negative\n";
  for (std::size_t k = 0; k < kinds.size(); ++k) {
    const auto m = advantage::moments(flat[k]);
    const auto [lo, hi] = std::minmax_element(flat[k].begin(), flat[k].end());
    const double n = static_cast<double>(flat[k].size());
    const double pos = static_cast<double>(std::count_if(flat[k].begin(), flat[k].end(), [](double a) { return a > 0.0; }));
    const double neg = static_cast<double>(std::count_if(flat[k].begin(), flat[k].end(), [](double a) { return a < 0.0; }));
    const double sigma = results[k].per_trajectory.empty() ? 0.0 : results[k].per_trajectory[0].normalization_sigma;
    summary << advantage::to_string(kinds[k]) << "\t" << (results[k].degenerate ? "yes" : "no") << "\t"
            << (results[k].reason.empty() ? "-" : results[k].reason) << "\t" << fixed(sigma, 6) << "\t" << fixed(m.mean, 6)
            << "\t" << fixed(m.sigma, 6) << "\t" << fixed(*lo, 6) << "\t" << fixed(*hi, 6) << "\t" << fixed(pos / n) << "\t"
            << fixed(neg / n) << "\n";
  }
  std::ofstream(out / "summary.tsv") << summary.str();

  std::ofstream corr(out / "spearman.tsv");
  corr << "estimator";
  for (auto k : kinds) corr << "\t" << advantage::to_string(k);
  corr << "\n";
  for (std::size_t a = 0; a < kinds.size(); ++a) {
    corr << advantage::to_string(kinds[a]);
    for (std::size_t b = 0; b < kinds.size(); ++b) {
      const double r = spearman(flat[a], flat[b]);
      corr << "\t" << (std::isnan(r) ? std::string("nan") : fixed(r, 4));
    }
    corr << "\n";
  }
  std::cout << summary.str() << "report: " << out.string() << "\n";
  return 0;
}

// ---------------------------------------------------------------- replay

struct ReplayFlags {
  std::string run;
  std::string log;
  std::string levels_dir;
  double death_penalty = 0.0;
};

int run_replay(const ReplayFlags& f) {
  const auto& levels = level_set(f.levels_dir);
  telemetry::AuditReport report;
  if (!f.run.empty()) {
    report = telemetry::replay_audit_run(f.run, levels);
  } else {
    report = telemetry::replay_audit(telemetry::read_log(f.log), levels, "", f.death_penalty);
  }
  std::cout << "checked\t" << report.checked << "\nskipped\t" << report.skipped << "\nmismatches\t" << report.mismatches.size()
            << "\n";
  for (const auto& m : report.mismatches) {
    std::cout << "mismatch\trecord " << m.record << "\t" << m.level_id << "\tseed " << m.seed << "\tturn " << m.turn << "\t"
              << m.detail << "\n";
  }
  return report.ok() ? 0 : kExitError;
}

// ---------------------------------------------------------------- gradcheck

struct GradFlags {
  int configs = 24;
  std::uint64_t seed = 0;
  double eps = 1e-3;
  double tolerance = 1e-4;
  bool verbose = false;
};

int run_gradcheck(const GradFlags& f) {
  std::mt19937_64 rng(f.seed);
  std::map<std::string, double> worst;  // per layer kind
  int failed = 0;
  for (int i = 0; i < f.configs; ++i) {
    const auto spec = nn::random_gradcheck_spec(rng);
    nn::GradcheckOptions o;
    o.eps = f.eps;
    o.tolerance = f.tolerance;
    o.seed = rng();
    const auto r = nn::gradcheck(spec, o);
    if (!r.passed) ++failed;
    for (const auto& b : r.blocks) {
      std::string kind = b.name;
      if (b.name.starts_with("trunk.")) {
        const int layer = std::stoi(b.name.substr(6));
        kind = spec.layers[static_cast<std::size_t>(layer)].kind == nn::LayerKind::Conv ? "conv" : "dense";
      } else if (b.name.starts_with("logits.") || b.name.starts_with("value.")) {
        kind = "head";
      }
      worst[kind] = std::max(worst[kind], b.max_rel_error);
      if (f.verbose) {
        std::cout << i << "\t" << b.name << "\tchecked " << b.checked << "\tskipped " << b.skipped << "\tmax_rel "
                  << b.max_rel_error << "\n";
      }
    }
    if (f.verbose || !r.passed) std::cout << i << "\t" << (r.passed ? "pass" : "FAIL") << "\t" << r.max_rel_error << "\t" << r.spec_json << "\n";
  }
  for (const auto& [kind, err] : worst) std::cout << kind << "\tmax_rel_error\t" << err << "\n";
  std::cout << (failed == 0 ? "gradcheck passed" : "gradcheck FAILED") << " (" << f.configs - failed << "/" << f.configs << ")\n";
  return failed == 0 ? 0 : kExitError;
}

// ---------------------------------------------------------------- serve-env

struct ServeFlags {
  std::string host = "127.0.0.1";
  int port = 8765;
  int max_turns = 80;
  int upsample = kernel::kDefaultUpsample;
  bool strict = false;
  int max_buttons = 2;
  double idle_timeout = 300.0;
  std::optional<std::uint64_t> seed;
  std::string out, levels_dir;
};

int run_serve(const ServeFlags& f) {
  const auto& levels = level_set(f.levels_dir);
  const std::uint64_t seed = f.seed ? *f.seed : env_seed(0);
  serve::ServeOptions o;
  o.host = f.host;
  o.port = f.port;
  o.levels = &levels;
  o.max_turns = f.max_turns;
  o.upsample = f.upsample;
  o.validation.strict = f.strict;
  o.validation.max_buttons = f.max_buttons;
  o.idle_timeout_seconds = f.idle_timeout;
  o.seed_root = seed;
  o.run_id = telemetry::make_run_id(seed);
  const fs::path out = resolve_out(f.out, o.run_id, fs::path("runs") / o.run_id);
  train::RunConfig rc;
  rc.rollout.max_turns = f.max_turns;
  rc.rollout.seed = seed;
  telemetry::write_manifest(out / "manifest.json", manifest_for("serve-env", o.run_id, train::dump_run_config(rc), levels, seed));
  o.log_path = out / "trajectories.ndjson";
  serve::EnvServer server(o);
  const int port = server.start();
  std::cout << "listening on " << f.host << ":" << port << "\nlog " << o.log_path->string() << "\n" << std::flush;
  server.wait();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tile-platformer RL toolkit"};
  app.require_subcommand(1);
  app.allow_extras(false);

  TrainFlags tf;
  add_train(app, tf);

  EvalFlags ef;
  auto* ev = app.add_subcommand("eval", "mean progress and standard error per level");
  ef.backend.add(ev);
  ev->add_option("--levels", ef.levels, "levels to evaluate");
  ev->add_option("--episodes", ef.episodes, "episodes per level")->check(CLI::PositiveNumber);
  ev->add_option("--max-turns", ef.max_turns, "turn limit per episode")->check(CLI::PositiveNumber);
  ev->add_option("--seed", ef.seed, "evaluation seed (env TILERL_SEED)");
  ev->add_option("--out", ef.out, "write manifest and eval.tsv here (env TILERL_OUT_DIR)");
  ev->add_option("--levels-dir", ef.levels_dir, "level directory");

  RolloutFlags rf;
  auto* ro = app.add_subcommand("rollout", "collect one batch and log it");
  rf.backend.add(ro);
  ro->add_option("--levels", rf.levels, "levels drawn uniformly");
  ro->add_option("--trajectories", rf.trajectories, "trajectories in the batch")->check(CLI::PositiveNumber);
  ro->add_option("--max-turns", rf.max_turns, "turn limit per episode")->check(CLI::PositiveNumber);
  ro->add_option("--seed", rf.seed, "rollout seed (env TILERL_SEED)");
  ro->add_option("--death-penalty", rf.death_penalty, "reward subtracted on death");
  ro->add_option("--out", rf.out, "output directory (env TILERL_OUT_DIR)");
  ro->add_option("--levels-dir", rf.levels_dir, "level directory");

  CompareFlags cf;
  auto* ce = app.add_subcommand("compare-estimators", "all advantage estimators on identical trajectories");
  ce->add_option("--log", cf.log, "trajectory log to read; default is a fresh scripted rollout");
  ce->add_option("--critic", cf.critic, "checkpoint with a 'critic' entry");
  ce->add_flag("--zero-critic", cf.zero_critic, "use V = 0 for the critic-based estimators");
  ce->add_option("--estimators", cf.estimators, "comma list; default all eight");
  ce->add_option("--levels", cf.levels, "levels for a fresh rollout");
  ce->add_option("--trajectories", cf.trajectories, "trajectories for a fresh rollout")->check(CLI::PositiveNumber);
  ce->add_option("--max-turns", cf.max_turns, "turn limit for a fresh rollout")->check(CLI::PositiveNumber);
  ce->add_option("--scripted", cf.scripted, "policy for a fresh rollout")->check(CLI::IsMember({"noop", "right", "right_jump"}));
  ce->add_option("--seed", cf.seed, "rollout seed (env TILERL_SEED)");
  ce->add_option("--gamma", cf.gamma, "discount");
  ce->add_option("--lambda", cf.lambda, "GAE lambda");
  ce->add_flag("--bootstrap-truncation", cf.bootstrap, "PPO estimators bootstrap truncated episodes with V(o_T)");
  ce->add_option("--out", cf.out, "report directory (env TILERL_OUT_DIR)");
  ce->add_option("--levels-dir", cf.levels_dir, "level directory");

  ReplayFlags pf;
  auto* rp = app.add_subcommand("replay", "re-simulate logged trajectories and report mismatches");
  auto* run_opt = rp->add_option("--run", pf.run, "run directory with manifest.json and trajectories.ndjson");
  auto* log_opt = rp->add_option("--log", pf.log, "bare trajectory log (no level-set version check)");
  run_opt->excludes(log_opt);
  rp->add_option("--death-penalty", pf.death_penalty, "death penalty used when recording a bare log");
  rp->add_option("--levels-dir", pf.levels_dir, "level directory");

  GradFlags gf;
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of every layer kind");
  gc->add_option("--configs", gf.configs, "random network configurations")->check(CLI::PositiveNumber);
  gc->add_option("--seed", gf.seed, "seed for configurations and data");
  gc->add_option("--eps", gf.eps, "central-difference step")->check(CLI::PositiveNumber);
  gc->add_option("--tolerance", gf.tolerance, "maximum relative error")->check(CLI::PositiveNumber);
  gc->add_flag("--verbose", gf.verbose, "per-block report");

  ServeFlags sf;
  auto* se = app.add_subcommand("serve-env", "serve kernel sessions over the JSON wire protocol");
  se->add_option("--host", sf.host, "bind address");
  se->add_option("--port", sf.port, "port; 0 picks a free one");
  se->add_option("--max-turns", sf.max_turns, "turn limit per session")->check(CLI::PositiveNumber);
  se->add_option("--upsample", sf.upsample, "frame upsampling factor")->check(CLI::PositiveNumber);
  se->add_flag("--strict", sf.strict, "invalid answers end the session instead of falling back to noop");
  se->add_option("--max-buttons", sf.max_buttons, "buttons allowed per answer")->check(CLI::PositiveNumber);
  se->add_option("--idle-timeout", sf.idle_timeout, "seconds before an idle session is closed")->check(CLI::PositiveNumber);
  se->add_option("--seed", sf.seed, "seed root for session seeds (env TILERL_SEED)");
  se->add_option("--out", sf.out, "directory for manifest and trajectory log (env TILERL_OUT_DIR)");
  se->add_option("--levels-dir", sf.levels_dir, "level directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (app.got_subcommand("train")) return run_train(tf);
    if (app.got_subcommand("eval")) return run_eval(ef);
    if (app.got_subcommand("rollout")) return run_rollout(rf);
    if (app.got_subcommand("compare-estimators")) return run_compare(cf);
    if (app.got_subcommand("replay")) {
      if (pf.run.empty() && pf.log.empty()) throw ValidationError("replay needs --run or --log");
      return run_replay(pf);
    }
    if (app.got_subcommand("gradcheck")) return run_gradcheck(gf);
    if (app.got_subcommand("serve-env")) return run_serve(sf);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
