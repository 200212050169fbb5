#include "tilerl/train/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "tilerl/error.hpp"

namespace tilerl::train {

namespace {

struct Field {
  std::string path;
  std::string help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
T parse_number(const std::string& path, const std::string& text) {
  T v{};
  const char* b = text.data();
  const char* e = text.data() + text.size();
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e) throw ValidationError(path + ": cannot parse '" + text + "'");
  return v;
}

bool parse_bool(const std::string& path, const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw ValidationError(path + ": expected true/false, got '" + text + "'");
}

std::vector<int> parse_int_list(const std::string& path, const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(parse_number<int>(path, item));
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

std::string join(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

#define NUM_FIELD(path, member, type, help)                                                          \
  Field {                                                                                            \
    path, help, [](RunConfig& c, const std::string& v) { c.member = parse_number<type>(path, v); },  \
        [](const RunConfig& c) { return fmt(static_cast<double>(c.member)); }                        \
  }
#define INT_FIELD(path, member, type, help)                                                          \
  Field {                                                                                            \
    path, help, [](RunConfig& c, const std::string& v) { c.member = parse_number<type>(path, v); },  \
        [](const RunConfig& c) { return std::to_string(c.member); }                                  \
  }
#define BOOL_FIELD(path, member, help)                                                              \
  Field {                                                                                           \
    path, help, [](RunConfig& c, const std::string& v) { c.member = parse_bool(path, v); },         \
        [](const RunConfig& c) { return std::string(c.member ? "true" : "false"); }                 \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      {"run.output_dir", "directory receiving manifest, metrics, logs and checkpoints",
       [](RunConfig& c, const std::string& v) { c.output_dir = v; }, [](const RunConfig& c) { return c.output_dir; }},
      {"run.run_id", "run identifier; derived from the seed and time when empty",
       [](RunConfig& c, const std::string& v) { c.run_id = v; }, [](const RunConfig& c) { return c.run_id; }},
      {"rollout.levels", "comma list or range of level ids, e.g. 1-1,1-2 or 1-1:1-3",
       [](RunConfig& c, const std::string& v) { c.rollout.levels = kernel::parse_level_list(v, kernel::LevelSet::builtin()); },
       [](const RunConfig& c) {
         std::string s;
         for (std::size_t i = 0; i < c.rollout.levels.size(); ++i) s += (i ? "," : "") + kernel::to_string(c.rollout.levels[i]);
         return s;
       }},
      INT_FIELD("rollout.trajectories_per_batch", rollout.trajectories_per_batch, int, "trajectories per batch (M)"),
      INT_FIELD("rollout.max_turns", rollout.max_turns, int, "turn limit per episode"),
      INT_FIELD("rollout.min_samples_per_batch", rollout.min_samples_per_batch, int,
                "collect groups of M until the batch holds this many turns; 0 = exactly M"),
      NUM_FIELD("rollout.temperature", rollout.temperature, double, "sampling temperature"),
      NUM_FIELD("rollout.top_p", rollout.top_p, double, "nucleus mass for sampling"),
      INT_FIELD("rollout.seed", rollout.seed, std::uint64_t, "root seed for level draws, episode seeds and sampling"),
      {"rollout.action_space", "original | engineered | protocol",
       [](RunConfig& c, const std::string& v) {
         auto a = kernel::parse_action_space(v);
         if (!a) throw ValidationError("rollout.action_space: unknown action space '" + v + "'");
         c.rollout.action_space = *a;
       },
       [](const RunConfig& c) { return std::string(kernel::to_string(c.rollout.action_space)); }},
      NUM_FIELD("rollout.death_penalty", rollout.death_penalty, double, "reward subtracted on death (default 0)"),
      {"rollout.selection", "sample | greedy action selection",
       [](RunConfig& c, const std::string& v) {
         if (v == "sample") c.rollout.selection = ActionSelection::Sample;
         else if (v == "greedy") c.rollout.selection = ActionSelection::Greedy;
         else throw ValidationError("rollout.selection: expected sample or greedy, got '" + v + "'");
       },
       [](const RunConfig& c) { return std::string(c.rollout.selection == ActionSelection::Sample ? "sample" : "greedy"); }},
      {"train.estimator", "advantage estimator",
       [](RunConfig& c, const std::string& v) {
         auto k = advantage::parse_estimator(v);
         if (!k) throw ValidationError("train.estimator: unknown estimator '" + v + "'");
         c.train.estimator = *k;
       },
       [](const RunConfig& c) { return std::string(advantage::to_string(c.train.estimator)); }},
      NUM_FIELD("train.gamma", train.gamma, double, "discount factor"),
      NUM_FIELD("train.lambda", train.lambda, double, "GAE lambda"),
      NUM_FIELD("train.ppo_lambda", train.ppo_lambda, double, "lambda for the critic-baselined PPO advantage; 1 = plain return-to-go"),
      NUM_FIELD("train.eps_low", train.eps_low, double, "lower policy clip range"),
      NUM_FIELD("train.eps_high", train.eps_high, double, "upper policy clip range"),
      INT_FIELD("train.epochs_per_step", train.epochs_per_step, int, "policy epochs per training step"),
      INT_FIELD("train.minibatch_size", train.minibatch_size, int, "turns per minibatch"),
      NUM_FIELD("train.policy_lr", train.policy_lr, double, "policy learning rate"),
      NUM_FIELD("train.critic_lr", train.critic_lr, double, "critic learning rate"),
      NUM_FIELD("train.critic_clip_norm", train.critic_clip_norm, double, "critic global gradient-norm clip"),
      NUM_FIELD("train.policy_clip_norm", train.policy_clip_norm, double, "policy global gradient-norm clip; 0 disables"),
      INT_FIELD("train.critic_epochs", train.critic_epochs, int, "critic epochs per training step"),
      {"train.critic_loss", "smooth_l1 | mse",
       [](RunConfig& c, const std::string& v) {
         if (v == "smooth_l1") c.train.critic_loss = CriticLoss::SmoothL1;
         else if (v == "mse") c.train.critic_loss = CriticLoss::Mse;
         else throw ValidationError("train.critic_loss: expected smooth_l1 or mse, got '" + v + "'");
       },
       [](const RunConfig& c) { return std::string(c.train.critic_loss == CriticLoss::SmoothL1 ? "smooth_l1" : "mse"); }},
      INT_FIELD("train.total_steps", train.total_steps, std::int64_t, "training steps (batches)"),
      INT_FIELD("train.max_samples", train.max_samples, std::int64_t, "stop once this many turns were collected; 0 = no limit"),
      {"train.curriculum", "uniform | inverse_length",
       [](RunConfig& c, const std::string& v) {
         if (v == "uniform") c.train.curriculum = CurriculumMode::Uniform;
         else if (v == "inverse_length") c.train.curriculum = CurriculumMode::InverseLength;
         else throw ValidationError("train.curriculum: expected uniform or inverse_length, got '" + v + "'");
       },
       [](const RunConfig& c) { return std::string(to_string(c.train.curriculum)); }},
      BOOL_FIELD("train.mean_center_ppo", train.mean_center_ppo, "subtract the batch mean before PPO normalisation"),
      BOOL_FIELD("train.bootstrap_truncation", train.bootstrap_truncation, "bootstrap return-to-go at truncation with the critic"),
      BOOL_FIELD("train.normalize_minibatch_advantages", train.normalize_minibatch_advantages,
                 "standardise advantages per minibatch (classical baseline)"),
      NUM_FIELD("train.value_clip", train.value_clip, double, "value prediction clip around the collection-time value; 0 disables"),
      NUM_FIELD("train.target_kl", train.target_kl, double, "stop policy epochs once approximate KL exceeds 1.5x this; 0 disables"),
      NUM_FIELD("train.entropy_coef", train.entropy_coef, double, "entropy bonus weight"),
      {"train.actor_hidden", "comma list of actor hidden widths",
       [](RunConfig& c, const std::string& v) { c.train.actor_hidden = parse_int_list("train.actor_hidden", v); },
       [](const RunConfig& c) { return join(c.train.actor_hidden); }},
      {"train.critic_hidden", "comma list of critic hidden widths",
       [](RunConfig& c, const std::string& v) { c.train.critic_hidden = parse_int_list("train.critic_hidden", v); },
       [](const RunConfig& c) { return join(c.train.critic_hidden); }},
      INT_FIELD("train.init_seed", train.init_seed, std::uint64_t, "parameter initialisation seed"),
      INT_FIELD("train.eval_interval_samples", train.eval_interval_samples, std::int64_t,
                "evaluate every this many collected turns; 0 = start and end only"),
      INT_FIELD("train.eval_episodes", train.eval_episodes, int, "episodes per level per evaluation"),
      INT_FIELD("train.checkpoint_interval_steps", train.checkpoint_interval_steps, std::int64_t,
                "write a checkpoint every this many steps; 0 = end only"),
  };
  return table;
}

#undef NUM_FIELD
#undef INT_FIELD
#undef BOOL_FIELD

const Field& find_field(const std::string& path) {
  for (const auto& f : fields()) {
    if (f.path == path) return f;
  }
  throw ValidationError("unknown config field '" + path + "'");
}

}  // namespace

std::string_view to_string(CurriculumMode m) { return m == CurriculumMode::Uniform ? "uniform" : "inverse_length"; }

TrainConfig comparison_defaults() { return TrainConfig{}; }

TrainConfig classical_defaults() {
  TrainConfig t;
  t.estimator = advantage::EstimatorKind::Gae;
  t.epochs_per_step = 4;
  t.minibatch_size = 1024;
  t.policy_lr = 5e-5;
  t.critic_lr = 5e-5;
  t.gamma = 0.95;
  t.lambda = 0.95;
  t.eps_low = 0.1;
  t.eps_high = 0.1;
  t.value_clip = 0.1;
  t.policy_clip_norm = 0.5;
  t.critic_clip_norm = 0.5;
  t.target_kl = 0.03;
  t.normalize_minibatch_advantages = true;
  t.critic_epochs = 4;
  t.critic_loss = CriticLoss::Mse;
  t.bootstrap_truncation = true;
  return t;
}

RolloutConfig comparison_rollout_defaults() { return RolloutConfig{}; }

RolloutConfig classical_rollout_defaults() {
  RolloutConfig r;
  r.min_samples_per_batch = 8192;
  return r;
}

void apply_override(RunConfig& config, const std::string& path, const std::string& value) {
  find_field(path).set(config, value);
}

RunConfig parse_run_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream is(text);
  try {
    pt::read_ini(is, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  RunConfig config;
  // run.preset picks the default table; explicit keys then refine it.
  if (auto preset = tree.get_optional<std::string>("run.preset")) {
    if (*preset == "classical") {
      config.train = classical_defaults();
      config.rollout = classical_rollout_defaults();
    } else if (*preset != "comparison") {
      throw ValidationError("run.preset: expected comparison or classical, got '" + *preset + "'");
    }
  }
  for (const auto& [section, body] : tree) {
    if (section != "run" && section != "rollout" && section != "train") {
      throw ValidationError("unknown config section '" + section + "'");
    }
    for (const auto& [key, node] : body) {
      const std::string path = section + "." + key;
      if (path == "run.preset") continue;
      apply_override(config, path, node.get_value<std::string>());
    }
  }
  validate(config);
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw NotFoundError("cannot read config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_run_config(ss.str());
}

std::string dump_run_config(const RunConfig& config) {
  std::string out;
  std::string section;
  for (const auto& f : fields()) {
    const std::string s = f.path.substr(0, f.path.find('.'));
    if (s != section) {
      out += (section.empty() ? "" : "\n") + std::string("[") + s + "]\n";
      section = s;
    }
    out += f.path.substr(f.path.find('.') + 1) + " = " + f.get(config) + "\n";
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> config_fields() {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : fields()) out.emplace_back(f.path, f.help);
  return out;
}

void validate(const RunConfig& c) {
  const auto& r = c.rollout;
  const auto& t = c.train;
  if (r.levels.empty()) throw ValidationError("rollout.levels: at least one level required");
  if (r.trajectories_per_batch < 1) throw ValidationError("rollout.trajectories_per_batch: must be >= 1");
  if (r.max_turns < 1) throw ValidationError("rollout.max_turns: must be >= 1");
  if (r.min_samples_per_batch < 0) throw ValidationError("rollout.min_samples_per_batch: must be >= 0");
  if (!(r.temperature > 0.0)) throw ValidationError("rollout.temperature: must be positive");
  if (!(r.top_p > 0.0 && r.top_p <= 1.0)) throw ValidationError("rollout.top_p: must lie in (0, 1]");
  if (!(t.gamma >= 0.0 && t.gamma < 1.0)) throw ValidationError("train.gamma: must lie in [0, 1)");
  if (!(t.lambda >= 0.0 && t.lambda <= 1.0)) throw ValidationError("train.lambda: must lie in [0, 1]");
  if (!(t.ppo_lambda >= 0.0 && t.ppo_lambda <= 1.0)) throw ValidationError("train.ppo_lambda: must lie in [0, 1]");
  if (t.value_clip < 0.0) throw ValidationError("train.value_clip: must be >= 0");
  if (t.target_kl < 0.0) throw ValidationError("train.target_kl: must be >= 0");
  if (t.entropy_coef < 0.0) throw ValidationError("train.entropy_coef: must be >= 0");
  if (t.normalize_minibatch_advantages && advantage::is_positive_filtered(t.estimator)) {
    throw ValidationError("train.normalize_minibatch_advantages: would reintroduce negative advantages under " +
                          std::string(advantage::to_string(t.estimator)));
  }
  if (!(t.eps_low > 0.0 && t.eps_low < 1.0)) throw ValidationError("train.eps_low: must lie in (0, 1)");
  if (!(t.eps_high > 0.0 && t.eps_high < 1.0)) throw ValidationError("train.eps_high: must lie in (0, 1)");
  if (t.epochs_per_step < 1) throw ValidationError("train.epochs_per_step: must be >= 1");
  if (t.critic_epochs < 1) throw ValidationError("train.critic_epochs: must be >= 1");
  if (t.minibatch_size < 1) throw ValidationError("train.minibatch_size: must be >= 1");
  if (!(t.policy_lr > 0.0)) throw ValidationError("train.policy_lr: must be positive");
  if (!(t.critic_lr > 0.0)) throw ValidationError("train.critic_lr: must be positive");
  if (t.total_steps < 0) throw ValidationError("train.total_steps: must be >= 0");
  if (t.max_samples < 0) throw ValidationError("train.max_samples: must be >= 0");
  if (t.eval_episodes < 1) throw ValidationError("train.eval_episodes: must be >= 1");
  for (int w : t.actor_hidden)
    if (w < 1) throw ValidationError("train.actor_hidden: widths must be positive");
  for (int w : t.critic_hidden)
    if (w < 1) throw ValidationError("train.critic_hidden: widths must be positive");
}

}  // namespace tilerl::train
