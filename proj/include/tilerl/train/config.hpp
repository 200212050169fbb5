#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tilerl/advantage/estimators.hpp"
#include "tilerl/kernel/actions.hpp"
#include "tilerl/kernel/level.hpp"

namespace tilerl::train {

enum class CurriculumMode { Uniform, InverseLength };
std::string_view to_string(CurriculumMode m);

enum class ActionSelection { Sample, Greedy };

// SmoothL1 (beta 1) follows the turn-level critic recipe; Mse is the
// classical baseline's squared error.
enum class CriticLoss { SmoothL1, Mse };

struct RolloutConfig {
  std::vector<kernel::LevelId> levels{{1, 1}};
  int trajectories_per_batch = 128;  // M
  int max_turns = 80;
  // Keep collecting groups of M trajectories until the batch holds at least
  // this many turns. 0 collects exactly M.
  int min_samples_per_batch = 0;
  double temperature = 1.0;
  double top_p = 1.0;
  std::uint64_t seed = 0;
  kernel::ActionSpace action_space = kernel::ActionSpace::Original;
  double death_penalty = 0.0;
  ActionSelection selection = ActionSelection::Sample;
};

struct TrainConfig {
  advantage::EstimatorKind estimator = advantage::EstimatorKind::PpoCriticPositive;
  double gamma = 0.95;
  double lambda = 0.95;
  double eps_low = 0.2;
  double eps_high = 0.28;
  int epochs_per_step = 1;
  int minibatch_size = 1024;
  double policy_lr = 5e-5;
  double critic_lr = 3e-4;
  double critic_clip_norm = 1.0;
  double policy_clip_norm = 0.0;  // <= 0 disables
  int critic_epochs = 1;
  CriticLoss critic_loss = CriticLoss::SmoothL1;
  std::int64_t total_steps = 100;
  std::int64_t max_samples = 0;  // 0 = no sample budget
  CurriculumMode curriculum = CurriculumMode::Uniform;
  bool mean_center_ppo = false;
  bool bootstrap_truncation = false;  // return-to-go bootstrap with V(o_T) at truncation, off by default
  double ppo_lambda = 1.0;            // 1 keeps R_t - V_t; below 1 uses GAE(lambda) residuals

  // Classical baseline extras.
  bool normalize_minibatch_advantages = false;
  double value_clip = 0.0;  // <= 0 disables
  double target_kl = 0.0;   // <= 0 disables
  double entropy_coef = 0.0;

  std::vector<int> actor_hidden{64, 64};
  std::vector<int> critic_hidden{64, 64};
  std::uint64_t init_seed = 1;

  std::int64_t eval_interval_samples = 0;  // 0 = only at the end
  int eval_episodes = 256;
  std::int64_t checkpoint_interval_steps = 0;
};

// VLM-path comparison defaults (turn-level critic, asymmetric clip).
TrainConfig comparison_defaults();
// Classical PPO baseline defaults (GAE, symmetric clip, target KL).
TrainConfig classical_defaults();
RolloutConfig comparison_rollout_defaults();
RolloutConfig classical_rollout_defaults();

// Learning rates searched for the classical baseline.
inline const std::vector<double> kClassicalLrGrid{5e-5, 1e-4, 1.5e-4, 2.5e-4};

struct RunConfig {
  RolloutConfig rollout;
  TrainConfig train;
  std::string output_dir = "runs/default";
  std::string run_id;
};

// INI-style file with [rollout] and [train] sections and an optional [run]
// section. Unknown sections or keys are rejected with their path.
RunConfig load_run_config(const std::filesystem::path& path);
RunConfig parse_run_config(const std::string& text);
// "section.key" = value, same vocabulary as the file.
void apply_override(RunConfig& config, const std::string& path, const std::string& value);
std::string dump_run_config(const RunConfig& config);
// Every documented "section.key" with a one-line description.
std::vector<std::pair<std::string, std::string>> config_fields();

void validate(const RunConfig& config);

}  // namespace tilerl::train
