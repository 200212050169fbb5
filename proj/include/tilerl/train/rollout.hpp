#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tilerl/kernel/level.hpp"
#include "tilerl/kernel/world.hpp"
#include "tilerl/train/backend.hpp"
#include "tilerl/train/config.hpp"
#include "tilerl/train/curriculum.hpp"

namespace tilerl::train {

struct TurnRecord {
  kernel::ActionSet action;
  int action_index = -1;
  double logprob = 0.0;
  double reward = 0.0;
  int frames = 0;
  bool fallback = false;
  bool normalized = false;
  std::string reply_text;
};

struct Trajectory {
  kernel::LevelId level;
  std::uint64_t seed = 0;
  std::vector<TurnRecord> turns;
  // encode_window features, (turns + 1) rows: one per turn plus the final state.
  std::vector<float> features;
  bool terminated = false;
  bool truncated = false;
  bool aborted = false;
  std::string abort_reason;
  kernel::DeathCause death = kernel::DeathCause::None;
  bool finished = false;
  double x_spawn = 0.0;
  double x_final = 0.0;

  [[nodiscard]] int length() const { return static_cast<int>(turns.size()); }
  [[nodiscard]] double progress() const { return x_final - x_spawn; }
  [[nodiscard]] const float* features_at(int t) const;
};

// splitmix64-derived child seed; stable across platforms and thread counts.
std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b = 0);

// Plays one episode. Backend exceptions mark the trajectory aborted.
Trajectory run_episode(const PolicyBackend& backend, const kernel::LevelSet& levels, kernel::LevelId level, std::uint64_t seed,
                       int max_turns, std::mt19937_64& rng, const kernel::KernelOptions& kernel_options = {},
                       bool store_features = true);

struct RolloutBatch {
  std::vector<Trajectory> trajectories;  // aborted ones excluded
  int aborted = 0;
  std::vector<std::string> abort_reasons;
  [[nodiscard]] std::int64_t samples() const;
};

// Draws each trajectory's level from the curriculum weights, then runs the
// episodes in parallel. Results depend only on (config.seed, batch_index),
// never on the worker count.
RolloutBatch collect_rollouts(const PolicyBackend& backend, const kernel::LevelSet& levels, const RolloutConfig& config,
                              const CurriculumState& curriculum, std::int64_t batch_index, bool store_features = true);

std::vector<std::pair<kernel::LevelId, int>> lengths_of(const RolloutBatch& batch);

struct LevelScore {
  kernel::LevelId level;
  int episodes = 0;
  double mean_progress = 0.0;
  double std_error = 0.0;  // sample standard deviation / sqrt(n)
  double finish_rate = 0.0;
};

// Independent episodes per level with seeds derived from `seed`.
std::vector<LevelScore> evaluate(const PolicyBackend& backend, const kernel::LevelSet& levels,
                                 const std::vector<kernel::LevelId>& ids, int episodes, std::uint64_t seed, int max_turns);

}  // namespace tilerl::train
