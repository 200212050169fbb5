#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "tilerl/advantage/estimators.hpp"
#include "tilerl/kernel/level.hpp"
#include "tilerl/nn/checkpoint.hpp"
#include "tilerl/nn/network.hpp"
#include "tilerl/nn/optim.hpp"
#include "tilerl/train/backend.hpp"
#include "tilerl/train/config.hpp"
#include "tilerl/train/curriculum.hpp"
#include "tilerl/train/rollout.hpp"

namespace tilerl::train {

// One flattened turn as consumed by the optimisers.
struct SampleView {
  const float* features = nullptr;
  int action = -1;
  double old_logprob = 0.0;
  double advantage = 0.0;
  double target = 0.0;     // critic regression target
  double old_value = 0.0;  // critic prediction at collection time
};

struct CriticStats {
  double loss = 0.0;  // mean over minibatches of the last epoch
  std::int64_t updates = 0;
};

struct PolicyStats {
  double surrogate = 0.0;  // mean clipped surrogate over processed minibatches
  double mean_ratio = 0.0;
  double clip_fraction = 0.0;
  double approx_kl = 0.0;
  double entropy = 0.0;
  std::int64_t minibatches = 0;
  std::int64_t negative_advantages = 0;  // advantages < 0 handed to the surrogate
  bool early_stopped = false;
};

struct StepStats {
  std::int64_t step = 0;  // 1-based index of the finished step
  std::int64_t batch_samples = 0;
  std::int64_t total_samples = 0;
  int trajectories = 0;
  int aborted = 0;
  double mean_progress = 0.0;  // over the collected batch
  double finish_rate = 0.0;
  double mean_length = 0.0;
  std::vector<double> level_progress;  // per curriculum level, NaN when absent
  std::vector<std::int64_t> level_samples;
  std::vector<double> weights;         // curriculum weights used for this batch
  bool degenerate = false;
  std::string degenerate_reason;
  bool policy_updated = false;
  CriticStats critic;
  PolicyStats policy;
};

struct EvalRow {
  std::int64_t step = 0;
  std::int64_t total_samples = 0;
  std::vector<LevelScore> scores;
  [[nodiscard]] double mean_progress() const;
};

// Clipped-surrogate update over flattened samples. Returns the stats; the
// per-minibatch advantage vectors are checked for negatives and counted.
PolicyStats policy_update(nn::Network<float>& actor, nn::OptimizerState& opt, const std::vector<SampleView>& samples,
                          const TrainConfig& config, std::mt19937_64& rng);

// Minibatched regression of the value head onto SampleView::target.
CriticStats train_critic(nn::Network<float>& critic, nn::OptimizerState& opt, const std::vector<SampleView>& samples,
                         const TrainConfig& config, std::mt19937_64& rng);

// V(o) for `rows` feature rows laid out contiguously.
std::vector<double> critic_values(const nn::Network<float>& critic, const float* rows, std::size_t count);

class Trainer {
 public:
  // Trains an in-process dense actor over encode_window features.
  Trainer(RunConfig config, const kernel::LevelSet& levels);
  // Collects with an external backend. Non-trainable backends get advantages
  // computed and exported but no policy update.
  Trainer(RunConfig config, const kernel::LevelSet& levels, std::shared_ptr<const PolicyBackend> backend);

  // The in-process backend refers to actor_, so the trainer stays put.
  Trainer(const Trainer&) = delete;
  Trainer& operator=(const Trainer&) = delete;

  StepStats step();
  [[nodiscard]] bool done() const;
  [[nodiscard]] EvalRow evaluate() const;

  [[nodiscard]] const RunConfig& config() const { return config_; }
  [[nodiscard]] std::int64_t steps_done() const { return steps_; }
  [[nodiscard]] std::int64_t total_samples() const { return samples_; }
  [[nodiscard]] std::int64_t critic_updates() const { return critic_updates_; }
  [[nodiscard]] std::int64_t policy_minibatches() const { return policy_minibatches_; }
  [[nodiscard]] std::int64_t negative_advantages() const { return negative_advantages_; }
  [[nodiscard]] std::int64_t degenerate_batches() const { return degenerate_batches_; }
  [[nodiscard]] const nn::Network<float>& actor() const { return actor_; }
  [[nodiscard]] const nn::Network<float>& critic() const { return critic_; }
  [[nodiscard]] const CurriculumState& curriculum() const { return curriculum_; }
  [[nodiscard]] const PolicyBackend& backend() const { return *backend_; }
  [[nodiscard]] const RolloutBatch& last_batch() const { return last_batch_; }
  [[nodiscard]] const std::vector<advantage::AdvantageVector>& last_advantages() const { return last_advantages_; }

  // Actor, critic, both optimisers, counters and the curriculum.
  [[nodiscard]] nn::Checkpoint checkpoint() const;
  // Restores state saved by checkpoint(); the configs must describe the same networks.
  void restore(const nn::Checkpoint& ckpt);

 private:
  void init(std::shared_ptr<const PolicyBackend> backend);

  RunConfig config_;
  const kernel::LevelSet& levels_;
  nn::Network<float> actor_;
  nn::Network<float> critic_;
  nn::OptimizerState actor_opt_;
  nn::OptimizerState critic_opt_;
  std::shared_ptr<const PolicyBackend> backend_;
  bool in_process_ = true;
  CurriculumState curriculum_;
  std::int64_t steps_ = 0;
  std::int64_t samples_ = 0;
  std::int64_t critic_updates_ = 0;
  std::int64_t policy_minibatches_ = 0;
  std::int64_t negative_advantages_ = 0;
  std::int64_t degenerate_batches_ = 0;
  RolloutBatch last_batch_;
  std::vector<advantage::AdvantageVector> last_advantages_;
};

nn::NetworkSpec actor_spec(const TrainConfig& train, kernel::ActionSpace space);
nn::NetworkSpec critic_spec(const TrainConfig& train);

struct TrainHooks {
  std::function<void(const Trainer&, const StepStats&)> on_step;
  std::function<void(const Trainer&, const EvalRow&)> on_eval;
  // Return true to stop early (for example once a target is reached).
  std::function<bool(const Trainer&, const EvalRow&)> stop_after_eval;
};

// Initial evaluation, then steps until done(); evaluations every
// eval_interval_samples and once at the end.
void run_training(Trainer& trainer, const TrainHooks& hooks);

}  // namespace tilerl::train
