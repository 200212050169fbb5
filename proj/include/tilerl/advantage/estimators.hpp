#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tilerl::advantage {

enum class EstimatorKind {
  PpoCritic,
  PpoCriticPositive,
  GrpoOutcome,
  GrpoOutcomePositive,
  GrpoProcess,
  GrpoProcessPositive,
  ReinforcePP,
  Gae,
};

std::string_view to_string(EstimatorKind k);
std::optional<EstimatorKind> parse_estimator(std::string_view s);
const std::vector<EstimatorKind>& all_estimators();
[[nodiscard]] bool needs_critic(EstimatorKind k);
[[nodiscard]] bool is_positive_filtered(EstimatorKind k);

// Guard below which a standard deviation counts as zero.
inline constexpr double kSigmaEpsilon = 1e-8;

struct RewardSequence {
  std::vector<double> rewards;
  bool terminated = false;
  bool truncated = false;
};

struct BatchItem {
  std::string level_id;
  RewardSequence seq;
  std::vector<double> values;  // V(o_t) per turn; empty when no critic ran
  double bootstrap = 0.0;      // V(o_T) for truncated episodes; zero means no bootstrap
};

using TrajectoryBatch = std::vector<BatchItem>;

struct AdvantageVector {
  std::vector<double> values;
  EstimatorKind estimator = EstimatorKind::PpoCritic;
  double normalization_sigma = 0.0;
};

struct AdvantageResult {
  std::vector<AdvantageVector> per_trajectory;
  bool degenerate = false;  // all zeros; the trainer should skip the update
  std::string reason;
};

struct EstimatorOptions {
  double gamma = 0.95;
  double lambda = 0.95;
  bool mean_center_ppo = false;  // off: divide by sigma only
  double ppo_lambda = 1.0;       // < 1 swaps R_t - V_t for GAE(lambda) residuals
};

// R_t = r_t + gamma * R_{t+1}, no bootstrap. gamma in [0, 1].
std::vector<double> return_to_go(const RewardSequence& seq, double gamma);

// Critic-baselined advantage, R_t - V(o_t), divided by the batch sigma. A
// truncated item's bootstrap is discounted into R_t.
AdvantageResult ppo_advantage(const TrajectoryBatch& batch, double gamma, bool positive_filter, bool mean_center = false,
                              double lambda = 1.0);
AdvantageResult grpo_outcome(const TrajectoryBatch& batch, bool positive_filter);
AdvantageResult grpo_process(const TrajectoryBatch& batch, bool positive_filter);
AdvantageResult reinforce_pp(const TrajectoryBatch& batch, double gamma);

// values holds T entries plus the bootstrap slot (zero when terminated).
std::vector<double> gae(const RewardSequence& seq, const std::vector<double>& values, double gamma, double lambda);
AdvantageResult gae_batch(const TrajectoryBatch& batch, double gamma, double lambda);

AdvantageResult compute_advantages(EstimatorKind kind, const TrajectoryBatch& batch, const EstimatorOptions& options);

// min(ratio * A, clip(ratio, 1 - eps_low, 1 + eps_high) * A)
double clipped_surrogate(double ratio, double advantage, double eps_low, double eps_high);

// Population mean and standard deviation.
struct Moments {
  double mean = 0.0;
  double sigma = 0.0;
};
Moments moments(const std::vector<double>& xs);

}  // namespace tilerl::advantage
