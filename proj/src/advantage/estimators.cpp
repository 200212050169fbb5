#include "tilerl/advantage/estimators.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "tilerl/error.hpp"

namespace tilerl::advantage {

namespace {

constexpr std::array<std::pair<EstimatorKind, std::string_view>, 8> kNames{{
    {EstimatorKind::PpoCritic, "ppo_critic"},
    {EstimatorKind::PpoCriticPositive, "ppo_critic_positive"},
    {EstimatorKind::GrpoOutcome, "grpo_outcome"},
    {EstimatorKind::GrpoOutcomePositive, "grpo_outcome_positive"},
    {EstimatorKind::GrpoProcess, "grpo_process"},
    {EstimatorKind::GrpoProcessPositive, "grpo_process_positive"},
    {EstimatorKind::ReinforcePP, "reinforce_pp"},
    {EstimatorKind::Gae, "gae"},
}};

void check_sequence(const RewardSequence& seq, std::size_t index) {
  if (seq.rewards.empty()) throw ValidationError("trajectory " + std::to_string(index) + " has no turns");
  if (seq.terminated == seq.truncated) {
    throw ValidationError("trajectory " + std::to_string(index) + " must be exactly one of terminated/truncated");
  }
  for (double r : seq.rewards) {
    if (!std::isfinite(r)) throw ValidationError("trajectory " + std::to_string(index) + " has a non-finite reward");
  }
}

void check_batch(const TrajectoryBatch& batch) {
  if (batch.empty()) throw ValidationError("empty trajectory batch");
  for (std::size_t i = 0; i < batch.size(); ++i) check_sequence(batch[i].seq, i);
}

void check_values(const TrajectoryBatch& batch) {
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (batch[i].values.size() != batch[i].seq.rewards.size()) {
      throw ValidationError("trajectory " + std::to_string(i) + " lacks per-turn critic values");
    }
  }
}

AdvantageResult zeros(const TrajectoryBatch& batch, EstimatorKind kind, std::string reason) {
  AdvantageResult r;
  r.degenerate = true;
  r.reason = std::move(reason);
  for (const auto& item : batch) r.per_trajectory.push_back({std::vector<double>(item.seq.rewards.size(), 0.0), kind, 0.0});
  return r;
}

}  // namespace

std::string_view to_string(EstimatorKind k) {
  for (const auto& [kind, name] : kNames) {
    if (kind == k) return name;
  }
  return "?";
}

std::optional<EstimatorKind> parse_estimator(std::string_view s) {
  for (const auto& [kind, name] : kNames) {
    if (name == s) return kind;
  }
  return std::nullopt;
}

const std::vector<EstimatorKind>& all_estimators() {
  static const std::vector<EstimatorKind> all = [] {
    std::vector<EstimatorKind> v;
    for (const auto& [kind, name] : kNames) v.push_back(kind);
    return v;
  }();
  return all;
}

bool needs_critic(EstimatorKind k) {
  return k == EstimatorKind::PpoCritic || k == EstimatorKind::PpoCriticPositive || k == EstimatorKind::Gae;
}

bool is_positive_filtered(EstimatorKind k) {
  return k == EstimatorKind::PpoCriticPositive || k == EstimatorKind::GrpoOutcomePositive ||
         k == EstimatorKind::GrpoProcessPositive;
}

Moments moments(const std::vector<double>& xs) {
  Moments m;
  if (xs.empty()) return m;
  double sum = 0.0;
  for (double x : xs) sum += x;
  m.mean = sum / static_cast<double>(xs.size());
  double sq = 0.0;
  for (double x : xs) sq += (x - m.mean) * (x - m.mean);
  m.sigma = std::sqrt(sq / static_cast<double>(xs.size()));
  return m;
}

std::vector<double> return_to_go(const RewardSequence& seq, double gamma) {
  if (seq.rewards.empty()) throw ValidationError("return_to_go of an empty sequence");
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ValidationError("gamma must lie in [0, 1]");
  std::vector<double> out(seq.rewards.size());
  double next = 0.0;
  for (std::size_t t = seq.rewards.size(); t-- > 0;) {
    next = seq.rewards[t] + gamma * next;
    out[t] = next;
  }
  return out;
}

AdvantageResult ppo_advantage(const TrajectoryBatch& batch, double gamma, bool positive_filter, bool mean_center,
                              double lambda) {
  check_batch(batch);
  check_values(batch);
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("lambda must lie in [0, 1]");
  const EstimatorKind kind = positive_filter ? EstimatorKind::PpoCriticPositive : EstimatorKind::PpoCritic;

  std::vector<std::vector<double>> raw;
  std::vector<double> pool;
  for (const auto& item : batch) {
    const double boot = item.seq.truncated ? item.bootstrap : 0.0;
    std::vector<double> ret;
    if (lambda < 1.0) {
      std::vector<double> v = item.values;
      v.push_back(boot);
      ret = gae(item.seq, v, gamma, lambda);
    } else {
      ret = return_to_go(item.seq, gamma);
      double carry = boot;
      for (std::size_t t = ret.size(); t-- > 0;) {
        carry *= gamma;
        ret[t] += carry - item.values[t];
      }
    }
    for (double a : ret) {
      if (!positive_filter || a > 0.0) pool.push_back(a);
    }
    raw.push_back(std::move(ret));
  }
  if (pool.empty()) return zeros(batch, kind, "no positive advantages");
  const Moments m = moments(pool);
  if (m.sigma <= kSigmaEpsilon) return zeros(batch, kind, "zero advantage variance");
  const double shift = (mean_center && !positive_filter) ? m.mean : 0.0;

  AdvantageResult r;
  for (auto& a : raw) {
    for (double& v : a) v = positive_filter ? std::max(v, 0.0) / m.sigma : (v - shift) / m.sigma;
    r.per_trajectory.push_back({std::move(a), kind, m.sigma});
  }
  return r;
}

AdvantageResult grpo_outcome(const TrajectoryBatch& batch, bool positive_filter) {
  check_batch(batch);
  const EstimatorKind kind = positive_filter ? EstimatorKind::GrpoOutcomePositive : EstimatorKind::GrpoOutcome;
  if (batch.size() < 2) return zeros(batch, kind, "single trajectory");
  std::vector<double> sums;
  for (const auto& item : batch) {
    double s = 0.0;
    for (double x : item.seq.rewards) s += x;
    sums.push_back(s);
  }
  const Moments m = moments(sums);
  if (m.sigma <= kSigmaEpsilon) return zeros(batch, kind, "zero outcome variance");
  AdvantageResult r;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    double level = (sums[i] - m.mean) / m.sigma;
    if (positive_filter) level = std::max(level, 0.0);
    r.per_trajectory.push_back({std::vector<double>(batch[i].seq.rewards.size(), level), kind, m.sigma});
  }
  return r;
}

AdvantageResult grpo_process(const TrajectoryBatch& batch, bool positive_filter) {
  check_batch(batch);
  const EstimatorKind kind = positive_filter ? EstimatorKind::GrpoProcessPositive : EstimatorKind::GrpoProcess;
  std::vector<double> all;
  for (const auto& item : batch) all.insert(all.end(), item.seq.rewards.begin(), item.seq.rewards.end());
  if (all.size() < 2) return zeros(batch, kind, "fewer than two turns");
  const Moments m = moments(all);
  if (m.sigma <= kSigmaEpsilon) return zeros(batch, kind, "zero reward variance");
  AdvantageResult r;
  for (const auto& item : batch) {
    std::vector<double> a(item.seq.rewards.size());
    double suffix = 0.0;
    for (std::size_t t = a.size(); t-- > 0;) {
      suffix += (item.seq.rewards[t] - m.mean) / m.sigma;
      a[t] = suffix;
    }
    if (positive_filter) {
      for (double& v : a) v = std::max(v, 0.0);
    }
    r.per_trajectory.push_back({std::move(a), kind, m.sigma});
  }
  return r;
}

AdvantageResult reinforce_pp(const TrajectoryBatch& batch, double gamma) {
  check_batch(batch);
  std::vector<std::vector<double>> rets;
  std::vector<double> all;
  for (const auto& item : batch) {
    rets.push_back(return_to_go(item.seq, gamma));
    all.insert(all.end(), rets.back().begin(), rets.back().end());
  }
  if (all.size() < 2) return zeros(batch, EstimatorKind::ReinforcePP, "fewer than two turns");
  const Moments m = moments(all);
  if (m.sigma <= kSigmaEpsilon) return zeros(batch, EstimatorKind::ReinforcePP, "zero return variance");
  AdvantageResult r;
  for (auto& ret : rets) {
    for (double& v : ret) v = (v - m.mean) / m.sigma;
    r.per_trajectory.push_back({std::move(ret), EstimatorKind::ReinforcePP, m.sigma});
  }
  return r;
}

std::vector<double> gae(const RewardSequence& seq, const std::vector<double>& values, double gamma, double lambda) {
  if (seq.rewards.empty()) throw ValidationError("gae of an empty sequence");
  if (values.size() != seq.rewards.size() + 1) {
    throw ValidationError("gae needs " + std::to_string(seq.rewards.size() + 1) + " values (including bootstrap), got " +
                          std::to_string(values.size()));
  }
  if (!(gamma >= 0.0 && gamma <= 1.0) || !(lambda >= 0.0 && lambda <= 1.0)) {
    throw ValidationError("gamma and lambda must lie in [0, 1]");
  }
  const std::size_t T = seq.rewards.size();
  std::vector<double> adv(T);
  double next = 0.0;
  for (std::size_t t = T; t-- > 0;) {
    const double delta = seq.rewards[t] + gamma * values[t + 1] - values[t];
    next = delta + gamma * lambda * next;
    adv[t] = next;
  }
  return adv;
}

AdvantageResult gae_batch(const TrajectoryBatch& batch, double gamma, double lambda) {
  check_batch(batch);
  check_values(batch);
  AdvantageResult r;
  for (const auto& item : batch) {
    std::vector<double> v = item.values;
    v.push_back(item.seq.terminated ? 0.0 : item.bootstrap);
    r.per_trajectory.push_back({gae(item.seq, v, gamma, lambda), EstimatorKind::Gae, 1.0});
  }
  return r;
}

AdvantageResult compute_advantages(EstimatorKind kind, const TrajectoryBatch& batch, const EstimatorOptions& options) {
  switch (kind) {
    case EstimatorKind::PpoCritic:
      return ppo_advantage(batch, options.gamma, false, options.mean_center_ppo, options.ppo_lambda);
    case EstimatorKind::PpoCriticPositive: return ppo_advantage(batch, options.gamma, true, false, options.ppo_lambda);
    case EstimatorKind::GrpoOutcome: return grpo_outcome(batch, false);
    case EstimatorKind::GrpoOutcomePositive: return grpo_outcome(batch, true);
    case EstimatorKind::GrpoProcess: return grpo_process(batch, false);
    case EstimatorKind::GrpoProcessPositive: return grpo_process(batch, true);
    case EstimatorKind::ReinforcePP: return reinforce_pp(batch, options.gamma);
    case EstimatorKind::Gae: return gae_batch(batch, options.gamma, options.lambda);
  }
  throw ValidationError("unknown estimator");
}

double clipped_surrogate(double ratio, double advantage, double eps_low, double eps_high) {
  if (!std::isfinite(ratio) || !std::isfinite(advantage) || !std::isfinite(eps_low) || !std::isfinite(eps_high)) {
    throw ValidationError("clipped_surrogate: non-finite input");
  }
  if (!(ratio > 0.0)) throw ValidationError("clipped_surrogate: ratio must be positive");
  if (!(eps_low > 0.0 && eps_low < 1.0 && eps_high > 0.0 && eps_high < 1.0)) {
    throw ValidationError("clipped_surrogate: clip ranges must lie in (0, 1)");
  }
  const double clipped = std::clamp(ratio, 1.0 - eps_low, 1.0 + eps_high);
  return std::min(ratio * advantage, clipped * advantage);
}

}  // namespace tilerl::advantage
