#include "tilerl/nn/categorical.hpp"

#include <algorithm>
#include <cmath>

#include "tilerl/error.hpp"

namespace tilerl::nn {

Categorical::Categorical(std::span<const float> logits) {
  std::vector<double> d(logits.begin(), logits.end());
  build(d);
}

Categorical::Categorical(std::span<const double> logits) { build(logits); }

void Categorical::build(std::span<const double> logits) {
  if (logits.empty()) throw ValidationError("categorical over zero actions");
  for (double v : logits) {
    if (!std::isfinite(v)) throw ValidationError("categorical logits must be finite");
  }
  const double mx = *std::max_element(logits.begin(), logits.end());
  double z = 0.0;
  for (double v : logits) z += std::exp(v - mx);
  const double log_z = std::log(z) + mx;
  logp_.resize(logits.size());
  probs_.resize(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    logp_[i] = logits[i] - log_z;
    probs_[i] = std::exp(logp_[i]);
  }
}

double Categorical::logprob(int action) const {
  if (action < 0 || action >= size()) throw ValidationError("action index out of range");
  return logp_[static_cast<std::size_t>(action)];
}

double Categorical::entropy() const {
  double h = 0.0;
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    if (probs_[i] > 0.0) h -= probs_[i] * logp_[i];
  }
  return h;
}

int Categorical::sample(std::mt19937_64& rng) const {
  const double u = unit_uniform(rng);
  double c = 0.0;
  for (std::size_t i = 0; i < probs_.size(); ++i) {
    c += probs_[i];
    if (u < c) return static_cast<int>(i);
  }
  // Rounding left u above the final cumulative sum.
  for (std::size_t i = probs_.size(); i-- > 0;) {
    if (probs_[i] > 0.0) return static_cast<int>(i);
  }
  return 0;
}

int Categorical::argmax() const {
  return static_cast<int>(std::max_element(probs_.begin(), probs_.end()) - probs_.begin());
}

std::vector<double> Categorical::logprob_grad(int action) const {
  std::vector<double> g(probs_.size());
  for (std::size_t i = 0; i < g.size(); ++i) g[i] = -probs_[i];
  g[static_cast<std::size_t>(action)] += 1.0;
  return g;
}

}  // namespace tilerl::nn
