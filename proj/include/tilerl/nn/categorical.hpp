#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

namespace tilerl::nn {

// Uniform double in [0, 1) from the top 53 bits; identical on every platform,
// unlike std::uniform_real_distribution.
inline double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Row distribution over logits, computed with max subtraction.
class Categorical {
 public:
  // Throws ValidationError on NaN or infinite logits.
  explicit Categorical(std::span<const float> logits);
  explicit Categorical(std::span<const double> logits);

  [[nodiscard]] const std::vector<double>& probs() const { return probs_; }
  [[nodiscard]] double logprob(int action) const;
  [[nodiscard]] double entropy() const;
  [[nodiscard]] int sample(std::mt19937_64& rng) const;
  [[nodiscard]] int argmax() const;
  // d logprob(action) / d logits = onehot(action) - p
  [[nodiscard]] std::vector<double> logprob_grad(int action) const;
  [[nodiscard]] int size() const { return static_cast<int>(probs_.size()); }

 private:
  void build(std::span<const double> logits);
  std::vector<double> probs_;
  std::vector<double> logp_;
};

}  // namespace tilerl::nn
