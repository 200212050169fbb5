#pragma once

#include <cstdint>

#include "tilerl/nn/network.hpp"

namespace tilerl::nn {

struct InitGains {
  double trunk = 1.4142135623730951;  // sqrt(2) for ReLU stacks
  double logits = 0.01;               // near-uniform initial policy
  double value = 1.0;
};

// Orthogonal weights (rows or columns orthonormal, whichever is shorter)
// scaled by the gain of their block; zero biases. Deterministic in seed.
template <typename T>
void init_orthogonal(Network<T>& net, std::uint64_t seed, InitGains gains = {});

}  // namespace tilerl::nn
