#pragma once

#include <cstdint>
#include <vector>

#include "tilerl/nn/network.hpp"

namespace tilerl::nn {

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;  // global L2 norm; <= 0 disables clipping
};

struct OptimizerState {
  AdamConfig config;
  std::int64_t step = 0;
  std::vector<Tensor> m;
  std::vector<Tensor> v;
};

OptimizerState make_optimizer(const Network<float>& net, AdamConfig config);

struct StepReport {
  double grad_norm = 0.0;     // before clipping
  double applied_norm = 0.0;  // after clipping
};

template <typename T>
double global_norm(const Gradients<T>& grads);

// Clips by global norm, then applies one bias-corrected Adam update.
// Throws NumericError naming the first block holding a non-finite gradient;
// parameters are left untouched in that case.
StepReport adam_step(Network<float>& net, const Gradients<float>& grads, OptimizerState& state);

}  // namespace tilerl::nn
