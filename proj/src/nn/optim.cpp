#include "tilerl/nn/optim.hpp"

#include <cmath>

namespace tilerl::nn {

OptimizerState make_optimizer(const Network<float>& net, AdamConfig config) {
  if (!(config.lr > 0.0)) throw ValidationError("learning rate must be positive");
  OptimizerState s;
  s.config = config;
  for (const auto& p : net.params()) {
    s.m.emplace_back(p.value.shape);
    s.v.emplace_back(p.value.shape);
  }
  return s;
}

template <typename T>
double global_norm(const Gradients<T>& grads) {
  double sq = 0.0;
  for (const auto& g : grads)
    for (T v : g.data) sq += static_cast<double>(v) * static_cast<double>(v);
  return std::sqrt(sq);
}

template double global_norm(const Gradients<float>&);
template double global_norm(const Gradients<double>&);

StepReport adam_step(Network<float>& net, const Gradients<float>& grads, OptimizerState& state) {
  const auto& cfg = state.config;
  if (!(cfg.lr > 0.0)) throw ValidationError("learning rate must be positive");
  const auto& params = net.params();
  if (grads.size() != params.size() || state.m.size() != params.size()) {
    throw ValidationError("gradient/optimizer blocks do not match the network");
  }
  for (std::size_t b = 0; b < params.size(); ++b) {
    if (grads[b].shape != params[b].value.shape) throw ValidationError("gradient shape mismatch in block '" + params[b].name + "'");
    for (float v : grads[b].data) {
      if (!std::isfinite(v)) throw NumericError("non-finite gradient in block '" + params[b].name + "'");
    }
  }

  StepReport report;
  report.grad_norm = global_norm(grads);
  double scale = 1.0;
  if (cfg.clip_norm > 0.0 && report.grad_norm > cfg.clip_norm) scale = cfg.clip_norm / report.grad_norm;
  report.applied_norm = report.grad_norm * scale;

  state.step += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
  auto& mut = net.mutable_params();
  for (std::size_t b = 0; b < mut.size(); ++b) {
    auto& w = mut[b].value.data;
    auto& m = state.m[b].data;
    auto& v = state.v[b].data;
    const auto& g = grads[b].data;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = static_cast<double>(g[i]) * scale;
      const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      w[i] = static_cast<float>(w[i] - cfg.lr * (mi / bc1) / (std::sqrt(vi / bc2) + cfg.eps));
    }
  }
  return report;
}

}  // namespace tilerl::nn
