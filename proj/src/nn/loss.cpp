#include "tilerl/nn/loss.hpp"

#include <cmath>

namespace tilerl::nn {

template <typename T>
LossResult<T> smooth_l1(const BasicTensor<T>& pred, const BasicTensor<T>& target) {
  if (pred.shape != target.shape) {
    throw ValidationError("smooth_l1: shape " + pred.shape_string() + " vs " + target.shape_string());
  }
  LossResult<T> r;
  r.grad = BasicTensor<T>(pred.shape);
  const std::size_t n = pred.size();
  if (n == 0) return r;
  double sum = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double e = static_cast<double>(pred.data[i]) - static_cast<double>(target.data[i]);
    const double a = std::abs(e);
    if (a < 1.0) {
      sum += 0.5 * e * e;
      r.grad.data[i] = static_cast<T>(e * inv_n);
    } else {
      sum += a - 0.5;
      r.grad.data[i] = static_cast<T>((e > 0 ? 1.0 : -1.0) * inv_n);
    }
  }
  r.loss = sum * inv_n;
  return r;
}

template LossResult<float> smooth_l1(const BasicTensor<float>&, const BasicTensor<float>&);
template LossResult<double> smooth_l1(const BasicTensor<double>&, const BasicTensor<double>&);

}  // namespace tilerl::nn
