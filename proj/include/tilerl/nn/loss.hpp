#pragma once

#include "tilerl/nn/tensor.hpp"

namespace tilerl::nn {

template <typename T>
struct LossResult {
  double loss = 0.0;
  BasicTensor<T> grad;  // d(loss)/d(pred), same shape as pred
};

// Huber loss with transition point 1, mean over all elements.
template <typename T>
LossResult<T> smooth_l1(const BasicTensor<T>& pred, const BasicTensor<T>& target);

}  // namespace tilerl::nn
