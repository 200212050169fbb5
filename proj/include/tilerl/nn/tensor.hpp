#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <vector>

#include "tilerl/error.hpp"

namespace tilerl::nn {

// Dense row-major array. Copies own their data; no views.
template <typename T>
struct BasicTensor {
  std::vector<int> shape;
  std::vector<T> data;

  BasicTensor() = default;
  explicit BasicTensor(std::vector<int> s, T fill = T(0)) : shape(std::move(s)) {
    data.assign(count(shape), fill);
  }
  BasicTensor(std::vector<int> s, std::vector<T> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != count(shape)) throw ValidationError("tensor data length does not match shape");
  }

  static std::size_t count(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) {
      if (d < 0) throw ValidationError("negative tensor dimension");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

  [[nodiscard]] std::size_t size() const { return data.size(); }
  [[nodiscard]] int dim(std::size_t i) const { return shape.at(i); }
  // Rows of the leading axis and elements per row.
  [[nodiscard]] int rows() const { return shape.empty() ? 1 : shape[0]; }
  [[nodiscard]] std::size_t row_size() const { return shape.empty() ? 1 : data.size() / static_cast<std::size_t>(std::max(shape[0], 1)); }
  T* row(int r) { return data.data() + static_cast<std::size_t>(r) * row_size(); }
  const T* row(int r) const { return data.data() + static_cast<std::size_t>(r) * row_size(); }

  T& operator[](std::size_t i) { return data[i]; }
  const T& operator[](std::size_t i) const { return data[i]; }

  [[nodiscard]] std::string shape_string() const {
    std::string s = "(";
    for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
    return s + ")";
  }

  friend bool operator==(const BasicTensor&, const BasicTensor&) = default;
};

using Tensor = BasicTensor<float>;

template <typename To, typename From>
BasicTensor<To> tensor_cast(const BasicTensor<From>& t) {
  BasicTensor<To> out;
  out.shape = t.shape;
  out.data.assign(t.data.begin(), t.data.end());
  return out;
}

}  // namespace tilerl::nn
