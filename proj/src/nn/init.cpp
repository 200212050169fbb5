#include "tilerl/nn/init.hpp"

#include <cmath>
#include <random>

#include "tilerl/nn/categorical.hpp"

namespace tilerl::nn {

namespace {

// Box-Muller on the portable uniform, so weights match across standard libraries.
double normal(std::mt19937_64& rng) {
  double u1 = unit_uniform(rng);
  while (u1 <= 0.0) u1 = unit_uniform(rng);
  const double u2 = unit_uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

// Orthonormalise the shorter side of a rows x cols matrix in place
// (modified Gram-Schmidt).
void orthonormalize(std::vector<double>& a, int rows, int cols) {
  const bool by_rows = rows <= cols;
  const int n = by_rows ? rows : cols;
  const int len = by_rows ? cols : rows;
  auto at = [&](int vec, int k) -> double& {
    return by_rows ? a[static_cast<std::size_t>(vec) * cols + k] : a[static_cast<std::size_t>(k) * cols + vec];
  };
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < i; ++j) {
      double dot = 0.0;
      for (int k = 0; k < len; ++k) dot += at(i, k) * at(j, k);
      for (int k = 0; k < len; ++k) at(i, k) -= dot * at(j, k);
    }
    double norm = 0.0;
    for (int k = 0; k < len; ++k) norm += at(i, k) * at(i, k);
    norm = std::sqrt(norm);
    if (norm < 1e-12) norm = 1.0;
    for (int k = 0; k < len; ++k) at(i, k) /= norm;
  }
}

}  // namespace

template <typename T>
void init_orthogonal(Network<T>& net, std::uint64_t seed, InitGains gains) {
  std::mt19937_64 rng(seed);
  for (auto& p : net.mutable_params()) {
    auto& t = p.value;
    if (p.name.ends_with(".bias")) {
      std::fill(t.data.begin(), t.data.end(), T(0));
      continue;
    }
    const int rows = t.shape[0];
    const int cols = static_cast<int>(t.size() / static_cast<std::size_t>(rows));
    std::vector<double> a(t.size());
    for (auto& v : a) v = normal(rng);
    orthonormalize(a, rows, cols);
    double gain = gains.trunk;
    if (p.name.starts_with("logits.")) gain = gains.logits;
    if (p.name.starts_with("value.")) gain = gains.value;
    for (std::size_t i = 0; i < a.size(); ++i) t.data[i] = static_cast<T>(gain * a[i]);
  }
}

template void init_orthogonal(Network<float>&, std::uint64_t, InitGains);
template void init_orthogonal(Network<double>&, std::uint64_t, InitGains);

}  // namespace tilerl::nn
