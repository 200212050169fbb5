#include "tilerl/nn/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "tilerl/nn/categorical.hpp"
#include "tilerl/nn/init.hpp"

namespace tilerl::nn {

namespace {

double gaussian(std::mt19937_64& rng) {
  const double u1 = std::max(unit_uniform(rng), 1e-300);
  const double u2 = unit_uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

double objective(const Network<double>& net, const BasicTensor<double>& x, const BasicTensor<double>& w) {
  const auto y = net.forward(x);
  double s = 0.0;
  for (std::size_t i = 0; i < y.data.size(); ++i) s += w.data[i] * y.data[i];
  return s;
}

std::vector<std::size_t> pick(std::size_t n, int limit, std::mt19937_64& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  if (n <= static_cast<std::size_t>(limit)) return idx;
  for (std::size_t i = 0; i < static_cast<std::size_t>(limit); ++i) {
    const std::size_t j = i + static_cast<std::size_t>(rng() % (n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(static_cast<std::size_t>(limit));
  return idx;
}

// Returns false when the two one-sided slopes disagree, i.e. a kink sits
// inside the stencil.
bool central(const std::function<double(double)>& f, double x0, double eps, double f0, double& out) {
  const double fp = f(x0 + eps);
  const double fm = f(x0 - eps);
  const double right = (fp - f0) / eps;
  const double left = (f0 - fm) / eps;
  out = (fp - fm) / (2.0 * eps);
  return std::abs(right - left) <= 1e-7 * std::max({1.0, std::abs(right), std::abs(left)});
}

double rel_error(double a, double n) { return std::abs(a - n) / std::max({std::abs(a), std::abs(n), 1e-6}); }

}  // namespace

GradcheckResult gradcheck(const NetworkSpec& spec, const GradcheckOptions& o) {
  std::mt19937_64 rng(o.seed);
  Network<double> net(spec);
  init_orthogonal(net, o.seed ^ 0x9e3779b97f4a7c15ULL, InitGains{1.4142135623730951, 1.0, 1.0});
  // Non-zero biases so bias paths are exercised too.
  for (auto& p : net.mutable_params()) {
    if (p.name.ends_with("bias")) {
      for (auto& v : p.value.data) v = 0.1 * gaussian(rng);
    }
  }
  std::vector<int> xshape{o.batch};
  xshape.insert(xshape.end(), spec.input_shape.begin(), spec.input_shape.end());
  BasicTensor<double> x(xshape, 0.0);
  for (auto& v : x.data) v = gaussian(rng);
  BasicTensor<double> w({o.batch, spec.output_size()}, 0.0);
  for (auto& v : w.data) v = gaussian(rng);

  Tape<double> tape;
  net.forward(x, &tape);
  BasicTensor<double> dx;
  const auto grads = net.backward(tape, w, &dx);
  const double f0 = objective(net, x, w);

  GradcheckResult r;
  r.spec_json = spec.to_json();
  for (std::size_t b = 0; b < net.params().size(); ++b) {
    BlockCheck bc;
    bc.name = net.params()[b].name;
    for (std::size_t i : pick(net.params()[b].value.data.size(), o.max_coords_per_block, rng)) {
      const double orig = net.params()[b].value.data[i];
      auto f = [&](double v) {
        net.mutable_params()[b].value.data[i] = v;
        return objective(net, x, w);
      };
      double num = 0.0;
      const bool smooth = central(f, orig, o.eps, f0, num);
      net.mutable_params()[b].value.data[i] = orig;
      if (!smooth) {
        ++bc.skipped;
        continue;
      }
      ++bc.checked;
      bc.max_rel_error = std::max(bc.max_rel_error, rel_error(grads[b].data[i], num));
    }
    r.max_rel_error = std::max(r.max_rel_error, bc.max_rel_error);
    r.blocks.push_back(bc);
  }
  BlockCheck in;
  in.name = "input";
  for (std::size_t i : pick(x.data.size(), o.max_coords_per_block, rng)) {
    const double orig = x.data[i];
    auto f = [&](double v) {
      x.data[i] = v;
      return objective(net, x, w);
    };
    double num = 0.0;
    const bool smooth = central(f, orig, o.eps, f0, num);
    x.data[i] = orig;
    if (!smooth) {
      ++in.skipped;
      continue;
    }
    ++in.checked;
    in.max_rel_error = std::max(in.max_rel_error, rel_error(dx.data[i], num));
  }
  r.max_rel_error = std::max(r.max_rel_error, in.max_rel_error);
  r.blocks.push_back(in);
  int checked = 0;
  for (const auto& b : r.blocks) checked += b.checked;
  r.passed = checked > 0 && r.max_rel_error < o.tolerance;
  return r;
}

NetworkSpec random_gradcheck_spec(std::mt19937_64& rng) {
  auto uniform = [&](int lo, int hi) { return lo + static_cast<int>(rng() % static_cast<std::uint64_t>(hi - lo + 1)); };
  NetworkSpec s;
  const bool conv = rng() % 2 == 0;
  if (conv) {
    const int ch = uniform(1, 3);
    const int side = uniform(7, 12);
    s.input_shape = {ch, side, side};
    int h = side;
    const int convs = uniform(1, 2);
    for (int c = 0; c < convs; ++c) {
      const int k = uniform(2, std::min(4, h));
      const int stride = uniform(1, 2);
      s.layers.push_back(LayerSpec::conv(uniform(2, 4), k, stride));
      s.layers.push_back(LayerSpec::relu());
      h = (h - k) / stride + 1;
      if (h < 2) break;
    }
    s.layers.push_back(LayerSpec::dense(uniform(3, 8)));
    if (rng() % 2) s.layers.push_back(LayerSpec::relu());
  } else {
    s.input_shape = {uniform(2, 10)};
    const int depth = uniform(1, 3);
    for (int d = 0; d < depth; ++d) {
      s.layers.push_back(LayerSpec::dense(uniform(2, 9)));
      if (rng() % 4 != 0) s.layers.push_back(LayerSpec::relu());
    }
  }
  s.value_head = rng() % 2 == 0;
  s.logits = uniform(s.value_head ? 0 : 1, 5);
  return s;
}

}  // namespace tilerl::nn
