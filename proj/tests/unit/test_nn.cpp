#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "tilerl/error.hpp"
#include "tilerl/nn/categorical.hpp"
#include "tilerl/nn/checkpoint.hpp"
#include "tilerl/nn/init.hpp"
#include "tilerl/nn/kernels.hpp"
#include "tilerl/nn/loss.hpp"
#include "tilerl/nn/network.hpp"
#include "tilerl/nn/optim.hpp"

using namespace tilerl;
using namespace tilerl::nn;

namespace {

std::vector<double> randn(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

template <typename T>
BasicTensor<T> random_tensor(std::vector<int> shape, std::mt19937_64& rng) {
  BasicTensor<T> t(std::move(shape));
  std::normal_distribution<double> d;
  for (auto& x : t.data) x = static_cast<T>(d(rng));
  return t;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Naive index arithmetic, written independently of the kernels.
std::vector<double> naive_conv(const kernels::ConvGeom& g, const std::vector<double>& x, const std::vector<double>& w,
                               const std::vector<double>& b) {
  const int ho = g.out_h();
  const int wo = g.out_w();
  std::vector<double> y(static_cast<std::size_t>(g.batch * g.out_ch * ho * wo));
  for (int n = 0; n < g.batch; ++n)
    for (int o = 0; o < g.out_ch; ++o)
      for (int i = 0; i < ho; ++i)
        for (int j = 0; j < wo; ++j) {
          double s = b[o];
          for (int c = 0; c < g.in_ch; ++c)
            for (int p = 0; p < g.k; ++p)
              for (int q = 0; q < g.k; ++q) {
                s += w[((o * g.in_ch + c) * g.k + p) * g.k + q] *
                     x[((n * g.in_ch + c) * g.in_h + i * g.stride + p) * g.in_w + j * g.stride + q];
              }
          y[((n * g.out_ch + o) * ho + i) * wo + j] = s;
        }
  return y;
}

}  // namespace

TEST_CASE("dense kernels: serial and omp agree with a naive product") {
  std::mt19937_64 rng(3);
  const int B = 5, in = 7, out = 4;
  auto x = randn(B * in, rng), w = randn(out * in, rng), b = randn(out, rng), dy = randn(B * out, rng);
  std::vector<double> y1(B * out), y2(B * out), ref(B * out);
  for (int n = 0; n < B; ++n)
    for (int o = 0; o < out; ++o) {
      double s = b[o];
      for (int i = 0; i < in; ++i) s += w[o * in + i] * x[n * in + i];
      ref[n * out + o] = s;
    }
  kernels::serial::dense_forward(B, in, out, x.data(), w.data(), b.data(), y1.data());
  kernels::omp::dense_forward(B, in, out, x.data(), w.data(), b.data(), y2.data());
  CHECK(max_abs_diff(y1, ref) < 1e-12);
  CHECK(max_abs_diff(y1, y2) < 1e-12);

  std::vector<double> dx1(B * in), dx2(B * in), dw1(out * in, 0.0), dw2(out * in, 0.0), db1(out, 0.0), db2(out, 0.0);
  kernels::serial::dense_backward(B, in, out, x.data(), w.data(), dy.data(), dx1.data(), dw1.data(), db1.data());
  kernels::omp::dense_backward(B, in, out, x.data(), w.data(), dy.data(), dx2.data(), dw2.data(), db2.data());
  CHECK(max_abs_diff(dx1, dx2) < 1e-12);
  CHECK(max_abs_diff(dw1, dw2) < 1e-12);
  CHECK(max_abs_diff(db1, db2) < 1e-12);
  // dW[o][i] = sum_n dy[n][o] x[n][i]
  double dw00 = 0.0;
  for (int n = 0; n < B; ++n) dw00 += dy[n * out] * x[n * in];
  CHECK(dw1[0] == doctest::Approx(dw00).epsilon(1e-12));
}

TEST_CASE("conv kernels: serial and omp agree with naive loops, strided") {
  std::mt19937_64 rng(4);
  kernels::ConvGeom g{2, 3, 9, 11, 4, 3, 2};
  const int ho = g.out_h(), wo = g.out_w();
  CHECK(ho == 4);
  CHECK(wo == 5);
  auto x = randn(static_cast<std::size_t>(g.batch * g.in_ch * g.in_h * g.in_w), rng);
  auto w = randn(static_cast<std::size_t>(g.out_ch * g.in_ch * g.k * g.k), rng);
  auto b = randn(g.out_ch, rng);
  std::vector<double> y1(static_cast<std::size_t>(g.batch * g.out_ch * ho * wo)), y2(y1.size());
  kernels::serial::conv2d_forward(g, x.data(), w.data(), b.data(), y1.data());
  kernels::omp::conv2d_forward(g, x.data(), w.data(), b.data(), y2.data());
  CHECK(max_abs_diff(y1, naive_conv(g, x, w, b)) < 1e-12);
  CHECK(max_abs_diff(y1, y2) < 1e-12);

  auto dy = randn(y1.size(), rng);
  std::vector<double> dx1(x.size()), dx2(x.size()), dw1(w.size(), 0.0), dw2(w.size(), 0.0), db1(b.size(), 0.0),
      db2(b.size(), 0.0);
  kernels::serial::conv2d_backward(g, x.data(), w.data(), dy.data(), dx1.data(), dw1.data(), db1.data());
  kernels::omp::conv2d_backward(g, x.data(), w.data(), dy.data(), dx2.data(), dw2.data(), db2.data());
  CHECK(max_abs_diff(dx1, dx2) < 1e-12);
  CHECK(max_abs_diff(dw1, dw2) < 1e-12);
  CHECK(max_abs_diff(db1, db2) < 1e-12);
  // <dy, conv(x)> is linear in x, so its x-gradient contracted with x
  // recovers the bias-free part.
  std::vector<double> zero_b(b.size(), 0.0);
  const auto y0 = naive_conv(g, x, w, zero_b);
  double lhs = 0.0, rhs = 0.0;
  for (std::size_t i = 0; i < y0.size(); ++i) lhs += dy[i] * y0[i];
  for (std::size_t i = 0; i < x.size(); ++i) rhs += dx1[i] * x[i];
  CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
}

TEST_CASE("relu kernels gate on the forward output") {
  std::vector<float> x{-1.0F, 0.0F, 2.0F, -0.5F, 3.0F}, y(5), dx(5), dy{1, 1, 1, 1, 1};
  kernels::omp::relu_forward(5, x.data(), y.data());
  CHECK(y == std::vector<float>{0, 0, 2, 0, 3});
  kernels::serial::relu_backward(5, y.data(), dy.data(), dx.data());
  CHECK(dx == std::vector<float>{0, 0, 1, 0, 1});
}

TEST_CASE("identity 1x1 conv passes its input channels through") {
  // The logits head is set to the identity too, so the output row is the
  // flattened conv output.
  NetworkSpec spec;
  spec.input_shape = {2, 4, 5};
  spec.layers = {LayerSpec::conv(2, 1, 1)};
  spec.logits = 40;
  Network<double> net(spec);
  auto& p = net.mutable_params();
  p[0].value.data = {1.0, 0.0, 0.0, 1.0};
  p[1].value.data = {0.0, 0.0};
  p[2].value.data.assign(40 * 40, 0.0);
  for (int i = 0; i < 40; ++i) p[2].value.data[static_cast<std::size_t>(i * 41)] = 1.0;
  p[3].value.data.assign(40, 0.0);
  std::mt19937_64 rng(1);
  auto x = random_tensor<double>({3, 2, 4, 5}, rng);
  const auto y = net.forward(x);
  REQUIRE(y.size() == x.size());
  CHECK(y.data == x.data);
}

TEST_CASE("network: reference and omp kernels give the same forward and backward") {
  std::mt19937_64 rng(8);
  NetworkSpec spec;
  spec.input_shape = {1, 12, 12};
  spec.layers = {LayerSpec::conv(3, 3, 2), LayerSpec::relu(), LayerSpec::dense(8), LayerSpec::relu()};
  spec.logits = 5;
  spec.value_head = true;
  Network<float> a(spec);
  init_orthogonal(a, 42);
  Network<float> b = a;
  b.use_reference_kernels(true);
  auto x = random_tensor<float>({4, 1, 12, 12}, rng);
  Tape<float> ta, tb;
  const auto ya = a.forward(x, &ta);
  const auto yb = b.forward(x, &tb);
  CHECK(ya.shape == std::vector<int>{4, 6});
  for (std::size_t i = 0; i < ya.size(); ++i) CHECK(ya.data[i] == doctest::Approx(yb.data[i]).epsilon(1e-5));
  auto up = random_tensor<float>({4, 6}, rng);
  const auto ga = a.backward(ta, up);
  const auto gb = b.backward(tb, up);
  REQUIRE(ga.size() == gb.size());
  for (std::size_t i = 0; i < ga.size(); ++i) {
    for (std::size_t j = 0; j < ga[i].size(); ++j) CHECK(ga[i].data[j] == doctest::Approx(gb[i].data[j]).epsilon(1e-5));
  }
}

TEST_CASE("a tape is single-use and dies with a parameter change") {
  Network<float> net(NetworkSpec::mlp(3, {4}, 2, false));
  init_orthogonal(net, 1);
  BasicTensor<float> x({1, 3}, 0.5F);
  BasicTensor<float> up({1, 2}, 1.0F);
  Tape<float> t;
  net.forward(x, &t);
  net.backward(t, up);
  CHECK(t.consumed());
  CHECK_THROWS_AS(net.backward(t, up), ContractError);
  Tape<float> t2;
  net.forward(x, &t2);
  net.mutable_params();
  CHECK_THROWS_AS(net.backward(t2, up), ContractError);
}

TEST_CASE("network rejects a batch of the wrong shape") {
  Network<float> net(NetworkSpec::mlp(3, {4}, 2, false));
  CHECK_THROWS_AS(net.forward(BasicTensor<float>({2, 4})), ValidationError);
}

TEST_CASE("spec json roundtrip") {
  auto spec = NetworkSpec::nature_cnn(22, true);
  CHECK(NetworkSpec::from_json(spec.to_json()) == spec);
  auto mlp = NetworkSpec::mlp(510, {64, 64}, 8, false);
  CHECK(NetworkSpec::from_json(mlp.to_json()) == mlp);
  CHECK(spec.input_size() == 84 * 84);
}

TEST_CASE("orthogonal init: rows orthonormal up to the gain, zero biases, seeded") {
  Network<double> net(NetworkSpec::mlp(6, {4}, 3, true));
  init_orthogonal(net, 5, InitGains{1.0, 1.0, 1.0});
  const auto& w = net.params()[0].value;  // (4, 6)
  for (int r = 0; r < 4; ++r)
    for (int s = 0; s < 4; ++s) {
      double dot = 0.0;
      for (int c = 0; c < 6; ++c) dot += w.data[r * 6 + c] * w.data[s * 6 + c];
      CHECK(dot == doctest::Approx(r == s ? 1.0 : 0.0).epsilon(1e-9).scale(1.0));
    }
  for (const auto& p : net.params())
    if (p.name.ends_with("bias"))
      for (double v : p.value.data) CHECK(v == 0.0);
  Network<double> again(NetworkSpec::mlp(6, {4}, 3, true));
  init_orthogonal(again, 5, InitGains{1.0, 1.0, 1.0});
  CHECK(again.params()[0].value == w);
}

TEST_CASE("smooth_l1 hand values and gradient") {
  BasicTensor<double> pred({2}, std::vector<double>{0.3, 2.0});
  BasicTensor<double> zero({2}, 0.0);
  BasicTensor<double> p1({1}, std::vector<double>{0.3});
  BasicTensor<double> p2({1}, std::vector<double>{2.0});
  BasicTensor<double> z1({1}, 0.0);
  CHECK(smooth_l1(p1, z1).loss == doctest::Approx(0.045));
  CHECK(smooth_l1(p2, z1).loss == doctest::Approx(1.5));
  const auto r = smooth_l1(pred, zero);
  CHECK(r.loss == doctest::Approx((0.045 + 1.5) / 2.0));
  CHECK(r.grad.data[0] == doctest::Approx(0.3 / 2.0));
  CHECK(r.grad.data[1] == doctest::Approx(1.0 / 2.0));
  // central differences
  for (double e : {-3.0, -0.7, 0.2, 0.99, 1.01, 4.0}) {
    BasicTensor<double> p({1}, std::vector<double>{e});
    const double h = 1e-6;
    BasicTensor<double> hi({1}, std::vector<double>{e + h}), lo({1}, std::vector<double>{e - h});
    const double fd = (smooth_l1(hi, z1).loss - smooth_l1(lo, z1).loss) / (2 * h);
    CHECK(smooth_l1(p, z1).grad.data[0] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("categorical: logprob, entropy and gradient against direct formulas") {
  std::vector<double> logits{0.5, -1.0, 2.0, 0.0};
  Categorical c{std::span<const double>(logits)};
  double z = 0.0;
  for (double l : logits) z += std::exp(l);
  double h = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double p = std::exp(logits[i]) / z;
    CHECK(c.probs()[i] == doctest::Approx(p));
    CHECK(c.logprob(static_cast<int>(i)) == doctest::Approx(std::log(p)));
    h -= p * std::log(p);
  }
  CHECK(c.entropy() == doctest::Approx(h));
  CHECK(c.argmax() == 2);
  const auto g = c.logprob_grad(1);
  for (std::size_t i = 0; i < logits.size(); ++i) {
    auto up = logits, dn = logits;
    up[i] += 1e-6;
    dn[i] -= 1e-6;
    const double fd = (Categorical{std::span<const double>(up)}.logprob(1) - Categorical{std::span<const double>(dn)}.logprob(1)) / 2e-6;
    CHECK(g[i] == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("categorical: huge logits stay finite, NaN is rejected") {
  std::vector<double> big{1000.0, 999.0};
  Categorical c{std::span<const double>(big)};
  CHECK(std::isfinite(c.logprob(1)));
  CHECK(c.probs()[0] > c.probs()[1]);
  std::vector<double> bad{0.0, std::nan("")};
  CHECK_THROWS_AS(Categorical{std::span<const double>(bad)}, ValidationError);
}

TEST_CASE("categorical sampling frequencies sit within 3 sigma over 1e5 draws") {
  std::vector<double> logits{0.0, 1.0, -0.5, 0.3, -2.0};
  Categorical c{std::span<const double>(logits)};
  std::mt19937_64 rng(99);
  const int n = 100000;
  std::vector<int> counts(logits.size(), 0);
  for (int i = 0; i < n; ++i) ++counts[static_cast<std::size_t>(c.sample(rng))];
  for (std::size_t k = 0; k < logits.size(); ++k) {
    const double p = c.probs()[k];
    const double sd = std::sqrt(n * p * (1 - p));
    CHECK(std::abs(counts[k] - n * p) < 3.0 * sd);
  }
}

TEST_CASE("adam: first bias-corrected step is -lr for a constant gradient") {
  Network<float> net(NetworkSpec::mlp(1, {}, 1, false));
  auto& p = net.mutable_params();
  p[0].value.data = {0.0F};
  p[1].value.data = {0.0F};
  auto st = make_optimizer(net, AdamConfig{0.1, 0.9, 0.999, 1e-8, 0.0});
  Gradients<float> g = net.zero_gradients();
  g[0].data = {1.0F};
  g[1].data = {0.0F};
  const auto rep = adam_step(net, g, st);
  CHECK(rep.grad_norm == doctest::Approx(1.0));
  CHECK(net.params()[0].value.data[0] == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(net.params()[1].value.data[0] == 0.0F);
  CHECK(st.step == 1);
}

TEST_CASE("adam: global-norm clipping and non-finite gradients") {
  Network<float> net(NetworkSpec::mlp(2, {}, 1, false));
  auto st = make_optimizer(net, AdamConfig{0.1, 0.9, 0.999, 1e-8, 1.0});
  auto g = net.zero_gradients();
  g[0].data = {3.0F, 4.0F};
  const auto rep = adam_step(net, g, st);
  CHECK(rep.grad_norm == doctest::Approx(5.0));
  CHECK(rep.applied_norm == doctest::Approx(1.0));
  const auto before = net.params();
  g[0].data = {std::nanf(""), 1.0F};
  CHECK_THROWS_AS(adam_step(net, g, st), NumericError);
  CHECK(net.params()[0].value == before[0].value);
}

TEST_CASE("checkpoint roundtrip keeps weights, optimizer and metadata") {
  Network<float> net(NetworkSpec::mlp(5, {7}, 3, true));
  init_orthogonal(net, 11);
  auto opt = make_optimizer(net, AdamConfig{});
  auto g = net.zero_gradients();
  for (auto& t : g)
    for (auto& v : t.data) v = 0.25F;
  adam_step(net, g, opt);
  Checkpoint ck;
  ck.metadata_json = R"({"steps":3})";
  ck.entries.push_back({"actor", net, opt});
  const auto path = std::filesystem::temp_directory_path() / "tilerl_unit_ckpt.bin";
  save_checkpoint(path, ck);
  const auto back = load_checkpoint(path);
  CHECK(back.metadata_json == ck.metadata_json);
  const auto& e = back.get("actor");
  CHECK(e.net.spec() == net.spec());
  for (std::size_t i = 0; i < net.params().size(); ++i) CHECK(e.net.params()[i].value == net.params()[i].value);
  REQUIRE(e.optimizer.has_value());
  CHECK(e.optimizer->step == 1);
  CHECK(e.optimizer->m[0] == opt.m[0]);
  CHECK_THROWS_AS((void)back.get("critic"), NotFoundError);
  std::filesystem::remove(path);
}

TEST_CASE("checkpoint loader rejects a truncated file") {
  Network<float> net(NetworkSpec::mlp(5, {7}, 3, true));
  Checkpoint ck;
  ck.entries.push_back({"actor", net, std::nullopt});
  const auto path = std::filesystem::temp_directory_path() / "tilerl_unit_ckpt_trunc.bin";
  save_checkpoint(path, ck);
  std::filesystem::resize_file(path, std::filesystem::file_size(path) / 2);
  CHECK_THROWS_AS(load_checkpoint(path), SchemaError);
  std::filesystem::remove(path);
}
