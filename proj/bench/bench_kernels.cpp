// Serial reference kernels against the OpenMP ones, float32.
//   ./bench_kernels --benchmark_filter=conv
// OMP_NUM_THREADS controls the parallel side.

#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "tilerl/nn/kernels.hpp"

namespace k = tilerl::nn::kernels;

namespace {

std::vector<float> noise(std::size_t n, unsigned seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<float> u(-1.0f, 1.0f);
  std::vector<float> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Feature-window actor shapes: batch x 510 -> 64.
constexpr int kIn = 510, kOut = 64;

template <bool Omp>
void BM_DenseForward(benchmark::State& st) {
  const int batch = static_cast<int>(st.range(0));
  const auto x = noise(static_cast<std::size_t>(batch) * kIn, 1), w = noise(kIn * kOut, 2), b = noise(kOut, 3);
  std::vector<float> y(static_cast<std::size_t>(batch) * kOut);
  for (auto _ : st) {
    if constexpr (Omp)
      k::omp::dense_forward(batch, kIn, kOut, x.data(), w.data(), b.data(), y.data());
    else
      k::serial::dense_forward(batch, kIn, kOut, x.data(), w.data(), b.data(), y.data());
    benchmark::DoNotOptimize(y.data());
  }
  st.SetItemsProcessed(st.iterations() * batch);
}

template <bool Omp>
void BM_DenseBackward(benchmark::State& st) {
  const int batch = static_cast<int>(st.range(0));
  const auto x = noise(static_cast<std::size_t>(batch) * kIn, 1), w = noise(kIn * kOut, 2);
  const auto dy = noise(static_cast<std::size_t>(batch) * kOut, 4);
  std::vector<float> dx(x.size()), dw(w.size()), db(kOut);
  for (auto _ : st) {
    if constexpr (Omp)
      k::omp::dense_backward(batch, kIn, kOut, x.data(), w.data(), dy.data(), dx.data(), dw.data(), db.data());
    else
      k::serial::dense_backward(batch, kIn, kOut, x.data(), w.data(), dy.data(), dx.data(), dw.data(), db.data());
    benchmark::DoNotOptimize(dw.data());
  }
  st.SetItemsProcessed(st.iterations() * batch);
}

// First layer of the pixel network: 1x84x84 frames, 32 filters of 8x8, stride 4.
k::ConvGeom first_conv(int batch) { return {batch, 1, 84, 84, 32, 8, 4}; }

template <bool Omp>
void BM_ConvForward(benchmark::State& st) {
  const auto g = first_conv(static_cast<int>(st.range(0)));
  const auto x = noise(static_cast<std::size_t>(g.batch) * 84 * 84, 5), w = noise(32 * 64, 6), b = noise(32, 7);
  std::vector<float> y(static_cast<std::size_t>(g.batch) * 32 * g.out_h() * g.out_w());
  for (auto _ : st) {
    if constexpr (Omp)
      k::omp::conv2d_forward(g, x.data(), w.data(), b.data(), y.data());
    else
      k::serial::conv2d_forward(g, x.data(), w.data(), b.data(), y.data());
    benchmark::DoNotOptimize(y.data());
  }
  st.SetItemsProcessed(st.iterations() * g.batch);
}

template <bool Omp>
void BM_ConvBackward(benchmark::State& st) {
  const auto g = first_conv(static_cast<int>(st.range(0)));
  const auto x = noise(static_cast<std::size_t>(g.batch) * 84 * 84, 5), w = noise(32 * 64, 6);
  const auto dy = noise(static_cast<std::size_t>(g.batch) * 32 * g.out_h() * g.out_w(), 8);
  std::vector<float> dx(x.size()), dw(w.size()), db(32);
  for (auto _ : st) {
    if constexpr (Omp)
      k::omp::conv2d_backward(g, x.data(), w.data(), dy.data(), dx.data(), dw.data(), db.data());
    else
      k::serial::conv2d_backward(g, x.data(), w.data(), dy.data(), dx.data(), dw.data(), db.data());
    benchmark::DoNotOptimize(dw.data());
  }
  st.SetItemsProcessed(st.iterations() * g.batch);
}

template <bool Omp>
void BM_Relu(benchmark::State& st) {
  const long n = st.range(0);
  const auto x = noise(static_cast<std::size_t>(n), 9);
  std::vector<float> y(x.size());
  for (auto _ : st) {
    if constexpr (Omp)
      k::omp::relu_forward(n, x.data(), y.data());
    else
      k::serial::relu_forward(n, x.data(), y.data());
    benchmark::DoNotOptimize(y.data());
  }
  st.SetBytesProcessed(st.iterations() * n * static_cast<long>(sizeof(float)));
}

}  // namespace

BENCHMARK(BM_DenseForward<false>)->Name("dense_forward/serial")->Arg(64)->Arg(1024);
BENCHMARK(BM_DenseForward<true>)->Name("dense_forward/omp")->Arg(64)->Arg(1024);
BENCHMARK(BM_DenseBackward<false>)->Name("dense_backward/serial")->Arg(64)->Arg(1024);
BENCHMARK(BM_DenseBackward<true>)->Name("dense_backward/omp")->Arg(64)->Arg(1024);
BENCHMARK(BM_ConvForward<false>)->Name("conv_forward/serial")->Arg(8)->Arg(32);
BENCHMARK(BM_ConvForward<true>)->Name("conv_forward/omp")->Arg(8)->Arg(32);
BENCHMARK(BM_ConvBackward<false>)->Name("conv_backward/serial")->Arg(8)->Arg(32);
BENCHMARK(BM_ConvBackward<true>)->Name("conv_backward/omp")->Arg(8)->Arg(32);
BENCHMARK(BM_Relu<false>)->Name("relu/serial")->Arg(1 << 20);
BENCHMARK(BM_Relu<true>)->Name("relu/omp")->Arg(1 << 20);

BENCHMARK_MAIN();
