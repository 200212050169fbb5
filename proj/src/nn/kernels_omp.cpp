#include <omp.h>

#include <vector>

#include "tilerl/nn/kernels.hpp"

namespace tilerl::nn::kernels::omp {

namespace {
// Below this many multiply-adds the fork/join costs more than it saves.
constexpr long kParallelWork = 1L << 15;
}  // namespace

template <typename T>
void dense_forward(int batch, int in, int out, const T* x, const T* w, const T* b, T* y) {
  const long work = static_cast<long>(batch) * in * out;
#pragma omp parallel for collapse(2) schedule(static) if (work > kParallelWork)
  for (int r = 0; r < batch; ++r) {
    for (int o = 0; o < out; ++o) {
      const T* xr = x + static_cast<long>(r) * in;
      const T* wo = w + static_cast<long>(o) * in;
      T acc = T(0);
#pragma omp simd reduction(+ : acc)
      for (int i = 0; i < in; ++i) acc += wo[i] * xr[i];
      y[static_cast<long>(r) * out + o] = acc + b[o];
    }
  }
}

template <typename T>
void dense_backward(int batch, int in, int out, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db) {
  const long work = static_cast<long>(batch) * in * out;
  // Weight gradient: each thread owns whole output rows and sums the batch
  // in order, in double.
#pragma omp parallel if (work > kParallelWork)
  {
    std::vector<double> acc(static_cast<std::size_t>(in));
#pragma omp for schedule(static)
    for (int o = 0; o < out; ++o) {
      std::fill(acc.begin(), acc.end(), 0.0);
      double bias = 0.0;
      for (int r = 0; r < batch; ++r) {
        const double g = dy[static_cast<long>(r) * out + o];
        if (g == 0.0) continue;
        bias += g;
        const T* xr = x + static_cast<long>(r) * in;
        for (int i = 0; i < in; ++i) acc[static_cast<std::size_t>(i)] += g * xr[i];
      }
      T* dwo = dw + static_cast<long>(o) * in;
      for (int i = 0; i < in; ++i) dwo[i] += static_cast<T>(acc[static_cast<std::size_t>(i)]);
      db[o] += static_cast<T>(bias);
    }
  }
  if (dx == nullptr) return;
#pragma omp parallel for schedule(static) if (work > kParallelWork)
  for (int r = 0; r < batch; ++r) {
    T* dxr = dx + static_cast<long>(r) * in;
    for (int i = 0; i < in; ++i) dxr[i] = T(0);
    for (int o = 0; o < out; ++o) {
      const T g = dy[static_cast<long>(r) * out + o];
      if (g == T(0)) continue;
      const T* wo = w + static_cast<long>(o) * in;
#pragma omp simd
      for (int i = 0; i < in; ++i) dxr[i] += g * wo[i];
    }
  }
}

template <typename T>
void conv2d_forward(const ConvGeom& g, const T* x, const T* w, const T* b, T* y) {
  const int oh = g.out_h();
  const int ow = g.out_w();
  const long work = static_cast<long>(g.batch) * g.out_ch * oh * ow * g.in_ch * g.k * g.k;
#pragma omp parallel for collapse(2) schedule(static) if (work > kParallelWork)
  for (int n = 0; n < g.batch; ++n) {
    for (int co = 0; co < g.out_ch; ++co) {
      T* yo = y + (static_cast<long>(n) * g.out_ch + co) * oh * ow;
      for (int p = 0; p < oh * ow; ++p) yo[p] = b[co];
      for (int c = 0; c < g.in_ch; ++c) {
        const T* xc = x + (static_cast<long>(n) * g.in_ch + c) * g.in_h * g.in_w;
        const T* wc = w + (static_cast<long>(co) * g.in_ch + c) * g.k * g.k;
        for (int ky = 0; ky < g.k; ++ky) {
          for (int kx = 0; kx < g.k; ++kx) {
            const T wv = wc[ky * g.k + kx];
            for (int oy = 0; oy < oh; ++oy) {
              const T* xrow = xc + static_cast<long>(oy * g.stride + ky) * g.in_w + kx;
              T* yrow = yo + static_cast<long>(oy) * ow;
              for (int ox = 0; ox < ow; ++ox) yrow[ox] += wv * xrow[ox * g.stride];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void conv2d_backward(const ConvGeom& g, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db) {
  const int oh = g.out_h();
  const int ow = g.out_w();
  const long work = static_cast<long>(g.batch) * g.out_ch * oh * ow * g.in_ch * g.k * g.k;
  const int taps = g.in_ch * g.k * g.k;
  // Filter gradient: one thread per output channel, double accumulation.
#pragma omp parallel if (work > kParallelWork)
  {
    std::vector<double> acc(static_cast<std::size_t>(taps));
#pragma omp for schedule(static)
    for (int co = 0; co < g.out_ch; ++co) {
      std::fill(acc.begin(), acc.end(), 0.0);
      double bias = 0.0;
      for (int n = 0; n < g.batch; ++n) {
        const T* dyo = dy + (static_cast<long>(n) * g.out_ch + co) * oh * ow;
        for (int p = 0; p < oh * ow; ++p) bias += dyo[p];
        for (int c = 0; c < g.in_ch; ++c) {
          const T* xc = x + (static_cast<long>(n) * g.in_ch + c) * g.in_h * g.in_w;
          for (int ky = 0; ky < g.k; ++ky) {
            for (int kx = 0; kx < g.k; ++kx) {
              double s = 0.0;
              for (int oy = 0; oy < oh; ++oy) {
                const T* xrow = xc + static_cast<long>(oy * g.stride + ky) * g.in_w + kx;
                const T* grow = dyo + static_cast<long>(oy) * ow;
                for (int ox = 0; ox < ow; ++ox) s += static_cast<double>(grow[ox]) * xrow[ox * g.stride];
              }
              acc[static_cast<std::size_t>((c * g.k + ky) * g.k + kx)] += s;
            }
          }
        }
      }
      T* dwo = dw + static_cast<long>(co) * taps;
      for (int t = 0; t < taps; ++t) dwo[t] += static_cast<T>(acc[static_cast<std::size_t>(t)]);
      db[co] += static_cast<T>(bias);
    }
  }
  if (dx == nullptr) return;
  // Input gradient: one thread per sample.
#pragma omp parallel for schedule(static) if (work > kParallelWork)
  for (int n = 0; n < g.batch; ++n) {
    T* dxn = dx + static_cast<long>(n) * g.in_ch * g.in_h * g.in_w;
    for (long i = 0; i < static_cast<long>(g.in_ch) * g.in_h * g.in_w; ++i) dxn[i] = T(0);
    for (int co = 0; co < g.out_ch; ++co) {
      const T* dyo = dy + (static_cast<long>(n) * g.out_ch + co) * oh * ow;
      for (int c = 0; c < g.in_ch; ++c) {
        T* dxc = dxn + static_cast<long>(c) * g.in_h * g.in_w;
        const T* wc = w + (static_cast<long>(co) * g.in_ch + c) * g.k * g.k;
        for (int ky = 0; ky < g.k; ++ky) {
          for (int kx = 0; kx < g.k; ++kx) {
            const T wv = wc[ky * g.k + kx];
            for (int oy = 0; oy < oh; ++oy) {
              T* xrow = dxc + static_cast<long>(oy * g.stride + ky) * g.in_w + kx;
              const T* grow = dyo + static_cast<long>(oy) * ow;
              for (int ox = 0; ox < ow; ++ox) xrow[ox * g.stride] += wv * grow[ox];
            }
          }
        }
      }
    }
  }
}

template <typename T>
void relu_forward(long n, const T* x, T* y) {
#pragma omp parallel for simd schedule(static) if (n > kParallelWork)
  for (long i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_backward(long n, const T* y, const T* dy, T* dx) {
#pragma omp parallel for simd schedule(static) if (n > kParallelWork)
  for (long i = 0; i < n; ++i) dx[i] = y[i] > T(0) ? dy[i] : T(0);
}

#define TILERL_INSTANTIATE(T)                                                                       \
  template void dense_forward<T>(int, int, int, const T*, const T*, const T*, T*);                  \
  template void dense_backward<T>(int, int, int, const T*, const T*, const T*, T*, T*, T*);         \
  template void conv2d_forward<T>(const ConvGeom&, const T*, const T*, const T*, T*);               \
  template void conv2d_backward<T>(const ConvGeom&, const T*, const T*, const T*, T*, T*, T*);      \
  template void relu_forward<T>(long, const T*, T*);                                                \
  template void relu_backward<T>(long, const T*, const T*, T*);

TILERL_INSTANTIATE(float)
TILERL_INSTANTIATE(double)

}  // namespace tilerl::nn::kernels::omp
