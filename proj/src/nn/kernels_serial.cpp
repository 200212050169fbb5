// Straightforward loop nests. These are the reference the OpenMP kernels are
// checked against, so they favour obviousness over speed.
#include "tilerl/nn/kernels.hpp"

namespace tilerl::nn::kernels::serial {

template <typename T>
void dense_forward(int batch, int in, int out, const T* x, const T* w, const T* b, T* y) {
  for (int r = 0; r < batch; ++r) {
    for (int o = 0; o < out; ++o) {
      T acc = b[o];
      for (int i = 0; i < in; ++i) acc += w[o * in + i] * x[r * in + i];
      y[r * out + o] = acc;
    }
  }
}

template <typename T>
void dense_backward(int batch, int in, int out, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db) {
  if (dx != nullptr) {
    for (int i = 0; i < batch * in; ++i) dx[i] = T(0);
  }
  for (int r = 0; r < batch; ++r) {
    for (int o = 0; o < out; ++o) {
      const T g = dy[r * out + o];
      db[o] += g;
      for (int i = 0; i < in; ++i) {
        dw[o * in + i] += g * x[r * in + i];
        if (dx != nullptr) dx[r * in + i] += g * w[o * in + i];
      }
    }
  }
}

template <typename T>
void conv2d_forward(const ConvGeom& g, const T* x, const T* w, const T* b, T* y) {
  const int oh = g.out_h();
  const int ow = g.out_w();
  for (int n = 0; n < g.batch; ++n)
    for (int co = 0; co < g.out_ch; ++co)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          T acc = b[co];
          for (int c = 0; c < g.in_ch; ++c)
            for (int ky = 0; ky < g.k; ++ky)
              for (int kx = 0; kx < g.k; ++kx) {
                const int iy = oy * g.stride + ky;
                const int ix = ox * g.stride + kx;
                acc += w[((co * g.in_ch + c) * g.k + ky) * g.k + kx] *
                       x[((n * g.in_ch + c) * g.in_h + iy) * g.in_w + ix];
              }
          y[((n * g.out_ch + co) * oh + oy) * ow + ox] = acc;
        }
}

template <typename T>
void conv2d_backward(const ConvGeom& g, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db) {
  const int oh = g.out_h();
  const int ow = g.out_w();
  if (dx != nullptr) {
    const long n_in = static_cast<long>(g.batch) * g.in_ch * g.in_h * g.in_w;
    for (long i = 0; i < n_in; ++i) dx[i] = T(0);
  }
  for (int n = 0; n < g.batch; ++n)
    for (int co = 0; co < g.out_ch; ++co)
      for (int oy = 0; oy < oh; ++oy)
        for (int ox = 0; ox < ow; ++ox) {
          const T gy = dy[((n * g.out_ch + co) * oh + oy) * ow + ox];
          db[co] += gy;
          for (int c = 0; c < g.in_ch; ++c)
            for (int ky = 0; ky < g.k; ++ky)
              for (int kx = 0; kx < g.k; ++kx) {
                const int xi = ((n * g.in_ch + c) * g.in_h + oy * g.stride + ky) * g.in_w + ox * g.stride + kx;
                const int wi = ((co * g.in_ch + c) * g.k + ky) * g.k + kx;
                dw[wi] += gy * x[xi];
                if (dx != nullptr) dx[xi] += gy * w[wi];
              }
        }
}

template <typename T>
void relu_forward(long n, const T* x, T* y) {
  for (long i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
}

template <typename T>
void relu_backward(long n, const T* y, const T* dy, T* dx) {
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

}  // namespace tilerl::nn::kernels::serial
