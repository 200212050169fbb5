#pragma once

// Raw layer kernels over row-major buffers. Each op has an OpenMP version
// (kernels::omp) and a plain serial reference (kernels::serial) kept for
// testing and benchmarking. The OpenMP versions give one owner per output
// element, so results do not depend on the thread count.
//
// Shapes:
//   dense:  x (B, in), W (out, in), b (out), y (B, out)
//   conv2d: x (B, C, H, W), K (Co, C, k, k), b (Co), y (B, Co, Ho, Wo),
//           valid padding, Ho = (H - k) / s + 1

namespace tilerl::nn::kernels {

struct ConvGeom {
  int batch, in_ch, in_h, in_w, out_ch, k, stride;
  [[nodiscard]] int out_h() const { return (in_h - k) / stride + 1; }
  [[nodiscard]] int out_w() const { return (in_w - k) / stride + 1; }
};

namespace serial {
template <typename T>
void dense_forward(int batch, int in, int out, const T* x, const T* w, const T* b, T* y);
// Accumulates into dw and db; dx (if non-null) is overwritten.
template <typename T>
void dense_backward(int batch, int in, int out, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db);
template <typename T>
void conv2d_forward(const ConvGeom& g, const T* x, const T* w, const T* b, T* y);
template <typename T>
void conv2d_backward(const ConvGeom& g, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db);
template <typename T>
void relu_forward(long n, const T* x, T* y);
// Gradient passes where the forward output was positive.
template <typename T>
void relu_backward(long n, const T* y, const T* dy, T* dx);
}  // namespace serial

namespace omp {
template <typename T>
void dense_forward(int batch, int in, int out, const T* x, const T* w, const T* b, T* y);
// Accumulates into dw and db; dx (if non-null) is overwritten.
template <typename T>
void dense_backward(int batch, int in, int out, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db);
template <typename T>
void conv2d_forward(const ConvGeom& g, const T* x, const T* w, const T* b, T* y);
template <typename T>
void conv2d_backward(const ConvGeom& g, const T* x, const T* w, const T* dy, T* dx, T* dw, T* db);
template <typename T>
void relu_forward(long n, const T* x, T* y);
// Gradient passes where the forward output was positive.
template <typename T>
void relu_backward(long n, const T* y, const T* dy, T* dx);
}  // namespace omp

}  // namespace tilerl::nn::kernels
