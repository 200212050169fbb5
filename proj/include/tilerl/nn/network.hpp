#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "tilerl/nn/tensor.hpp"

namespace tilerl::nn {

enum class LayerKind { Conv, Dense, Relu };

struct LayerSpec {
  LayerKind kind = LayerKind::Dense;
  int out = 0;  // channels (conv) or width (dense)
  int kernel = 0;
  int stride = 1;

  static LayerSpec conv(int out_channels, int kernel, int stride) { return {LayerKind::Conv, out_channels, kernel, stride}; }
  static LayerSpec dense(int width) { return {LayerKind::Dense, width, 0, 1}; }
  static LayerSpec relu() { return {LayerKind::Relu, 0, 0, 1}; }
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// A trunk of layers followed by up to two linear heads read from the trunk's
// final features. Output rows are [logits..., value].
struct NetworkSpec {
  std::vector<int> input_shape;  // {features} or {channels, height, width}
  std::vector<LayerSpec> layers;
  int logits = 0;  // policy head width; 0 for none
  bool value_head = false;
  int hidden_width = 512;

  [[nodiscard]] int output_size() const { return logits + (value_head ? 1 : 0); }
  [[nodiscard]] int input_size() const;

  // Three-conv stack over 1x84x84 frames then one hidden layer.
  static NetworkSpec nature_cnn(int logits, bool value_head, int hidden_width = 512);
  // Dense stack with a ReLU after every hidden layer.
  static NetworkSpec mlp(int inputs, const std::vector<int>& widths, int logits, bool value_head);

  [[nodiscard]] std::string to_json() const;
  static NetworkSpec from_json(const std::string& text);

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

template <typename T>
struct ParamBlock {
  std::string name;
  BasicTensor<T> value;
};

template <typename T>
using Gradients = std::vector<BasicTensor<T>>;

template <typename T>
class Network;

// Activations recorded by forward. A tape is valid for exactly one backward
// call and only while the parameters it saw are unchanged.
template <typename T>
class Tape {
 public:
  [[nodiscard]] bool consumed() const { return consumed_; }
  [[nodiscard]] int batch() const { return batch_; }

 private:
  friend class Network<T>;
  const void* owner_ = nullptr;
  std::uint64_t version_ = 0;
  bool consumed_ = false;
  int batch_ = 0;
  std::vector<BasicTensor<T>> acts;  // acts[0] is the input, acts[i+1] follows layer i
};

template <typename T>
class Network {
 public:
  explicit Network(NetworkSpec spec);

  [[nodiscard]] const NetworkSpec& spec() const { return spec_; }
  [[nodiscard]] const std::vector<ParamBlock<T>>& params() const { return params_; }
  // Mutable access invalidates every outstanding tape.
  std::vector<ParamBlock<T>>& mutable_params() {
    ++version_;
    return params_;
  }
  [[nodiscard]] std::uint64_t version() const { return version_; }
  [[nodiscard]] std::size_t parameter_count() const;

  // Serial reference kernels instead of the OpenMP ones.
  void use_reference_kernels(bool on) { reference_ = on; }

  // batch: (B, input_shape...). Returns (B, output_size).
  BasicTensor<T> forward(const BasicTensor<T>& batch, Tape<T>* tape = nullptr) const;
  // upstream: d(loss)/d(output), shape (B, output_size). Optionally returns
  // the input gradient as well.
  Gradients<T> backward(Tape<T>& tape, const BasicTensor<T>& upstream, BasicTensor<T>* input_grad = nullptr) const;

  [[nodiscard]] Gradients<T> zero_gradients() const;

  template <typename U>
  Network<U> cast() const {
    Network<U> out(spec_);
    auto& dst = out.mutable_params();
    for (std::size_t i = 0; i < params_.size(); ++i) dst[i].value = tensor_cast<U>(params_[i].value);
    return out;
  }

 private:
  struct Stage {
    LayerKind kind;
    std::vector<int> in_shape;  // per-sample
    std::vector<int> out_shape;
    int weight = -1;  // index into params_, bias is weight + 1
    int kernel = 0;
    int stride = 1;
  };

  NetworkSpec spec_;
  std::vector<Stage> stages_;
  int logits_param_ = -1;
  int value_param_ = -1;
  int feature_size_ = 0;
  std::vector<ParamBlock<T>> params_;
  std::uint64_t version_ = 1;
  bool reference_ = false;
};

}  // namespace tilerl::nn
