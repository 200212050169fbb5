#include "tilerl/nn/network.hpp"

#include <json.hpp>

#include "tilerl/nn/kernels.hpp"

namespace tilerl::nn {

namespace {

std::string layer_error(std::size_t index, const std::string& what) {
  return "layer " + std::to_string(index) + ": " + what;
}

const char* kind_name(LayerKind k) {
  switch (k) {
    case LayerKind::Conv: return "conv";
    case LayerKind::Dense: return "dense";
    case LayerKind::Relu: return "relu";
  }
  return "?";
}

LayerKind parse_kind(const std::string& s) {
  if (s == "conv") return LayerKind::Conv;
  if (s == "dense") return LayerKind::Dense;
  if (s == "relu") return LayerKind::Relu;
  throw ValidationError("unknown layer kind '" + s + "'");
}

int product(const std::vector<int>& s) {
  int n = 1;
  for (int d : s) n *= d;
  return n;
}

}  // namespace

int NetworkSpec::input_size() const { return product(input_shape); }

NetworkSpec NetworkSpec::nature_cnn(int logits, bool value_head, int hidden_width) {
  NetworkSpec s;
  s.input_shape = {1, 84, 84};
  s.layers = {LayerSpec::conv(32, 8, 4), LayerSpec::relu(), LayerSpec::conv(64, 4, 2), LayerSpec::relu(),
              LayerSpec::conv(64, 3, 1), LayerSpec::relu(), LayerSpec::dense(hidden_width), LayerSpec::relu()};
  s.logits = logits;
  s.value_head = value_head;
  s.hidden_width = hidden_width;
  return s;
}

NetworkSpec NetworkSpec::mlp(int inputs, const std::vector<int>& widths, int logits, bool value_head) {
  NetworkSpec s;
  s.input_shape = {inputs};
  for (int w : widths) {
    s.layers.push_back(LayerSpec::dense(w));
    s.layers.push_back(LayerSpec::relu());
  }
  s.logits = logits;
  s.value_head = value_head;
  if (!widths.empty()) s.hidden_width = widths.back();
  return s;
}

std::string NetworkSpec::to_json() const {
  nlohmann::json j;
  j["input_shape"] = input_shape;
  j["layers"] = nlohmann::json::array();
  for (const auto& l : layers) {
    j["layers"].push_back({{"kind", kind_name(l.kind)}, {"out", l.out}, {"kernel", l.kernel}, {"stride", l.stride}});
  }
  j["logits"] = logits;
  j["value_head"] = value_head;
  j["hidden_width"] = hidden_width;
  return j.dump();
}

NetworkSpec NetworkSpec::from_json(const std::string& text) {
  try {
    auto j = nlohmann::json::parse(text);
    NetworkSpec s;
    s.input_shape = j.at("input_shape").get<std::vector<int>>();
    for (const auto& l : j.at("layers")) {
      s.layers.push_back({parse_kind(l.at("kind").get<std::string>()), l.at("out").get<int>(), l.at("kernel").get<int>(),
                          l.at("stride").get<int>()});
    }
    s.logits = j.at("logits").get<int>();
    s.value_head = j.at("value_head").get<bool>();
    s.hidden_width = j.at("hidden_width").get<int>();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("bad network spec: ") + e.what());
  }
}

template <typename T>
Network<T>::Network(NetworkSpec spec) : spec_(std::move(spec)) {
  if (spec_.input_shape.size() != 1 && spec_.input_shape.size() != 3) {
    throw ValidationError("input shape must be {features} or {channels, height, width}");
  }
  for (int d : spec_.input_shape) {
    if (d <= 0) throw ValidationError("input dimensions must be positive");
  }
  if (spec_.logits < 0) throw ValidationError("negative logits width");
  if (spec_.output_size() == 0) throw ValidationError("network has no heads");

  auto add_param = [&](const std::string& name, std::vector<int> shape) {
    params_.push_back({name, BasicTensor<T>(std::move(shape))});
    return static_cast<int>(params_.size()) - 1;
  };

  std::vector<int> shape = spec_.input_shape;
  for (std::size_t i = 0; i < spec_.layers.size(); ++i) {
    const auto& l = spec_.layers[i];
    Stage st{l.kind, shape, {}, -1, l.kernel, l.stride};
    const std::string prefix = "trunk." + std::to_string(i) + ".";
    switch (l.kind) {
      case LayerKind::Conv: {
        if (shape.size() != 3) throw ValidationError(layer_error(i, "conv needs a {C,H,W} input"));
        if (l.out <= 0 || l.kernel <= 0 || l.stride <= 0) throw ValidationError(layer_error(i, "conv sizes must be positive"));
        if (l.kernel > shape[1] || l.kernel > shape[2]) throw ValidationError(layer_error(i, "kernel larger than input"));
        const int oh = (shape[1] - l.kernel) / l.stride + 1;
        const int ow = (shape[2] - l.kernel) / l.stride + 1;
        st.weight = add_param(prefix + "weight", {l.out, shape[0], l.kernel, l.kernel});
        add_param(prefix + "bias", {l.out});
        shape = {l.out, oh, ow};
        break;
      }
      case LayerKind::Dense: {
        if (l.out <= 0) throw ValidationError(layer_error(i, "dense width must be positive"));
        st.weight = add_param(prefix + "weight", {l.out, product(shape)});
        add_param(prefix + "bias", {l.out});
        shape = {l.out};
        break;
      }
      case LayerKind::Relu:
        break;
    }
    st.out_shape = shape;
    stages_.push_back(std::move(st));
  }
  feature_size_ = product(shape);
  if (spec_.logits > 0) {
    logits_param_ = add_param("logits.weight", {spec_.logits, feature_size_});
    add_param("logits.bias", {spec_.logits});
  }
  if (spec_.value_head) {
    value_param_ = add_param("value.weight", {1, feature_size_});
    add_param("value.bias", {1});
  }
}

template <typename T>
std::size_t Network<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.value.size();
  return n;
}

template <typename T>
Gradients<T> Network<T>::zero_gradients() const {
  Gradients<T> g;
  g.reserve(params_.size());
  for (const auto& p : params_) g.emplace_back(p.value.shape);
  return g;
}

template <typename T>
BasicTensor<T> Network<T>::forward(const BasicTensor<T>& batch, Tape<T>* tape) const {
  if (batch.shape.size() != spec_.input_shape.size() + 1 ||
      !std::equal(spec_.input_shape.begin(), spec_.input_shape.end(), batch.shape.begin() + 1)) {
    throw ValidationError(layer_error(0, "input shape " + batch.shape_string() + " does not match the spec"));
  }
  const int B = batch.shape[0];
  std::vector<BasicTensor<T>> acts;
  acts.reserve(stages_.size() + 1);
  acts.push_back(batch);
  for (const auto& st : stages_) {
    const BasicTensor<T>& x = acts.back();
    std::vector<int> out_shape{B};
    out_shape.insert(out_shape.end(), st.out_shape.begin(), st.out_shape.end());
    BasicTensor<T> y(out_shape);
    switch (st.kind) {
      case LayerKind::Conv: {
        const kernels::ConvGeom g{B, st.in_shape[0], st.in_shape[1], st.in_shape[2], st.out_shape[0], st.kernel, st.stride};
        const T* w = params_[st.weight].value.data.data();
        const T* b = params_[st.weight + 1].value.data.data();
        if (reference_) kernels::serial::conv2d_forward(g, x.data.data(), w, b, y.data.data());
        else kernels::omp::conv2d_forward(g, x.data.data(), w, b, y.data.data());
        break;
      }
      case LayerKind::Dense: {
        const int in = product(st.in_shape);
        const int out = st.out_shape[0];
        const T* w = params_[st.weight].value.data.data();
        const T* b = params_[st.weight + 1].value.data.data();
        if (reference_) kernels::serial::dense_forward(B, in, out, x.data.data(), w, b, y.data.data());
        else kernels::omp::dense_forward(B, in, out, x.data.data(), w, b, y.data.data());
        break;
      }
      case LayerKind::Relu: {
        const long n = static_cast<long>(x.size());
        if (reference_) kernels::serial::relu_forward(n, x.data.data(), y.data.data());
        else kernels::omp::relu_forward(n, x.data.data(), y.data.data());
        break;
      }
    }
    acts.push_back(std::move(y));
  }

  const BasicTensor<T>& feat = acts.back();
  const int outputs = spec_.output_size();
  BasicTensor<T> out({B, outputs});
  auto head = [&](int param, int width, int offset) {
    BasicTensor<T> h({B, width});
    const T* w = params_[param].value.data.data();
    const T* b = params_[param + 1].value.data.data();
    if (reference_) kernels::serial::dense_forward(B, feature_size_, width, feat.data.data(), w, b, h.data.data());
    else kernels::omp::dense_forward(B, feature_size_, width, feat.data.data(), w, b, h.data.data());
    for (int r = 0; r < B; ++r)
      for (int c = 0; c < width; ++c) out.data[static_cast<std::size_t>(r * outputs + offset + c)] = h.data[static_cast<std::size_t>(r * width + c)];
  };
  if (logits_param_ >= 0) head(logits_param_, spec_.logits, 0);
  if (value_param_ >= 0) head(value_param_, 1, spec_.logits);

  if (tape != nullptr) {
    tape->owner_ = this;
    tape->version_ = version_;
    tape->consumed_ = false;
    tape->batch_ = B;
    tape->acts = std::move(acts);
  }
  return out;
}

template <typename T>
Gradients<T> Network<T>::backward(Tape<T>& tape, const BasicTensor<T>& upstream, BasicTensor<T>* input_grad) const {
  if (tape.owner_ != this) throw ContractError("tape was recorded by a different network");
  if (tape.consumed_) throw ContractError("tape already consumed by a backward pass");
  if (tape.version_ != version_) throw ContractError("parameters changed since this tape was recorded");
  const int B = tape.batch_;
  const int outputs = spec_.output_size();
  if (upstream.shape != std::vector<int>{B, outputs}) {
    throw ValidationError("upstream gradient shape " + upstream.shape_string() + " does not match outputs");
  }
  tape.consumed_ = true;

  Gradients<T> grads = zero_gradients();
  const BasicTensor<T>& feat = tape.acts.back();
  BasicTensor<T> dfeat(feat.shape);
  auto head = [&](int param, int width, int offset) {
    BasicTensor<T> dh({B, width});
    for (int r = 0; r < B; ++r)
      for (int c = 0; c < width; ++c) dh.data[static_cast<std::size_t>(r * width + c)] = upstream.data[static_cast<std::size_t>(r * outputs + offset + c)];
    BasicTensor<T> dx(feat.shape);
    const T* w = params_[param].value.data.data();
    T* dw = grads[static_cast<std::size_t>(param)].data.data();
    T* db = grads[static_cast<std::size_t>(param) + 1].data.data();
    if (reference_) kernels::serial::dense_backward(B, feature_size_, width, feat.data.data(), w, dh.data.data(), dx.data.data(), dw, db);
    else kernels::omp::dense_backward(B, feature_size_, width, feat.data.data(), w, dh.data.data(), dx.data.data(), dw, db);
    for (std::size_t i = 0; i < dx.size(); ++i) dfeat.data[i] += dx.data[i];
  };
  if (logits_param_ >= 0) head(logits_param_, spec_.logits, 0);
  if (value_param_ >= 0) head(value_param_, 1, spec_.logits);

  BasicTensor<T> dy = std::move(dfeat);
  for (std::size_t i = stages_.size(); i-- > 0;) {
    const auto& st = stages_[i];
    const BasicTensor<T>& x = tape.acts[i];
    const BasicTensor<T>& y = tape.acts[i + 1];
    const bool need_dx = i > 0 || input_grad != nullptr;
    BasicTensor<T> dx(x.shape);
    T* dxp = need_dx ? dx.data.data() : nullptr;
    switch (st.kind) {
      case LayerKind::Conv: {
        const kernels::ConvGeom g{B, st.in_shape[0], st.in_shape[1], st.in_shape[2], st.out_shape[0], st.kernel, st.stride};
        const T* w = params_[st.weight].value.data.data();
        T* dw = grads[static_cast<std::size_t>(st.weight)].data.data();
        T* db = grads[static_cast<std::size_t>(st.weight) + 1].data.data();
        if (reference_) kernels::serial::conv2d_backward(g, x.data.data(), w, dy.data.data(), dxp, dw, db);
        else kernels::omp::conv2d_backward(g, x.data.data(), w, dy.data.data(), dxp, dw, db);
        break;
      }
      case LayerKind::Dense: {
        const int in = product(st.in_shape);
        const int out = st.out_shape[0];
        const T* w = params_[st.weight].value.data.data();
        T* dw = grads[static_cast<std::size_t>(st.weight)].data.data();
        T* db = grads[static_cast<std::size_t>(st.weight) + 1].data.data();
        if (reference_) kernels::serial::dense_backward(B, in, out, x.data.data(), w, dy.data.data(), dxp, dw, db);
        else kernels::omp::dense_backward(B, in, out, x.data.data(), w, dy.data.data(), dxp, dw, db);
        break;
      }
      case LayerKind::Relu: {
        const long n = static_cast<long>(y.size());
        if (reference_) kernels::serial::relu_backward(n, y.data.data(), dy.data.data(), dx.data.data());
        else kernels::omp::relu_backward(n, y.data.data(), dy.data.data(), dx.data.data());
        break;
      }
    }
    dy = std::move(dx);
  }
  if (input_grad != nullptr) *input_grad = std::move(dy);
  return grads;
}

template class Network<float>;
template class Network<double>;

}  // namespace tilerl::nn
