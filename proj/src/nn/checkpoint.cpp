#include "tilerl/nn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

namespace tilerl::nn {

namespace {

constexpr char kMagic[8] = {'T', 'L', 'R', 'L', 'C', 'K', 'P', 'T'};

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void raw(const char* p, std::size_t n) { out_.append(p, n); }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(s_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint32_t n = u32();
    need(n);
    std::string out = s_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  void expect(const char* p, std::size_t n) {
    need(n);
    if (std::memcmp(s_.data() + pos_, p, n) != 0) throw SchemaError("checkpoint: bad magic");
    pos_ += n;
  }
  [[nodiscard]] bool done() const { return pos_ == s_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > s_.size()) throw SchemaError("checkpoint: truncated");
  }
  const std::string& s_;
  std::size_t pos_ = 0;
};

}  // namespace

const CheckpointEntry& Checkpoint::get(const std::string& name) const {
  for (const auto& e : entries) {
    if (e.name == name) return e;
  }
  throw NotFoundError("checkpoint has no entry '" + name + "'");
}

std::string encode_checkpoint(const Checkpoint& ckpt) {
  Writer w;
  w.raw(kMagic, sizeof kMagic);
  w.u32(kCheckpointVersion);
  w.str(ckpt.metadata_json);
  w.u32(static_cast<std::uint32_t>(ckpt.entries.size()));
  for (const auto& e : ckpt.entries) {
    w.str(e.name);
    w.str(e.net.spec().to_json());
    const auto& params = e.net.params();
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
      w.str(p.name);
      w.u32(static_cast<std::uint32_t>(p.value.shape.size()));
      for (int d : p.value.shape) w.u32(static_cast<std::uint32_t>(d));
      for (float v : p.value.data) w.f32(v);
    }
    w.u8(e.optimizer ? 1 : 0);
    if (e.optimizer) {
      const auto& o = *e.optimizer;
      w.u64(static_cast<std::uint64_t>(o.step));
      w.f64(o.config.lr);
      w.f64(o.config.beta1);
      w.f64(o.config.beta2);
      w.f64(o.config.eps);
      w.f64(o.config.clip_norm);
      for (std::size_t b = 0; b < params.size(); ++b) {
        for (float v : o.m[b].data) w.f32(v);
        for (float v : o.v[b].data) w.f32(v);
      }
    }
  }
  return w.take();
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  r.expect(kMagic, sizeof kMagic);
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw SchemaError("checkpoint version " + std::to_string(version) + ", expected " + std::to_string(kCheckpointVersion));
  }
  Checkpoint ckpt;
  ckpt.metadata_json = r.str();
  const std::uint32_t n = r.u32();
  for (std::uint32_t k = 0; k < n; ++k) {
    std::string name = r.str();
    Network<float> net(NetworkSpec::from_json(r.str()));
    auto& params = net.mutable_params();
    if (r.u32() != params.size()) throw SchemaError("checkpoint: block count does not match spec for '" + name + "'");
    for (auto& p : params) {
      if (r.str() != p.name) throw SchemaError("checkpoint: unexpected block name in '" + name + "'");
      std::vector<int> shape(r.u32());
      for (int& d : shape) d = static_cast<int>(r.u32());
      if (shape != p.value.shape) throw SchemaError("checkpoint: shape mismatch for block '" + p.name + "'");
      for (float& v : p.value.data) v = r.f32();
    }
    std::optional<OptimizerState> opt;
    if (r.u8() != 0) {
      OptimizerState o;
      o.step = static_cast<std::int64_t>(r.u64());
      o.config.lr = r.f64();
      o.config.beta1 = r.f64();
      o.config.beta2 = r.f64();
      o.config.eps = r.f64();
      o.config.clip_norm = r.f64();
      for (const auto& p : params) {
        Tensor m(p.value.shape);
        Tensor v(p.value.shape);
        for (float& x : m.data) x = r.f32();
        for (float& x : v.data) x = r.f32();
        o.m.push_back(std::move(m));
        o.v.push_back(std::move(v));
      }
      opt = std::move(o);
    }
    ckpt.entries.push_back({std::move(name), std::move(net), std::move(opt)});
  }
  if (!r.done()) throw SchemaError("checkpoint: trailing bytes");
  return ckpt;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const std::string bytes = encode_checkpoint(ckpt);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw Error("cannot write " + tmp.string());
    f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!f) throw Error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw NotFoundError("cannot open checkpoint " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return decode_checkpoint(ss.str());
}

}  // namespace tilerl::nn
