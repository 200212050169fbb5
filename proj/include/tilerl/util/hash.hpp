#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <string>
#include <string_view>
#include <type_traits>

namespace tilerl::util {

// 64-bit FNV-1a, used for state fingerprints and content versions.
class Fnv1a {
 public:
  void bytes(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
  }

  template <typename T>
    requires std::is_integral_v<T> || std::is_enum_v<T>
  void value(T v) {
    // Little-endian byte order regardless of host.
    auto u = static_cast<std::uint64_t>(v);
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      unsigned char c = static_cast<unsigned char>(u >> (8 * i));
      bytes(&c, 1);
    }
  }

  void text(std::string_view s) { bytes(s.data(), s.size()); }

  [[nodiscard]] std::uint64_t digest() const { return h_; }

  [[nodiscard]] std::string hex() const {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h_));
    return buf;
  }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

inline std::uint64_t fnv1a(std::string_view s) {
  Fnv1a h;
  h.text(s);
  return h.digest();
}

}  // namespace tilerl::util
