#include "tilerl/protocol/png.hpp"

#include <zlib.h>

#include <cstdlib>
#include <cstring>

#include "tilerl/error.hpp"

namespace tilerl::protocol {

namespace {

constexpr unsigned char kSignature[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v >> 24));
  out.push_back(static_cast<char>(v >> 16));
  out.push_back(static_cast<char>(v >> 8));
  out.push_back(static_cast<char>(v));
}

std::uint32_t get_u32(const std::string& s, std::size_t at) {
  if (at + 4 > s.size()) throw SchemaError("png: truncated");
  return (static_cast<std::uint32_t>(static_cast<unsigned char>(s[at])) << 24) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + 1])) << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + 2])) << 8) |
         static_cast<std::uint32_t>(static_cast<unsigned char>(s[at + 3]));
}

void chunk(std::string& out, const char type[4], const std::string& data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  std::string body(type, 4);
  body += data;
  out += body;
  put_u32(out, static_cast<std::uint32_t>(crc32(0L, reinterpret_cast<const Bytef*>(body.data()), static_cast<uInt>(body.size()))));
}

int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a);
  const int pb = std::abs(p - b);
  const int pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace

std::string encode_png(const kernel::PixelFrame& frame) {
  if (frame.width <= 0 || frame.height <= 0) throw ValidationError("png: zero-sized frame");
  if (frame.pixels.size() != static_cast<std::size_t>(frame.width) * static_cast<std::size_t>(frame.height)) {
    throw ValidationError("png: pixel buffer does not match dimensions");
  }
  std::string out(reinterpret_cast<const char*>(kSignature), sizeof kSignature);

  std::string ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(frame.width));
  put_u32(ihdr, static_cast<std::uint32_t>(frame.height));
  ihdr += std::string{8, 3, 0, 0, 0};  // depth 8, indexed colour, deflate, filter 0, no interlace
  chunk(out, "IHDR", ihdr);

  std::string plte;
  for (const auto& rgb : kernel::kPalette) plte.append(reinterpret_cast<const char*>(rgb), 3);
  chunk(out, "PLTE", plte);

  const std::size_t stride = static_cast<std::size_t>(frame.width) + 1;
  std::string raw(stride * static_cast<std::size_t>(frame.height), '\0');
  for (int y = 0; y < frame.height; ++y) {
    std::memcpy(raw.data() + static_cast<std::size_t>(y) * stride + 1,
                frame.pixels.data() + static_cast<std::size_t>(y) * static_cast<std::size_t>(frame.width),
                static_cast<std::size_t>(frame.width));
  }
  uLongf len = compressBound(static_cast<uLong>(raw.size()));
  std::string z(len, '\0');
  if (compress2(reinterpret_cast<Bytef*>(z.data()), &len, reinterpret_cast<const Bytef*>(raw.data()),
                static_cast<uLong>(raw.size()), Z_BEST_SPEED) != Z_OK) {
    throw Error("png: deflate failed");
  }
  z.resize(len);
  chunk(out, "IDAT", z);
  chunk(out, "IEND", "");
  return out;
}

kernel::PixelFrame decode_png(const std::string& bytes) {
  if (bytes.size() < sizeof kSignature || std::memcmp(bytes.data(), kSignature, sizeof kSignature) != 0) {
    throw SchemaError("png: bad signature");
  }
  std::size_t at = sizeof kSignature;
  int width = 0;
  int height = 0;
  int palette_size = 0;
  std::string idat;
  bool ended = false;
  while (!ended) {
    const std::uint32_t len = get_u32(bytes, at);
    if (at + 12 + len > bytes.size()) throw SchemaError("png: truncated chunk");
    const std::string type = bytes.substr(at + 4, 4);
    const std::string data = bytes.substr(at + 8, len);
    const std::uint32_t crc = get_u32(bytes, at + 8 + len);
    const auto expect = static_cast<std::uint32_t>(crc32(0L, reinterpret_cast<const Bytef*>(bytes.data() + at + 4), len + 4));
    if (crc != expect) throw SchemaError("png: CRC mismatch in " + type);
    at += 12 + len;
    if (type == "IHDR") {
      if (len != 13) throw SchemaError("png: bad IHDR");
      width = static_cast<int>(get_u32(data, 0));
      height = static_cast<int>(get_u32(data, 4));
      if (data[8] != 8 || data[9] != 3 || data[10] != 0 || data[11] != 0 || data[12] != 0) {
        throw SchemaError("png: only 8-bit indexed, non-interlaced images are supported");
      }
    } else if (type == "PLTE") {
      palette_size = static_cast<int>(len / 3);
    } else if (type == "IDAT") {
      idat += data;
    } else if (type == "IEND") {
      ended = true;
    }
  }
  if (width <= 0 || height <= 0) throw SchemaError("png: missing IHDR");
  const std::size_t stride = static_cast<std::size_t>(width) + 1;
  uLongf raw_len = static_cast<uLongf>(stride * static_cast<std::size_t>(height));
  std::string raw(raw_len, '\0');
  if (uncompress(reinterpret_cast<Bytef*>(raw.data()), &raw_len, reinterpret_cast<const Bytef*>(idat.data()),
                 static_cast<uLong>(idat.size())) != Z_OK ||
      raw_len != raw.size()) {
    throw SchemaError("png: inflate failed");
  }
  kernel::PixelFrame f;
  f.width = width;
  f.height = height;
  f.pixels.resize(static_cast<std::size_t>(width) * static_cast<std::size_t>(height));
  std::vector<int> prev(static_cast<std::size_t>(width), 0);
  std::vector<int> cur(static_cast<std::size_t>(width), 0);
  for (int y = 0; y < height; ++y) {
    const auto* row = reinterpret_cast<const unsigned char*>(raw.data() + static_cast<std::size_t>(y) * stride);
    const int filter = row[0];
    for (int x = 0; x < width; ++x) {
      const int v = row[x + 1];
      const int left = x > 0 ? cur[static_cast<std::size_t>(x) - 1] : 0;
      const int up = prev[static_cast<std::size_t>(x)];
      const int ul = x > 0 ? prev[static_cast<std::size_t>(x) - 1] : 0;
      int out = 0;
      switch (filter) {
        case 0: out = v; break;
        case 1: out = v + left; break;
        case 2: out = v + up; break;
        case 3: out = v + (left + up) / 2; break;
        case 4: out = v + paeth(left, up, ul); break;
        default: throw SchemaError("png: unknown row filter");
      }
      cur[static_cast<std::size_t>(x)] = out & 0xFF;
    }
    for (int x = 0; x < width; ++x) {
      const int idx = cur[static_cast<std::size_t>(x)];
      if (palette_size > 0 && idx >= palette_size) throw SchemaError("png: palette index out of range");
      f.pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)] = static_cast<std::uint8_t>(idx);
    }
    std::swap(prev, cur);
  }
  return f;
}

}  // namespace tilerl::protocol
