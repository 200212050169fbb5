#pragma once

#include <string>

#include "tilerl/kernel/observation.hpp"

namespace tilerl::protocol {

// 8-bit indexed PNG carrying the four-shade palette. Lossless.
std::string encode_png(const kernel::PixelFrame& frame);
// Accepts 8-bit indexed PNGs (any row filter, no interlace). Throws
// SchemaError for anything else or on CRC/zlib failures.
kernel::PixelFrame decode_png(const std::string& bytes);

}  // namespace tilerl::protocol
