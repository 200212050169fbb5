#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tilerl/kernel/world.hpp"

namespace tilerl::kernel {

inline constexpr int kScreenWidth = 160;
inline constexpr int kScreenHeight = 144;
inline constexpr int kScreenCols = kScreenWidth / kPixelsPerTile;   // 20
inline constexpr int kScreenRows = kScreenHeight / kPixelsPerTile;  // 18
inline constexpr int kDefaultUpsample = 8;

// Four-shade indexed frame (0 lightest .. 3 darkest).
struct PixelFrame {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major palette indices

  [[nodiscard]] std::uint8_t at(int x, int y) const {
    return pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)];
  }
  friend bool operator==(const PixelFrame&, const PixelFrame&) = default;
};

// RGB values of the four palette shades.
inline constexpr std::uint8_t kPalette[4][3] = {
    {224, 248, 208}, {136, 192, 112}, {52, 104, 86}, {8, 24, 32}};

// Left edge of the visible screen in pixels; follows the agent.
int camera_x(const WorldState& world);

// Nearest-neighbour upsampled frame of (160*f) x (144*f). f >= 1.
PixelFrame render(const WorldState& world, int upsample_factor = 1);
PixelFrame upsample(const PixelFrame& frame, int factor);
// Keeps every factor-th pixel; inverse of upsample.
PixelFrame downsample(const PixelFrame& frame, int factor);

enum class TileCode : std::uint8_t { Empty = 0, Solid = 1, Gap = 2, Pipe = 3, Platform = 4, Goal = 5 };
enum class EntityCode : std::uint8_t { None = 0, EnemyLeft = 1, EnemyRight = 2, EnemyIdle = 3 };

// Screen-aligned category grids (kScreenRows x kScreenCols) plus kinematics.
struct FeatureGrid {
  std::vector<std::uint8_t> tiles;     // TileCode
  std::vector<std::uint8_t> entities;  // EntityCode
  std::vector<std::uint8_t> agent;     // 1 where the agent's top-left cell is
  int camera_col = 0;
  float vx = 0.0F;  // tiles per frame
  float vy = 0.0F;
  bool on_ground = false;
  bool jump_held = false;

  friend bool operator==(const FeatureGrid&, const FeatureGrid&) = default;
};

struct Observation {
  PixelFrame pixels;  // 160 x 144
  FeatureGrid features;
  std::int64_t turn_index = 0;
};

FeatureGrid feature_grid(const WorldState& world);
Observation observe(const WorldState& world);

// Compact float encoding for the in-process policy/critic: an agent-centred
// window of occupancy channels plus kinematic scalars.
struct FeatureWindow {
  static constexpr int kBehind = 3;
  static constexpr int kAhead = 10;
  static constexpr int kCols = kBehind + 1 + kAhead;  // 14
  static constexpr int kAbove = 6;
  static constexpr int kBelow = 5;
  static constexpr int kRows = kAbove + 1 + kBelow;  // 12
  static constexpr int kChannels = 3;               // solid, pit, enemy
  static constexpr int kScalars = 6;
  static constexpr int kSize = kCols * kRows * kChannels + kScalars;
};

void encode_window(const WorldState& world, std::span<float> out);
std::vector<float> encode_window(const WorldState& world);

// 84x84 grayscale in [0, 1], nearest-neighbour from the 160x144 render.
inline constexpr int kPixelInputSide = 84;
void encode_pixels(const WorldState& world, std::span<float> out);

}  // namespace tilerl::kernel
