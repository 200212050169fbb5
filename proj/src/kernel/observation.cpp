#include "tilerl/kernel/observation.hpp"

#include <algorithm>

#include "tilerl/error.hpp"

namespace tilerl::kernel {

namespace {

std::uint8_t tile_pixel(TileKind kind, int px, int py) {
  switch (kind) {
    case TileKind::Empty:
      return 0;
    case TileKind::Solid:
      return (px == 0 || py == 0) ? 3 : 2;
    case TileKind::Gap:
      return ((px + py) % 4 == 0) ? 1 : 0;
    case TileKind::Pipe:
      return (px == 0 || px == 7 || py == 0) ? 3 : 1;
    case TileKind::Platform:
      return py < 3 ? 2 : 0;
    case TileKind::Goal:
      return (px == 3 || px == 4) ? 3 : 0;
  }
  return 0;
}

// 6x8 sprites, one row per string.
constexpr const char* kAgentSprite[8] = {"..33..", ".3333.", "331133", "333333",
                                         ".3333.", "333333", "3.33.3", "33..33"};
constexpr const char* kEnemySprite[8] = {"......", ".2222.", "233332", "213312",
                                         "222222", ".2222.", "22..22", "33..33"};

void blit(PixelFrame& f, const char* const* sprite, int x0, int y0) {
  for (int y = 0; y < 8; ++y) {
    for (int x = 0; x < 6; ++x) {
      char c = sprite[y][x];
      if (c == '.') continue;
      int fx = x0 + x, fy = y0 + y;
      if (fx < 0 || fx >= f.width || fy < 0 || fy >= f.height) continue;
      f.pixels[static_cast<std::size_t>(fy) * static_cast<std::size_t>(f.width) + static_cast<std::size_t>(fx)] =
          static_cast<std::uint8_t>(c - '0');
    }
  }
}

constexpr std::int32_t floor_div(std::int32_t a, std::int32_t b) {
  return a >= 0 ? a / b : -((-a + b - 1) / b);
}

TileCode code_of(TileKind kind) {
  switch (kind) {
    case TileKind::Empty:
      return TileCode::Empty;
    case TileKind::Solid:
      return TileCode::Solid;
    case TileKind::Gap:
      return TileCode::Gap;
    case TileKind::Pipe:
      return TileCode::Pipe;
    case TileKind::Platform:
      return TileCode::Platform;
    case TileKind::Goal:
      return TileCode::Goal;
  }
  return TileCode::Empty;
}

}  // namespace

int camera_x(const WorldState& world) {
  const int level_px = world.level->width * kPixelsPerTile;
  const int agent_px = world.agent_x / kSubPerPixel;
  return std::clamp(agent_px - 64, 0, std::max(0, level_px - kScreenWidth));
}

PixelFrame render(const WorldState& world, int upsample_factor) {
  if (upsample_factor < 1) throw ValidationError("upsample factor must be >= 1");
  const LevelSpec& lvl = *world.level;
  PixelFrame f{kScreenWidth, kScreenHeight,
               std::vector<std::uint8_t>(static_cast<std::size_t>(kScreenWidth) * kScreenHeight, 0)};
  const int cam = camera_x(world);
  for (int y = 0; y < kScreenHeight; ++y) {
    const int row = y / kPixelsPerTile;
    for (int x = 0; x < kScreenWidth; ++x) {
      const int wx = cam + x;
      f.pixels[static_cast<std::size_t>(y) * kScreenWidth + static_cast<std::size_t>(x)] =
          tile_pixel(lvl.at(wx / kPixelsPerTile, row), wx % kPixelsPerTile, y % kPixelsPerTile);
    }
  }
  for (const auto& e : world.entities) {
    if (e.alive) blit(f, kEnemySprite, e.x / kSubPerPixel - cam, floor_div(e.y, kSubPerPixel));
  }
  if (world.alive) blit(f, kAgentSprite, world.agent_x / kSubPerPixel - cam, floor_div(world.agent_y, kSubPerPixel));
  return upsample_factor == 1 ? f : upsample(f, upsample_factor);
}

PixelFrame upsample(const PixelFrame& frame, int factor) {
  if (factor < 1) throw ValidationError("upsample factor must be >= 1");
  PixelFrame out{frame.width * factor, frame.height * factor, {}};
  out.pixels.resize(static_cast<std::size_t>(out.width) * static_cast<std::size_t>(out.height));
  for (int y = 0; y < out.height; ++y) {
    const std::uint8_t* src = &frame.pixels[static_cast<std::size_t>(y / factor) * static_cast<std::size_t>(frame.width)];
    std::uint8_t* dst = &out.pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(out.width)];
    for (int x = 0; x < out.width; ++x) dst[x] = src[x / factor];
  }
  return out;
}

PixelFrame downsample(const PixelFrame& frame, int factor) {
  if (factor < 1 || frame.width % factor != 0 || frame.height % factor != 0) {
    throw ValidationError("downsample factor must divide the frame size");
  }
  PixelFrame out{frame.width / factor, frame.height / factor, {}};
  out.pixels.resize(static_cast<std::size_t>(out.width) * static_cast<std::size_t>(out.height));
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      out.pixels[static_cast<std::size_t>(y) * static_cast<std::size_t>(out.width) + static_cast<std::size_t>(x)] =
          frame.at(x * factor, y * factor);
    }
  }
  return out;
}

FeatureGrid feature_grid(const WorldState& world) {
  const LevelSpec& lvl = *world.level;
  FeatureGrid g;
  constexpr std::size_t n = static_cast<std::size_t>(kScreenCols) * kScreenRows;
  g.tiles.assign(n, 0);
  g.entities.assign(n, 0);
  g.agent.assign(n, 0);
  g.camera_col = camera_x(world) / kPixelsPerTile;
  for (int r = 0; r < kScreenRows; ++r) {
    for (int c = 0; c < kScreenCols; ++c) {
      g.tiles[static_cast<std::size_t>(r * kScreenCols + c)] =
          static_cast<std::uint8_t>(code_of(lvl.at(g.camera_col + c, r)));
    }
  }
  auto mark = [&](std::vector<std::uint8_t>& grid, std::int32_t x, std::int32_t y, std::uint8_t value) {
    const int c = floor_div(x, kSubPerTile) - g.camera_col;
    const int r = floor_div(y, kSubPerTile);
    if (c >= 0 && c < kScreenCols && r >= 0 && r < kScreenRows) grid[static_cast<std::size_t>(r * kScreenCols + c)] = value;
  };
  for (const auto& e : world.entities) {
    if (!e.alive) continue;
    EntityCode code = e.vx < 0 ? EntityCode::EnemyLeft : e.vx > 0 ? EntityCode::EnemyRight : EntityCode::EnemyIdle;
    mark(g.entities, e.x + physics::kEnemyWidth / 2, e.y + physics::kEnemyHeight / 2, static_cast<std::uint8_t>(code));
  }
  if (world.alive) mark(g.agent, world.agent_x, world.agent_y, 1);
  g.vx = static_cast<float>(world.agent_vx) / kSubPerTile;
  g.vy = static_cast<float>(world.agent_vy) / kSubPerTile;
  g.on_ground = world.on_ground;
  g.jump_held = world.jump_held;
  return g;
}

Observation observe(const WorldState& world) {
  return Observation{render(world, 1), feature_grid(world), world.turn_count};
}

void encode_window(const WorldState& world, std::span<float> out) {
  using W = FeatureWindow;
  if (out.size() != static_cast<std::size_t>(W::kSize)) throw ValidationError("feature window buffer has wrong size");
  std::fill(out.begin(), out.end(), 0.0F);
  const LevelSpec& lvl = *world.level;
  const std::int32_t cx = world.agent_x + physics::kAgentWidth / 2;
  const std::int32_t cy = world.agent_y + physics::kAgentHeight / 2;
  const int col0 = floor_div(cx, kSubPerTile) - W::kBehind;
  const int row0 = floor_div(cy, kSubPerTile) - W::kAbove;
  constexpr int plane = W::kCols * W::kRows;
  for (int r = 0; r < W::kRows; ++r) {
    for (int c = 0; c < W::kCols; ++c) {
      const TileKind t = lvl.at(col0 + c, row0 + r);
      const int idx = r * W::kCols + c;
      if (is_solid(t)) {
        out[static_cast<std::size_t>(idx)] = 1.0F;
      } else if (t == TileKind::Platform) {
        out[static_cast<std::size_t>(idx)] = 0.5F;
      } else if (t == TileKind::Gap) {
        out[static_cast<std::size_t>(plane + idx)] = 1.0F;
      }
    }
  }
  for (const auto& e : world.entities) {
    if (!e.alive) continue;
    const int c = floor_div(e.x + physics::kEnemyWidth / 2, kSubPerTile) - col0;
    const int r = floor_div(e.y + physics::kEnemyHeight / 2, kSubPerTile) - row0;
    if (c >= 0 && c < W::kCols && r >= 0 && r < W::kRows) {
      out[static_cast<std::size_t>(2 * plane + r * W::kCols + c)] = e.vx < 0 ? 1.0F : e.vx > 0 ? -1.0F : 0.5F;
    }
  }
  float* s = out.data() + 3 * plane;
  s[0] = static_cast<float>(world.agent_vx) / physics::kRunSpeed;
  s[1] = static_cast<float>(world.agent_vy) / physics::kJumpImpulse;
  s[2] = world.on_ground ? 1.0F : 0.0F;
  s[3] = world.jump_held ? 1.0F : 0.0F;
  s[4] = static_cast<float>(cx - floor_div(cx, kSubPerTile) * kSubPerTile) / kSubPerTile;
  s[5] = static_cast<float>(cy - floor_div(cy, kSubPerTile) * kSubPerTile) / kSubPerTile;
}

std::vector<float> encode_window(const WorldState& world) {
  std::vector<float> v(FeatureWindow::kSize);
  encode_window(world, v);
  return v;
}

void encode_pixels(const WorldState& world, std::span<float> out) {
  constexpr int side = kPixelInputSide;
  if (out.size() != static_cast<std::size_t>(side * side)) throw ValidationError("pixel buffer has wrong size");
  const PixelFrame f = render(world, 1);
  for (int y = 0; y < side; ++y) {
    const int sy = y * kScreenHeight / side;
    for (int x = 0; x < side; ++x) {
      const int sx = x * kScreenWidth / side;
      out[static_cast<std::size_t>(y * side + x)] = 1.0F - static_cast<float>(f.at(sx, sy)) / 3.0F;
    }
  }
}

}  // namespace tilerl::kernel
