#include "tilerl/kernel/world.hpp"

#include <algorithm>

#include "tilerl/error.hpp"
#include "tilerl/util/hash.hpp"

namespace tilerl::kernel {

namespace {

using namespace physics;

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::int32_t floor_tile(std::int32_t sub) {
  return sub >= 0 ? sub / kSubPerTile : -((-sub + kSubPerTile - 1) / kSubPerTile);
}

std::int32_t approach(std::int32_t v, std::int32_t target, std::int32_t step) {
  if (v < target) return std::min(v + step, target);
  if (v > target) return std::max(v - step, target);
  return v;
}

bool solid_at(const LevelSpec& lvl, std::int32_t col, std::int32_t row) { return is_solid(lvl.at(col, row)); }

struct Box {
  std::int32_t x, y, w, h;
};

// Moves a box horizontally by dx against solid tiles. Returns true on a wall hit.
bool move_x(const LevelSpec& lvl, Box& b, std::int32_t dx) {
  b.x += dx;
  bool hit = false;
  const std::int32_t top = floor_tile(b.y);
  const std::int32_t bottom = floor_tile(b.y + b.h - 1);
  if (dx > 0) {
    const std::int32_t col = floor_tile(b.x + b.w - 1);
    for (std::int32_t row = top; row <= bottom; ++row) {
      if (solid_at(lvl, col, row)) {
        b.x = col * kSubPerTile - b.w;
        hit = true;
        break;
      }
    }
  } else if (dx < 0) {
    const std::int32_t col = floor_tile(b.x);
    for (std::int32_t row = top; row <= bottom; ++row) {
      if (solid_at(lvl, col, row)) {
        b.x = (col + 1) * kSubPerTile;
        hit = true;
        break;
      }
    }
  }
  return hit;
}

// Moves a box vertically by dy. Platforms only catch a box falling onto them
// from above. Returns +1 when landing, -1 on a ceiling bump, 0 otherwise.
int move_y(const LevelSpec& lvl, Box& b, std::int32_t dy) {
  const std::int32_t prev_bottom = b.y + b.h;
  b.y += dy;
  const std::int32_t left = floor_tile(b.x);
  const std::int32_t right = floor_tile(b.x + b.w - 1);
  if (dy > 0) {
    const std::int32_t row = floor_tile(b.y + b.h - 1);
    for (std::int32_t col = left; col <= right; ++col) {
      const TileKind t = lvl.at(col, row);
      if (is_solid(t) || (t == TileKind::Platform && prev_bottom <= row * kSubPerTile)) {
        b.y = row * kSubPerTile - b.h;
        return 1;
      }
    }
  } else if (dy < 0) {
    const std::int32_t row = floor_tile(b.y);
    for (std::int32_t col = left; col <= right; ++col) {
      if (solid_at(lvl, col, row)) {
        b.y = (row + 1) * kSubPerTile;
        return -1;
      }
    }
  }
  return 0;
}

bool supported(const LevelSpec& lvl, const Box& b) {
  const std::int32_t feet = b.y + b.h;
  if (feet % kSubPerTile != 0) return false;
  const std::int32_t row = feet / kSubPerTile;
  for (std::int32_t col = floor_tile(b.x); col <= floor_tile(b.x + b.w - 1); ++col) {
    const TileKind t = lvl.at(col, row);
    if (is_solid(t) || t == TileKind::Platform) return true;
  }
  return false;
}

void update_enemy(const LevelSpec& lvl, EntityState& e, std::int32_t agent_x, std::int32_t level_bottom) {
  if (!e.active) {
    if (std::abs(e.x - agent_x) > kActivationDistance) return;
    e.active = true;
  }
  if (e.delay > 0) {
    --e.delay;
    return;
  }
  Box b{e.x, e.y, kEnemyWidth, kEnemyHeight};
  e.vy = std::min(e.vy + kGravity, kMaxFall);
  if (e.vx != 0 && move_x(lvl, b, e.vx)) e.vx = -e.vx;
  if (move_y(lvl, b, e.vy) != 0) e.vy = 0;
  e.x = b.x;
  e.y = b.y;
  if (e.y >= level_bottom) e.alive = false;
}

bool overlaps(std::int32_t ax, std::int32_t ay, std::int32_t aw, std::int32_t ah, std::int32_t bx, std::int32_t by,
              std::int32_t bw, std::int32_t bh) {
  return ax < bx + bw && bx < ax + aw && ay < by + bh && by < ay + ah;
}

void simulate_frame(WorldState& w, ActionSet held) {
  const LevelSpec& lvl = *w.level;
  const bool a = held.contains(Button::A);
  const bool run = held.contains(Button::B);
  const int dir = (held.contains(Button::Right) ? 1 : 0) - (held.contains(Button::Left) ? 1 : 0);

  if (a && !w.jump_held && w.on_ground) {
    w.agent_vy = -kJumpImpulse;
    w.on_ground = false;
  }
  w.jump_held = a;

  const std::int32_t target = dir * (run ? kRunSpeed : kWalkSpeed);
  if (dir != 0) {
    w.agent_vx = approach(w.agent_vx, target, w.on_ground ? kGroundAccel : kAirAccel);
  } else if (w.on_ground) {
    w.agent_vx = approach(w.agent_vx, 0, kGroundFriction);
  }
  w.agent_vy = std::min(w.agent_vy + ((a && w.agent_vy < 0) ? kGravityHeld : kGravity), kMaxFall);

  Box b{w.agent_x, w.agent_y, kAgentWidth, kAgentHeight};
  if (move_x(lvl, b, w.agent_vx)) w.agent_vx = 0;
  const std::int32_t max_x = lvl.width * kSubPerTile - kAgentWidth;
  if (b.x < 0) {
    b.x = 0;
    w.agent_vx = 0;
  } else if (b.x > max_x) {
    b.x = max_x;
    w.agent_vx = 0;
  }
  if (move_y(lvl, b, w.agent_vy) != 0) w.agent_vy = 0;
  w.agent_x = b.x;
  w.agent_y = b.y;
  w.on_ground = w.agent_vy >= 0 && supported(lvl, b);

  const std::int32_t level_bottom = lvl.height * kSubPerTile;
  for (auto& e : w.entities) {
    if (e.alive) update_enemy(lvl, e, w.agent_x, level_bottom);
  }

  for (auto& e : w.entities) {
    if (!e.alive || !overlaps(w.agent_x, w.agent_y, kAgentWidth, kAgentHeight, e.x, e.y, kEnemyWidth, kEnemyHeight)) {
      continue;
    }
    if (w.agent_vy > 0 && (w.agent_y + kAgentHeight) - e.y <= kStompMargin) {
      e.alive = false;
      w.agent_vy = -kStompBounce;
      w.on_ground = false;
    } else {
      w.alive = false;
      w.death = DeathCause::Enemy;
      return;
    }
  }

  if (w.agent_y >= level_bottom) {
    w.alive = false;
    w.death = DeathCause::Pit;
    return;
  }
  if (w.agent_x >= lvl.finish_x * kSubPerTile) w.finished = true;
}

}  // namespace

std::string_view to_string(DeathCause cause) {
  switch (cause) {
    case DeathCause::None:
      return "none";
    case DeathCause::Enemy:
      return "enemy";
    case DeathCause::Pit:
      return "pit";
  }
  return "?";
}

std::uint64_t state_hash(const WorldState& w) {
  util::Fnv1a h;
  if (w.level) {
    h.value(w.level->id.world);
    h.value(w.level->id.level);
  }
  h.value(w.agent_x);
  h.value(w.agent_y);
  h.value(w.agent_vx);
  h.value(w.agent_vy);
  h.value(w.on_ground);
  h.value(w.jump_held);
  h.value(w.entities.size());
  for (const auto& e : w.entities) {
    h.value(e.kind);
    h.value(e.x);
    h.value(e.y);
    h.value(e.vx);
    h.value(e.vy);
    h.value(e.delay);
    h.value(e.active);
    h.value(e.alive);
  }
  h.value(w.frame_count);
  h.value(w.turn_count);
  h.value(w.max_turns);
  h.value(w.seed);
  h.value(w.rng_state);
  h.value(w.alive);
  h.value(w.finished);
  h.value(w.death);
  return h.digest();
}

WorldState reset(const LevelSet& levels, LevelId id, std::uint64_t seed, std::int64_t max_turns) {
  if (max_turns < 0) throw ValidationError("max_turns must be >= 0");
  WorldState w;
  w.level = levels.get(id);
  const LevelSpec& lvl = *w.level;
  w.agent_x = lvl.agent_x * kSubPerTile;
  w.agent_y = lvl.agent_y * kSubPerTile;
  w.on_ground = supported(lvl, Box{w.agent_x, w.agent_y, kAgentWidth, kAgentHeight});
  w.seed = seed;
  w.rng_state = seed;
  w.max_turns = max_turns;
  w.entities.reserve(lvl.spawns.size());
  for (const auto& s : lvl.spawns) {
    EntityState e;
    e.kind = s.kind;
    e.x = s.x * kSubPerTile;
    e.y = s.y * kSubPerTile;
    e.vx = s.motion == Motion::WalkLeft ? -kEnemySpeed : s.motion == Motion::WalkRight ? kEnemySpeed : 0;
    e.delay = static_cast<std::uint32_t>(splitmix64(w.rng_state) % (kMaxSpawnDelay + 1));
    w.entities.push_back(e);
  }
  return w;
}

int frames_for(ActionSet action) {
  return action.contains(Button::A) ? kFramesPerJumpTurn : kFramesPerTurn;
}

StepOutcome step(WorldState& world, ActionSet action, const KernelOptions& options) {
  if (!world.level) throw ContractError("step on a world that was never reset");
  if (!world.alive || world.finished) throw ContractError("step on a terminated episode");
  if (world.truncated()) throw ContractError("step on a truncated episode");
  if (action.empty()) throw ValidationError("empty action set");
  if (action.size() > 2 && !is_engineered_triple(action)) {
    throw ValidationError("action " + action.to_string() + " presses more than 2 buttons");
  }
  auto [held, changed] = normalize(action);

  StepOutcome out;
  out.info.action_normalized = changed;
  out.info.x_before = world.x_tiles();
  const int frames = frames_for(held);
  for (int f = 0; f < frames && world.alive && !world.finished; ++f) simulate_frame(world, held);
  world.frame_count += frames;
  world.turn_count += 1;

  out.frames_consumed = frames;
  out.info.x_after = world.x_tiles();
  out.info.death = world.death;
  out.info.finished = world.finished;
  out.reward = out.info.x_after - out.info.x_before;
  if (!world.alive) out.reward -= options.death_penalty;
  out.terminated = !world.alive || world.finished;
  out.truncated = !out.terminated && world.truncated();
  return out;
}

}  // namespace tilerl::kernel
