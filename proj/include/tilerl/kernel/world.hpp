#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "tilerl/kernel/actions.hpp"
#include "tilerl/kernel/level.hpp"

namespace tilerl::kernel {

// Fixed-point world units. One tile is 8 pixels; one pixel is 32 subunits.
inline constexpr std::int32_t kSubPerPixel = 32;
inline constexpr std::int32_t kPixelsPerTile = 8;
inline constexpr std::int32_t kSubPerTile = kSubPerPixel * kPixelsPerTile;

// Physics constants, in subunits and subunits per frame.
namespace physics {
inline constexpr std::int32_t kAgentWidth = 192;
inline constexpr std::int32_t kAgentHeight = 256;
inline constexpr std::int32_t kEnemyWidth = 192;
inline constexpr std::int32_t kEnemyHeight = 256;
inline constexpr std::int32_t kWalkSpeed = 24;
inline constexpr std::int32_t kRunSpeed = 40;
inline constexpr std::int32_t kGroundAccel = 4;
inline constexpr std::int32_t kGroundFriction = 4;
inline constexpr std::int32_t kAirAccel = 2;
inline constexpr std::int32_t kJumpImpulse = 104;
inline constexpr std::int32_t kGravity = 12;
inline constexpr std::int32_t kGravityHeld = 6;  // rising with `a` held
inline constexpr std::int32_t kMaxFall = 96;
inline constexpr std::int32_t kStompBounce = 64;
inline constexpr std::int32_t kStompMargin = 128;
inline constexpr std::int32_t kEnemySpeed = 8;
inline constexpr std::int32_t kActivationDistance = 11 * kSubPerTile;
inline constexpr std::uint32_t kMaxSpawnDelay = 96;  // frames, drawn per enemy at reset
}  // namespace physics

inline constexpr int kFramesPerTurn = 5;
inline constexpr int kFramesPerJumpTurn = 15;

struct EntityState {
  EnemyKind kind = EnemyKind::Walker;
  std::int32_t x = 0;
  std::int32_t y = 0;
  std::int32_t vx = 0;
  std::int32_t vy = 0;
  std::uint32_t delay = 0;  // frames to wait after activation before moving
  bool active = false;
  bool alive = true;

  friend bool operator==(const EntityState&, const EntityState&) = default;
};

enum class DeathCause : std::uint8_t { None, Enemy, Pit };
std::string_view to_string(DeathCause cause);

struct WorldState {
  std::shared_ptr<const LevelSpec> level;
  std::int32_t agent_x = 0;  // left edge, subunits
  std::int32_t agent_y = 0;  // top edge, subunits
  std::int32_t agent_vx = 0;
  std::int32_t agent_vy = 0;
  bool on_ground = false;
  bool jump_held = false;  // `a` was held on the previous frame
  std::vector<EntityState> entities;
  std::int64_t frame_count = 0;
  std::int64_t turn_count = 0;
  std::int64_t max_turns = 0;  // 0 = unlimited
  std::uint64_t seed = 0;
  std::uint64_t rng_state = 0;
  bool alive = true;
  bool finished = false;
  DeathCause death = DeathCause::None;

  [[nodiscard]] bool truncated() const { return max_turns > 0 && turn_count >= max_turns; }
  [[nodiscard]] bool done() const { return !alive || finished || truncated(); }
  // Agent x in tile units (exact: subunits / 256).
  [[nodiscard]] double x_tiles() const { return static_cast<double>(agent_x) / kSubPerTile; }
};

// Fingerprint over every field of the state, including the level identity.
std::uint64_t state_hash(const WorldState& world);

struct StepInfo {
  DeathCause death = DeathCause::None;
  bool finished = false;
  bool action_normalized = false;  // noop was dropped from a multi-button set
  double x_before = 0.0;
  double x_after = 0.0;
};

struct StepOutcome {
  double reward = 0.0;  // x_after - x_before, tile units
  bool terminated = false;
  bool truncated = false;
  int frames_consumed = 0;
  StepInfo info;
};

struct KernelOptions {
  double death_penalty = 0.0;  // subtracted from the reward of the dying turn
};

// Throws NotFoundError for an unknown level.
WorldState reset(const LevelSet& levels, LevelId id, std::uint64_t seed, std::int64_t max_turns = 0);

// Number of physics frames a turn with this action consumes.
int frames_for(ActionSet action);

// Advances the world by one turn in place. Throws ContractError when the
// episode is over and ValidationError for malformed actions.
StepOutcome step(WorldState& world, ActionSet action, const KernelOptions& options = {});

}  // namespace tilerl::kernel
