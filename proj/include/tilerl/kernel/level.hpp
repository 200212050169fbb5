#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace tilerl::kernel {

struct LevelId {
  int world = 0;
  int level = 0;

  friend auto operator<=>(const LevelId&, const LevelId&) = default;
};

std::string to_string(LevelId id);
// "1-1" form. Throws ValidationError on anything else.
LevelId parse_level_id(std::string_view text);

enum class TileKind : std::uint8_t { Empty, Solid, Gap, Pipe, Platform, Goal };

// Grid charset: '.' empty, '#' solid, '_' gap (marked pit cell, not solid),
// 'P' pipe, '=' one-way platform, '|' goal pole (not solid).
char tile_char(TileKind kind);
std::optional<TileKind> parse_tile(char c);
bool is_solid(TileKind kind);

enum class EnemyKind : std::uint8_t { Walker };
enum class Motion : std::uint8_t { WalkLeft, WalkRight, Static };

struct EntitySpawn {
  EnemyKind kind = EnemyKind::Walker;
  int x = 0;  // tile column
  int y = 0;  // tile row (top of the sprite)
  Motion motion = Motion::WalkLeft;

  friend bool operator==(const EntitySpawn&, const EntitySpawn&) = default;
};

inline constexpr int kLevelFormatVersion = 1;

struct LevelSpec {
  LevelId id;
  std::string family;  // "A" (training analogue) or "B" (held-out analogue)
  int width = 0;       // tiles
  int height = 0;      // tiles
  std::vector<TileKind> tiles;  // row-major, height * width
  int agent_x = 0;     // spawn tile column
  int agent_y = 0;     // spawn tile row
  int finish_x = 0;    // tile column; reaching it finishes the level
  std::vector<EntitySpawn> spawns;

  [[nodiscard]] TileKind at(int col, int row) const;
};

// Plain-text level format:
//
//   # comment
//   format_version = 1
//   level_id = 1-1
//   family = A
//   finish_x = 96
//   agent = 2 15
//   enemy = walker 20 15 left
//   [grid]
//   <height lines of width characters>
//
// Throws ValidationError with a line number on malformed input.
LevelSpec parse_level(std::string_view text);
std::string serialize_level(const LevelSpec& spec);
void validate_level(const LevelSpec& spec);

// The installed set of levels. Immutable once built; shared by reference
// between worlds.
class LevelSet {
 public:
  LevelSet() = default;
  explicit LevelSet(std::vector<LevelSpec> levels);

  static LevelSet load_directory(const std::filesystem::path& dir);
  // The levels shipped with the project (compiled-in search path, overridable
  // with TILERL_LEVEL_DIR).
  static const LevelSet& builtin();
  static std::filesystem::path builtin_directory();

  // Throws NotFoundError.
  [[nodiscard]] std::shared_ptr<const LevelSpec> get(LevelId id) const;
  [[nodiscard]] bool contains(LevelId id) const;
  [[nodiscard]] std::vector<LevelId> ids() const;
  [[nodiscard]] std::vector<LevelId> family(std::string_view name) const;
  // Content hash (hex) over every serialized level; identifies the level set
  // version for replay audits.
  [[nodiscard]] const std::string& version() const { return version_; }

 private:
  std::map<LevelId, std::shared_ptr<const LevelSpec>> levels_;
  std::string version_;
};

// "1-1,1-2" or "1-1:1-3" (inclusive range within the installed set).
std::vector<LevelId> parse_level_list(std::string_view text, const LevelSet& set);

}  // namespace tilerl::kernel
