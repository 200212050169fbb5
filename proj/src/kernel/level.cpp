#include "tilerl/kernel/level.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "tilerl/error.hpp"
#include "tilerl/util/hash.hpp"

#ifndef TILERL_LEVEL_DIR
#define TILERL_LEVEL_DIR "levels"
#endif

namespace tilerl::kernel {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

int parse_int(std::string_view s, int line) {
  s = trim(s);
  int v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || p != s.data() + s.size()) {
    throw ValidationError("level line " + std::to_string(line) + ": expected integer, got '" +
                          std::string(s) + "'");
  }
  return v;
}

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string_view motion_name(Motion m) {
  switch (m) {
    case Motion::WalkLeft:
      return "left";
    case Motion::WalkRight:
      return "right";
    case Motion::Static:
      return "static";
  }
  return "?";
}

}  // namespace

std::string to_string(LevelId id) { return std::to_string(id.world) + "-" + std::to_string(id.level); }

LevelId parse_level_id(std::string_view text) {
  text = trim(text);
  auto dash = text.find('-');
  if (dash == std::string_view::npos || dash == 0 || dash + 1 == text.size()) {
    throw ValidationError("malformed level id '" + std::string(text) + "' (expected W-L)");
  }
  LevelId id;
  auto a = text.substr(0, dash);
  auto b = text.substr(dash + 1);
  auto r1 = std::from_chars(a.data(), a.data() + a.size(), id.world);
  auto r2 = std::from_chars(b.data(), b.data() + b.size(), id.level);
  if (r1.ec != std::errc{} || r1.ptr != a.data() + a.size() || r2.ec != std::errc{} ||
      r2.ptr != b.data() + b.size()) {
    throw ValidationError("malformed level id '" + std::string(text) + "' (expected W-L)");
  }
  return id;
}

char tile_char(TileKind kind) {
  switch (kind) {
    case TileKind::Empty:
      return '.';
    case TileKind::Solid:
      return '#';
    case TileKind::Gap:
      return '_';
    case TileKind::Pipe:
      return 'P';
    case TileKind::Platform:
      return '=';
    case TileKind::Goal:
      return '|';
  }
  return '?';
}

std::optional<TileKind> parse_tile(char c) {
  switch (c) {
    case '.':
      return TileKind::Empty;
    case '#':
      return TileKind::Solid;
    case '_':
      return TileKind::Gap;
    case 'P':
      return TileKind::Pipe;
    case '=':
      return TileKind::Platform;
    case '|':
      return TileKind::Goal;
    default:
      return std::nullopt;
  }
}

bool is_solid(TileKind kind) { return kind == TileKind::Solid || kind == TileKind::Pipe; }

TileKind LevelSpec::at(int col, int row) const {
  if (col < 0 || col >= width || row < 0 || row >= height) return TileKind::Empty;
  return tiles[static_cast<std::size_t>(row) * static_cast<std::size_t>(width) + static_cast<std::size_t>(col)];
}

void validate_level(const LevelSpec& spec) {
  const std::string where = "level " + to_string(spec.id) + ": ";
  if (spec.width <= 0 || spec.height <= 0) throw ValidationError(where + "empty grid");
  if (spec.tiles.size() != static_cast<std::size_t>(spec.width) * static_cast<std::size_t>(spec.height)) {
    throw ValidationError(where + "grid is not rectangular");
  }
  if (spec.finish_x <= 0 || spec.finish_x > spec.width) {
    throw ValidationError(where + "finish_x outside the grid");
  }
  auto inside = [&](int x, int y) { return x >= 0 && x < spec.width && y >= 0 && y < spec.height; };
  if (!inside(spec.agent_x, spec.agent_y)) throw ValidationError(where + "agent spawn outside the grid");
  if (spec.agent_x >= spec.finish_x) throw ValidationError(where + "agent spawns past the finish");
  for (const auto& s : spec.spawns) {
    if (!inside(s.x, s.y)) throw ValidationError(where + "enemy spawn outside the grid");
  }
}

LevelSpec parse_level(std::string_view text) {
  LevelSpec spec;
  bool have_id = false, have_finish = false, have_agent = false, have_version = false;
  std::vector<std::string> grid;
  bool in_grid = false;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view raw = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    std::string_view line = trim(raw);
    if (in_grid) {
      if (!line.empty()) grid.emplace_back(line);
      continue;
    }
    if (line.empty() || line.front() == '#') continue;
    if (line == "[grid]") {
      in_grid = true;
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ValidationError("level line " + std::to_string(line_no) + ": expected key = value");
    }
    auto key = trim(line.substr(0, eq));
    auto value = trim(line.substr(eq + 1));
    if (key == "format_version") {
      int v = parse_int(value, line_no);
      if (v != kLevelFormatVersion) {
        throw ValidationError("level format_version " + std::to_string(v) + " unsupported (expected " +
                              std::to_string(kLevelFormatVersion) + ")");
      }
      have_version = true;
    } else if (key == "level_id") {
      spec.id = parse_level_id(value);
      have_id = true;
    } else if (key == "family") {
      spec.family = std::string(value);
    } else if (key == "finish_x") {
      spec.finish_x = parse_int(value, line_no);
      have_finish = true;
    } else if (key == "agent") {
      auto parts = split_ws(value);
      if (parts.size() != 2) throw ValidationError("level line " + std::to_string(line_no) + ": agent = X Y");
      spec.agent_x = parse_int(parts[0], line_no);
      spec.agent_y = parse_int(parts[1], line_no);
      have_agent = true;
    } else if (key == "enemy") {
      auto parts = split_ws(value);
      if (parts.size() != 4 || parts[0] != "walker") {
        throw ValidationError("level line " + std::to_string(line_no) + ": enemy = walker X Y left|right|static");
      }
      EntitySpawn s;
      s.x = parse_int(parts[1], line_no);
      s.y = parse_int(parts[2], line_no);
      if (parts[3] == "left") {
        s.motion = Motion::WalkLeft;
      } else if (parts[3] == "right") {
        s.motion = Motion::WalkRight;
      } else if (parts[3] == "static") {
        s.motion = Motion::Static;
      } else {
        throw ValidationError("level line " + std::to_string(line_no) + ": unknown motion '" +
                              std::string(parts[3]) + "'");
      }
      spec.spawns.push_back(s);
    } else {
      throw ValidationError("level line " + std::to_string(line_no) + ": unknown key '" + std::string(key) + "'");
    }
  }
  if (!have_version) throw ValidationError("level file missing format_version");
  if (!have_id) throw ValidationError("level file missing level_id");
  if (!have_finish) throw ValidationError("level file missing finish_x");
  if (!have_agent) throw ValidationError("level file missing agent spawn");
  if (grid.empty()) throw ValidationError("level file missing [grid]");
  spec.height = static_cast<int>(grid.size());
  spec.width = static_cast<int>(grid.front().size());
  spec.tiles.reserve(static_cast<std::size_t>(spec.width) * grid.size());
  for (std::size_t r = 0; r < grid.size(); ++r) {
    if (static_cast<int>(grid[r].size()) != spec.width) {
      throw ValidationError("level " + to_string(spec.id) + ": grid row " + std::to_string(r) +
                            " has width " + std::to_string(grid[r].size()) + ", expected " +
                            std::to_string(spec.width));
    }
    for (char c : grid[r]) {
      auto t = parse_tile(c);
      if (!t) {
        throw ValidationError("level " + to_string(spec.id) + ": unknown tile '" + std::string(1, c) +
                              "' in row " + std::to_string(r));
      }
      spec.tiles.push_back(*t);
    }
  }
  validate_level(spec);
  return spec;
}

std::string serialize_level(const LevelSpec& spec) {
  std::ostringstream os;
  os << "format_version = " << kLevelFormatVersion << "\n";
  os << "level_id = " << to_string(spec.id) << "\n";
  if (!spec.family.empty()) os << "family = " << spec.family << "\n";
  os << "finish_x = " << spec.finish_x << "\n";
  os << "agent = " << spec.agent_x << " " << spec.agent_y << "\n";
  for (const auto& s : spec.spawns) {
    os << "enemy = walker " << s.x << " " << s.y << " " << motion_name(s.motion) << "\n";
  }
  os << "[grid]\n";
  for (int r = 0; r < spec.height; ++r) {
    for (int c = 0; c < spec.width; ++c) os << tile_char(spec.at(c, r));
    os << "\n";
  }
  return os.str();
}

LevelSet::LevelSet(std::vector<LevelSpec> levels) {
  util::Fnv1a h;
  for (auto& spec : levels) {
    validate_level(spec);
    auto id = spec.id;
    if (levels_.contains(id)) throw ValidationError("duplicate level " + to_string(id));
    levels_.emplace(id, std::make_shared<const LevelSpec>(std::move(spec)));
  }
  for (const auto& [id, spec] : levels_) h.text(serialize_level(*spec));
  version_ = h.hex();
}

LevelSet LevelSet::load_directory(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw NotFoundError("level directory not found: " + dir.string());
  }
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".lvl") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<LevelSpec> levels;
  for (const auto& f : files) {
    std::ifstream in(f);
    std::stringstream ss;
    ss << in.rdbuf();
    try {
      levels.push_back(parse_level(ss.str()));
    } catch (const ValidationError& e) {
      throw ValidationError(f.filename().string() + ": " + e.what());
    }
  }
  return LevelSet(std::move(levels));
}

std::filesystem::path LevelSet::builtin_directory() {
  if (const char* env = std::getenv("TILERL_LEVEL_DIR"); env != nullptr && *env != '\0') return env;
  return TILERL_LEVEL_DIR;
}

const LevelSet& LevelSet::builtin() {
  static const LevelSet set = load_directory(builtin_directory());
  return set;
}

std::shared_ptr<const LevelSpec> LevelSet::get(LevelId id) const {
  auto it = levels_.find(id);
  if (it == levels_.end()) throw NotFoundError("unknown level " + to_string(id));
  return it->second;
}

bool LevelSet::contains(LevelId id) const { return levels_.contains(id); }

std::vector<LevelId> LevelSet::ids() const {
  std::vector<LevelId> out;
  for (const auto& [id, _] : levels_) out.push_back(id);
  return out;
}

std::vector<LevelId> LevelSet::family(std::string_view name) const {
  std::vector<LevelId> out;
  for (const auto& [id, spec] : levels_) {
    if (spec->family == name) out.push_back(id);
  }
  return out;
}

std::vector<LevelId> parse_level_list(std::string_view text, const LevelSet& set) {
  std::vector<LevelId> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto comma = text.find(',', pos);
    if (comma == std::string_view::npos) comma = text.size();
    auto item = trim(text.substr(pos, comma - pos));
    pos = comma + 1;
    if (item.empty()) continue;
    if (auto colon = item.find(':'); colon != std::string_view::npos) {
      auto lo = parse_level_id(item.substr(0, colon));
      auto hi = parse_level_id(item.substr(colon + 1));
      for (auto id : set.ids()) {
        if (lo <= id && id <= hi) out.push_back(id);
      }
    } else {
      auto id = parse_level_id(item);
      if (!set.contains(id)) throw NotFoundError("unknown level " + to_string(id));
      out.push_back(id);
    }
  }
  if (out.empty()) throw ValidationError("empty level list '" + std::string(text) + "'");
  return out;
}

}  // namespace tilerl::kernel
