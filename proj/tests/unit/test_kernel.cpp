#include <doctest.h>

#include <random>
#include <set>

#include "tilerl/error.hpp"
#include "tilerl/kernel/actions.hpp"
#include "tilerl/kernel/level.hpp"
#include "tilerl/kernel/observation.hpp"
#include "tilerl/kernel/world.hpp"

using namespace tilerl;
using namespace tilerl::kernel;

namespace {

// Flat 40-wide test level; a static enemy sits on the ground at column 6
// and the agent spawns high above it.
LevelSpec stomp_level() {
  std::string text =
      "format_version = 1\nlevel_id = 7-1\nfinish_x = 38\nagent = 6 9\nenemy = walker 6 15 static\n[grid]\n";
  for (int r = 0; r < 16; ++r) text += std::string(40, '.') + "\n";
  text += std::string(40, '#') + "\n" + std::string(40, '#') + "\n";
  return parse_level(text);
}

}  // namespace

TEST_CASE("action spaces have the published cardinalities and order") {
  auto original = enumerate_actions(ActionSpace::Original);
  auto engineered = enumerate_actions(ActionSpace::Engineered);
  auto protocol = enumerate_actions(ActionSpace::Protocol);
  CHECK(original.size() == 22);
  CHECK(engineered.size() == 8);
  CHECK(protocol == original);
  CHECK(original.front() == ActionSet{Button::Noop});
  CHECK((engineered[2] == ActionSet{Button::Right, Button::A, Button::B}));
  CHECK((engineered[1] == ActionSet{Button::Right, Button::A}));
  CHECK(engineered[7] == ActionSet{Button::A});
  std::set<std::uint8_t> unique;
  for (auto a : original) unique.insert(a.mask());
  CHECK(unique.size() == 22);
  for (auto a : original) {
    CHECK(a.size() >= 1);
    CHECK(a.size() <= 2);
    if (a.contains(Button::Noop)) CHECK(a.size() == 1);
  }
  CHECK(enumerate_actions(ActionSpace::Original) == original);
}

TEST_CASE("buttons parse only the seven names") {
  CHECK(parse_button("a") == Button::A);
  CHECK(parse_button("noop") == Button::Noop);
  CHECK_FALSE(parse_button("A").has_value());
  CHECK_FALSE(parse_button("start").has_value());
  CHECK((ActionSet{Button::Right, Button::A}.to_string() == "['a', 'right']"));
}

TEST_CASE("reset is deterministic and starts at the spawn") {
  const auto& levels = LevelSet::builtin();
  auto w1 = reset(levels, {1, 1}, 7);
  auto w2 = reset(levels, {1, 1}, 7);
  CHECK(state_hash(w1) == state_hash(w2));
  CHECK(w1.agent_x == levels.get({1, 1})->agent_x * kSubPerTile);
  CHECK(w1.turn_count == 0);
  CHECK(w1.on_ground);
  auto w3 = reset(levels, {1, 1}, 8);
  CHECK(state_hash(w1) != state_hash(w3));
  CHECK_THROWS_AS(reset(levels, {9, 9}, 0), NotFoundError);
}

TEST_CASE("builtin level set has two families of five") {
  const auto& levels = LevelSet::builtin();
  CHECK(levels.ids().size() >= 10);
  CHECK(levels.family("A").size() == 5);
  CHECK(levels.family("B").size() == 5);
  CHECK(levels.version().size() == 16);
}

TEST_CASE("frame skip depends on the jump button") {
  const auto& levels = LevelSet::builtin();
  auto w = reset(levels, {1, 1}, 1);
  auto out = step(w, ActionSet{Button::A, Button::Right});
  CHECK(out.frames_consumed == 15);
  out = step(w, ActionSet{Button::Noop});
  CHECK(out.frames_consumed == 5);
  out = step(w, ActionSet{Button::Right, Button::B});
  CHECK(out.frames_consumed == 5);
  CHECK(w.frame_count == 25);
  CHECK(w.turn_count == 3);
}

TEST_CASE("reward is the exact x displacement") {
  const auto& levels = LevelSet::builtin();
  auto w = reset(levels, {1, 1}, 1);
  double x0 = w.x_tiles();
  auto out = step(w, ActionSet{Button::Right});
  CHECK(out.reward == out.info.x_after - out.info.x_before);
  CHECK(out.info.x_before == x0);
  CHECK(out.reward > 0.0);
}

TEST_CASE("step rejects malformed actions and finished episodes") {
  const auto& levels = LevelSet::builtin();
  auto w = reset(levels, {1, 1}, 1);
  CHECK_THROWS_AS(step(w, ActionSet{}), ValidationError);
  CHECK_THROWS_AS(step(w, ActionSet{Button::A, Button::B, Button::Left}), ValidationError);
  // The engineered sprint-jump triple is allowed.
  CHECK_NOTHROW(step(w, ActionSet{Button::Right, Button::A, Button::B}));
  auto out = step(w, ActionSet{Button::Noop, Button::Right});
  CHECK(out.info.action_normalized);
  CHECK(out.frames_consumed == 5);

  auto t = reset(levels, {1, 1}, 1, 1);
  step(t, ActionSet{Button::Right});
  CHECK(t.truncated());
  CHECK_THROWS_AS(step(t, ActionSet{Button::Right}), ContractError);
}

TEST_CASE("noop never moves the agent") {
  const auto& levels = LevelSet::builtin();
  auto w = reset(levels, {1, 1}, 3, 200);
  while (!w.done()) {
    auto out = step(w, ActionSet{Button::Noop});
    CHECK(out.reward == 0.0);
  }
}

TEST_CASE("render sizes and nearest-neighbour round trip") {
  const auto& levels = LevelSet::builtin();
  auto w = reset(levels, {1, 1}, 1);
  auto f1 = render(w, 1);
  CHECK(f1.width == 160);
  CHECK(f1.height == 144);
  auto f8 = render(w, 8);
  CHECK(f8.width == 1280);
  CHECK(f8.height == 1152);
  CHECK(downsample(render(w, 2), 2) == f1);
  CHECK(downsample(f8, 8) == f1);
  CHECK_THROWS_AS(render(w, 0), ValidationError);
  CHECK(render(w, 1) == f1);
}

TEST_CASE("feature grid is deterministic and marks the agent") {
  const auto& levels = LevelSet::builtin();
  auto w = reset(levels, {1, 1}, 1);
  auto g1 = feature_grid(w);
  CHECK(g1 == feature_grid(w));
  const auto& spec = *levels.get({1, 1});
  const int c = spec.agent_x - g1.camera_col;
  const int r = spec.agent_y;
  CHECK(g1.agent[static_cast<std::size_t>(r * kScreenCols + c)] == 1);
  int marked = 0;
  for (auto v : g1.agent) marked += v;
  CHECK(marked == 1);
}

TEST_CASE("stomping an enemy clears its entity cell") {
  LevelSet set({stomp_level()});
  auto w = reset(set, {7, 1}, 0);
  auto before = feature_grid(w);
  const std::size_t enemy_cell = static_cast<std::size_t>(15 * kScreenCols + (6 - before.camera_col));
  CHECK(before.entities[enemy_cell] != 0);
  while (w.entities[0].alive && w.alive) step(w, ActionSet{Button::Noop});
  CHECK(w.alive);
  CHECK_FALSE(w.entities[0].alive);
  auto after = feature_grid(w);
  CHECK(after.entities[enemy_cell] == 0);
  CHECK(after.tiles == before.tiles);
}

TEST_CASE("walking into an enemy kills the agent") {
  std::string text = "format_version = 1\nlevel_id = 7-2\nfinish_x = 38\nagent = 2 15\nenemy = walker 8 15 static\n[grid]\n";
  for (int r = 0; r < 16; ++r) text += std::string(40, '.') + "\n";
  text += std::string(40, '#') + "\n" + std::string(40, '#') + "\n";
  LevelSet set({parse_level(text)});
  auto w = reset(set, {7, 2}, 0);
  StepOutcome out;
  while (!w.done()) out = step(w, ActionSet{Button::Right});
  CHECK(out.terminated);
  CHECK(out.info.death == DeathCause::Enemy);
}

TEST_CASE("property: telescoping, frame accounting and determinism") {
  const auto& levels = LevelSet::builtin();
  const auto actions = enumerate_actions(ActionSpace::Original);
  std::mt19937_64 rng(42);
  for (int episode = 0; episode < 60; ++episode) {
    const auto ids = levels.ids();
    const LevelId id = ids[rng() % ids.size()];
    const std::uint64_t seed = rng();
    auto w = reset(levels, id, seed, 80);
    auto twin = reset(levels, id, seed, 80);
    const std::int32_t x0 = w.agent_x;
    double total = 0.0;
    std::int64_t frames = 0;
    while (!w.done()) {
      // Bias toward moving right so episodes reach obstacles.
      ActionSet a = actions[rng() % actions.size()];
      if (rng() % 2 == 0) a = ActionSet{Button::Right, (rng() % 2) ? Button::A : Button::B};
      auto out = step(w, a);
      auto out2 = step(twin, a);
      CHECK(state_hash(w) == state_hash(twin));
      CHECK(out.reward == out2.reward);
      total += out.reward;
      frames += a.contains(Button::A) ? 15 : 5;
    }
    CHECK(total == static_cast<double>(w.agent_x - x0) / kSubPerTile);
    CHECK(w.frame_count == frames);
  }
}

TEST_CASE("level parser round trip and errors") {
  auto spec = stomp_level();
  auto again = parse_level(serialize_level(spec));
  CHECK(serialize_level(again) == serialize_level(spec));
  CHECK_THROWS_AS(parse_level("level_id = 1-1\n"), ValidationError);
  CHECK_THROWS_AS(parse_level("format_version = 2\n"), ValidationError);
  std::string ragged = "format_version = 1\nlevel_id = 1-1\nfinish_x = 3\nagent = 0 0\n[grid]\n....\n...\n";
  CHECK_THROWS_AS(parse_level(ragged), ValidationError);
  std::string beyond = "format_version = 1\nlevel_id = 1-1\nfinish_x = 9\nagent = 0 0\n[grid]\n....\n....\n";
  CHECK_THROWS_AS(parse_level(beyond), ValidationError);
  std::string bad_tile = "format_version = 1\nlevel_id = 1-1\nfinish_x = 3\nagent = 0 0\n[grid]\n..x.\n";
  CHECK_THROWS_AS(parse_level(bad_tile), ValidationError);
  CHECK_THROWS_AS(parse_level_id("11"), ValidationError);
  CHECK(parse_level_id("2-3") == LevelId{2, 3});
  auto list = parse_level_list("1-1:1-3", LevelSet::builtin());
  CHECK(list.size() == 3);
}
