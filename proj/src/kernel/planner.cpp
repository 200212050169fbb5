#include "tilerl/kernel/planner.hpp"

#include <algorithm>
#include <unordered_set>

namespace tilerl::kernel {

namespace {

struct Node {
  WorldState world;
  std::vector<ActionSet> actions;
  double score = 0.0;
};

double score_of(const WorldState& w) {
  // Progress first, discounted when the jump button is still held (a new
  // jump needs a release turn).
  double s = static_cast<double>(w.agent_x) - 0.01 * static_cast<double>(w.agent_y);
  if (w.jump_held) s -= 0.5 * kSubPerTile;
  // Below the spawn floor means falling into a pit in every shipped level.
  if (w.agent_y > w.level->agent_y * kSubPerTile) s -= 64.0 * kSubPerTile;
  return s;
}

}  // namespace

PlanResult plan_beam(const WorldState& start, const std::vector<ActionSet>& actions, int beam_width) {
  const std::int32_t x0 = start.level->agent_x * kSubPerTile;
  PlanResult best;
  auto consider = [&](const Node& n) {
    const double progress = static_cast<double>(n.world.agent_x - x0) / kSubPerTile;
    if (progress > best.progress || (n.world.finished && !best.finished)) {
      best.progress = progress;
      best.actions = n.actions;
      best.finished = n.world.finished;
    }
  };
  std::vector<Node> beam{Node{start, {}, score_of(start)}};
  while (!beam.empty()) {
    std::vector<Node> next;
    next.reserve(beam.size() * actions.size());
    std::unordered_set<std::uint64_t> seen;
    for (const auto& node : beam) {
      for (ActionSet a : actions) {
        Node child{node.world, node.actions, 0.0};
        step(child.world, a);
        child.actions.push_back(a);
        consider(child);
        if (child.world.done()) continue;
        if (!seen.insert(state_hash(child.world)).second) continue;
        child.score = score_of(child.world);
        next.push_back(std::move(child));
      }
    }
    std::sort(next.begin(), next.end(), [](const Node& a, const Node& b) { return a.score > b.score; });
    if (next.size() > static_cast<std::size_t>(beam_width)) next.resize(static_cast<std::size_t>(beam_width));
    beam = std::move(next);
    if (best.finished) break;
  }
  return best;
}

}  // namespace tilerl::kernel
