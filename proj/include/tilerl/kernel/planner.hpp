#pragma once

#include <vector>

#include "tilerl/kernel/world.hpp"

namespace tilerl::kernel {

struct PlanResult {
  std::vector<ActionSet> actions;
  double progress = 0.0;  // tiles from spawn
  bool finished = false;
};

// Beam search over a fixed action list using the simulator as the model.
// Deterministic; used as the scripted-optimal reference for a (level, seed).
PlanResult plan_beam(const WorldState& start, const std::vector<ActionSet>& actions, int beam_width);

}  // namespace tilerl::kernel
