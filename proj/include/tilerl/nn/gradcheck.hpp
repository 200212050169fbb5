#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "tilerl/nn/network.hpp"

namespace tilerl::nn {

struct GradcheckOptions {
  double eps = 1e-3;
  double tolerance = 1e-4;
  int batch = 3;
  int max_coords_per_block = 64;  // sampled when a block is larger
  std::uint64_t seed = 0;
};

struct BlockCheck {
  std::string name;  // parameter block, or "input"
  int checked = 0;
  int skipped = 0;  // a ReLU kink within eps makes the one-sided slopes disagree
  double max_rel_error = 0.0;
};

struct GradcheckResult {
  std::string spec_json;
  std::vector<BlockCheck> blocks;
  double max_rel_error = 0.0;
  bool passed = false;
};

// Central differences of L = sum(w * forward(x)) in double precision against
// backward(); relative error |a - n| / max(|a|, |n|, 1e-6).
GradcheckResult gradcheck(const NetworkSpec& spec, const GradcheckOptions& options);

// Small random conv and dense stacks covering every layer kind and both heads.
NetworkSpec random_gradcheck_spec(std::mt19937_64& rng);

}  // namespace tilerl::nn
