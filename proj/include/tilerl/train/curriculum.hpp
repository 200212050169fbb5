#pragma once

#include <utility>
#include <vector>

#include "tilerl/kernel/level.hpp"
#include "tilerl/train/config.hpp"

namespace tilerl::train {

// Per-level running episode lengths and the sampling weights derived from
// them. Weights stay uniform until every level has been seen once, and
// always under CurriculumMode::Uniform.
struct CurriculumState {
  CurriculumMode mode = CurriculumMode::Uniform;
  std::vector<kernel::LevelId> levels;
  std::vector<double> avg_length;  // N_k from the latest batch containing level k
  std::vector<bool> seen;
  std::vector<double> weights;  // sums to 1, all positive

  [[nodiscard]] std::size_t index_of(kernel::LevelId id) const;
};

CurriculumState make_curriculum(const std::vector<kernel::LevelId>& levels, CurriculumMode mode);

// lengths: (level, trajectory length) for every non-aborted trajectory of a
// batch. Levels absent from the batch keep their previous N_k.
CurriculumState update_curriculum(const std::vector<std::pair<kernel::LevelId, int>>& lengths, const CurriculumState& state);

}  // namespace tilerl::train
