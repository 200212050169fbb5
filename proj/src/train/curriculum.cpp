#include "tilerl/train/curriculum.hpp"

#include <algorithm>

#include "tilerl/error.hpp"

namespace tilerl::train {

std::size_t CurriculumState::index_of(kernel::LevelId id) const {
  auto it = std::find(levels.begin(), levels.end(), id);
  if (it == levels.end()) throw NotFoundError("level " + kernel::to_string(id) + " is not in the curriculum");
  return static_cast<std::size_t>(it - levels.begin());
}

CurriculumState make_curriculum(const std::vector<kernel::LevelId>& levels, CurriculumMode mode) {
  if (levels.empty()) throw ValidationError("curriculum needs at least one level");
  CurriculumState s;
  s.mode = mode;
  s.levels = levels;
  s.avg_length.assign(levels.size(), 0.0);
  s.seen.assign(levels.size(), false);
  s.weights.assign(levels.size(), 1.0 / static_cast<double>(levels.size()));
  return s;
}

CurriculumState update_curriculum(const std::vector<std::pair<kernel::LevelId, int>>& lengths, const CurriculumState& state) {
  CurriculumState next = state;
  std::vector<double> sum(state.levels.size(), 0.0);
  std::vector<int> count(state.levels.size(), 0);
  for (const auto& [id, len] : lengths) {
    const std::size_t k = state.index_of(id);
    sum[k] += len;
    count[k] += 1;
  }
  for (std::size_t k = 0; k < state.levels.size(); ++k) {
    if (count[k] == 0) continue;
    next.avg_length[k] = sum[k] / count[k];
    next.seen[k] = true;
  }
  const bool all_seen = std::all_of(next.seen.begin(), next.seen.end(), [](bool b) { return b; });
  if (next.mode == CurriculumMode::Uniform || !all_seen) {
    std::fill(next.weights.begin(), next.weights.end(), 1.0 / static_cast<double>(next.levels.size()));
    return next;
  }
  double total = 0.0;
  for (std::size_t k = 0; k < next.levels.size(); ++k) {
    next.weights[k] = 1.0 / std::max(next.avg_length[k], 1.0);
    total += next.weights[k];
  }
  for (double& w : next.weights) w /= total;
  return next;
}

}  // namespace tilerl::train
