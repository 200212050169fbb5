#include "tilerl/train/rollout.hpp"

#include <cmath>

#include "tilerl/error.hpp"
#include "tilerl/kernel/observation.hpp"
#include "tilerl/nn/categorical.hpp"

namespace tilerl::train {

namespace {

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

std::size_t draw_level(const std::vector<double>& weights, std::mt19937_64& rng) {
  const double u = nn::unit_uniform(rng);
  double c = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    c += weights[k];
    if (u < c) return k;
  }
  for (std::size_t k = weights.size(); k-- > 0;) {
    if (weights[k] > 0.0) return k;
  }
  return 0;
}

}  // namespace

const float* Trajectory::features_at(int t) const {
  return features.data() + static_cast<std::size_t>(t) * kernel::FeatureWindow::kSize;
}

std::uint64_t derive_seed(std::uint64_t root, std::uint64_t a, std::uint64_t b) {
  return splitmix(splitmix(splitmix(root) ^ a) ^ b);
}

Trajectory run_episode(const PolicyBackend& backend, const kernel::LevelSet& levels, kernel::LevelId level, std::uint64_t seed,
                       int max_turns, std::mt19937_64& rng, const kernel::KernelOptions& kernel_options, bool store_features) {
  constexpr int kF = kernel::FeatureWindow::kSize;
  Trajectory tr;
  tr.level = level;
  tr.seed = seed;
  kernel::WorldState w = kernel::reset(levels, level, seed, max_turns);
  tr.x_spawn = w.x_tiles();
  std::vector<float> feat(kF);
  if (store_features) tr.features.reserve(static_cast<std::size_t>(kF) * static_cast<std::size_t>(max_turns + 1));
  while (!w.done()) {
    kernel::encode_window(w, feat);
    if (store_features) tr.features.insert(tr.features.end(), feat.begin(), feat.end());
    Decision d;
    try {
      d = backend.decide(TurnInput{w, feat}, rng);
    } catch (const std::exception& e) {
      tr.aborted = true;
      tr.abort_reason = e.what();
      break;
    }
    if (d.terminate) {
      // Strict protocol rejection ends the episode without stepping.
      tr.terminated = true;
      tr.turns.push_back({d.action, d.action_index, d.logprob, 0.0, 0, d.fallback, d.normalized, std::move(d.reply_text)});
      break;
    }
    const auto out = kernel::step(w, d.action, kernel_options);
    tr.turns.push_back({d.action, d.action_index, d.logprob, out.reward, out.frames_consumed, d.fallback,
                        d.normalized || out.info.action_normalized, std::move(d.reply_text)});
  }
  if (store_features && !tr.aborted) {
    kernel::encode_window(w, feat);
    tr.features.insert(tr.features.end(), feat.begin(), feat.end());
  }
  if (!tr.terminated) {
    tr.terminated = !w.alive || w.finished;
    tr.truncated = !tr.terminated && w.truncated();
  }
  tr.death = w.death;
  tr.finished = w.finished;
  tr.x_final = w.x_tiles();
  return tr;
}

std::int64_t RolloutBatch::samples() const {
  std::int64_t n = 0;
  for (const auto& t : trajectories) n += t.length();
  return n;
}

RolloutBatch collect_rollouts(const PolicyBackend& backend, const kernel::LevelSet& levels, const RolloutConfig& config,
                              const CurriculumState& curriculum, std::int64_t batch_index, bool store_features) {
  if (config.trajectories_per_batch < 1) throw ValidationError("trajectories_per_batch must be >= 1");
  if (curriculum.levels.size() != curriculum.weights.size() || curriculum.levels.empty()) {
    throw ValidationError("curriculum weights do not match its levels");
  }
  kernel::KernelOptions kopts;
  kopts.death_penalty = config.death_penalty;
  RolloutBatch batch;
  std::int64_t samples = 0;
  for (int group = 0;; ++group) {
    const int M = config.trajectories_per_batch;
    std::vector<Trajectory> out(static_cast<std::size_t>(M));
#pragma omp parallel for schedule(dynamic, 1)
    for (int i = 0; i < M; ++i) {
      const std::uint64_t index = static_cast<std::uint64_t>(group) * static_cast<std::uint64_t>(M) + static_cast<std::uint64_t>(i);
      std::mt19937_64 rng(derive_seed(config.seed, static_cast<std::uint64_t>(batch_index), index));
      const std::size_t k = draw_level(curriculum.weights, rng);
      const std::uint64_t episode_seed = rng();
      out[static_cast<std::size_t>(i)] =
          run_episode(backend, levels, curriculum.levels[k], episode_seed, config.max_turns, rng, kopts, store_features);
    }
    for (auto& t : out) {
      if (t.aborted) {
        ++batch.aborted;
        batch.abort_reasons.push_back(t.abort_reason);
        continue;
      }
      samples += t.length();
      batch.trajectories.push_back(std::move(t));
    }
    if (samples >= config.min_samples_per_batch) break;
    // Guard against a backend that aborts everything.
    if (batch.trajectories.empty() && group > 0) break;
  }
  return batch;
}

std::vector<std::pair<kernel::LevelId, int>> lengths_of(const RolloutBatch& batch) {
  std::vector<std::pair<kernel::LevelId, int>> out;
  for (const auto& t : batch.trajectories) out.emplace_back(t.level, t.length());
  return out;
}

std::vector<LevelScore> evaluate(const PolicyBackend& backend, const kernel::LevelSet& levels,
                                 const std::vector<kernel::LevelId>& ids, int episodes, std::uint64_t seed, int max_turns) {
  if (episodes < 1) throw ValidationError("evaluate needs at least one episode");
  std::vector<LevelScore> scores;
  for (std::size_t k = 0; k < ids.size(); ++k) {
    std::vector<double> progress(static_cast<std::size_t>(episodes));
    std::vector<char> finished(static_cast<std::size_t>(episodes));
#pragma omp parallel for schedule(dynamic, 1)
    for (int e = 0; e < episodes; ++e) {
      std::mt19937_64 rng(derive_seed(seed, 0xE7A1ULL + k, static_cast<std::uint64_t>(e)));
      const std::uint64_t episode_seed = rng();
      const auto t = run_episode(backend, levels, ids[k], episode_seed, max_turns, rng, {}, false);
      progress[static_cast<std::size_t>(e)] = t.aborted ? 0.0 : t.progress();
      finished[static_cast<std::size_t>(e)] = t.finished ? 1 : 0;
    }
    LevelScore s;
    s.level = ids[k];
    s.episodes = episodes;
    double sum = 0.0;
    int fin = 0;
    for (int e = 0; e < episodes; ++e) {
      sum += progress[static_cast<std::size_t>(e)];
      fin += finished[static_cast<std::size_t>(e)];
    }
    s.mean_progress = sum / episodes;
    s.finish_rate = static_cast<double>(fin) / episodes;
    if (episodes > 1) {
      double sq = 0.0;
      for (double p : progress) sq += (p - s.mean_progress) * (p - s.mean_progress);
      s.std_error = std::sqrt(sq / (episodes - 1)) / std::sqrt(static_cast<double>(episodes));
    }
    scores.push_back(s);
  }
  return scores;
}

}  // namespace tilerl::train
