#include "tilerl/train/trainer.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "tilerl/error.hpp"
#include "tilerl/kernel/observation.hpp"
#include "tilerl/nn/categorical.hpp"
#include "tilerl/nn/init.hpp"

namespace tilerl::train {

namespace {

using json = nlohmann::json;
constexpr int kF = kernel::FeatureWindow::kSize;
constexpr std::size_t kForwardChunk = 4096;

// Fisher-Yates over rng() so the order is the same with every standard library.
void shuffle(std::vector<std::size_t>& order, std::mt19937_64& rng) {
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }
}

nn::Tensor gather(const std::vector<SampleView>& samples, const std::vector<std::size_t>& order, std::size_t begin,
                  std::size_t count, int width) {
  nn::Tensor x({static_cast<int>(count), width});
  for (std::size_t i = 0; i < count; ++i) {
    const float* src = samples[order[begin + i]].features;
    std::copy(src, src + width, x.data.begin() + static_cast<std::ptrdiff_t>(i * static_cast<std::size_t>(width)));
  }
  return x;
}

nn::AdamConfig adam(double lr, double clip) {
  nn::AdamConfig c;
  c.lr = lr;
  c.clip_norm = clip;
  return c;
}

}  // namespace

double EvalRow::mean_progress() const {
  if (scores.empty()) return 0.0;
  double s = 0.0;
  for (const auto& l : scores) s += l.mean_progress;
  return s / static_cast<double>(scores.size());
}

nn::NetworkSpec actor_spec(const TrainConfig& train, kernel::ActionSpace space) {
  const int n = static_cast<int>(kernel::enumerate_actions(space).size());
  return nn::NetworkSpec::mlp(kF, train.actor_hidden, n, false);
}

nn::NetworkSpec critic_spec(const TrainConfig& train) { return nn::NetworkSpec::mlp(kF, train.critic_hidden, 0, true); }

std::vector<double> critic_values(const nn::Network<float>& critic, const float* rows, std::size_t count) {
  std::vector<double> out(count);
  for (std::size_t begin = 0; begin < count; begin += kForwardChunk) {
    const std::size_t n = std::min(kForwardChunk, count - begin);
    nn::Tensor x({static_cast<int>(n), kF});
    std::copy(rows + begin * kF, rows + (begin + n) * kF, x.data.begin());
    const nn::Tensor v = critic.forward(x);
    for (std::size_t i = 0; i < n; ++i) out[begin + i] = v.data[i];
  }
  return out;
}

PolicyStats policy_update(nn::Network<float>& actor, nn::OptimizerState& opt, const std::vector<SampleView>& samples,
                          const TrainConfig& config, std::mt19937_64& rng) {
  PolicyStats st;
  if (samples.empty()) return st;
  const int A = actor.spec().logits;
  const int F = actor.spec().input_size();
  for (const auto& s : samples) {
    if (s.action < 0 || s.action >= A) throw ValidationError("policy_update: sample action outside the actor's action list");
    if (!std::isfinite(s.advantage)) throw ValidationError("policy_update: non-finite advantage");
  }
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t mb = static_cast<std::size_t>(config.minibatch_size);
  double ratio_sum = 0.0, clipped = 0.0, surr_sum = 0.0, kl_sum = 0.0, ent_sum = 0.0;
  std::int64_t rows = 0;

  for (int epoch = 0; epoch < config.epochs_per_step && !st.early_stopped; ++epoch) {
    shuffle(order, rng);
    for (std::size_t begin = 0; begin < order.size(); begin += mb) {
      const std::size_t B = std::min(mb, order.size() - begin);
      std::vector<double> adv(B);
      for (std::size_t i = 0; i < B; ++i) adv[i] = samples[order[begin + i]].advantage;
      if (config.normalize_minibatch_advantages && B > 1) {
        // Unbiased std as in the usual PyTorch baseline.
        double mean = std::accumulate(adv.begin(), adv.end(), 0.0) / static_cast<double>(B);
        double sq = 0.0;
        for (double a : adv) sq += (a - mean) * (a - mean);
        const double sd = std::sqrt(sq / static_cast<double>(B - 1));
        for (double& a : adv) a = (a - mean) / (sd + 1e-8);
      }

      const nn::Tensor x = gather(samples, order, begin, B, F);
      nn::Tape<float> tape;
      const nn::Tensor logits = actor.forward(x, &tape);
      std::vector<nn::Categorical> dists;
      dists.reserve(B);
      std::vector<double> ratio(B);
      double kl = 0.0;
      for (std::size_t i = 0; i < B; ++i) {
        dists.emplace_back(std::span<const float>(logits.data.data() + i * static_cast<std::size_t>(A), static_cast<std::size_t>(A)));
        const double logr = dists[i].logprob(samples[order[begin + i]].action) - samples[order[begin + i]].old_logprob;
        ratio[i] = std::exp(logr);
        kl += (ratio[i] - 1.0) - logr;
      }
      kl /= static_cast<double>(B);
      if (config.target_kl > 0.0 && kl > 1.5 * config.target_kl) {
        st.early_stopped = true;
        break;
      }

      nn::Tensor upstream({static_cast<int>(B), A}, 0.0f);
      const double inv_b = 1.0 / static_cast<double>(B);
      for (std::size_t i = 0; i < B; ++i) {
        if (adv[i] < 0.0) ++st.negative_advantages;
        const double r = ratio[i];
        const double clip_r = std::clamp(r, 1.0 - config.eps_low, 1.0 + config.eps_high);
        const double s1 = r * adv[i];
        const double s2 = clip_r * adv[i];
        surr_sum += std::min(s1, s2);
        ratio_sum += r;
        if (r < 1.0 - config.eps_low || r > 1.0 + config.eps_high) clipped += 1.0;
        const double g = s1 <= s2 ? adv[i] * r : 0.0;
        const auto& p = dists[i].probs();
        const double H = dists[i].entropy();
        ent_sum += H;
        const int a = samples[order[begin + i]].action;
        float* up = upstream.data.data() + i * static_cast<std::size_t>(A);
        for (int j = 0; j < A; ++j) {
          const double pj = p[static_cast<std::size_t>(j)];
          double d = -g * ((j == a ? 1.0 : 0.0) - pj);
          if (config.entropy_coef > 0.0 && pj > 0.0) d += config.entropy_coef * pj * (std::log(pj) + H);
          up[j] = static_cast<float>(d * inv_b);
        }
      }
      kl_sum += kl * static_cast<double>(B);
      rows += static_cast<std::int64_t>(B);
      const auto grads = actor.backward(tape, upstream);
      nn::adam_step(actor, grads, opt);
      ++st.minibatches;
    }
  }
  if (rows > 0) {
    const double n = static_cast<double>(rows);
    st.surrogate = surr_sum / n;
    st.mean_ratio = ratio_sum / n;
    st.clip_fraction = clipped / n;
    st.approx_kl = kl_sum / n;
    st.entropy = ent_sum / n;
  }
  return st;
}

CriticStats train_critic(nn::Network<float>& critic, nn::OptimizerState& opt, const std::vector<SampleView>& samples,
                         const TrainConfig& config, std::mt19937_64& rng) {
  CriticStats st;
  if (samples.empty()) return st;
  const int F = critic.spec().input_size();
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  const std::size_t mb = static_cast<std::size_t>(config.minibatch_size);
  const double c = config.value_clip;
  for (int epoch = 0; epoch < config.critic_epochs; ++epoch) {
    shuffle(order, rng);
    double loss_sum = 0.0;
    int batches = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += mb) {
      const std::size_t B = std::min(mb, order.size() - begin);
      const nn::Tensor x = gather(samples, order, begin, B, F);
      nn::Tape<float> tape;
      const nn::Tensor v = critic.forward(x, &tape);
      nn::Tensor upstream({static_cast<int>(B), 1}, 0.0f);
      double loss = 0.0;
      for (std::size_t i = 0; i < B; ++i) {
        const auto& s = samples[order[begin + i]];
        double pred = v.data[i];
        double pass = 1.0;
        if (c > 0.0) {
          const double delta = pred - s.old_value;
          if (std::abs(delta) > c) pass = 0.0;
          pred = s.old_value + std::clamp(delta, -c, c);
        }
        const double d = pred - s.target;
        double grad = 0.0;
        if (config.critic_loss == CriticLoss::SmoothL1) {
          loss += std::abs(d) < 1.0 ? 0.5 * d * d : std::abs(d) - 0.5;
          grad = std::clamp(d, -1.0, 1.0);
        } else {
          loss += d * d;
          grad = 2.0 * d;
        }
        upstream.data[i] = static_cast<float>(pass * grad / static_cast<double>(B));
      }
      loss /= static_cast<double>(B);
      if (!std::isfinite(loss)) throw NumericError("critic loss is not finite");
      const auto grads = critic.backward(tape, upstream);
      nn::adam_step(critic, grads, opt);
      ++st.updates;
      loss_sum += loss;
      ++batches;
    }
    st.loss = loss_sum / std::max(batches, 1);
  }
  return st;
}

Trainer::Trainer(RunConfig config, const kernel::LevelSet& levels)
    : config_(std::move(config)),
      levels_(levels),
      actor_(actor_spec(config_.train, config_.rollout.action_space)),
      critic_(critic_spec(config_.train)) {
  init(nullptr);
}

Trainer::Trainer(RunConfig config, const kernel::LevelSet& levels, std::shared_ptr<const PolicyBackend> backend)
    : config_(std::move(config)),
      levels_(levels),
      actor_(actor_spec(config_.train, config_.rollout.action_space)),
      critic_(critic_spec(config_.train)) {
  if (!backend) throw ValidationError("trainer needs a backend");
  init(std::move(backend));
}

void Trainer::init(std::shared_ptr<const PolicyBackend> backend) {
  validate(config_);
  for (const auto& id : config_.rollout.levels) {
    if (!levels_.get(id)) throw NotFoundError("rollout.levels: unknown level " + kernel::to_string(id));
  }
  nn::init_orthogonal(actor_, config_.train.init_seed);
  nn::init_orthogonal(critic_, derive_seed(config_.train.init_seed, 0xC817));
  actor_opt_ = nn::make_optimizer(actor_, adam(config_.train.policy_lr, config_.train.policy_clip_norm));
  critic_opt_ = nn::make_optimizer(critic_, adam(config_.train.critic_lr, config_.train.critic_clip_norm));
  if (backend) {
    backend_ = std::move(backend);
    in_process_ = false;
  } else {
    SamplingOptions sampling{config_.rollout.temperature, config_.rollout.top_p, config_.rollout.selection};
    backend_ = std::make_shared<ActorBackend>(actor_, config_.rollout.action_space, sampling);
  }
  curriculum_ = make_curriculum(config_.rollout.levels, config_.train.curriculum);
}

bool Trainer::done() const {
  if (steps_ >= config_.train.total_steps) return true;
  return config_.train.max_samples > 0 && samples_ >= config_.train.max_samples;
}

StepStats Trainer::step() {
  const auto& tc = config_.train;
  StepStats st;
  st.weights = curriculum_.weights;
  RolloutBatch batch = collect_rollouts(*backend_, levels_, config_.rollout, curriculum_, steps_, true);
  ++steps_;
  st.step = steps_;
  st.aborted = batch.aborted;
  st.trajectories = static_cast<int>(batch.trajectories.size());
  st.batch_samples = batch.samples();
  samples_ += st.batch_samples;
  st.total_samples = samples_;

  const std::size_t K = curriculum_.levels.size();
  st.level_progress.assign(K, std::numeric_limits<double>::quiet_NaN());
  st.level_samples.assign(K, 0);
  std::vector<int> level_count(K, 0);
  std::vector<double> level_sum(K, 0.0);
  double prog = 0.0, fin = 0.0;
  for (const auto& t : batch.trajectories) {
    const std::size_t k = curriculum_.index_of(t.level);
    level_sum[k] += t.progress();
    ++level_count[k];
    st.level_samples[k] += t.length();
    prog += t.progress();
    fin += t.finished ? 1.0 : 0.0;
  }
  for (std::size_t k = 0; k < K; ++k) {
    if (level_count[k] > 0) st.level_progress[k] = level_sum[k] / level_count[k];
  }
  last_advantages_.clear();
  if (batch.trajectories.empty()) {
    st.degenerate = true;
    st.degenerate_reason = "every trajectory aborted";
    ++degenerate_batches_;
    last_batch_ = std::move(batch);
    return st;
  }
  st.mean_progress = prog / st.trajectories;
  st.finish_rate = fin / st.trajectories;
  st.mean_length = static_cast<double>(st.batch_samples) / st.trajectories;

  // Flatten turns and collect the final-state rows.
  std::vector<SampleView> samples;
  samples.reserve(static_cast<std::size_t>(st.batch_samples));
  std::vector<float> turn_rows;
  std::vector<float> final_rows;
  turn_rows.reserve(static_cast<std::size_t>(st.batch_samples) * kF);
  for (const auto& t : batch.trajectories) {
    const auto T = static_cast<std::size_t>(t.length());
    turn_rows.insert(turn_rows.end(), t.features.begin(), t.features.begin() + static_cast<std::ptrdiff_t>(T * kF));
    final_rows.insert(final_rows.end(), t.features.begin() + static_cast<std::ptrdiff_t>(T * kF), t.features.end());
  }
  {
    std::size_t row = 0;
    for (const auto& t : batch.trajectories) {
      for (const auto& turn : t.turns) {
        SampleView s;
        s.features = turn_rows.data() + row * kF;
        s.action = turn.action_index;
        s.old_logprob = turn.logprob;
        samples.push_back(s);
        ++row;
      }
    }
  }

  advantage::TrajectoryBatch items;
  for (const auto& t : batch.trajectories) {
    advantage::BatchItem item;
    item.level_id = kernel::to_string(t.level);
    for (const auto& turn : t.turns) item.seq.rewards.push_back(turn.reward);
    item.seq.terminated = t.terminated;
    item.seq.truncated = t.truncated;
    items.push_back(std::move(item));
  }
  const bool bootstrap = tc.bootstrap_truncation;
  auto fill_values = [&](const nn::Network<float>& critic) {
    const auto v = critic_values(critic, turn_rows.data(), samples.size());
    const auto vf = critic_values(critic, final_rows.data(), items.size());
    std::size_t row = 0;
    for (std::size_t i = 0; i < items.size(); ++i) {
      items[i].values.assign(v.begin() + static_cast<std::ptrdiff_t>(row),
                             v.begin() + static_cast<std::ptrdiff_t>(row + items[i].seq.rewards.size()));
      row += items[i].seq.rewards.size();
      items[i].bootstrap = (bootstrap && items[i].seq.truncated) ? vf[i] : 0.0;
    }
    return v;
  };

  advantage::EstimatorOptions eo;
  eo.gamma = tc.gamma;
  eo.lambda = tc.lambda;
  eo.mean_center_ppo = tc.mean_center_ppo;
  eo.ppo_lambda = tc.ppo_lambda;
  std::mt19937_64 update_rng(derive_seed(config_.rollout.seed, 0x0FD7, static_cast<std::uint64_t>(steps_)));

  advantage::AdvantageResult adv;
  if (!advantage::needs_critic(tc.estimator)) {
    adv = advantage::compute_advantages(tc.estimator, items, eo);
  } else if (tc.estimator == advantage::EstimatorKind::Gae) {
    // Classical order: advantages from the pre-update critic, then regress
    // onto A + V with value clipping around V.
    const auto v = fill_values(critic_);
    adv = advantage::compute_advantages(tc.estimator, items, eo);
    std::size_t row = 0;
    for (const auto& a : adv.per_trajectory) {
      for (double x : a.values) {
        samples[row].old_value = v[row];
        samples[row].target = x + v[row];
        ++row;
      }
    }
    st.critic = train_critic(critic_, critic_opt_, samples, tc, update_rng);
  } else {
    // Turn-level critic: fit V onto return-to-go, then baseline with the fitted critic.
    const auto v = fill_values(critic_);
    std::size_t row = 0;
    for (const auto& item : items) {
      auto ret = advantage::return_to_go(item.seq, tc.gamma);
      double carry = item.bootstrap;
      for (std::size_t t = ret.size(); t-- > 0;) {
        carry *= tc.gamma;
        samples[row + t].target = ret[t] + carry;
      }
      for (std::size_t t = 0; t < ret.size(); ++t) samples[row + t].old_value = v[row + t];
      row += ret.size();
    }
    st.critic = train_critic(critic_, critic_opt_, samples, tc, update_rng);
    fill_values(critic_);
    adv = advantage::compute_advantages(tc.estimator, items, eo);
  }
  critic_updates_ += st.critic.updates;

  {
    std::size_t row = 0;
    for (const auto& a : adv.per_trajectory) {
      for (double x : a.values) samples[row++].advantage = x;
    }
  }
  last_advantages_ = adv.per_trajectory;
  st.degenerate = adv.degenerate;
  st.degenerate_reason = adv.reason;
  if (adv.degenerate) {
    ++degenerate_batches_;
  } else if (in_process_) {
    st.policy = policy_update(actor_, actor_opt_, samples, tc, update_rng);
    st.policy_updated = st.policy.minibatches > 0;
    policy_minibatches_ += st.policy.minibatches;
    negative_advantages_ += st.policy.negative_advantages;
  }

  curriculum_ = update_curriculum(lengths_of(batch), curriculum_);
  last_batch_ = std::move(batch);
  return st;
}

EvalRow Trainer::evaluate() const {
  EvalRow row;
  row.step = steps_;
  row.total_samples = samples_;
  row.scores = train::evaluate(*backend_, levels_, config_.rollout.levels, config_.train.eval_episodes,
                               derive_seed(config_.rollout.seed, 0xE7A1), config_.rollout.max_turns);
  return row;
}

namespace {

json optimizer_summary(const nn::OptimizerState& s) { return {{"step", s.step}, {"lr", s.config.lr}}; }

}  // namespace

nn::Checkpoint Trainer::checkpoint() const {
  json meta;
  meta["steps"] = steps_;
  meta["samples"] = samples_;
  meta["critic_updates"] = critic_updates_;
  meta["policy_minibatches"] = policy_minibatches_;
  meta["negative_advantages"] = negative_advantages_;
  meta["degenerate_batches"] = degenerate_batches_;
  json cur;
  cur["mode"] = std::string(to_string(curriculum_.mode));
  cur["levels"] = json::array();
  for (const auto& id : curriculum_.levels) cur["levels"].push_back(kernel::to_string(id));
  cur["avg_length"] = curriculum_.avg_length;
  cur["seen"] = curriculum_.seen;
  cur["weights"] = curriculum_.weights;
  meta["curriculum"] = cur;
  meta["actor_optimizer"] = optimizer_summary(actor_opt_);
  meta["config"] = dump_run_config(config_);
  nn::Checkpoint ck;
  ck.metadata_json = meta.dump();
  ck.entries.push_back({"actor", actor_, actor_opt_});
  ck.entries.push_back({"critic", critic_, critic_opt_});
  return ck;
}

void Trainer::restore(const nn::Checkpoint& ck) {
  const auto& a = ck.get("actor");
  const auto& c = ck.get("critic");
  if (!(a.net.spec() == actor_.spec())) throw SchemaError("checkpoint actor does not match the configured actor");
  if (!(c.net.spec() == critic_.spec())) throw SchemaError("checkpoint critic does not match the configured critic");
  json meta;
  try {
    meta = json::parse(ck.metadata_json);
    steps_ = meta.at("steps").get<std::int64_t>();
    samples_ = meta.at("samples").get<std::int64_t>();
    critic_updates_ = meta.at("critic_updates").get<std::int64_t>();
    policy_minibatches_ = meta.at("policy_minibatches").get<std::int64_t>();
    negative_advantages_ = meta.at("negative_advantages").get<std::int64_t>();
    degenerate_batches_ = meta.at("degenerate_batches").get<std::int64_t>();
    const auto& cur = meta.at("curriculum");
    CurriculumState s = make_curriculum(config_.rollout.levels, config_.train.curriculum);
    const auto names = cur.at("levels").get<std::vector<std::string>>();
    if (names.size() != s.levels.size()) throw SchemaError("checkpoint curriculum covers different levels");
    for (std::size_t k = 0; k < names.size(); ++k) {
      if (names[k] != kernel::to_string(s.levels[k])) throw SchemaError("checkpoint curriculum covers different levels");
    }
    s.avg_length = cur.at("avg_length").get<std::vector<double>>();
    s.seen = cur.at("seen").get<std::vector<bool>>();
    s.weights = cur.at("weights").get<std::vector<double>>();
    if (s.avg_length.size() != names.size() || s.seen.size() != names.size() || s.weights.size() != names.size()) {
      throw SchemaError("checkpoint curriculum arrays have the wrong length");
    }
    curriculum_ = std::move(s);
  } catch (const json::exception& e) {
    throw SchemaError(std::string("checkpoint metadata: ") + e.what());
  }
  actor_.mutable_params() = a.net.params();
  critic_.mutable_params() = c.net.params();
  actor_opt_ = a.optimizer ? *a.optimizer : nn::make_optimizer(actor_, actor_opt_.config);
  critic_opt_ = c.optimizer ? *c.optimizer : nn::make_optimizer(critic_, critic_opt_.config);
}

void run_training(Trainer& trainer, const TrainHooks& hooks) {
  auto eval = [&]() {
    const EvalRow row = trainer.evaluate();
    if (hooks.on_eval) hooks.on_eval(trainer, row);
    return hooks.stop_after_eval && hooks.stop_after_eval(trainer, row);
  };
  if (eval()) return;
  const std::int64_t interval = trainer.config().train.eval_interval_samples;
  std::int64_t next = trainer.total_samples() + interval;
  bool evaluated_last = true;
  while (!trainer.done()) {
    const StepStats s = trainer.step();
    if (hooks.on_step) hooks.on_step(trainer, s);
    evaluated_last = false;
    if (interval > 0 && trainer.total_samples() >= next) {
      while (next <= trainer.total_samples()) next += interval;
      evaluated_last = true;
      if (eval()) return;
    }
  }
  if (!evaluated_last) eval();
}

}  // namespace tilerl::train
