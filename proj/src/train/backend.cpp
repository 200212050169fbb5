#include "tilerl/train/backend.hpp"

#include <httplib.h>

#include <algorithm>
#include <numeric>

#include "tilerl/error.hpp"
#include "tilerl/kernel/observation.hpp"
#include "tilerl/nn/categorical.hpp"
#include "tilerl/protocol/prompt.hpp"
#include "tilerl/protocol/wire.hpp"

namespace tilerl::train {

int choose_action(std::span<const float> logits, const SamplingOptions& options, std::mt19937_64& rng) {
  if (options.selection == ActionSelection::Greedy) return nn::Categorical(logits).argmax();
  std::vector<double> scaled(logits.begin(), logits.end());
  for (double& v : scaled) v /= options.temperature;
  const nn::Categorical dist{std::span<const double>(scaled)};
  if (options.top_p >= 1.0) return dist.sample(rng);
  // Nucleus: most probable actions until their mass reaches top_p.
  const auto& p = dist.probs();
  std::vector<int> order(p.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return p[static_cast<std::size_t>(a)] > p[static_cast<std::size_t>(b)]; });
  double mass = 0.0;
  std::size_t keep = 0;
  while (keep < order.size() && mass < options.top_p) mass += p[static_cast<std::size_t>(order[keep++])];
  double u = nn::unit_uniform(rng) * mass;
  for (std::size_t i = 0; i < keep; ++i) {
    u -= p[static_cast<std::size_t>(order[i])];
    if (u < 0.0) return order[i];
  }
  return order[keep - 1];
}

ActorBackend::ActorBackend(const nn::Network<float>& actor, kernel::ActionSpace space, SamplingOptions sampling)
    : actor_(actor), actions_(kernel::enumerate_actions(space)), sampling_(sampling) {
  if (actor.spec().logits != static_cast<int>(actions_.size())) {
    throw ValidationError("actor has " + std::to_string(actor.spec().logits) + " logits but the action space has " +
                          std::to_string(actions_.size()) + " actions");
  }
}

Decision ActorBackend::decide(const TurnInput& input, std::mt19937_64& rng) const {
  nn::Tensor x({1, static_cast<int>(input.features.size())});
  std::copy(input.features.begin(), input.features.end(), x.data.begin());
  const nn::Tensor logits = actor_.forward(x);
  const int a = choose_action(logits.data, sampling_, rng);
  Decision d;
  d.action_index = a;
  d.action = actions_[static_cast<std::size_t>(a)];
  d.logprob = nn::Categorical(std::span<const float>(logits.data)).logprob(a);
  return d;
}

Decision ScriptedBackend::decide(const TurnInput& input, std::mt19937_64& /*rng*/) const {
  Decision d;
  d.action = rule_(input.world);
  return d;
}

ScriptedBackend ScriptedBackend::constant(kernel::ActionSet action) {
  return ScriptedBackend([action](const kernel::WorldState&) { return action; }, "scripted_constant");
}

ScriptedBackend ScriptedBackend::sequence(std::vector<kernel::ActionSet> actions) {
  if (actions.empty()) throw ValidationError("scripted sequence needs at least one action");
  return ScriptedBackend(
      [actions = std::move(actions)](const kernel::WorldState& w) {
        const auto t = static_cast<std::size_t>(w.turn_count);
        return actions[std::min(t, actions.size() - 1)];
      },
      "scripted_sequence");
}

RemoteBackend::RemoteBackend(Options options) : options_(std::move(options)) {
  // Split "http://host:port/path" into the client base and request path.
  const std::string& url = options_.url;
  const auto scheme = url.find("://");
  const auto slash = url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
  host_ = slash == std::string::npos ? url : url.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : url.substr(slash);
  if (host_.empty()) throw ValidationError("remote backend needs a URL");
  prompt_ = protocol::render_prompt(protocol::default_template(),
                                    {{"max_buttons", std::to_string(options_.validation.max_buttons)}});
}

Decision RemoteBackend::decide(const TurnInput& input, std::mt19937_64& /*rng*/) const {
  const auto frame = kernel::render(input.world, options_.upsample);
  protocol::TurnMeta meta{input.world.turn_count, kernel::to_string(input.world.level->id), ""};
  const auto payload = protocol::encode_observation(frame, meta, prompt_);

  httplib::Client client(host_);
  const auto secs = static_cast<time_t>(options_.timeout_seconds);
  client.set_connection_timeout(secs, 0);
  client.set_read_timeout(secs, 0);
  auto res = client.Post(path_, protocol::to_json(payload), "application/json");
  if (!res) throw Error("remote policy unreachable: " + httplib::to_string(res.error()));
  if (res->status != 200) throw Error("remote policy returned HTTP " + std::to_string(res->status));
  const auto reply = protocol::reply_from_json(res->body);
  const auto parsed = protocol::decide(reply.reply_text, options_.validation);
  Decision d;
  d.action = parsed.action;
  d.reply_text = reply.reply_text;
  d.fallback = parsed.fallback_used;
  d.normalized = parsed.normalized;
  d.terminate = parsed.terminate;
  d.reason = parsed.reason;
  return d;
}

}  // namespace tilerl::train
