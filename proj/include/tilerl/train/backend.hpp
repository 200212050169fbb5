#pragma once

#include <functional>
#include <memory>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tilerl/kernel/actions.hpp"
#include "tilerl/kernel/observation.hpp"
#include "tilerl/kernel/world.hpp"
#include "tilerl/nn/network.hpp"
#include "tilerl/protocol/reply.hpp"
#include "tilerl/train/config.hpp"

namespace tilerl::train {

struct Decision {
  kernel::ActionSet action{kernel::Button::Noop};
  int action_index = -1;  // index into the backend's action list; -1 for remote
  double logprob = 0.0;   // log pi(a|o) under the collecting policy
  std::string reply_text;
  bool fallback = false;
  bool normalized = false;
  bool terminate = false;  // strict protocol rejection
  std::string reason;
};

struct TurnInput {
  const kernel::WorldState& world;
  std::span<const float> features;  // encode_window(world)
};

// decide() is called concurrently from rollout workers and must not mutate
// shared state; the rng is owned by the calling worker.
class PolicyBackend {
 public:
  virtual ~PolicyBackend() = default;
  [[nodiscard]] virtual std::string kind() const = 0;
  [[nodiscard]] virtual bool trainable() const { return false; }
  virtual Decision decide(const TurnInput& input, std::mt19937_64& rng) const = 0;
};

struct SamplingOptions {
  double temperature = 1.0;
  double top_p = 1.0;
  ActionSelection selection = ActionSelection::Sample;
};

// Index drawn from softmax(logits / temperature) restricted to the top-p
// nucleus, or the argmax under greedy selection.
int choose_action(std::span<const float> logits, const SamplingOptions& options, std::mt19937_64& rng);

// The in-process dense actor over encode_window features.
class ActorBackend final : public PolicyBackend {
 public:
  ActorBackend(const nn::Network<float>& actor, kernel::ActionSpace space, SamplingOptions sampling);
  [[nodiscard]] std::string kind() const override { return "in_process"; }
  [[nodiscard]] bool trainable() const override { return true; }
  Decision decide(const TurnInput& input, std::mt19937_64& rng) const override;
  [[nodiscard]] const std::vector<kernel::ActionSet>& actions() const { return actions_; }

 private:
  const nn::Network<float>& actor_;
  std::vector<kernel::ActionSet> actions_;
  SamplingOptions sampling_;
};

// A fixed rule over the world state; used for oracles and curriculum checks.
class ScriptedBackend final : public PolicyBackend {
 public:
  using Rule = std::function<kernel::ActionSet(const kernel::WorldState&)>;
  explicit ScriptedBackend(Rule rule, std::string name = "scripted") : rule_(std::move(rule)), name_(std::move(name)) {}
  [[nodiscard]] std::string kind() const override { return name_; }
  Decision decide(const TurnInput& input, std::mt19937_64& rng) const override;

  static ScriptedBackend constant(kernel::ActionSet action);
  // Replays actions by turn index, then repeats the last one.
  static ScriptedBackend sequence(std::vector<kernel::ActionSet> actions);

 private:
  Rule rule_;
  std::string name_;
};

// Inference-only client of a remote text policy: POSTs each observation
// envelope to `url` and applies the protocol validator to the reply.
class RemoteBackend final : public PolicyBackend {
 public:
  struct Options {
    std::string url;  // e.g. http://127.0.0.1:8000/act
    int upsample = kernel::kDefaultUpsample;
    double timeout_seconds = 60.0;
    protocol::ValidationOptions validation;
  };
  explicit RemoteBackend(Options options);
  [[nodiscard]] std::string kind() const override { return "remote"; }
  // Throws on transport failure; the collector marks the trajectory aborted.
  Decision decide(const TurnInput& input, std::mt19937_64& rng) const override;

 private:
  Options options_;
  std::string host_;
  std::string path_;
  std::string prompt_;
};

}  // namespace tilerl::train
