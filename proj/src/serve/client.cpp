#include <httplib.h>
#include <json.hpp>

#include <memory>
#include <random>

#include "tilerl/kernel/actions.hpp"
#include "tilerl/serve/env_server.hpp"

namespace tilerl::serve {

namespace {

SessionSummary aborted(std::string id, std::string why, std::int64_t turns) {
  SessionSummary s;
  s.session_id = std::move(id);
  s.status = "aborted";
  s.reason = std::move(why);
  s.turns = turns;
  return s;
}

}  // namespace

SessionSummary run_session(const std::string& base_url, const std::string& level_id, const PolicyCallback& policy,
                           std::optional<std::uint64_t> seed, double timeout_seconds) {
  httplib::Client client(base_url);
  const auto secs = static_cast<time_t>(timeout_seconds);
  client.set_connection_timeout(secs, 0);
  client.set_read_timeout(secs, 0);
  client.set_write_timeout(secs, 0);

  nlohmann::json open{{"schema_version", protocol::kWireSchemaVersion}, {"level_id", level_id}};
  if (seed) open["seed"] = *seed;
  auto res = client.Post("/v1/sessions", open.dump(), "application/json");
  if (!res) return aborted("", "connect failed: " + httplib::to_string(res.error()), 0);
  if (res->status != 200) return aborted("", "HTTP " + std::to_string(res->status) + ": " + res->body, 0);

  std::string session_id;
  std::int64_t turns = 0;
  std::string body = res->body;
  try {
    while (true) {
      if (protocol::is_session_end(body)) {
        const auto end = protocol::session_end_from_json(body);
        SessionSummary s;
        s.session_id = end.session_id;
        s.status = "completed";
        s.reason = end.reason;
        s.turns = end.turns;
        s.progress = end.progress;
        s.fallbacks = end.fallbacks;
        return s;
      }
      const auto obs = protocol::observation_from_json(body);
      session_id = obs.meta.session_id;
      protocol::ReplyEnvelope reply;
      reply.reply_text = policy(obs);
      res = client.Post("/v1/sessions/" + session_id + "/turn", protocol::to_json(reply), "application/json");
      if (!res) return aborted(session_id, "connection lost: " + httplib::to_string(res.error()), turns);
      if (res->status != 200) return aborted(session_id, "HTTP " + std::to_string(res->status) + ": " + res->body, turns);
      ++turns;
      body = res->body;
    }
  } catch (const std::exception& e) {
    return aborted(session_id, e.what(), turns);
  }
}

namespace stubs {

PolicyCallback always_right() {
  const std::string text = protocol::format_reply(kernel::ActionSet{kernel::Button::Right}, "open ground ahead", "keep moving right");
  return [text](const protocol::ObservationPayload&) { return text; };
}

PolicyCallback right_jump_cycle() {
  const std::string jump = protocol::format_reply(kernel::ActionSet{kernel::Button::Right, kernel::Button::A},
                                                  "obstacle ahead", "jump while moving right");
  const std::string walk = protocol::format_reply(kernel::ActionSet{kernel::Button::Right}, "landing", "walk right");
  return [jump, walk](const protocol::ObservationPayload& p) { return p.meta.turn_index % 2 == 0 ? jump : walk; };
}

PolicyCallback random_valid(std::uint64_t seed) {
  auto rng = std::make_shared<std::mt19937_64>(seed);
  const auto actions = kernel::enumerate_actions(kernel::ActionSpace::Protocol);
  return [rng, actions](const protocol::ObservationPayload&) {
    const auto a = actions[(*rng)() % actions.size()];
    return protocol::format_reply(a, "a randomly chosen frame", "a randomly chosen action");
  };
}

}  // namespace stubs

}  // namespace tilerl::serve
