#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "tilerl/kernel/level.hpp"
#include "tilerl/protocol/reply.hpp"
#include "tilerl/protocol/wire.hpp"

namespace tilerl::serve {

// HTTP routes, all JSON bodies:
//   POST /v1/sessions             {"schema_version":1,"level_id":"1-1"[,"seed":N]}
//                                 -> first observation envelope
//   POST /v1/sessions/<id>/turn   reply envelope -> next observation or session end
//   GET  /v1/health               {"status":"ok"}
// A malformed body gets HTTP 400 with {"schema_version":1,"error":...} and
// leaves the session untouched. Unknown or expired sessions get 404.
struct ServeOptions {
  std::string host = "127.0.0.1";
  int port = 0;  // 0 picks a free port
  const kernel::LevelSet* levels = nullptr;
  int max_turns = 80;
  int upsample = kernel::kDefaultUpsample;
  protocol::ValidationOptions validation;
  double idle_timeout_seconds = 300.0;
  std::uint64_t seed_root = 0;
  double death_penalty = 0.0;
  std::string run_id = "serve";
  std::optional<std::filesystem::path> log_path;  // trajectory NDJSON, one record per ended session
};

class EnvServer {
 public:
  explicit EnvServer(ServeOptions options);
  ~EnvServer();
  EnvServer(const EnvServer&) = delete;
  EnvServer& operator=(const EnvServer&) = delete;

  // Binds and serves on a background thread; returns the bound port.
  int start();
  // Blocks until stop() is called from elsewhere.
  void wait();
  void stop();

  [[nodiscard]] std::int64_t sessions_started() const;
  [[nodiscard]] std::int64_t sessions_ended() const;
  [[nodiscard]] std::int64_t fallbacks() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Text policy: sees the observation envelope, returns reply text.
using PolicyCallback = std::function<std::string(const protocol::ObservationPayload&)>;

struct SessionSummary {
  std::string session_id;
  std::string status;  // completed | aborted
  std::string reason;  // the server's end reason, or the transport error
  std::int64_t turns = 0;
  double progress = 0.0;
  std::int64_t fallbacks = 0;
};

// Scripted client loop. Transport failures come back as status "aborted";
// nothing escapes as an exception.
SessionSummary run_session(const std::string& base_url, const std::string& level_id, const PolicyCallback& policy,
                           std::optional<std::uint64_t> seed = std::nullopt, double timeout_seconds = 30.0);

namespace stubs {
PolicyCallback always_right();
// Alternates right+a and right, so frames consumed alternate 15 and 5.
PolicyCallback right_jump_cycle();
// Uniform over the 22 valid actions; deterministic in seed.
PolicyCallback random_valid(std::uint64_t seed);
}  // namespace stubs

}  // namespace tilerl::serve
