#include "tilerl/serve/env_server.hpp"

#include <httplib.h>
#include <json.hpp>

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <map>
#include <mutex>
#include <thread>

#include "tilerl/error.hpp"
#include "tilerl/kernel/observation.hpp"
#include "tilerl/kernel/world.hpp"
#include "tilerl/protocol/prompt.hpp"
#include "tilerl/telemetry/store.hpp"
#include "tilerl/train/rollout.hpp"

namespace tilerl::serve {

namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

std::string error_body(const std::string& message) {
  return json{{"schema_version", protocol::kWireSchemaVersion}, {"error", message}}.dump();
}

struct Session {
  std::mutex mu;
  std::string id;
  kernel::WorldState world;
  train::Trajectory record;
  std::int64_t fallbacks = 0;
  Clock::time_point touched;
  bool closed = false;
};

}  // namespace

struct EnvServer::Impl {
  ServeOptions opt;
  httplib::Server http;
  std::thread listener;
  std::thread reaper;
  std::string prompt;
  std::mutex map_mu;
  std::map<std::string, std::shared_ptr<Session>> sessions;
  std::unique_ptr<telemetry::TrajectoryLog> log;
  std::atomic<std::int64_t> started{0};
  std::atomic<std::int64_t> ended{0};
  std::atomic<std::int64_t> fallback_count{0};
  std::atomic<bool> running{false};
  std::mutex stop_mu;
  std::condition_variable stop_cv;
  kernel::KernelOptions kopts;

  explicit Impl(ServeOptions o) : opt(std::move(o)) {
    if (!opt.levels) throw ValidationError("serve-env needs a level set");
    if (opt.max_turns < 1) throw ValidationError("max_turns must be >= 1");
    if (opt.upsample < 1) throw ValidationError("upsample must be >= 1");
    prompt = protocol::render_prompt(protocol::default_template(),
                                     {{"max_buttons", std::to_string(opt.validation.max_buttons)}});
    kopts.death_penalty = opt.death_penalty;
    if (opt.log_path) log = std::make_unique<telemetry::TrajectoryLog>(*opt.log_path, opt.run_id);
  }

  std::string observation(const Session& s) const {
    const auto frame = kernel::render(s.world, opt.upsample);
    protocol::TurnMeta meta{s.world.turn_count, kernel::to_string(s.record.level), s.id};
    return protocol::to_json(protocol::encode_observation(frame, meta, prompt));
  }

  // Caller holds s.mu.
  std::string finish(Session& s, const std::string& reason) {
    s.closed = true;
    auto& t = s.record;
    t.death = s.world.death;
    t.finished = s.world.finished;
    t.x_final = s.world.x_tiles();
    if (reason == "idle_timeout") {
      t.aborted = true;
      t.abort_reason = reason;
    } else if (reason == "truncated") {
      t.truncated = true;
    } else {
      t.terminated = true;
    }
    if (log) log->append(telemetry::make_record(opt.run_id, 0, t, opt.max_turns));
    ++ended;
    protocol::SessionEnd end;
    end.session_id = s.id;
    end.reason = reason;
    end.turns = t.length();
    end.progress = t.progress();
    end.fallbacks = s.fallbacks;
    return protocol::to_json(end);
  }

  void reap() {
    const auto now = Clock::now();
    std::vector<std::shared_ptr<Session>> expired;
    {
      std::lock_guard lock(map_mu);
      for (auto it = sessions.begin(); it != sessions.end();) {
        const double idle = std::chrono::duration<double>(now - it->second->touched).count();
        if (idle > opt.idle_timeout_seconds) {
          expired.push_back(it->second);
          it = sessions.erase(it);
        } else {
          ++it;
        }
      }
    }
    for (auto& s : expired) {
      std::lock_guard lock(s->mu);
      if (!s->closed) finish(*s, "idle_timeout");
    }
  }

  void create(const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
      if (!body.is_object()) throw SchemaError("body is not an object");
      if (!body.contains("schema_version") || body["schema_version"] != protocol::kWireSchemaVersion) {
        throw SchemaError("schema_version must be " + std::to_string(protocol::kWireSchemaVersion));
      }
      if (!body.contains("level_id") || !body["level_id"].is_string()) throw SchemaError("missing string field 'level_id'");
      if (body.contains("seed") && !body["seed"].is_number_unsigned()) throw SchemaError("field 'seed' must be unsigned");
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(error_body(e.what()), "application/json");
      return;
    }
    auto s = std::make_shared<Session>();
    const std::int64_t n = started++;
    s->id = "s" + std::to_string(n);
    try {
      const auto id = kernel::parse_level_id(body["level_id"].get<std::string>());
      const std::uint64_t seed = body.contains("seed") ? body["seed"].get<std::uint64_t>()
                                                       : train::derive_seed(opt.seed_root, static_cast<std::uint64_t>(n));
      s->world = kernel::reset(*opt.levels, id, seed, opt.max_turns);
      s->record.level = id;
      s->record.seed = seed;
      s->record.x_spawn = s->world.x_tiles();
    } catch (const Error& e) {
      res.status = dynamic_cast<const NotFoundError*>(&e) ? 404 : 400;
      res.set_content(error_body(e.what()), "application/json");
      return;
    }
    s->touched = Clock::now();
    std::lock_guard slock(s->mu);
    {
      std::lock_guard lock(map_mu);
      sessions[s->id] = s;
    }
    res.set_content(observation(*s), "application/json");
  }

  void turn(const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    std::shared_ptr<Session> s;
    {
      std::lock_guard lock(map_mu);
      auto it = sessions.find(id);
      if (it != sessions.end()) s = it->second;
    }
    if (!s) {
      res.status = 404;
      res.set_content(error_body("unknown or expired session '" + id + "'"), "application/json");
      return;
    }
    std::lock_guard slock(s->mu);
    if (s->closed) {
      res.status = 404;
      res.set_content(error_body("session '" + id + "' is closed"), "application/json");
      return;
    }
    s->touched = Clock::now();
    protocol::ReplyEnvelope reply;
    try {
      reply = protocol::reply_from_json(req.body);
    } catch (const std::exception& e) {
      res.status = 400;
      res.set_content(error_body(e.what()), "application/json");
      return;
    }
    const auto d = protocol::decide(reply.reply_text, opt.validation);
    if (d.fallback_used) {
      ++s->fallbacks;
      ++fallback_count;
    }
    std::string out;
    if (d.terminate) {
      s->record.turns.push_back({d.action, -1, 0.0, 0.0, 0, d.fallback_used, d.normalized, reply.reply_text});
      out = finish(*s, "strict_reject");
    } else {
      const auto step = kernel::step(s->world, d.action, kopts);
      s->record.turns.push_back({d.action, -1, 0.0, step.reward, step.frames_consumed, d.fallback_used,
                                 d.normalized || step.info.action_normalized, reply.reply_text});
      if (s->world.finished) out = finish(*s, "finished");
      else if (!s->world.alive) out = finish(*s, "died");
      else if (s->world.truncated()) out = finish(*s, "truncated");
      else out = observation(*s);
    }
    if (s->closed) {
      std::lock_guard lock(map_mu);
      sessions.erase(id);
    }
    res.set_content(out, "application/json");
  }
};

EnvServer::EnvServer(ServeOptions options) : impl_(std::make_unique<Impl>(std::move(options))) {
  auto* im = impl_.get();
  im->http.Post("/v1/sessions", [im](const httplib::Request& q, httplib::Response& r) { im->create(q, r); });
  im->http.Post(R"(/v1/sessions/([A-Za-z0-9_-]+)/turn)",
                [im](const httplib::Request& q, httplib::Response& r) { im->turn(q, r); });
  im->http.Get("/v1/health", [](const httplib::Request&, httplib::Response& r) {
    r.set_content(R"({"status":"ok"})", "application/json");
  });
  im->http.set_exception_handler([](const httplib::Request&, httplib::Response& r, std::exception_ptr ep) {
    std::string what = "internal error";
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      what = e.what();
    } catch (...) {
    }
    r.status = 500;
    r.set_content(error_body(what), "application/json");
  });
}

EnvServer::~EnvServer() { stop(); }

int EnvServer::start() {
  auto* im = impl_.get();
  int port = im->opt.port;
  if (port == 0) {
    port = im->http.bind_to_any_port(im->opt.host);
  } else if (!im->http.bind_to_port(im->opt.host, port)) {
    port = -1;
  }
  if (port < 0) throw Error("cannot bind " + im->opt.host + ":" + std::to_string(im->opt.port));
  im->running = true;
  im->listener = std::thread([im] { im->http.listen_after_bind(); });
  im->reaper = std::thread([im] {
    std::unique_lock lock(im->stop_mu);
    while (im->running) {
      im->stop_cv.wait_for(lock, std::chrono::milliseconds(200));
      lock.unlock();
      im->reap();
      lock.lock();
    }
  });
  im->http.wait_until_ready();
  return port;
}

void EnvServer::wait() {
  std::unique_lock lock(impl_->stop_mu);
  impl_->stop_cv.wait(lock, [this] { return !impl_->running.load(); });
}

void EnvServer::stop() {
  if (!impl_) return;
  {
    std::lock_guard lock(impl_->stop_mu);
    if (!impl_->running) return;
    impl_->running = false;
  }
  impl_->stop_cv.notify_all();
  impl_->http.stop();
  if (impl_->listener.joinable()) impl_->listener.join();
  if (impl_->reaper.joinable()) impl_->reaper.join();
}

std::int64_t EnvServer::sessions_started() const { return impl_->started; }
std::int64_t EnvServer::sessions_ended() const { return impl_->ended; }
std::int64_t EnvServer::fallbacks() const { return impl_->fallback_count; }

}  // namespace tilerl::serve
