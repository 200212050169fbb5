#include <doctest.h>

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <thread>

#include "tilerl/error.hpp"
#include "tilerl/kernel/level.hpp"
#include "tilerl/telemetry/store.hpp"
#include "tilerl/train/backend.hpp"
#include "tilerl/train/curriculum.hpp"
#include "tilerl/train/rollout.hpp"

namespace fs = std::filesystem;
using namespace tilerl;
using namespace tilerl::telemetry;
using kernel::Button;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / ("tilerl_unit_" + name)) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<train::Trajectory> sample_trajectories(int n, std::uint64_t seed) {
  train::RolloutConfig rc;
  rc.levels = {{1, 1}, {1, 2}, {3, 1}};
  rc.trajectories_per_batch = n;
  rc.max_turns = 30;
  rc.seed = seed;
  train::ScriptedBackend backend(
      [](const kernel::WorldState& w) {
        return w.turn_count % 3 == 0 ? kernel::ActionSet{Button::Right, Button::A} : kernel::ActionSet{Button::Right, Button::B};
      },
      "cycle");
  return train::collect_rollouts(backend, kernel::LevelSet::builtin(), rc,
                                 train::make_curriculum(rc.levels, train::CurriculumMode::Uniform), 0, false)
      .trajectories;
}

}  // namespace

TEST_CASE("trajectory record roundtrip") {
  const auto ts = sample_trajectories(4, 1);
  std::vector<double> adv(ts[0].turns.size(), 0.5);
  auto r = make_record("run-a", 3, ts[0], 30, &adv);
  r.turns[0].reply_text = "<answer>['right']</answer>\n\"quoted\"";
  const auto line = serialize_record(r);
  CHECK(line.find('\n') == std::string::npos);
  const auto back = parse_record(line);
  CHECK(back == r);
  CHECK(back.turns[0].advantage == 0.5);
  CHECK(back.termination == (ts[0].terminated ? "terminated" : "truncated"));
}

TEST_CASE("record parsing rejects schema problems") {
  const auto r = make_record("run-a", 0, sample_trajectories(1, 2)[0], 30);
  auto line = serialize_record(r);
  CHECK_THROWS_AS(parse_record("{}"), SchemaError);
  CHECK_THROWS_AS(parse_record("not json"), SchemaError);
  auto bump = line;
  bump.replace(bump.find("\"schema_version\":1"), 18, "\"schema_version\":2");
  CHECK_THROWS_AS(parse_record(bump), SchemaError);
  auto j = nlohmann::json::parse(line);
  j["level_id"] = "";
  CHECK_THROWS_AS(parse_record(j.dump()), SchemaError);
}

TEST_CASE("trajectory log: concurrent appends stay whole lines") {
  TempDir dir("log");
  const auto ts = sample_trajectories(8, 3);
  {
    TrajectoryLog log(dir.path / "t.ndjson", "run-b");
    std::vector<std::thread> threads;
    for (int k = 0; k < 4; ++k) {
      threads.emplace_back([&, k] {
        for (int i = 0; i < 25; ++i) log.append(make_record("run-b", k, ts[static_cast<std::size_t>(i % 8)], 30));
      });
    }
    for (auto& th : threads) th.join();
    CHECK(log.appended() == 100);
    CHECK_THROWS_AS(log.append(make_record("other-run", 0, ts[0], 30)), ValidationError);
  }
  const auto back = read_log(dir.path / "t.ndjson");
  CHECK(back.size() == 100);
  for (const auto& r : back) CHECK(r.run_id == "run-b");
}

TEST_CASE("empty and missing logs") {
  TempDir dir("empty");
  std::ofstream(dir.path / "e.ndjson").close();
  CHECK(read_log(dir.path / "e.ndjson").empty());
  CHECK_THROWS_AS(read_log(dir.path / "missing.ndjson"), NotFoundError);
  const auto rep = replay_audit({}, kernel::LevelSet::builtin());
  CHECK(rep.ok());
  CHECK(rep.checked == 0);
}

TEST_CASE("replay audit passes on an honest log and flags tampering") {
  const auto ts = sample_trajectories(20, 4);
  std::vector<TrajectoryRecord> recs;
  for (const auto& t : ts) recs.push_back(make_record("run-c", 0, t, 30));
  const auto& levels = kernel::LevelSet::builtin();
  const auto ok = replay_audit(recs, levels);
  CHECK(ok.ok());
  CHECK(ok.checked == 20);

  auto bad = recs;
  bad[5].turns[2].reward += 1.0 / 256.0;
  const auto rep = replay_audit(bad, levels);
  REQUIRE(rep.mismatches.size() == 1);
  CHECK(rep.mismatches[0].record == 5);
  CHECK(rep.mismatches[0].turn == 2);

  auto swapped = recs;
  swapped[7].seed += 1;
  swapped[9].turns[0].buttons = {"left"};
  CHECK(replay_audit(swapped, levels).mismatches.size() >= 1);

  auto aborted = recs;
  aborted[0].termination = "aborted";
  aborted[0].turns[0].reward = 99.0;
  const auto skip = replay_audit(aborted, levels);
  CHECK(skip.ok());
  CHECK(skip.skipped == 1);
}

TEST_CASE("replay_record rebuilds features that match the original run") {
  train::RolloutConfig rc;
  rc.trajectories_per_batch = 2;
  rc.max_turns = 15;
  const auto backend = train::ScriptedBackend::constant({Button::Right, Button::A});
  const auto batch = train::collect_rollouts(backend, kernel::LevelSet::builtin(), rc,
                                             train::make_curriculum(rc.levels, train::CurriculumMode::Uniform), 0, true);
  for (const auto& t : batch.trajectories) {
    const auto back = replay_record(make_record("r", 0, t, 15), kernel::LevelSet::builtin());
    CHECK(back.features == t.features);
    CHECK(back.x_final == t.x_final);
  }
}

TEST_CASE("manifest: written once, roundtrips, guards the level-set version") {
  TempDir dir("manifest");
  RunManifest m;
  m.run_id = "r1";
  m.command = "train";
  m.config = "[train]\ngamma = 0.95\n";
  m.level_set_version = kernel::LevelSet::builtin().version();
  m.code_version = kCodeVersion;
  m.started_at = utc_timestamp();
  m.seed_root = 12;
  write_manifest(dir.path / "manifest.json", m);
  CHECK_THROWS(write_manifest(dir.path / "manifest.json", m));
  const auto back = read_manifest(dir.path / "manifest.json");
  CHECK(back.run_id == "r1");
  CHECK(back.config == m.config);
  CHECK(back.seed_root == 12);

  {
    TrajectoryLog log(dir.path / "trajectories.ndjson", "r1");
    for (const auto& t : sample_trajectories(3, 5)) log.append(make_record("r1", 0, t, 30));
  }
  CHECK(replay_audit_run(dir.path, kernel::LevelSet::builtin()).checked == 3);

  TempDir other("manifest_other");
  m.level_set_version = "deadbeef";
  write_manifest(other.path / "manifest.json", m);
  fs::copy_file(dir.path / "trajectories.ndjson", other.path / "trajectories.ndjson");
  CHECK_THROWS_AS(replay_audit_run(other.path, kernel::LevelSet::builtin()), SchemaError);
  CHECK(make_run_id(7).ends_with("-s7"));
}

TEST_CASE("metrics writer headers follow the level list") {
  const auto h = metrics_header({{1, 1}, {2, 2}});
  CHECK(h.front() == "kind");
  CHECK(std::find(h.begin(), h.end(), "progress_2-2") != h.end());
  CHECK(std::find(h.begin(), h.end(), "weight_1-1") != h.end());
  CHECK(progress_header().front() == "step");
}
