#include "lookout/error.hpp"
#include "lookout/io.hpp"

#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <functional>
#include <limits>
#include <cmath>
#include <sys/wait.h>
#include <string>

using namespace lookout;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / "lookout_io_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// -1 when nothing was thrown.
int code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return static_cast<int>(e.code());
  }
  return -1;
}

int code(ErrorCode c) { return static_cast<int>(c); }

}  // namespace

TEST(Io, CheckpointsRoundTripBitExact) {
  const fs::path dir = scratch("ckpt");
  ForecastConfig fc;
  fc.latent_dim = 8;
  fc.hidden = 16;
  const ForecastModel m = ForecastModel::create(fc, 1);
  save_checkpoint((dir / "d.json").string(), m);
  EXPECT_EQ(load_forecast_model((dir / "d.json").string()).params().checksum(), m.params().checksum());

  DiverseSamplerConfig sc;
  sc.k = 4;
  sc.latent_dim = 8;
  sc.hidden = 16;
  sc.head_offset_init = 0.3;
  const DiverseSampler s = DiverseSampler::create(sc, 2);
  save_checkpoint((dir / "s.json").string(), s);
  const DiverseSampler s2 = load_sampler((dir / "s.json").string());
  EXPECT_EQ(s2.params().checksum(), s.params().checksum());
  EXPECT_EQ(s2.config().k, 4);

  ScorerConfig rc;
  rc.k = 4;
  const Scorer r = Scorer::create(rc, 3);
  save_checkpoint((dir / "r.json").string(), r);
  EXPECT_EQ(load_scorer((dir / "r.json").string()).params().checksum(), r.params().checksum());

  // A checkpoint of the wrong kind or version is refused.
  EXPECT_EQ(code_of([&] { load_sampler((dir / "d.json").string()); }), code(ErrorCode::kCheckpointVersion));
  std::string text = read_text((dir / "r.json").string());
  const auto at = text.find("\"version\":1");
  ASSERT_NE(at, std::string::npos);
  text.replace(at, 11, "\"version\":99");
  write_text((dir / "bad.json").string(), text);
  EXPECT_EQ(code_of([&] { load_scorer((dir / "bad.json").string()); }), code(ErrorCode::kCheckpointVersion));
  EXPECT_EQ(code_of([&] { load_scorer((dir / "absent.json").string()); }), code(ErrorCode::kMissingCheckpoint));
}

TEST(Io, DatasetScenarioAndLogRoundTrip) {
  const Dataset d = generate_dataset(Family::kYieldOrGo, 3, 5);
  const std::string once = dataset_to_json(d);
  const Dataset back = dataset_from_json(once);
  ASSERT_EQ(back.samples.size(), 3u);
  EXPECT_EQ(dataset_to_json(back), once);
  EXPECT_EQ(back.samples[1].future, d.samples[1].future);

  const ScenarioScript s = make_scenario(Family::kCutIn, 9);
  const std::string st = scenario_to_json(s);
  EXPECT_EQ(scenario_to_json(scenario_from_json(st)), st);

  RolloutLog log;
  log.scenario = "x";
  log.seed = 42;
  log.modes = {0, -1};
  StepRecord r;
  r.step = 1;
  r.accel = -0.25;
  r.actors.resize(2);
  log.steps = {r, r};
  log.collisions = {{1, 3}};
  log.progress = 12.5;
  const std::string lt = rollout_log_to_json(log);
  const RolloutLog lb = rollout_log_from_json(lt);
  EXPECT_EQ(rollout_log_to_json(lb), lt);
  EXPECT_EQ(lb.num_collision_onsets(), 1);
  EXPECT_EQ(code_of([] { load_dataset("/nonexistent/lookout.json"); }), code(ErrorCode::kMissingFile));
}

TEST(Io, RunConfigRoundTripAndStrictKeys) {
  RunConfig c;
  c.seed = 17;
  c.data.train_count = 12;
  c.sampler.k = 6;
  c.campaign.rollouts = 7;
  const std::string text = run_config_to_json(c);
  const RunConfig b = run_config_from_json(text);
  EXPECT_EQ(b.seed, 17u);
  EXPECT_EQ(b.data.train_count, 12);
  EXPECT_EQ(b.sampler.k, 6);
  EXPECT_EQ(b.campaign.rollouts, 7);
  EXPECT_EQ(run_config_to_json(b), text);
  EXPECT_EQ(code_of([] { run_config_from_json(R"({"seed": 1, "sed": 2})"); }), code(ErrorCode::kMalformedConfig));
  EXPECT_EQ(code_of([] { run_config_from_json(R"({"data": {"train_cuont": 2}})"); }), code(ErrorCode::kMalformedConfig));
  EXPECT_EQ(code_of([] { run_config_from_json("{not json"); }), code(ErrorCode::kMalformedConfig));
  EXPECT_EQ(code_of([] { run_config_from_json(R"({"version": 7})"); }), code(ErrorCode::kCheckpointVersion));
}

TEST(Io, CsvReportsParseBack) {
  OpenLoopReport rep;
  rep.scenes = {{1.5, 2.25, 0.125, 3.0, 7.0, 1}, {0.1, 0.2, 0.3, 0.4, 0.5, 1}};
  rep.aggregate = {0.8, 1.225, 0.2125, 1.7, 3.75, 2};
  const OpenLoopReport back = parse_open_loop_csv(open_loop_csv(rep));
  ASSERT_EQ(back.scenes.size(), 2u);
  EXPECT_DOUBLE_EQ(back.scenes[0].mean_sade, 2.25);
  EXPECT_DOUBLE_EQ(back.aggregate.mean_plan_asd, 3.75);

  AblationRow row;
  row.name = "M4";
  row.description = "expected cost";
  row.report.collision_rate = 3.0;
  row.report.progress = 55.5;
  row.report.progress_per_collision = std::numeric_limits<double>::infinity();
  row.report.rollouts = 100;
  const auto rows = parse_ablation_csv(ablation_csv({row}));
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].name, "M4");
  EXPECT_DOUBLE_EQ(rows[0].report.progress, 55.5);
  EXPECT_TRUE(std::isinf(rows[0].report.progress_per_collision));

  const CsvTable t = parse_csv("# comment\na,b\n1,2\n");
  EXPECT_EQ(t.column("b"), 1);
  EXPECT_EQ(t.column("c"), -1);
  ASSERT_EQ(t.rows.size(), 1u);
}

#ifdef LOOKOUT_CLI_PATH
namespace {
int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + LOOKOUT_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}
}  // namespace

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("cli");
  EXPECT_EQ(run_cli("--help"), 0);
  EXPECT_EQ(run_cli("--no-such-flag"), 2);
  EXPECT_EQ(run_cli("--out-dir " + dir.string() + " simulate --scenario yield_or_go --seeds 0"), 12);
  EXPECT_EQ(run_cli("--config " + (dir / "absent.json").string() + " gen-data"), 4);
  write_text((dir / "typo.json").string(), R"({"sed": 3})");
  EXPECT_EQ(run_cli("--config " + (dir / "typo.json").string() + " gen-data"), 3);
}
#endif
