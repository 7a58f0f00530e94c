#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "risloc/baselines/static_dnn.hpp"
#include "risloc/errors.hpp"
#include "risloc/harness/experiment.hpp"
#include "risloc/train.hpp"

using namespace risloc;
using harness::ExperimentConfig;
namespace fs = std::filesystem;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

nlohmann::json tiny_config_json() {
  nlohmann::json scene = {
      {"bs_position", {40.0, -40.0, -10.0}},
      {"ris_position", {0.0, 0.0, 0.0}},
      {"ue_region_center", {20.0, 0.0, -20.0}},
      {"ue_region_half_extent", {15.0, 35.0, 0.0}},
      {"ris_rows", 2},
      {"ris_cols", 2},
      {"spacing_factor", 1.0},
      {"rician_factor", 10.0},
      {"pathloss_direct", {32.6, 36.7}},
      {"pathloss_reflected", {30.0, 22.0}},
      {"noise_power", 1e-9}};
  nlohmann::json j = {{"scene", scene},
                      {"frames", 2},
                      {"snr_db", {20.0}},
                      {"method", "wknn"},
                      {"feature_mode", "pilot"},
                      {"seeds", {{"train", 1}, {"eval", 500}}},
                      {"eval_episodes", 40},
                      {"wknn", {{"k", 5}, {"realizations_per_block", 1}, {"db_seed", 7}}},
                      {"output_dir", "test_runs/t1"}};
  return j;
}

}  // namespace

TEST_CASE("config load: paper defaults, missing keys, round-trip") {
  // The shipped paper-scale config resolves to the published scene.
  const ExperimentConfig paper = ExperimentConfig::load(
      std::string(TEST_SOURCE_DIR) + "/../configs/paper.json");
  CHECK(paper.scene.bs_position == Eigen::Vector3d(40, -40, -10));
  CHECK(paper.scene.ris_position == Eigen::Vector3d(0, 0, 0));
  CHECK(paper.scene.num_elements() == 64);
  CHECK(paper.scene.ris_cols == 8);
  CHECK(paper.scene.ue_region.center == Eigen::Vector3d(20, 0, -20));
  CHECK(paper.scene.ue_region.half_extent == Eigen::Vector3d(15, 35, 0));
  CHECK(paper.scene.rician_factor == 10.0);
  CHECK(paper.scene.spacing_factor == 1.0);
  CHECK(paper.training.samples == 2048000);

  // Missing required key errors name the key.
  nlohmann::json j = tiny_config_json();
  j.erase("feature_mode");
  CHECK_THROWS_WITH_AS(ExperimentConfig::from_json(j),
                       doctest::Contains("feature_mode"), ConfigError);
  nlohmann::json j2 = tiny_config_json();
  j2["seeds"].erase("eval");
  CHECK_THROWS_WITH_AS(ExperimentConfig::from_json(j2),
                       doctest::Contains("eval"), ConfigError);

  // load -> save -> load is identity on the resolved form.
  const ExperimentConfig a = ExperimentConfig::from_json(tiny_config_json());
  fs::create_directories("test_runs");
  a.save("test_runs/rt.json");
  const ExperimentConfig b = ExperimentConfig::load("test_runs/rt.json");
  CHECK(a.to_json() == b.to_json());

  nlohmann::json bad = tiny_config_json();
  bad["method"] = "magic";
  CHECK_THROWS_AS(ExperimentConfig::from_json(bad), ConfigError);
}

TEST_CASE("run_experiment: deterministic bytes, row layout, pairing") {
  ExperimentConfig config = ExperimentConfig::from_json(tiny_config_json());
  config.snr_db = {10.0, 20.0, 30.0};
  config.eval_episodes = 25;

  const harness::ResultTable t1 = harness::run_experiment(config);
  const harness::ResultTable t2 = harness::run_experiment(config);
  CHECK(t1.to_csv() == t2.to_csv());
  CHECK(t1.rows.size() == 3);  // one method, three SNRs
  for (const auto& row : t1.rows) {
    CHECK(row.episodes == 25);
    CHECK(row.mse >= 0.0);
    CHECK(row.rmse == doctest::Approx(std::sqrt(row.mse)));
  }

  // CSV round-trips through the reader.
  t1.save_csv("test_runs/results.csv");
  const harness::ResultTable back =
      harness::ResultTable::from_csv("test_runs/results.csv");
  REQUIRE(back.rows.size() == t1.rows.size());
  for (std::size_t i = 0; i < back.rows.size(); ++i) {
    CHECK(back.rows[i].method == t1.rows[i].method);
    CHECK(back.rows[i].mse == t1.rows[i].mse);
    CHECK(back.rows[i].median_err == t1.rows[i].median_err);
  }
  CHECK(slurp("test_runs/results.csv") == t1.to_csv());
}

TEST_CASE("missing checkpoint artifacts raise errors that name the path") {
  ExperimentConfig config = ExperimentConfig::from_json(tiny_config_json());
  config.methods = {"active"};
  config.artifacts["active"] = "test_runs/no_such_file.ckpt";
  CHECK_THROWS_WITH_AS(harness::run_experiment(config),
                       doctest::Contains("no_such_file.ckpt"), ConfigError);
  config.artifacts.erase("active");
  CHECK_THROWS_WITH_AS(harness::run_experiment(config),
                       doctest::Contains("active"), ConfigError);
}

TEST_CASE("crlb method evaluates through the harness") {
  ExperimentConfig config = ExperimentConfig::from_json(tiny_config_json());
  config.methods = {"crlb-gd"};
  config.eval_episodes = 4;
  config.crlb_gd.iterations = 20;
  config.crlb_gd.restarts = 1;
  const harness::ResultTable t = harness::run_experiment(config);
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0].episodes == 4);
  CHECK(std::isfinite(t.rows[0].mse));
}

TEST_CASE("sweep_frames matches run_experiment at the full length") {
  // Train a miniature policy so there is a checkpoint to sweep.
  ExperimentConfig config = ExperimentConfig::from_json(tiny_config_json());
  config.methods = {"active"};
  config.frames = 3;
  config.eval_episodes = 30;
  config.policy_net.hidden = 16;
  config.policy_net.head_width = 16;
  config.training.samples = 640;
  config.training.batch = 32;
  config.training.chunk = 16;
  config.training.epoch_steps = 10;
  config.training.val_episodes = 32;
  config.training.warmup_samples = 100;
  config.training.loss = policy::LossKind::kAverage;

  const auto result = policy::train_policy(
      config.scene, config.frames, config.policy_dims(),
      config.train_config(config.snr_db.front()));
  fs::create_directories("test_runs");
  policy::save_policy_checkpoint("test_runs/mini.ckpt", result.policy,
                                 config.scene, config.frames,
                                 policy::LossKind::kAverage, 20.0,
                                 result.steps_run);

  const harness::ResultTable sweep =
      harness::sweep_frames(config, "test_runs/mini.ckpt");
  REQUIRE(sweep.rows.size() == 3);
  CHECK(sweep.rows[0].frames == 1);
  CHECK(sweep.rows[2].frames == 3);

  config.artifacts["active"] = "test_runs/mini.ckpt";
  const harness::ResultTable full = harness::run_experiment(config);
  REQUIRE(full.rows.size() == 1);
  CHECK(sweep.rows[2].mse == doctest::Approx(full.rows[0].mse).epsilon(1e-12));
  CHECK(sweep.rows[2].median_err ==
        doctest::Approx(full.rows[0].median_err).epsilon(1e-12));
}

TEST_CASE("radiomap export: file count, reparse, focusing fraction") {
  ExperimentConfig config = ExperimentConfig::from_json(tiny_config_json());
  config.frames = 2;
  config.policy_net.hidden = 16;
  config.policy_net.head_width = 16;
  const policy::Policy p = policy::Policy::init(config.policy_dims(), 3);

  fs::remove_all("test_runs/rm");
  const auto result =
      harness::export_radiomap(config, p, 20.0, 0, "test_runs/rm");
  CHECK(result.frame_files.size() == 2);  // frames + metadata = T + 1 files
  CHECK(fs::exists(result.meta_file));
  CHECK(result.q.size() == 2);
  for (double q : result.q) {
    CHECK(q >= 0.0);
    CHECK(q <= 1.0);
  }

  // Every frame file parses back into a 30 x 70 nonnegative matrix.
  for (const auto& path : result.frame_files) {
    std::ifstream in(path);
    REQUIRE(in.good());
    int rows = 0;
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      std::stringstream ss(line);
      double v;
      int cols = 0;
      while (ss >> v) {
        CHECK(v >= 0.0);
        ++cols;
      }
      CHECK(cols == 70);
      ++rows;
    }
    CHECK(rows == 30);
  }

  const auto meta = nlohmann::json::parse(slurp(result.meta_file));
  CHECK(meta.at("frames").get<int>() == 2);
  CHECK(meta.at("frame_files").size() == 2);
}

TEST_CASE("matched configuration puts the grid maximum on the UE cell") {
  // Reflection-dominated toy: the direct path is essentially blocked and the
  // array is large enough (16x16 at half-wavelength spacing) to form a real
  // beam.
  Scene s;
  s.bs_position = {40.0, -40.0, -10.0};
  s.ris_position = {0.0, 0.0, 0.0};
  s.ue_region.center = {20.0, 0.0, -20.0};
  s.ue_region.half_extent = {15.0, 35.0, 0.0};
  s.ris_rows = 16;
  s.ris_cols = 16;
  s.spacing_factor = M_PI;
  s.rician_factor = 10.0;
  s.pathloss_direct = {300.0, 0.0};  // blocked
  s.pathloss_reflected = {30.0, 22.0};
  s.noise_power = 1e-9;

  const baselines::GridSpec grid = baselines::GridSpec::from_region(s.ue_region);
  const int ue_cell = 17 * grid.ny + 43;
  const Eigen::Vector3d ue = grid.center(ue_cell);

  // Phase-conjugate the LOS cascade at the UE.
  const LosChannel los = los_channel(s, ue);
  Eigen::VectorXcd matched(s.num_elements());
  for (int i = 0; i < matched.size(); ++i)
    matched[i] = std::conj(los.v_r[i]) / std::abs(los.v_r[i]);

  const Eigen::MatrixXd rss = harness::radiomap_frame(s, grid, matched, 100.0);
  Eigen::Index best_ix, best_iy;
  rss.maxCoeff(&best_ix, &best_iy);
  CHECK(best_ix == ue_cell / grid.ny);
  CHECK(best_iy == ue_cell % grid.ny);
  CHECK(harness::focusing_fraction(rss, ue_cell / grid.ny,
                                   ue_cell % grid.ny) == 0.0);
}

TEST_CASE("run directory lock is exclusive and releases on destruction") {
  const std::string dir = "test_runs/lockdir";
  fs::remove_all(dir);
  {
    harness::RunDirLock lock(dir);
    CHECK_THROWS_AS(harness::RunDirLock second(dir), ConfigError);
  }
  // Released: can relock.
  harness::RunDirLock again(dir);
}

TEST_CASE("manifest is written and parseable") {
  ExperimentConfig config = ExperimentConfig::from_json(tiny_config_json());
  config.eval_episodes = 5;
  harness::ResultTable table = harness::run_experiment(config);
  fs::create_directories("test_runs/mani");
  harness::write_manifest("test_runs/mani", config, table,
                          {{"demo", "00ff"}});
  const auto j = nlohmann::json::parse(slurp("test_runs/mani/manifest.json"));
  CHECK(j.at("tool") == "risloc");
  CHECK(j.at("artifact_hashes").at("demo") == "00ff");
  CHECK(j.at("timings").size() == table.rows.size());
  CHECK(j.at("config").at("frames").get<int>() == config.frames);
}
