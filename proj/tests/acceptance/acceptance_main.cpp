// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Heavy artifacts (trained models, fingerprint databases) are built
// under ./acceptance_work and reused on re-runs when they match the
// requested shape; set RISLOC_ACCEPT_FRESH=1 to force retraining.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <vector>

#include "risloc/baselines/crlb.hpp"
#include "risloc/baselines/fingerprint.hpp"
#include "risloc/baselines/static_dnn.hpp"
#include "risloc/graph_suite.hpp"
#include "risloc/harness/experiment.hpp"
#include "risloc/train.hpp"

using namespace risloc;
namespace fs = std::filesystem;
using clock_type = std::chrono::steady_clock;

namespace {

struct Outcome {
  std::string id;
  bool pass = false;
  std::string detail;
  double seconds = 0.0;
};

std::vector<Outcome> g_outcomes;

void report(const std::string& id, bool pass, const std::string& detail,
            double seconds) {
  g_outcomes.push_back({id, pass, detail, seconds});
  std::printf("[%s] %s  %s  (%.1f s)\n", id.c_str(), pass ? "PASS" : "FAIL",
              detail.c_str(), seconds);
  std::fflush(stdout);
}

Scene desk_scene() {
  Scene s;
  s.bs_position = {40.0, -40.0, -10.0};
  s.ris_position = {0.0, 0.0, 0.0};
  s.ue_region.center = {20.0, 0.0, -20.0};
  s.ue_region.half_extent = {15.0, 35.0, 0.0};
  s.ris_rows = 4;
  s.ris_cols = 4;
  s.spacing_factor = 1.0;
  s.rician_factor = 10.0;
  s.pathloss_direct = {32.6, 36.7};
  s.pathloss_reflected = {30.0, 22.0};
  s.noise_power = 1e-9;
  return s;
}

constexpr double kSnrDb = 20.0;
constexpr std::uint64_t kTrainSeed = 1;
constexpr std::uint64_t kEvalSeed = 90001;
constexpr int kEvalEpisodes = 1000;

std::string work_dir() {
  const char* env = std::getenv("RISLOC_ACCEPT_DIR");
  return env != nullptr ? env : "acceptance_work";
}

bool fresh_requested() {
  const char* env = std::getenv("RISLOC_ACCEPT_FRESH");
  return env != nullptr && env[0] == '1';
}

policy::TrainConfig desk_train_config(std::int64_t samples,
                                      policy::LossKind loss) {
  policy::TrainConfig tc;
  tc.samples = samples;
  tc.batch = 128;
  tc.lr = 1e-3;
  tc.loss = loss;
  tc.epoch_steps = 100;
  tc.patience = 10;
  tc.val_episodes = 512;
  tc.warmup_samples = 10000;
  tc.clip_norm = 10.0;
  tc.chunk = 32;
  tc.snr_db = kSnrDb;
  tc.seed = kTrainSeed;
  return tc;
}

policy::PolicyDims table_dims(const Scene& scene) {
  policy::PolicyDims dims;
  dims.n = scene.num_elements();
  dims.hidden = 512;
  dims.head_width = 1024;
  dims.head_layers = 4;
  dims.mode = policy::FeatureMode::kPilot;
  return dims;
}

// Train-or-load for the active policy.
policy::Policy active_policy(const Scene& scene, int frames,
                             policy::LossKind loss, std::int64_t samples,
                             const std::string& name) {
  const std::string path = work_dir() + "/" + name;
  if (!fresh_requested() && fs::exists(path)) {
    try {
      const auto loaded = policy::load_policy_checkpoint(path, scene);
      if (loaded.frames == frames && loaded.loss == loss &&
          loaded.snr_db == kSnrDb)
        return loaded.policy;
    } catch (const std::exception&) {
      // fall through to retraining
    }
  }
  std::printf("  .. training %s (%lld samples, T=%d, %s loss)\n", name.c_str(),
              static_cast<long long>(samples), frames,
              policy::to_string(loss));
  std::fflush(stdout);
  const auto result = policy::train_policy(scene, frames, table_dims(scene),
                                           desk_train_config(samples, loss));
  policy::save_policy_checkpoint(path, result.policy, scene, frames, loss,
                                 kSnrDb, result.steps_run);
  return result.policy;
}

baselines::StaticDnnModel static_model(const Scene& scene, int frames,
                                       baselines::DesignProvenance provenance,
                                       std::int64_t samples,
                                       const std::string& name) {
  const std::string path = work_dir() + "/" + name;
  if (!fresh_requested() && fs::exists(path)) {
    try {
      const auto loaded = baselines::load_static_dnn_checkpoint(path, scene);
      if (loaded.frames == frames && loaded.provenance == provenance)
        return loaded;
    } catch (const std::exception&) {
    }
  }
  std::printf("  .. training %s (%lld samples)\n", name.c_str(),
              static_cast<long long>(samples));
  std::fflush(stdout);
  const auto result = baselines::static_dnn_train(
      scene, frames, policy::FeatureMode::kPilot, provenance,
      desk_train_config(samples, policy::LossKind::kFinal));
  baselines::save_static_dnn_checkpoint(path, result.model, scene, kSnrDb,
                                        result.steps_run);
  return result.model;
}

double median_of(std::vector<double> v) { return policy::median(std::move(v)); }

// ---------------------------------------------------------------------------

void criterion_1_autodiff() {
  const auto t0 = clock_type::now();
  const ad::SuiteResult suite = ad::run_grad_check_suite(48, 20240101);
  const double secs =
      std::chrono::duration<double>(clock_type::now() - t0).count();
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "%d graphs, max relative error %.3e (limit 1e-4), %.2f s "
                "(limit 60 s)",
                suite.graphs, suite.max_rel_error, suite.seconds);
  report("C1", suite.max_rel_error <= 1e-4 && suite.seconds <= 60.0, buf,
         secs);
}

void criterion_2_channel_statistics() {
  const auto t0 = clock_type::now();
  Scene s = desk_scene();
  const Eigen::Vector3d ue(25.0, 5.0, -20.0);
  const double kappa =
      pathloss_amplitude((ue - s.ris_position).norm(), s.pathloss_reflected);
  const double xi = pathloss_amplitude(
      (s.bs_position - s.ris_position).norm(), s.pathloss_reflected);
  const double rho =
      pathloss_amplitude((ue - s.bs_position).norm(), s.pathloss_direct);
  const int n = s.num_elements();
  const int samples = 100000;

  double sum_hr = 0, sq_hr = 0, sum_gr = 0, sq_gr = 0, sum_hd = 0, sq_hd = 0;
  for (int i = 0; i < samples; ++i) {
    const ChannelRealization ch =
        sample_channel(s, ue, {2024, static_cast<std::uint64_t>(i)});
    for (int k = 0; k < n; ++k) {
      const double ph = std::norm(ch.h_r[k]);
      const double pg = std::norm(ch.g_r[k]);
      sum_hr += ph;
      sq_hr += ph * ph;
      sum_gr += pg;
      sq_gr += pg * pg;
    }
    const double pd = std::norm(ch.h_d);
    sum_hd += pd;
    sq_hd += pd * pd;
  }
  const double cnt_elem = static_cast<double>(samples) * n;
  auto within = [](double sum, double sq, double cnt, double target) {
    const double mean = sum / cnt;
    const double se = std::sqrt((sq / cnt - mean * mean) / cnt);
    return std::abs(mean - target) <= 3.0 * se;
  };
  const bool moments_ok = within(sum_hr, sq_hr, cnt_elem, kappa * kappa) &&
                          within(sum_gr, sq_gr, cnt_elem, xi * xi) &&
                          within(sum_hd, sq_hd, samples, rho * rho);

  // LOS limit: with epsilon = 1e12 the draw collapses onto the steering
  // vector to 1e-5 relative.
  Scene los_scene = s;
  los_scene.rician_factor = 1e12;
  double max_rel = 0.0;
  const Eigen::VectorXcd a =
      steering_vector(angles_from_positions(ue, s.ris_position), s);
  for (int i = 0; i < 200; ++i) {
    const ChannelRealization ch =
        sample_channel(los_scene, ue, {77, static_cast<std::uint64_t>(i)});
    for (int k = 0; k < n; ++k)
      max_rel =
          std::max(max_rel, std::abs(ch.h_r[k] - kappa * a[k]) / kappa);
  }
  const bool los_ok = max_rel <= 1e-5;

  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "moments within 3 SE over 1e5 draws: %s; LOS deviation %.2e "
                "(limit 1e-5)",
                moments_ok ? "yes" : "no", max_rel);
  report("C2", moments_ok && los_ok, buf,
         std::chrono::duration<double>(clock_type::now() - t0).count());
}

struct DeskArtifacts {
  policy::Policy active;
  baselines::StaticDnnModel learned;
  baselines::StaticDnnModel random;
  baselines::FingerprintDB db;
};

DeskArtifacts build_desk_artifacts(const Scene& scene) {
  DeskArtifacts art{
      active_policy(scene, 4, policy::LossKind::kFinal, 200000,
                    "active_t4.ckpt"),
      static_model(scene, 4, baselines::DesignProvenance::kLearned, 200000,
                   "static_learned_t4.ckpt"),
      static_model(scene, 4, baselines::DesignProvenance::kRandom, 200000,
                   "static_random_t4.ckpt"),
      {}};
  const std::string db_path = work_dir() + "/fingerprints_m1.bin";
  PilotParams pilot;
  pilot.power = snr_to_power(kSnrDb);
  pilot.frames = 4;
  if (!fresh_requested() && fs::exists(db_path)) {
    art.db = baselines::FingerprintDB::load(db_path);
  } else {
    art.db = baselines::build_fingerprints(
        scene, pilot,
        baselines::random_theta_sequence(4, scene.num_elements(), 7),
        /*realizations_per_block=*/1, /*seed=*/7);
    art.db.save(db_path);
  }
  return art;
}

Eigen::VectorXd wknn_errors(const Scene& scene,
                            const baselines::FingerprintDB& db, int episodes,
                            double power) {
  PilotParams pilot;
  pilot.power = power;
  pilot.frames = db.frames;
  Eigen::VectorXd err_sq(episodes);
  for (int e = 0; e < episodes; ++e) {
    const auto index = static_cast<std::uint64_t>(e);
    Rng pos_rng(kEvalSeed, index, StreamRole::kUePosition);
    const Eigen::Vector3d ue = sample_ue_position(scene, pos_rng);
    const ChannelRealization ch = sample_channel(scene, ue, {kEvalSeed, index});
    Rng noise_rng(kEvalSeed, index, StreamRole::kNoise);
    Eigen::VectorXd rss(db.frames);
    for (int t = 0; t < db.frames; ++t)
      rss[t] = std::norm(measure(ch, db.thetas[static_cast<std::size_t>(t)],
                                 pilot, scene.noise_power, noise_rng));
    err_sq[e] = (baselines::wknn_localize(db, rss, 5) - ue).squaredNorm();
  }
  return err_sq;
}

void criterion_4_ordering(const Scene& scene, const DeskArtifacts& art) {
  const auto t0 = clock_type::now();
  const double power = snr_to_power(kSnrDb);

  const double active_mse =
      policy::evaluate_policy(scene, art.active, 4, power, kEvalEpisodes,
                              kEvalSeed)
          .final_mse();
  const double learned_mse =
      baselines::evaluate_static_dnn(scene, art.learned, power, kEvalEpisodes,
                                     kEvalSeed)
          .mse();
  const double random_mse =
      baselines::evaluate_static_dnn(scene, art.random, power, kEvalEpisodes,
                                     kEvalSeed)
          .mse();
  const double wknn_mse =
      wknn_errors(scene, art.db, kEvalEpisodes, power).mean();

  const bool pass = active_mse < learned_mse && learned_mse < random_mse &&
                    learned_mse < wknn_mse;
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "MSE m^2 on 1000 paired episodes: active %.2f < "
                "learned-static %.2f < (random %.2f, wknn %.2f)",
                active_mse, learned_mse, random_mse, wknn_mse);
  report("C4", pass, buf,
         std::chrono::duration<double>(clock_type::now() - t0).count());
}

void criterion_3_feasibility(const Scene& scene, const DeskArtifacts& art) {
  const auto t0 = clock_type::now();
  const double power = snr_to_power(kSnrDb);
  double max_dev = 0.0;

  // Active policy over the full episode set.
  const auto ev = policy::evaluate_policy(scene, art.active, 4, power,
                                          kEvalEpisodes, kEvalSeed);
  max_dev = std::max(max_dev, ev.max_theta_deviation);

  // Static designs and the fingerprint configurations.
  for (const auto* model : {&art.learned, &art.random})
    for (const auto& theta : model->design())
      for (Eigen::Index i = 0; i < theta.size(); ++i)
        max_dev = std::max(max_dev, std::abs(std::abs(theta[i]) - 1.0));
  for (const auto& theta : art.db.thetas)
    for (Eigen::Index i = 0; i < theta.size(); ++i)
      max_dev = std::max(max_dev, std::abs(std::abs(theta[i]) - 1.0));

  // CRLB-driven designs, every frame of every episode.
  PilotParams pilot;
  pilot.power = power;
  pilot.frames = 4;
  baselines::GdConfig gd;
  baselines::MapConfig mc;
  for (int e = 0; e < kEvalEpisodes; ++e) {
    const auto index = static_cast<std::uint64_t>(e);
    Rng pos_rng(kEvalSeed, index, StreamRole::kUePosition);
    const Eigen::Vector3d ue = sample_ue_position(scene, pos_rng);
    const ChannelRealization ch = sample_channel(scene, ue, {kEvalSeed, index});
    const auto ep = baselines::crlb_active_episode(scene, ch, pilot, gd, mc,
                                                   kEvalSeed, index);
    for (const auto& theta : ep.thetas)
      for (Eigen::Index i = 0; i < theta.size(); ++i)
        max_dev = std::max(max_dev, std::abs(std::abs(theta[i]) - 1.0));
  }

  char buf[128];
  std::snprintf(buf, sizeof(buf),
                "max | |theta|-1 | = %.2e over all methods (limit 1e-9)",
                max_dev);
  report("C3", max_dev <= 1e-9, buf,
         std::chrono::duration<double>(clock_type::now() - t0).count());
}

void criterion_5_early_stopping(const Scene& scene) {
  const auto t0 = clock_type::now();
  const int t_max = 8;
  const std::int64_t budget = 200000;  // matched between the two models
  const auto avg_model =
      active_policy(scene, t_max, policy::LossKind::kAverage, budget,
                    "active_t8_avg_200k.ckpt");
  const auto final_model =
      active_policy(scene, t_max, policy::LossKind::kFinal, budget,
                    "active_t8_final_200k.ckpt");

  const double power = snr_to_power(kSnrDb);
  const auto ev_avg = policy::evaluate_policy(scene, avg_model, t_max, power,
                                              kEvalEpisodes, kEvalSeed);
  const auto ev_final = policy::evaluate_policy(scene, final_model, t_max,
                                                power, kEvalEpisodes,
                                                kEvalSeed);

  bool non_increasing = true;
  std::ostringstream medians;
  double prev = std::numeric_limits<double>::infinity();
  for (int t = 4; t <= t_max; ++t) {
    const double med = ev_avg.median_error(t - 1);
    medians << (t > 4 ? ", " : "") << "t" << t << "=" << med;
    if (med > prev) non_increasing = false;
    prev = med;
  }
  const double avg_t8 = ev_avg.median_error(t_max - 1);
  const double final_t8 = ev_final.median_error(t_max - 1);
  const bool within = avg_t8 <= 1.1 * final_t8;

  char buf[384];
  std::snprintf(buf, sizeof(buf),
                "averaged-loss medians m [%s] non-increasing: %s; t=8 %.3f "
                "vs final-loss %.3f (within 10%%: %s)",
                medians.str().c_str(), non_increasing ? "yes" : "no", avg_t8,
                final_t8, within ? "yes" : "no");
  report("C5", non_increasing && within, buf,
         std::chrono::duration<double>(clock_type::now() - t0).count());
}

void criterion_6_focusing(const Scene& scene, const DeskArtifacts& art) {
  const auto t0 = clock_type::now();
  const baselines::GridSpec grid =
      baselines::GridSpec::from_region(scene.ue_region);
  PilotParams pilot;
  pilot.power = snr_to_power(kSnrDb);
  pilot.frames = 4;

  std::vector<double> q_first, q_last;
  for (int e = 0; e < 20; ++e) {
    const auto index = static_cast<std::uint64_t>(e);
    Rng pos_rng(kEvalSeed, index, StreamRole::kUePosition);
    const Eigen::Vector3d ue = sample_ue_position(scene, pos_rng);
    const ChannelRealization ch = sample_channel(scene, ue, {kEvalSeed, index});
    Rng noise_rng(kEvalSeed, index, StreamRole::kNoise);
    const auto trace = policy::run_episode(scene, ch, pilot, art.active,
                                           scene.noise_power, noise_rng);
    const int cell = grid.index_of_nearest(ue);
    const int ix = cell / grid.ny, iy = cell % grid.ny;
    const Eigen::MatrixXd first =
        harness::radiomap_frame(scene, grid, trace.theta.front(), pilot.power);
    const Eigen::MatrixXd last =
        harness::radiomap_frame(scene, grid, trace.theta.back(), pilot.power);
    q_first.push_back(harness::focusing_fraction(first, ix, iy));
    q_last.push_back(harness::focusing_fraction(last, ix, iy));
  }
  const double med_first = median_of(q_first);
  const double med_last = median_of(q_last);
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "median q: frame 1 = %.4f, frame T = %.4f over 20 episodes",
                med_first, med_last);
  report("C6", med_last < med_first, buf,
         std::chrono::duration<double>(clock_type::now() - t0).count());
}

void criterion_7_crlb_soundness() {
  const auto t0 = clock_type::now();
  Scene s = desk_scene();
  PilotParams pilot;
  pilot.power = snr_to_power(15.0);
  pilot.frames = 1;

  // Analytic vs finite-difference mean gradients across positions/designs.
  double max_rel = 0.0;
  Rng pos_gen(500, 0, StreamRole::kGraphGen);
  for (int trial = 0; trial < 20; ++trial) {
    const Eigen::Vector3d p(pos_gen.uniform(6, 34), pos_gen.uniform(-34, 34),
                            -20.0);
    const auto thetas = baselines::random_theta_sequence(
        1, s.num_elements(), 600 + static_cast<std::uint64_t>(trial));
    const auto g =
        baselines::los_mean_gradient(s, p, thetas[0], pilot.pilot_symbol);
    const double h = 1e-4;
    for (int axis = 0; axis < 3; ++axis) {
      Eigen::Vector3d hi = p, lo = p;
      hi[axis] += h;
      lo[axis] -= h;
      const std::complex<double> fd =
          (baselines::los_mean_gradient(s, hi, thetas[0], pilot.pilot_symbol)
               .mu -
           baselines::los_mean_gradient(s, lo, thetas[0], pilot.pilot_symbol)
               .mu) /
          (2.0 * h);
      max_rel = std::max(max_rel, std::abs(g.dmu[axis] - fd) / std::abs(fd));
    }
  }
  const bool fd_ok = max_rel <= 1e-5;

  // Scalar Gaussian sanity: J = 2/sigma^2 and CRLB = sigma^2/2, exact up to
  // one rounding of the reciprocal.
  const double sigma2 = 0.73;
  Eigen::VectorXcd unit(1);
  unit[0] = 1.0;
  std::vector<Eigen::VectorXcd> grads{unit};
  const double j = baselines::fisher_from_gradients(grads, 1.0, sigma2)(0, 0);
  const bool scalar_ok =
      j == 2.0 / sigma2 &&
      std::abs(1.0 / j - sigma2 / 2.0) <= 1e-15 * (sigma2 / 2.0);

  // N=2 toy: descent within 5% of a 64x64 exhaustive phase grid.
  Scene toy = desk_scene();
  toy.ris_rows = 1;
  toy.ris_cols = 2;
  PilotParams toy_pilot;
  toy_pilot.power = snr_to_power(20.0);
  toy_pilot.frames = 2;
  const Eigen::Vector3d p_hat(20.0, 5.0, -20.0);
  const auto past = baselines::random_theta_sequence(1, 2, 17);
  double grid_best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 64; ++i)
    for (int k = 0; k < 64; ++k) {
      Eigen::VectorXcd cand(2);
      cand[0] = std::polar(1.0, 2.0 * M_PI * i / 64.0);
      cand[1] = std::polar(1.0, 2.0 * M_PI * k / 64.0);
      grid_best = std::min(grid_best, baselines::crlb_objective(
                                          p_hat, past, cand, toy, toy_pilot));
    }
  baselines::GdConfig gd;
  Rng rng(5, 0, StreamRole::kThetaDesign);
  const RISConfig designed =
      baselines::crlb_gd_next_theta(p_hat, past, toy, toy_pilot, gd, rng);
  const double gd_obj =
      baselines::crlb_objective(p_hat, past, designed.theta, toy, toy_pilot);
  const bool gd_ok = gd_obj <= 1.05 * grid_best;

  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "FIM gradient FD %.2e (limit 1e-5); scalar CRLB exact: %s; "
                "N=2 descent %.4g vs grid %.4g",
                max_rel, scalar_ok ? "yes" : "no", gd_obj, grid_best);
  report("C7", fd_ok && scalar_ok && gd_ok, buf,
         std::chrono::duration<double>(clock_type::now() - t0).count());
}

void criterion_8_wknn_oracle() {
  const auto t0 = clock_type::now();
  bool all_ok = true;
  for (int trial = 0; trial < 100 && all_ok; ++trial) {
    Rng rng(3000 + static_cast<std::uint64_t>(trial), 0, StreamRole::kGraphGen);
    baselines::FingerprintDB db;
    db.grid.x0 = 0;
    db.grid.y0 = 0;
    db.grid.z = -3.0;
    db.grid.nx = 4 + static_cast<int>(rng.next_u64() % 4);
    db.grid.ny = 4 + static_cast<int>(rng.next_u64() % 4);
    db.grid.pitch = 1.0;
    db.frames = 2 + static_cast<int>(rng.next_u64() % 3);
    db.rss.resize(db.grid.count(), db.frames);
    for (Eigen::Index b = 0; b < db.rss.rows(); ++b)
      for (Eigen::Index t = 0; t < db.rss.cols(); ++t)
        db.rss(b, t) = rng.uniform(0.0, 2.0);
    Eigen::VectorXd q(db.frames);
    for (Eigen::Index t = 0; t < q.size(); ++t) q[t] = rng.uniform(0.0, 2.0);
    const int k = 1 + static_cast<int>(rng.next_u64() % 7);

    // Brute force: full sort of (distance, index), inverse-distance weights.
    std::vector<std::pair<double, int>> dist;
    for (int b = 0; b < db.grid.count(); ++b)
      dist.emplace_back((db.rss.row(b).transpose() - q).norm(), b);
    std::sort(dist.begin(), dist.end());
    Eigen::Vector3d acc = Eigen::Vector3d::Zero();
    double wsum = 0.0;
    for (int i = 0; i < k; ++i) {
      const double w = 1.0 / (dist[static_cast<std::size_t>(i)].first + 1e-9);
      acc += w * db.grid.center(dist[static_cast<std::size_t>(i)].second);
      wsum += w;
    }
    const Eigen::Vector3d oracle = acc / wsum;
    const Eigen::Vector3d fast = baselines::wknn_localize(db, q, k);
    if ((fast - oracle).norm() > 1e-12) all_ok = false;
  }
  report("C8", all_ok,
         "exact match with brute-force wKNN on 100 toy databases",
         std::chrono::duration<double>(clock_type::now() - t0).count());
}

void criterion_9_determinism(const Scene& scene) {
  const auto t0 = clock_type::now();
  harness::ExperimentConfig config;
  config.scene = scene;
  config.frames = 4;
  config.snr_db = {10.0, kSnrDb};
  config.methods = {"wknn", "active"};
  config.feature_mode = policy::FeatureMode::kPilot;
  config.train_seed = kTrainSeed;
  config.eval_seed = kEvalSeed;
  config.eval_episodes = 100;
  config.wknn.realizations_per_block = 1;
  config.artifacts["active"] = work_dir() + "/active_t4.ckpt";
  config.artifacts["fingerprint_db"] = work_dir() + "/fingerprints_m1.bin";
  config.output_dir = work_dir() + "/det";

  const harness::ResultTable t1 = harness::run_experiment(config);
  const harness::ResultTable t2 = harness::run_experiment(config);
  const bool identical = t1.to_csv() == t2.to_csv();

  fs::create_directories(config.output_dir);
  t1.save_csv(config.output_dir + "/a.csv");
  t2.save_csv(config.output_dir + "/b.csv");
  std::ifstream fa(config.output_dir + "/a.csv", std::ios::binary);
  std::ifstream fb(config.output_dir + "/b.csv", std::ios::binary);
  std::stringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  const bool files_identical = sa.str() == sb.str() && !sa.str().empty();

  report("C9", identical && files_identical,
         "repeated experiment produced byte-identical result tables",
         std::chrono::duration<double>(clock_type::now() - t0).count());
}

}  // namespace

int main() {
  fs::create_directories(work_dir());
  const auto t0 = clock_type::now();

  criterion_1_autodiff();
  criterion_2_channel_statistics();
  criterion_7_crlb_soundness();
  criterion_8_wknn_oracle();

  const Scene scene = desk_scene();
  const DeskArtifacts art = build_desk_artifacts(scene);
  criterion_4_ordering(scene, art);
  criterion_3_feasibility(scene, art);
  criterion_6_focusing(scene, art);
  criterion_5_early_stopping(scene);
  criterion_9_determinism(scene);

  const double total =
      std::chrono::duration<double>(clock_type::now() - t0).count();
  int failures = 0;
  for (const auto& o : g_outcomes)
    if (!o.pass) ++failures;
  std::printf("----\n%zu criteria, %d failed, %.1f s total\n",
              g_outcomes.size(), failures, total);
  return failures == 0 ? 0 : 1;
}
