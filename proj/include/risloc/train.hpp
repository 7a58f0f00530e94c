#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "risloc/adam.hpp"
#include "risloc/policy.hpp"

namespace risloc::policy {

struct TrainConfig {
  std::int64_t samples = 200000;
  int batch = 128;
  double lr = 1e-3;
  LossKind loss = LossKind::kFinal;
  int epoch_steps = 100;
  int patience = 10;  // epochs without validation improvement before stopping
  int val_episodes = 512;
  std::int64_t warmup_samples = 10000;
  double clip_norm = 10.0;
  int workers = 0;  // 0 = hardware concurrency
  int chunk = 32;   // fixed per-tape slice; keeps results thread-count free
  double snr_db = 20.0;
  std::uint64_t seed = 1;
};

struct TrainLogRow {
  int epoch = 0;
  std::int64_t step = 0;
  std::int64_t samples_seen = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  double val_mse = 0.0;
  double seconds = 0.0;
};

struct TrainResult {
  Policy policy;  // best-validation weights
  AdamState opt;
  std::vector<TrainLogRow> log;
  double best_val_mse = 0.0;
  int best_epoch = 0;
  std::int64_t steps_run = 0;
};

// Estimates the fixed feature standardization from `samples` episodes driven
// by random configurations at the training SNR.
FeatureScaler estimate_feature_scaler(const Scene& scene, int frames,
                                      double power, FeatureMode mode,
                                      std::int64_t samples, std::uint64_t seed);

// Step-decay by halving at each third of the run.
double lr_schedule(double base_lr, std::int64_t step, std::int64_t total_steps);

// Trains the adaptive policy on freshly sampled episodes; returns the
// best-validation weights plus the per-epoch log. Throws NumericError with a
// diagnostic if the loss diverges.
TrainResult train_policy(const Scene& scene, int frames, PolicyDims dims,
                         const TrainConfig& config);

// Forward-only batched rollout of `episodes` fixed-seed episodes.
struct PolicyEvaluation {
  Eigen::MatrixXd frame_err_sq;  // frames x episodes, squared error in m^2
  double max_theta_deviation = 0.0;  // max | |theta_n| - 1 | observed
  double mse(int frame) const;       // mean of row `frame`
  double final_mse() const { return mse(static_cast<int>(frame_err_sq.rows()) - 1); }
  double median_error(int frame) const;  // median of sqrt(err^2)
};

PolicyEvaluation evaluate_policy(const Scene& scene, const Policy& policy,
                                 int frames, double power, int episodes,
                                 std::uint64_t seed, int workers = 0,
                                 int chunk = 64);

// Checkpoint round-trip. Loading validates RIS size, feature mode and scene
// fingerprint against the caller's expectation.
void save_policy_checkpoint(const std::string& path, const Policy& policy,
                            const Scene& scene, int frames, LossKind loss,
                            double snr_db, std::int64_t global_step,
                            const AdamState* opt = nullptr);

struct LoadedPolicy {
  Policy policy;
  int frames = 0;
  LossKind loss = LossKind::kFinal;
  double snr_db = 0.0;
  std::int64_t global_step = 0;
};

LoadedPolicy load_policy_checkpoint(const std::string& path,
                                    const Scene& expected_scene);

double median(std::vector<double> values);

}  // namespace risloc::policy
