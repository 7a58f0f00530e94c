#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "risloc/adam.hpp"
#include "risloc/policy.hpp"
#include "risloc/train.hpp"

namespace risloc::baselines {

enum class DesignProvenance { kRandom, kLearned };

const char* to_string(DesignProvenance p);
DesignProvenance provenance_from_string(const std::string& s);

// Non-adaptive benchmark: a fixed sequence of configurations (random or
// trained jointly with the estimator) and a feedforward position decoder.
struct StaticDnnModel {
  int n = 0;
  int frames = 0;
  policy::FeatureMode mode = policy::FeatureMode::kPilot;
  DesignProvenance provenance = DesignProvenance::kRandom;
  std::vector<int> hidden = {200, 200, 200};
  NamedParams params;  // theta_logits first, then mlp layers
  policy::FeatureScaler scaler;  // over the stacked frames x feature input

  std::vector<Eigen::VectorXcd> design() const;  // unit-modulus sequence
  Eigen::Vector3d estimate(const Eigen::VectorXd& stacked_features) const;

  static StaticDnnModel init(int n, int frames, policy::FeatureMode mode,
                             DesignProvenance provenance, std::uint64_t seed);
};

struct StaticDnnResult {
  StaticDnnModel model;
  std::vector<policy::TrainLogRow> log;
  double best_val_mse = 0.0;
  std::int64_t steps_run = 0;
};

// Trains the estimator (and, for learned provenance, the design logits) with
// the same data stream and budget conventions as the policy trainer.
StaticDnnResult static_dnn_train(const Scene& scene, int frames,
                                 policy::FeatureMode mode,
                                 DesignProvenance provenance,
                                 const policy::TrainConfig& config);

struct StaticDnnEvaluation {
  Eigen::VectorXd err_sq;  // episodes
  double max_theta_deviation = 0.0;
  double mse() const { return err_sq.mean(); }
};

StaticDnnEvaluation evaluate_static_dnn(const Scene& scene,
                                        const StaticDnnModel& model,
                                        double power, int episodes,
                                        std::uint64_t seed, int workers = 0);

void save_static_dnn_checkpoint(const std::string& path,
                                const StaticDnnModel& model,
                                const Scene& scene, double snr_db,
                                std::int64_t global_step);
StaticDnnModel load_static_dnn_checkpoint(const std::string& path,
                                          const Scene& expected_scene);

}  // namespace risloc::baselines
