#pragma once

#include <Eigen/Core>
#include <complex>
#include <span>
#include <vector>

#include "risloc/channel.hpp"

namespace risloc::baselines {

// LOS-model mean and its position gradient; the oracle for every Fisher
// computation below.
struct MuGradient {
  std::complex<double> mu;
  Eigen::Vector3cd dmu;
};

MuGradient los_mean_gradient(const Scene& scene, const Eigen::Vector3d& position,
                             const Eigen::VectorXcd& theta,
                             std::complex<double> pilot_symbol);

// Position Fisher information, evaluated at `position` with the LOS-only
// deterministic model. NLOS fading is treated as part of the noise.
struct FisherInfo {
  Eigen::Matrix3d info;
  Eigen::Vector3d position;

  double min_eigenvalue() const;
};

FisherInfo fisher_info(const Eigen::Vector3d& position,
                       std::span<const Eigen::VectorXcd> thetas,
                       const Scene& scene, const PilotParams& pilot);

// Generic core: J = (2 P / sigma^2) * sum_t Re(g_t^H g_t) for mean gradients
// of any dimension. The 1-D case reduces to scalar Gaussian mean estimation.
Eigen::MatrixXd fisher_from_gradients(std::span<const Eigen::VectorXcd> grads,
                                      double power, double noise_var);

// trace(J^-1) with a 1e-9 ridge when J is numerically singular.
double crlb_trace(const Eigen::Matrix3d& info);

struct GdConfig {
  int iterations = 100;
  double step = 0.1;
  int restarts = 3;
};

// Objective used by the descent: trace of the inverse Fisher matrix after
// appending the candidate configuration.
double crlb_objective(const Eigen::Vector3d& position,
                      std::span<const Eigen::VectorXcd> past_thetas,
                      const Eigen::VectorXcd& candidate, const Scene& scene,
                      const PilotParams& pilot);

// Gradient descent over per-element phases; feasibility is structural.
RISConfig crlb_gd_next_theta(const Eigen::Vector3d& position_estimate,
                             std::span<const Eigen::VectorXcd> past_thetas,
                             const Scene& scene, const PilotParams& pilot,
                             const GdConfig& config, Rng& rng);

struct MapConfig {
  double grid_pitch = 2.0;
  int refine_steps = 50;
};

double map_log_likelihood(const Eigen::Vector3d& position,
                          std::span<const std::complex<double>> measurements,
                          std::span<const Eigen::VectorXcd> thetas,
                          const Scene& scene, const PilotParams& pilot);

// Coarse grid search over the UE region followed by projected gradient
// ascent; never returns a point below the best coarse cell.
Eigen::Vector3d map_estimate(std::span<const std::complex<double>> measurements,
                             std::span<const Eigen::VectorXcd> thetas,
                             const Scene& scene, const PilotParams& pilot,
                             const MapConfig& config);

struct CrlbEpisode {
  std::vector<Eigen::VectorXcd> thetas;
  std::vector<std::complex<double>> measurements;
  std::vector<Eigen::Vector3d> estimates;  // per frame MAP estimates
  Eigen::Vector3d final_estimate() const { return estimates.back(); }
};

// measure -> MAP -> CRLB descent loop for pilot.frames frames. theta_0 is
// random; each later frame minimizes the approximate CRLB at the current
// estimate.
CrlbEpisode crlb_active_episode(const Scene& scene,
                                const ChannelRealization& channel,
                                const PilotParams& pilot,
                                const GdConfig& gd_config,
                                const MapConfig& map_config,
                                std::uint64_t seed, std::uint64_t episode);

}  // namespace risloc::baselines
