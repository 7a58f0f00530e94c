#include "risloc/baselines/crlb.hpp"

#include <Eigen/Dense>
#include <cmath>

#include "risloc/errors.hpp"

namespace risloc::baselines {

namespace {

// d(amplitude)/d(distance) for the dB model a + b*log10(d):
// A(d) = 10^(-(a + b log10 d)/20)  =>  A'(d) = -A(d) * b / (20 d).
double pathloss_amplitude_derivative(double distance, double amplitude,
                                     const PathlossModel& model) {
  return -amplitude * model.b / (20.0 * distance);
}

// Everything about the LOS cascade at p that does not depend on theta:
// per-element complex coefficients c_n and their position gradients.
struct LosGeometry {
  std::complex<double> h_d;
  Eigen::Vector3cd dh_d;
  Eigen::VectorXcd cascade;            // N
  Eigen::Matrix3Xcd dcascade;          // 3 x N
};

LosGeometry los_geometry(const Scene& scene, const Eigen::Vector3d& p) {
  const Eigen::Vector3d to_bs = p - scene.bs_position;
  const Eigen::Vector3d to_ris = p - scene.ris_position;
  const double d_bs = to_bs.norm();
  const double d_ris = to_ris.norm();
  const double d_bs_ris = (scene.bs_position - scene.ris_position).norm();
  if (d_bs <= 0.0 || d_ris <= 0.0)
    throw DegenerateGeometryError("fisher: position coincides with BS or RIS");

  const double rho = pathloss_amplitude(d_bs, scene.pathloss_direct);
  const double kappa = pathloss_amplitude(d_ris, scene.pathloss_reflected);
  const double xi = pathloss_amplitude(d_bs_ris, scene.pathloss_reflected);
  const double drho = pathloss_amplitude_derivative(d_bs, rho, scene.pathloss_direct);
  const double dkappa =
      pathloss_amplitude_derivative(d_ris, kappa, scene.pathloss_reflected);

  // Direction cosines and their gradients.
  const double u = to_ris[1] / d_ris;
  const double w = to_ris[2] / d_ris;
  const Eigen::Vector3d dd_ris = to_ris / d_ris;
  Eigen::Vector3d du = -to_ris[1] * to_ris / (d_ris * d_ris * d_ris);
  du[1] += 1.0 / d_ris;
  Eigen::Vector3d dw = -to_ris[2] * to_ris / (d_ris * d_ris * d_ris);
  dw[2] += 1.0 / d_ris;

  const Eigen::VectorXcd a_ue = steering_vector({u, w}, scene);
  const Eigen::VectorXcd a_bs = steering_vector(
      angles_from_positions(scene.bs_position, scene.ris_position), scene);

  LosGeometry out;
  out.h_d = rho;
  out.dh_d = (drho * to_bs / d_bs).cast<std::complex<double>>();

  const int n = scene.num_elements();
  out.cascade.resize(n);
  out.dcascade.resize(3, n);
  const std::complex<double> j_unit(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    const double v1 = static_cast<double>(i % scene.ris_cols);
    const double v2 = static_cast<double>(i / scene.ris_cols);
    const std::complex<double> b_n = std::conj(a_bs[i]);
    const std::complex<double> c_n = kappa * xi * a_ue[i] * b_n;
    out.cascade[i] = c_n;
    // d c_n = xi * (dkappa * a + kappa * j*s*(v1 du + v2 dw) * a) * b_n
    const Eigen::Vector3d phase_grad = scene.spacing_factor * (v1 * du + v2 * dw);
    for (int axis = 0; axis < 3; ++axis) {
      out.dcascade(axis, i) =
          xi * b_n * a_ue[i] *
          (dkappa * dd_ris[axis] + kappa * j_unit * phase_grad[axis]);
    }
  }
  return out;
}

Eigen::Vector3cd mu_gradient_from_geometry(const LosGeometry& geo,
                                           const Eigen::VectorXcd& theta,
                                           std::complex<double> pilot_symbol) {
  Eigen::Vector3cd g = geo.dh_d;
  g += geo.dcascade * theta;
  return pilot_symbol * g;
}

}  // namespace

MuGradient los_mean_gradient(const Scene& scene, const Eigen::Vector3d& position,
                             const Eigen::VectorXcd& theta,
                             std::complex<double> pilot_symbol) {
  const LosGeometry geo = los_geometry(scene, position);
  if (theta.size() != geo.cascade.size())
    throw DimensionError("los_mean_gradient: theta length mismatch");
  MuGradient out;
  out.mu = (geo.h_d + geo.cascade.cwiseProduct(theta).sum()) * pilot_symbol;
  out.dmu = mu_gradient_from_geometry(geo, theta, pilot_symbol);
  return out;
}

double FisherInfo::min_eigenvalue() const {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(info);
  return es.eigenvalues().minCoeff();
}

Eigen::MatrixXd fisher_from_gradients(std::span<const Eigen::VectorXcd> grads,
                                      double power, double noise_var) {
  if (grads.empty()) throw DimensionError("fisher: no gradients supplied");
  const auto dim = grads.front().size();
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(dim, dim);
  for (const auto& g : grads) {
    if (g.size() != dim) throw DimensionError("fisher: dimension mismatch");
    j += (g * g.adjoint()).real();
  }
  j *= 2.0 * power / noise_var;
  return 0.5 * (j + j.transpose());  // symmetrize rounding
}

FisherInfo fisher_info(const Eigen::Vector3d& position,
                       std::span<const Eigen::VectorXcd> thetas,
                       const Scene& scene, const PilotParams& pilot) {
  const LosGeometry geo = los_geometry(scene, position);
  std::vector<Eigen::VectorXcd> grads;
  grads.reserve(thetas.size());
  for (const auto& theta : thetas) {
    if (theta.size() != geo.cascade.size())
      throw DimensionError("fisher_info: theta length mismatch");
    grads.push_back(
        mu_gradient_from_geometry(geo, theta, pilot.pilot_symbol));
  }
  FisherInfo out;
  out.position = position;
  out.info =
      fisher_from_gradients(grads, pilot.power, scene.noise_power);
  return out;
}

double crlb_trace(const Eigen::Matrix3d& info) {
  Eigen::Matrix3d j = info;
  Eigen::FullPivLU<Eigen::Matrix3d> lu(j);
  if (!lu.isInvertible()) j += 1e-9 * Eigen::Matrix3d::Identity();
  const Eigen::Matrix3d inv = j.inverse();
  if (!inv.allFinite()) {
    j += 1e-9 * Eigen::Matrix3d::Identity();
    return j.inverse().trace();
  }
  return inv.trace();
}

double crlb_objective(const Eigen::Vector3d& position,
                      std::span<const Eigen::VectorXcd> past_thetas,
                      const Eigen::VectorXcd& candidate, const Scene& scene,
                      const PilotParams& pilot) {
  std::vector<Eigen::VectorXcd> all(past_thetas.begin(), past_thetas.end());
  all.push_back(candidate);
  return crlb_trace(fisher_info(position, all, scene, pilot).info);
}

RISConfig crlb_gd_next_theta(const Eigen::Vector3d& position_estimate,
                             std::span<const Eigen::VectorXcd> past_thetas,
                             const Scene& scene, const PilotParams& pilot,
                             const GdConfig& config, Rng& rng) {
  const int n = scene.num_elements();
  const LosGeometry geo = los_geometry(scene, position_estimate);
  const double c = 2.0 * pilot.power / scene.noise_power;

  Eigen::Matrix3d j_past = Eigen::Matrix3d::Zero();
  for (const auto& theta : past_thetas) {
    const Eigen::Vector3cd g =
        mu_gradient_from_geometry(geo, theta, pilot.pilot_symbol);
    j_past += c * (g * g.adjoint()).real();
  }

  const auto theta_of = [&](const Eigen::VectorXd& delta) {
    Eigen::VectorXcd theta(n);
    for (int i = 0; i < n; ++i) theta[i] = std::polar(1.0, delta[i]);
    return theta;
  };
  const auto objective = [&](const Eigen::VectorXd& delta) {
    const Eigen::Vector3cd g = mu_gradient_from_geometry(
        geo, theta_of(delta), pilot.pilot_symbol);
    Eigen::Matrix3d j = j_past + c * (g * g.adjoint()).real();
    return crlb_trace(j);
  };

  Eigen::VectorXd best_delta;
  double best_obj = std::numeric_limits<double>::infinity();

  for (int restart = 0; restart < std::max(1, config.restarts); ++restart) {
    Eigen::VectorXd delta(n);
    for (int i = 0; i < n; ++i) delta[i] = rng.uniform(0.0, 2.0 * M_PI);
    double f = objective(delta);
    if (f < best_obj) {
      best_obj = f;
      best_delta = delta;
    }
    double step = config.step;

    for (int it = 0; it < config.iterations; ++it) {
      // Analytic gradient of trace(J^-1) w.r.t. the candidate phases.
      const Eigen::VectorXcd theta = theta_of(delta);
      const Eigen::Vector3cd g =
          mu_gradient_from_geometry(geo, theta, pilot.pilot_symbol);
      Eigen::Matrix3d j = j_past + c * (g * g.adjoint()).real();
      Eigen::FullPivLU<Eigen::Matrix3d> lu(j);
      if (!lu.isInvertible()) j += 1e-9 * Eigen::Matrix3d::Identity();
      const Eigen::Matrix3d m = j.inverse();
      const Eigen::Matrix3d b = m * m;
      Eigen::VectorXd grad(n);
      const std::complex<double> j_unit(0.0, 1.0);
      for (int i = 0; i < n; ++i) {
        // dg/ddelta_i = j * e^{j delta_i} * D_i (column i of dcascade * x).
        const Eigen::Vector3cd v =
            j_unit * theta[i] * pilot.pilot_symbol * geo.dcascade.col(i);
        grad[i] = -2.0 * c * (v.adjoint() * b.cast<std::complex<double>>() * g)
                             .real()(0, 0);
      }
      Eigen::VectorXd trial = delta - step * grad;
      const double f_trial = objective(trial);
      if (f_trial < f) {
        delta = std::move(trial);
        f = f_trial;
        if (f < best_obj) {
          best_obj = f;
          best_delta = delta;
        }
      } else {
        step *= 0.5;
      }
    }
  }
  return {theta_of(best_delta)};
}

double map_log_likelihood(const Eigen::Vector3d& position,
                          std::span<const std::complex<double>> measurements,
                          std::span<const Eigen::VectorXcd> thetas,
                          const Scene& scene, const PilotParams& pilot) {
  if (measurements.empty())
    throw ConfigError("map: need at least one measurement");
  if (measurements.size() != thetas.size())
    throw DimensionError("map: measurement/theta count mismatch");
  const LosChannel los = los_channel(scene, position);
  const double sqrt_p = std::sqrt(pilot.power);
  double nll = 0.0;
  for (std::size_t t = 0; t < measurements.size(); ++t) {
    const std::complex<double> mu =
        (los.h_d + los.v_r.cwiseProduct(thetas[t]).sum()) * pilot.pilot_symbol;
    nll += std::norm(measurements[t] - sqrt_p * mu);
  }
  return -nll / scene.noise_power;
}

Eigen::Vector3d map_estimate(std::span<const std::complex<double>> measurements,
                             std::span<const Eigen::VectorXcd> thetas,
                             const Scene& scene, const PilotParams& pilot,
                             const MapConfig& config) {
  if (measurements.empty())
    throw ConfigError("map_estimate: need at least one measurement");
  const Region& region = scene.ue_region;

  // Coarse sweep at the configured pitch; degenerate axes collapse to one
  // sample.
  std::vector<double> axes[3];
  for (int a = 0; a < 3; ++a) {
    const double lo = region.lo()[a];
    const double hi = region.hi()[a];
    if (hi - lo < config.grid_pitch) {
      axes[a].push_back(region.center[a]);
      continue;
    }
    for (double v = lo + config.grid_pitch / 2.0; v <= hi;
         v += config.grid_pitch)
      axes[a].push_back(v);
  }

  Eigen::Vector3d best = region.center;
  double best_ll = -std::numeric_limits<double>::infinity();
  for (double x : axes[0])
    for (double y : axes[1])
      for (double z : axes[2]) {
        const Eigen::Vector3d p(x, y, z);
        const double ll =
            map_log_likelihood(p, measurements, thetas, scene, pilot);
        if (ll > best_ll) {
          best_ll = ll;
          best = p;
        }
      }

  // Projected gradient ascent from the best cell; only improving steps are
  // taken so the result cannot fall below the coarse optimum. The ascent
  // direction drops the positive 1/sigma^2 prefactor so extreme noise powers
  // cannot overflow the gradient.
  const double sqrt_p = std::sqrt(pilot.power);
  Eigen::Vector3d p = best;
  double ll = best_ll;
  double step = 1.0;
  for (int it = 0; it < config.refine_steps; ++it) {
    const LosGeometry geo = los_geometry(scene, p);
    Eigen::Vector3d grad = Eigen::Vector3d::Zero();
    for (std::size_t t = 0; t < measurements.size(); ++t) {
      const std::complex<double> mu =
          (geo.h_d + geo.cascade.cwiseProduct(thetas[t]).sum()) * pilot.pilot_symbol;
      const Eigen::Vector3cd dmu =
          mu_gradient_from_geometry(geo, thetas[t], pilot.pilot_symbol);
      const std::complex<double> r = measurements[t] - sqrt_p * mu;
      grad += (std::conj(r) * dmu.array()).real().matrix();
    }
    const double norm = grad.norm();
    if (norm < 1e-15) break;
    const Eigen::Vector3d trial = region.clamp(p + step * grad / norm);
    const double ll_trial =
        map_log_likelihood(trial, measurements, thetas, scene, pilot);
    if (ll_trial > ll) {
      p = trial;
      ll = ll_trial;
      step *= 1.2;
    } else {
      step *= 0.5;
    }
  }
  return p;
}

CrlbEpisode crlb_active_episode(const Scene& scene,
                                const ChannelRealization& channel,
                                const PilotParams& pilot,
                                const GdConfig& gd_config,
                                const MapConfig& map_config,
                                std::uint64_t seed, std::uint64_t episode) {
  const int n = scene.num_elements();
  Rng design_rng(seed, episode, StreamRole::kThetaDesign);
  Rng noise_rng(seed, episode, StreamRole::kNoise);

  CrlbEpisode ep;
  Eigen::VectorXcd theta(n);
  for (int i = 0; i < n; ++i)
    theta[i] = std::polar(1.0, design_rng.uniform(0.0, 2.0 * M_PI));

  for (int t = 0; t < pilot.frames; ++t) {
    ep.thetas.push_back(theta);
    ep.measurements.push_back(
        measure(channel, theta, pilot, scene.noise_power, noise_rng));
    const Eigen::Vector3d estimate =
        map_estimate(ep.measurements, ep.thetas, scene, pilot, map_config);
    ep.estimates.push_back(estimate);
    if (t + 1 < pilot.frames)
      theta = crlb_gd_next_theta(estimate, ep.thetas, scene, pilot, gd_config,
                                 design_rng)
                  .theta;
  }
  return ep;
}

}  // namespace risloc::baselines
