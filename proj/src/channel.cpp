#include "risloc/channel.hpp"

#include <cmath>

#include "risloc/errors.hpp"

namespace risloc {

void PilotParams::validate() const {
  if (!(power > 0.0)) throw ConfigError("pilot: power must be > 0");
  if (std::abs(std::abs(pilot_symbol) - 1.0) > 1e-12)
    throw ConfigError("pilot: pilot_symbol must be unit modulus");
  if (frames < 1) throw ConfigError("pilot: frames must be >= 1");
}

Eigen::Vector3d sample_ue_position(const Scene& scene, Rng& rng) {
  Eigen::Vector3d p;
  for (int i = 0; i < 3; ++i) {
    const double he = scene.ue_region.half_extent[i];
    p[i] = scene.ue_region.center[i] + (he > 0.0 ? rng.uniform(-he, he) : 0.0);
  }
  return p;
}

ChannelRealization sample_channel(const Scene& scene,
                                  const Eigen::Vector3d& ue_position,
                                  const SampleKey& key) {
  const int n = scene.num_elements();
  const double d_ris_ue = (ue_position - scene.ris_position).norm();
  const double d_bs_ue = (ue_position - scene.bs_position).norm();
  const double d_bs_ris = (scene.bs_position - scene.ris_position).norm();
  if (d_ris_ue <= 0.0 || d_bs_ue <= 0.0)
    throw DegenerateGeometryError("UE coincides with the RIS or the BS");

  const double kappa = pathloss_amplitude(d_ris_ue, scene.pathloss_reflected);
  const double xi = pathloss_amplitude(d_bs_ris, scene.pathloss_reflected);
  const double rho = pathloss_amplitude(d_bs_ue, scene.pathloss_direct);

  const double eps = scene.rician_factor;
  const double los_w = std::sqrt(eps / (1.0 + eps));
  const double nlos_w = std::sqrt(1.0 / (1.0 + eps));

  const Eigen::VectorXcd a_ue =
      steering_vector(angles_from_positions(ue_position, scene.ris_position),
                      scene);
  const Eigen::VectorXcd a_bs =
      steering_vector(angles_from_positions(scene.bs_position, scene.ris_position),
                      scene);

  Rng rng_hr(key.seed, key.index, StreamRole::kChannelHr);
  Rng rng_gr(key.seed, key.index, StreamRole::kChannelGr);
  Rng rng_hd(key.seed, key.index, StreamRole::kChannelHd);

  ChannelRealization ch;
  ch.h_r.resize(n);
  ch.g_r.resize(n);
  ch.v_r.resize(n);
  for (int i = 0; i < n; ++i)
    ch.h_r[i] = kappa * (los_w * a_ue[i] + nlos_w * rng_hr.cnormal());
  for (int i = 0; i < n; ++i)
    ch.g_r[i] = xi * (los_w * std::conj(a_bs[i]) + nlos_w * rng_gr.cnormal());
  ch.h_d = rho * (los_w + nlos_w * rng_hd.cnormal());
  ch.v_r = ch.h_r.cwiseProduct(ch.g_r);
  return ch;
}

std::complex<double> measure(const ChannelRealization& channel,
                             const Eigen::VectorXcd& theta,
                             const PilotParams& pilot, double noise_var,
                             Rng& noise_rng) {
  if (theta.size() != channel.v_r.size())
    throw DimensionError("measure: theta length does not match the channel");
  const std::complex<double> reflected = channel.v_r.cwiseProduct(theta).sum();
  const std::complex<double> noise =
      std::sqrt(noise_var) * noise_rng.cnormal();
  return std::sqrt(pilot.power) * (channel.h_d + reflected) *
             pilot.pilot_symbol +
         noise;
}

LosChannel los_channel(const Scene& scene, const Eigen::Vector3d& position) {
  const double d_ris = (position - scene.ris_position).norm();
  const double d_bs = (position - scene.bs_position).norm();
  const double d_bs_ris = (scene.bs_position - scene.ris_position).norm();
  if (d_ris <= 0.0 || d_bs <= 0.0)
    throw DegenerateGeometryError("position coincides with the RIS or the BS");

  const double kappa = pathloss_amplitude(d_ris, scene.pathloss_reflected);
  const double xi = pathloss_amplitude(d_bs_ris, scene.pathloss_reflected);
  const double rho = pathloss_amplitude(d_bs, scene.pathloss_direct);

  const Eigen::VectorXcd a_ue =
      steering_vector(angles_from_positions(position, scene.ris_position), scene);
  const Eigen::VectorXcd a_bs =
      steering_vector(angles_from_positions(scene.bs_position, scene.ris_position),
                      scene);

  LosChannel los;
  los.h_d = rho;
  los.v_r = (kappa * xi) * a_ue.cwiseProduct(a_bs.conjugate());
  return los;
}

std::complex<double> los_mean(const Scene& scene, const Eigen::Vector3d& position,
                              const Eigen::VectorXcd& theta,
                              const std::complex<double>& pilot_symbol) {
  const LosChannel los = los_channel(scene, position);
  if (theta.size() != los.v_r.size())
    throw DimensionError("los_mean: theta length does not match the scene");
  return (los.h_d + los.v_r.cwiseProduct(theta).sum()) * pilot_symbol;
}

}  // namespace risloc
