#pragma once

#include <Eigen/Core>
#include <complex>
#include <cstdint>

#include "risloc/geometry.hpp"
#include "risloc/rng.hpp"

namespace risloc {

// One coherence block: direct channel, both reflection hops and the cascade
// v_r[n] = h_r[n] * g_r[n]. Pathloss amplitudes are folded into the fields.
struct ChannelRealization {
  std::complex<double> h_d;
  Eigen::VectorXcd h_r;
  Eigen::VectorXcd g_r;
  Eigen::VectorXcd v_r;
};

// Unit-modulus RIS reflection coefficients.
struct RISConfig {
  Eigen::VectorXcd theta;

  bool is_unit_modulus(double tol = 1e-9) const {
    for (int i = 0; i < theta.size(); ++i)
      if (std::abs(std::abs(theta[i]) - 1.0) > tol) return false;
    return true;
  }
};

// Uplink pilot parameters; the pilot symbol must stay unit modulus.
struct PilotParams {
  double power = 1.0;                       // P_u, linear
  std::complex<double> pilot_symbol{1.0, 0.0};  // x_t
  int frames = 1;                           // T

  void validate() const;
};

// Identifies one data sample; channel roles get their own sub-streams.
struct SampleKey {
  std::uint64_t seed = 0;
  std::uint64_t index = 0;
};

// Uniform draw from the scene's UE box.
Eigen::Vector3d sample_ue_position(const Scene& scene, Rng& rng);

// Rician draw of (h_d, h_r, g_r) for a UE at `ue_position`. Throws
// DegenerateGeometryError when the UE coincides with the BS or the RIS.
ChannelRealization sample_channel(const Scene& scene,
                                  const Eigen::Vector3d& ue_position,
                                  const SampleKey& key);

// Received pilot sqrt(P_u) * (h_d + v_r^T theta) * x + n, n ~ CN(0, noise_var).
// Accepts any complex theta so superposition tests can probe linearity; the
// unit-modulus requirement lives in RISConfig.
std::complex<double> measure(const ChannelRealization& channel,
                             const Eigen::VectorXcd& theta,
                             const PilotParams& pilot, double noise_var,
                             Rng& noise_rng);

// Noise-free LOS-only mean of the measurement, used by the estimation-theory
// baseline and the radio maps: mu(p) = (rho(p) + v_r_los(p)^T theta) * x.
std::complex<double> los_mean(const Scene& scene, const Eigen::Vector3d& position,
                              const Eigen::VectorXcd& theta,
                              const std::complex<double>& pilot_symbol);

// LOS-only cascade kappa(p)*xi * a_ue(p) .* conj(a_bs), plus the direct term.
struct LosChannel {
  std::complex<double> h_d;
  Eigen::VectorXcd v_r;
};
LosChannel los_channel(const Scene& scene, const Eigen::Vector3d& position);

}  // namespace risloc
