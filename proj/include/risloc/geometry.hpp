#pragma once

#include <Eigen/Core>
#include <Eigen/Dense>
#include <string>

namespace risloc {

// dB pathloss model a + b*log10(d), d in meters.
struct PathlossModel {
  double a = 0.0;
  double b = 0.0;
};

// Axis-aligned sampling box for UE positions, center +/- half extent.
struct Region {
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  Eigen::Vector3d half_extent = Eigen::Vector3d::Zero();

  Eigen::Vector3d lo() const { return center - half_extent; }
  Eigen::Vector3d hi() const { return center + half_extent; }
  bool contains(const Eigen::Vector3d& p, double tol = 0.0) const;
  Eigen::Vector3d clamp(const Eigen::Vector3d& p) const;
};

// Fixed deployment geometry plus the stochastic channel parameters.
struct Scene {
  Eigen::Vector3d bs_position = Eigen::Vector3d::Zero();
  Eigen::Vector3d ris_position = Eigen::Vector3d::Zero();
  Region ue_region;
  int ris_rows = 1;
  int ris_cols = 1;
  double spacing_factor = 1.0;  // 2*pi*d_R/lambda_c
  double rician_factor = 0.0;
  PathlossModel pathloss_direct;
  PathlossModel pathloss_reflected;
  double noise_power = 1.0;  // sigma_u^2, linear

  int num_elements() const { return ris_rows * ris_cols; }
  void validate() const;  // throws ConfigError on bad fields

  std::string to_json() const;
  static Scene from_json(const std::string& text);
  static Scene from_json_file(const std::string& path);
  void save_json_file(const std::string& path) const;

  // Stable hash of the canonical serialization; stored in checkpoints so a
  // model cannot silently be evaluated against a different scene.
  std::string fingerprint() const;
};

// Direction cosines seen from the RIS: (sin(az)cos(el), sin(el)). Pairs
// derived from geometry satisfy u^2 + w^2 <= 1 + 1e-12; synthetic pairs may
// probe the steering formula outside that range.
struct AnglePair {
  double sin_az_cos_el = 0.0;
  double sin_el = 0.0;

  bool is_unit_direction(double tol = 1e-12) const {
    return sin_az_cos_el * sin_az_cos_el + sin_el * sin_el <= 1.0 + tol;
  }
};

// Angles of a source as seen from the RIS. Throws DegenerateGeometryError
// when the source coincides with the RIS.
AnglePair angles_from_positions(const Eigen::Vector3d& source,
                                const Eigen::Vector3d& ris_position);

// Element n (0-based storage, 1-based in the phase formula):
//   exp(j * spacing * (mod(n-1,Nc)*u + floor((n-1)/Nc)*w)).
Eigen::VectorXcd steering_vector(const AnglePair& angles, const Scene& scene);

// Amplitude-domain gain 10^(-(a + b*log10(d))/20). Throws for d <= 0.
double pathloss_amplitude(double distance, const PathlossModel& model);

// Raw SNR convention: P_u = 10^(snr_db/10) against unit reference noise.
double snr_to_power(double snr_db);

}  // namespace risloc
