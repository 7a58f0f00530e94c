#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "risloc/channel.hpp"

namespace risloc::baselines {

// 1m x 1m block centers tiling the UE region's x-y footprint at fixed z.
struct GridSpec {
  double x0 = 0.0;  // first block center
  double y0 = 0.0;
  double z = 0.0;
  int nx = 0;
  int ny = 0;
  double pitch = 1.0;

  int count() const { return nx * ny; }
  Eigen::Vector3d center(int index) const {
    const int ix = index / ny;
    const int iy = index % ny;
    return {x0 + pitch * ix, y0 + pitch * iy, z};
  }
  int index_of_nearest(const Eigen::Vector3d& p) const;
  static GridSpec from_region(const Region& region, double pitch = 1.0);
};

// Offline RSS database plus the fixed random configurations that produced it.
struct FingerprintDB {
  GridSpec grid;
  int frames = 0;
  int realizations_per_block = 1;
  std::uint64_t seed = 0;
  std::vector<Eigen::VectorXcd> thetas;  // frames entries, length N
  Eigen::MatrixXd rss;                   // count x frames

  void save(const std::string& path) const;
  static FingerprintDB load(const std::string& path);
};

// I.i.d. phases uniform on [0, 2pi), reproducible from the seed.
std::vector<Eigen::VectorXcd> random_theta_sequence(int frames, int n,
                                                    std::uint64_t seed);

// Mean RSS vector over `realizations_per_block` channel draws per block
// center. Throws ConfigError when the region footprint has no blocks.
FingerprintDB build_fingerprints(const Scene& scene, const PilotParams& pilot,
                                 const std::vector<Eigen::VectorXcd>& thetas,
                                 int realizations_per_block,
                                 std::uint64_t seed, int workers = 0);

// Inverse-distance weighted average of the k nearest fingerprints.
Eigen::Vector3d wknn_localize(const FingerprintDB& db,
                              const Eigen::VectorXd& rss_query, int k);

}  // namespace risloc::baselines
