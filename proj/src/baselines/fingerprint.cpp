#include "risloc/baselines/fingerprint.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "../parallel.hpp"
#include "risloc/errors.hpp"

namespace risloc::baselines {

int GridSpec::index_of_nearest(const Eigen::Vector3d& p) const {
  const auto clamp_idx = [](double v, int n) {
    return std::min(std::max(static_cast<int>(std::lround(v)), 0), n - 1);
  };
  const int ix = clamp_idx((p[0] - x0) / pitch, nx);
  const int iy = clamp_idx((p[1] - y0) / pitch, ny);
  return ix * ny + iy;
}

GridSpec GridSpec::from_region(const Region& region, double pitch) {
  GridSpec g;
  g.pitch = pitch;
  g.nx = static_cast<int>(std::floor(2.0 * region.half_extent[0] / pitch + 0.5));
  g.ny = static_cast<int>(std::floor(2.0 * region.half_extent[1] / pitch + 0.5));
  g.x0 = region.center[0] - region.half_extent[0] + pitch / 2.0;
  g.y0 = region.center[1] - region.half_extent[1] + pitch / 2.0;
  g.z = region.center[2];
  if (g.nx < 1 || g.ny < 1)
    throw ConfigError("fingerprints: UE region footprint has no blocks");
  return g;
}

std::vector<Eigen::VectorXcd> random_theta_sequence(int frames, int n,
                                                    std::uint64_t seed) {
  Rng rng(seed, 0, StreamRole::kThetaDesign);
  std::vector<Eigen::VectorXcd> thetas(static_cast<std::size_t>(frames));
  for (auto& theta : thetas) {
    theta.resize(n);
    for (int i = 0; i < n; ++i)
      theta[i] = std::polar(1.0, rng.uniform(0.0, 2.0 * M_PI));
  }
  return thetas;
}

FingerprintDB build_fingerprints(const Scene& scene, const PilotParams& pilot,
                                 const std::vector<Eigen::VectorXcd>& thetas,
                                 int realizations_per_block,
                                 std::uint64_t seed, int workers) {
  if (realizations_per_block < 1)
    throw ConfigError("fingerprints: realizations_per_block must be >= 1");
  if (static_cast<int>(thetas.size()) != pilot.frames)
    throw DimensionError("fingerprints: theta count must equal pilot frames");

  FingerprintDB db;
  db.grid = GridSpec::from_region(scene.ue_region);
  db.frames = pilot.frames;
  db.realizations_per_block = realizations_per_block;
  db.seed = seed;
  db.thetas = thetas;
  db.rss.resize(db.grid.count(), pilot.frames);

  const int blocks = db.grid.count();
  const int m = realizations_per_block;
  detail::parallel_chunks(blocks, detail::resolve_workers(workers), [&](int b) {
    const Eigen::Vector3d center = db.grid.center(b);
    Eigen::RowVectorXd acc = Eigen::RowVectorXd::Zero(pilot.frames);
    for (int r = 0; r < m; ++r) {
      const std::uint64_t index =
          static_cast<std::uint64_t>(b) * static_cast<std::uint64_t>(m) + r;
      const ChannelRealization ch = sample_channel(scene, center, {seed, index});
      Rng noise_rng(seed, index, StreamRole::kNoise);
      for (int t = 0; t < pilot.frames; ++t) {
        const std::complex<double> y =
            measure(ch, thetas[static_cast<std::size_t>(t)], pilot,
                    scene.noise_power, noise_rng);
        acc[t] += std::norm(y);
      }
    }
    db.rss.row(b) = acc / static_cast<double>(m);
  });
  return db;
}

Eigen::Vector3d wknn_localize(const FingerprintDB& db,
                              const Eigen::VectorXd& rss_query, int k) {
  const int blocks = db.grid.count();
  if (k < 1 || k > blocks)
    throw ConfigError("wknn: k must be in [1, block count]");
  if (rss_query.size() != db.frames)
    throw DimensionError("wknn: query length must equal fingerprint length");

  std::vector<int> order(static_cast<std::size_t>(blocks));
  std::iota(order.begin(), order.end(), 0);
  Eigen::VectorXd dist(blocks);
  for (int b = 0; b < blocks; ++b)
    dist[b] = (db.rss.row(b).transpose() - rss_query).norm();
  std::partial_sort(order.begin(), order.begin() + k, order.end(),
                    [&](int a, int b) {
                      if (dist[a] != dist[b]) return dist[a] < dist[b];
                      return a < b;
                    });

  Eigen::Vector3d acc = Eigen::Vector3d::Zero();
  double weight_sum = 0.0;
  for (int i = 0; i < k; ++i) {
    const int b = order[static_cast<std::size_t>(i)];
    const double w = 1.0 / (dist[b] + 1e-9);
    acc += w * db.grid.center(b);
    weight_sum += w;
  }
  return acc / weight_sum;
}

namespace {

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

void write_f64(std::ostream& out, double v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

double read_f64(std::istream& in) {
  double v = 0.0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

constexpr char kMagic[9] = "RLFPDB01";

}  // namespace

void FingerprintDB::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("fingerprints: cannot write '" + path + "'");
  out.write(kMagic, 8);
  write_f64(out, grid.x0);
  write_f64(out, grid.y0);
  write_f64(out, grid.z);
  write_u64(out, static_cast<std::uint64_t>(grid.nx));
  write_u64(out, static_cast<std::uint64_t>(grid.ny));
  write_f64(out, grid.pitch);
  write_u64(out, static_cast<std::uint64_t>(frames));
  write_u64(out, static_cast<std::uint64_t>(realizations_per_block));
  write_u64(out, seed);
  const std::uint64_t n =
      thetas.empty() ? 0 : static_cast<std::uint64_t>(thetas.front().size());
  write_u64(out, n);
  for (const auto& theta : thetas)
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
      write_f64(out, theta[i].real());
      write_f64(out, theta[i].imag());
    }
  for (Eigen::Index b = 0; b < rss.rows(); ++b) {
    const Eigen::Vector3d center = grid.center(static_cast<int>(b));
    for (int i = 0; i < 3; ++i) write_f64(out, center[i]);
    for (Eigen::Index t = 0; t < rss.cols(); ++t) write_f64(out, rss(b, t));
  }
  if (!out) throw ConfigError("fingerprints: write failed for '" + path + "'");
}

FingerprintDB FingerprintDB::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("fingerprints: cannot open '" + path + "'");
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kMagic, 8) != 0)
    throw ConfigError("fingerprints: bad magic in '" + path + "'");

  FingerprintDB db;
  db.grid.x0 = read_f64(in);
  db.grid.y0 = read_f64(in);
  db.grid.z = read_f64(in);
  db.grid.nx = static_cast<int>(read_u64(in));
  db.grid.ny = static_cast<int>(read_u64(in));
  db.grid.pitch = read_f64(in);
  db.frames = static_cast<int>(read_u64(in));
  db.realizations_per_block = static_cast<int>(read_u64(in));
  db.seed = read_u64(in);
  const auto n = static_cast<Eigen::Index>(read_u64(in));
  db.thetas.resize(static_cast<std::size_t>(db.frames));
  for (auto& theta : db.thetas) {
    theta.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double re = read_f64(in);
      const double im = read_f64(in);
      theta[i] = {re, im};
    }
  }
  db.rss.resize(db.grid.count(), db.frames);
  for (Eigen::Index b = 0; b < db.rss.rows(); ++b) {
    for (int i = 0; i < 3; ++i) (void)read_f64(in);  // centers are derivable
    for (Eigen::Index t = 0; t < db.rss.cols(); ++t) db.rss(b, t) = read_f64(in);
  }
  if (!in) throw ConfigError("fingerprints: truncated file '" + path + "'");
  return db;
}

}  // namespace risloc::baselines
