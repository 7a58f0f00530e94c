#pragma once

#include <Eigen/Core>
#include <optional>
#include <string>
#include <vector>

#include "risloc/baselines/fingerprint.hpp"
#include "risloc/harness/config.hpp"
#include "risloc/policy.hpp"

namespace risloc::harness {

struct ResultRow {
  std::string method;
  double snr_db = 0.0;
  int frames = 0;
  int episodes = 0;
  double mse = 0.0;         // m^2
  double rmse = 0.0;        // m
  double median_err = 0.0;  // m
  double wall_seconds = 0.0;
};

// Timing stays out of the CSV so identical runs produce identical bytes; it
// is reported through the manifest instead.
struct ResultTable {
  std::vector<ResultRow> rows;

  std::string to_csv() const;
  void save_csv(const std::string& path) const;
  static ResultTable from_csv(const std::string& path);
};

struct MethodEvaluation {
  Eigen::VectorXd err_sq;  // per-episode squared error of the final estimate
  double max_theta_deviation = 0.0;
  double wall_seconds = 0.0;
};

ResultRow summarize(const std::string& method, double snr_db, int frames,
                    const MethodEvaluation& ev);

// Evaluates one method on the shared fixed-seed episode set at one SNR.
MethodEvaluation evaluate_method(const ExperimentConfig& config,
                                 const std::string& method, double snr_db);

// Every (method, SNR) pair in the config, in order. Deterministic given the
// config. Throws ConfigError when a referenced checkpoint is missing and
// NumericError if any metric comes out non-finite.
ResultTable run_experiment(const ExperimentConfig& config);

// Evaluates one averaged-loss model truncated at every t = 1..frames without
// retraining. Row t reuses the exact run_experiment computation at t = frames.
ResultTable sweep_frames(const ExperimentConfig& config,
                         const std::string& checkpoint_path);

// Plot-ready RSS maps of one replayed episode: one matrix file per frame plus
// a metadata file. q[t] is the fraction of cells strictly brighter than the
// UE's cell.
struct RadioMapResult {
  std::vector<std::string> frame_files;
  std::string meta_file;
  std::vector<double> q;
  Eigen::Vector3d ue_position;
  int ue_cell = -1;
};

Eigen::MatrixXd radiomap_frame(const Scene& scene,
                               const baselines::GridSpec& grid,
                               const Eigen::VectorXcd& theta, double power);

double focusing_fraction(const Eigen::MatrixXd& rss, int ue_cell_ix,
                         int ue_cell_iy);

RadioMapResult export_radiomap(const ExperimentConfig& config,
                               const policy::Policy& trained, double snr_db,
                               std::uint64_t episode, const std::string& out_dir);

// Exclusive ownership of a run directory via a lock file; released on
// destruction.
class RunDirLock {
 public:
  explicit RunDirLock(const std::string& dir);
  ~RunDirLock();
  RunDirLock(const RunDirLock&) = delete;
  RunDirLock& operator=(const RunDirLock&) = delete;

 private:
  std::string path_;
};

// manifest.json: resolved config echo, artifact hashes, timings, versions.
void write_manifest(const std::string& out_dir, const ExperimentConfig& config,
                    const ResultTable& table,
                    const std::vector<std::pair<std::string, std::string>>&
                        artifact_hashes);

}  // namespace risloc::harness
