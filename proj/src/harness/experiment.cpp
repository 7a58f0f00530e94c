#include "risloc/harness/experiment.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "../parallel.hpp"
#include "risloc/baselines/crlb.hpp"
#include "risloc/baselines/static_dnn.hpp"
#include "risloc/checkpoint.hpp"
#include "risloc/errors.hpp"
#include "risloc/train.hpp"

namespace risloc::harness {

namespace fs = std::filesystem;

namespace {

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void require_artifact(const ExperimentConfig& config, const std::string& key,
                      std::string& out_path) {
  const auto it = config.artifacts.find(key);
  if (it == config.artifacts.end())
    throw ConfigError("experiment: no artifact configured for '" + key + "'");
  if (!fs::exists(it->second))
    throw ConfigError("experiment: missing checkpoint '" + it->second +
                      "' for '" + key + "'");
  out_path = it->second;
}

}  // namespace

std::string ResultTable::to_csv() const {
  std::ostringstream out;
  out << "method,snr_db,frames,episodes,mse_m2,rmse_m,median_m\n";
  for (const auto& r : rows) {
    out << r.method << ',' << format_double(r.snr_db) << ',' << r.frames << ','
        << r.episodes << ',' << format_double(r.mse) << ','
        << format_double(r.rmse) << ',' << format_double(r.median_err) << '\n';
  }
  return out.str();
}

void ResultTable::save_csv(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("results: cannot write '" + path + "'");
  out << to_csv();
}

ResultTable ResultTable::from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("results: cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw ConfigError("results: empty file '" + path + "'");
  ResultTable table;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    ResultRow row;
    std::getline(ss, row.method, ',');
    std::getline(ss, field, ',');
    row.snr_db = std::stod(field);
    std::getline(ss, field, ',');
    row.frames = std::stoi(field);
    std::getline(ss, field, ',');
    row.episodes = std::stoi(field);
    std::getline(ss, field, ',');
    row.mse = std::stod(field);
    std::getline(ss, field, ',');
    row.rmse = std::stod(field);
    std::getline(ss, field, ',');
    row.median_err = std::stod(field);
    table.rows.push_back(std::move(row));
  }
  return table;
}

ResultRow summarize(const std::string& method, double snr_db, int frames,
                    const MethodEvaluation& ev) {
  ResultRow row;
  row.method = method;
  row.snr_db = snr_db;
  row.frames = frames;
  row.episodes = static_cast<int>(ev.err_sq.size());
  row.mse = ev.err_sq.mean();
  row.rmse = std::sqrt(row.mse);
  std::vector<double> errs(static_cast<std::size_t>(ev.err_sq.size()));
  for (Eigen::Index i = 0; i < ev.err_sq.size(); ++i)
    errs[static_cast<std::size_t>(i)] = std::sqrt(ev.err_sq[i]);
  row.median_err = policy::median(std::move(errs));
  row.wall_seconds = ev.wall_seconds;
  if (!std::isfinite(row.mse) || !std::isfinite(row.median_err))
    throw NumericError("experiment: non-finite metrics for method '" + method +
                       "'");
  return row;
}

namespace {

MethodEvaluation evaluate_active(const ExperimentConfig& config, double snr_db) {
  std::string path;
  require_artifact(config, "active", path);
  const policy::LoadedPolicy loaded =
      policy::load_policy_checkpoint(path, config.scene);
  if (loaded.policy.dims.mode != config.feature_mode)
    throw ConfigError("experiment: checkpoint feature mode " +
                      std::string(policy::to_string(loaded.policy.dims.mode)) +
                      " does not match config");
  const policy::PolicyEvaluation ev = policy::evaluate_policy(
      config.scene, loaded.policy, config.frames, snr_to_power(snr_db),
      config.eval_episodes, config.eval_seed, config.training.workers);
  MethodEvaluation out;
  out.err_sq = ev.frame_err_sq.row(config.frames - 1).transpose();
  out.max_theta_deviation = ev.max_theta_deviation;
  return out;
}

MethodEvaluation evaluate_static(const ExperimentConfig& config,
                                 const std::string& method, double snr_db) {
  std::string path;
  require_artifact(config, method, path);
  const baselines::StaticDnnModel model =
      baselines::load_static_dnn_checkpoint(path, config.scene);
  if (model.mode != config.feature_mode)
    throw ConfigError("experiment: checkpoint feature mode does not match");
  if (model.frames != config.frames)
    throw ConfigError("experiment: static design has " +
                      std::to_string(model.frames) + " frames, config wants " +
                      std::to_string(config.frames));
  const baselines::StaticDnnEvaluation ev = baselines::evaluate_static_dnn(
      config.scene, model, snr_to_power(snr_db), config.eval_episodes,
      config.eval_seed, config.training.workers);
  MethodEvaluation out;
  out.err_sq = ev.err_sq;
  out.max_theta_deviation = ev.max_theta_deviation;
  return out;
}

MethodEvaluation evaluate_wknn(const ExperimentConfig& config, double snr_db) {
  baselines::FingerprintDB db;
  const auto it = config.artifacts.find("fingerprint_db");
  PilotParams pilot;
  pilot.power = snr_to_power(snr_db);
  pilot.frames = config.frames;
  if (it != config.artifacts.end() && fs::exists(it->second)) {
    db = baselines::FingerprintDB::load(it->second);
    if (db.frames != config.frames)
      throw ConfigError("experiment: fingerprint DB frame count mismatch");
  } else if (it != config.artifacts.end()) {
    throw ConfigError("experiment: missing fingerprint DB '" + it->second +
                      "'");
  } else {
    db = baselines::build_fingerprints(
        config.scene, pilot,
        baselines::random_theta_sequence(config.frames,
                                         config.scene.num_elements(),
                                         config.wknn.db_seed),
        config.wknn.realizations_per_block, config.wknn.db_seed,
        config.training.workers);
  }

  double max_dev = 0.0;
  for (const auto& theta : db.thetas)
    for (Eigen::Index i = 0; i < theta.size(); ++i)
      max_dev = std::max(max_dev, std::abs(std::abs(theta[i]) - 1.0));

  MethodEvaluation out;
  out.err_sq.resize(config.eval_episodes);
  detail::parallel_chunks(
      config.eval_episodes, detail::resolve_workers(config.training.workers),
      [&](int e) {
        const auto index = static_cast<std::uint64_t>(e);
        Rng pos_rng(config.eval_seed, index, StreamRole::kUePosition);
        const Eigen::Vector3d ue = sample_ue_position(config.scene, pos_rng);
        const ChannelRealization ch =
            sample_channel(config.scene, ue, {config.eval_seed, index});
        Rng noise_rng(config.eval_seed, index, StreamRole::kNoise);
        Eigen::VectorXd rss(config.frames);
        for (int t = 0; t < config.frames; ++t) {
          const std::complex<double> y =
              measure(ch, db.thetas[static_cast<std::size_t>(t)], pilot,
                      config.scene.noise_power, noise_rng);
          rss[t] = std::norm(y);
        }
        const Eigen::Vector3d est =
            baselines::wknn_localize(db, rss, config.wknn.k);
        out.err_sq[e] = (est - ue).squaredNorm();
      });
  out.max_theta_deviation = max_dev;
  return out;
}

MethodEvaluation evaluate_crlb(const ExperimentConfig& config, double snr_db) {
  PilotParams pilot;
  pilot.power = snr_to_power(snr_db);
  pilot.frames = config.frames;
  MethodEvaluation out;
  out.err_sq.resize(config.eval_episodes);
  std::vector<double> devs(static_cast<std::size_t>(config.eval_episodes), 0.0);
  detail::parallel_chunks(
      config.eval_episodes, detail::resolve_workers(config.training.workers),
      [&](int e) {
        const auto index = static_cast<std::uint64_t>(e);
        Rng pos_rng(config.eval_seed, index, StreamRole::kUePosition);
        const Eigen::Vector3d ue = sample_ue_position(config.scene, pos_rng);
        const ChannelRealization ch =
            sample_channel(config.scene, ue, {config.eval_seed, index});
        const baselines::CrlbEpisode ep = baselines::crlb_active_episode(
            config.scene, ch, pilot, config.crlb_gd, config.crlb_map,
            config.eval_seed, index);
        out.err_sq[e] = (ep.final_estimate() - ue).squaredNorm();
        double dev = 0.0;
        for (const auto& theta : ep.thetas)
          for (Eigen::Index i = 0; i < theta.size(); ++i)
            dev = std::max(dev, std::abs(std::abs(theta[i]) - 1.0));
        devs[static_cast<std::size_t>(e)] = dev;
      });
  out.max_theta_deviation = 0.0;
  for (double d : devs)
    out.max_theta_deviation = std::max(out.max_theta_deviation, d);
  return out;
}

}  // namespace

MethodEvaluation evaluate_method(const ExperimentConfig& config,
                                 const std::string& method, double snr_db) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  MethodEvaluation ev;
  if (method == "active")
    ev = evaluate_active(config, snr_db);
  else if (method == "static-random" || method == "static-learned")
    ev = evaluate_static(config, method, snr_db);
  else if (method == "wknn")
    ev = evaluate_wknn(config, snr_db);
  else if (method == "crlb-gd")
    ev = evaluate_crlb(config, snr_db);
  else
    throw ConfigError("experiment: unknown method '" + method + "'");
  ev.wall_seconds = std::chrono::duration<double>(clock::now() - t0).count();
  return ev;
}

ResultTable run_experiment(const ExperimentConfig& config) {
  config.validate();
  ResultTable table;
  for (const auto& method : config.methods)
    for (double snr : config.snr_db)
      table.rows.push_back(summarize(
          method, snr, config.frames, evaluate_method(config, method, snr)));
  return table;
}

ResultTable sweep_frames(const ExperimentConfig& config,
                         const std::string& checkpoint_path) {
  if (!fs::exists(checkpoint_path))
    throw ConfigError("sweep: missing checkpoint '" + checkpoint_path + "'");
  const policy::LoadedPolicy loaded =
      policy::load_policy_checkpoint(checkpoint_path, config.scene);
  const double snr = config.snr_db.front();
  const policy::PolicyEvaluation ev = policy::evaluate_policy(
      config.scene, loaded.policy, config.frames, snr_to_power(snr),
      config.eval_episodes, config.eval_seed, config.training.workers);

  ResultTable table;
  for (int t = 0; t < config.frames; ++t) {
    MethodEvaluation row_ev;
    row_ev.err_sq = ev.frame_err_sq.row(t).transpose();
    row_ev.max_theta_deviation = ev.max_theta_deviation;
    table.rows.push_back(summarize("active", snr, t + 1, row_ev));
  }
  return table;
}

Eigen::MatrixXd radiomap_frame(const Scene& scene,
                               const baselines::GridSpec& grid,
                               const Eigen::VectorXcd& theta, double power) {
  Eigen::MatrixXd rss(grid.nx, grid.ny);
  const double sqrt_p = std::sqrt(power);
  for (int ix = 0; ix < grid.nx; ++ix) {
    for (int iy = 0; iy < grid.ny; ++iy) {
      const Eigen::Vector3d cell = grid.center(ix * grid.ny + iy);
      const LosChannel los = los_channel(scene, cell);
      const std::complex<double> mean =
          sqrt_p * (los.h_d + los.v_r.cwiseProduct(theta).sum());
      rss(ix, iy) = std::norm(mean);
    }
  }
  return rss;
}

double focusing_fraction(const Eigen::MatrixXd& rss, int ue_cell_ix,
                         int ue_cell_iy) {
  const double ue_rss = rss(ue_cell_ix, ue_cell_iy);
  const auto brighter = (rss.array() > ue_rss).count();
  return static_cast<double>(brighter) / static_cast<double>(rss.size());
}

RadioMapResult export_radiomap(const ExperimentConfig& config,
                               const policy::Policy& trained, double snr_db,
                               std::uint64_t episode,
                               const std::string& out_dir) {
  fs::create_directories(out_dir);
  const Scene& scene = config.scene;
  const baselines::GridSpec grid =
      baselines::GridSpec::from_region(scene.ue_region);

  Rng pos_rng(config.eval_seed, episode, StreamRole::kUePosition);
  const Eigen::Vector3d ue = sample_ue_position(scene, pos_rng);
  const ChannelRealization ch =
      sample_channel(scene, ue, {config.eval_seed, episode});
  PilotParams pilot;
  pilot.power = snr_to_power(snr_db);
  pilot.frames = config.frames;
  Rng noise_rng(config.eval_seed, episode, StreamRole::kNoise);
  const policy::EpisodeTrace trace = policy::run_episode(
      scene, ch, pilot, trained, scene.noise_power, noise_rng);

  const int ue_cell = grid.index_of_nearest(ue);
  const int ue_ix = ue_cell / grid.ny;
  const int ue_iy = ue_cell % grid.ny;

  RadioMapResult result;
  result.ue_position = ue;
  result.ue_cell = ue_cell;
  for (int t = 0; t < config.frames; ++t) {
    const Eigen::MatrixXd rss =
        radiomap_frame(scene, grid, trace.theta[static_cast<std::size_t>(t)],
                       pilot.power);
    result.q.push_back(focusing_fraction(rss, ue_ix, ue_iy));
    char name[64];
    std::snprintf(name, sizeof(name), "radiomap_frame_%02d.txt", t + 1);
    const std::string path = out_dir + "/" + name;
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ConfigError("radiomap: cannot write '" + path + "'");
    for (int ix = 0; ix < grid.nx; ++ix) {
      for (int iy = 0; iy < grid.ny; ++iy) {
        if (iy) out << ' ';
        out << format_double(rss(ix, iy));
      }
      out << '\n';
    }
    result.frame_files.push_back(path);
  }

  nlohmann::json meta;
  meta["grid"] = {{"x0", grid.x0}, {"y0", grid.y0},   {"z", grid.z},
                  {"nx", grid.nx}, {"ny", grid.ny},   {"pitch", grid.pitch}};
  meta["ue_position"] = {ue[0], ue[1], ue[2]};
  meta["ue_cell"] = ue_cell;
  meta["snr_db"] = snr_db;
  meta["frames"] = config.frames;
  meta["episode"] = episode;
  meta["q"] = result.q;
  meta["frame_files"] = result.frame_files;
  result.meta_file = out_dir + "/radiomap_meta.json";
  std::ofstream meta_out(result.meta_file, std::ios::binary);
  if (!meta_out)
    throw ConfigError("radiomap: cannot write '" + result.meta_file + "'");
  meta_out << meta.dump(2) << "\n";
  return result;
}

RunDirLock::RunDirLock(const std::string& dir) {
  fs::create_directories(dir);
  path_ = dir + "/.lock";
  const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0)
    throw ConfigError("run directory '" + dir +
                      "' is locked by another process (remove " + path_ +
                      " if stale)");
  ::close(fd);
}

RunDirLock::~RunDirLock() { ::unlink(path_.c_str()); }

void write_manifest(const std::string& out_dir, const ExperimentConfig& config,
                    const ResultTable& table,
                    const std::vector<std::pair<std::string, std::string>>&
                        artifact_hashes) {
  nlohmann::json j;
  j["tool"] = "risloc";
  j["version"] = "0.1.0";
  j["config"] = config.to_json();
  nlohmann::json hashes = nlohmann::json::object();
  for (const auto& [name, hash] : artifact_hashes) hashes[name] = hash;
  j["artifact_hashes"] = hashes;
  nlohmann::json timings = nlohmann::json::array();
  for (const auto& row : table.rows)
    timings.push_back({{"method", row.method},
                       {"snr_db", row.snr_db},
                       {"frames", row.frames},
                       {"wall_seconds", row.wall_seconds}});
  j["timings"] = timings;
  const std::string path = out_dir + "/manifest.json";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("manifest: cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

}  // namespace risloc::harness
