#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "risloc/baselines/crlb.hpp"
#include "risloc/geometry.hpp"
#include "risloc/train.hpp"

namespace risloc::harness {

inline const std::vector<std::string> kMethods = {
    "active", "static-random", "static-learned", "wknn", "crlb-gd"};

struct WknnSection {
  int k = 5;
  int realizations_per_block = 10;
  std::uint64_t db_seed = 7;
};

struct PolicySection {
  int hidden = 512;
  int head_width = 1024;
  int head_layers = 4;
};

// Fully resolved experiment description. Loading applies defaults; saving
// echoes every field so a config round-trips exactly.
struct ExperimentConfig {
  Scene scene;
  int frames = 4;
  std::vector<double> snr_db = {20.0};
  std::vector<std::string> methods = {"active"};
  policy::FeatureMode feature_mode = policy::FeatureMode::kPilot;
  policy::TrainConfig training;  // snr_db/seed filled from this config
  std::uint64_t train_seed = 1;
  std::uint64_t eval_seed = 1000;
  int eval_episodes = 1000;
  std::map<std::string, std::string> artifacts;  // method or "fingerprint_db"
  WknnSection wknn;
  baselines::GdConfig crlb_gd;
  baselines::MapConfig crlb_map;
  PolicySection policy_net;
  std::string output_dir = "runs/out";

  void validate() const;
  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load(const std::string& path);
  void save(const std::string& path) const;

  policy::PolicyDims policy_dims() const;
  policy::TrainConfig train_config(double snr) const;
};

}  // namespace risloc::harness
