#include "risloc/harness/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "risloc/errors.hpp"

namespace risloc::harness {

using nlohmann::json;

void ExperimentConfig::validate() const {
  scene.validate();
  if (frames < 1) throw ConfigError("config: frames must be >= 1");
  if (snr_db.empty()) throw ConfigError("config: snr_db list must be non-empty");
  if (methods.empty()) throw ConfigError("config: method list must be non-empty");
  for (const auto& m : methods)
    if (std::find(kMethods.begin(), kMethods.end(), m) == kMethods.end())
      throw ConfigError("config: unknown method '" + m + "'");
  if (eval_episodes < 1)
    throw ConfigError("config: eval_episodes must be >= 1");
  if (wknn.k < 1) throw ConfigError("config: wknn.k must be >= 1");
  if (wknn.realizations_per_block < 1)
    throw ConfigError("config: wknn.realizations_per_block must be >= 1");
}

json ExperimentConfig::to_json() const {
  json j;
  j["scene"] = json::parse(scene.to_json());
  j["frames"] = frames;
  j["snr_db"] = snr_db;
  j["method"] = methods;
  j["feature_mode"] = policy::to_string(feature_mode);
  j["seeds"] = {{"train", train_seed}, {"eval", eval_seed}};
  j["eval_episodes"] = eval_episodes;
  j["training"] = {{"samples", training.samples},
                   {"batch", training.batch},
                   {"lr", training.lr},
                   {"loss", policy::to_string(training.loss)},
                   {"epoch_steps", training.epoch_steps},
                   {"patience", training.patience},
                   {"val_episodes", training.val_episodes},
                   {"warmup_samples", training.warmup_samples},
                   {"clip_norm", training.clip_norm},
                   {"workers", training.workers},
                   {"chunk", training.chunk}};
  j["wknn"] = {{"k", wknn.k},
               {"realizations_per_block", wknn.realizations_per_block},
               {"db_seed", wknn.db_seed}};
  j["crlb"] = {{"iterations", crlb_gd.iterations},
               {"step", crlb_gd.step},
               {"restarts", crlb_gd.restarts},
               {"map_grid_pitch", crlb_map.grid_pitch},
               {"map_refine_steps", crlb_map.refine_steps}};
  j["policy"] = {{"hidden", policy_net.hidden},
                 {"head_width", policy_net.head_width},
                 {"head_layers", policy_net.head_layers}};
  j["artifacts"] = artifacts;
  j["output_dir"] = output_dir;
  return j;
}

namespace {

const json& require_key(const json& j, const char* key) {
  if (!j.contains(key))
    throw ConfigError(std::string("config: missing required key '") + key + "'");
  return j.at(key);
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  c.scene = Scene::from_json(require_key(j, "scene").dump());
  c.frames = require_key(j, "frames").get<int>();
  c.snr_db = require_key(j, "snr_db").get<std::vector<double>>();
  const json& method = require_key(j, "method");
  if (method.is_string())
    c.methods = {method.get<std::string>()};
  else
    c.methods = method.get<std::vector<std::string>>();
  c.feature_mode = policy::feature_mode_from_string(
      require_key(j, "feature_mode").get<std::string>());
  const json& seeds = require_key(j, "seeds");
  c.train_seed = require_key(seeds, "train").get<std::uint64_t>();
  c.eval_seed = require_key(seeds, "eval").get<std::uint64_t>();

  if (j.contains("eval_episodes")) c.eval_episodes = j.at("eval_episodes").get<int>();
  if (j.contains("training")) {
    const json& t = j.at("training");
    auto& tc = c.training;
    if (t.contains("samples")) tc.samples = t.at("samples").get<std::int64_t>();
    if (t.contains("batch")) tc.batch = t.at("batch").get<int>();
    if (t.contains("lr")) tc.lr = t.at("lr").get<double>();
    if (t.contains("loss"))
      tc.loss = policy::loss_kind_from_string(t.at("loss").get<std::string>());
    if (t.contains("epoch_steps")) tc.epoch_steps = t.at("epoch_steps").get<int>();
    if (t.contains("patience")) tc.patience = t.at("patience").get<int>();
    if (t.contains("val_episodes"))
      tc.val_episodes = t.at("val_episodes").get<int>();
    if (t.contains("warmup_samples"))
      tc.warmup_samples = t.at("warmup_samples").get<std::int64_t>();
    if (t.contains("clip_norm")) tc.clip_norm = t.at("clip_norm").get<double>();
    if (t.contains("workers")) tc.workers = t.at("workers").get<int>();
    if (t.contains("chunk")) tc.chunk = t.at("chunk").get<int>();
  }
  if (j.contains("wknn")) {
    const json& w = j.at("wknn");
    if (w.contains("k")) c.wknn.k = w.at("k").get<int>();
    if (w.contains("realizations_per_block"))
      c.wknn.realizations_per_block = w.at("realizations_per_block").get<int>();
    if (w.contains("db_seed")) c.wknn.db_seed = w.at("db_seed").get<std::uint64_t>();
  }
  if (j.contains("crlb")) {
    const json& g = j.at("crlb");
    if (g.contains("iterations")) c.crlb_gd.iterations = g.at("iterations").get<int>();
    if (g.contains("step")) c.crlb_gd.step = g.at("step").get<double>();
    if (g.contains("restarts")) c.crlb_gd.restarts = g.at("restarts").get<int>();
    if (g.contains("map_grid_pitch"))
      c.crlb_map.grid_pitch = g.at("map_grid_pitch").get<double>();
    if (g.contains("map_refine_steps"))
      c.crlb_map.refine_steps = g.at("map_refine_steps").get<int>();
  }
  if (j.contains("policy")) {
    const json& p = j.at("policy");
    if (p.contains("hidden")) c.policy_net.hidden = p.at("hidden").get<int>();
    if (p.contains("head_width"))
      c.policy_net.head_width = p.at("head_width").get<int>();
    if (p.contains("head_layers"))
      c.policy_net.head_layers = p.at("head_layers").get<int>();
  }
  if (j.contains("artifacts"))
    c.artifacts = j.at("artifacts").get<std::map<std::string, std::string>>();
  if (j.contains("output_dir")) c.output_dir = j.at("output_dir").get<std::string>();
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config: invalid JSON: ") + e.what());
  }
  return from_json(j);
}

void ExperimentConfig::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("config: cannot write '" + path + "'");
  out << to_json().dump(2) << "\n";
}

policy::PolicyDims ExperimentConfig::policy_dims() const {
  policy::PolicyDims dims;
  dims.n = scene.num_elements();
  dims.hidden = policy_net.hidden;
  dims.head_width = policy_net.head_width;
  dims.head_layers = policy_net.head_layers;
  dims.mode = feature_mode;
  return dims;
}

policy::TrainConfig ExperimentConfig::train_config(double snr) const {
  policy::TrainConfig tc = training;
  tc.snr_db = snr;
  tc.seed = train_seed;
  return tc;
}

}  // namespace risloc::harness
