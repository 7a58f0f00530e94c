// Command-line front end: train models, build baseline artifacts, evaluate
// methods, sweep pilot lengths, export radio maps, and self-check gradients.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "risloc/baselines/static_dnn.hpp"
#include "risloc/checkpoint.hpp"
#include "risloc/errors.hpp"
#include "risloc/graph_suite.hpp"
#include "risloc/harness/experiment.hpp"
#include "risloc/train.hpp"

namespace fs = std::filesystem;
using risloc::harness::ExperimentConfig;

namespace {

void write_train_log(const std::string& path,
                     const std::vector<risloc::policy::TrainLogRow>& log) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw risloc::ConfigError("cannot write '" + path + "'");
  out << "epoch,step,samples,lr,train_loss,val_mse,seconds\n";
  char buf[256];
  for (const auto& r : log) {
    std::snprintf(buf, sizeof(buf), "%d,%lld,%lld,%.17g,%.17g,%.17g,%.3f\n",
                  r.epoch, static_cast<long long>(r.step),
                  static_cast<long long>(r.samples_seen), r.lr, r.train_loss,
                  r.val_mse, r.seconds);
    out << buf;
  }
}

ExperimentConfig load_config_with_overrides(
    const std::string& path, std::optional<std::uint64_t> train_seed,
    std::optional<std::uint64_t> eval_seed,
    const std::string& output_dir_override) {
  ExperimentConfig config = ExperimentConfig::load(path);
  if (train_seed) config.train_seed = *train_seed;
  if (eval_seed) config.eval_seed = *eval_seed;
  if (!output_dir_override.empty()) config.output_dir = output_dir_override;
  return config;
}

int cmd_train(const ExperimentConfig& config, const std::string& loss_override) {
  risloc::harness::RunDirLock lock(config.output_dir);
  config.save(config.output_dir + "/config_resolved.json");

  risloc::policy::TrainConfig tc = config.train_config(config.snr_db.front());
  if (!loss_override.empty())
    tc.loss = risloc::policy::loss_kind_from_string(loss_override);
  std::printf("training active policy: N=%d T=%d SNR=%.1f dB, %lld samples\n",
              config.scene.num_elements(), config.frames, tc.snr_db,
              static_cast<long long>(tc.samples));
  const risloc::policy::TrainResult result =
      risloc::policy::train_policy(config.scene, config.frames,
                                   config.policy_dims(), tc);

  const std::string ckpt_path = config.output_dir + "/active.ckpt";
  risloc::policy::save_policy_checkpoint(ckpt_path, result.policy,
                                         config.scene, config.frames, tc.loss,
                                         tc.snr_db, result.steps_run,
                                         &result.opt);
  write_train_log(config.output_dir + "/train_log.csv", result.log);
  std::printf("best validation MSE %.6g m^2 (epoch %d); checkpoint %s\n",
              result.best_val_mse, result.best_epoch, ckpt_path.c_str());
  return 0;
}

int cmd_baseline(const ExperimentConfig& config, const std::string& method) {
  risloc::harness::RunDirLock lock(config.output_dir);
  config.save(config.output_dir + "/config_resolved.json");
  if (method == "static-random" || method == "static-learned") {
    const auto provenance = method == "static-random"
                                ? risloc::baselines::DesignProvenance::kRandom
                                : risloc::baselines::DesignProvenance::kLearned;
    risloc::policy::TrainConfig tc = config.train_config(config.snr_db.front());
    std::printf("training %s estimator (%lld samples)\n", method.c_str(),
                static_cast<long long>(tc.samples));
    const risloc::baselines::StaticDnnResult result =
        risloc::baselines::static_dnn_train(config.scene, config.frames,
                                            config.feature_mode, provenance,
                                            tc);
    const std::string path = config.output_dir + "/" + method + ".ckpt";
    risloc::baselines::save_static_dnn_checkpoint(path, result.model,
                                                  config.scene, tc.snr_db,
                                                  result.steps_run);
    write_train_log(config.output_dir + "/" + method + "_log.csv", result.log);
    std::printf("best validation MSE %.6g m^2; checkpoint %s\n",
                result.best_val_mse, path.c_str());
    return 0;
  }
  if (method == "wknn") {
    risloc::PilotParams pilot;
    pilot.power = risloc::snr_to_power(config.snr_db.front());
    pilot.frames = config.frames;
    const auto thetas = risloc::baselines::random_theta_sequence(
        config.frames, config.scene.num_elements(), config.wknn.db_seed);
    const auto db = risloc::baselines::build_fingerprints(
        config.scene, pilot, thetas, config.wknn.realizations_per_block,
        config.wknn.db_seed, config.training.workers);
    const std::string path = config.output_dir + "/fingerprints.bin";
    db.save(path);
    std::printf("fingerprint database: %d blocks x %d frames (M=%d) -> %s\n",
                db.grid.count(), db.frames, db.realizations_per_block,
                path.c_str());
    return 0;
  }
  if (method == "crlb-gd") {
    std::printf("crlb-gd needs no offline artifact; run `evaluate`.\n");
    return 0;
  }
  throw risloc::ConfigError("baseline: unknown method '" + method + "'");
}

int cmd_evaluate(ExperimentConfig config, const std::string& method_override) {
  if (!method_override.empty()) config.methods = {method_override};
  risloc::harness::RunDirLock lock(config.output_dir);
  config.save(config.output_dir + "/config_resolved.json");

  const risloc::harness::ResultTable table =
      risloc::harness::run_experiment(config);
  const std::string csv_path = config.output_dir + "/results.csv";
  table.save_csv(csv_path);

  std::vector<std::pair<std::string, std::string>> hashes;
  for (const auto& [name, path] : config.artifacts)
    if (fs::exists(path)) hashes.emplace_back(name, risloc::file_hash_hex(path));
  risloc::harness::write_manifest(config.output_dir, config, table, hashes);

  std::printf("%s", table.to_csv().c_str());
  std::printf("results -> %s\n", csv_path.c_str());
  return 0;
}

int cmd_sweep(ExperimentConfig config, const std::string& checkpoint) {
  risloc::harness::RunDirLock lock(config.output_dir);
  config.save(config.output_dir + "/config_resolved.json");
  const risloc::harness::ResultTable table =
      risloc::harness::sweep_frames(config, checkpoint);
  const std::string csv_path = config.output_dir + "/sweep_frames.csv";
  table.save_csv(csv_path);
  std::vector<std::pair<std::string, std::string>> hashes{
      {"checkpoint", risloc::file_hash_hex(checkpoint)}};
  risloc::harness::write_manifest(config.output_dir, config, table, hashes);
  std::printf("%s", table.to_csv().c_str());
  return 0;
}

int cmd_radiomap(const ExperimentConfig& config, const std::string& checkpoint,
                 std::uint64_t episode) {
  const auto loaded =
      risloc::policy::load_policy_checkpoint(checkpoint, config.scene);
  const auto result = risloc::harness::export_radiomap(
      config, loaded.policy, config.snr_db.front(), episode,
      config.output_dir);
  std::printf("radio maps for episode %llu: UE (%.2f, %.2f, %.2f)\n",
              static_cast<unsigned long long>(episode), result.ue_position[0],
              result.ue_position[1], result.ue_position[2]);
  for (std::size_t t = 0; t < result.q.size(); ++t)
    std::printf("  frame %zu: q = %.4f\n", t + 1, result.q[t]);
  return 0;
}

int cmd_grad_check(int graphs, std::uint64_t seed) {
  const risloc::ad::SuiteResult result =
      risloc::ad::run_grad_check_suite(graphs, seed);
  std::printf("checked %d graphs in %.2f s: max relative error %.3e (%s)\n",
              result.graphs, result.seconds, result.max_rel_error,
              result.worst_graph.c_str());
  const bool ok = result.max_rel_error <= 1e-4;
  std::printf("%s\n", ok ? "PASS" : "FAIL");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive RIS localization: simulation, training, baselines"};
  app.require_subcommand(1);

  std::string config_path;
  std::string output_dir;
  std::optional<std::uint64_t> train_seed;
  std::optional<std::uint64_t> eval_seed;

  auto add_common = [&](CLI::App* cmd, bool config_required = true) {
    cmd->add_option("-c,--config", config_path, "experiment config JSON")
        ->required(config_required);
    cmd->add_option("-o,--out", output_dir, "output directory override");
    cmd->add_option("--train-seed", train_seed, "override training seed");
    cmd->add_option("--eval-seed", eval_seed, "override evaluation seed");
  };

  auto* train = app.add_subcommand("train", "train the adaptive policy");
  std::string loss_override;
  add_common(train);
  train->add_option("--loss", loss_override, "loss override: final|average");

  auto* baseline =
      app.add_subcommand("baseline", "build baseline artifacts");
  std::string baseline_method;
  add_common(baseline);
  baseline
      ->add_option("-m,--method", baseline_method,
                   "static-random|static-learned|wknn|crlb-gd")
      ->required();

  auto* evaluate = app.add_subcommand("evaluate", "evaluate configured methods");
  std::string eval_method;
  add_common(evaluate);
  evaluate->add_option("-m,--method", eval_method, "evaluate only this method");

  auto* sweep = app.add_subcommand(
      "sweep-frames", "per-frame accuracy of one trained policy");
  std::string sweep_checkpoint;
  add_common(sweep);
  sweep->add_option("--checkpoint", sweep_checkpoint, "policy checkpoint")
      ->required();

  auto* radiomap = app.add_subcommand("radiomap", "export per-frame RSS maps");
  std::string radiomap_checkpoint;
  std::uint64_t episode = 0;
  add_common(radiomap);
  radiomap->add_option("--checkpoint", radiomap_checkpoint, "policy checkpoint")
      ->required();
  radiomap->add_option("--episode", episode, "episode index to replay");

  auto* gradcheck =
      app.add_subcommand("grad-check", "finite-difference autodiff check");
  int graphs = 48;
  std::uint64_t gc_seed = 20240101;
  gradcheck->add_option("--graphs", graphs, "number of random graphs");
  gradcheck->add_option("--seed", gc_seed, "generator seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (gradcheck->parsed()) return cmd_grad_check(graphs, gc_seed);
    const ExperimentConfig config = load_config_with_overrides(
        config_path, train_seed, eval_seed, output_dir);
    if (train->parsed()) return cmd_train(config, loss_override);
    if (baseline->parsed()) return cmd_baseline(config, baseline_method);
    if (evaluate->parsed()) return cmd_evaluate(config, eval_method);
    if (sweep->parsed()) return cmd_sweep(config, sweep_checkpoint);
    if (radiomap->parsed())
      return cmd_radiomap(config, radiomap_checkpoint, episode);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
