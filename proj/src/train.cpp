#include "risloc/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "parallel.hpp"
#include "risloc/checkpoint.hpp"
#include "risloc/errors.hpp"

namespace risloc::policy {

using detail::parallel_chunks;
using detail::resolve_workers;

namespace {

struct ChunkSpec {
  std::uint64_t first_index;
  int batch;
};

std::vector<ChunkSpec> split_batch(std::uint64_t base, int batch, int chunk) {
  std::vector<ChunkSpec> out;
  for (int off = 0; off < batch; off += chunk)
    out.push_back({base + static_cast<std::uint64_t>(off),
                   std::min(chunk, batch - off)});
  return out;
}

}  // namespace

double median(std::vector<double> values) {
  if (values.empty()) throw DimensionError("median: empty input");
  const std::size_t mid = values.size() / 2;
  std::nth_element(values.begin(), values.begin() + mid, values.end());
  double hi = values[mid];
  if (values.size() % 2 == 1) return hi;
  std::nth_element(values.begin(), values.begin() + mid - 1,
                   values.begin() + mid);
  return 0.5 * (hi + values[mid - 1]);
}

double lr_schedule(double base_lr, std::int64_t step, std::int64_t total_steps) {
  if (total_steps <= 0) return base_lr;
  const auto third = static_cast<std::int64_t>(3 * step / total_steps);
  return base_lr * std::pow(0.5, static_cast<double>(std::min<std::int64_t>(third, 2)));
}

FeatureScaler estimate_feature_scaler(const Scene& scene, int frames,
                                      double power, FeatureMode mode,
                                      std::int64_t samples, std::uint64_t seed) {
  const int dim = feature_dim(mode);
  const int n = scene.num_elements();
  const double sigma = std::sqrt(scene.noise_power);
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(dim);
  std::int64_t count = 0;

  PilotParams pilot;
  pilot.power = power;
  pilot.frames = frames;
  for (std::int64_t i = 0; i < samples; ++i) {
    const auto index = static_cast<std::uint64_t>(i);
    Rng pos_rng(seed, index, StreamRole::kUePosition);
    const Eigen::Vector3d ue = sample_ue_position(scene, pos_rng);
    const ChannelRealization ch = sample_channel(scene, ue, {seed, index});
    Rng theta_rng(seed, index, StreamRole::kWarmupTheta);
    Rng noise_rng(seed, index, StreamRole::kNoise);
    for (int t = 0; t < frames; ++t) {
      Eigen::VectorXcd theta(n);
      for (int k = 0; k < n; ++k)
        theta[k] = std::polar(1.0, theta_rng.uniform(0.0, 2.0 * M_PI));
      const std::complex<double> y =
          measure(ch, theta, pilot, scene.noise_power, noise_rng);
      Eigen::VectorXd f(dim);
      if (mode == FeatureMode::kRss)
        f[0] = std::norm(y);
      else
        f << y.real(), y.imag();
      sum += f;
      sum_sq += f.cwiseProduct(f);
      ++count;
    }
  }
  (void)sigma;
  const Eigen::VectorXd mean = sum / static_cast<double>(count);
  const Eigen::VectorXd var =
      (sum_sq / static_cast<double>(count) - mean.cwiseProduct(mean))
          .cwiseMax(1e-30);
  FeatureScaler sc;
  sc.shift = -mean;
  sc.gain = var.cwiseSqrt().cwiseInverse();
  return sc;
}

namespace {

struct ChunkResult {
  GradSet grads;
  double loss_sum = 0.0;
  double max_theta_dev = 0.0;
};

ChunkResult run_train_chunk(const Scene& scene, const PilotParams& pilot,
                            const Policy& policy, LossKind loss_kind,
                            std::uint64_t seed, const ChunkSpec& spec,
                            int frames) {
  ad::Tape tape;
  const EpisodeBatch data = make_episode_batch(scene, pilot, seed,
                                               spec.first_index, spec.batch,
                                               frames);
  std::vector<ad::Var> leaves = make_leaves(tape, policy.params);
  const PolicyGraph graph =
      build_policy_graph(tape, leaves, policy.dims, policy.scaler, data);
  ad::Var loss = episode_loss_sum(tape, graph, data, loss_kind);
  if (!tape.all_finite(loss))
    throw NumericError("training diverged: non-finite loss at sample " +
                       std::to_string(spec.first_index));
  tape.backward(loss);

  ChunkResult res;
  res.loss_sum = loss.value()(0, 0);
  res.grads.reserve(leaves.size());
  for (const ad::Var& leaf : leaves) res.grads.push_back(tape.grad(leaf));
  return res;
}

double eval_chunk_into(const Scene& scene, const Policy& policy, int frames,
                       double power, std::uint64_t seed, const ChunkSpec& spec,
                       Eigen::MatrixXd& frame_err_sq, std::uint64_t col0) {
  PilotParams pilot;
  pilot.power = power;
  pilot.frames = frames;
  ad::Tape tape;
  const EpisodeBatch data = make_episode_batch(scene, pilot, seed,
                                               spec.first_index, spec.batch,
                                               frames);
  std::vector<ad::Var> leaves = make_leaves(tape, policy.params);
  const PolicyGraph graph =
      build_policy_graph(tape, leaves, policy.dims, policy.scaler, data);

  double max_dev = 0.0;
  for (int t = 0; t < frames; ++t) {
    const Eigen::MatrixXd& re = graph.theta_re[t].value();
    const Eigen::MatrixXd& im = graph.theta_im[t].value();
    const Eigen::ArrayXXd mags =
        (re.array().square() + im.array().square()).sqrt();
    max_dev = std::max(max_dev, (mags - 1.0).abs().maxCoeff());
    const Eigen::MatrixXd diff = graph.p_hat[t].value() - data.true_pos;
    frame_err_sq.row(t).segment(static_cast<Eigen::Index>(col0),
                                spec.batch) =
        diff.colwise().squaredNorm();
  }
  return max_dev;
}

}  // namespace

PolicyEvaluation evaluate_policy(const Scene& scene, const Policy& policy,
                                 int frames, double power, int episodes,
                                 std::uint64_t seed, int workers, int chunk) {
  PolicyEvaluation out;
  out.frame_err_sq.resize(frames, episodes);
  const std::vector<ChunkSpec> chunks = split_batch(0, episodes, chunk);
  std::vector<double> devs(chunks.size(), 0.0);
  parallel_chunks(static_cast<int>(chunks.size()), resolve_workers(workers),
                  [&](int k) {
                    devs[static_cast<std::size_t>(k)] = eval_chunk_into(
                        scene, policy, frames, power, seed, chunks[k],
                        out.frame_err_sq, chunks[k].first_index);
                  });
  out.max_theta_deviation = 0.0;
  for (double d : devs) out.max_theta_deviation = std::max(out.max_theta_deviation, d);
  return out;
}

double PolicyEvaluation::mse(int frame) const {
  return frame_err_sq.row(frame).mean();
}

double PolicyEvaluation::median_error(int frame) const {
  std::vector<double> errs(static_cast<std::size_t>(frame_err_sq.cols()));
  for (Eigen::Index e = 0; e < frame_err_sq.cols(); ++e)
    errs[static_cast<std::size_t>(e)] = std::sqrt(frame_err_sq(frame, e));
  return median(std::move(errs));
}

TrainResult train_policy(const Scene& scene, int frames, PolicyDims dims,
                         const TrainConfig& config) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  if (config.val_episodes < 1)
    throw ConfigError("train: val_episodes must be >= 1");
  if (config.batch < 1 || config.chunk < 1)
    throw ConfigError("train: batch and chunk must be >= 1");
  const double power = snr_to_power(config.snr_db);
  const int workers = resolve_workers(config.workers);

  Policy policy = Policy::init(dims, config.seed);
  if (config.warmup_samples > 0)
    policy.scaler = estimate_feature_scaler(
        scene, frames, power, dims.mode, config.warmup_samples,
        detail::splitmix64(config.seed ^ 0x7761726d75ull));

  PilotParams pilot;
  pilot.power = power;
  pilot.frames = frames;

  const std::int64_t total_steps = config.samples / config.batch;
  const std::uint64_t val_seed = detail::splitmix64(config.seed ^ 0x76616cull);

  AdamState opt = AdamState::init(policy.params, config.lr);
  TrainResult result;
  result.policy = policy;
  result.best_val_mse = std::numeric_limits<double>::infinity();
  result.best_epoch = -1;

  auto validate = [&]() {
    const PolicyEvaluation ev =
        evaluate_policy(scene, policy, frames, power, config.val_episodes,
                        val_seed, workers, config.chunk);
    return ev.final_mse();
  };

  // Epoch 0 row: untrained baseline so logs always show the starting point.
  {
    TrainLogRow row;
    row.epoch = 0;
    row.step = 0;
    row.samples_seen = 0;
    row.lr = config.lr;
    row.train_loss = std::numeric_limits<double>::quiet_NaN();
    row.val_mse = validate();
    row.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    result.log.push_back(row);
    if (row.val_mse < result.best_val_mse) {
      result.best_val_mse = row.val_mse;
      result.best_epoch = 0;
      result.policy = policy;
    }
  }

  int epochs_since_best = 0;
  double epoch_loss_sum = 0.0;
  std::int64_t epoch_loss_count = 0;

  for (std::int64_t step = 0; step < total_steps; ++step) {
    const double lr_now = lr_schedule(config.lr, step, total_steps);
    const std::uint64_t base =
        static_cast<std::uint64_t>(step) * static_cast<std::uint64_t>(config.batch);
    const std::vector<ChunkSpec> chunks =
        split_batch(base, config.batch, config.chunk);
    std::vector<ChunkResult> results(chunks.size());
    parallel_chunks(static_cast<int>(chunks.size()), workers, [&](int k) {
      results[static_cast<std::size_t>(k)] = run_train_chunk(
          scene, pilot, policy, config.loss, config.seed, chunks[k], frames);
    });

    GradSet grads = zero_grads_like(policy.params);
    double loss_sum = 0.0;
    for (const ChunkResult& r : results) {
      accumulate(grads, r.grads);
      loss_sum += r.loss_sum;
    }
    const double inv_batch = 1.0 / static_cast<double>(config.batch);
    for (auto& g : grads) g *= inv_batch;
    const double train_loss = loss_sum * inv_batch;
    if (!std::isfinite(train_loss))
      throw NumericError("training diverged: non-finite batch loss at step " +
                         std::to_string(step));
    epoch_loss_sum += train_loss;
    epoch_loss_count += 1;

    clip_global_norm(grads, config.clip_norm);
    adam_step(policy.params, grads, opt, lr_now);

    const bool epoch_end = ((step + 1) % config.epoch_steps == 0) ||
                           (step + 1 == total_steps);
    if (!epoch_end) continue;

    TrainLogRow row;
    row.epoch = static_cast<int>(result.log.size());
    row.step = step + 1;
    row.samples_seen = (step + 1) * config.batch;
    row.lr = lr_now;
    row.train_loss = epoch_loss_sum / static_cast<double>(epoch_loss_count);
    row.val_mse = validate();
    row.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    result.log.push_back(row);
    epoch_loss_sum = 0.0;
    epoch_loss_count = 0;

    if (row.val_mse < result.best_val_mse) {
      result.best_val_mse = row.val_mse;
      result.best_epoch = row.epoch;
      result.policy = policy;
      epochs_since_best = 0;
    } else {
      epochs_since_best += 1;
      if (config.patience > 0 && epochs_since_best >= config.patience) {
        result.steps_run = step + 1;
        result.opt = std::move(opt);
        return result;
      }
    }
    result.steps_run = step + 1;
  }
  result.opt = std::move(opt);
  return result;
}

void save_policy_checkpoint(const std::string& path, const Policy& policy,
                            const Scene& scene, int frames, LossKind loss,
                            double snr_db, std::int64_t global_step,
                            const AdamState* opt) {
  Checkpoint ckpt;
  ckpt.meta["kind"] = "active-policy";
  ckpt.meta["n"] = policy.dims.n;
  ckpt.meta["hidden"] = policy.dims.hidden;
  ckpt.meta["head_width"] = policy.dims.head_width;
  ckpt.meta["head_layers"] = policy.dims.head_layers;
  ckpt.meta["feature_mode"] = to_string(policy.dims.mode);
  ckpt.meta["frames"] = frames;
  ckpt.meta["loss"] = to_string(loss);
  ckpt.meta["snr_db"] = snr_db;
  ckpt.meta["global_step"] = global_step;
  ckpt.meta["scene_fingerprint"] = scene.fingerprint();
  ckpt.meta["feature_shift"] =
      std::vector<double>(policy.scaler.shift.data(),
                          policy.scaler.shift.data() + policy.scaler.shift.size());
  ckpt.meta["feature_gain"] =
      std::vector<double>(policy.scaler.gain.data(),
                          policy.scaler.gain.data() + policy.scaler.gain.size());
  ckpt.params = policy.params;
  if (opt != nullptr) {
    for (std::size_t i = 0; i < opt->m.size(); ++i) {
      ckpt.opt.add("adam.m." + policy.params.names[i], opt->m[i]);
      ckpt.opt.add("adam.v." + policy.params.names[i], opt->v[i]);
    }
    Eigen::MatrixXd step_mat(1, 1);
    step_mat(0, 0) = static_cast<double>(opt->step);
    ckpt.opt.add("adam.step", step_mat);
  }
  save_checkpoint(path, ckpt);
}

LoadedPolicy load_policy_checkpoint(const std::string& path,
                                    const Scene& expected_scene) {
  const Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.meta.value("kind", "") != "active-policy")
    throw ConfigError("checkpoint '" + path + "' is not an active-policy model");

  LoadedPolicy out;
  out.policy.dims.n = ckpt.meta.at("n").get<int>();
  out.policy.dims.hidden = ckpt.meta.at("hidden").get<int>();
  out.policy.dims.head_width = ckpt.meta.at("head_width").get<int>();
  out.policy.dims.head_layers = ckpt.meta.at("head_layers").get<int>();
  out.policy.dims.mode =
      feature_mode_from_string(ckpt.meta.at("feature_mode").get<std::string>());
  out.frames = ckpt.meta.at("frames").get<int>();
  out.loss = loss_kind_from_string(ckpt.meta.at("loss").get<std::string>());
  out.snr_db = ckpt.meta.at("snr_db").get<double>();
  out.global_step = ckpt.meta.at("global_step").get<std::int64_t>();

  if (out.policy.dims.n != expected_scene.num_elements())
    throw ConfigError("checkpoint '" + path + "' was trained for N=" +
                      std::to_string(out.policy.dims.n) +
                      ", scene has N=" +
                      std::to_string(expected_scene.num_elements()));
  const std::string fp = ckpt.meta.value("scene_fingerprint", "");
  if (fp != expected_scene.fingerprint())
    throw ConfigError("checkpoint '" + path +
                      "' was trained on a different scene (fingerprint " + fp +
                      ")");

  const auto shift = ckpt.meta.at("feature_shift").get<std::vector<double>>();
  const auto gain = ckpt.meta.at("feature_gain").get<std::vector<double>>();
  out.policy.scaler.shift =
      Eigen::Map<const Eigen::VectorXd>(shift.data(), static_cast<Eigen::Index>(shift.size()));
  out.policy.scaler.gain =
      Eigen::Map<const Eigen::VectorXd>(gain.data(), static_cast<Eigen::Index>(gain.size()));
  out.policy.params = ckpt.params;
  return out;
}

}  // namespace risloc::policy
