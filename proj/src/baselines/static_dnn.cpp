#include "risloc/baselines/static_dnn.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "../parallel.hpp"
#include "risloc/baselines/fingerprint.hpp"
#include "risloc/checkpoint.hpp"
#include "risloc/errors.hpp"

namespace risloc::baselines {

using policy::FeatureMode;
using policy::FeatureScaler;
using policy::feature_dim;

const char* to_string(DesignProvenance p) {
  return p == DesignProvenance::kRandom ? "random" : "learned";
}

DesignProvenance provenance_from_string(const std::string& s) {
  if (s == "random") return DesignProvenance::kRandom;
  if (s == "learned") return DesignProvenance::kLearned;
  throw ConfigError("unknown design provenance '" + s + "'");
}

namespace {

Eigen::MatrixXd xavier(int rows, int cols, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      m(r, c) = rng.uniform(-limit, limit);
  return m;
}

Eigen::VectorXcd normalize_logits(const Eigen::VectorXd& logits, int n) {
  Eigen::VectorXcd theta(n);
  for (int i = 0; i < n; ++i) {
    const double re = logits[i];
    const double im = logits[n + i];
    const double m2 = re * re + im * im;
    theta[i] = m2 < 1e-24 ? std::complex<double>(1.0, 0.0)
                          : std::complex<double>(re, im) / std::sqrt(m2);
  }
  return theta;
}

int mlp_first_index(int frames) { return frames; }

}  // namespace

StaticDnnModel StaticDnnModel::init(int n, int frames, FeatureMode mode,
                                    DesignProvenance provenance,
                                    std::uint64_t seed) {
  Rng rng(seed, 1, StreamRole::kWeightInit);
  StaticDnnModel m;
  m.n = n;
  m.frames = frames;
  m.mode = mode;
  m.provenance = provenance;
  const int input_dim = frames * feature_dim(mode);
  m.scaler = FeatureScaler::identity(input_dim);

  if (provenance == DesignProvenance::kRandom) {
    // Phase-uniform random design, stored as logits for a uniform format.
    const auto thetas = random_theta_sequence(frames, n, seed);
    for (int t = 0; t < frames; ++t) {
      Eigen::MatrixXd logits(2 * n, 1);
      logits.col(0).head(n) = thetas[static_cast<std::size_t>(t)].real();
      logits.col(0).tail(n) = thetas[static_cast<std::size_t>(t)].imag();
      m.params.add("theta_logits." + std::to_string(t), std::move(logits));
    }
  } else {
    for (int t = 0; t < frames; ++t) {
      Eigen::MatrixXd logits(2 * n, 1);
      for (Eigen::Index i = 0; i < logits.size(); ++i) logits(i, 0) = rng.normal();
      m.params.add("theta_logits." + std::to_string(t), std::move(logits));
    }
  }

  std::vector<int> widths;
  widths.push_back(input_dim);
  for (int h : m.hidden) widths.push_back(h);
  widths.push_back(3);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    m.params.add("mlp.W" + std::to_string(l + 1),
                 xavier(widths[l + 1], widths[l], rng));
    m.params.add("mlp.b" + std::to_string(l + 1),
                 Eigen::MatrixXd::Zero(widths[l + 1], 1));
  }
  return m;
}

std::vector<Eigen::VectorXcd> StaticDnnModel::design() const {
  std::vector<Eigen::VectorXcd> thetas(static_cast<std::size_t>(frames));
  for (int t = 0; t < frames; ++t)
    thetas[static_cast<std::size_t>(t)] =
        normalize_logits(params.values[static_cast<std::size_t>(t)].col(0), n);
  return thetas;
}

Eigen::Vector3d StaticDnnModel::estimate(
    const Eigen::VectorXd& stacked_features) const {
  Eigen::VectorXd h = scaler.apply(stacked_features);
  const int first = mlp_first_index(frames);
  const int layers = static_cast<int>(hidden.size()) + 1;
  for (int l = 0; l < layers; ++l) {
    const auto& w = params.values[static_cast<std::size_t>(first + 2 * l)];
    const auto& b = params.values[static_cast<std::size_t>(first + 2 * l + 1)];
    h = w * h + b.col(0);
    if (l + 1 < layers) h = h.cwiseMax(0.0);
  }
  return h;
}

namespace {

// Differentiable batched forward; theta logits participate only for the
// learned provenance.
ad::Var build_static_graph(ad::Tape& tape, const std::vector<ad::Var>& lv,
                           const StaticDnnModel& model,
                           const policy::EpisodeBatch& data) {
  const int n = model.n;
  const double sqrt_p = std::sqrt(data.power);
  ad::Var vr_re = tape.constant(data.vr_re);
  ad::Var vr_im = tape.constant(data.vr_im);
  ad::Var hd_re = tape.constant(data.hd_re);
  ad::Var hd_im = tape.constant(data.hd_im);

  ad::Var input;
  for (int t = 0; t < data.frames; ++t) {
    ad::Var logits = lv[static_cast<std::size_t>(t)];
    if (model.provenance == DesignProvenance::kRandom)
      logits = tape.constant(
          model.params.values[static_cast<std::size_t>(t)]);
    auto [nr, ni] = tape.unit_normalize(tape.slice_rows(logits, 0, n),
                                        tape.slice_rows(logits, n, n));
    ad::Var th_re = tape.tile_cols(nr, data.batch);
    ad::Var th_im = tape.tile_cols(ni, data.batch);
    auto [prod_re, prod_im] = tape.complex_mul(vr_re, vr_im, th_re, th_im);
    ad::Var y_re = tape.add(
        tape.scale(tape.add(tape.colsum(prod_re), hd_re), sqrt_p),
        tape.constant(data.noise_re.row(t)));
    ad::Var y_im = tape.add(
        tape.scale(tape.add(tape.colsum(prod_im), hd_im), sqrt_p),
        tape.constant(data.noise_im.row(t)));
    ad::Var feat = model.mode == FeatureMode::kRss
                       ? tape.add(tape.square(y_re), tape.square(y_im))
                       : tape.concat_rows(y_re, y_im);
    input = t == 0 ? feat : tape.concat_rows(input, feat);
  }
  input = tape.row_affine(input, model.scaler.shift, model.scaler.gain);

  const int first = mlp_first_index(model.frames);
  const int layers = static_cast<int>(model.hidden.size()) + 1;
  ad::Var h = input;
  for (int l = 0; l < layers; ++l) {
    h = tape.add_col(
        tape.matmul(lv[static_cast<std::size_t>(first + 2 * l)], h),
        lv[static_cast<std::size_t>(first + 2 * l + 1)]);
    if (l + 1 < layers) h = tape.relu(h);
  }
  ad::Var target = tape.constant(data.true_pos);
  return tape.sum(tape.square(tape.sub(h, target)));
}

FeatureScaler stacked_scaler(const Scene& scene, const StaticDnnModel& model,
                             double power, std::int64_t samples,
                             std::uint64_t seed) {
  const int fdim = feature_dim(model.mode);
  const int dim = model.frames * fdim;
  const auto thetas = model.design();
  PilotParams pilot;
  pilot.power = power;
  pilot.frames = model.frames;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(dim);
  Eigen::VectorXd sum_sq = Eigen::VectorXd::Zero(dim);
  for (std::int64_t i = 0; i < samples; ++i) {
    const auto index = static_cast<std::uint64_t>(i);
    Rng pos_rng(seed, index, StreamRole::kUePosition);
    const Eigen::Vector3d ue = sample_ue_position(scene, pos_rng);
    const ChannelRealization ch = sample_channel(scene, ue, {seed, index});
    Rng noise_rng(seed, index, StreamRole::kNoise);
    for (int t = 0; t < model.frames; ++t) {
      const std::complex<double> y =
          measure(ch, thetas[static_cast<std::size_t>(t)], pilot,
                  scene.noise_power, noise_rng);
      if (model.mode == FeatureMode::kRss) {
        sum[t] += std::norm(y);
        sum_sq[t] += std::norm(y) * std::norm(y);
      } else {
        sum[2 * t] += y.real();
        sum[2 * t + 1] += y.imag();
        sum_sq[2 * t] += y.real() * y.real();
        sum_sq[2 * t + 1] += y.imag() * y.imag();
      }
    }
  }
  const double count = static_cast<double>(samples);
  const Eigen::VectorXd mean = sum / count;
  const Eigen::VectorXd var =
      (sum_sq / count - mean.cwiseProduct(mean)).cwiseMax(1e-30);
  FeatureScaler sc;
  sc.shift = -mean;
  sc.gain = var.cwiseSqrt().cwiseInverse();
  return sc;
}

Eigen::VectorXd stacked_features(const ChannelRealization& ch,
                                 const std::vector<Eigen::VectorXcd>& thetas,
                                 const PilotParams& pilot, double noise_var,
                                 FeatureMode mode, Rng& noise_rng) {
  const int fdim = feature_dim(mode);
  Eigen::VectorXd out(static_cast<Eigen::Index>(thetas.size()) * fdim);
  for (std::size_t t = 0; t < thetas.size(); ++t) {
    const std::complex<double> y =
        measure(ch, thetas[t], pilot, noise_var, noise_rng);
    if (mode == FeatureMode::kRss)
      out[static_cast<Eigen::Index>(t)] = std::norm(y);
    else {
      out[static_cast<Eigen::Index>(2 * t)] = y.real();
      out[static_cast<Eigen::Index>(2 * t + 1)] = y.imag();
    }
  }
  return out;
}

}  // namespace

StaticDnnEvaluation evaluate_static_dnn(const Scene& scene,
                                        const StaticDnnModel& model,
                                        double power, int episodes,
                                        std::uint64_t seed, int workers) {
  StaticDnnEvaluation ev;
  ev.err_sq.resize(episodes);
  const auto thetas = model.design();
  double max_dev = 0.0;
  for (const auto& theta : thetas)
    for (Eigen::Index i = 0; i < theta.size(); ++i)
      max_dev = std::max(max_dev, std::abs(std::abs(theta[i]) - 1.0));
  ev.max_theta_deviation = max_dev;

  PilotParams pilot;
  pilot.power = power;
  pilot.frames = model.frames;
  detail::parallel_chunks(episodes, detail::resolve_workers(workers), [&](int e) {
    const auto index = static_cast<std::uint64_t>(e);
    Rng pos_rng(seed, index, StreamRole::kUePosition);
    const Eigen::Vector3d ue = sample_ue_position(scene, pos_rng);
    const ChannelRealization ch = sample_channel(scene, ue, {seed, index});
    Rng noise_rng(seed, index, StreamRole::kNoise);
    const Eigen::VectorXd feats = stacked_features(
        ch, thetas, pilot, scene.noise_power, model.mode, noise_rng);
    ev.err_sq[e] = (model.estimate(feats) - ue).squaredNorm();
  });
  return ev;
}

StaticDnnResult static_dnn_train(const Scene& scene, int frames,
                                 FeatureMode mode, DesignProvenance provenance,
                                 const policy::TrainConfig& config) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  if (config.val_episodes < 1)
    throw ConfigError("static_dnn_train: val_episodes must be >= 1");
  const double power = snr_to_power(config.snr_db);
  const int workers = detail::resolve_workers(config.workers);

  StaticDnnModel model =
      StaticDnnModel::init(scene.num_elements(), frames, mode, provenance,
                           config.seed);
  if (config.warmup_samples > 0)
    model.scaler = stacked_scaler(scene, model, power, config.warmup_samples,
                                  detail::splitmix64(config.seed ^ 0x7761726d75ull));

  PilotParams pilot;
  pilot.power = power;
  pilot.frames = frames;
  const std::int64_t total_steps = config.samples / config.batch;
  const std::uint64_t val_seed = detail::splitmix64(config.seed ^ 0x76616cull);

  AdamState opt = AdamState::init(model.params, config.lr);
  StaticDnnResult result;
  result.model = model;
  result.best_val_mse = std::numeric_limits<double>::infinity();

  auto validate = [&]() {
    return evaluate_static_dnn(scene, model, power, config.val_episodes,
                               val_seed, workers)
        .mse();
  };

  {
    policy::TrainLogRow row;
    row.epoch = 0;
    row.val_mse = validate();
    row.lr = config.lr;
    row.train_loss = std::numeric_limits<double>::quiet_NaN();
    row.seconds = std::chrono::duration<double>(clock::now() - t0).count();
    result.log.push_back(row);
    result.best_val_mse = row.val_mse;
  }

  double epoch_loss_sum = 0.0;
  std::int64_t epoch_loss_count = 0;
  int epochs_since_best = 0;

  for (std::int64_t step = 0; step < total_steps; ++step) {
    const double lr_now = policy::lr_schedule(config.lr, step, total_steps);
    const std::uint64_t base =
        static_cast<std::uint64_t>(step) * static_cast<std::uint64_t>(config.batch);
    const int n_chunks =
        (config.batch + config.chunk - 1) / config.chunk;
    std::vector<GradSet> grad_slots(static_cast<std::size_t>(n_chunks));
    std::vector<double> loss_slots(static_cast<std::size_t>(n_chunks), 0.0);
    detail::parallel_chunks(n_chunks, workers, [&](int k) {
      const int off = k * config.chunk;
      const int b = std::min(config.chunk, config.batch - off);
      ad::Tape tape;
      const policy::EpisodeBatch data = policy::make_episode_batch(
          scene, pilot, config.seed, base + static_cast<std::uint64_t>(off), b,
          frames);
      std::vector<ad::Var> leaves = policy::make_leaves(tape, model.params);
      ad::Var loss = build_static_graph(tape, leaves, model, data);
      if (!tape.all_finite(loss))
        throw NumericError("static_dnn_train diverged: non-finite loss");
      tape.backward(loss);
      GradSet grads;
      grads.reserve(leaves.size());
      for (const ad::Var& leaf : leaves) grads.push_back(tape.grad(leaf));
      grad_slots[static_cast<std::size_t>(k)] = std::move(grads);
      loss_slots[static_cast<std::size_t>(k)] = loss.value()(0, 0);
    });

    GradSet grads = zero_grads_like(model.params);
    double loss_sum = 0.0;
    for (int k = 0; k < n_chunks; ++k) {
      accumulate(grads, grad_slots[static_cast<std::size_t>(k)]);
      loss_sum += loss_slots[static_cast<std::size_t>(k)];
    }
    const double inv_batch = 1.0 / static_cast<double>(config.batch);
    for (auto& g : grads) g *= inv_batch;
    const double train_loss = loss_sum * inv_batch;
    if (!std::isfinite(train_loss))
      throw NumericError("static_dnn_train diverged at step " +
                         std::to_string(step));
    epoch_loss_sum += train_loss;
    epoch_loss_count += 1;
    clip_global_norm(grads, config.clip_norm);
    adam_step(model.params, grads, opt, lr_now);

    const bool epoch_end = ((step + 1) % config.epoch_steps == 0) ||
                           (step + 1 == total_steps);
    if (!epoch_end) continue;

    policy::TrainLogRow row;
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
      result.model = model;
      epochs_since_best = 0;
    } else if (config.patience > 0 && ++epochs_since_best >= config.patience) {
      result.steps_run = step + 1;
      return result;
    }
    result.steps_run = step + 1;
  }
  return result;
}

void save_static_dnn_checkpoint(const std::string& path,
                                const StaticDnnModel& model,
                                const Scene& scene, double snr_db,
                                std::int64_t global_step) {
  Checkpoint ckpt;
  ckpt.meta["kind"] = "static-dnn";
  ckpt.meta["n"] = model.n;
  ckpt.meta["frames"] = model.frames;
  ckpt.meta["feature_mode"] = policy::to_string(model.mode);
  ckpt.meta["provenance"] = to_string(model.provenance);
  ckpt.meta["hidden"] = model.hidden;
  ckpt.meta["snr_db"] = snr_db;
  ckpt.meta["global_step"] = global_step;
  ckpt.meta["scene_fingerprint"] = scene.fingerprint();
  ckpt.meta["feature_shift"] = std::vector<double>(
      model.scaler.shift.data(),
      model.scaler.shift.data() + model.scaler.shift.size());
  ckpt.meta["feature_gain"] = std::vector<double>(
      model.scaler.gain.data(),
      model.scaler.gain.data() + model.scaler.gain.size());
  ckpt.params = model.params;
  save_checkpoint(path, ckpt);
}

StaticDnnModel load_static_dnn_checkpoint(const std::string& path,
                                          const Scene& expected_scene) {
  const Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.meta.value("kind", "") != "static-dnn")
    throw ConfigError("checkpoint '" + path + "' is not a static-dnn model");
  StaticDnnModel m;
  m.n = ckpt.meta.at("n").get<int>();
  m.frames = ckpt.meta.at("frames").get<int>();
  m.mode = policy::feature_mode_from_string(
      ckpt.meta.at("feature_mode").get<std::string>());
  m.provenance =
      provenance_from_string(ckpt.meta.at("provenance").get<std::string>());
  m.hidden = ckpt.meta.at("hidden").get<std::vector<int>>();
  if (m.n != expected_scene.num_elements())
    throw ConfigError("checkpoint '" + path + "' trained for N=" +
                      std::to_string(m.n) + ", scene has N=" +
                      std::to_string(expected_scene.num_elements()));
  if (ckpt.meta.value("scene_fingerprint", "") != expected_scene.fingerprint())
    throw ConfigError("checkpoint '" + path +
                      "' was trained on a different scene");
  const auto shift = ckpt.meta.at("feature_shift").get<std::vector<double>>();
  const auto gain = ckpt.meta.at("feature_gain").get<std::vector<double>>();
  m.scaler.shift = Eigen::Map<const Eigen::VectorXd>(
      shift.data(), static_cast<Eigen::Index>(shift.size()));
  m.scaler.gain = Eigen::Map<const Eigen::VectorXd>(
      gain.data(), static_cast<Eigen::Index>(gain.size()));
  m.params = ckpt.params;
  return m;
}

}  // namespace risloc::baselines
