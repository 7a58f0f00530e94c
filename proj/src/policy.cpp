#include "risloc/policy.hpp"

#include <cmath>

#include "risloc/errors.hpp"

namespace risloc::policy {

const char* to_string(FeatureMode mode) {
  return mode == FeatureMode::kRss ? "rss" : "pilot";
}

const char* to_string(LossKind kind) {
  return kind == LossKind::kFinal ? "final" : "average";
}

FeatureMode feature_mode_from_string(const std::string& s) {
  if (s == "rss") return FeatureMode::kRss;
  if (s == "pilot") return FeatureMode::kPilot;
  throw ConfigError("unknown feature mode '" + s + "' (want rss|pilot)");
}

LossKind loss_kind_from_string(const std::string& s) {
  if (s == "final") return LossKind::kFinal;
  if (s == "average") return LossKind::kAverage;
  throw ConfigError("unknown loss '" + s + "' (want final|average)");
}

FeatureScaler FeatureScaler::identity(int dim) {
  FeatureScaler sc;
  sc.shift = Eigen::VectorXd::Zero(dim);
  sc.gain = Eigen::VectorXd::Ones(dim);
  return sc;
}

Eigen::VectorXd FeatureScaler::apply(const Eigen::VectorXd& raw) const {
  return (raw + shift).cwiseProduct(gain);
}

PolicyLayout PolicyLayout::make(int head_layers) {
  PolicyLayout l;
  l.u_c = 0;
  l.u_f = 1;
  l.u_i = 2;
  l.u_o = 3;
  l.w_c = 4;
  l.w_f = 5;
  l.w_i = 6;
  l.w_o = 7;
  l.b_c = 8;
  l.b_f = 9;
  l.b_i = 10;
  l.b_o = 11;
  int next = 12;
  l.head_a.resize(head_layers);
  l.head_b.resize(head_layers);
  for (int i = 0; i < head_layers; ++i) {
    l.head_a[i] = next++;
    l.head_b[i] = next++;
  }
  l.pos_lp = next++;
  l.theta0 = next++;
  return l;
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

Eigen::MatrixXd normal_matrix(int rows, int cols, Rng& rng) {
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index c = 0; c < m.cols(); ++c)
    for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = rng.normal();
  return m;
}

// Head layer l dimensions: A_1 maps hidden -> width, the last maps -> 2N.
std::pair<int, int> head_layer_shape(const PolicyDims& d, int layer) {
  const int in = layer == 0 ? d.hidden : d.head_width;
  const int out = layer == d.head_layers - 1 ? 2 * d.n : d.head_width;
  return {out, in};
}

}  // namespace

Policy Policy::init(const PolicyDims& dims, std::uint64_t seed) {
  Rng rng(seed, 0, StreamRole::kWeightInit);
  const int f = feature_dim(dims.mode);
  Policy p;
  p.dims = dims;
  p.scaler = FeatureScaler::identity(f);
  auto& np = p.params;
  for (const char* g : {"c", "f", "i", "o"})
    np.add(std::string("lstm.u_") + g, xavier(dims.hidden, f, rng));
  for (const char* g : {"c", "f", "i", "o"})
    np.add(std::string("lstm.w_") + g, xavier(dims.hidden, dims.hidden, rng));
  for (const char* g : {"c", "f", "i", "o"}) {
    Eigen::MatrixXd b = Eigen::MatrixXd::Zero(dims.hidden, 1);
    if (g[0] == 'f') b.setOnes();  // open forget gate at start
    np.add(std::string("lstm.b_") + g, std::move(b));
  }
  for (int l = 0; l < dims.head_layers; ++l) {
    const auto [out, in] = head_layer_shape(dims, l);
    np.add("head.A" + std::to_string(l + 1), xavier(out, in, rng));
    np.add("head.b" + std::to_string(l + 1), Eigen::MatrixXd::Zero(out, 1));
  }
  np.add("pos.Lp", xavier(3, dims.hidden, rng));
  np.add("theta0", normal_matrix(2 * dims.n, 1, rng));
  return p;
}

LSTMState LSTMState::zero(int hidden) {
  LSTMState st;
  st.s = Eigen::VectorXd::Zero(hidden);
  st.c = Eigen::VectorXd::Zero(hidden);
  return st;
}

namespace {

Eigen::ArrayXd sigmoid_array(const Eigen::VectorXd& x) {
  return (1.0 + (-x.array()).exp()).inverse();
}

// Unit-circle projection with the degenerate-logit fallback: elements with
// squared magnitude under 1e-24 become 1 + 0j.
Eigen::VectorXcd normalize_logits(const Eigen::VectorXd& logits, int n) {
  Eigen::VectorXcd theta(n);
  for (int i = 0; i < n; ++i) {
    const double re = logits[i];
    const double im = logits[n + i];
    const double m2 = re * re + im * im;
    if (m2 < 1e-24) {
      theta[i] = {1.0, 0.0};
    } else {
      const double m = std::sqrt(m2);
      theta[i] = {re / m, im / m};
    }
  }
  return theta;
}

}  // namespace

LSTMState lstm_step(const LSTMState& state, const Eigen::VectorXd& feature,
                    const Policy& policy) {
  const auto& np = policy.params;
  const PolicyLayout l = policy.layout();
  if (feature.size() != np.values[l.u_c].cols())
    throw DimensionError("lstm_step: feature dimension mismatch");
  if (state.s.size() != policy.dims.hidden)
    throw DimensionError("lstm_step: state dimension mismatch");

  auto gate_pre = [&](int u, int w, int b) -> Eigen::VectorXd {
    return np.values[u] * feature + np.values[w] * state.s +
           np.values[b].col(0);
  };
  const Eigen::ArrayXd f = sigmoid_array(gate_pre(l.u_f, l.w_f, l.b_f));
  const Eigen::ArrayXd i = sigmoid_array(gate_pre(l.u_i, l.w_i, l.b_i));
  const Eigen::ArrayXd o = sigmoid_array(gate_pre(l.u_o, l.w_o, l.b_o));
  const Eigen::ArrayXd cand = gate_pre(l.u_c, l.w_c, l.b_c).array().tanh();

  LSTMState out;
  out.c = (f * state.c.array() + i * cand).matrix();
  out.s = (o * out.c.array().tanh()).matrix();
  return out;
}

RISConfig ris_head(const Eigen::VectorXd& hidden_s, const Policy& policy) {
  const auto& np = policy.params;
  const PolicyLayout l = policy.layout();
  Eigen::VectorXd h = hidden_s;
  for (int layer = 0; layer < policy.dims.head_layers; ++layer) {
    h = np.values[l.head_a[layer]] * h + np.values[l.head_b[layer]].col(0);
    if (layer + 1 < policy.dims.head_layers) h = h.cwiseMax(0.0);
  }
  return {normalize_logits(h, policy.dims.n)};
}

Eigen::Vector3d position_head(const Eigen::VectorXd& cell_c,
                              const Policy& policy) {
  return policy.params.values[policy.layout().pos_lp] * cell_c;
}

RISConfig initial_ris_config(const Policy& policy) {
  return {normalize_logits(policy.params.values[policy.layout().theta0].col(0),
                           policy.dims.n)};
}

namespace {

Eigen::VectorXd raw_feature(std::complex<double> y, FeatureMode mode) {
  if (mode == FeatureMode::kRss) {
    Eigen::VectorXd f(1);
    f[0] = std::norm(y);
    return f;
  }
  Eigen::VectorXd f(2);
  f[0] = y.real();
  f[1] = y.imag();
  return f;
}

}  // namespace

EpisodeTrace run_episode_with_noise(const Scene& scene,
                                    const ChannelRealization& channel,
                                    const PilotParams& pilot,
                                    const Policy& policy, double noise_var,
                                    const Eigen::VectorXcd& noise_draws) {
  const int frames = pilot.frames;
  if (frames < 1) throw ConfigError("run_episode: frames must be >= 1");
  if (noise_draws.size() < frames)
    throw DimensionError("run_episode: not enough noise draws");

  const double sigma = std::sqrt(noise_var);
  EpisodeTrace trace;
  LSTMState state = LSTMState::zero(policy.dims.hidden);
  RISConfig theta = initial_ris_config(policy);

  for (int t = 0; t < frames; ++t) {
    const std::complex<double> reflected =
        channel.v_r.cwiseProduct(theta.theta).sum();
    const std::complex<double> y =
        std::sqrt(pilot.power) * (channel.h_d + reflected) *
            pilot.pilot_symbol +
        sigma * noise_draws[t];
    const Eigen::VectorXd feat = raw_feature(y, policy.dims.mode);
    state = lstm_step(state, policy.scaler.apply(feat), policy);

    trace.theta.push_back(theta.theta);
    trace.y.push_back(y);
    trace.feature.push_back(feat);
    trace.s.push_back(state.s);
    trace.c.push_back(state.c);
    trace.p_hat.push_back(position_head(state.c, policy));

    if (t + 1 < frames) theta = ris_head(state.s, policy);
  }
  return trace;
}

EpisodeTrace run_episode(const Scene& scene, const ChannelRealization& channel,
                         const PilotParams& pilot, const Policy& policy,
                         double noise_var, Rng& noise_rng) {
  Eigen::VectorXcd draws(pilot.frames);
  for (int t = 0; t < pilot.frames; ++t) draws[t] = noise_rng.cnormal();
  return run_episode_with_noise(scene, channel, pilot, policy, noise_var,
                                draws);
}

double loss_final(std::span<const EpisodeTrace> batch,
                  std::span<const Eigen::Vector3d> true_positions) {
  if (batch.size() != true_positions.size() || batch.empty())
    throw DimensionError("loss_final: batch/positions size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i)
    total += (batch[i].p_hat.back() - true_positions[i]).squaredNorm();
  return total / static_cast<double>(batch.size());
}

double loss_average(std::span<const EpisodeTrace> batch,
                    std::span<const Eigen::Vector3d> true_positions) {
  if (batch.size() != true_positions.size() || batch.empty())
    throw DimensionError("loss_average: batch/positions size mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    double ep = 0.0;
    for (const auto& p : batch[i].p_hat)
      ep += (p - true_positions[i]).squaredNorm();
    total += ep / static_cast<double>(batch[i].p_hat.size());
  }
  return total / static_cast<double>(batch.size());
}

EpisodeBatch make_episode_batch(const Scene& scene, const PilotParams& pilot,
                                std::uint64_t seed, std::uint64_t first_index,
                                int batch, int frames) {
  const int n = scene.num_elements();
  EpisodeBatch data;
  data.batch = batch;
  data.frames = frames;
  data.power = pilot.power;
  data.vr_re.resize(n, batch);
  data.vr_im.resize(n, batch);
  data.hd_re.resize(batch);
  data.hd_im.resize(batch);
  data.noise_re.resize(frames, batch);
  data.noise_im.resize(frames, batch);
  data.true_pos.resize(3, batch);

  // Fold the unit-modulus pilot symbol into the channel constants so the
  // graph's y matches measure() for any x_t.
  const std::complex<double> x = pilot.pilot_symbol;
  const double sigma = std::sqrt(scene.noise_power);
  for (int b = 0; b < batch; ++b) {
    const std::uint64_t index = first_index + static_cast<std::uint64_t>(b);
    Rng pos_rng(seed, index, StreamRole::kUePosition);
    const Eigen::Vector3d ue = sample_ue_position(scene, pos_rng);
    const ChannelRealization ch = sample_channel(scene, ue, {seed, index});
    const Eigen::VectorXcd v_r_x = ch.v_r * x;
    const std::complex<double> h_d_x = ch.h_d * x;
    data.vr_re.col(b) = v_r_x.real();
    data.vr_im.col(b) = v_r_x.imag();
    data.hd_re[b] = h_d_x.real();
    data.hd_im[b] = h_d_x.imag();
    data.true_pos.col(b) = ue;
    Rng noise_rng(seed, index, StreamRole::kNoise);
    for (int t = 0; t < frames; ++t) {
      const std::complex<double> nz = sigma * noise_rng.cnormal();
      data.noise_re(t, b) = nz.real();
      data.noise_im(t, b) = nz.imag();
    }
  }
  return data;
}

std::vector<ad::Var> make_leaves(ad::Tape& tape, const NamedParams& params) {
  std::vector<ad::Var> leaves;
  leaves.reserve(params.size());
  for (const auto& value : params.values) leaves.push_back(tape.leaf(value));
  return leaves;
}

PolicyGraph build_policy_graph(ad::Tape& tape,
                               const std::vector<ad::Var>& lv,
                               const PolicyDims& dims,
                               const FeatureScaler& scaler,
                               const EpisodeBatch& data) {
  const PolicyLayout idx = PolicyLayout::make(dims.head_layers);
  const int n = dims.n;
  const int batch = data.batch;
  const double sqrt_p = std::sqrt(data.power);

  ad::Var vr_re = tape.constant(data.vr_re);
  ad::Var vr_im = tape.constant(data.vr_im);
  ad::Var hd_re = tape.constant(data.hd_re);
  ad::Var hd_im = tape.constant(data.hd_im);

  ad::Var s = tape.constant(Eigen::MatrixXd::Zero(dims.hidden, batch));
  ad::Var c = tape.constant(Eigen::MatrixXd::Zero(dims.hidden, batch));

  // theta_0 from the learned logits, shared across the batch.
  ad::Var logits0 = tape.tile_cols(lv[idx.theta0], batch);
  auto [th_re, th_im] = tape.unit_normalize(tape.slice_rows(logits0, 0, n),
                                            tape.slice_rows(logits0, n, n));

  PolicyGraph g;
  for (int t = 0; t < data.frames; ++t) {
    g.theta_re.push_back(th_re);
    g.theta_im.push_back(th_im);

    // y_t = sqrt(P) * (h_d + v_r^T theta) + n_t   (pilot symbol = 1)
    auto [prod_re, prod_im] = tape.complex_mul(vr_re, vr_im, th_re, th_im);
    ad::Var ref_re = tape.colsum(prod_re);
    ad::Var ref_im = tape.colsum(prod_im);
    ad::Var noise_re = tape.constant(data.noise_re.row(t));
    ad::Var noise_im = tape.constant(data.noise_im.row(t));
    ad::Var y_re =
        tape.add(tape.scale(tape.add(ref_re, hd_re), sqrt_p), noise_re);
    ad::Var y_im =
        tape.add(tape.scale(tape.add(ref_im, hd_im), sqrt_p), noise_im);
    g.y_re.push_back(y_re);
    g.y_im.push_back(y_im);

    ad::Var feat = dims.mode == FeatureMode::kRss
                       ? tape.add(tape.square(y_re), tape.square(y_im))
                       : tape.concat_rows(y_re, y_im);
    feat = tape.row_affine(feat, scaler.shift, scaler.gain);

    auto gate = [&](int u, int w, int b) {
      return tape.add_col(
          tape.add(tape.matmul(lv[u], feat), tape.matmul(lv[w], s)), lv[b]);
    };
    ad::Var f = tape.sigmoid(gate(idx.u_f, idx.w_f, idx.b_f));
    ad::Var i = tape.sigmoid(gate(idx.u_i, idx.w_i, idx.b_i));
    ad::Var o = tape.sigmoid(gate(idx.u_o, idx.w_o, idx.b_o));
    ad::Var cand = tape.tanh(gate(idx.u_c, idx.w_c, idx.b_c));
    c = tape.add(tape.mul(f, c), tape.mul(i, cand));
    s = tape.mul(o, tape.tanh(c));
    g.s.push_back(s);
    g.c.push_back(c);
    g.p_hat.push_back(tape.matmul(lv[idx.pos_lp], c));

    if (t + 1 < data.frames) {
      ad::Var h = s;
      for (int layer = 0; layer < dims.head_layers; ++layer) {
        h = tape.add_col(tape.matmul(lv[idx.head_a[layer]], h),
                         lv[idx.head_b[layer]]);
        if (layer + 1 < dims.head_layers) h = tape.relu(h);
      }
      std::tie(th_re, th_im) = tape.unit_normalize(
          tape.slice_rows(h, 0, n), tape.slice_rows(h, n, n));
    }
  }
  return g;
}

ad::Var episode_loss_sum(ad::Tape& tape, const PolicyGraph& graph,
                         const EpisodeBatch& data, LossKind kind) {
  ad::Var target = tape.constant(data.true_pos);
  if (kind == LossKind::kFinal)
    return tape.sum(tape.square(tape.sub(graph.p_hat.back(), target)));
  ad::Var total;
  for (int t = 0; t < data.frames; ++t) {
    ad::Var term = tape.sum(tape.square(tape.sub(graph.p_hat[t], target)));
    total = t == 0 ? term : tape.add(total, term);
  }
  return tape.scale(total, 1.0 / static_cast<double>(data.frames));
}

}  // namespace risloc::policy
