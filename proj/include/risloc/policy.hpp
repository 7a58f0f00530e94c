#pragma once

#include <Eigen/Core>
#include <complex>
#include <cstdint>
#include <span>
#include <vector>

#include "risloc/channel.hpp"
#include "risloc/params.hpp"
#include "risloc/tensor.hpp"

namespace risloc::policy {

// Measurement feature fed to the LSTM: RSS |y|^2 or [Re(y), Im(y)].
enum class FeatureMode { kRss, kPilot };

inline int feature_dim(FeatureMode mode) {
  return mode == FeatureMode::kRss ? 1 : 2;
}

enum class LossKind { kFinal, kAverage };

const char* to_string(FeatureMode mode);
const char* to_string(LossKind kind);
FeatureMode feature_mode_from_string(const std::string& s);
LossKind loss_kind_from_string(const std::string& s);

struct PolicyDims {
  int n = 16;             // RIS elements
  int hidden = 512;       // LSTM state width
  int head_width = 1024;  // RIS-head hidden width
  int head_layers = 4;    // L
  FeatureMode mode = FeatureMode::kPilot;
};

// Fixed affine input conditioning, estimated once from warmup samples and
// frozen into the checkpoint.
struct FeatureScaler {
  Eigen::VectorXd shift;  // -mean
  Eigen::VectorXd gain;   // 1/std

  static FeatureScaler identity(int dim);
  Eigen::VectorXd apply(const Eigen::VectorXd& raw) const;
};

// Index of each tensor inside the flat parameter list. The list order is the
// persistence and optimizer contract.
struct PolicyLayout {
  int u_c, u_f, u_i, u_o;
  int w_c, w_f, w_i, w_o;
  int b_c, b_f, b_i, b_o;
  std::vector<int> head_a;
  std::vector<int> head_b;
  int pos_lp;
  int theta0;
  static PolicyLayout make(int head_layers);
};

struct Policy {
  PolicyDims dims;
  NamedParams params;
  FeatureScaler scaler;

  PolicyLayout layout() const { return PolicyLayout::make(dims.head_layers); }
  static Policy init(const PolicyDims& dims, std::uint64_t seed);
};

struct LSTMState {
  Eigen::VectorXd s;
  Eigen::VectorXd c;
  static LSTMState zero(int hidden);
};

// One gated update; `feature` is expected already standardized.
LSTMState lstm_step(const LSTMState& state, const Eigen::VectorXd& feature,
                    const Policy& policy);

// DNN head mapping the hidden state to the next unit-modulus configuration.
RISConfig ris_head(const Eigen::VectorXd& hidden_s, const Policy& policy);

// Linear decode of the position estimate from the cell state.
Eigen::Vector3d position_head(const Eigen::VectorXd& cell_c,
                              const Policy& policy);

// Normalization applied to the learned initial logits.
RISConfig initial_ris_config(const Policy& policy);

struct EpisodeTrace {
  std::vector<Eigen::VectorXcd> theta;          // T configurations
  std::vector<std::complex<double>> y;          // T pilots
  std::vector<Eigen::VectorXd> feature;         // raw features
  std::vector<Eigen::VectorXd> s;
  std::vector<Eigen::VectorXd> c;
  std::vector<Eigen::Vector3d> p_hat;           // per-frame estimates
  Eigen::Vector3d final_estimate() const { return p_hat.back(); }
};

// Rolls the policy for pilot.frames frames over one coherence block.
EpisodeTrace run_episode(const Scene& scene, const ChannelRealization& channel,
                         const PilotParams& pilot, const Policy& policy,
                         double noise_var, Rng& noise_rng);

// Same, with the raw CN(0,1) noise draws supplied (one per frame); used by
// the causality probes.
EpisodeTrace run_episode_with_noise(const Scene& scene,
                                    const ChannelRealization& channel,
                                    const PilotParams& pilot,
                                    const Policy& policy, double noise_var,
                                    const Eigen::VectorXcd& noise_draws);

double loss_final(std::span<const EpisodeTrace> batch,
                  std::span<const Eigen::Vector3d> true_positions);
double loss_average(std::span<const EpisodeTrace> batch,
                    std::span<const Eigen::Vector3d> true_positions);

// ---- Batched differentiable episode graph -------------------------------

// Flat data for a slice of episodes; everything the graph treats as constant.
struct EpisodeBatch {
  int batch = 0;
  int frames = 0;
  double power = 1.0;
  Eigen::MatrixXd vr_re, vr_im;        // N x B
  Eigen::RowVectorXd hd_re, hd_im;     // 1 x B
  Eigen::MatrixXd noise_re, noise_im;  // T x B, already scaled by sigma
  Eigen::Matrix3Xd true_pos;           // 3 x B
};

// Draws UE positions, channels and noise for episodes
// [first_index, first_index + batch) of the stream keyed by `seed`.
EpisodeBatch make_episode_batch(const Scene& scene, const PilotParams& pilot,
                                std::uint64_t seed, std::uint64_t first_index,
                                int batch, int frames);

struct PolicyGraph {
  std::vector<ad::Var> theta_re, theta_im;  // per frame, N x B
  std::vector<ad::Var> y_re, y_im;          // 1 x B
  std::vector<ad::Var> s, c;                // hidden x B
  std::vector<ad::Var> p_hat;               // 3 x B
};

std::vector<ad::Var> make_leaves(ad::Tape& tape, const NamedParams& params);

PolicyGraph build_policy_graph(ad::Tape& tape,
                               const std::vector<ad::Var>& leaves,
                               const PolicyDims& dims,
                               const FeatureScaler& scaler,
                               const EpisodeBatch& data);

// Sum over the batch of the squared position error (kFinal) or its per-frame
// average (kAverage). Divide by the full batch size at the reduction point.
ad::Var episode_loss_sum(ad::Tape& tape, const PolicyGraph& graph,
                         const EpisodeBatch& data, LossKind kind);

}  // namespace risloc::policy
