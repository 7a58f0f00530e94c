#include "risloc/graph_suite.hpp"

#include <chrono>
#include <cmath>

#include "risloc/policy.hpp"
#include "risloc/rng.hpp"

namespace risloc::ad {

namespace {

enum class Op {
  kAdd,
  kSub,
  kMul,
  kTanh,
  kSigmoid,
  kSquare,
  kRelu,
  kScale,
  kAddScalar,
  kMatmul,
  kColsum,
  kConcatRows,
  kComplexMul,
  kUnitNormalize,
  kCount
};

struct Step {
  Op op;
  int a = -1;
  int b = -1;
  int c = -1;
  int d = -1;
  double k = 0.0;
};

// A reproducible program: leaves plus a step list; the interpreter rebuilds
// the identical graph for every finite-difference probe.
struct Program {
  std::vector<Matrix> leaf_values;
  std::vector<Step> steps;

  Var build(Tape& tape, const std::vector<Matrix>& params) const {
    std::vector<Var> pool;
    pool.reserve(params.size() + steps.size());
    for (const auto& p : params) pool.push_back(tape.leaf(p));
    for (const auto& s : steps) {
      switch (s.op) {
        case Op::kAdd:
          pool.push_back(tape.add(pool[s.a], pool[s.b]));
          break;
        case Op::kSub:
          pool.push_back(tape.sub(pool[s.a], pool[s.b]));
          break;
        case Op::kMul:
          pool.push_back(tape.mul(pool[s.a], pool[s.b]));
          break;
        case Op::kTanh:
          pool.push_back(tape.tanh(pool[s.a]));
          break;
        case Op::kSigmoid:
          pool.push_back(tape.sigmoid(pool[s.a]));
          break;
        case Op::kSquare:
          pool.push_back(tape.square(pool[s.a]));
          break;
        case Op::kRelu:
          pool.push_back(tape.relu(pool[s.a]));
          break;
        case Op::kScale:
          pool.push_back(tape.scale(pool[s.a], s.k));
          break;
        case Op::kAddScalar:
          pool.push_back(tape.add_scalar(pool[s.a], s.k));
          break;
        case Op::kMatmul:
          pool.push_back(tape.matmul(pool[s.a], pool[s.b]));
          break;
        case Op::kColsum:
          pool.push_back(tape.colsum(pool[s.a]));
          break;
        case Op::kConcatRows:
          pool.push_back(tape.concat_rows(pool[s.a], pool[s.b]));
          break;
        case Op::kComplexMul: {
          auto [re, im] =
              tape.complex_mul(pool[s.a], pool[s.b], pool[s.c], pool[s.d]);
          pool.push_back(re);
          pool.push_back(im);
          break;
        }
        case Op::kUnitNormalize: {
          auto [re, im] = tape.unit_normalize(pool[s.a], pool[s.b]);
          pool.push_back(re);
          pool.push_back(im);
          break;
        }
        default:
          break;
      }
    }
    // Reduce the whole pool so every node contributes to the loss.
    Var loss = tape.sum(pool.front());
    for (std::size_t i = 1; i < pool.size(); ++i)
      loss = tape.add(loss, tape.sum(pool[i]));
    return loss;
  }
};

Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  Matrix m(rows, cols);
  for (Eigen::Index c = 0; c < cols; ++c)
    for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.uniform(-2.0, 2.0);
  return m;
}

// Tracks values while generating so margin constraints can be enforced.
Program random_program(std::uint64_t seed) {
  Rng rng(seed, 0, StreamRole::kGraphGen);
  Program prog;
  const int n_leaves = 2 + static_cast<int>(rng.next_u64() % 2);
  const Eigen::Index rows = 2 + static_cast<Eigen::Index>(rng.next_u64() % 2);
  const Eigen::Index cols = 2 + static_cast<Eigen::Index>(rng.next_u64() % 2);
  for (int i = 0; i < n_leaves; ++i)
    prog.leaf_values.push_back(random_matrix(rows, cols, rng));

  std::vector<Matrix> values = prog.leaf_values;
  const int n_steps = 4 + static_cast<int>(rng.next_u64() % 7);
  auto same_shape = [&](int a, int b) {
    return values[a].rows() == values[b].rows() &&
           values[a].cols() == values[b].cols();
  };

  for (int step = 0; step < n_steps; ++step) {
    for (int attempt = 0; attempt < 40; ++attempt) {
      const Op op = static_cast<Op>(rng.next_u64() %
                                    static_cast<std::uint64_t>(Op::kCount));
      const int pool = static_cast<int>(values.size());
      const int a = static_cast<int>(rng.next_u64() % pool);
      const int b = static_cast<int>(rng.next_u64() % pool);
      Step s{op, a, b, -1, -1, 0.0};
      bool ok = false;
      Matrix out;
      switch (op) {
        case Op::kAdd:
          if (same_shape(a, b)) {
            out = values[a] + values[b];
            ok = true;
          }
          break;
        case Op::kSub:
          if (same_shape(a, b)) {
            out = values[a] - values[b];
            ok = true;
          }
          break;
        case Op::kMul:
          if (same_shape(a, b)) {
            out = values[a].cwiseProduct(values[b]);
            ok = true;
          }
          break;
        case Op::kTanh:
          out = values[a].array().tanh();
          ok = true;
          break;
        case Op::kSigmoid:
          out = (1.0 + (-values[a].array()).exp()).inverse();
          ok = true;
          break;
        case Op::kSquare:
          out = values[a].array().square();
          ok = true;
          break;
        case Op::kRelu:
          if (values[a].array().abs().minCoeff() >= 1e-3) {
            out = values[a].cwiseMax(0.0);
            ok = true;
          }
          break;
        case Op::kScale:
          s.k = rng.uniform(-1.5, 1.5);
          out = s.k * values[a];
          ok = true;
          break;
        case Op::kAddScalar:
          s.k = rng.uniform(-1.0, 1.0);
          out = values[a].array() + s.k;
          ok = true;
          break;
        case Op::kMatmul:
          if (values[a].cols() == values[b].rows()) {
            out = values[a] * values[b];
            ok = true;
          }
          break;
        case Op::kColsum:
          out = values[a].colwise().sum();
          ok = true;
          break;
        case Op::kConcatRows:
          if (values[a].cols() == values[b].cols()) {
            out.resize(values[a].rows() + values[b].rows(), values[a].cols());
            out.topRows(values[a].rows()) = values[a];
            out.bottomRows(values[b].rows()) = values[b];
            ok = true;
          }
          break;
        case Op::kComplexMul: {
          const int c = static_cast<int>(rng.next_u64() % pool);
          const int d = static_cast<int>(rng.next_u64() % pool);
          if (same_shape(a, b) && same_shape(a, c) && same_shape(a, d)) {
            s.c = c;
            s.d = d;
            out = values[a].cwiseProduct(values[c]) -
                  values[b].cwiseProduct(values[d]);
            // Track only the real part for shape bookkeeping; the builder
            // appends both outputs.
            ok = true;
          }
          break;
        }
        case Op::kUnitNormalize:
          if (same_shape(a, b)) {
            const Eigen::ArrayXXd m2 = values[a].array().square() +
                                       values[b].array().square();
            if (m2.minCoeff() >= 1e-4) {  // magnitude >= 1e-2
              out = (values[a].array() / m2.sqrt()).matrix();
              ok = true;
            }
          }
          break;
        default:
          break;
      }
      if (!ok) continue;
      prog.steps.push_back(s);
      values.push_back(out);
      if (op == Op::kComplexMul)
        values.push_back(values[a].cwiseProduct(values[s.d]) +
                         values[b].cwiseProduct(values[s.c]));
      if (op == Op::kUnitNormalize) {
        const Eigen::ArrayXXd m2 = values[a].array().square() +
                                   values[b].array().square();
        values.push_back((values[b].array() / m2.sqrt()).matrix());
      }
      break;
    }
  }
  return prog;
}

// Synthetic O(1) data for the reduced-width policy step; pathloss scales are
// irrelevant to the chain-rule check.
policy::EpisodeBatch synthetic_batch(int n, int frames, int batch,
                                     std::uint64_t seed) {
  Rng rng(seed, 1, StreamRole::kGraphGen);
  policy::EpisodeBatch data;
  data.batch = batch;
  data.frames = frames;
  data.power = 1.0;
  data.vr_re = random_matrix(n, batch, rng);
  data.vr_im = random_matrix(n, batch, rng);
  data.hd_re = random_matrix(1, batch, rng);
  data.hd_im = random_matrix(1, batch, rng);
  data.noise_re = 0.1 * random_matrix(frames, batch, rng);
  data.noise_im = 0.1 * random_matrix(frames, batch, rng);
  data.true_pos = random_matrix(3, batch, rng);
  return data;
}

// Reduced-width policy with biases pushed away from activation kinks.
policy::Policy reduced_policy(policy::FeatureMode mode, std::uint64_t seed) {
  policy::PolicyDims dims;
  dims.n = 4;
  dims.hidden = 8;
  dims.head_width = 8;
  dims.head_layers = 4;
  dims.mode = mode;
  policy::Policy p = policy::Policy::init(dims, seed);
  Rng rng(seed, 2, StreamRole::kGraphGen);
  const policy::PolicyLayout l = p.layout();
  for (int layer = 0; layer < dims.head_layers; ++layer) {
    Eigen::MatrixXd& b = p.params.values[static_cast<std::size_t>(
        l.head_b[static_cast<std::size_t>(layer)])];
    for (Eigen::Index i = 0; i < b.size(); ++i)
      b(i, 0) = (rng.uniform01() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.4, 0.9);
  }
  Eigen::MatrixXd& theta0 =
      p.params.values[static_cast<std::size_t>(l.theta0)];
  for (Eigen::Index i = 0; i < theta0.size(); ++i)
    theta0(i, 0) = (rng.uniform01() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.5, 1.5);
  return p;
}

}  // namespace

SuiteResult run_grad_check_suite(int random_graphs, std::uint64_t seed,
                                 double fd_step) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  SuiteResult result;

  for (int g = 0; g < random_graphs; ++g) {
    const Program prog = random_program(seed + static_cast<std::uint64_t>(g));
    const GraphBuilder builder = [&prog](Tape& tape,
                                         const std::vector<Matrix>& params) {
      return prog.build(tape, params);
    };
    std::vector<std::string> names(prog.leaf_values.size());
    for (std::size_t i = 0; i < names.size(); ++i)
      names[i] = "leaf" + std::to_string(i);
    const GradCheckReport rep =
        grad_check(builder, prog.leaf_values, names, fd_step);
    result.graphs += 1;
    if (rep.max_rel_error > result.max_rel_error) {
      result.max_rel_error = rep.max_rel_error;
      result.worst_graph = "random_graph_" + std::to_string(g) + "/" +
                           rep.worst_param;
    }
  }

  // Full one-frame policy step (two unrolled frames exercise the RIS head
  // between two measurements) in both feature modes.
  for (const policy::FeatureMode mode :
       {policy::FeatureMode::kRss, policy::FeatureMode::kPilot}) {
    const policy::Policy proto = reduced_policy(mode, seed + 977);
    const policy::EpisodeBatch data =
        synthetic_batch(proto.dims.n, 2, 2, seed + 991);
    const policy::PolicyDims dims = proto.dims;
    const policy::FeatureScaler scaler =
        policy::FeatureScaler::identity(policy::feature_dim(mode));
    const GraphBuilder builder = [dims, scaler, data](
                                     Tape& tape,
                                     const std::vector<Matrix>& params) {
      std::vector<Var> leaves;
      leaves.reserve(params.size());
      for (const auto& p : params) leaves.push_back(tape.leaf(p));
      const policy::PolicyGraph graph =
          policy::build_policy_graph(tape, leaves, dims, scaler, data);
      return policy::episode_loss_sum(tape, graph, data,
                                      policy::LossKind::kFinal);
    };
    const GradCheckReport rep =
        grad_check(builder, proto.params.values, proto.params.names, fd_step);
    result.graphs += 1;
    if (rep.max_rel_error > result.max_rel_error) {
      result.max_rel_error = rep.max_rel_error;
      result.worst_graph =
          std::string("policy_step_") + policy::to_string(mode) + "/" +
          rep.worst_param;
    }
  }

  result.seconds = std::chrono::duration<double>(clock::now() - t0).count();
  return result;
}

}  // namespace risloc::ad
