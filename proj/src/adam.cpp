#include "risloc/adam.hpp"

#include <cmath>

#include "risloc/errors.hpp"

namespace risloc {

GradSet zero_grads_like(const NamedParams& params) {
  GradSet g;
  g.reserve(params.size());
  for (const auto& p : params.values)
    g.push_back(Eigen::MatrixXd::Zero(p.rows(), p.cols()));
  return g;
}

void accumulate(GradSet& into, const GradSet& from) {
  if (into.size() != from.size())
    throw DimensionError("accumulate: gradient set sizes differ");
  for (std::size_t i = 0; i < into.size(); ++i) into[i] += from[i];
}

double global_norm(const GradSet& grads) {
  double sq = 0.0;
  for (const auto& g : grads) sq += g.squaredNorm();
  return std::sqrt(sq);
}

void clip_global_norm(GradSet& grads, double max_norm) {
  const double norm = global_norm(grads);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (auto& g : grads) g *= s;
  }
}

AdamState AdamState::init(const NamedParams& params, double lr, double beta1,
                          double beta2, double eps) {
  AdamState st;
  st.lr = lr;
  st.beta1 = beta1;
  st.beta2 = beta2;
  st.eps = eps;
  st.step = 0;
  st.m = zero_grads_like(params);
  st.v = zero_grads_like(params);
  return st;
}

void adam_step(NamedParams& params, const GradSet& grads, AdamState& state,
               double lr_override) {
  if (grads.size() != params.size() || state.m.size() != params.size())
    throw DimensionError("adam_step: parameter/gradient/state count mismatch");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].rows() != params.values[i].rows() ||
        grads[i].cols() != params.values[i].cols())
      throw DimensionError("adam_step: gradient shape mismatch at '" +
                           params.names[i] + "'");
  }

  const double lr = lr_override >= 0.0 ? lr_override : state.lr;
  state.step += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = state.beta1 * state.m[i] + (1.0 - state.beta1) * grads[i];
    state.v[i].array() = state.beta2 * state.v[i].array() +
                         (1.0 - state.beta2) * grads[i].array().square();
    const Eigen::ArrayXXd m_hat = state.m[i].array() / bc1;
    const Eigen::ArrayXXd v_hat = state.v[i].array() / bc2;
    params.values[i].array() -= lr * m_hat / (v_hat.sqrt() + state.eps);
  }
}

}  // namespace risloc
