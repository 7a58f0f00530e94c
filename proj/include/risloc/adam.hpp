#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <vector>

#include "risloc/params.hpp"

namespace risloc {

// Bias-corrected Adam over a NamedParams set.
struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::int64_t step = 0;
  std::vector<Eigen::MatrixXd> m;
  std::vector<Eigen::MatrixXd> v;

  static AdamState init(const NamedParams& params, double lr = 1e-3,
                        double beta1 = 0.9, double beta2 = 0.999,
                        double eps = 1e-8);
};

// One update in place. `lr_override` < 0 keeps state.lr (step-decay schedules
// pass the current rate). Throws DimensionError on shape mismatch.
void adam_step(NamedParams& params, const GradSet& grads, AdamState& state,
               double lr_override = -1.0);

}  // namespace risloc
