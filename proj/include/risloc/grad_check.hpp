#pragma once

#include <Eigen/Core>
#include <functional>
#include <string>
#include <vector>

#include "risloc/tensor.hpp"

namespace risloc::ad {

// Rebuilds the graph from parameter values; must be deterministic. Leaves are
// created on the tape in the order of `params`.
using GraphBuilder = std::function<Var(Tape&, const std::vector<Matrix>&)>;

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  int worst_row = -1;
  int worst_col = -1;
  std::size_t checked = 0;
};

// Compares backward() against central finite differences with step h over
// every scalar of every parameter.
GradCheckReport grad_check(const GraphBuilder& builder,
                           const std::vector<Matrix>& params,
                           const std::vector<std::string>& names,
                           double h = 1e-4);

}  // namespace risloc::ad
