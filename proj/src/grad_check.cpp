#include "risloc/grad_check.hpp"

#include <cmath>

#include "risloc/errors.hpp"

namespace risloc::ad {

namespace {

double eval_loss(const GraphBuilder& builder, const std::vector<Matrix>& params) {
  Tape tape;
  Var loss = builder(tape, params);
  return loss.value()(0, 0);
}

}  // namespace

GradCheckReport grad_check(const GraphBuilder& builder,
                           const std::vector<Matrix>& params,
                           const std::vector<std::string>& names,
                           double h) {
  Tape tape;
  Var loss = builder(tape, params);
  tape.backward(loss);
  std::vector<Var> leaves = tape.leaves();
  if (leaves.size() != params.size())
    throw DimensionError("grad_check: builder created a different leaf count");

  GradCheckReport report;
  std::vector<Matrix> work = params;
  for (std::size_t p = 0; p < params.size(); ++p) {
    const Matrix analytic = tape.grad(leaves[p]);
    for (Eigen::Index r = 0; r < params[p].rows(); ++r) {
      for (Eigen::Index c = 0; c < params[p].cols(); ++c) {
        const double save = work[p](r, c);
        work[p](r, c) = save + h;
        const double hi = eval_loss(builder, work);
        work[p](r, c) = save - h;
        const double lo = eval_loss(builder, work);
        work[p](r, c) = save;
        const double fd = (hi - lo) / (2.0 * h);
        const double an = analytic(r, c);
        const double denom = std::max({std::abs(an), std::abs(fd), 1.0});
        const double rel = std::abs(an - fd) / denom;
        report.checked += 1;
        if (rel > report.max_rel_error) {
          report.max_rel_error = rel;
          report.worst_param = p < names.size() ? names[p] : "";
          report.worst_row = static_cast<int>(r);
          report.worst_col = static_cast<int>(c);
        }
      }
    }
  }
  return report;
}

}  // namespace risloc::ad
