#pragma once

#include <cstdint>
#include <string>

#include "risloc/grad_check.hpp"

namespace risloc::ad {

struct SuiteResult {
  int graphs = 0;
  double max_rel_error = 0.0;
  std::string worst_graph;
  double seconds = 0.0;
};

// Finite-difference validation across `random_graphs` randomly composed
// programs over the primitive set plus reduced-width policy-step graphs
// (one per feature mode). Generation respects kink margins: relu only on
// values at least 1e-3 from zero, normalization only on magnitudes >= 1e-2.
SuiteResult run_grad_check_suite(int random_graphs, std::uint64_t seed,
                                 double fd_step = 1e-4);

}  // namespace risloc::ad
