#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace risloc {

// Ordered name -> matrix map. Order is the contract: optimizer state,
// checkpoints and gradient reduction all walk it by index.
struct NamedParams {
  std::vector<std::string> names;
  std::vector<Eigen::MatrixXd> values;

  std::size_t size() const { return values.size(); }
  void add(std::string name, Eigen::MatrixXd value) {
    names.push_back(std::move(name));
    values.push_back(std::move(value));
  }
  int index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i)
      if (names[i] == name) return static_cast<int>(i);
    return -1;
  }
  std::size_t scalar_count() const {
    std::size_t n = 0;
    for (const auto& v : values) n += static_cast<std::size_t>(v.size());
    return n;
  }
};

// Gradients congruent to a NamedParams, reduced across workers by index.
using GradSet = std::vector<Eigen::MatrixXd>;

GradSet zero_grads_like(const NamedParams& params);
void accumulate(GradSet& into, const GradSet& from);
double global_norm(const GradSet& grads);
// Scales grads in place so the global norm is at most max_norm.
void clip_global_norm(GradSet& grads, double max_norm);

}  // namespace risloc
