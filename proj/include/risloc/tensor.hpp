#pragma once

#include <Eigen/Core>
#include <functional>
#include <utility>
#include <vector>

namespace risloc::ad {

using Matrix = Eigen::MatrixXd;

class Tape;

// Lightweight handle into a tape. Copyable; values live in the tape.
class Var {
  friend class Tape;

 public:
  Var() = default;
  bool valid() const { return tape_ != nullptr; }
  int id() const { return id_; }
  Tape* tape() const { return tape_; }
  Eigen::Index rows() const;
  Eigen::Index cols() const;
  const Matrix& value() const;

 private:
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Records a forward program as it executes; backward() replays it in reverse,
// visiting each node exactly once. One tape per worker; no shared state.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Trainable input; receives a gradient and is listed by leaves().
  Var leaf(const Matrix& value);
  // Data input; gradients do not flow into it.
  Var constant(const Matrix& value);
  Var constant_scalar(double value);

  const Matrix& value(Var v) const;
  const Matrix& grad(Var v) const;
  std::vector<Var> leaves() const;
  std::size_t size() const { return nodes_.size(); }
  bool all_finite(Var v) const;

  // Reverse-mode sweep from a scalar loss. Throws DimensionError if the loss
  // is not 1x1 and NumericError if it is not finite.
  void backward(Var loss);

  Var matmul(Var a, Var b);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var add_col(Var x, Var bias);  // bias is rows x 1, broadcast over columns
  Var tile_cols(Var v, int n);   // v is rows x 1
  Var tanh(Var x);
  Var sigmoid(Var x);
  Var relu(Var x);
  Var square(Var x);
  Var scale(Var x, double k);
  Var add_scalar(Var x, double k);
  // out(r, c) = (x(r, c) + shift(r)) * gain(r); fixed standardization.
  Var row_affine(Var x, const Eigen::VectorXd& shift,
                 const Eigen::VectorXd& gain);
  Var sum(Var x);     // -> 1x1
  Var colsum(Var x);  // -> 1 x cols
  Var concat_rows(Var a, Var b);
  Var slice_rows(Var x, int first_row, int num_rows);

  // (re1 + j im1) * (re2 + j im2), elementwise.
  std::pair<Var, Var> complex_mul(Var re1, Var im1, Var re2, Var im2);

  // Elementwise projection onto the unit circle. Elements with squared
  // magnitude below 1e-24 map to 1 + 0j and pass no gradient.
  std::pair<Var, Var> unit_normalize(Var re, Var im);

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    std::function<void(Tape&, int)> backprop;  // empty for inputs
  };

  Var record(Matrix value, bool requires_grad,
             std::function<void(Tape&, int)> backprop);
  Node& node(Var v);
  const Node& node(Var v) const;
  void check_same_tape(Var v) const;
  Matrix& grad_ref(int id) { return nodes_[static_cast<std::size_t>(id)].grad; }
  bool wants_grad(int id) const {
    return nodes_[static_cast<std::size_t>(id)].requires_grad;
  }

  std::vector<Node> nodes_;
  std::vector<int> leaf_ids_;
};

}  // namespace risloc::ad
