#include "risloc/tensor.hpp"

#include <cmath>
#include <memory>

#include "risloc/errors.hpp"

namespace risloc::ad {

Eigen::Index Var::rows() const { return value().rows(); }
Eigen::Index Var::cols() const { return value().cols(); }
const Matrix& Var::value() const { return tape_->value(*this); }

Tape::Node& Tape::node(Var v) {
  check_same_tape(v);
  return nodes_[static_cast<std::size_t>(v.id())];
}

const Tape::Node& Tape::node(Var v) const {
  check_same_tape(v);
  return nodes_[static_cast<std::size_t>(v.id())];
}

void Tape::check_same_tape(Var v) const {
  if (v.tape() != this || v.id() < 0 ||
      static_cast<std::size_t>(v.id()) >= nodes_.size())
    throw DimensionError("tensor: variable does not belong to this tape");
}

Var Tape::record(Matrix value, bool requires_grad,
                 std::function<void(Tape&, int)> backprop) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.backprop = std::move(backprop);
  nodes_.push_back(std::move(n));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::leaf(const Matrix& value) {
  Var v = record(value, true, nullptr);
  leaf_ids_.push_back(v.id());
  return v;
}

Var Tape::constant(const Matrix& value) { return record(value, false, nullptr); }

Var Tape::constant_scalar(double value) {
  Matrix m(1, 1);
  m(0, 0) = value;
  return constant(m);
}

const Matrix& Tape::value(Var v) const { return node(v).value; }

const Matrix& Tape::grad(Var v) const {
  const Node& n = node(v);
  if (!n.requires_grad)
    throw DimensionError("tensor: gradient requested for a constant");
  return n.grad;
}

std::vector<Var> Tape::leaves() const {
  std::vector<Var> out;
  out.reserve(leaf_ids_.size());
  for (int id : leaf_ids_) out.push_back(Var(const_cast<Tape*>(this), id));
  return out;
}

bool Tape::all_finite(Var v) const { return node(v).value.allFinite(); }

void Tape::backward(Var loss) {
  const Node& top = node(loss);
  if (top.value.rows() != 1 || top.value.cols() != 1)
    throw DimensionError("backward: loss must be a 1x1 scalar");
  if (!top.value.allFinite())
    throw NumericError("backward: loss is not finite");
  if (!top.requires_grad)
    throw DimensionError("backward: loss does not depend on any leaf");

  const int last = loss.id();
  for (int i = 0; i <= last; ++i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.requires_grad)
      n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  }
  nodes_[static_cast<std::size_t>(last)].grad(0, 0) = 1.0;
  for (int i = last; i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (n.requires_grad && n.backprop) n.backprop(*this, i);
  }
}

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw DimensionError(what);
}

}  // namespace

Var Tape::matmul(Var a, Var b) {
  require(a.value().cols() == b.value().rows(), "matmul: inner dims differ");
  const int ia = a.id(), ib = b.id();
  const bool rg = wants_grad(ia) || wants_grad(ib);
  Matrix out = a.value() * b.value();
  return record(std::move(out), rg, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad_ref(self);
    if (t.wants_grad(ia))
      t.grad_ref(ia).noalias() += g * t.nodes_[ib].value.transpose();
    if (t.wants_grad(ib))
      t.grad_ref(ib).noalias() += t.nodes_[ia].value.transpose() * g;
  });
}

Var Tape::add(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  const int ia = a.id(), ib = b.id();
  const bool rg = wants_grad(ia) || wants_grad(ib);
  return record(a.value() + b.value(), rg, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad_ref(self);
    if (t.wants_grad(ia)) t.grad_ref(ia) += g;
    if (t.wants_grad(ib)) t.grad_ref(ib) += g;
  });
}

Var Tape::sub(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
  const int ia = a.id(), ib = b.id();
  const bool rg = wants_grad(ia) || wants_grad(ib);
  return record(a.value() - b.value(), rg, [ia, ib](Tape& t, int self) {
    const Matrix& g = t.grad_ref(self);
    if (t.wants_grad(ia)) t.grad_ref(ia) += g;
    if (t.wants_grad(ib)) t.grad_ref(ib) -= g;
  });
}

Var Tape::mul(Var a, Var b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "mul: shape mismatch");
  const int ia = a.id(), ib = b.id();
  const bool rg = wants_grad(ia) || wants_grad(ib);
  return record(a.value().cwiseProduct(b.value()), rg,
                [ia, ib](Tape& t, int self) {
                  const Matrix& g = t.grad_ref(self);
                  if (t.wants_grad(ia))
                    t.grad_ref(ia) += g.cwiseProduct(t.nodes_[ib].value);
                  if (t.wants_grad(ib))
                    t.grad_ref(ib) += g.cwiseProduct(t.nodes_[ia].value);
                });
}

Var Tape::add_col(Var x, Var bias) {
  require(bias.cols() == 1 && bias.rows() == x.rows(),
          "add_col: bias must be rows x 1");
  const int ix = x.id(), ib = bias.id();
  const bool rg = wants_grad(ix) || wants_grad(ib);
  Matrix out = x.value();
  out.colwise() += bias.value().col(0);
  return record(std::move(out), rg, [ix, ib](Tape& t, int self) {
    const Matrix& g = t.grad_ref(self);
    if (t.wants_grad(ix)) t.grad_ref(ix) += g;
    if (t.wants_grad(ib)) t.grad_ref(ib) += g.rowwise().sum();
  });
}

Var Tape::tile_cols(Var v, int n) {
  require(v.cols() == 1, "tile_cols: input must be rows x 1");
  require(n >= 1, "tile_cols: need n >= 1");
  const int iv = v.id();
  return record(v.value().replicate(1, n), wants_grad(iv),
                [iv](Tape& t, int self) {
                  if (t.wants_grad(iv))
                    t.grad_ref(iv) += t.grad_ref(self).rowwise().sum();
                });
}

Var Tape::tanh(Var x) {
  const int ix = x.id();
  Matrix out = x.value().array().tanh();
  return record(std::move(out), wants_grad(ix), [ix](Tape& t, int self) {
    if (!t.wants_grad(ix)) return;
    const Matrix& y = t.nodes_[self].value;
    t.grad_ref(ix).array() +=
        t.grad_ref(self).array() * (1.0 - y.array().square());
  });
}

Var Tape::sigmoid(Var x) {
  const int ix = x.id();
  Matrix out = (1.0 + (-x.value().array()).exp()).inverse();
  return record(std::move(out), wants_grad(ix), [ix](Tape& t, int self) {
    if (!t.wants_grad(ix)) return;
    const Matrix& y = t.nodes_[self].value;
    t.grad_ref(ix).array() +=
        t.grad_ref(self).array() * y.array() * (1.0 - y.array());
  });
}

Var Tape::relu(Var x) {
  const int ix = x.id();
  Matrix out = x.value().cwiseMax(0.0);
  return record(std::move(out), wants_grad(ix), [ix](Tape& t, int self) {
    if (!t.wants_grad(ix)) return;
    const Matrix& in = t.nodes_[ix].value;
    t.grad_ref(ix).array() +=
        t.grad_ref(self).array() * (in.array() > 0.0).cast<double>();
  });
}

Var Tape::square(Var x) {
  const int ix = x.id();
  return record(x.value().array().square(), wants_grad(ix),
                [ix](Tape& t, int self) {
                  if (!t.wants_grad(ix)) return;
                  t.grad_ref(ix).array() += 2.0 * t.grad_ref(self).array() *
                                            t.nodes_[ix].value.array();
                });
}

Var Tape::scale(Var x, double k) {
  const int ix = x.id();
  return record(k * x.value(), wants_grad(ix), [ix, k](Tape& t, int self) {
    if (t.wants_grad(ix)) t.grad_ref(ix) += k * t.grad_ref(self);
  });
}

Var Tape::add_scalar(Var x, double k) {
  const int ix = x.id();
  return record(x.value().array() + k, wants_grad(ix), [ix](Tape& t, int self) {
    if (t.wants_grad(ix)) t.grad_ref(ix) += t.grad_ref(self);
  });
}

Var Tape::row_affine(Var x, const Eigen::VectorXd& shift,
                     const Eigen::VectorXd& gain) {
  require(shift.size() == x.rows() && gain.size() == x.rows(),
          "row_affine: shift/gain must match rows");
  const int ix = x.id();
  Matrix out = x.value();
  out.colwise() += shift;
  out.array().colwise() *= gain.array();
  auto gain_copy = std::make_shared<Eigen::VectorXd>(gain);
  return record(std::move(out), wants_grad(ix),
                [ix, gain_copy](Tape& t, int self) {
                  if (!t.wants_grad(ix)) return;
                  Matrix g = t.grad_ref(self);
                  g.array().colwise() *= gain_copy->array();
                  t.grad_ref(ix) += g;
                });
}

Var Tape::sum(Var x) {
  const int ix = x.id();
  Matrix out(1, 1);
  out(0, 0) = x.value().sum();
  return record(std::move(out), wants_grad(ix), [ix](Tape& t, int self) {
    if (!t.wants_grad(ix)) return;
    t.grad_ref(ix).array() += t.grad_ref(self)(0, 0);
  });
}

Var Tape::colsum(Var x) {
  const int ix = x.id();
  Matrix out = x.value().colwise().sum();
  return record(std::move(out), wants_grad(ix), [ix](Tape& t, int self) {
    if (!t.wants_grad(ix)) return;
    const Matrix& g = t.grad_ref(self);  // 1 x cols
    t.grad_ref(ix).rowwise() += g.row(0);
  });
}

Var Tape::concat_rows(Var a, Var b) {
  require(a.cols() == b.cols(), "concat_rows: column count differs");
  const int ia = a.id(), ib = b.id();
  const bool rg = wants_grad(ia) || wants_grad(ib);
  Matrix out(a.rows() + b.rows(), a.cols());
  out.topRows(a.rows()) = a.value();
  out.bottomRows(b.rows()) = b.value();
  const int ra = static_cast<int>(a.rows()), rb = static_cast<int>(b.rows());
  return record(std::move(out), rg, [ia, ib, ra, rb](Tape& t, int self) {
    const Matrix& g = t.grad_ref(self);
    if (t.wants_grad(ia)) t.grad_ref(ia) += g.topRows(ra);
    if (t.wants_grad(ib)) t.grad_ref(ib) += g.bottomRows(rb);
  });
}

Var Tape::slice_rows(Var x, int first_row, int num_rows) {
  require(first_row >= 0 && num_rows >= 1 &&
              first_row + num_rows <= x.rows(),
          "slice_rows: range out of bounds");
  const int ix = x.id();
  return record(x.value().middleRows(first_row, num_rows), wants_grad(ix),
                [ix, first_row, num_rows](Tape& t, int self) {
                  if (!t.wants_grad(ix)) return;
                  t.grad_ref(ix).middleRows(first_row, num_rows) +=
                      t.grad_ref(self);
                });
}

std::pair<Var, Var> Tape::complex_mul(Var re1, Var im1, Var re2, Var im2) {
  Var re = sub(mul(re1, re2), mul(im1, im2));
  Var im = add(mul(re1, im2), mul(im1, re2));
  return {re, im};
}

std::pair<Var, Var> Tape::unit_normalize(Var re, Var im) {
  require(re.rows() == im.rows() && re.cols() == im.cols(),
          "unit_normalize: shape mismatch");
  const int ir = re.id(), ii = im.id();
  const bool rg = wants_grad(ir) || wants_grad(ii);

  const Eigen::ArrayXXd r = re.value().array();
  const Eigen::ArrayXXd i = im.value().array();
  const Eigen::ArrayXXd m2 = r.square() + i.square();
  const auto singular = m2 < 1e-24;
  const Eigen::ArrayXXd m = m2.sqrt();
  const Eigen::ArrayXXd m3 = m * m2;

  Matrix out_re = singular.select(1.0, r / m);
  Matrix out_im = singular.select(0.0, i / m);

  // Shared partials; gradients through singular elements are zeroed.
  struct Partials {
    Eigen::ArrayXXd drr, dri, dii;
  };
  auto p = std::make_shared<Partials>();
  const Eigen::ArrayXXd zero = Eigen::ArrayXXd::Zero(r.rows(), r.cols());
  p->drr = singular.select(zero, i.square() / m3);
  p->dri = singular.select(zero, -(r * i) / m3);
  p->dii = singular.select(zero, r.square() / m3);

  Var vre = record(std::move(out_re), rg, [ir, ii, p](Tape& t, int self) {
    const Eigen::ArrayXXd g = t.grad_ref(self).array();
    if (t.wants_grad(ir)) t.grad_ref(ir).array() += g * p->drr;
    if (t.wants_grad(ii)) t.grad_ref(ii).array() += g * p->dri;
  });
  Var vim = record(std::move(out_im), rg, [ir, ii, p](Tape& t, int self) {
    const Eigen::ArrayXXd g = t.grad_ref(self).array();
    if (t.wants_grad(ir)) t.grad_ref(ir).array() += g * p->dri;
    if (t.wants_grad(ii)) t.grad_ref(ii).array() += g * p->dii;
  });
  return {vre, vim};
}

}  // namespace risloc::ad
