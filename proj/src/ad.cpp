#include "isg/ad.hpp"

#include <cmath>
#include <string>

#include "isg/types.hpp"

namespace isg::ad {

namespace {

Tape& tape_of(const Var& a) {
  if (!a.valid()) throw InvalidArgument("ad: use of an empty Var");
  return *a.tape();
}

Tape& tape_of(const Var& a, const Var& b) {
  Tape& t = tape_of(a);
  if (b.tape() != &t) throw InvalidArgument("ad: operands live on different tapes");
  return t;
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ShapeError(std::string("ad::") + op + ": shape mismatch " + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(1 + exp(x)) without overflow.
double softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

}  // namespace

const Matrix& Var::value() const { return tape_of(*this).value(id_); }
const Matrix& Var::grad() const { return tape_of(*this).grad(id_); }

Var Tape::constant(Matrix value) {
  nodes_.push_back({std::move(value), Matrix(), false, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(Matrix value) {
  nodes_.push_back({std::move(value), Matrix(), true, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(Matrix value, std::span<const Var> parents, Backward backward) {
  bool needs = false;
  for (const auto& p : parents) {
    if (p.tape() != this) throw InvalidArgument("ad: operands live on different tapes");
    needs = needs || nodes_[p.id()].requires_grad;
  }
  nodes_.push_back({std::move(value), Matrix(), needs, needs ? std::move(backward) : Backward{}});
  return Var(this, nodes_.size() - 1);
}

const Matrix& Tape::grad(std::size_t id) const {
  const Node& n = nodes_[id];
  if (n.grad.size() == 0) n.grad = Matrix::Zero(n.value.rows(), n.value.cols());
  return n.grad;
}

void Tape::accumulate(std::size_t id, const Matrix& contribution) {
  Node& n = nodes_[id];
  if (!n.requires_grad) return;
  if (n.grad.size() == 0)
    n.grad = contribution;
  else
    n.grad += contribution;
}

void Tape::zero_grad() {
  for (auto& n : nodes_) n.grad.resize(0, 0);
}

void Tape::backward(const Var& out) {
  if (out.tape() != this) throw InvalidArgument("ad: backward on a Var from another tape");
  if (out.rows() != 1 || out.cols() != 1) throw ShapeError("ad: backward requires a 1x1 output");
  zero_grad();
  accumulate(out.id(), Matrix::Ones(1, 1));
  for (std::size_t i = out.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && n.grad.size() != 0) n.backward(*this, i);
  }
}

Var operator+(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a, b, "add");
  const auto ia = a.id(), ib = b.id();
  return t.record(a.value() + b.value(), {a, b}, [ia, ib](Tape& tp, std::size_t self) {
    const Matrix g = tp.grad(self);
    tp.accumulate(ia, g);
    tp.accumulate(ib, g);
  });
}

Var operator-(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a, b, "sub");
  const auto ia = a.id(), ib = b.id();
  return t.record(a.value() - b.value(), {a, b}, [ia, ib](Tape& tp, std::size_t self) {
    const Matrix g = tp.grad(self);
    tp.accumulate(ia, g);
    tp.accumulate(ib, -g);
  });
}

Var hadamard(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a, b, "hadamard");
  const auto ia = a.id(), ib = b.id();
  return t.record(a.value().cwiseProduct(b.value()), {a, b}, [ia, ib](Tape& tp, std::size_t self) {
    const Matrix g = tp.grad(self);
    tp.accumulate(ia, g.cwiseProduct(tp.value(ib)));
    tp.accumulate(ib, g.cwiseProduct(tp.value(ia)));
  });
}

Var matmul(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  if (a.cols() != b.rows()) throw ShapeError("ad::matmul: inner dimensions differ");
  const auto ia = a.id(), ib = b.id();
  return t.record(a.value() * b.value(), {a, b}, [ia, ib](Tape& tp, std::size_t self) {
    const Matrix g = tp.grad(self);
    if (tp.requires_grad(ia)) tp.accumulate(ia, g * tp.value(ib).transpose());
    if (tp.requires_grad(ib)) tp.accumulate(ib, tp.value(ia).transpose() * g);
  });
}

Var affine(const Var& weight, const Var& x, const Var& bias) {
  Tape& t = tape_of(weight, x);
  tape_of(weight, bias);
  if (weight.cols() != x.rows())
    throw ShapeError("ad::affine: weight is " + std::to_string(weight.rows()) + "x" + std::to_string(weight.cols()) +
                     " but input has " + std::to_string(x.rows()) + " rows");
  if (bias.rows() != weight.rows() || bias.cols() != 1) throw ShapeError("ad::affine: bias shape mismatch");
  Matrix out = weight.value() * x.value();
  out.colwise() += bias.value().col(0);
  const auto iw = weight.id(), ix = x.id(), ib = bias.id();
  return t.record(std::move(out), {weight, x, bias}, [iw, ix, ib](Tape& tp, std::size_t self) {
    const Matrix g = tp.grad(self);
    if (tp.requires_grad(iw)) tp.accumulate(iw, g * tp.value(ix).transpose());
    if (tp.requires_grad(ix)) tp.accumulate(ix, tp.value(iw).transpose() * g);
    if (tp.requires_grad(ib)) tp.accumulate(ib, g.rowwise().sum());
  });
}

Var scale(const Var& x, const Var& s) {
  Tape& t = tape_of(x, s);
  if (s.rows() != 1 || s.cols() != 1) throw ShapeError("ad::scale: scale must be 1x1");
  const auto ix = x.id(), is = s.id();
  return t.record(x.value() * s.scalar(), {x, s}, [ix, is](Tape& tp, std::size_t self) {
    const Matrix g = tp.grad(self);
    tp.accumulate(ix, g * tp.value(is)(0, 0));
    tp.accumulate(is, Matrix::Constant(1, 1, g.cwiseProduct(tp.value(ix)).sum()));
  });
}

Var scale(const Var& x, double s) {
  Tape& t = tape_of(x);
  const auto ix = x.id();
  return t.record(x.value() * s, {x}, [ix, s](Tape& tp, std::size_t self) { tp.accumulate(ix, tp.grad(self) * s); });
}

Var one_minus(const Var& x) {
  Tape& t = tape_of(x);
  const auto ix = x.id();
  Matrix v = (1.0 - x.value().array()).matrix();
  return t.record(std::move(v), {x}, [ix](Tape& tp, std::size_t self) { tp.accumulate(ix, -tp.grad(self)); });
}

Var sigmoid(const Var& x) {
  Tape& t = tape_of(x);
  const auto ix = x.id();
  Matrix v = x.value().unaryExpr([](double z) { return stable_sigmoid(z); });
  return t.record(std::move(v), {x}, [ix](Tape& tp, std::size_t self) {
    const Matrix& y = tp.value(self);
    tp.accumulate(ix, tp.grad(self).cwiseProduct(y.cwiseProduct((1.0 - y.array()).matrix())));
  });
}

Var tanh(const Var& x) {
  Tape& t = tape_of(x);
  const auto ix = x.id();
  Matrix v = x.value().array().tanh().matrix();
  return t.record(std::move(v), {x}, [ix](Tape& tp, std::size_t self) {
    const Matrix& y = tp.value(self);
    tp.accumulate(ix, tp.grad(self).cwiseProduct((1.0 - y.array().square()).matrix()));
  });
}

Var relu(const Var& x) {
  Tape& t = tape_of(x);
  const auto ix = x.id();
  Matrix v = x.value().cwiseMax(0.0);
  return t.record(std::move(v), {x}, [ix](Tape& tp, std::size_t self) {
    const Matrix mask = (tp.value(ix).array() > 0.0).cast<double>().matrix();
    tp.accumulate(ix, tp.grad(self).cwiseProduct(mask));
  });
}

Var vcat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("ad::vcat: nothing to concatenate");
  Tape& t = tape_of(parts[0]);
  Eigen::Index rows = 0;
  const Eigen::Index cols = parts[0].cols();
  for (const auto& p : parts) {
    tape_of(parts[0], p);
    if (p.cols() != cols) throw ShapeError("ad::vcat: column counts differ");
    rows += p.rows();
  }
  Matrix v(rows, cols);
  std::vector<std::pair<std::size_t, Eigen::Index>> slots;  // (id, row offset)
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    v.middleRows(off, p.rows()) = p.value();
    slots.emplace_back(p.id(), off);
    off += p.rows();
  }
  return t.record(std::move(v), parts, [slots](Tape& tp, std::size_t self) {
    const Matrix g = tp.grad(self);
    for (const auto& [id, offset] : slots)
      if (tp.requires_grad(id)) tp.accumulate(id, g.middleRows(offset, tp.value(id).rows()));
  });
}

Var hcat(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("ad::hcat: nothing to concatenate");
  Tape& t = tape_of(parts[0]);
  Eigen::Index cols = 0;
  const Eigen::Index rows = parts[0].rows();
  for (const auto& p : parts) {
    tape_of(parts[0], p);
    if (p.rows() != rows) throw ShapeError("ad::hcat: row counts differ");
    cols += p.cols();
  }
  Matrix v(rows, cols);
  std::vector<std::pair<std::size_t, Eigen::Index>> slots;
  Eigen::Index off = 0;
  for (const auto& p : parts) {
    v.middleCols(off, p.cols()) = p.value();
    slots.emplace_back(p.id(), off);
    off += p.cols();
  }
  return t.record(std::move(v), parts, [slots](Tape& tp, std::size_t self) {
    const Matrix g = tp.grad(self);
    for (const auto& [id, offset] : slots)
      if (tp.requires_grad(id)) tp.accumulate(id, g.middleCols(offset, tp.value(id).cols()));
  });
}

Var row_max(const Var& x) {
  Tape& t = tape_of(x);
  if (x.cols() == 0) throw ShapeError("ad::row_max: no columns");
  const Matrix& xv = x.value();
  Matrix v(xv.rows(), 1);
  std::vector<Eigen::Index> arg(static_cast<std::size_t>(xv.rows()));
  for (Eigen::Index r = 0; r < xv.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < xv.cols(); ++c)
      if (xv(r, c) > xv(r, best)) best = c;
    arg[static_cast<std::size_t>(r)] = best;
    v(r, 0) = xv(r, best);
  }
  const auto ix = x.id();
  const auto cols = xv.cols();
  return t.record(std::move(v), {x}, [ix, arg, cols](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad(self);
    Matrix gx = Matrix::Zero(g.rows(), cols);
    for (Eigen::Index r = 0; r < g.rows(); ++r) gx(r, arg[static_cast<std::size_t>(r)]) = g(r, 0);
    tp.accumulate(ix, gx);
  });
}

Var softmax(const Var& x) {
  Tape& t = tape_of(x);
  if (x.cols() != 1) throw ShapeError("ad::softmax: expects a column vector");
  const Eigen::VectorXd z = x.value().col(0);
  const Eigen::VectorXd e = (z.array() - z.maxCoeff()).exp();
  Matrix v = e / e.sum();
  const auto ix = x.id();
  return t.record(std::move(v), {x}, [ix](Tape& tp, std::size_t self) {
    const Matrix& y = tp.value(self);
    const Matrix& g = tp.grad(self);
    const double inner = g.cwiseProduct(y).sum();
    tp.accumulate(ix, y.cwiseProduct((g.array() - inner).matrix()));
  });
}

Var sum(const Var& x) {
  Tape& t = tape_of(x);
  const auto ix = x.id();
  const auto r = x.rows(), c = x.cols();
  return t.record(Matrix::Constant(1, 1, x.value().sum()), {x}, [ix, r, c](Tape& tp, std::size_t self) {
    tp.accumulate(ix, Matrix::Constant(r, c, tp.grad(self)(0, 0)));
  });
}

Var dot(const Var& a, const Var& b) {
  require_same_shape(a, b, "dot");
  return sum(hadamard(a, b));
}

Var mean(std::span<const Var> scalars) {
  if (scalars.empty()) throw ShapeError("ad::mean: empty list");
  return scale(sum(vcat(scalars)), 1.0 / static_cast<double>(scalars.size()));
}

Var cross_entropy_logits(const Var& logits, Eigen::Index target) {
  Tape& t = tape_of(logits);
  if (logits.cols() != 1) throw ShapeError("ad::cross_entropy_logits: expects a column vector");
  if (target < 0 || target >= logits.rows()) throw InvalidLabel("cross entropy target out of range");
  const Eigen::VectorXd z = logits.value().col(0);
  const double m = z.maxCoeff();
  const double lse = m + std::log((z.array() - m).exp().sum());
  const auto ix = logits.id();
  return t.record(Matrix::Constant(1, 1, lse - z(target)), {logits}, [ix, target](Tape& tp, std::size_t self) {
    const Eigen::VectorXd zz = tp.value(ix).col(0);
    const Eigen::VectorXd e = (zz.array() - zz.maxCoeff()).exp();
    Matrix g = e / e.sum();
    g(target, 0) -= 1.0;
    tp.accumulate(ix, g * tp.grad(self)(0, 0));
  });
}

Var bce_logits(const Var& logits, const Eigen::VectorXd& targets) {
  Tape& t = tape_of(logits);
  if (logits.cols() != 1 || logits.rows() != targets.size()) throw ShapeError("ad::bce_logits: shape mismatch");
  double total = 0.0;
  for (Eigen::Index i = 0; i < targets.size(); ++i) {
    const double z = logits.value()(i, 0), y = targets(i);
    // -[y log s(z) + (1-y) log(1-s(z))] = softplus(z) - y z
    total += softplus(z) - y * z;
  }
  const auto ix = logits.id();
  return t.record(Matrix::Constant(1, 1, total), {logits}, [ix, targets](Tape& tp, std::size_t self) {
    const Matrix& z = tp.value(ix);
    Matrix g(z.rows(), 1);
    for (Eigen::Index i = 0; i < z.rows(); ++i) g(i, 0) = stable_sigmoid(z(i, 0)) - targets(i);
    tp.accumulate(ix, g * tp.grad(self)(0, 0));
  });
}

}  // namespace isg::ad
