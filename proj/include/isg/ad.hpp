#pragma once

#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace isg::ad {

using Matrix = Eigen::MatrixXd;

class Tape;

/// Handle to a node on a Tape. Cheap to copy; only valid while its tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  const Matrix& grad() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const { return value()(0, 0); }

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode recording of matrix-valued operations. Nodes are appended in
/// evaluation order, so a reverse sweep over the node list is a valid
/// topological order for backpropagation.
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  Var constant(Matrix value);
  /// Leaf whose gradient is accumulated by backward().
  Var parameter(Matrix value);

  /// Seeds d(out)/d(out) = 1 for a 1x1 output and sweeps the tape backwards.
  void backward(const Var& out);
  void zero_grad();

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  /// Gradient of a node; a zero matrix of the right shape if none reached it.
  const Matrix& grad(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // Used by operation implementations.
  Var record(Matrix value, std::span<const Var> parents, Backward backward);
  Var record(Matrix value, std::initializer_list<Var> parents, Backward backward) {
    return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()), std::move(backward));
  }
  void accumulate(std::size_t id, const Matrix& contribution);

 private:
  struct Node {
    Matrix value;
    mutable Matrix grad;
    bool requires_grad = false;
    Backward backward;
  };
  std::vector<Node> nodes_;
};

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
/// Elementwise product.
Var hadamard(const Var& a, const Var& b);
/// Matrix product.
Var matmul(const Var& a, const Var& b);
/// W * X + b, with the bias column broadcast over the columns of X.
Var affine(const Var& weight, const Var& x, const Var& bias);
/// x scaled by a 1x1 variable.
Var scale(const Var& x, const Var& s);
Var scale(const Var& x, double s);
Var one_minus(const Var& x);

Var sigmoid(const Var& x);
Var tanh(const Var& x);
Var relu(const Var& x);

/// Stack vertically (equal column counts).
Var vcat(std::span<const Var> parts);
/// Stack horizontally (equal row counts).
Var hcat(std::span<const Var> parts);
/// Per-row maximum over columns; the gradient flows to the first maximal column.
Var row_max(const Var& x);

/// Softmax of a column vector.
Var softmax(const Var& x);
/// Sum of all entries (1x1).
Var sum(const Var& x);
/// Inner product of two column vectors (1x1).
Var dot(const Var& a, const Var& b);
/// Average of 1x1 variables (1x1). Requires a non-empty list.
Var mean(std::span<const Var> scalars);

/// -log softmax(logits)[target] (1x1), computed with log-sum-exp.
Var cross_entropy_logits(const Var& logits, Eigen::Index target);
/// Sum over entries of binary cross entropy between sigmoid(logits) and targets in {0,1}.
Var bce_logits(const Var& logits, const Eigen::VectorXd& targets);

}  // namespace isg::ad
