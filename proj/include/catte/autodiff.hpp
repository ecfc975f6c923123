#pragma once

// Reverse-mode automatic differentiation over dense row-major matrices.
//
// A Tape owns every intermediate value of one forward evaluation. Nodes are
// appended in evaluation order, so insertion order is a topological order and
// backward() walks it once in reverse. Vars are lightweight handles
// (tape pointer + node id); they must not outlive their tape.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace catte::ad {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

class Tape;

class Var {
 public:
  Var() = default;

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  /// Value of a 1x1 Var.
  double scalar() const;

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  /// Receives the upstream gradient of the node; accumulates into parents.
  using Backward = std::function<void(Tape&, const Matrix& upstream)>;

  /// With record_gradients == false no backward closures are stored and
  /// backward() is unavailable; used for inference.
  explicit Tape(bool record_gradients = true) : record_(record_gradients) {}

  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var constant(double value);
  /// A differentiable input (model parameter).
  Var leaf(Matrix value);

  /// Appends a node. `parents` decide whether the node is differentiable; the
  /// closure is dropped when none of them is.
  Var push(Matrix value, std::initializer_list<Var> parents, Backward backward);
  Var push(Matrix value, std::span<const Var> parents, Backward backward);

  bool requires_grad(const Var& v) const { return nodes_[v.id()].requires_grad; }
  bool recording() const { return record_; }

  /// Adds `contribution` to the gradient of `v` (no-op for constants).
  void accumulate(const Var& v, const Matrix& contribution);

  /// Seeds d loss / d loss = 1 and propagates to every node.
  /// Throws StructuralError unless loss is 1x1.
  void backward(const Var& loss);

  /// Gradient of the last backward() w.r.t. v; zeros if v was not reached.
  Matrix grad(const Var& v) const;

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    Backward backward;
    bool requires_grad = false;
    bool has_grad = false;
  };

  std::vector<Node> nodes_;
  bool record_;
};

// Elementwise binary ops require identical shapes.
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var div(const Var& a, const Var& b);
Var matmul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var add_constant(const Var& a, double c);
Var neg(const Var& a);

/// Every element of `a` combined with the 1x1 Var `s`.
Var add_scalar(const Var& a, const Var& s);
Var mul_scalar(const Var& a, const Var& s);

/// a (n x m) plus a 1 x m row broadcast over all rows.
Var add_row(const Var& a, const Var& row);
/// x W + b with b a row vector; the fused affine layer.
Var linear(const Var& x, const Var& weight, const Var& bias);
/// Repeats a 1 x m row n times.
Var broadcast_row(const Var& row, Eigen::Index n);

Var sum(const Var& a);
Var mean(const Var& a);
/// n x m -> n x 1
Var row_sum(const Var& a);
/// n x m -> 1 x m
Var col_sum(const Var& a);

Var sin(const Var& a);
Var cos(const Var& a);
Var tanh(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var square(const Var& a);
Var lgamma(const Var& a);
Var digamma(const Var& a);

Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count);
/// out.row(i) = a.row(index[i]); gradients scatter-add back.
Var gather_rows(const Var& a, std::vector<Eigen::Index> index);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }
inline Var operator/(const Var& a, const Var& b) { return div(a, b); }
inline Var operator*(double s, const Var& a) { return scale(a, s); }
inline Var operator-(const Var& a) { return neg(a); }

}  // namespace catte::ad
