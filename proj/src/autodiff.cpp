#include "catte/autodiff.hpp"

#include <cmath>
#include <string>

#include "catte/errors.hpp"
#include "catte/specialmath.hpp"

namespace catte::ad {

namespace {

std::string shape_str(const Matrix& m) {
  return "(" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + ")";
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.tape() != b.tape()) {
    throw StructuralError(std::string(op) + ": operands live on different tapes");
  }
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw StructuralError(std::string(op) + ": shape mismatch " +
                          shape_str(a.value()) + " vs " + shape_str(b.value()));
  }
}

void require_scalar(const Var& s, const char* op) {
  if (s.rows() != 1 || s.cols() != 1) {
    throw StructuralError(std::string(op) + ": expected a 1x1 operand, got " +
                          shape_str(s.value()));
  }
}

// Applies f elementwise with derivative df (evaluated from input x and
// output y).
template <typename F, typename DF>
Var unary(const Var& a, F f, DF df) {
  Matrix out = a.value().unaryExpr(f);
  return a.tape()->push(std::move(out), {a}, [a, df](Tape& t, const Matrix& up) {
    const Matrix& x = a.value();
    Matrix g(x.rows(), x.cols());
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      g.data()[i] = up.data()[i] * df(x.data()[i]);
    }
    t.accumulate(a, g);
  });
}

}  // namespace

const Matrix& Var::value() const { return tape_->value(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.size() != 1) {
    throw StructuralError("scalar(): Var has shape " + shape_str(v));
  }
  return v(0, 0);
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, false, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(double value) {
  Matrix m(1, 1);
  m(0, 0) = value;
  return constant(std::move(m));
}

Var Tape::leaf(Matrix value) {
  nodes_.push_back(Node{std::move(value), {}, {}, record_, false});
  return Var(this, nodes_.size() - 1);
}

Var Tape::push(Matrix value, std::initializer_list<Var> parents, Backward backward) {
  return push(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
              std::move(backward));
}

Var Tape::push(Matrix value, std::span<const Var> parents, Backward backward) {
  bool needs = false;
  if (record_) {
    for (const Var& p : parents) {
      if (nodes_[p.id()].requires_grad) {
        needs = true;
        break;
      }
    }
  }
  Node node{std::move(value), {}, {}, needs, false};
  if (needs) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var(this, nodes_.size() - 1);
}

void Tape::accumulate(const Var& v, const Matrix& contribution) {
  Node& n = nodes_[v.id()];
  if (!n.requires_grad) return;
  if (!n.has_grad) {
    n.grad = contribution;
    n.has_grad = true;
  } else {
    n.grad += contribution;
  }
}

void Tape::backward(const Var& loss) {
  if (!record_) throw StructuralError("backward() on a non-recording tape");
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw StructuralError("backward(): loss must be 1x1, got " + shape_str(loss.value()));
  }
  for (Node& n : nodes_) {
    n.has_grad = false;
    n.grad.resize(0, 0);
  }
  Node& root = nodes_[loss.id()];
  if (!root.requires_grad) return;
  root.grad = Matrix::Ones(1, 1);
  root.has_grad = true;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.has_grad && n.backward) n.backward(*this, n.grad);
  }
}

Matrix Tape::grad(const Var& v) const {
  const Node& n = nodes_[v.id()];
  if (n.has_grad) return n.grad;
  return Matrix::Zero(n.value.rows(), n.value.cols());
}

Var add(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  return a.tape()->push(a.value() + b.value(), {a, b}, [a, b](Tape& t, const Matrix& up) {
    t.accumulate(a, up);
    t.accumulate(b, up);
  });
}

Var sub(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  return a.tape()->push(a.value() - b.value(), {a, b}, [a, b](Tape& t, const Matrix& up) {
    t.accumulate(a, up);
    t.accumulate(b, -up);
  });
}

Var mul(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  return a.tape()->push(a.value().cwiseProduct(b.value()), {a, b},
                        [a, b](Tape& t, const Matrix& up) {
                          t.accumulate(a, up.cwiseProduct(b.value()));
                          t.accumulate(b, up.cwiseProduct(a.value()));
                        });
}

Var div(const Var& a, const Var& b) {
  require_same_shape(a, b, "div");
  return a.tape()->push(a.value().cwiseQuotient(b.value()), {a, b},
                        [a, b](Tape& t, const Matrix& up) {
                          const Matrix& bv = b.value();
                          t.accumulate(a, up.cwiseQuotient(bv));
                          t.accumulate(b, -up.cwiseProduct(a.value())
                                              .cwiseQuotient(bv.cwiseProduct(bv)));
                        });
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    throw StructuralError("matmul: inner dimensions differ " + shape_str(a.value()) +
                          " * " + shape_str(b.value()));
  }
  return a.tape()->push(a.value() * b.value(), {a, b}, [a, b](Tape& t, const Matrix& up) {
    if (t.requires_grad(a)) t.accumulate(a, up * b.value().transpose());
    if (t.requires_grad(b)) t.accumulate(b, a.value().transpose() * up);
  });
}

Var scale(const Var& a, double factor) {
  return a.tape()->push(a.value() * factor, {a}, [a, factor](Tape& t, const Matrix& up) {
    t.accumulate(a, up * factor);
  });
}

Var add_constant(const Var& a, double c) {
  Matrix out = a.value().array() + c;
  return a.tape()->push(std::move(out), {a},
                        [a](Tape& t, const Matrix& up) { t.accumulate(a, up); });
}

Var neg(const Var& a) { return scale(a, -1.0); }

Var add_scalar(const Var& a, const Var& s) {
  require_scalar(s, "add_scalar");
  Matrix out = a.value().array() + s.scalar();
  return a.tape()->push(std::move(out), {a, s}, [a, s](Tape& t, const Matrix& up) {
    t.accumulate(a, up);
    t.accumulate(s, Matrix::Constant(1, 1, up.sum()));
  });
}

Var mul_scalar(const Var& a, const Var& s) {
  require_scalar(s, "mul_scalar");
  return a.tape()->push(a.value() * s.scalar(), {a, s}, [a, s](Tape& t, const Matrix& up) {
    t.accumulate(a, up * s.scalar());
    t.accumulate(s, Matrix::Constant(1, 1, up.cwiseProduct(a.value()).sum()));
  });
}

Var add_row(const Var& a, const Var& row) {
  if (row.rows() != 1 || row.cols() != a.cols()) {
    throw StructuralError("add_row: row " + shape_str(row.value()) +
                          " does not broadcast over " + shape_str(a.value()));
  }
  Matrix out = a.value();
  out.rowwise() += row.value().row(0);
  return a.tape()->push(std::move(out), {a, row}, [a, row](Tape& t, const Matrix& up) {
    t.accumulate(a, up);
    t.accumulate(row, up.colwise().sum());
  });
}

Var linear(const Var& x, const Var& weight, const Var& bias) {
  if (x.cols() != weight.rows() || bias.rows() != 1 || bias.cols() != weight.cols()) {
    throw StructuralError("linear: incompatible shapes x" + shape_str(x.value()) + " W" +
                          shape_str(weight.value()) + " b" + shape_str(bias.value()));
  }
  Matrix out = x.value() * weight.value();
  out.rowwise() += bias.value().row(0);
  return x.tape()->push(std::move(out), {x, weight, bias},
                        [x, weight, bias](Tape& t, const Matrix& up) {
                          if (t.requires_grad(x)) t.accumulate(x, up * weight.value().transpose());
                          if (t.requires_grad(weight)) {
                            t.accumulate(weight, x.value().transpose() * up);
                          }
                          if (t.requires_grad(bias)) t.accumulate(bias, up.colwise().sum());
                        });
}

Var broadcast_row(const Var& row, Eigen::Index n) {
  if (row.rows() != 1) throw StructuralError("broadcast_row: expected a row vector");
  Matrix out = row.value().replicate(n, 1);
  return row.tape()->push(std::move(out), {row}, [row](Tape& t, const Matrix& up) {
    t.accumulate(row, up.colwise().sum());
  });
}

Var sum(const Var& a) {
  return a.tape()->push(Matrix::Constant(1, 1, a.value().sum()), {a},
                        [a](Tape& t, const Matrix& up) {
                          t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), up(0, 0)));
                        });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.value().size());
  return scale(sum(a), 1.0 / n);
}

Var row_sum(const Var& a) {
  Matrix out = a.value().rowwise().sum();
  return a.tape()->push(std::move(out), {a}, [a](Tape& t, const Matrix& up) {
    t.accumulate(a, up.replicate(1, a.cols()));
  });
}

Var col_sum(const Var& a) {
  Matrix out = a.value().colwise().sum();
  return a.tape()->push(std::move(out), {a}, [a](Tape& t, const Matrix& up) {
    t.accumulate(a, up.replicate(a.rows(), 1));
  });
}

Var sin(const Var& a) {
  return unary(a, [](double x) { return std::sin(x); }, [](double x) { return std::cos(x); });
}

Var cos(const Var& a) {
  return unary(a, [](double x) { return std::cos(x); }, [](double x) { return -std::sin(x); });
}

Var tanh(const Var& a) {
  Matrix out = a.value().array().tanh();
  Tape* tape = a.tape();
  const std::size_t self = tape->size();
  return tape->push(std::move(out), {a}, [a, self](Tape& t, const Matrix& up) {
    const Matrix& y = t.value(self);
    t.accumulate(a, up.array() * (1.0 - y.array().square()));
  });
}

Var exp(const Var& a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

Var log(const Var& a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Var square(const Var& a) {
  return unary(a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

Var lgamma(const Var& a) {
  return unary(a, [](double x) { return catte::log_gamma(x); },
               [](double x) { return catte::digamma(x); });
}

Var digamma(const Var& a) {
  return unary(a, [](double x) { return catte::digamma(x); },
               [](double x) { return catte::trigamma(x); });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw StructuralError("concat_rows: no operands");
  const Eigen::Index cols = parts[0].cols();
  Eigen::Index rows = 0;
  for (const Var& p : parts) {
    if (p.cols() != cols) throw StructuralError("concat_rows: column counts differ");
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index r = 0;
  for (const Var& p : parts) {
    out.middleRows(r, p.rows()) = p.value();
    r += p.rows();
  }
  std::vector<Var> captured(parts.begin(), parts.end());
  return parts[0].tape()->push(std::move(out), parts,
                               [captured](Tape& t, const Matrix& up) {
                                 Eigen::Index r = 0;
                                 for (const Var& p : captured) {
                                   if (t.requires_grad(p)) t.accumulate(p, up.middleRows(r, p.rows()));
                                   r += p.rows();
                                 }
                               });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw StructuralError("concat_cols: no operands");
  const Eigen::Index rows = parts[0].rows();
  Eigen::Index cols = 0;
  for (const Var& p : parts) {
    if (p.rows() != rows) throw StructuralError("concat_cols: row counts differ");
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index c = 0;
  for (const Var& p : parts) {
    out.middleCols(c, p.cols()) = p.value();
    c += p.cols();
  }
  std::vector<Var> captured(parts.begin(), parts.end());
  return parts[0].tape()->push(std::move(out), parts,
                               [captured](Tape& t, const Matrix& up) {
                                 Eigen::Index c = 0;
                                 for (const Var& p : captured) {
                                   if (t.requires_grad(p)) t.accumulate(p, up.middleCols(c, p.cols()));
                                   c += p.cols();
                                 }
                               });
}

Var slice_cols(const Var& a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw StructuralError("slice_cols: range out of bounds for " + shape_str(a.value()));
  }
  Matrix out = a.value().middleCols(start, count);
  return a.tape()->push(std::move(out), {a}, [a, start, count](Tape& t, const Matrix& up) {
    Matrix g = Matrix::Zero(a.rows(), a.cols());
    g.middleCols(start, count) = up;
    t.accumulate(a, g);
  });
}

Var gather_rows(const Var& a, std::vector<Eigen::Index> index) {
  Matrix out(static_cast<Eigen::Index>(index.size()), a.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= a.rows()) {
      throw StructuralError("gather_rows: row index " + std::to_string(index[i]) +
                            " out of range for " + shape_str(a.value()));
    }
    out.row(static_cast<Eigen::Index>(i)) = a.value().row(index[i]);
  }
  return a.tape()->push(std::move(out), {a},
                        [a, index = std::move(index)](Tape& t, const Matrix& up) {
                          Matrix g = Matrix::Zero(a.rows(), a.cols());
                          for (std::size_t i = 0; i < index.size(); ++i) {
                            g.row(index[i]) += up.row(static_cast<Eigen::Index>(i));
                          }
                          t.accumulate(a, g);
                        });
}

}  // namespace catte::ad
