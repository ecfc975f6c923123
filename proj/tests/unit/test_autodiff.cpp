#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include <doctest.h>

#include "catte/autodiff.hpp"
#include "catte/errors.hpp"

using namespace catte;
using ad::Matrix;
using ad::Tape;
using ad::Var;

namespace {

Matrix random_matrix(Eigen::Index r, Eigen::Index c, std::mt19937_64& rng, double lo = -1.0,
                     double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

// f maps the leaves to a Var of any shape; the scalar loss is sum(f * W)
// with a fixed random weight W so every output element matters.
using Fn = std::function<Var(Tape&, const std::vector<Var>&)>;

double max_fd_error(const Fn& f, std::vector<Matrix> inputs, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Matrix weight;
  auto loss_of = [&](const std::vector<Matrix>& xs, std::vector<Matrix>* grads) {
    Tape tape;
    std::vector<Var> leaves;
    for (const Matrix& x : xs) leaves.push_back(tape.leaf(x));
    const Var out = f(tape, leaves);
    if (weight.size() == 0) weight = random_matrix(out.rows(), out.cols(), rng);
    const Var loss = ad::sum(ad::mul(out, tape.constant(weight)));
    if (grads) {
      tape.backward(loss);
      for (const Var& l : leaves) grads->push_back(tape.grad(l));
    }
    return loss.scalar();
  };
  std::vector<Matrix> grads;
  loss_of(inputs, &grads);
  double worst = 0.0;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    for (Eigen::Index i = 0; i < inputs[k].size(); ++i) {
      const double keep = inputs[k].data()[i];
      const double h = 1e-6 * std::max(1.0, std::abs(keep));
      inputs[k].data()[i] = keep + h;
      const double up = loss_of(inputs, nullptr);
      inputs[k].data()[i] = keep - h;
      const double down = loss_of(inputs, nullptr);
      inputs[k].data()[i] = keep;
      const double fd = (up - down) / (2.0 * h);
      const double a = grads[k].data()[i];
      worst = std::max(worst, std::abs(a - fd) / std::max(1.0, std::abs(fd)));
    }
  }
  return worst;
}

}  // namespace

TEST_SUITE("autodiff") {

TEST_CASE("every primitive matches central differences") {
  std::mt19937_64 rng(1);
  const Matrix a = random_matrix(3, 4, rng), b = random_matrix(3, 4, rng);
  const Matrix pos = random_matrix(3, 4, rng, 0.5, 3.0);
  const Matrix w = random_matrix(4, 2, rng), bias = random_matrix(1, 2, rng);
  const Matrix row = random_matrix(1, 4, rng), s = random_matrix(1, 1, rng);
  const double tol = 1e-7;

  SUBCASE("add") { CHECK(max_fd_error([](Tape&, auto& v) { return v[0] + v[1]; }, {a, b}, 1) < tol); }
  SUBCASE("sub") { CHECK(max_fd_error([](Tape&, auto& v) { return v[0] - v[1]; }, {a, b}, 2) < tol); }
  SUBCASE("mul") { CHECK(max_fd_error([](Tape&, auto& v) { return v[0] * v[1]; }, {a, b}, 3) < tol); }
  SUBCASE("div") { CHECK(max_fd_error([](Tape&, auto& v) { return v[0] / v[1]; }, {a, pos}, 4) < tol); }
  SUBCASE("matmul") { CHECK(max_fd_error([](Tape&, auto& v) { return ad::matmul(v[0], v[1]); }, {a, w}, 5) < tol); }
  SUBCASE("scale") { CHECK(max_fd_error([](Tape&, auto& v) { return 2.5 * v[0]; }, {a}, 6) < tol); }
  SUBCASE("add_constant") { CHECK(max_fd_error([](Tape&, auto& v) { return ad::add_constant(v[0], 0.7); }, {a}, 7) < tol); }
  SUBCASE("neg") { CHECK(max_fd_error([](Tape&, auto& v) { return -v[0]; }, {a}, 8) < tol); }
  SUBCASE("add_scalar") { CHECK(max_fd_error([](Tape&, auto& v) { return ad::add_scalar(v[0], v[1]); }, {a, s}, 9) < tol); }
  SUBCASE("mul_scalar") { CHECK(max_fd_error([](Tape&, auto& v) { return ad::mul_scalar(v[0], v[1]); }, {a, s}, 10) < tol); }
  SUBCASE("add_row") { CHECK(max_fd_error([](Tape&, auto& v) { return ad::add_row(v[0], v[1]); }, {a, row}, 11) < tol); }
  SUBCASE("linear") { CHECK(max_fd_error([](Tape&, auto& v) { return ad::linear(v[0], v[1], v[2]); }, {a, w, bias}, 12) < tol); }
  SUBCASE("broadcast_row") { CHECK(max_fd_error([](Tape&, auto& v) { return ad::broadcast_row(v[0], 5); }, {row}, 13) < tol); }
  SUBCASE("sum") { CHECK(max_fd_error([](Tape&, auto& v) { return ad::sum(v[0]); }, {a}, 14) < tol); }
  SUBCASE("mean") { CHECK(max_fd_error([](Tape&, auto& v) { return ad::mean(v[0]); }, {a}, 15) < tol); }
  SUBCASE("row_sum") { CHECK(max_fd_error([](Tape&, auto& v) { return ad::row_sum(v[0]); }, {a}, 16) < tol); }
  SUBCASE("col_sum") { CHECK(max_fd_error([](Tape&, auto& v) { return ad::col_sum(v[0]); }, {a}, 17) < tol); }
  SUBCASE("sin") { CHECK(max_fd_error([](Tape&, auto& v) { return ad::sin(v[0]); }, {a}, 18) < tol); }
  SUBCASE("cos") { CHECK(max_fd_error([](Tape&, auto& v) { return ad::cos(v[0]); }, {a}, 19) < tol); }
  SUBCASE("tanh") { CHECK(max_fd_error([](Tape&, auto& v) { return ad::tanh(v[0]); }, {a}, 20) < tol); }
  SUBCASE("exp") { CHECK(max_fd_error([](Tape&, auto& v) { return ad::exp(v[0]); }, {a}, 21) < tol); }
  SUBCASE("log") { CHECK(max_fd_error([](Tape&, auto& v) { return ad::log(v[0]); }, {pos}, 22) < tol); }
  SUBCASE("square") { CHECK(max_fd_error([](Tape&, auto& v) { return ad::square(v[0]); }, {a}, 23) < tol); }
  SUBCASE("lgamma") { CHECK(max_fd_error([](Tape&, auto& v) { return ad::lgamma(v[0]); }, {pos}, 24) < tol); }
  SUBCASE("digamma") { CHECK(max_fd_error([](Tape&, auto& v) { return ad::digamma(v[0]); }, {pos}, 25) < 1e-6); }
  SUBCASE("concat_rows") {
    CHECK(max_fd_error([](Tape&, auto& v) { return ad::concat_rows(std::vector<Var>{v[0], v[1]}); }, {a, b}, 26) < tol);
  }
  SUBCASE("concat_cols") {
    CHECK(max_fd_error([](Tape&, auto& v) { return ad::concat_cols(std::vector<Var>{v[0], v[1]}); }, {a, b}, 27) < tol);
  }
  SUBCASE("slice_cols") { CHECK(max_fd_error([](Tape&, auto& v) { return ad::slice_cols(v[0], 1, 2); }, {a}, 28) < tol); }
  SUBCASE("gather_rows with repeats") {
    CHECK(max_fd_error([](Tape&, auto& v) { return ad::gather_rows(v[0], {2, 0, 2, 1, 2}); }, {a}, 29) < tol);
  }
  SUBCASE("composite") {
    CHECK(max_fd_error(
              [](Tape&, auto& v) {
                return ad::tanh(ad::linear(ad::sin(v[0]), v[1], v[2])) * ad::tanh(ad::linear(v[0], v[1], v[2]));
              },
              {a, w, bias}, 30) < tol);
  }
}

TEST_CASE("fan-out accumulates gradients") {
  Tape tape;
  const Var x = tape.leaf(Matrix::Constant(1, 1, 3.0));
  const Var y = x * x + 2.0 * x + x;  // dy/dx = 2x + 3
  tape.backward(y);
  CHECK(tape.grad(x)(0, 0) == doctest::Approx(9.0));
}

TEST_CASE("constants receive no gradient and drop their closures") {
  Tape tape;
  const Var c = tape.constant(Matrix::Ones(2, 2));
  const Var d = ad::exp(c) * c;
  CHECK_FALSE(tape.requires_grad(d));
  const Var x = tape.leaf(Matrix::Ones(2, 2));
  tape.backward(ad::sum(d * x));
  CHECK(tape.grad(c).isZero());
  CHECK(tape.grad(x).isApprox(d.value()));
}

TEST_CASE("unreached leaves have zero gradient") {
  Tape tape;
  const Var x = tape.leaf(Matrix::Ones(2, 3));
  const Var unused = tape.leaf(Matrix::Ones(4, 1));
  tape.backward(ad::sum(x));
  CHECK(tape.grad(unused).rows() == 4);
  CHECK(tape.grad(unused).isZero());
}

TEST_CASE("backward twice gives the same gradient") {
  Tape tape;
  const Var x = tape.leaf(Matrix::Constant(2, 2, 0.3));
  const Var loss = ad::sum(ad::square(ad::tanh(x)));
  tape.backward(loss);
  const Matrix first = tape.grad(x);
  tape.backward(loss);
  CHECK(tape.grad(x) == first);
}

TEST_CASE("structural errors") {
  Tape tape;
  const Var a = tape.leaf(Matrix::Ones(2, 3));
  const Var b = tape.leaf(Matrix::Ones(3, 2));
  CHECK_THROWS_AS(a + b, StructuralError);
  CHECK_THROWS_AS(ad::matmul(a, a), StructuralError);
  CHECK_THROWS_AS(tape.backward(a), StructuralError);
  CHECK_THROWS_AS(ad::slice_cols(a, 2, 2), StructuralError);
  CHECK_THROWS_AS(ad::gather_rows(a, {0, 5}), StructuralError);
  CHECK_THROWS_AS(a.scalar(), StructuralError);
  Tape inference(false);
  const Var x = inference.leaf(Matrix::Ones(1, 1));
  CHECK_THROWS_AS(inference.backward(x), StructuralError);
}

TEST_CASE("forward and backward are deterministic") {
  std::mt19937_64 rng(4);
  const Matrix a = random_matrix(5, 5, rng);
  auto run = [&] {
    Tape tape;
    const Var x = tape.leaf(a);
    const Var loss = ad::sum(ad::tanh(ad::matmul(x, x)) * ad::sin(x));
    tape.backward(loss);
    return std::make_pair(loss.scalar(), Matrix(tape.grad(x)));
  };
  const auto [v1, g1] = run();
  const auto [v2, g2] = run();
  CHECK(v1 == v2);
  CHECK(g1 == g2);
}

}
