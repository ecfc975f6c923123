#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <doctest.h>

#include "catte/errors.hpp"
#include "catte/nets.hpp"

using namespace catte;

namespace {

struct Fixture {
  ParameterSet params;
  ModeNetwork net;

  explicit Fixture(const NetworkShape& shape, std::uint64_t seed = 1) {
    std::mt19937_64 rng(seed);
    net = make_mode_network(params, 0, shape, rng);
  }
};

NetworkShape small_shape(int M, int J, int R, int width) {
  NetworkShape s;
  s.fourier_dim = M;
  s.latent_dim = J;
  s.rank = R;
  s.encoder_hidden = {width};
  s.dynamics_hidden = {width, width};
  s.decoder_hidden = {width, width};
  return s;
}

// Relative error of the gradient of sum(W * out) w.r.t. one block.
double block_fd_error(ParameterSet& params, std::size_t block,
                      const std::function<ad::Var(const BoundParams&)>& f) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix weight;
  auto loss_of = [&](Matrix* grad) {
    ad::Tape tape(grad != nullptr);
    const BoundParams bound = params.bind(tape);
    const ad::Var out = f(bound);
    if (weight.size() == 0) {
      weight.resize(out.rows(), out.cols());
      for (Eigen::Index i = 0; i < weight.size(); ++i) weight.data()[i] = u(rng);
    }
    const ad::Var loss = ad::sum(ad::mul(out, tape.constant(weight)));
    if (grad) {
      tape.backward(loss);
      *grad = tape.grad(bound[block]);
    }
    return loss.scalar();
  };
  Matrix analytic;
  loss_of(&analytic);
  Matrix& w = params.value(block);
  Matrix fd(w.rows(), w.cols());
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    const double keep = w.data()[i];
    const double h = 1e-5;
    w.data()[i] = keep + h;
    const double up = loss_of(nullptr);
    w.data()[i] = keep - h;
    const double down = loss_of(nullptr);
    w.data()[i] = keep;
    fd.data()[i] = (up - down) / (2.0 * h);
  }
  return (analytic - fd).norm() / std::max({analytic.norm(), fd.norm(), 1e-12});
}

}  // namespace

TEST_SUITE("nets") {

TEST_CASE("shape contracts over sampled configurations") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> dim(1, 7);
  for (int trial = 0; trial < 25; ++trial) {
    const int M = dim(rng), J = dim(rng), R = dim(rng), width = dim(rng) + 1;
    Fixture fx(small_shape(M, J, R, width), static_cast<std::uint64_t>(trial));
    const std::vector<double> idx{0.0, 0.25, 0.6};
    ad::Tape tape(false);
    const BoundParams bound = fx.params.bind(tape);
    const ad::Var phi = fourier_features(fx.net, bound, idx);
    CHECK(phi.rows() == 3);
    CHECK(phi.cols() == 2 * M);
    const ad::Var z = encode_initial_state(fx.net, bound, idx);
    CHECK(z.rows() == 3);
    CHECK(z.cols() == J);
    const ad::Var dz = dynamics_step(fx.net, bound, z, 0.3);
    CHECK(dz.cols() == J);
    const ad::Var g = decode(fx.net, bound, z);
    CHECK(g.rows() == 3);
    CHECK(g.cols() == R);
    CHECK(fx.net.encoder.input_dim == 2 * M);
    CHECK(fx.net.dynamics.input_dim == J + 1);
    CHECK(fx.net.decoder.output_dim == R);
  }
}

TEST_CASE("Fourier features follow the cos/sin layout") {
  Fixture fx(small_shape(4, 3, 2, 5));
  const Matrix b = fx.params.value(fx.net.fourier.frequencies);
  ad::Tape tape(false);
  const BoundParams bound = fx.params.bind(tape);
  const std::vector<double> idx{0.37};
  const Matrix phi = fourier_features(fx.net, bound, idx).value();
  for (int m = 0; m < 4; ++m) {
    const double a = 2.0 * std::numbers::pi * b(0, m) * 0.37;
    CHECK(phi(0, m) == doctest::Approx(std::cos(a)).epsilon(1e-14));
    CHECK(phi(0, 4 + m) == doctest::Approx(std::sin(a)).epsilon(1e-14));
  }
}

TEST_CASE("encoder determinism and zero frequencies") {
  Fixture fx(small_shape(5, 3, 2, 6));
  {
    ad::Tape tape(false);
    const BoundParams bound = fx.params.bind(tape);
    const std::vector<double> same{0.42, 0.42};
    const Matrix z = encode_initial_state(fx.net, bound, same).value();
    CHECK(z.row(0) == z.row(1));
  }
  fx.params.value(fx.net.fourier.frequencies).setZero();
  ad::Tape tape(false);
  const BoundParams bound = fx.params.bind(tape);
  const std::vector<double> idx{0.0, 0.3, 0.9};
  const Matrix z = encode_initial_state(fx.net, bound, idx).value();
  CHECK(z.row(0) == z.row(1));
  CHECK(z.row(1) == z.row(2));
}

TEST_CASE("decoder rows are independent and a zero decoder gives zero") {
  Fixture fx(small_shape(3, 4, 3, 5));
  ad::Tape tape(false);
  const BoundParams bound = fx.params.bind(tape);
  Matrix states(3, 4);
  states << 0.1, 0.2, 0.3, 0.4, -1.0, 0.5, 0.0, 2.0, 0.7, 0.7, 0.7, 0.7;
  const Matrix all = decode(fx.net, bound, tape.constant(states)).value();
  for (int r = 0; r < 3; ++r) {
    const Matrix one = decode(fx.net, bound, tape.constant(states.row(r))).value();
    CHECK(one.row(0) == all.row(r));
  }
  for (std::size_t i : fx.net.decoder.weights) fx.params.value(i).setZero();
  for (std::size_t i : fx.net.decoder.biases) fx.params.value(i).setZero();
  ad::Tape zero_tape(false);
  CHECK(decode(fx.net, fx.params.bind(zero_tape), zero_tape.constant(states)).value().isZero());
}

TEST_CASE("weight initialization range") {
  Fixture fx(small_shape(8, 5, 3, 20));
  for (std::size_t l = 0; l < fx.net.dynamics.weights.size(); ++l) {
    const Matrix& w = fx.params.value(fx.net.dynamics.weights[l]);
    const double bound = 1.0 / std::sqrt(static_cast<double>(w.rows()));
    CHECK(w.cwiseAbs().maxCoeff() <= bound);
  }
}

TEST_CASE("gradients match finite differences") {
  Fixture fx(small_shape(3, 3, 2, 4));
  const std::vector<double> idx{0.1, 0.55, 0.8};
  SUBCASE("dynamics parameters") {
    for (std::size_t b : fx.net.dynamics.weights) {
      CHECK(block_fd_error(fx.params, b, [&](const BoundParams& bound) {
              ad::Tape& tape = *bound[b].tape();
              Matrix z(3, 3);
              z << 0.2, -0.1, 0.4, 1.0, 0.3, -0.6, 0.0, 0.9, 0.5;
              return dynamics_step(fx.net, bound, tape.constant(z), 0.4);
            }) <= 1e-4);
    }
  }
  SUBCASE("Fourier frequencies") {
    CHECK(block_fd_error(fx.params, fx.net.fourier.frequencies, [&](const BoundParams& bound) {
            return fourier_features(fx.net, bound, idx);
          }) <= 1e-4);
  }
  SUBCASE("encoder into decoder") {
    for (std::size_t b : fx.net.encoder.weights) {
      CHECK(block_fd_error(fx.params, b, [&](const BoundParams& bound) {
              return decode(fx.net, bound, encode_initial_state(fx.net, bound, idx));
            }) <= 1e-4);
    }
  }
}

TEST_CASE("non-finite inputs are domain errors") {
  Fixture fx(small_shape(2, 2, 2, 3));
  ad::Tape tape(false);
  const BoundParams bound = fx.params.bind(tape);
  const std::vector<double> bad{std::nan("")};
  CHECK_THROWS_AS(encode_initial_state(fx.net, bound, bad), DomainError);
  const ad::Var inf = tape.constant(Matrix::Constant(1, 2, INFINITY));
  CHECK_THROWS_AS(dynamics_step(fx.net, bound, inf, 0.0), DomainError);
  CHECK_THROWS_AS(decode(fx.net, bound, inf), DomainError);
  const ad::Var ok = tape.constant(Matrix::Zero(1, 2));
  CHECK_THROWS_AS(dynamics_step(fx.net, bound, ok, NAN), DomainError);
  CHECK_THROWS_AS(decode(fx.net, bound, tape.constant(Matrix::Zero(1, 3))), StructuralError);
}

}
