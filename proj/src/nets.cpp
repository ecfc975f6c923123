#include "catte/nets.hpp"

#include <cmath>
#include <numbers>

#include "catte/errors.hpp"

namespace catte {

namespace {

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw DomainError(std::string(what) + ": non-finite input");
}

}  // namespace

Mlp make_mlp(ParameterSet& params, const std::string& prefix, int input_dim,
             std::span<const int> hidden, int output_dim, std::mt19937_64& rng) {
  Mlp mlp;
  mlp.input_dim = input_dim;
  mlp.output_dim = output_dim;
  std::vector<int> widths{input_dim};
  widths.insert(widths.end(), hidden.begin(), hidden.end());
  widths.push_back(output_dim);
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const int fan_in = widths[l];
    const int fan_out = widths[l + 1];
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    std::uniform_real_distribution<double> u(-bound, bound);
    Matrix w(fan_in, fan_out);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
    Matrix b(1, fan_out);
    for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = u(rng);
    const std::string layer = prefix + ".l" + std::to_string(l);
    mlp.weights.push_back(params.add(layer + ".weight", std::move(w)));
    mlp.biases.push_back(params.add(layer + ".bias", std::move(b)));
  }
  return mlp;
}

ad::Var mlp_forward(const Mlp& mlp, const BoundParams& bound, const ad::Var& x) {
  if (x.cols() != mlp.input_dim) {
    throw StructuralError("mlp input has " + std::to_string(x.cols()) + " columns, expected " +
                          std::to_string(mlp.input_dim));
  }
  ad::Var h = x;
  const std::size_t layers = mlp.weights.size();
  for (std::size_t l = 0; l < layers; ++l) {
    h = ad::linear(h, bound[mlp.weights[l]], bound[mlp.biases[l]]);
    if (l + 1 < layers) h = ad::tanh(h);
  }
  return h;
}

ModeNetwork make_mode_network(ParameterSet& params, int mode, const NetworkShape& shape,
                              std::mt19937_64& rng) {
  if (shape.fourier_dim < 1 || shape.latent_dim < 1 || shape.rank < 1) {
    throw StructuralError("network dimensions must be positive");
  }
  ModeNetwork net;
  net.mode = mode;
  const std::string prefix = "mode" + std::to_string(mode);

  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix b(1, shape.fourier_dim);
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = normal(rng);
  net.fourier.frequencies = params.add(prefix + ".fourier.b", std::move(b));
  net.fourier.dim = shape.fourier_dim;

  net.encoder = make_mlp(params, prefix + ".encoder", 2 * shape.fourier_dim,
                         shape.encoder_hidden, shape.latent_dim, rng);
  net.dynamics = make_mlp(params, prefix + ".dynamics", shape.latent_dim + 1,
                          shape.dynamics_hidden, shape.latent_dim, rng);
  net.decoder = make_mlp(params, prefix + ".decoder", shape.latent_dim,
                         shape.decoder_hidden, shape.rank, rng);
  return net;
}

ad::Var fourier_features(const ModeNetwork& net, const BoundParams& bound,
                         std::span<const double> indexes) {
  const ad::Var& b = bound[net.fourier.frequencies];
  ad::Tape& tape = *b.tape();
  Matrix column(static_cast<Eigen::Index>(indexes.size()), 1);
  for (std::size_t i = 0; i < indexes.size(); ++i) {
    column(static_cast<Eigen::Index>(i), 0) = indexes[i];
  }
  require_finite(column, "fourier_features");
  const ad::Var phase = ad::scale(ad::matmul(tape.constant(std::move(column)), b),
                                  2.0 * std::numbers::pi);
  const ad::Var parts[] = {ad::cos(phase), ad::sin(phase)};
  return ad::concat_cols(parts);
}

ad::Var encode_initial_state(const ModeNetwork& net, const BoundParams& bound,
                             std::span<const double> indexes) {
  return mlp_forward(net.encoder, bound, fourier_features(net, bound, indexes));
}

ad::Var dynamics_step(const ModeNetwork& net, const BoundParams& bound, const ad::Var& state,
                      double time) {
  require_finite(state.value(), "dynamics_step");
  if (!std::isfinite(time)) throw DomainError("dynamics_step: non-finite time");
  ad::Tape& tape = *state.tape();
  const ad::Var parts[] = {state, tape.constant(Matrix::Constant(state.rows(), 1, time))};
  return mlp_forward(net.dynamics, bound, ad::concat_cols(parts));
}

ad::Var decode(const ModeNetwork& net, const BoundParams& bound, const ad::Var& state) {
  require_finite(state.value(), "decode");
  return mlp_forward(net.decoder, bound, state);
}

}  // namespace catte
