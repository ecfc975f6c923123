#pragma once

// Per-mode latent-ODE networks: Fourier features of the continuous index,
// an encoder to the initial latent state, the dynamics field and a decoder
// to the R factor components.

#include <random>
#include <span>
#include <string>
#include <vector>

#include "catte/params.hpp"

namespace catte {

struct NetworkShape {
  int fourier_dim = 32;  // M
  int latent_dim = 5;    // J
  int rank = 5;          // R
  std::vector<int> encoder_hidden = {100};
  std::vector<int> dynamics_hidden = {100, 100};
  std::vector<int> decoder_hidden = {100, 100};
};

/// Fully connected tanh network with a linear output layer. Holds indices
/// into a ParameterSet, not the weights themselves.
struct Mlp {
  std::vector<std::size_t> weights;
  std::vector<std::size_t> biases;
  int input_dim = 0;
  int output_dim = 0;
};

/// Weights and biases uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)].
Mlp make_mlp(ParameterSet& params, const std::string& prefix, int input_dim,
             std::span<const int> hidden, int output_dim, std::mt19937_64& rng);

ad::Var mlp_forward(const Mlp& mlp, const BoundParams& bound, const ad::Var& x);

struct FourierFeatureMap {
  std::size_t frequencies = 0;  // 1 x M block
  int dim = 0;
};

struct ModeNetwork {
  int mode = 0;
  FourierFeatureMap fourier;
  Mlp encoder;   // 2M -> J
  Mlp dynamics;  // J + 1 -> J, time appended as last input
  Mlp decoder;   // J -> R
};

ModeNetwork make_mode_network(ParameterSet& params, int mode, const NetworkShape& shape,
                              std::mt19937_64& rng);

/// [cos(2 pi b i); sin(2 pi b i)] for a column of indexes, giving U x 2M.
ad::Var fourier_features(const ModeNetwork& net, const BoundParams& bound,
                         std::span<const double> indexes);

/// z(i, 0) for every index; one row per index (U x J).
ad::Var encode_initial_state(const ModeNetwork& net, const BoundParams& bound,
                             std::span<const double> indexes);

/// h_theta(z, t) applied row-wise to a U x J state table.
ad::Var dynamics_step(const ModeNetwork& net, const BoundParams& bound,
                      const ad::Var& state, double time);

/// Row-wise decoder, U x J -> U x R.
ad::Var decode(const ModeNetwork& net, const BoundParams& bound, const ad::Var& state);

}  // namespace catte
