#pragma once

// Plain-text key=value run configuration. Lines starting with '#' and blank
// lines are ignored. Flags on the command line are applied after the file.

#include <filesystem>
#include <string>
#include <vector>

#include "catte/rank.hpp"
#include "catte/train.hpp"

namespace catte {

struct RunConfig {
  int rank = 5;         // R
  int latent_dim = 5;   // J
  int fourier_dim = 32; // M
  std::vector<int> encoder_hidden = {100};
  std::vector<int> dynamics_hidden = {100, 100};
  std::vector<int> decoder_hidden = {100, 100};
  Solver solver = Solver::rk4;
  double step = 0.0;
  double lr = 5e-3;
  int epochs = 2000;
  std::size_t batch = 0;
  std::uint64_t seed = 0;
  double a0 = 1e-6, b0 = 1e-6, c0 = 1e-6, d0 = 1e-6;
  bool fard = true;  // false runs the rmse-only ablation
  double prune_power = 1e-2;
  double prune_lambda = 10.0;
  double init_variational = 1e-6;

  /// Sets one key; throws StructuralError on unknown keys, ParseError on
  /// bad values.
  void set(const std::string& key, const std::string& value);
  /// Parses "key=value".
  void set(const std::string& assignment);
  void load(const std::filesystem::path& path);
  std::string to_text() const;

  ModelConfig model_config(int modes) const;
  PriorHyper prior() const;
  TrainConfig train_config() const;
  RankThresholds thresholds() const;
};

}  // namespace catte
