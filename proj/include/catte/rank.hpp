#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "catte/model.hpp"

namespace catte {

struct RankThresholds {
  double power_ratio = 1e-2;  // prune only if P_r < power_ratio * max P
  double lambda_ratio = 10.0; // ... and E[lambda_r] > lambda_ratio * min E[lambda]
};

struct RankEntry {
  double expected_lambda = 0.0;            // alpha / beta
  double inverse_mean_ratio = 0.0;         // beta / alpha
  std::optional<double> expected_variance; // E[1/lambda] = beta / (alpha - 1), alpha > 1
  double power = 0.0;
  bool active = true;
};

struct RankReport {
  std::vector<RankEntry> ranks;
  std::vector<int> active;  // zero-based rank ids
  int revealed_rank = 0;

  /// Columns: rank,expected_lambda,beta_over_alpha,expected_inverse_lambda,power,active
  void write_csv(const std::filesystem::path& path) const;
  std::string text() const;
};

/// P_r = sum_n sum_k g_r^k(i_k^n, t_n)^2
std::vector<double> component_power(std::span<const Matrix> g);
std::vector<double> component_power(const CatteModel& model, const ObservationSet& data);

/// Throws DomainError if every component would be pruned.
RankReport reveal_rank(std::span<const double> power, const VariationalState& vs,
                       const RankThresholds& thresholds = {});
RankReport rank_report(const CatteModel& model, const ObservationSet& data,
                       const RankThresholds& thresholds = {});

/// Copy of `model` keeping only the listed components (decoder output
/// columns, q(lambda) entries and their priors).
CatteModel prune(const CatteModel& model, std::span<const int> active);

}  // namespace catte
