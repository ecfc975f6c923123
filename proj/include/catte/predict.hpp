#pragma once

#include <span>
#include <utility>
#include <vector>

#include "catte/model.hpp"

namespace catte {

/// Student-t predictive law. `precision` is the s_p parameter: it multiplies
/// the squared deviation in the density, so the variance is
/// dof / ((dof - 2) * precision) for dof > 2.
struct PredictiveLaw {
  double mean = 0.0;
  double precision = 1.0;
  double dof = 1.0;

  double variance() const;  // infinite for dof <= 2
  double logpdf(double y) const;
  double cdf(double y) const;
};

/// A normalized coordinate (i_1, ..., i_K, t).
struct Query {
  std::vector<double> index;
  double time = 0.0;
};

/// Closed form from one g tuple (K vectors of length R):
///   mean = 1^T (*_k g^k),  dof = 2 rho,
///   precision = 1 / (iota/rho + sigma2 sum_j |*_{k != j} g^k|^2).
PredictiveLaw predictive_law(std::span<const std::vector<double>> g, const VariationalState& vs);

/// Batched prediction: one roll over the union of the model's grid and the
/// query times.
std::vector<PredictiveLaw> predict(const CatteModel& model, std::span<const Query> queries);
PredictiveLaw predict(const CatteModel& model, const Query& query);

std::vector<Query> queries_of(const ObservationSet& data);

/// Central interval with probability `level` in (0, 1).
std::pair<double, double> predict_interval(const PredictiveLaw& law, double level);

struct Metrics {
  double rmse = 0.0;
  double mae = 0.0;
};

Metrics metrics(std::span<const double> predicted, std::span<const double> truth);
/// Predictive-mean errors against the values of `test`.
Metrics evaluate(const CatteModel& model, const ObservationSet& test);

}  // namespace catte
