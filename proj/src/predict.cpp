#include "catte/predict.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "catte/errors.hpp"
#include "catte/specialmath.hpp"

namespace catte {

double PredictiveLaw::variance() const {
  if (dof <= 2.0) return std::numeric_limits<double>::infinity();
  return dof / ((dof - 2.0) * precision);
}

double PredictiveLaw::logpdf(double y) const { return student_t_logpdf(y, mean, precision, dof); }

double PredictiveLaw::cdf(double y) const { return student_t_cdf(y, mean, precision, dof); }

PredictiveLaw predictive_law(std::span<const std::vector<double>> g, const VariationalState& vs) {
  if (g.empty()) throw StructuralError("empty factor tuple");
  const std::size_t R = g[0].size();
  for (const auto& gk : g) {
    if (gk.size() != R) throw StructuralError("factor vectors differ in length");
  }
  double spread = 0.0;
  for (std::size_t j = 0; j < g.size(); ++j) {
    for (std::size_t r = 0; r < R; ++r) {
      double p = 1.0;
      for (std::size_t k = 0; k < g.size(); ++k) {
        if (k != j) p *= g[k][r];
      }
      spread += p * p;
    }
  }
  PredictiveLaw law;
  law.mean = reconstruct(g);
  law.precision = 1.0 / (vs.iota / vs.rho + vs.sigma2 * spread);
  law.dof = 2.0 * vs.rho;
  if (!std::isfinite(law.mean) || !std::isfinite(law.precision)) {
    throw DomainError("non-finite predictive law");
  }
  return law;
}

std::vector<PredictiveLaw> predict(const CatteModel& model, std::span<const Query> queries) {
  if (queries.empty()) return {};
  const auto K = static_cast<std::size_t>(model.modes());
  std::vector<std::vector<double>> columns(K);
  std::vector<double> times;
  for (const Query& q : queries) {
    if (q.index.size() != K) {
      throw StructuralError("query has " + std::to_string(q.index.size()) +
                            " indexes, model has " + std::to_string(K) + " modes");
    }
    for (std::size_t k = 0; k < K; ++k) {
      if (!std::isfinite(q.index[k])) throw DomainError("non-finite query index");
      columns[k].push_back(q.index[k]);
    }
    times.push_back(q.time);
  }
  std::vector<std::vector<double>> tables = columns;
  for (auto& t : tables) {
    std::sort(t.begin(), t.end());
    t.erase(std::unique(t.begin(), t.end()), t.end());
  }
  const TimeGrid grid = model.grid_with(times);

  ad::Tape tape(false);
  const BoundParams bound = model.params().bind(tape);
  const RolledTrajectories rolled =
      roll_trajectories(model.networks(), bound, tables, grid, model.config().solver);
  const GatherPlan plan = plan_gather(tables, grid, columns, times);
  const auto g = gather_g(model.networks(), bound, rolled, plan);

  const VariationalState vs = model.variational();
  std::vector<PredictiveLaw> laws;
  laws.reserve(queries.size());
  std::vector<std::vector<double>> tuple(K);
  for (std::size_t n = 0; n < queries.size(); ++n) {
    for (std::size_t k = 0; k < K; ++k) {
      const auto row = g[k].value().row(static_cast<Eigen::Index>(n));
      tuple[k].assign(row.data(), row.data() + row.size());
    }
    laws.push_back(predictive_law(tuple, vs));
  }
  return laws;
}

PredictiveLaw predict(const CatteModel& model, const Query& query) {
  return predict(model, std::span<const Query>(&query, 1)).front();
}

std::vector<Query> queries_of(const ObservationSet& data) {
  std::vector<Query> q;
  q.reserve(data.size());
  for (const Observation& o : data.records()) q.push_back({o.index, o.time});
  return q;
}

std::pair<double, double> predict_interval(const PredictiveLaw& law, double level) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("interval level must lie in (0, 1)");
  const double tail = 0.5 * (1.0 - level);
  const double hi = student_t_quantile(1.0 - tail, law.mean, law.precision, law.dof);
  return {2.0 * law.mean - hi, hi};
}

Metrics metrics(std::span<const double> predicted, std::span<const double> truth) {
  if (predicted.size() != truth.size()) throw StructuralError("metric inputs differ in length");
  if (predicted.empty()) throw DomainError("metrics of an empty set");
  double se = 0.0, ae = 0.0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const double d = predicted[i] - truth[i];
    se += d * d;
    ae += std::abs(d);
  }
  const double n = static_cast<double>(predicted.size());
  return {std::sqrt(se / n), ae / n};
}

Metrics evaluate(const CatteModel& model, const ObservationSet& test) {
  if (test.empty()) throw DomainError("test set is empty");
  const auto laws = predict(model, queries_of(test));
  std::vector<double> mean;
  mean.reserve(laws.size());
  for (const PredictiveLaw& l : laws) mean.push_back(l.mean);
  return metrics(mean, test.values());
}

}  // namespace catte
