#include "catte/rank.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "catte/errors.hpp"

namespace catte {

std::vector<double> component_power(std::span<const Matrix> g) {
  if (g.empty()) return {};
  std::vector<double> p(static_cast<std::size_t>(g[0].cols()), 0.0);
  for (const Matrix& gk : g) {
    const Matrix col = gk.array().square().colwise().sum();
    for (std::size_t r = 0; r < p.size(); ++r) p[r] += col(0, static_cast<Eigen::Index>(r));
  }
  return p;
}

std::vector<double> component_power(const CatteModel& model, const ObservationSet& data) {
  const auto g = factor_values(model, data);
  return component_power(g);
}

RankReport reveal_rank(std::span<const double> power, const VariationalState& vs,
                       const RankThresholds& thresholds) {
  const std::size_t R = power.size();
  if (vs.alpha.size() != R || vs.beta.size() != R) {
    throw StructuralError("power and variational state disagree on the rank");
  }
  RankReport report;
  if (R == 0) return report;
  const double max_power = *std::max_element(power.begin(), power.end());
  double min_lambda = vs.expected_lambda(0);
  for (std::size_t r = 1; r < R; ++r) min_lambda = std::min(min_lambda, vs.expected_lambda(r));

  for (std::size_t r = 0; r < R; ++r) {
    RankEntry e;
    e.expected_lambda = vs.expected_lambda(r);
    e.inverse_mean_ratio = vs.beta[r] / vs.alpha[r];
    if (vs.alpha[r] > 1.0) e.expected_variance = vs.beta[r] / (vs.alpha[r] - 1.0);
    e.power = power[r];
    const bool weak = power[r] < thresholds.power_ratio * max_power;
    const bool shrunk = e.expected_lambda > thresholds.lambda_ratio * min_lambda;
    e.active = !(weak && shrunk);
    if (e.active) report.active.push_back(static_cast<int>(r));
    report.ranks.push_back(e);
  }
  report.revealed_rank = static_cast<int>(report.active.size());
  if (report.active.empty()) throw DomainError("every component was pruned; degenerate model");
  return report;
}

RankReport rank_report(const CatteModel& model, const ObservationSet& data,
                       const RankThresholds& thresholds) {
  return reveal_rank(component_power(model, data), model.variational(), thresholds);
}

void RankReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  out << "rank,expected_lambda,beta_over_alpha,expected_inverse_lambda,power,active\n"
      << std::setprecision(12);
  for (std::size_t r = 0; r < ranks.size(); ++r) {
    const RankEntry& e = ranks[r];
    out << r + 1 << ',' << e.expected_lambda << ',' << e.inverse_mean_ratio << ',';
    if (e.expected_variance) out << *e.expected_variance;
    else out << "nan";
    out << ',' << e.power << ',' << (e.active ? 1 : 0) << '\n';
  }
}

std::string RankReport::text() const {
  std::ostringstream os;
  os << "revealed rank: " << revealed_rank << " of " << ranks.size() << '\n';
  os << std::setprecision(6);
  for (std::size_t r = 0; r < ranks.size(); ++r) {
    const RankEntry& e = ranks[r];
    os << "  r=" << r + 1 << (e.active ? "  active " : "  pruned ") << " E[lambda]="
       << e.expected_lambda << " beta/alpha=" << e.inverse_mean_ratio << " E[1/lambda]=";
    if (e.expected_variance) os << *e.expected_variance;
    else os << "undefined";
    os << " power=" << e.power << '\n';
  }
  return os.str();
}

CatteModel prune(const CatteModel& model, std::span<const int> active) {
  if (active.empty()) throw DomainError("cannot prune to an empty component set");
  std::vector<Eigen::Index> keep;
  for (int r : active) {
    if (r < 0 || r >= model.rank()) throw DomainError("component id out of range");
    keep.push_back(r);
  }
  std::sort(keep.begin(), keep.end());
  if (std::adjacent_find(keep.begin(), keep.end()) != keep.end()) {
    throw DomainError("duplicate component id");
  }

  ModelConfig config = model.config();
  config.shape.rank = static_cast<int>(keep.size());
  PriorHyper prior;
  for (Eigen::Index r : keep) {
    prior.a0.push_back(model.prior().a0[r]);
    prior.b0.push_back(model.prior().b0[r]);
  }
  prior.c0 = model.prior().c0;
  prior.d0 = model.prior().d0;

  CatteModel out(config, prior);
  std::vector<std::size_t> rank_blocks = {model.log_alpha_block(), model.log_beta_block()};
  for (const ModeNetwork& net : model.networks()) {
    rank_blocks.push_back(net.decoder.weights.back());
    rank_blocks.push_back(net.decoder.biases.back());
  }
  const ParameterSet& src = model.params();
  for (std::size_t i = 0; i < src.size(); ++i) {
    const std::size_t j = out.params().index(src.name(i));
    if (std::find(rank_blocks.begin(), rank_blocks.end(), i) != rank_blocks.end()) {
      Matrix m(src.value(i).rows(), static_cast<Eigen::Index>(keep.size()));
      for (std::size_t c = 0; c < keep.size(); ++c) {
        m.col(static_cast<Eigen::Index>(c)) = src.value(i).col(keep[c]);
      }
      out.params().value(j) = std::move(m);
    } else {
      out.params().value(j) = src.value(i);
    }
  }
  out.set_grid(model.grid());
  out.set_normalization(model.normalization());
  out.epochs_trained = model.epochs_trained;
  return out;
}

}  // namespace catte
