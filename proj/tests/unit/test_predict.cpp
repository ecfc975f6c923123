#include <cmath>
#include <random>
#include <vector>

#include <doctest.h>

#include "catte/errors.hpp"
#include "catte/predict.hpp"
#include "oracles.hpp"

using namespace catte;

namespace {

VariationalState state(double sigma2, double rho = 6.0, double iota = 2.5) {
  VariationalState vs;
  vs.alpha = {1.0, 1.0};
  vs.beta = {1.0, 1.0};
  vs.sigma2 = sigma2;
  vs.rho = rho;
  vs.iota = iota;
  return vs;
}

}  // namespace

TEST_SUITE("predict") {

TEST_CASE("closed form") {
  const std::vector<std::vector<double>> g{{0.5, -1.0}, {2.0, 0.3}, {1.5, 1.0}};
  SUBCASE("mean, dof and precision") {
    const PredictiveLaw law = predictive_law(g, state(0.1));
    CHECK(law.mean == reconstruct(g));
    CHECK(law.dof == 12.0);
    // sum_j |prod_{k != j} g^k|^2
    const double spread = (3.0 * 3.0 + 0.3 * 0.3) + (0.75 * 0.75 + 1.0) + (1.0 * 1.0 + 0.09);
    CHECK(law.precision == doctest::Approx(1.0 / (2.5 / 6.0 + 0.1 * spread)).epsilon(1e-14));
  }
  SUBCASE("sigma2 = 0 leaves iota / rho") {
    CHECK(predictive_law(g, state(0.0)).precision == doctest::Approx(6.0 / 2.5).epsilon(1e-15));
  }
  SUBCASE("spread grows with sigma2") {
    double prev = predictive_law(g, state(0.0)).variance();
    for (double s2 : {0.01, 0.1, 1.0}) {
      const double v = predictive_law(g, state(s2)).variance();
      CHECK(v > prev);
      prev = v;
    }
  }
}

TEST_CASE("Monte-Carlo predictive on the tiny model") {
  auto tiny = oracle::make_tiny(51);
  VariationalState vs = tiny.model.variational();
  vs.sigma2 = 1e-4;
  tiny.model.set_variational(vs);
  const Query q{tiny.data[3].index, tiny.data[3].time};
  const PredictiveLaw law = predict(tiny.model, q);
  const auto g = factor_values(tiny.model, tiny.data);
  std::vector<std::vector<double>> tuple;
  for (const Matrix& gk : g) tuple.emplace_back(gk.row(3).data(), gk.row(3).data() + gk.cols());
  CHECK(law.mean == reconstruct(tuple));
  CHECK(law.dof == 2.0 * vs.rho);

  const auto sample = oracle::mc_predictive(tuple, vs, 200000, 52);
  CHECK(oracle::ks_statistic(sample, law) < 0.01);

  const auto [lo, hi] = predict_interval(law, 0.95);
  CHECK((lo + hi) / 2.0 == doctest::Approx(law.mean).epsilon(1e-12));
  double inside = 0.0;
  for (double y : sample) inside += (y >= lo && y <= hi) ? 1.0 : 0.0;
  CHECK(inside / static_cast<double>(sample.size()) == doctest::Approx(0.95).epsilon(0.01 / 0.95));
}

TEST_CASE("predictive mean at training coordinates equals the reconstruction") {
  auto tiny = oracle::make_tiny(53);
  const auto laws = predict(tiny.model, queries_of(tiny.data));
  const auto g = factor_values(tiny.model, tiny.data);
  ad::Tape tape(false);
  std::vector<ad::Var> gv;
  for (const Matrix& gk : g) gv.push_back(tape.constant(gk));
  const Matrix s = reconstruct(gv).value();
  for (std::size_t n = 0; n < laws.size(); ++n) {
    CHECK(laws[n].mean == doctest::Approx(s(static_cast<Eigen::Index>(n), 0)).epsilon(1e-14));
  }
}

TEST_CASE("off-grid and extrapolated times are solved exactly") {
  auto tiny = oracle::make_tiny(54);
  const Query later{{0.3, 0.6}, 1.4};
  const Query off{{0.123, 0.456}, 0.777};
  const PredictiveLaw a = predict(tiny.model, later);
  CHECK(std::isfinite(a.mean));
  const std::vector<Query> both{off, later};
  const auto batch = predict(tiny.model, both);
  CHECK(batch[1].mean == doctest::Approx(a.mean).epsilon(1e-12));
  CHECK(tiny.model.grid().times.size() == 8);  // the model grid is not modified
}

TEST_CASE("interval properties and errors") {
  const PredictiveLaw law{1.5, 4.0, 7.0};
  const auto narrow = predict_interval(law, 1e-9);
  CHECK(narrow.first == doctest::Approx(1.5).epsilon(1e-8));
  CHECK(narrow.second == doctest::Approx(1.5).epsilon(1e-8));
  const auto [lo, hi] = predict_interval(law, 0.9);
  CHECK(law.cdf(hi) - law.cdf(lo) == doctest::Approx(0.9).epsilon(1e-10));
  CHECK_THROWS_AS(predict_interval(law, 1.0), DomainError);
  CHECK_THROWS_AS(predict_interval(law, 0.0), DomainError);
  auto tiny = oracle::make_tiny(55);
  CHECK_THROWS_AS(predict(tiny.model, Query{{0.1}, 0.2}), StructuralError);
}

TEST_CASE("metrics") {
  const std::vector<double> truth{1.0, -2.0, 0.5};
  const Metrics perfect = metrics(truth, truth);
  CHECK(perfect.rmse == 0.0);
  CHECK(perfect.mae == 0.0);
  const std::vector<double> shifted{1.3, -1.7, 0.8};
  const Metrics off = metrics(shifted, truth);
  CHECK(off.rmse == doctest::Approx(0.3));
  CHECK(off.mae == doctest::Approx(0.3));

  std::mt19937_64 rng(56);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<double> a(100), b(100);
  double se = 0.0, ae = 0.0;
  for (int i = 0; i < 100; ++i) {
    a[i] = z(rng);
    b[i] = z(rng);
    se += (a[i] - b[i]) * (a[i] - b[i]);
    ae += std::abs(a[i] - b[i]);
  }
  const Metrics m = metrics(a, b);
  CHECK(m.rmse == doctest::Approx(std::sqrt(se / 100.0)).epsilon(1e-14));
  CHECK(m.mae == doctest::Approx(ae / 100.0).epsilon(1e-14));
  CHECK_THROWS_AS(metrics(std::vector<double>{}, std::vector<double>{}), DomainError);
}

}
