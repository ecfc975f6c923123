#include "catte/specialmath.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <string>

#include <boost/math/distributions/students_t.hpp>

#include "catte/errors.hpp"

namespace catte {

namespace {

void require_positive(double x, const char* what) {
  if (!std::isfinite(x) || x <= 0.0) {
    throw DomainError(std::string(what) + " must be finite and > 0, got " +
                      std::to_string(x));
  }
}

// Godfrey's coefficients for g = 7, n = 9.
constexpr double kLanczosG = 7.0;
constexpr std::array<double, 9> kLanczos = {
    0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
    771.32342877765313,      -176.61502916214059,   12.507343278686905,
    -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};

double lanczos_log_gamma(double x) {
  // Valid for x >= 0.5.
  const double z = x - 1.0;
  double a = kLanczos[0];
  const double t = z + kLanczosG + 0.5;
  for (std::size_t i = 1; i < kLanczos.size(); ++i) {
    a += kLanczos[i] / (z + static_cast<double>(i));
  }
  return 0.5 * std::log(2.0 * std::numbers::pi) + (z + 0.5) * std::log(t) - t +
         std::log(a);
}

}  // namespace

double log_gamma(double x) {
  require_positive(x, "log_gamma argument");
  if (x == 1.0 || x == 2.0) return 0.0;
  if (x < 0.5) return lanczos_log_gamma(x + 1.0) - std::log(x);
  return lanczos_log_gamma(x);
}

double digamma(double x) {
  require_positive(x, "digamma argument");
  double shift = 0.0;
  while (x < 10.0) {
    shift -= 1.0 / x;
    x += 1.0;
  }
  const double inv2 = 1.0 / (x * x);
  // Bernoulli terms B_2k / (2k x^2k), k = 1..7
  const double series =
      inv2 * (1.0 / 12.0 -
              inv2 * (1.0 / 120.0 -
                      inv2 * (1.0 / 252.0 -
                              inv2 * (1.0 / 240.0 -
                                      inv2 * (1.0 / 132.0 -
                                              inv2 * (691.0 / 32760.0 -
                                                      inv2 / 12.0))))));
  return shift + std::log(x) - 0.5 / x - series;
}

double trigamma(double x) {
  require_positive(x, "trigamma argument");
  double shift = 0.0;
  while (x < 10.0) {
    shift += 1.0 / (x * x);
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  const double series =
      inv + 0.5 * inv2 +
      inv * inv2 *
          (1.0 / 6.0 -
           inv2 * (1.0 / 30.0 -
                   inv2 * (1.0 / 42.0 -
                           inv2 * (1.0 / 30.0 -
                                   inv2 * (5.0 / 66.0 -
                                           inv2 * (691.0 / 2730.0 -
                                                   inv2 * 7.0 / 6.0))))));
  return shift + series;
}

double kl_gaussian(const GaussianLaw& p, const GaussianLaw& q) {
  require_positive(p.variance, "variance");
  require_positive(q.variance, "variance");
  const double d = p.mean - q.mean;
  return 0.5 * (std::log(q.variance / p.variance) +
                (p.variance + d * d) / q.variance - 1.0);
}

double kl_gamma(const GammaLaw& p, const GammaLaw& q) {
  require_positive(p.shape, "shape");
  require_positive(p.rate, "rate");
  require_positive(q.shape, "shape");
  require_positive(q.rate, "rate");
  return (p.shape - q.shape) * digamma(p.shape) - log_gamma(p.shape) +
         log_gamma(q.shape) + q.shape * std::log(p.rate / q.rate) +
         p.shape * (q.rate - p.rate) / p.rate;
}

double gaussian_logpdf(double y, double mean, double variance) {
  require_positive(variance, "variance");
  const double d = y - mean;
  return -0.5 * (std::log(2.0 * std::numbers::pi * variance) + d * d / variance);
}

double student_t_logpdf(double y, double mean, double precision, double dof) {
  require_positive(precision, "Student-t precision");
  require_positive(dof, "Student-t degrees of freedom");
  const double d = y - mean;
  return log_gamma(0.5 * (dof + 1.0)) - log_gamma(0.5 * dof) +
         0.5 * std::log(precision / (std::numbers::pi * dof)) -
         0.5 * (dof + 1.0) * std::log1p(precision * d * d / dof);
}

double student_t_cdf(double y, double mean, double precision, double dof) {
  require_positive(precision, "Student-t precision");
  require_positive(dof, "Student-t degrees of freedom");
  const boost::math::students_t_distribution<double> t(dof);
  return boost::math::cdf(t, (y - mean) * std::sqrt(precision));
}

double student_t_quantile(double p, double mean, double precision, double dof) {
  require_positive(precision, "Student-t precision");
  require_positive(dof, "Student-t degrees of freedom");
  if (!(p > 0.0 && p < 1.0)) {
    throw DomainError("quantile probability must lie in (0, 1)");
  }
  // Very small dof puts the quantile beyond double range; report the
  // infinite endpoint rather than failing.
  using Policy = boost::math::policies::policy<
      boost::math::policies::overflow_error<boost::math::policies::ignore_error>>;
  const boost::math::students_t_distribution<double, Policy> t(dof);
  return mean + boost::math::quantile(t, p) / std::sqrt(precision);
}

}  // namespace catte
