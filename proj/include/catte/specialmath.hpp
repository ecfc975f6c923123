#pragma once

// Scalar special functions and the distribution primitives the ELBO is
// assembled from. All arithmetic is double precision.

namespace catte {

/// Gamma(shape, rate): density b^a x^(a-1) e^(-b x) / Gamma(a).
struct GammaLaw {
  double shape;
  double rate;

  double mean() const { return shape / rate; }
};

struct GaussianLaw {
  double mean;
  double variance;
};

/// ln Gamma(x) for x > 0. Lanczos approximation (g = 7, 9 terms).
double log_gamma(double x);

/// psi(x) = d/dx ln Gamma(x). Upward recurrence to x >= 10, then the
/// asymptotic Bernoulli series.
double digamma(double x);

/// psi'(x). Same scheme as digamma; needed for gradients through digamma.
double trigamma(double x);

double kl_gaussian(const GaussianLaw& p, const GaussianLaw& q);

/// KL(p || q) for rate-parameterized Gamma laws:
///   (a1 - a2) psi(a1) - lnG(a1) + lnG(a2) + a2 ln(b1/b2) + a1 (b2 - b1)/b1
double kl_gamma(const GammaLaw& p, const GammaLaw& q);

double gaussian_logpdf(double y, double mean, double variance);

/// Location/precision Student-t,
///   T(y | mu, s, nu) ∝ (1 + s (y - mu)^2 / nu)^(-(nu + 1)/2),
/// i.e. `precision` multiplies the squared deviation. The variance is
/// nu / ((nu - 2) s) for nu > 2.
double student_t_logpdf(double y, double mean, double precision, double dof);

double student_t_cdf(double y, double mean, double precision, double dof);

double student_t_quantile(double p, double mean, double precision, double dof);

}  // namespace catte
