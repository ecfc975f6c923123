#pragma once

// Independent reference computations shared by the unit tests and the
// acceptance runner: Monte-Carlo estimates of every ELBO term, a central
// finite-difference gradient, and a seeded tiny model.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "catte/model.hpp"
#include "catte/odeint.hpp"
#include "catte/predict.hpp"

namespace catte::oracle {

struct Estimate {
  double mean = 0.0;
  double se = 0.0;  // standard error of the mean

  double z(double exact) const { return se > 0.0 ? std::abs(mean - exact) / se : 0.0; }
};

class Accumulator {
 public:
  void add(double x) {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }
  Estimate estimate() const {
    const double var = n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0;
    return {mean_, std::sqrt(var / static_cast<double>(n_))};
  }

 private:
  long n_ = 0;
  double mean_ = 0.0, m2_ = 0.0;
};

inline double gamma_logpdf(double x, double shape, double rate) {
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

inline double normal_logpdf(double x, double mean, double var) {
  return -0.5 * std::log(2.0 * std::numbers::pi * var) - 0.5 * (x - mean) * (x - mean) / var;
}

/// E_q[ln p(y | U, tau)] with u ~ N(g, sigma2) per entry and tau ~ Gamma(rho, iota).
inline Estimate mc_expected_loglik(std::span<const double> y, std::span<const Matrix> g,
                                   const VariationalState& vs, long samples,
                                   std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::gamma_distribution<double> tau_law(vs.rho, 1.0 / vs.iota);
  const double sd = std::sqrt(vs.sigma2);
  const Eigen::Index N = g.front().rows(), R = g.front().cols();
  Accumulator acc;
  for (long s = 0; s < samples; ++s) {
    const double tau = tau_law(rng);
    double total = 0.0;
    for (Eigen::Index n = 0; n < N; ++n) {
      double f = 0.0;
      for (Eigen::Index r = 0; r < R; ++r) {
        double p = 1.0;
        for (const Matrix& gk : g) p *= gk(n, r) + sd * unit(rng);
        f += p;
      }
      const double e = y[static_cast<std::size_t>(n)] - f;
      total += 0.5 * std::log(tau) - 0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * tau * e * e;
    }
    acc.add(total);
  }
  return acc.estimate();
}

/// E_q(U)[ln q(U) - ln p(U | lambda = E[lambda])].
inline Estimate mc_trajectory_kl(std::span<const Matrix> g, const VariationalState& vs,
                                 long samples, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  const double sd = std::sqrt(vs.sigma2);
  Accumulator acc;
  for (long s = 0; s < samples; ++s) {
    double total = 0.0;
    for (const Matrix& gk : g) {
      for (Eigen::Index n = 0; n < gk.rows(); ++n) {
        for (Eigen::Index r = 0; r < gk.cols(); ++r) {
          const double u = gk(n, r) + sd * unit(rng);
          const double prior_var = 1.0 / vs.expected_lambda(static_cast<std::size_t>(r));
          total += normal_logpdf(u, gk(n, r), vs.sigma2) - normal_logpdf(u, 0.0, prior_var);
        }
      }
    }
    acc.add(total);
  }
  return acc.estimate();
}

/// KL(Gamma(a1, b1) || Gamma(a2, b2)) by sampling from the first law.
inline Estimate mc_gamma_kl(double a1, double b1, double a2, double b2, long samples,
                            std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> law(a1, 1.0 / b1);
  Accumulator acc;
  for (long s = 0; s < samples; ++s) {
    const double x = law(rng);
    acc.add(gamma_logpdf(x, a1, b1) - gamma_logpdf(x, a2, b2));
  }
  return acc.estimate();
}

inline Estimate mc_gaussian_kl(double m1, double v1, double m2, double v2, long samples,
                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> law(m1, std::sqrt(v1));
  Accumulator acc;
  for (long s = 0; s < samples; ++s) {
    const double x = law(rng);
    acc.add(normal_logpdf(x, m1, v1) - normal_logpdf(x, m2, v2));
  }
  return acc.estimate();
}

/// Sum of independent per-rank Gamma KL estimates.
inline Estimate mc_lambda_kl(const VariationalState& vs, const PriorHyper& prior, long samples,
                             std::uint64_t seed) {
  Estimate total;
  double var = 0.0;
  for (std::size_t r = 0; r < vs.alpha.size(); ++r) {
    const Estimate e =
        mc_gamma_kl(vs.alpha[r], vs.beta[r], prior.a0[r], prior.b0[r], samples, seed + r);
    total.mean += e.mean;
    var += e.se * e.se;
  }
  total.se = std::sqrt(var);
  return total;
}

// -- tiny seeded model ------------------------------------------------------

struct TinyProblem {
  CatteModel model;
  ObservationSet data;
};

inline NetworkShape tiny_shape(int rank = 2, int latent = 3) {
  NetworkShape s;
  s.rank = rank;
  s.latent_dim = latent;
  s.fourier_dim = 3;
  s.encoder_hidden = {6};
  s.dynamics_hidden = {6, 6};
  s.decoder_hidden = {6, 6};
  return s;
}

/// K = 2, R = 2, J = 3, N = 8 with moderate variational values so every
/// Monte-Carlo oracle has small variance.
inline TinyProblem make_tiny(std::uint64_t seed, int n = 8, Solver solver = Solver::rk4) {
  ModelConfig cfg;
  cfg.modes = 2;
  cfg.shape = tiny_shape();
  cfg.solver = solver;
  cfg.step = 0.05;
  cfg.seed = seed;
  PriorHyper prior = PriorHyper::uniform(2, 1e-2);
  prior.c0 = 0.5;
  prior.d0 = 0.3;
  CatteModel model(cfg, prior);

  std::mt19937_64 rng(seed + 17);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 0.3);
  std::vector<Observation> obs;
  for (int i = 0; i < n; ++i) {
    Observation o;
    o.index = {unif(rng), unif(rng)};
    o.time = unif(rng);
    o.value = std::sin(3.0 * o.index[0]) * std::cos(2.0 * o.index[1] + o.time) + noise(rng);
    obs.push_back(std::move(o));
  }
  ObservationSet data(2, std::move(obs), Normalization::identity(2));

  // Scale the decoders up so g is O(1) rather than O(1e-2).
  for (std::size_t b = 0; b < model.params().size(); ++b) {
    const std::string& name = model.params().name(b);
    if (name.find("decoder") != std::string::npos) model.params().value(b) *= 3.0;
  }
  VariationalState vs = model.variational();
  vs.alpha = {3.0, 5.0};
  vs.beta = {2.0, 1.5};
  vs.sigma2 = 0.04;
  vs.rho = 6.0;
  vs.iota = 2.5;
  model.set_variational(vs);
  model.set_grid(training_grid(model, data));
  return {std::move(model), std::move(data)};
}

// -- finite differences -----------------------------------------------------

struct GradientCheck {
  std::string block;
  double max_rel = 0.0;    // over elements, relative to the block's scale
  double norm_rel = 0.0;   // ||analytic - fd|| / max(||analytic||, ||fd||)
};

/// Central differences of elbo(data, model) for every element of every
/// parameter block, compared with the analytic gradient.
inline std::vector<GradientCheck> check_elbo_gradient(const ObservationSet& data,
                                                      CatteModel model, double h = 1e-5) {
  std::vector<Matrix> analytic;
  elbo_gradient(data, model, analytic);
  std::vector<GradientCheck> out;
  for (std::size_t b = 0; b < model.params().size(); ++b) {
    Matrix& w = model.params().value(b);
    Matrix fd(w.rows(), w.cols());
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      const double keep = w.data()[i];
      const double step = h * std::max(1.0, std::abs(keep));
      w.data()[i] = keep + step;
      const double up = elbo(data, model);
      w.data()[i] = keep - step;
      const double down = elbo(data, model);
      w.data()[i] = keep;
      fd.data()[i] = (up - down) / (2.0 * step);
    }
    const Matrix& a = analytic[b];
    const double scale = std::max({a.cwiseAbs().maxCoeff(), fd.cwiseAbs().maxCoeff(), 1e-8});
    GradientCheck c;
    c.block = model.params().name(b);
    c.max_rel = (a - fd).cwiseAbs().maxCoeff() / scale;
    c.norm_rel = (a - fd).norm() / std::max({a.norm(), fd.norm(), 1e-12});
    out.push_back(c);
  }
  return out;
}

// -- predictive ------------------------------------------------------------

/// Draws y = 1^T (*_k u^k) + e with u ~ q(U) at one coordinate, tau ~ q(tau)
/// and e ~ N(0, 1/tau).
inline std::vector<double> mc_predictive(std::span<const std::vector<double>> g,
                                         const VariationalState& vs, long samples,
                                         std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> unit(0.0, 1.0);
  std::gamma_distribution<double> tau_law(vs.rho, 1.0 / vs.iota);
  const double sd = std::sqrt(vs.sigma2);
  std::vector<double> out(static_cast<std::size_t>(samples));
  for (double& y : out) {
    double f = 0.0;
    for (std::size_t r = 0; r < g[0].size(); ++r) {
      double p = 1.0;
      for (const auto& gk : g) p *= gk[r] + sd * unit(rng);
      f += p;
    }
    y = f + unit(rng) / std::sqrt(tau_law(rng));
  }
  return out;
}

/// Kolmogorov-Smirnov distance between a sample and the law's CDF.
inline double ks_statistic(std::vector<double> sample, const PredictiveLaw& law) {
  std::sort(sample.begin(), sample.end());
  const double n = static_cast<double>(sample.size());
  double d = 0.0;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double f = law.cdf(sample[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

// -- solver order ------------------------------------------------------------

/// Final-time error of dz/ds = A z, A = [[0, 1], [-1, 0]], z(0) = (1, 0),
/// integrated to s = 1 with step h. The exact solution is (cos 1, -sin 1).
inline double linear_system_error(Solver method, double h) {
  ad::Tape tape(false);
  const Matrix at = (Matrix(2, 2) << 0.0, -1.0, 1.0, 0.0).finished();  // A^T for row states
  const ad::Var a = tape.constant(at);
  const Derivative f = [&a](const ad::Var& z, double) { return ad::matmul(z, a); };
  const ad::Var z0 = tape.constant((Matrix(1, 2) << 1.0, 0.0).finished());
  const Matrix z = integrate(f, z0, 0.0, 1.0, method, h).value();
  return std::hypot(z(0, 0) - std::cos(1.0), z(0, 1) + std::sin(1.0));
}

/// Least-squares slope of log(error) against log(h) over steps 1/10 .. 1/80.
inline double convergence_slope(Solver method) {
  std::vector<double> lx, ly;
  for (double h = 0.1; h > 0.01; h /= 2.0) {
    lx.push_back(std::log(h));
    ly.push_back(std::log(linear_system_error(method, h)));
  }
  const double n = static_cast<double>(lx.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    mx += lx[i] / n;
    my += ly[i] / n;
  }
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < lx.size(); ++i) {
    sxy += (lx[i] - mx) * (ly[i] - my);
    sxx += (lx[i] - mx) * (lx[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace catte::oracle
