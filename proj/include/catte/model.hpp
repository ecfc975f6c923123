#pragma once

// The probabilistic model: per-mode latent-ODE factor trajectories combined
// in CP form, a Gaussian-Gamma rank-revealing prior and Gamma noise
// precision, with a closed-form variational lower bound.

#include <cstdint>
#include <span>
#include <vector>

#include "catte/data.hpp"
#include "catte/odeint.hpp"

namespace catte {

/// Gamma(a0_r, b0_r) priors on the rank precisions and Gamma(c0, d0) on the
/// noise precision.
struct PriorHyper {
  std::vector<double> a0;
  std::vector<double> b0;
  double c0 = 1e-6;
  double d0 = 1e-6;

  static PriorHyper uniform(int rank, double value = 1e-6);
  void validate(int rank) const;
};

/// Natural-scale view of the variational parameters.
struct VariationalState {
  std::vector<double> alpha;  // q(lambda_r) shape
  std::vector<double> beta;   // q(lambda_r) rate
  double sigma2 = 1e-6;       // shared trajectory variance
  double rho = 1e-6;          // q(tau) shape
  double iota = 1e-6;         // q(tau) rate

  double expected_lambda(std::size_t r) const { return alpha[r] / beta[r]; }
  double expected_tau() const { return rho / iota; }
};

struct ModelConfig {
  int modes = 2;
  NetworkShape shape;
  Solver solver = Solver::rk4;
  double step = 0.0;  // <= 0: default_step of the training grid
  double init_variational = 1e-6;
  std::uint64_t seed = 0;
};

class CatteModel {
 public:
  CatteModel(ModelConfig config, PriorHyper prior);

  const ModelConfig& config() const { return config_; }
  int rank() const { return config_.shape.rank; }
  int modes() const { return config_.modes; }

  ParameterSet& params() { return params_; }
  const ParameterSet& params() const { return params_; }
  const std::vector<ModeNetwork>& networks() const { return networks_; }
  const PriorHyper& prior() const { return prior_; }
  void set_prior(PriorHyper prior);

  VariationalState variational() const;
  void set_variational(const VariationalState& vs);
  /// True for the log-parameterized variational blocks.
  bool is_variational(std::size_t block) const;

  std::size_t log_alpha_block() const { return log_alpha_; }
  std::size_t log_beta_block() const { return log_beta_; }
  std::size_t log_sigma2_block() const { return log_sigma2_; }
  std::size_t log_rho_block() const { return log_rho_; }
  std::size_t log_iota_block() const { return log_iota_; }

  /// Timestamps the model was trained on; prediction rolls over their union
  /// with the query times using the same step.
  const TimeGrid& grid() const { return grid_; }
  void set_grid(TimeGrid grid) { grid_ = std::move(grid); }
  TimeGrid grid_with(std::vector<double> extra_times) const;

  const Normalization& normalization() const { return normalization_; }
  void set_normalization(Normalization n) { normalization_ = std::move(n); }

  int epochs_trained = 0;

 private:
  ModelConfig config_;
  PriorHyper prior_;
  ParameterSet params_;
  std::vector<ModeNetwork> networks_;
  std::size_t log_alpha_ = 0, log_beta_ = 0, log_sigma2_ = 0, log_rho_ = 0, log_iota_ = 0;
  TimeGrid grid_;
  Normalization normalization_;
};

// -- closed-form ELBO terms on the tape -------------------------------------
//
// g is a tuple of K matrices, each N x R: row n of g[k] is g^k(i_k^n, t_n).

struct VariationalVars {
  ad::Var alpha;   // 1 x R
  ad::Var beta;    // 1 x R
  ad::Var sigma2;  // 1 x 1
  ad::Var rho;     // 1 x 1
  ad::Var iota;    // 1 x 1
};

/// exp() of the model's log blocks as bound on the tape.
VariationalVars variational_vars(const CatteModel& model, const BoundParams& bound);
/// Constants holding `vs` on the tape.
VariationalVars variational_vars(ad::Tape& tape, const VariationalState& vs);

/// 1^T (g^1 * ... * g^K) per row; N x 1.
ad::Var reconstruct(std::span<const ad::Var> g);
double reconstruct(std::span<const std::vector<double>> g);

/// E_q[(y_n - 1^T (*_k u^k))^2] per row (N x 1):
///   y^2 - 2 y s + s^2 - sum_r p_r^2 + sum_r prod_k (g_r^k^2 + sigma2)
/// with p_r = prod_k g_r^k and s = sum_r p_r. This is the sum over (r, r')
/// of prod_k (g_r g_r' + sigma2 [r = r']) with the off-diagonal part folded
/// into s^2 - sum p_r^2.
ad::Var expected_model_error(const ad::Var& y, std::span<const ad::Var> g,
                             const ad::Var& sigma2);

/// Data-dependent terms are multiplied by data_scale (N_total / N_batch
/// for mini-batches).
ad::Var expected_loglik(const ad::Var& y, std::span<const ad::Var> g, const VariationalVars& v,
                        double data_scale = 1.0);
ad::Var trajectory_kl(std::span<const ad::Var> g, const VariationalVars& v,
                      double data_scale = 1.0);
ad::Var lambda_kl(const VariationalVars& v, const PriorHyper& prior);
ad::Var tau_kl(const VariationalVars& v, const PriorHyper& prior);

struct ElboTerms {
  ad::Var loglik;
  ad::Var trajectory_kl;
  ad::Var lambda_kl;
  ad::Var tau_kl;
  ad::Var elbo;
};

ElboTerms elbo_terms(const ad::Var& y, std::span<const ad::Var> g, const VariationalVars& v,
                     const PriorHyper& prior, double data_scale = 1.0);

// Value-only conveniences over plain matrices.
double expected_loglik(std::span<const double> y, std::span<const Matrix> g,
                       const VariationalState& vs);
double trajectory_kl(std::span<const Matrix> g, const VariationalState& vs);
double lambda_kl(const VariationalState& vs, const PriorHyper& prior);
double tau_kl(const VariationalState& vs, const PriorHyper& prior);

// -- model forward ----------------------------------------------------------

/// Training grid for a data set under the model's step setting.
TimeGrid training_grid(const CatteModel& model, const ObservationSet& data);

/// Rolls all unique indexes of `data` over `grid` and returns g for the
/// selected rows (all rows when `rows` is empty).
std::vector<ad::Var> compute_g(const CatteModel& model, const BoundParams& bound,
                               const ObservationSet& data, const TimeGrid& grid,
                               std::span<const std::size_t> rows = {});

/// Full-batch ELBO value of the model on `data`.
double elbo(const ObservationSet& data, const CatteModel& model);

/// Full-batch ELBO and its gradient, one matrix per parameter block.
double elbo_gradient(const ObservationSet& data, const CatteModel& model,
                     std::vector<Matrix>& grads);

/// g values (no gradients) at the training coordinates of `data`.
std::vector<Matrix> factor_values(const CatteModel& model, const ObservationSet& data);

}  // namespace catte
