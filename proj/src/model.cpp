#include "catte/model.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "catte/errors.hpp"
#include "catte/specialmath.hpp"

namespace catte {

PriorHyper PriorHyper::uniform(int rank, double value) {
  PriorHyper p;
  p.a0.assign(static_cast<std::size_t>(rank), value);
  p.b0.assign(static_cast<std::size_t>(rank), value);
  p.c0 = value;
  p.d0 = value;
  return p;
}

void PriorHyper::validate(int rank) const {
  if (a0.size() != static_cast<std::size_t>(rank) || b0.size() != static_cast<std::size_t>(rank)) {
    throw StructuralError("prior hyperparameters must have one entry per rank");
  }
  auto positive = [](double x) { return std::isfinite(x) && x > 0.0; };
  for (std::size_t r = 0; r < a0.size(); ++r) {
    if (!positive(a0[r]) || !positive(b0[r])) throw DomainError("prior a0/b0 must be > 0");
  }
  if (!positive(c0) || !positive(d0)) throw DomainError("prior c0/d0 must be > 0");
}

CatteModel::CatteModel(ModelConfig config, PriorHyper prior)
    : config_(std::move(config)), prior_(std::move(prior)) {
  if (config_.modes < 2) throw StructuralError("a CP model needs at least two modes");
  prior_.validate(config_.shape.rank);
  if (!(config_.init_variational > 0.0)) {
    throw DomainError("initial variational values must be > 0");
  }
  std::mt19937_64 rng(config_.seed);
  for (int k = 0; k < config_.modes; ++k) {
    networks_.push_back(make_mode_network(params_, k, config_.shape, rng));
  }
  const double init = std::log(config_.init_variational);
  const Eigen::Index R = config_.shape.rank;
  log_alpha_ = params_.add("q.log_alpha", Matrix::Constant(1, R, init));
  log_beta_ = params_.add("q.log_beta", Matrix::Constant(1, R, init));
  log_sigma2_ = params_.add("q.log_sigma2", Matrix::Constant(1, 1, init));
  log_rho_ = params_.add("q.log_rho", Matrix::Constant(1, 1, init));
  log_iota_ = params_.add("q.log_iota", Matrix::Constant(1, 1, init));
  normalization_ = Normalization::identity(config_.modes);
}

void CatteModel::set_prior(PriorHyper prior) {
  prior.validate(rank());
  prior_ = std::move(prior);
}

VariationalState CatteModel::variational() const {
  VariationalState vs;
  const Matrix& la = params_.value(log_alpha_);
  const Matrix& lb = params_.value(log_beta_);
  for (Eigen::Index r = 0; r < la.cols(); ++r) {
    vs.alpha.push_back(std::exp(la(0, r)));
    vs.beta.push_back(std::exp(lb(0, r)));
  }
  vs.sigma2 = std::exp(params_.value(log_sigma2_)(0, 0));
  vs.rho = std::exp(params_.value(log_rho_)(0, 0));
  vs.iota = std::exp(params_.value(log_iota_)(0, 0));
  return vs;
}

void CatteModel::set_variational(const VariationalState& vs) {
  const auto R = static_cast<std::size_t>(rank());
  if (vs.alpha.size() != R || vs.beta.size() != R) {
    throw StructuralError("variational state rank mismatch");
  }
  for (std::size_t r = 0; r < R; ++r) {
    if (!(vs.alpha[r] > 0.0 && vs.beta[r] > 0.0)) throw DomainError("alpha/beta must be > 0");
    params_.value(log_alpha_)(0, static_cast<Eigen::Index>(r)) = std::log(vs.alpha[r]);
    params_.value(log_beta_)(0, static_cast<Eigen::Index>(r)) = std::log(vs.beta[r]);
  }
  if (!(vs.sigma2 > 0.0 && vs.rho > 0.0 && vs.iota > 0.0)) {
    throw DomainError("sigma2/rho/iota must be > 0");
  }
  params_.value(log_sigma2_)(0, 0) = std::log(vs.sigma2);
  params_.value(log_rho_)(0, 0) = std::log(vs.rho);
  params_.value(log_iota_)(0, 0) = std::log(vs.iota);
}

bool CatteModel::is_variational(std::size_t block) const {
  return block == log_alpha_ || block == log_beta_ || block == log_sigma2_ ||
         block == log_rho_ || block == log_iota_;
}

TimeGrid CatteModel::grid_with(std::vector<double> extra_times) const {
  extra_times.insert(extra_times.end(), grid_.times.begin(), grid_.times.end());
  const double step = grid_.step > 0.0 ? grid_.step : config_.step;
  return TimeGrid::build(std::move(extra_times), step);
}

// -- ELBO terms -------------------------------------------------------------

namespace {

void require_tuple(std::span<const ad::Var> g) {
  if (g.empty()) throw StructuralError("empty factor tuple");
  for (const ad::Var& gk : g) {
    if (gk.rows() != g[0].rows() || gk.cols() != g[0].cols()) {
      throw StructuralError("factor tuple members differ in shape");
    }
  }
}

ad::Var product(std::span<const ad::Var> parts) {
  ad::Var p = parts[0];
  for (std::size_t k = 1; k < parts.size(); ++k) p = p * parts[k];
  return p;
}

Matrix row_of(std::span<const double> v) {
  Matrix m(1, static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = v[i];
  return m;
}

}  // namespace

VariationalVars variational_vars(const CatteModel& model, const BoundParams& bound) {
  return {ad::exp(bound[model.log_alpha_block()]), ad::exp(bound[model.log_beta_block()]),
          ad::exp(bound[model.log_sigma2_block()]), ad::exp(bound[model.log_rho_block()]),
          ad::exp(bound[model.log_iota_block()])};
}

VariationalVars variational_vars(ad::Tape& tape, const VariationalState& vs) {
  if (vs.alpha.size() != vs.beta.size()) throw StructuralError("alpha/beta size mismatch");
  return {tape.constant(row_of(vs.alpha)), tape.constant(row_of(vs.beta)),
          tape.constant(vs.sigma2), tape.constant(vs.rho), tape.constant(vs.iota)};
}

ad::Var reconstruct(std::span<const ad::Var> g) {
  require_tuple(g);
  return ad::row_sum(product(g));
}

double reconstruct(std::span<const std::vector<double>> g) {
  if (g.empty()) throw StructuralError("empty factor tuple");
  const std::size_t R = g[0].size();
  for (const auto& gk : g) {
    if (gk.size() != R) throw StructuralError("factor vectors differ in length");
  }
  double total = 0.0;
  for (std::size_t r = 0; r < R; ++r) {
    double p = 1.0;
    for (const auto& gk : g) p *= gk[r];
    total += p;
  }
  return total;
}

ad::Var expected_model_error(const ad::Var& y, std::span<const ad::Var> g,
                             const ad::Var& sigma2) {
  require_tuple(g);
  if (y.rows() != g[0].rows() || y.cols() != 1) {
    throw StructuralError("observations do not align with the factor tuple");
  }
  const ad::Var p = product(g);
  const ad::Var s = ad::row_sum(p);
  std::vector<ad::Var> second;
  second.reserve(g.size());
  for (const ad::Var& gk : g) second.push_back(ad::add_scalar(ad::square(gk), sigma2));
  const ad::Var diag = ad::row_sum(product(second));
  return ad::square(y) - ad::scale(y * s, 2.0) + ad::square(s) -
         ad::row_sum(ad::square(p)) + diag;
}

ad::Var expected_loglik(const ad::Var& y, std::span<const ad::Var> g, const VariationalVars& v,
                        double data_scale) {
  const double n = static_cast<double>(y.rows());
  const ad::Var err = ad::sum(expected_model_error(y, g, v.sigma2));
  const ad::Var e_log_tau = ad::digamma(v.rho) - ad::log(v.iota);
  const ad::Var e_tau = v.rho / v.iota;
  const ad::Var value = ad::add_constant(ad::scale(e_log_tau, 0.5 * n),
                                         -0.5 * n * std::log(2.0 * std::numbers::pi)) -
                        ad::scale(e_tau * err, 0.5);
  return ad::scale(value, data_scale);
}

ad::Var trajectory_kl(std::span<const ad::Var> g, const VariationalVars& v, double data_scale) {
  require_tuple(g);
  if (!(v.sigma2.scalar() > 0.0)) throw DomainError("trajectory_kl: sigma2 must be > 0");
  const Eigen::Index R = g[0].cols();
  if (v.alpha.cols() != R || v.beta.cols() != R) {
    throw StructuralError("trajectory_kl: variational rank mismatch");
  }
  const double nk = static_cast<double>(g[0].rows()) * static_cast<double>(g.size());
  // sum over n, k of g_r^2, per rank
  ad::Var power = ad::col_sum(ad::square(g[0]));
  for (std::size_t k = 1; k < g.size(); ++k) power = power + ad::col_sum(ad::square(g[k]));
  const ad::Var precision = v.alpha / v.beta;
  const ad::Var log_ratio = ad::sum(ad::log(v.beta) - ad::log(v.alpha));
  const ad::Var quad = ad::sum(precision * ad::add_scalar(power, ad::scale(v.sigma2, nk)));
  const ad::Var value =
      ad::scale(ad::add_constant(ad::scale(log_ratio, nk) -
                                     ad::scale(ad::log(v.sigma2), nk * static_cast<double>(R)) +
                                     quad,
                                 -nk * static_cast<double>(R)),
                0.5);
  return ad::scale(value, data_scale);
}

namespace {

ad::Var gamma_kl(const ad::Var& shape, const ad::Var& rate, const Matrix& a0, const Matrix& b0) {
  ad::Tape& tape = *shape.tape();
  const ad::Var a0v = tape.constant(a0);
  const ad::Var b0v = tape.constant(b0);
  const Matrix lgamma_a0 = a0.unaryExpr([](double x) { return log_gamma(x); });
  const Matrix log_b0 = b0.array().log();
  const ad::Var terms = (shape - a0v) * ad::digamma(shape) - ad::lgamma(shape) +
                        tape.constant(lgamma_a0) + a0v * (ad::log(rate) - tape.constant(log_b0)) +
                        shape * (b0v - rate) / rate;
  return ad::sum(terms);
}

}  // namespace

ad::Var lambda_kl(const VariationalVars& v, const PriorHyper& prior) {
  prior.validate(static_cast<int>(v.alpha.cols()));
  return gamma_kl(v.alpha, v.beta, row_of(prior.a0), row_of(prior.b0));
}

ad::Var tau_kl(const VariationalVars& v, const PriorHyper& prior) {
  return gamma_kl(v.rho, v.iota, Matrix::Constant(1, 1, prior.c0),
                  Matrix::Constant(1, 1, prior.d0));
}

ElboTerms elbo_terms(const ad::Var& y, std::span<const ad::Var> g, const VariationalVars& v,
                     const PriorHyper& prior, double data_scale) {
  ElboTerms t;
  t.loglik = expected_loglik(y, g, v, data_scale);
  t.trajectory_kl = trajectory_kl(g, v, data_scale);
  t.lambda_kl = lambda_kl(v, prior);
  t.tau_kl = tau_kl(v, prior);
  t.elbo = t.loglik - t.trajectory_kl - t.lambda_kl - t.tau_kl;
  return t;
}

namespace {

std::vector<ad::Var> constants(ad::Tape& tape, std::span<const Matrix> g) {
  std::vector<ad::Var> out;
  for (const Matrix& m : g) out.push_back(tape.constant(m));
  return out;
}

ad::Var column(ad::Tape& tape, std::span<const double> y) {
  Matrix m(static_cast<Eigen::Index>(y.size()), 1);
  for (std::size_t i = 0; i < y.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = y[i];
  return tape.constant(std::move(m));
}

}  // namespace

double expected_loglik(std::span<const double> y, std::span<const Matrix> g,
                       const VariationalState& vs) {
  ad::Tape tape(false);
  const auto gv = constants(tape, g);
  return expected_loglik(column(tape, y), gv, variational_vars(tape, vs)).scalar();
}

double trajectory_kl(std::span<const Matrix> g, const VariationalState& vs) {
  ad::Tape tape(false);
  const auto gv = constants(tape, g);
  return trajectory_kl(gv, variational_vars(tape, vs)).scalar();
}

double lambda_kl(const VariationalState& vs, const PriorHyper& prior) {
  ad::Tape tape(false);
  return lambda_kl(variational_vars(tape, vs), prior).scalar();
}

double tau_kl(const VariationalState& vs, const PriorHyper& prior) {
  ad::Tape tape(false);
  return tau_kl(variational_vars(tape, vs), prior).scalar();
}

// -- forward ----------------------------------------------------------------

TimeGrid training_grid(const CatteModel& model, const ObservationSet& data) {
  return TimeGrid::build(data.unique_times(), model.config().step);
}

std::vector<ad::Var> compute_g(const CatteModel& model, const BoundParams& bound,
                               const ObservationSet& data, const TimeGrid& grid,
                               std::span<const std::size_t> rows) {
  if (data.modes() != model.modes()) {
    throw StructuralError("data has " + std::to_string(data.modes()) +
                          " modes, model expects " + std::to_string(model.modes()));
  }
  const RolledTrajectories rolled = roll_trajectories(
      model.networks(), bound, data.unique_index_tables(), grid, model.config().solver);

  std::vector<std::vector<double>> idx(static_cast<std::size_t>(model.modes()));
  std::vector<double> times;
  auto take = [&](const Observation& o) {
    for (int k = 0; k < model.modes(); ++k) idx[k].push_back(o.index[k]);
    times.push_back(o.time);
  };
  if (rows.empty()) {
    for (const Observation& o : data.records()) take(o);
  } else {
    for (std::size_t n : rows) take(data[n]);
  }
  const GatherPlan plan = plan_gather(data.unique_index_tables(), grid, idx, times);
  return gather_g(model.networks(), bound, rolled, plan);
}

namespace {

TimeGrid grid_for(const CatteModel& model, const ObservationSet& data) {
  return model.grid().times.empty() ? training_grid(model, data)
                                    : model.grid_with(data.unique_times());
}

}  // namespace

double elbo(const ObservationSet& data, const CatteModel& model) {
  ad::Tape tape(false);
  const BoundParams bound = model.params().bind(tape);
  const auto g = compute_g(model, bound, data, grid_for(model, data));
  const auto y = data.values();
  return elbo_terms(column(tape, y), g, variational_vars(model, bound), model.prior())
      .elbo.scalar();
}

double elbo_gradient(const ObservationSet& data, const CatteModel& model,
                     std::vector<Matrix>& grads) {
  ad::Tape tape;
  const BoundParams bound = model.params().bind(tape);
  const auto g = compute_g(model, bound, data, grid_for(model, data));
  const auto y = data.values();
  const ad::Var value =
      elbo_terms(column(tape, y), g, variational_vars(model, bound), model.prior()).elbo;
  tape.backward(value);
  grads.clear();
  for (const ad::Var& b : bound) grads.push_back(tape.grad(b));
  return value.scalar();
}

std::vector<Matrix> factor_values(const CatteModel& model, const ObservationSet& data) {
  ad::Tape tape(false);
  const BoundParams bound = model.params().bind(tape);
  const auto g = compute_g(model, bound, data, grid_for(model, data));
  std::vector<Matrix> out;
  for (const ad::Var& v : g) out.push_back(v.value());
  return out;
}

}  // namespace catte
