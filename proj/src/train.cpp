#include "catte/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numeric>
#include <random>

#include "catte/errors.hpp"

namespace catte {

Objective parse_objective(const std::string& name) {
  if (name == "elbo") return Objective::elbo;
  if (name == "rmse-only" || name == "rmse_only") return Objective::rmse_only;
  throw DomainError("unknown objective '" + name + "' (expected elbo or rmse-only)");
}

std::string to_string(Objective o) { return o == Objective::elbo ? "elbo" : "rmse-only"; }

Adam::Adam(double learning_rate, double beta1, double beta2, double epsilon)
    : lr_(learning_rate), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
  if (!(learning_rate > 0.0)) throw DomainError("learning rate must be > 0");
}

void Adam::step(ParameterSet& params, const std::vector<Matrix>& grads,
                std::span<const double> lr_scale) {
  if (grads.size() != params.size()) throw StructuralError("one gradient per block required");
  if (!lr_scale.empty() && lr_scale.size() != params.size()) {
    throw StructuralError("one learning-rate scale per block required");
  }
  if (m_.empty()) {
    for (std::size_t i = 0; i < params.size(); ++i) {
      m_.push_back(Matrix::Zero(params.value(i).rows(), params.value(i).cols()));
      v_.push_back(m_.back());
    }
  }
  ++step_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].size() == 0) continue;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * grads[i];
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * grads[i].cwiseProduct(grads[i]);
    const double lr = lr_scale.empty() ? lr_ : lr_ * lr_scale[i];
    params.value(i).array() -=
        lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

void TrainHistory::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write " + path.string());
  const std::size_t R = epochs.empty() ? 0 : epochs.front().power.size();
  out << "epoch,objective,elbo";
  for (std::size_t r = 0; r < R; ++r) out << ",lambda_" << r + 1;
  for (std::size_t r = 0; r < R; ++r) out << ",power_" << r + 1;
  out << '\n' << std::setprecision(12);
  for (const EpochRecord& e : epochs) {
    out << e.epoch << ',' << e.objective << ',' << e.elbo;
    for (double l : e.expected_lambda) out << ',' << l;
    for (double p : e.power) out << ',' << p;
    out << '\n';
  }
}

namespace {

Matrix column_of(const ObservationSet& data, std::span<const std::size_t> rows) {
  Matrix y(static_cast<Eigen::Index>(rows.size()), 1);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    y(static_cast<Eigen::Index>(i), 0) = data[rows[i]].value;
  }
  return y;
}

// Exact maximizers of the ELBO over q(lambda) and q(tau) with g and sigma2
// held fixed (both factors are conjugate):
//   alpha_r = a0_r + N K / 2,  beta_r = b0_r + 1/2 sum_{n,k} (g_r^k^2 + sigma2)
//   rho = c0 + N / 2,          iota = d0 + 1/2 sum_n E_n
void conjugate_update(CatteModel& model, const Matrix& y, std::span<const Matrix> g,
                      double data_scale) {
  VariationalState vs = model.variational();
  const PriorHyper& prior = model.prior();
  const double n = static_cast<double>(y.rows()) * data_scale;
  const double nk = n * static_cast<double>(g.size());
  const Eigen::Index R = g.front().cols();
  Eigen::ArrayXd sq = Eigen::ArrayXd::Zero(R);
  for (const Matrix& gk : g) sq += gk.array().square().colwise().sum().transpose();
  for (Eigen::Index r = 0; r < R; ++r) {
    const auto i = static_cast<std::size_t>(r);
    vs.alpha[i] = prior.a0[i] + 0.5 * nk;
    vs.beta[i] = prior.b0[i] + 0.5 * (data_scale * sq(r) + nk * vs.sigma2);
  }
  // E_n = y^2 - 2ys + s^2 - sum_r p_r^2 + sum_r prod_k (g^2 + sigma2)
  Matrix p = Matrix::Ones(y.rows(), R);
  Matrix v = Matrix::Ones(y.rows(), R);
  for (const Matrix& gk : g) {
    p.array() *= gk.array();
    v.array() *= gk.array().square() + vs.sigma2;
  }
  const Eigen::ArrayXd s = p.rowwise().sum().array();
  const Eigen::ArrayXd yy = y.col(0).array();
  const double err = ((yy - s).square() - p.array().square().rowwise().sum() +
                      v.array().rowwise().sum())
                         .sum();
  vs.rho = prior.c0 + 0.5 * n;
  vs.iota = prior.d0 + 0.5 * data_scale * err;
  model.set_variational(vs);
}

}  // namespace

double kl_weight(const TrainConfig& config, int epoch) {
  const int done = epoch - 1 - config.kl_hold;
  if (done < 0) return 0.0;
  if (done >= config.kl_ramp) return 1.0;
  return static_cast<double>(done) / static_cast<double>(config.kl_ramp);
}

TrainHistory train(const ObservationSet& data, CatteModel& model, const TrainConfig& config) {
  if (data.empty()) throw DomainError("training data is empty");
  if (config.epochs < 0) throw DomainError("epochs must be >= 0");
  if (data.modes() != model.modes()) throw StructuralError("data/model mode count mismatch");

  TrainHistory history;
  const TimeGrid grid = model.grid().times.empty() || model.epochs_trained == 0
                            ? training_grid(model, data)
                            : model.grid_with(data.unique_times());
  model.set_grid(grid);
  if (config.epochs == 0) return history;

  const std::size_t n = data.size();
  const std::size_t batch = config.batch_size == 0 ? n : std::min(config.batch_size, n);
  const bool rank_objective = config.objective == Objective::elbo;
  const auto trainable = [&model, rank_objective](std::size_t block) {
    return rank_objective || !model.is_variational(block);
  };

  Adam adam(config.learning_rate);
  std::vector<double> lr_scale;
  if (config.variational_lr > 0.0) {
    for (std::size_t i = 0; i < model.params().size(); ++i) {
      lr_scale.push_back(model.is_variational(i) ? config.variational_lr / config.learning_rate
                                                 : 1.0);
    }
  }
  std::mt19937_64 rng(config.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t R = static_cast<std::size_t>(model.rank());

  for (int e = 0; e < config.epochs; ++e) {
    const int epoch = model.epochs_trained + 1;
    if (batch < n) std::shuffle(order.begin(), order.end(), rng);
    EpochRecord record;
    record.epoch = epoch;
    record.power.assign(R, 0.0);
    std::size_t batches = 0;

    for (std::size_t start = 0; start < n; start += batch) {
      const std::span<const std::size_t> rows(order.data() + start, std::min(batch, n - start));
      const double scale = static_cast<double>(n) / static_cast<double>(rows.size());

      ad::Tape tape;
      const BoundParams bound = model.params().bind(tape, trainable);
      std::vector<ad::Var> g;
      try {
        g = compute_g(model, bound, data, grid, rows);
      } catch (const IntegrationError& err) {
        throw TrainingError("epoch " + std::to_string(epoch) + ": " + err.what(), epoch);
      }
      const ad::Var y = tape.constant(column_of(data, rows));

      ad::Var loss;
      double elbo_value = std::numeric_limits<double>::quiet_NaN();
      if (rank_objective) {
        const ElboTerms terms =
            elbo_terms(y, g, variational_vars(model, bound), model.prior(), scale);
        elbo_value = terms.elbo.scalar();
        const double w = kl_weight(config, epoch);
        if (w < 1.0) {
          loss = ad::neg(terms.loglik - w * terms.trajectory_kl - terms.lambda_kl - terms.tau_kl);
        } else {
          loss = ad::neg(terms.elbo);
        }
      } else {
        loss = ad::scale(ad::sum(ad::square(y - reconstruct(g))), scale);
      }
      if (!std::isfinite(loss.scalar())) {
        throw TrainingError("non-finite objective at epoch " + std::to_string(epoch), epoch);
      }
      tape.backward(loss);

      std::vector<Matrix> grads(bound.size());
      double norm2 = 0.0;
      for (std::size_t i = 0; i < bound.size(); ++i) {
        if (!trainable(i)) continue;
        grads[i] = tape.grad(bound[i]);
        norm2 += grads[i].squaredNorm();
      }
      if (!std::isfinite(norm2)) {
        throw TrainingError("non-finite gradient at epoch " + std::to_string(epoch), epoch);
      }
      const double norm = std::sqrt(norm2);
      if (config.clip_norm > 0.0 && config.clip_scope == ClipScope::global &&
          norm > config.clip_norm) {
        for (Matrix& gr : grads) gr *= config.clip_norm / norm;
      } else if (config.clip_norm > 0.0 && config.clip_scope == ClipScope::per_block) {
        for (Matrix& gr : grads) {
          const double n = gr.norm();
          if (n > config.clip_norm) gr *= config.clip_norm / n;
        }
      }
      adam.step(model.params(), grads, lr_scale);
      if (rank_objective && config.conjugate_updates) {
        std::vector<Matrix> gv;
        for (const ad::Var& gk : g) gv.push_back(gk.value());
        conjugate_update(model, y.value(), gv, scale);
      }

      record.objective += loss.scalar();
      record.elbo += elbo_value;
      for (const ad::Var& gk : g) {
        const Matrix p = gk.value().array().square().colwise().sum();
        for (std::size_t r = 0; r < R; ++r) record.power[r] += p(0, static_cast<Eigen::Index>(r));
      }
      ++batches;
    }
    record.objective /= static_cast<double>(batches);
    record.elbo /= static_cast<double>(batches);
    const VariationalState vs = model.variational();
    for (std::size_t r = 0; r < R; ++r) record.expected_lambda.push_back(vs.expected_lambda(r));
    model.epochs_trained = epoch;
    if (config.on_epoch) config.on_epoch(model, record);
    history.epochs.push_back(std::move(record));
  }
  return history;
}

TrainHistory train_ablation(const ObservationSet& data, CatteModel& model, TrainConfig config) {
  config.objective = Objective::rmse_only;
  return train(data, model, config);
}

}  // namespace catte
