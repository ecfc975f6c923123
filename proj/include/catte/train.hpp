#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "catte/model.hpp"

namespace catte {

enum class Objective {
  elbo,       // maximize the closed-form ELBO (rank determination on)
  rmse_only,  // minimize squared error only, variational state frozen
};

Objective parse_objective(const std::string& name);
std::string to_string(Objective o);

/// Adam with the usual defaults; moments are kept per parameter block.
class Adam {
 public:
  explicit Adam(double learning_rate, double beta1 = 0.9, double beta2 = 0.999,
                double epsilon = 1e-8);

  /// One update of every block whose gradient is non-empty. `lr_scale`,
  /// when non-empty, multiplies the learning rate per block.
  void step(ParameterSet& params, const std::vector<Matrix>& grads,
            std::span<const double> lr_scale = {});

  long steps() const { return step_; }
  double learning_rate() const { return lr_; }

 private:
  double lr_, beta1_, beta2_, eps_;
  long step_ = 0;
  std::vector<Matrix> m_, v_;
};

/// How clip_norm is applied to the gradient.
enum class ClipScope {
  global,     // one norm over all blocks
  per_block,  // each parameter block clipped on its own
  none,
};

struct EpochRecord {
  int epoch = 0;
  double objective = 0.0;  // minimized quantity (negated ELBO or squared error)
  double elbo = 0.0;       // NaN under rmse_only
  std::vector<double> expected_lambda;
  std::vector<double> power;  // sum_n sum_k g_r^2
};

struct TrainHistory {
  std::vector<EpochRecord> epochs;

  /// Columns: epoch,objective,elbo,lambda_1..lambda_R,power_1..power_R
  void write_csv(const std::filesystem::path& path) const;
};

struct TrainConfig {
  int epochs = 2000;
  double learning_rate = 5e-3;
  std::size_t batch_size = 0;  // 0: full batch
  std::uint64_t seed = 0;
  Objective objective = Objective::elbo;
  double clip_norm = 100.0;
  ClipScope clip_scope = ClipScope::per_block;
  /// Learning rate of the log-variational blocks; <= 0 uses learning_rate.
  double variational_lr = 0.0;
  /// After each step, set q(lambda) and q(tau) to their exact maximizers
  /// given the current trajectories and sigma2.
  bool conjugate_updates = false;
  /// Weight on trajectory_kl: 0 for the first kl_hold epochs, then a
  /// linear ramp reaching 1 after kl_ramp more. Both 0: plain ELBO.
  int kl_hold = 0;
  int kl_ramp = 0;
  /// Called after every epoch; used for progress logging and checkpoints.
  std::function<void(const CatteModel&, const EpochRecord&)> on_epoch;
};

/// Trajectory-KL weight used at a 1-based epoch.
double kl_weight(const TrainConfig& config, int epoch);

/// Algorithm: each step rolls every unique index over the full time grid,
/// gathers g for the batch rows, evaluates the objective and takes one Adam
/// step on all trainable blocks. The data set is not modified.
TrainHistory train(const ObservationSet& data, CatteModel& model, const TrainConfig& config);

/// train() with Objective::rmse_only.
TrainHistory train_ablation(const ObservationSet& data, CatteModel& model, TrainConfig config);

}  // namespace catte
