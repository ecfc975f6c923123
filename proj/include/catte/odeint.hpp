#pragma once

// Fixed-step integration of the per-mode latent ODEs. Gradients flow through
// the unrolled solver steps recorded on the tape.

#include <functional>
#include <span>
#include <string_view>
#include <vector>

#include "catte/nets.hpp"

namespace catte {

enum class Solver { euler, rk4 };

Solver parse_solver(std::string_view name);
std::string_view to_string(Solver s);

/// Sorted unique timestamps plus the solver step. Consecutive grid points
/// t_{i-1} -> t_i are joined by ceil((t_i - t_{i-1}) / step) equal substeps.
struct TimeGrid {
  std::vector<double> times;
  double step = 0.0;

  /// Sorts and deduplicates `times`; step <= 0 selects default_step.
  static TimeGrid build(std::vector<double> times, double step = 0.0);

  /// Exact position of t in `times`; LookupError when absent.
  std::size_t position(double t) const;
  std::size_t size() const { return times.size(); }
};

/// (t_max - t_min) / (4 T), falling back to t_max / 4 (or 0.25) for a
/// degenerate range.
double default_step(std::span<const double> sorted_times);

using Derivative = std::function<ad::Var(const ad::Var& state, double time)>;

/// Integrates d state / ds = f(state, s) from `from` to `to`. Throws
/// IntegrationError naming the time at which a non-finite state appears.
ad::Var integrate(const Derivative& f, ad::Var state, double from, double to, Solver method,
                  double step);

/// Advances every row of a mode's state table under its dynamics network.
ad::Var ode_solve(const ModeNetwork& net, const BoundParams& bound, const ad::Var& table,
                  double from, double to, Solver method, double step);

/// states[k][i] is the U_k x J table of mode k at grid.times[i].
struct RolledTrajectories {
  std::vector<std::vector<ad::Var>> states;
};

/// Encodes every unique index at t = 0 and rolls all modes forward across
/// the grid. Modes are uncoupled, so they share the sweep over time steps
/// but each advances its own table.
RolledTrajectories roll_trajectories(std::span<const ModeNetwork> modes,
                                     const BoundParams& bound,
                                     std::span<const std::vector<double>> unique_indexes,
                                     const TimeGrid& grid, Solver method);

/// Row lookups of N observations into the rolled tables.
struct GatherPlan {
  std::vector<Eigen::Index> time_position;                // N
  std::vector<std::vector<Eigen::Index>> index_position;  // K x N
};

/// Exact lookup; an index or timestamp not present in the tables is a
/// LookupError (no interpolation).
GatherPlan plan_gather(std::span<const std::vector<double>> unique_indexes,
                       const TimeGrid& grid,
                       std::span<const std::vector<double>> query_indexes,  // K x N
                       std::span<const double> query_times);

/// Decoded factors per observation: K matrices of shape N x R.
std::vector<ad::Var> gather_g(std::span<const ModeNetwork> modes, const BoundParams& bound,
                              const RolledTrajectories& rolled, const GatherPlan& plan);

}  // namespace catte
