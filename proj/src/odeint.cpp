#include "catte/odeint.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "catte/errors.hpp"

namespace catte {

Solver parse_solver(std::string_view name) {
  if (name == "euler") return Solver::euler;
  if (name == "rk4") return Solver::rk4;
  throw DomainError("unknown solver '" + std::string(name) + "' (expected euler or rk4)");
}

std::string_view to_string(Solver s) { return s == Solver::euler ? "euler" : "rk4"; }

double default_step(std::span<const double> sorted_times) {
  if (sorted_times.empty()) return 0.25;
  const double span = sorted_times.back() - sorted_times.front();
  if (span > 0.0) return span / (4.0 * static_cast<double>(sorted_times.size()));
  return sorted_times.back() > 0.0 ? sorted_times.back() / 4.0 : 0.25;
}

TimeGrid TimeGrid::build(std::vector<double> times, double step) {
  for (double t : times) {
    if (!std::isfinite(t) || t < 0.0) {
      throw DomainError("grid timestamps must be finite and >= 0, got " + std::to_string(t));
    }
  }
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end()), times.end());
  TimeGrid grid;
  grid.step = step > 0.0 ? step : default_step(times);
  grid.times = std::move(times);
  return grid;
}

std::size_t TimeGrid::position(double t) const {
  auto it = std::lower_bound(times.begin(), times.end(), t);
  if (it == times.end() || *it != t) {
    throw LookupError("timestamp " + std::to_string(t) + " is not on the time grid");
  }
  return static_cast<std::size_t>(it - times.begin());
}

namespace {

void check_finite(const ad::Var& state, double time) {
  if (!state.value().allFinite()) {
    throw IntegrationError("non-finite ODE state at t = " + std::to_string(time), time);
  }
}

}  // namespace

ad::Var integrate(const Derivative& f, ad::Var state, double from, double to, Solver method,
                  double step) {
  if (!(step > 0.0)) throw DomainError("ODE step must be > 0");
  if (to < from) throw DomainError("integration end precedes start");
  if (to == from) return state;
  const auto steps =
      static_cast<int>(std::max(1.0, std::ceil((to - from) / step - 1e-9)));
  const double dt = (to - from) / steps;
  for (int s = 0; s < steps; ++s) {
    const double t = from + dt * s;
    if (method == Solver::euler) {
      state = state + ad::scale(f(state, t), dt);
    } else {
      const ad::Var k1 = f(state, t);
      const ad::Var k2 = f(state + ad::scale(k1, 0.5 * dt), t + 0.5 * dt);
      const ad::Var k3 = f(state + ad::scale(k2, 0.5 * dt), t + 0.5 * dt);
      const ad::Var k4 = f(state + ad::scale(k3, dt), t + dt);
      state = state + ad::scale(k1 + ad::scale(k2, 2.0) + ad::scale(k3, 2.0) + k4, dt / 6.0);
    }
    check_finite(state, s + 1 == steps ? to : t + dt);
  }
  return state;
}

ad::Var ode_solve(const ModeNetwork& net, const BoundParams& bound, const ad::Var& table,
                  double from, double to, Solver method, double step) {
  const Derivative f = [&net, &bound](const ad::Var& z, double t) {
    check_finite(z, t);
    return dynamics_step(net, bound, z, t);
  };
  return integrate(f, table, from, to, method, step);
}

RolledTrajectories roll_trajectories(std::span<const ModeNetwork> modes,
                                     const BoundParams& bound,
                                     std::span<const std::vector<double>> unique_indexes,
                                     const TimeGrid& grid, Solver method) {
  if (unique_indexes.size() != modes.size()) {
    throw StructuralError("one unique-index table per mode required");
  }
  RolledTrajectories out;
  out.states.resize(modes.size());
  std::vector<ad::Var> current;
  for (std::size_t k = 0; k < modes.size(); ++k) {
    current.push_back(encode_initial_state(modes[k], bound, unique_indexes[k]));
  }
  double from = 0.0;
  for (double t : grid.times) {
    for (std::size_t k = 0; k < modes.size(); ++k) {
      current[k] = ode_solve(modes[k], bound, current[k], from, t, method, grid.step);
      out.states[k].push_back(current[k]);
    }
    from = t;
  }
  return out;
}

GatherPlan plan_gather(std::span<const std::vector<double>> unique_indexes,
                       const TimeGrid& grid,
                       std::span<const std::vector<double>> query_indexes,
                       std::span<const double> query_times) {
  if (query_indexes.size() != unique_indexes.size()) {
    throw StructuralError("query arity does not match the number of modes");
  }
  GatherPlan plan;
  plan.time_position.reserve(query_times.size());
  for (double t : query_times) {
    plan.time_position.push_back(static_cast<Eigen::Index>(grid.position(t)));
  }
  for (std::size_t k = 0; k < unique_indexes.size(); ++k) {
    const auto& table = unique_indexes[k];
    if (query_indexes[k].size() != query_times.size()) {
      throw StructuralError("query index and time columns differ in length");
    }
    std::vector<Eigen::Index> pos;
    pos.reserve(query_times.size());
    for (double i : query_indexes[k]) {
      auto it = std::lower_bound(table.begin(), table.end(), i);
      if (it == table.end() || *it != i) {
        throw LookupError("index " + std::to_string(i) + " of mode " + std::to_string(k) +
                          " is not in the state table");
      }
      pos.push_back(static_cast<Eigen::Index>(it - table.begin()));
    }
    plan.index_position.push_back(std::move(pos));
  }
  return plan;
}

std::vector<ad::Var> gather_g(std::span<const ModeNetwork> modes, const BoundParams& bound,
                              const RolledTrajectories& rolled, const GatherPlan& plan) {
  if (rolled.states.size() != modes.size() || plan.index_position.size() != modes.size()) {
    throw StructuralError("gather_g: mode count mismatch");
  }
  std::vector<ad::Var> g;
  g.reserve(modes.size());
  for (std::size_t k = 0; k < modes.size(); ++k) {
    const auto& tables = rolled.states[k];
    if (tables.empty()) throw LookupError("gather_g: no rolled timestamps");
    const Eigen::Index rows = tables.front().rows();
    const ad::Var stacked = tables.size() == 1 ? tables.front() : ad::concat_rows(tables);
    std::vector<Eigen::Index> flat(plan.time_position.size());
    for (std::size_t n = 0; n < flat.size(); ++n) {
      if (plan.time_position[n] >= static_cast<Eigen::Index>(tables.size())) {
        throw LookupError("gather_g: timestamp position out of range");
      }
      flat[n] = plan.time_position[n] * rows + plan.index_position[k][n];
    }
    // The decoder is row-wise, so decode each distinct (time, index) row
    // once and fan the results out to the observations.
    std::vector<Eigen::Index> distinct = flat;
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    for (auto& f : flat) {
      f = std::lower_bound(distinct.begin(), distinct.end(), f) - distinct.begin();
    }
    const ad::Var decoded = decode(modes[k], bound, ad::gather_rows(stacked, std::move(distinct)));
    g.push_back(ad::gather_rows(decoded, std::move(flat)));
  }
  return g;
}

}  // namespace catte
