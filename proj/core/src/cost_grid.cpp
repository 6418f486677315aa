#include <algorithm>
#include <cmath>
#include <functional>

#include <fmt/format.h>

#include "losscost/cost_dist.hpp"
#include "losscost/error.hpp"
#include "losscost/stationary.hpp"

namespace losscost {

std::vector<double> CostGrid::state_marginal() const {
  std::vector<double> out(states, 0.0);
  const int width = r_max + 1;
  for (std::size_t i = 0; i < states; ++i)
    for (int r = 0; r < width; ++r) out[i] += mass[i * width + r];
  return out;
}

std::vector<double> CostGrid::total_cost() const {
  std::vector<double> out(r_max + 1, 0.0);
  const int width = r_max + 1;
  for (std::size_t i = 0; i < states; ++i)
    for (int r = 0; r < width; ++r) out[r] += mass[i * width + r];
  return out;
}

double CostGrid::mean_cost() const {
  const auto total = total_cost();
  double m = 0.0;
  for (int r = 0; r <= r_max; ++r) m += r * total[r];
  return m;
}

double max_outflow_rate(const StateSpace& space, std::span<const TrafficClass> classes) {
  double arrivals = 0.0;
  for (const auto& c : classes) arrivals += c.lambda;
  double best = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i) {
    double rate = arrivals;
    for (int j = 0; j < space.classes(); ++j) rate += classes[j].mu * space.calls(i, j);
    best = std::max(best, rate);
  }
  return best;
}

int default_r_max(std::span<const TrafficClass> classes, double t) {
  double mean = 0.0;
  double var = 0.0;
  int largest = 0;
  for (const auto& c : classes) {
    mean += t * c.lambda * c.omega;
    var += t * c.lambda * c.omega * static_cast<double>(c.omega);
    largest = std::max(largest, c.omega);
  }
  if (largest == 0) return 0;
  return static_cast<int>(std::ceil(mean + 10.0 * std::sqrt(var))) + largest;
}

namespace {

struct Stepping {
  double dt;
  int steps;
};

Stepping check_stepping(const StateSpace& space, std::span<const TrafficClass> classes,
                        double horizon, int steps, double max_step_load) {
  validate_classes(classes);
  if (classes.size() != static_cast<std::size_t>(space.classes()))
    throw ValidationError("class list does not match the state space");
  if (!(horizon > 0.0) || !std::isfinite(horizon))
    throw ValidationError("horizon must be positive and finite");
  if (steps < 1) throw ValidationError("steps must be at least 1");
  if (!coordinate_convex(space))
    throw ValidationError("blocking sets are not coordinate convex; the recursions do not apply");
  const double dt = horizon / steps;
  const double load = dt * max_outflow_rate(space, classes);
  if (load > max_step_load) {
    const auto needed =
        static_cast<long long>(std::ceil(horizon * max_outflow_rate(space, classes) / max_step_load));
    throw ValidationError(fmt::format(
        "step too long: (T/N) * max outflow rate = {:.6g} exceeds {:.6g}; use at least {} steps",
        load, max_step_load, needed));
  }
  return {dt, steps};
}

// One step of the occupancy chain: returns Delta m (already scaled by dt).
void marginal_delta(const StateSpace& space, std::span<const TrafficClass> classes, double dt,
                    const std::vector<double>& m, std::vector<double>& delta) {
  std::fill(delta.begin(), delta.end(), 0.0);
  for (std::size_t i = 0; i < space.size(); ++i) {
    const double x = m[i];
    if (x == 0.0) continue;
    for (int j = 0; j < space.classes(); ++j) {
      if (auto up = space.up(i, j); up != StateSpace::kNone) {
        const double flow = dt * classes[j].lambda * x;
        delta[i] -= flow;
        delta[up] += flow;
      }
      if (auto down = space.down(i, j); down != StateSpace::kNone) {
        const double flow = dt * classes[j].mu * space.calls(i, j) * x;
        delta[i] -= flow;
        delta[down] += flow;
      }
    }
  }
}

std::vector<double> initial_marginal(const StateSpace& space, std::span<const TrafficClass> classes,
                                     InitialCondition initial) {
  if (initial == InitialCondition::Stationary) return stationary(space, classes).pi;
  std::vector<double> m(space.size(), 0.0);
  m[0] = 1.0;
  return m;
}

CostGrid empty_grid(const StateSpace& space, double horizon, int steps, int r_max) {
  CostGrid grid;
  grid.horizon = horizon;
  grid.steps = steps;
  grid.r_max = r_max;
  grid.states = space.size();
  grid.mass.assign(space.size() * (r_max + 1), 0.0);
  grid.overflow.assign(space.size(), 0.0);
  return grid;
}

// Runs `evolve` with r_max from the options or, when defaulted, from
// default_r_max, doubling it while the leakage limit is exceeded.
CostGrid with_r_max(std::span<const TrafficClass> classes, double horizon,
                    const GridOptions& options, const std::function<CostGrid(int)>& evolve) {
  if (options.r_max >= 0) {
    CostGrid grid = evolve(options.r_max);
    if (grid.leakage > options.leakage_limit)
      grid.warning = fmt::format("cost truncation at r_max = {} leaks {:.3e} of the mass",
                                 grid.r_max, grid.leakage);
    return grid;
  }
  int r_max = default_r_max(classes, horizon);
  CostGrid grid = evolve(r_max);
  for (int attempt = 0; attempt < 6 && grid.leakage > options.leakage_limit; ++attempt) {
    r_max = 2 * r_max + 1;
    grid = evolve(r_max);
  }
  if (grid.leakage > options.leakage_limit)
    grid.warning = fmt::format("cost truncation at r_max = {} leaks {:.3e} of the mass",
                               grid.r_max, grid.leakage);
  return grid;
}

}  // namespace

std::vector<double> evolve_marginal(const StateSpace& space, std::span<const TrafficClass> classes,
                                    double horizon, int steps, InitialCondition initial) {
  const auto stepping = check_stepping(space, classes, horizon, steps, 0.5);
  std::vector<double> m = initial_marginal(space, classes, initial);
  std::vector<double> delta(space.size());
  for (int n = 0; n < stepping.steps; ++n) {
    marginal_delta(space, classes, stepping.dt, m, delta);
    for (std::size_t i = 0; i < m.size(); ++i) m[i] += delta[i];
  }
  return m;
}

CostGrid evolve_shadow_costs(const StateSpace& space, std::span<const TrafficClass> classes,
                             double horizon, int steps, const GridOptions& options) {
  const auto stepping = check_stepping(space, classes, horizon, steps, options.max_step_load);
  const double dt = stepping.dt;
  const int K = space.classes();
  double arrivals = 0.0;
  for (const auto& c : classes) arrivals += c.lambda;

  auto evolve = [&](int r_max) {
    CostGrid grid = empty_grid(space, horizon, steps, r_max);
    const int width = r_max + 1;
    grid.mass[0] = 1.0;
    std::vector<double> next(grid.mass.size());
    std::vector<double> next_overflow(space.size());
    for (int n = 0; n < stepping.steps; ++n) {
      std::fill(next.begin(), next.end(), 0.0);
      std::fill(next_overflow.begin(), next_overflow.end(), 0.0);
      for (std::size_t i = 0; i < space.size(); ++i) {
        const double* row = &grid.mass[i * width];
        double out = arrivals;
        for (int j = 0; j < K; ++j) out += classes[j].mu * space.calls(i, j);
        const double stay = 1.0 - dt * out;
        double* own = &next[i * width];
        for (int r = 0; r < width; ++r) own[r] += stay * row[r];
        next_overflow[i] += stay * grid.overflow[i];

        for (int j = 0; j < K; ++j) {
          const double a = dt * classes[j].lambda;
          if (auto up = space.up(i, j); up != StateSpace::kNone) {
            double* dst = &next[up * width];
            for (int r = 0; r < width; ++r) dst[r] += a * row[r];
            next_overflow[up] += a * grid.overflow[i];
          } else {
            // blocked arrival: cost grows by omega_j, occupancy unchanged
            const int w = classes[j].omega;
            for (int r = 0; r < width; ++r) {
              if (r + w < width) own[r + w] += a * row[r];
              else next_overflow[i] += a * row[r];
            }
            next_overflow[i] += a * grid.overflow[i];
          }
          if (auto down = space.down(i, j); down != StateSpace::kNone) {
            const double d = dt * classes[j].mu * space.calls(i, j);
            double* dst = &next[down * width];
            for (int r = 0; r < width; ++r) dst[r] += d * row[r];
            next_overflow[down] += d * grid.overflow[i];
          }
        }
      }
      grid.mass.swap(next);
      grid.overflow.swap(next_overflow);
      grid.step = n + 1;
    }
    grid.leakage = 0.0;
    for (double x : grid.overflow) grid.leakage += x;
    return grid;
  };
  return with_r_max(classes, horizon, options, evolve);
}

CostGrid evolve_simple_costs(const StateSpace& space, std::span<const TrafficClass> classes,
                             double horizon, int steps, const GridOptions& options,
                             InitialCondition initial) {
  const auto stepping = check_stepping(space, classes, horizon, steps, options.max_step_load);
  const double dt = stepping.dt;
  const int K = space.classes();
  const std::vector<double> m0 = initial_marginal(space, classes, initial);

  auto evolve = [&](int r_max) {
    CostGrid grid = empty_grid(space, horizon, steps, r_max);
    const int width = r_max + 1;
    for (std::size_t i = 0; i < space.size(); ++i) grid.mass[i * width] = m0[i];
    std::vector<double> m = m0;
    std::vector<double> delta(space.size());
    std::vector<double> next(grid.mass.size());
    std::vector<double> next_overflow(space.size());
    for (int n = 0; n < stepping.steps; ++n) {
      marginal_delta(space, classes, dt, m, delta);
      for (std::size_t i = 0; i < space.size(); ++i) {
        const double* row = &grid.mass[i * width];
        double* dst = &next[i * width];
        // c_r(q) = s(q, r) / m(q); the cost law of an empty state is a point mass at 0
        if (m[i] > 0.0) {
          const double scale = 1.0 + delta[i] / m[i];
          for (int r = 0; r < width; ++r) dst[r] = row[r] * scale;
          next_overflow[i] = grid.overflow[i] * scale;
        } else {
          std::fill(dst, dst + width, 0.0);
          dst[0] = delta[i];
          next_overflow[i] = 0.0;
        }
        for (int j = 0; j < K; ++j) {
          if (space.admits(i, j)) continue;
          const int w = classes[j].omega;
          if (w == 0) continue;
          const double a = dt * classes[j].lambda;
          for (int r = 0; r < width; ++r) {
            dst[r] -= a * row[r];
            if (r + w < width) dst[r + w] += a * row[r];
            else next_overflow[i] += a * row[r];
          }
        }
      }
      for (std::size_t i = 0; i < space.size(); ++i) m[i] += delta[i];
      grid.mass.swap(next);
      grid.overflow.swap(next_overflow);
      grid.step = n + 1;
    }
    grid.leakage = 0.0;
    for (double x : grid.overflow) grid.leakage += x;
    return grid;
  };
  return with_r_max(classes, horizon, options, evolve);
}

}  // namespace losscost
