#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "losscost/model.hpp"
#include "losscost/state_space.hpp"

namespace losscost {

/// Probability mass over (state, accumulated cost r) for r = 0..r_max after
/// `step` steps of length horizon / steps.
struct CostGrid {
  double horizon = 0.0;
  int steps = 0;
  int r_max = 0;
  int step = 0;
  std::size_t states = 0;
  std::vector<double> mass;      ///< mass[i * (r_max + 1) + r]
  std::vector<double> overflow;  ///< per state, mass whose cost exceeds r_max
  double leakage = 0.0;          ///< sum of overflow
  std::string warning;           ///< set when leakage exceeds the configured limit

  double at(std::size_t i, int r) const { return mass[i * (r_max + 1) + r]; }
  /// sum_r mass(i, r) per state, overflow excluded.
  std::vector<double> state_marginal() const;
  /// sum_i mass(i, r) per r.
  std::vector<double> total_cost() const;
  double mean_cost() const;
};

/// Starting occupancy of the grid recursions. Empty puts all mass on the
/// empty state; Stationary starts from pi with zero accumulated cost.
enum class InitialCondition { Empty, Stationary };

struct GridOptions {
  int r_max = -1;  ///< negative: choose from the dominating Poisson bound and grow on leakage
  double leakage_limit = 1e-6;
  double max_step_load = 0.5;  ///< bound on (T/N) * max total outflow rate
};

/// Largest total outflow rate sum_j lambda_j + sum_j mu_j q_j over the space.
double max_outflow_rate(const StateSpace& space, std::span<const TrafficClass> classes);

/// mean + 10 sd of the accumulated cost if every arrival were blocked,
/// rounded up, plus the largest omega. Zero when every omega is zero.
int default_r_max(std::span<const TrafficClass> classes, double t);

/// Occupancy chain stepped with the same step length as the cost grids.
std::vector<double> evolve_marginal(const StateSpace& space, std::span<const TrafficClass> classes,
                                    double horizon, int steps, InitialCondition initial);

/// Cost recursion of the shadow scheme, started from the empty system at
/// r = 0: a blocked class-j arrival moves mass from (q, r) to (q, r + omega_j).
/// Throws ValidationError when the step condition fails.
CostGrid evolve_shadow_costs(const StateSpace& space, std::span<const TrafficClass> classes,
                             double horizon, int steps, const GridOptions& options = {});

/// Product-form cost recursion of the simpler scheme:
///   s' = s + c_r(q) Delta m(q) - dt sum_{j blocked} lambda_j s(q, r)
///        + dt sum_{j blocked} lambda_j s(q, r - omega_j),
/// with m the occupancy chain and c_r(q) = s(q, r) / m(q). It matches the
/// closed form exactly when the occupancy starts at pi (the default).
CostGrid evolve_simple_costs(const StateSpace& space, std::span<const TrafficClass> classes,
                             double horizon, int steps, const GridOptions& options = {},
                             InitialCondition initial = InitialCondition::Stationary);

// ---------------------------------------------------------------------------
// Closed forms for the simpler scheme

/// Conditional law of the accumulated cost given a blocked-class mask, for
/// r = 0..r_max, obtained by enumerating every (r_1..r_K) with
/// sum omega_i r_i = r over the blocked classes.
/// Discrete version: multinomial in n steps of length dt.
std::vector<double> conditional_cost_discrete(std::span<const TrafficClass> classes,
                                              std::uint64_t blocked_mask, int n, double dt,
                                              int r_max);
/// Continuous version: independent Poisson(t lambda_i) counts.
std::vector<double> conditional_cost_continuous(std::span<const TrafficClass> classes,
                                                std::uint64_t blocked_mask, double t, int r_max);

/// Mass of (q, r) after n discrete steps, pi(q) times the discrete conditional
/// law. Zero for r < 0.
double closed_form_discrete(const StateSpace& space, std::span<const TrafficClass> classes,
                            std::span<const double> pi, int n, double dt, std::size_t q, int r);
/// Continuous-time counterpart at time t.
double closed_form_continuous(const StateSpace& space, std::span<const TrafficClass> classes,
                              std::span<const double> pi, double t, std::size_t q, int r);

/// Closed-form mass over every (state, r <= r_max), conditional laws
/// memoized per blocked mask.
struct ClosedFormCostDist {
  double t = 0.0;  ///< horizon (n * dt for the discrete form)
  int r_max = 0;
  std::size_t states = 0;
  std::vector<double> mass;  ///< mass[i * (r_max + 1) + r]

  double at(std::size_t i, int r) const { return mass[i * (r_max + 1) + r]; }
  std::vector<double> total_cost() const;
};

ClosedFormCostDist closed_form_discrete_grid(const StateSpace& space,
                                             std::span<const TrafficClass> classes,
                                             std::span<const double> pi, int n, double dt,
                                             int r_max);
ClosedFormCostDist closed_form_continuous_grid(const StateSpace& space,
                                               std::span<const TrafficClass> classes,
                                               std::span<const double> pi, double t, int r_max);

/// Law of the total accumulated cost at time t, summed over states.
struct TotalCostDistribution {
  double t = 0.0;
  std::vector<double> mass;  ///< r = 0..r_max
  double leakage = 0.0;      ///< 1 - sum(mass)
  double mean = 0.0;         ///< sum_r r mass(r)
  int q95 = -1;              ///< smallest r with cumulative mass >= 0.95, -1 if never reached
  int q99 = -1;
};

/// Marginal of the continuous closed form. Negative r_max picks
/// default_r_max(classes, t) and grows it until leakage is below 1e-12.
TotalCostDistribution total_cost_distribution(const StateSpace& space,
                                              std::span<const TrafficClass> classes, double t,
                                              int r_max = -1);

/// Summaries (leakage, mean, quantiles) of an arbitrary cost law.
TotalCostDistribution summarize_total_cost(double t, std::vector<double> mass);

struct DetailedBalanceReport {
  bool found = false;
  std::size_t state = 0;  ///< q, with q + e_cls the neighbouring state
  int cls = 0;
  int r = 0;
  double lhs = 0.0;  ///< mu_i (q_i + 1) s(q + e_i, r)
  double rhs = 0.0;  ///< lambda_i s(q, r)
  double magnitude = 0.0;
  double t = 0.0;
  std::string description;
};

/// Plugs the continuous closed form at time t into the pairwise balance
///   mu_i (q_i + 1) s(q + e_i, r) = lambda_i s(q, r)
/// over every neighbouring pair and r <= r_max (negative: default), and
/// reports the largest violation. `found` is false when no violation exceeds
/// `tolerance`.
DetailedBalanceReport detailed_balance_counterexample(const StateSpace& space,
                                                      std::span<const TrafficClass> classes,
                                                      double t = 1.0, int r_max = -1,
                                                      double tolerance = 1e-12);

// ---------------------------------------------------------------------------
// Second-order recursion with a linear coefficient

/// Solution of f(q+2) - (q+a) f(q+1) + rho (q+1) f(q) = 0 with f(q) = 0 for
/// q < 0, as the series f(q) = sum_{j>=1} gamma_j Gamma(q + a - rho - j).
struct RecursionSeries {
  double rho = 0.0;
  double a = 0.0;
  std::vector<double> gamma;  ///< gamma_1, gamma_2, ... (index 0 holds gamma_1)
  std::vector<double> alpha;  ///< alpha_1, alpha_2, ...
  std::vector<double> f;      ///< f(0..q_max)
  double residual = 0.0;      ///< largest relative residual of the recursion, q = -1..q_max-2
};

/// Throws ValidationError when rho == 0, q_max < 1, or a - rho lies within
/// 1e-9 of an integer; NumericError when the series does not converge.
RecursionSeries solve_linear_recursion(double rho, double a, int q_max, double gamma1 = 1.0);

}  // namespace losscost
