#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "losscost/model.hpp"
#include "losscost/state_space.hpp"

namespace losscost {

/// Relative (excess) future cost per state, pinned to zero at `anchor`.
struct RelativeCosts {
  std::vector<double> v;
  double g = 0.0;
  std::size_t anchor = 0;
  double condition = 0.0;  ///< 1-norm condition estimate (exact solver only)
};

/// Applies the left-hand side of Howard's equation, with arrivals of blocked
/// classes removed:
///   sum_{j in R_q} lambda_j (v(q+e_j) - v(q)) - sum_j mu_j q_j (v(q) - v(q-e_j)).
std::vector<double> howard_operator(const StateSpace& space, std::span<const TrafficClass> classes,
                                    std::span<const double> v);

/// max_q |howard_operator(v)_q - (g - r_q)|.
double howard_residual(const StateSpace& space, std::span<const TrafficClass> classes, double g,
                       std::span<const double> cost_rate, std::span<const double> v);

/// Same residual restricted to states that admit every class.
double howard_interior_residual(const StateSpace& space, std::span<const TrafficClass> classes,
                                double g, std::span<const double> cost_rate,
                                std::span<const double> v);

struct ExactSolveOptions {
  double residual_tolerance = 1e-8;
  double max_condition = 1e14;
};

/// Solves Q v = g 1 - r with the empty-state row replaced by v(0) = 0.
/// Throws NumericError when the 1-norm condition estimate exceeds
/// `max_condition` or the residual stays above `residual_tolerance`.
RelativeCosts solve_howard_exact(const StateSpace& space, std::span<const TrafficClass> classes,
                                 double g, std::span<const double> cost_rate,
                                 const ExactSolveOptions& options = {});

/// Closed-form relative cost of a symmetric system (common bandwidth and
/// service rate, full sharing) with q calls in progress:
///   g/(mu rho) sum_{i=1..q} sum_{m=0..q-i} (q-i)!/(q-i-m)! rho^-m.
/// Throws ValidationError for q < 0.
double relative_cost_symmetric(int q, double g, double mu, double rho);

/// Common-bandwidth approximation: the symmetric form with the per-class
/// service rate weighted by the class mix q_j / q. Zero at the empty state.
double relative_cost_equal_bandwidth_approx(std::span<const int> q,
                                            std::span<const TrafficClass> classes, double g);

/// General approximation for unequal bandwidths and service rates, driven by
/// the occupied capacity c = sum b_k q_k.
double relative_cost_general_approx(std::span<const int> q, std::span<const TrafficClass> classes,
                                    double g);

enum class Approximation { Symmetric, EqualBandwidth, General };

/// Evaluates one of the closed forms on every state. Symmetric requires
/// equal bandwidths and service rates and a full-sharing space; EqualBandwidth
/// requires equal bandwidths. Throws ValidationError otherwise.
RelativeCosts approximate_relative_costs(const StateSpace& space,
                                         std::span<const TrafficClass> classes,
                                         const AdmissionPolicy& policy, double g,
                                         Approximation kind);

// ---------------------------------------------------------------------------
// Series completion

/// Axis sum along class j:
///   (1/rho) sum_{i=1..q_j} sum_{m=0..q_j-i} f(q - (i+m) e_j) (q_j-i)!/(q_j-i-m)! rho^-m.
/// Only reads f at states below q on the j axis.
std::vector<double> axis_sum(const StateSpace& space, std::span<const double> f, int j,
                             double rho);

/// Single-class difference operator
///   lambda_j (f(q+e_j) - f(q)) - mu_j q_j (f(q) - f(q-e_j)),
/// with the arrival term dropped where class j is blocked.
std::vector<double> class_difference(const StateSpace& space,
                                     std::span<const TrafficClass> classes,
                                     std::span<const double> f, int j);

/// Default starting point u(q) = h(1, q, rho) / mu with q the total call
/// count, rho the total load and mu the sum of service rates.
std::vector<double> series_start(const StateSpace& space, std::span<const TrafficClass> classes);

struct SeriesOptions {
  int n_terms = 6;
  double stagnation = 1e-10;   ///< stop when the residual changes by less than this
  double convergence = 1e-6;   ///< residual at which the series counts as converged
  int divergence_window = 3;   ///< consecutive residual increases that flag divergence
};

struct SeriesResult {
  RelativeCosts costs;
  std::vector<double> residual;           ///< Howard residual after n terms, n = 0..terms
  std::vector<double> interior_residual;  ///< same, restricted to non-blocking states
  int terms = 0;                          ///< terms actually added
  int best_terms = 0;                     ///< term count of the returned iterate
  bool converged = false;
  bool diverged = false;  ///< residual grew `divergence_window` times in a row
  std::string report;     ///< empty when converged
};

/// Completes the approximation V = g u into a solution of Howard's equation by
/// adding g sum_j sum_n (1/mu_j) h(f_{n,j}, q_j, rho_j). `u` is dimensionless
/// (relative cost divided by g). Returns the last iterate when converged and
/// the iterate with the smallest residual otherwise. Requires lambda_j > 0.
SeriesResult series_refine(const StateSpace& space, std::span<const TrafficClass> classes, double g,
                           std::span<const double> cost_rate, std::span<const double> u,
                           const SeriesOptions& options = {});

// ---------------------------------------------------------------------------
// Prices and bills

struct ShadowPrice {
  std::size_t state;
  int cls;
  double price;
};

/// p_k(q) = v(q + e_k) - v(q) for every admitted (q, k).
class ShadowPriceTable {
 public:
  ShadowPriceTable(const RelativeCosts& costs, const StateSpace& space);

  const std::vector<ShadowPrice>& entries() const { return entries_; }
  /// NaN when class k is blocked in state i.
  double price(std::size_t i, int k) const { return dense_[i * classes_ + k]; }
  bool has_price(std::size_t i, int k) const;
  int classes() const { return classes_; }
  std::size_t states() const { return states_; }

 private:
  int classes_ = 0;
  std::size_t states_ = 0;
  std::vector<ShadowPrice> entries_;
  std::vector<double> dense_;
};

inline ShadowPriceTable shadow_prices(const RelativeCosts& costs, const StateSpace& space) {
  return ShadowPriceTable(costs, space);
}

struct PriceMass {
  double price;
  double probability;
};

/// Distribution of the price an admitted call pays, per class.
struct BillDistribution {
  std::vector<std::vector<PriceMass>> per_class;  ///< sorted by price

  double mean(int k) const;
};

inline constexpr double kPriceMergeTolerance = 1e-12;

/// Price p_k(q) weighted by pi(q) over the states admitting k, renormalized,
/// with prices closer than kPriceMergeTolerance merged. Throws
/// ValidationError when some class is admitted nowhere (or only on states of
/// zero probability).
BillDistribution bill_distribution(const ShadowPriceTable& prices, std::span<const double> pi);

/// The same for one class.
std::vector<PriceMass> class_bill_distribution(const ShadowPriceTable& prices,
                                               std::span<const double> pi, int k);

}  // namespace losscost
