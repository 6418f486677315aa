#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "losscost/model.hpp"
#include "losscost/state_space.hpp"

namespace losscost {

/// Product-form equilibrium of the loss system together with its cost rates.
struct StationaryDistribution {
  std::vector<double> pi;         ///< probability per state index
  double log_G = 0.0;             ///< natural log of the normalization constant
  std::vector<double> cost_rate;  ///< r_q = sum of omega_j lambda_j over blocked classes
  double g = 0.0;                 ///< long-run average cost rate

  /// exp(log_G); throws NumericError when it does not fit in a double.
  double G() const;
};

/// pi(q) = prod_j rho_j^{q_j} / q_j! / G over the admitted states. Requires
/// coordinate_convex(space); throws ValidationError otherwise.
StationaryDistribution stationary(const StateSpace& space, std::span<const TrafficClass> classes);

/// Per-state cost rate r_q.
std::vector<double> state_cost_rates(const StateSpace& space,
                                     std::span<const TrafficClass> classes);

/// Call blocking probability of each class (time congestion seen by its
/// Poisson arrivals).
std::vector<double> blocking_probabilities(const StateSpace& space, std::span<const double> pi);

using SparseGenerator = Eigen::SparseMatrix<double, Eigen::RowMajor>;

/// Infinitesimal generator: lambda_j to q + e_j for admitted j, mu_j q_j to
/// q - e_j, negative row sum on the diagonal.
SparseGenerator build_generator(const StateSpace& space, std::span<const TrafficClass> classes);

/// Dense copy for small spaces (at most 4096 states, else ValidationError).
Eigen::MatrixXd build_generator_dense(const StateSpace& space,
                                      std::span<const TrafficClass> classes);

/// max_q |(pi Q)_q|.
double global_balance_residual(const SparseGenerator& generator, std::span<const double> pi);

}  // namespace losscost
