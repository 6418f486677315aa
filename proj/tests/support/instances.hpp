#pragma once

// Shared fixtures for the unit and acceptance tests: reference models,
// seeded random instances and brute-force oracles that do not go through the
// library's own solvers.

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "losscost/model.hpp"
#include "losscost/state_space.hpp"

namespace losscost::testing {

struct Instance {
  std::string name;
  std::vector<TrafficClass> classes;
  AdmissionPolicy policy;
};

/// One class, lambda = mu = b = omega = 1, C = 2: g = 0.2, v = (0, 0.2, 0.6).
inline Instance single_class(int capacity = 2) {
  return {"single C=" + std::to_string(capacity), {{1.0, 1.0, 1, 1}}, FullSharing{capacity}};
}

/// Two classes with unequal rates, bandwidths and costs; nine states.
inline Instance reference_two_class() {
  return {"reference K=2", {{1.2, 1.0, 1, 1}, {0.6, 0.8, 2, 3}}, FullSharing{4}};
}

/// Equal bandwidths, unequal service rates.
inline Instance asymmetric_equal_bandwidth(double mu2 = 2.0, int capacity = 3) {
  return {"asymmetric mu2=" + std::to_string(mu2), {{1.0, 1.0, 1, 1}, {1.0, mu2, 1, 1}},
          FullSharing{capacity}};
}

inline Instance per_class_reference() {
  return {"per-class K=2", {{0.9, 1.0, 1, 2}, {0.5, 0.7, 1, 1}}, PerClassThreshold{{3, 2}}};
}

/// Seeded random instance with K <= 3 and a few hundred states at most.
inline Instance random_instance(std::mt19937_64& rng, bool symmetric = false) {
  std::uniform_int_distribution<int> k_dist(1, 3);
  std::uniform_real_distribution<double> lam(0.2, 2.0);
  std::uniform_real_distribution<double> mu(0.5, 2.0);
  std::uniform_int_distribution<int> bw(1, 3);
  std::uniform_int_distribution<int> om(0, 3);
  std::uniform_int_distribution<int> coin(0, 1);
  const int K = k_dist(rng);
  Instance inst;
  const double common_mu = mu(rng);
  const int common_b = bw(rng);
  for (int j = 0; j < K; ++j) {
    TrafficClass c;
    c.lambda = lam(rng);
    c.mu = symmetric ? common_mu : mu(rng);
    c.bandwidth = symmetric ? common_b : bw(rng);
    c.omega = om(rng);
    inst.classes.push_back(c);
  }
  if (symmetric || coin(rng) == 0) {
    std::uniform_int_distribution<int> cap(3, K == 3 ? 9 : 14);
    inst.policy = FullSharing{cap(rng)};
  } else {
    std::uniform_int_distribution<int> th(1, K == 3 ? 5 : 8);
    PerClassThreshold p;
    for (int j = 0; j < K; ++j) p.thresholds.push_back(th(rng));
    inst.policy = p;
  }
  inst.name = std::string(symmetric ? "symmetric" : "random") + " K=" + std::to_string(K) +
              " " + policy_name(inst.policy);
  return inst;
}

/// Stationary vector from the null space of Q^T, normalized.
inline Eigen::VectorXd null_space_stationary(const Eigen::MatrixXd& Q) {
  Eigen::FullPivLU<Eigen::MatrixXd> lu(Q.transpose());
  Eigen::MatrixXd kernel = lu.kernel();
  Eigen::VectorXd x = kernel.col(0);
  return x / x.sum();
}

/// Poisson pmf by the product recursion p_r = p_{r-1} m / r.
inline std::vector<double> poisson_pmf(double m, int r_max) {
  std::vector<double> p(r_max + 1);
  p[0] = std::exp(-m);
  for (int r = 1; r <= r_max; ++r) p[r] = p[r - 1] * m / r;
  return p;
}

/// Binomial pmf by repeated convolution with a Bernoulli step (Pascal rows).
inline std::vector<double> binomial_pmf(int n, double p) {
  std::vector<double> row{1.0};
  for (int i = 0; i < n; ++i) {
    std::vector<double> next(row.size() + 1, 0.0);
    for (std::size_t k = 0; k < row.size(); ++k) {
      next[k] += row[k] * (1 - p);
      next[k + 1] += row[k] * p;
    }
    row.swap(next);
  }
  return row;
}

/// Symmetric closed form written out as the literal double sum with factorials.
inline double symmetric_double_sum(int q, double g, double mu, double rho) {
  double s = 0.0;
  for (int i = 1; i <= q; ++i)
    for (int m = 0; m <= q - i; ++m)
      s += std::exp(std::lgamma(q - i + 1.0) - std::lgamma(q - i - m + 1.0)) * std::pow(rho, -m);
  return g / (mu * rho) * s;
}

}  // namespace losscost::testing
