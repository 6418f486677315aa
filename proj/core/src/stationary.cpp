#include "losscost/stationary.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "losscost/error.hpp"

namespace losscost {

double StationaryDistribution::G() const {
  const double value = std::exp(log_G);
  if (!std::isfinite(value))
    throw NumericError("normalization constant overflows a double (log G = " +
                       std::to_string(log_G) + "); use log_G");
  return value;
}

std::vector<double> state_cost_rates(const StateSpace& space,
                                     std::span<const TrafficClass> classes) {
  std::vector<double> rates(space.size(), 0.0);
  for (std::size_t i = 0; i < space.size(); ++i)
    for (int j = 0; j < space.classes(); ++j)
      if (!space.admits(i, j)) rates[i] += classes[j].omega * classes[j].lambda;
  return rates;
}

StationaryDistribution stationary(const StateSpace& space, std::span<const TrafficClass> classes) {
  validate_classes(classes);
  if (classes.size() != static_cast<std::size_t>(space.classes()))
    throw ValidationError("class list does not match the state space");
  if (!coordinate_convex(space))
    throw ValidationError(
        "admission policy is not coordinate convex: a blocked class leads to an admitted "
        "state, so the product form does not apply");

  const int k = space.classes();
  const double neg_inf = -std::numeric_limits<double>::infinity();
  std::vector<double> log_rho(k);
  for (int j = 0; j < k; ++j)
    log_rho[j] = classes[j].lambda > 0.0 ? std::log(classes[j].load()) : neg_inf;

  std::vector<double> log_w(space.size());
  double max_log = neg_inf;
  for (std::size_t i = 0; i < space.size(); ++i) {
    double lw = 0.0;
    for (int j = 0; j < k; ++j) {
      const int n = space.calls(i, j);
      if (n == 0) continue;
      lw += n * log_rho[j] - std::lgamma(n + 1.0);
    }
    log_w[i] = lw;
    max_log = std::max(max_log, lw);
  }

  // Kahan-compensated sum of the shifted weights.
  long double sum = 0.0L;
  long double carry = 0.0L;
  for (double lw : log_w) {
    const long double term = std::exp(static_cast<long double>(lw - max_log)) - carry;
    const long double next = sum + term;
    carry = (next - sum) - term;
    sum = next;
  }

  StationaryDistribution out;
  out.log_G = max_log + static_cast<double>(std::log(sum));
  if (!std::isfinite(out.log_G)) throw NumericError("normalization constant is not finite");
  out.pi.resize(space.size());
  for (std::size_t i = 0; i < space.size(); ++i) out.pi[i] = std::exp(log_w[i] - out.log_G);
  out.cost_rate = state_cost_rates(space, classes);
  long double g = 0.0L;
  for (std::size_t i = 0; i < space.size(); ++i)
    g += static_cast<long double>(out.pi[i]) * out.cost_rate[i];
  out.g = static_cast<double>(g);
  return out;
}

std::vector<double> blocking_probabilities(const StateSpace& space, std::span<const double> pi) {
  std::vector<double> out(space.classes(), 0.0);
  for (std::size_t i = 0; i < space.size(); ++i)
    for (int j = 0; j < space.classes(); ++j)
      if (!space.admits(i, j)) out[j] += pi[i];
  return out;
}

SparseGenerator build_generator(const StateSpace& space, std::span<const TrafficClass> classes) {
  if (classes.size() != static_cast<std::size_t>(space.classes()))
    throw ValidationError("class list does not match the state space");
  const auto n = static_cast<Eigen::Index>(space.size());
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(space.size() * (2 * space.classes() + 1));
  for (std::size_t i = 0; i < space.size(); ++i) {
    double out_rate = 0.0;
    for (int j = 0; j < space.classes(); ++j) {
      if (auto up = space.up(i, j); up != StateSpace::kNone) {
        entries.emplace_back(i, up, classes[j].lambda);
        out_rate += classes[j].lambda;
      }
      if (auto down = space.down(i, j); down != StateSpace::kNone) {
        const double rate = classes[j].mu * space.calls(i, j);
        entries.emplace_back(i, down, rate);
        out_rate += rate;
      }
    }
    entries.emplace_back(i, i, -out_rate);
  }
  SparseGenerator q(n, n);
  q.setFromTriplets(entries.begin(), entries.end());
  return q;
}

Eigen::MatrixXd build_generator_dense(const StateSpace& space,
                                      std::span<const TrafficClass> classes) {
  if (space.size() > 4096)
    throw ValidationError("dense generator requested for " + std::to_string(space.size()) +
                          " states; use build_generator");
  return Eigen::MatrixXd(build_generator(space, classes));
}

double global_balance_residual(const SparseGenerator& generator, std::span<const double> pi) {
  Eigen::Map<const Eigen::VectorXd> p(pi.data(), static_cast<Eigen::Index>(pi.size()));
  Eigen::VectorXd flow = generator.transpose() * p;
  return flow.cwiseAbs().maxCoeff();
}

}  // namespace losscost
