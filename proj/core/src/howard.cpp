#include "losscost/howard.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>
#include <numeric>

#include "losscost/error.hpp"
#include "losscost/stationary.hpp"

namespace losscost {

namespace {

using ColMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor>;

void check_sizes(const StateSpace& space, std::span<const TrafficClass> classes,
                 std::span<const double> values, const char* what) {
  if (classes.size() != static_cast<std::size_t>(space.classes()))
    throw ValidationError("class list does not match the state space");
  if (values.size() != space.size())
    throw ValidationError(std::string(what) + " has " + std::to_string(values.size()) +
                          " entries, state space has " + std::to_string(space.size()));
}

// sum_{k=0}^{n-1} S(k) with S(k) = sum_{m=0}^{k} k!/(k-m)! rho^-m, i.e. the
// double sum of the symmetric closed form. S obeys S(k) = 1 + (k/rho) S(k-1).
double symmetric_double_sum(int n, double rho) {
  double s = 1.0;
  double total = 0.0;
  for (int k = 0; k < n; ++k) {
    if (k > 0) s = 1.0 + (k / rho) * s;
    total += s;
  }
  return total;
}

ColMatrix anchored_system(const StateSpace& space, std::span<const TrafficClass> classes) {
  const auto n = static_cast<Eigen::Index>(space.size());
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(space.size() * (2 * space.classes() + 1));
  entries.emplace_back(0, 0, 1.0);
  for (std::size_t i = 1; i < space.size(); ++i) {
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
  ColMatrix a(n, n);
  a.setFromTriplets(entries.begin(), entries.end());
  return a;
}

double one_norm(const ColMatrix& a) {
  double best = 0.0;
  for (Eigen::Index c = 0; c < a.outerSize(); ++c) {
    double col = 0.0;
    for (ColMatrix::InnerIterator it(a, c); it; ++it) col += std::abs(it.value());
    best = std::max(best, col);
  }
  return best;
}

// Hager's estimate of ||A^-1||_1 from solves with A and A^T.
template <typename Solver>
double inverse_one_norm_estimate(Solver& solver, Eigen::Index n) {
  Eigen::VectorXd x = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
  double estimate = 0.0;
  for (int iter = 0; iter < 5; ++iter) {
    Eigen::VectorXd y = solver.solve(x);
    estimate = y.lpNorm<1>();
    Eigen::VectorXd xi = y.unaryExpr([](double t) { return t >= 0.0 ? 1.0 : -1.0; });
    Eigen::VectorXd z = solver.transpose().solve(xi);
    Eigen::Index arg = 0;
    const double zmax = z.cwiseAbs().maxCoeff(&arg);
    if (zmax <= z.dot(x)) break;
    x.setZero();
    x(arg) = 1.0;
  }
  return estimate;
}

}  // namespace

std::vector<double> howard_operator(const StateSpace& space, std::span<const TrafficClass> classes,
                                    std::span<const double> v) {
  check_sizes(space, classes, v, "relative cost vector");
  std::vector<double> out(space.size(), 0.0);
  for (std::size_t i = 0; i < space.size(); ++i) {
    double acc = 0.0;
    for (int j = 0; j < space.classes(); ++j) {
      if (auto up = space.up(i, j); up != StateSpace::kNone)
        acc += classes[j].lambda * (v[up] - v[i]);
      if (auto down = space.down(i, j); down != StateSpace::kNone)
        acc -= classes[j].mu * space.calls(i, j) * (v[i] - v[down]);
    }
    out[i] = acc;
  }
  return out;
}

double howard_residual(const StateSpace& space, std::span<const TrafficClass> classes, double g,
                       std::span<const double> cost_rate, std::span<const double> v) {
  check_sizes(space, classes, cost_rate, "cost rate vector");
  const auto lhs = howard_operator(space, classes, v);
  double worst = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i)
    worst = std::max(worst, std::abs(lhs[i] - (g - cost_rate[i])));
  return worst;
}

double howard_interior_residual(const StateSpace& space, std::span<const TrafficClass> classes,
                                double g, std::span<const double> cost_rate,
                                std::span<const double> v) {
  check_sizes(space, classes, cost_rate, "cost rate vector");
  const auto lhs = howard_operator(space, classes, v);
  double worst = 0.0;
  for (std::size_t i = 0; i < space.size(); ++i)
    if (!space.blocks_any(i)) worst = std::max(worst, std::abs(lhs[i] - (g - cost_rate[i])));
  return worst;
}

RelativeCosts solve_howard_exact(const StateSpace& space, std::span<const TrafficClass> classes,
                                 double g, std::span<const double> cost_rate,
                                 const ExactSolveOptions& options) {
  check_sizes(space, classes, cost_rate, "cost rate vector");
  RelativeCosts out;
  out.g = g;
  out.anchor = 0;
  const auto n = static_cast<Eigen::Index>(space.size());
  if (n == 1) {
    out.v = {0.0};
    out.condition = 1.0;
  } else {
    ColMatrix a = anchored_system(space, classes);
    Eigen::VectorXd rhs(n);
    for (Eigen::Index i = 0; i < n; ++i) rhs(i) = g - cost_rate[i];
    rhs(0) = 0.0;

    Eigen::SparseLU<ColMatrix, Eigen::COLAMDOrdering<int>> lu;
    lu.analyzePattern(a);
    lu.factorize(a);
    if (lu.info() != Eigen::Success)
      throw NumericError("Howard system factorization failed: " + lu.lastErrorMessage());

    out.condition = one_norm(a) * inverse_one_norm_estimate(lu, n);
    if (!std::isfinite(out.condition) || out.condition > options.max_condition)
      throw NumericError("Howard system is ill-conditioned (1-norm condition estimate " +
                         std::to_string(out.condition) + ")");

    Eigen::VectorXd x = lu.solve(rhs);
    Eigen::VectorXd correction = lu.solve(rhs - a * x);  // one refinement step
    x += correction;
    out.v.assign(x.data(), x.data() + n);
  }

  const double residual = howard_residual(space, classes, g, cost_rate, out.v);
  if (!(residual <= options.residual_tolerance))
    throw NumericError("Howard residual " + std::to_string(residual) +
                       " exceeds tolerance; is g consistent with the cost rates?");
  return out;
}

double relative_cost_symmetric(int q, double g, double mu, double rho) {
  if (q < 0) throw ValidationError("relative_cost_symmetric: call count must be non-negative");
  if (q == 0) return 0.0;
  if (!(rho > 0.0) || !(mu > 0.0))
    throw ValidationError("relative_cost_symmetric: mu and rho must be positive");
  return g / (mu * rho) * symmetric_double_sum(q, rho);
}

double relative_cost_equal_bandwidth_approx(std::span<const int> q,
                                            std::span<const TrafficClass> classes, double g) {
  if (q.size() != classes.size()) throw ValidationError("state and class list sizes differ");
  const int total = std::accumulate(q.begin(), q.end(), 0);
  if (total == 0) return 0.0;
  const double rho = total_load(classes);
  const double inner = symmetric_double_sum(total, rho);
  double v = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j)
    v += (static_cast<double>(q[j]) / total) * g / (classes[j].mu * rho) * inner;
  return v;
}

double relative_cost_general_approx(std::span<const int> q, std::span<const TrafficClass> classes,
                                    double g) {
  if (q.size() != classes.size()) throw ValidationError("state and class list sizes differ");
  double b = 0.0;
  long long c = 0;
  for (std::size_t k = 0; k < q.size(); ++k) {
    b += classes[k].bandwidth;
    c += static_cast<long long>(classes[k].bandwidth) * q[k];
  }
  if (c == 0) return 0.0;
  double rho = 0.0;
  for (const auto& cls : classes) rho += cls.load() * (cls.bandwidth / b) * (cls.bandwidth / b);
  double v = 0.0;
  for (std::size_t j = 0; j < q.size(); ++j) {
    if (q[j] == 0) continue;
    const double share = static_cast<double>(classes[j].bandwidth) / b;
    const double rho_j = rho / (share * share);
    const int level = static_cast<int>(c / classes[j].bandwidth);  // floor
    v += (static_cast<double>(classes[j].bandwidth) * q[j] / static_cast<double>(c)) * share *
         share * g / (classes[j].mu * rho) * symmetric_double_sum(level, rho_j);
  }
  return v;
}

RelativeCosts approximate_relative_costs(const StateSpace& space,
                                         std::span<const TrafficClass> classes,
                                         const AdmissionPolicy& policy, double g,
                                         Approximation kind) {
  if (classes.size() != static_cast<std::size_t>(space.classes()))
    throw ValidationError("class list does not match the state space");
  RelativeCosts out;
  out.g = g;
  out.v.resize(space.size());
  switch (kind) {
    case Approximation::Symmetric: {
      if (!std::holds_alternative<FullSharing>(policy) || !equal_bandwidths(classes) ||
          !equal_service_rates(classes))
        throw ValidationError(
            "the symmetric closed form needs full sharing with one bandwidth and one service "
            "rate for all classes");
      const double mu = classes.front().mu;
      const double rho = total_load(classes);
      for (std::size_t i = 0; i < space.size(); ++i)
        out.v[i] = relative_cost_symmetric(space.total_calls(i), g, mu, rho);
      break;
    }
    case Approximation::EqualBandwidth:
      if (!equal_bandwidths(classes))
        throw ValidationError("the equal-bandwidth approximation needs one bandwidth for all "
                              "classes");
      for (std::size_t i = 0; i < space.size(); ++i)
        out.v[i] = relative_cost_equal_bandwidth_approx(space.state(i), classes, g);
      break;
    case Approximation::General:
      for (std::size_t i = 0; i < space.size(); ++i)
        out.v[i] = relative_cost_general_approx(space.state(i), classes, g);
      break;
  }
  return out;
}

}  // namespace losscost
