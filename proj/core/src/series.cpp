#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "losscost/error.hpp"
#include "losscost/howard.hpp"

namespace losscost {

namespace {

// (1/rho) sum_{i=1..n} sum_{m=0..n-i} (n-i)!/(n-i-m)! rho^-m, i.e. h(1, n, rho).
double unit_axis_sum(int n, double rho) {
  double total = 0.0;
  for (int i = 1; i <= n; ++i) {
    double coeff = 1.0;
    for (int m = 0; m <= n - i; ++m) {
      if (m > 0) coeff *= (n - i - m + 1) / rho;
      total += coeff;
    }
  }
  return total / rho;
}

}  // namespace

std::vector<double> axis_sum(const StateSpace& space, std::span<const double> f, int j,
                             double rho) {
  if (f.size() != space.size()) throw ValidationError("axis_sum: vector size mismatch");
  if (j < 0 || j >= space.classes()) throw ValidationError("axis_sum: class index out of range");
  if (!(rho > 0.0)) throw ValidationError("axis_sum: rho must be positive");
  std::vector<double> out(space.size(), 0.0);
  std::vector<std::int64_t> below;  // below[d] = index of q - d e_j
  for (std::size_t s = 0; s < space.size(); ++s) {
    const int qj = space.calls(s, j);
    if (qj == 0) continue;
    below.assign(1, static_cast<std::int64_t>(s));
    for (int d = 1; d <= qj; ++d) below.push_back(space.down(below.back(), j));
    double total = 0.0;
    for (int i = 1; i <= qj; ++i) {
      double coeff = 1.0;
      for (int m = 0; m <= qj - i; ++m) {
        if (m > 0) coeff *= (qj - i - m + 1) / rho;
        total += coeff * f[below[i + m]];
      }
    }
    out[s] = total / rho;
  }
  return out;
}

std::vector<double> class_difference(const StateSpace& space,
                                     std::span<const TrafficClass> classes,
                                     std::span<const double> f, int j) {
  if (f.size() != space.size()) throw ValidationError("class_difference: vector size mismatch");
  std::vector<double> out(space.size(), 0.0);
  const double lambda = classes[j].lambda;
  const double mu = classes[j].mu;
  for (std::size_t s = 0; s < space.size(); ++s) {
    double acc = 0.0;
    if (auto up = space.up(s, j); up != StateSpace::kNone) acc += lambda * (f[up] - f[s]);
    if (auto down = space.down(s, j); down != StateSpace::kNone)
      acc -= mu * space.calls(s, j) * (f[s] - f[down]);
    out[s] = acc;
  }
  return out;
}

std::vector<double> series_start(const StateSpace& space, std::span<const TrafficClass> classes) {
  const double rho = total_load(classes);
  double mu = 0.0;
  for (const auto& c : classes) mu += c.mu;
  if (!(rho > 0.0)) throw ValidationError("series_start: total load must be positive");
  std::vector<double> u(space.size());
  for (std::size_t s = 0; s < space.size(); ++s)
    u[s] = unit_axis_sum(space.total_calls(s), rho) / mu;
  return u;
}

SeriesResult series_refine(const StateSpace& space, std::span<const TrafficClass> classes, double g,
                           std::span<const double> cost_rate, std::span<const double> u,
                           const SeriesOptions& options) {
  const int K = space.classes();
  if (classes.size() != static_cast<std::size_t>(K))
    throw ValidationError("class list does not match the state space");
  if (u.size() != space.size() || cost_rate.size() != space.size())
    throw ValidationError("series_refine: vector size mismatch");
  if (options.n_terms < 0) throw ValidationError("series_refine: n_terms must be non-negative");
  for (int j = 0; j < K; ++j)
    if (!(classes[j].lambda > 0.0))
      throw ValidationError(fmt::format("series_refine: classes[{}].lambda must be positive", j));

  // f_{1,j} = w_j - Delta_j u, where the w_j = (1/mu_j) Delta_j h(1, q, rho)
  // split the unit right-hand side among the classes.
  const double rho = total_load(classes);
  std::vector<double> unit(space.size());
  for (std::size_t s = 0; s < space.size(); ++s)
    unit[s] = unit_axis_sum(space.total_calls(s), rho);
  std::vector<std::vector<double>> f(K);
  for (int j = 0; j < K; ++j) {
    auto w = class_difference(space, classes, unit, j);
    auto du = class_difference(space, classes, u, j);
    f[j].resize(space.size());
    for (std::size_t s = 0; s < space.size(); ++s) f[j][s] = w[s] / classes[j].mu - du[s];
  }

  SeriesResult result;
  std::vector<double> v(u.begin(), u.end());
  for (double& x : v) x *= g;
  auto record = [&] {
    result.residual.push_back(howard_residual(space, classes, g, cost_rate, v));
    result.interior_residual.push_back(
        howard_interior_residual(space, classes, g, cost_rate, v));
  };
  record();
  std::vector<double> best = v;
  double best_residual = result.residual.back();
  int rising = 0;

  for (int n = 1; n <= options.n_terms && best_residual > options.convergence; ++n) {
    std::vector<std::vector<double>> term(K);
    for (int j = 0; j < K; ++j) {
      term[j] = axis_sum(space, f[j], j, classes[j].load());
      for (double& x : term[j]) x /= classes[j].mu;
      for (std::size_t s = 0; s < space.size(); ++s) v[s] += g * term[j][s];
    }
    result.terms = n;
    const double previous = result.residual.back();
    record();
    const double current = result.residual.back();
    if (current < best_residual) {
      best_residual = current;
      best = v;
      result.best_terms = n;
    }
    rising = current > previous ? rising + 1 : 0;
    if (rising >= options.divergence_window) {
      result.diverged = true;
      break;
    }
    if (std::abs(current - previous) < options.stagnation) break;

    for (int j = 0; j < K; ++j) {
      std::vector<double> next(space.size(), 0.0);
      for (int k = 0; k < K; ++k) {
        if (k == j) continue;
        auto d = class_difference(space, classes, term[j], k);
        for (std::size_t s = 0; s < space.size(); ++s) next[s] -= d[s];
      }
      f[j] = std::move(next);
    }
  }

  result.converged = result.residual.back() <= options.convergence;
  result.costs.g = g;
  result.costs.anchor = 0;
  if (result.converged) {
    result.costs.v = std::move(v);
    result.best_terms = result.terms;
  } else {
    result.costs.v = std::move(best);
    result.report = fmt::format(
        "series did not converge: Howard residual {:.6e} after {} term(s), best {:.6e} after {} "
        "term(s), residual on non-blocking states {:.6e}{}",
        result.residual.back(), result.terms, best_residual, result.best_terms,
        result.interior_residual.back(), result.diverged ? " (diverging)" : "");
  }
  return result;
}

}  // namespace losscost
