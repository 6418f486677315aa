#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "losscost/cost_dist.hpp"
#include "losscost/error.hpp"

namespace losscost {

namespace {

constexpr int kMaxTerms = 4000;
constexpr long double kTermTolerance = 1e-18L;

}  // namespace

RecursionSeries solve_linear_recursion(double rho, double a, int q_max, double gamma1) {
  if (rho == 0.0 || !std::isfinite(rho)) throw ValidationError("rho must be non-zero and finite");
  if (!std::isfinite(a)) throw ValidationError("a must be finite");
  if (q_max < 1) throw ValidationError("q_max must be at least 1");
  const double shift = a - rho;
  if (std::abs(shift - std::round(shift)) < 1e-9)
    throw ValidationError(
        fmt::format("a - rho = {} is an integer; the Gamma series is undefined", shift));

  RecursionSeries sol;
  sol.rho = rho;
  sol.a = a;

  // gamma_{i+1} = alpha_i / i, alpha_{i+1} = (rho / i) alpha_i (2 + rho - a + i)
  long double gamma = gamma1;
  long double alpha = static_cast<long double>(gamma1) * rho * (rho + 2.0 - a);
  std::vector<long double> gammas{gamma};
  std::vector<long double> alphas{alpha};
  auto coefficient = [&](int j) {  // gamma_j, 1-based
    while (static_cast<int>(gammas.size()) < j) {
      const int i = static_cast<int>(gammas.size());
      gamma = alpha / i;
      alpha = (static_cast<long double>(rho) / i) * alpha * (2.0L + rho - a + i);
      gammas.push_back(gamma);
      alphas.push_back(alpha);
    }
    return gammas[j - 1];
  };

  auto value = [&](int q) {
    long double sum = 0.0L;
    for (int j = 1; j <= kMaxTerms; ++j) {
      const long double term = coefficient(j) * std::tgamma(static_cast<long double>(q) + shift - j);
      sum += term;
      if (j > q + shift + 5 && std::abs(term) <= kTermTolerance * std::abs(sum)) return sum;
    }
    throw NumericError(fmt::format("Gamma series did not converge at q = {}", q));
  };

  std::vector<long double> f;  // f(-1), f(0), ..., f(q_max)
  for (int q = -1; q <= q_max; ++q) f.push_back(value(q));
  for (int q = -1; q + 2 <= q_max; ++q) {
    const long double f0 = f[q + 1], f1 = f[q + 2], f2 = f[q + 3];
    const long double a1 = (q + a) * f1;
    const long double a0 = rho * (q + 1.0L) * f0;
    const long double scale = std::max({std::abs(f2), std::abs(a1), std::abs(a0)});
    if (scale > 0.0L)
      sol.residual = std::max(sol.residual, static_cast<double>(std::abs(f2 - a1 + a0) / scale));
  }
  for (int q = 0; q <= q_max; ++q) sol.f.push_back(static_cast<double>(f[q + 1]));
  for (auto g : gammas) sol.gamma.push_back(static_cast<double>(g));
  for (auto al : alphas) sol.alpha.push_back(static_cast<double>(al));
  return sol;
}

}  // namespace losscost
