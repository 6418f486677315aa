#include "losscost/statistics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <boost/math/distributions/chi_squared.hpp>

#include "losscost/error.hpp"

namespace losscost {

Interval wilson_interval(std::uint64_t successes, std::uint64_t trials, double z) {
  if (trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double center = (p + z2 / (2 * n)) / (1 + z2 / n);
  const double half = z / (1 + z2 / n) * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n));
  return {std::max(0.0, center - half), std::min(1.0, center + half)};
}

Estimate mean_estimate(std::span<const double> samples) {
  Estimate e;
  if (samples.empty()) return e;
  const double n = static_cast<double>(samples.size());
  e.value = std::accumulate(samples.begin(), samples.end(), 0.0) / n;
  if (samples.size() < 2) return e;
  double ss = 0.0;
  for (double x : samples) ss += (x - e.value) * (x - e.value);
  e.se = std::sqrt(ss / (n - 1) / n);
  return e;
}

Estimate ratio_estimate(std::span<const double> x, std::span<const double> n) {
  if (x.size() != n.size()) throw ValidationError("ratio_estimate: size mismatch");
  Estimate e;
  const double sx = std::accumulate(x.begin(), x.end(), 0.0);
  const double sn = std::accumulate(n.begin(), n.end(), 0.0);
  if (!(sn > 0.0)) return e;
  e.value = sx / sn;
  const std::size_t g = x.size();
  if (g < 2) return e;
  const double nbar = sn / static_cast<double>(g);
  double ss = 0.0;
  for (std::size_t i = 0; i < g; ++i) {
    const double d = x[i] - e.value * n[i];
    ss += d * d;
  }
  e.se = std::sqrt(ss / (static_cast<double>(g) * (static_cast<double>(g) - 1))) / nbar;
  return e;
}

ChiSquareResult chi_square_test(std::span<const std::uint64_t> observed,
                                std::span<const double> expected, std::uint64_t overflow,
                                double min_expected) {
  if (observed.size() != expected.size())
    throw ValidationError("chi_square_test: observed and expected differ in length");
  std::uint64_t total = overflow;
  for (auto o : observed) total += o;
  if (total == 0) throw ValidationError("chi_square_test: no observations");
  const double n = static_cast<double>(total);

  std::vector<double> obs_cells;
  std::vector<double> exp_cells;
  double obs_acc = 0.0;
  double exp_acc = 0.0;
  double covered = 0.0;
  for (std::size_t r = 0; r < observed.size(); ++r) {
    obs_acc += static_cast<double>(observed[r]);
    exp_acc += n * expected[r];
    covered += expected[r];
    if (exp_acc >= min_expected) {
      obs_cells.push_back(obs_acc);
      exp_cells.push_back(exp_acc);
      obs_acc = exp_acc = 0.0;
    }
  }
  // tail cell: leftover bins, uncovered probability and overflow observations
  obs_acc += static_cast<double>(overflow);
  exp_acc += n * std::max(0.0, 1.0 - covered);
  if (!obs_cells.empty() && (exp_acc < min_expected)) {
    obs_cells.back() += obs_acc;
    exp_cells.back() += exp_acc;
  } else if (exp_acc > 0.0 || obs_acc > 0.0) {
    obs_cells.push_back(obs_acc);
    exp_cells.push_back(exp_acc);
  }

  ChiSquareResult res;
  res.bins = static_cast<int>(obs_cells.size());
  for (std::size_t c = 0; c < obs_cells.size(); ++c) {
    if (exp_cells[c] <= 0.0) {
      if (obs_cells[c] > 0.0) res.statistic = std::numeric_limits<double>::infinity();
      continue;
    }
    const double d = obs_cells[c] - exp_cells[c];
    res.statistic += d * d / exp_cells[c];
  }
  res.dof = std::max(1, res.bins - 1);
  if (std::isinf(res.statistic)) {
    res.p_value = 0.0;
  } else {
    boost::math::chi_squared dist(res.dof);
    res.p_value = boost::math::cdf(boost::math::complement(dist, res.statistic));
  }
  return res;
}

double total_variation(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw ValidationError("total_variation: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += std::abs(p[i] - q[i]);
  return 0.5 * s;
}

}  // namespace losscost
