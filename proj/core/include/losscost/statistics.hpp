#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace losscost {

/// Point estimate with its standard error.
struct Estimate {
  double value = 0.0;
  double se = 0.0;
};

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Wilson score interval for a binomial proportion.
Interval wilson_interval(std::uint64_t successes, std::uint64_t trials, double z = 1.959963984540054);

/// Sample mean and its standard error (n - 1 denominator).
Estimate mean_estimate(std::span<const double> samples);

/// Ratio estimator sum(x) / sum(n) with a delta-method standard error over
/// independent groups (replications or time batches).
Estimate ratio_estimate(std::span<const double> x, std::span<const double> n);

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 0.0;
  int bins = 0;  ///< bins after merging
};

/// Pearson goodness of fit of integer counts against probabilities over the
/// same support. Adjacent cells are merged left to right until each merged
/// cell expects at least `min_expected` observations; the last cell also
/// absorbs the probability not covered by `expected` and any overflow count.
ChiSquareResult chi_square_test(std::span<const std::uint64_t> observed,
                                std::span<const double> expected, std::uint64_t overflow = 0,
                                double min_expected = 5.0);

/// 0.5 * sum |p - q|.
double total_variation(std::span<const double> p, std::span<const double> q);

}  // namespace losscost
