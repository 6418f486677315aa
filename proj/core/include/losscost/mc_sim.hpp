#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "losscost/howard.hpp"
#include "losscost/model.hpp"
#include "losscost/state_space.hpp"
#include "losscost/statistics.hpp"

namespace losscost {

/// How blocked arrivals are charged inside the observation window.
enum class CostAccounting {
  /// omega_j for every arrival that is actually blocked.
  Realized,
  /// The blocked-class set of the state at the window start is frozen and
  /// every class-j arrival in the window costs omega_j when j is in that set.
  /// This is the charging rule under which the simpler scheme's closed form
  /// is the exact law (run it with a warmup so the start state is stationary).
  TariffLockedAtStart,
};

struct SimConfig {
  double horizon = 1.0;          ///< length of the observation window
  std::size_t replications = 1;
  std::uint64_t seed = 0;
  bool record_bills = false;     ///< needs a price table
  double warmup = 0.0;           ///< simulated time before the window, from the empty state
  CostAccounting accounting = CostAccounting::Realized;
  unsigned workers = 0;          ///< 0: hardware concurrency
  int batches = 20;              ///< time batches for single-replication standard errors
};

/// Throws ValidationError for a non-positive horizon, zero replications,
/// negative warmup or fewer than two batches.
void validate_sim_config(const SimConfig& config);

struct SimResult {
  double horizon = 0.0;
  std::size_t replications = 0;
  std::vector<std::int64_t> total_cost_samples;  ///< one per replication
  /// Cost per time batch of a single replication (empty for several).
  std::vector<double> batch_costs;
  std::vector<double> occupancy;     ///< time-average state frequencies in the window
  std::vector<double> occupancy_se;  ///< across replications or time batches
  std::vector<std::uint64_t> arrival_state_counts;  ///< state seen by arrivals, blocked or not
  std::vector<std::uint64_t> arrivals;              ///< per class
  std::vector<std::uint64_t> blocked;               ///< per class
  std::uint64_t events = 0;

  /// Per class: price charged to each admitted arrival, and the group
  /// (replication, or time batch for one replication) it fell in.
  std::vector<std::vector<double>> bill_samples;
  std::vector<std::vector<std::uint32_t>> bill_groups;
  std::size_t groups = 0;  ///< number of groups used for standard errors

  /// Accumulated cost per unit time with a replication or batch-means SE.
  Estimate cost_rate() const;
  /// Mean accumulated cost over the window.
  Estimate mean_total_cost() const;
};

/// Discrete-event simulation with exponential competing clocks. Results are
/// bit-identical for a given seed whatever the worker count: replication i
/// draws from its own generator seeded by (seed, i), and replications are
/// merged in index order.
SimResult simulate(const StateSpace& space, std::span<const TrafficClass> classes,
                   const SimConfig& config, const ShadowPriceTable* prices = nullptr);

struct HistogramBin {
  int r = 0;
  double probability = 0.0;
  double se = 0.0;
  std::uint64_t count = 0;
  Interval wilson;  ///< 95% Wilson interval
};

struct TotalCostHistogram {
  std::vector<HistogramBin> bins;  ///< r = 0..r_max
  std::uint64_t overflow = 0;      ///< samples above r_max
  std::uint64_t samples = 0;
  Estimate mean;
};

TotalCostHistogram empirical_total_cost_hist(const SimResult& result, int r_max);

struct BillBin {
  double price = 0.0;
  double probability = 0.0;
  double se = 0.0;
  std::uint64_t count = 0;
};

struct BillHistogram {
  std::vector<BillBin> bins;  ///< sorted by price, merged within kPriceMergeTolerance
  Estimate mean;
  std::uint64_t samples = 0;
};

/// Throws ValidationError when bills were not recorded or class k was never admitted.
BillHistogram empirical_bill_hist(const SimResult& result, int k);

}  // namespace losscost
