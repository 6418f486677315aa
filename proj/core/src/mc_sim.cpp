#include "losscost/mc_sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <thread>

#include <fmt/format.h>

#include "losscost/error.hpp"

namespace losscost {

namespace {

constexpr std::size_t kChunk = 256;

struct Accumulator {
  std::vector<double> time_in_state;
  std::vector<double> frac_sum;
  std::vector<double> frac_sumsq;
  std::vector<std::uint64_t> arrival_state_counts;
  std::vector<std::uint64_t> arrivals;
  std::vector<std::uint64_t> blocked;
  std::uint64_t events = 0;
  std::vector<std::vector<double>> bill_samples;
  std::vector<std::vector<std::uint32_t>> bill_groups;
  std::vector<double> batch_costs;

  Accumulator(std::size_t states, int classes, int batches)
      : time_in_state(states, 0.0),
        frac_sum(states, 0.0),
        frac_sumsq(states, 0.0),
        arrival_state_counts(states, 0),
        arrivals(classes, 0),
        blocked(classes, 0),
        bill_samples(classes),
        bill_groups(classes),
        batch_costs(batches, 0.0) {}

  void merge(const Accumulator& o) {
    for (std::size_t i = 0; i < time_in_state.size(); ++i) {
      time_in_state[i] += o.time_in_state[i];
      frac_sum[i] += o.frac_sum[i];
      frac_sumsq[i] += o.frac_sumsq[i];
      arrival_state_counts[i] += o.arrival_state_counts[i];
    }
    for (std::size_t j = 0; j < arrivals.size(); ++j) {
      arrivals[j] += o.arrivals[j];
      blocked[j] += o.blocked[j];
      bill_samples[j].insert(bill_samples[j].end(), o.bill_samples[j].begin(),
                             o.bill_samples[j].end());
      bill_groups[j].insert(bill_groups[j].end(), o.bill_groups[j].begin(),
                            o.bill_groups[j].end());
    }
    for (std::size_t b = 0; b < batch_costs.size(); ++b) batch_costs[b] += o.batch_costs[b];
    events += o.events;
  }
};

class Replication {
 public:
  Replication(const StateSpace& space, std::span<const TrafficClass> classes,
              const SimConfig& config, const ShadowPriceTable* prices)
      : space_(space),
        classes_(classes),
        config_(config),
        prices_(prices),
        rep_time_(space.size(), 0.0) {
    for (const auto& c : classes) arrival_rate_ += c.lambda;
  }

  // Runs replication `rep` and returns its accumulated cost in the window.
  std::int64_t run(std::size_t rep, Accumulator& acc) {
    std::seed_seq seq{static_cast<std::uint32_t>(config_.seed),
                      static_cast<std::uint32_t>(config_.seed >> 32),
                      static_cast<std::uint32_t>(rep), static_cast<std::uint32_t>(rep >> 32),
                      0x6c6f7373U};
    std::mt19937_64 rng(seq);
    const bool single = config_.replications == 1;
    const double start = config_.warmup;
    const double end = config_.warmup + config_.horizon;
    const double batch_len = config_.horizon / config_.batches;
    const int K = space_.classes();

    std::size_t s = 0;
    double departure_rate = 0.0;
    double t = 0.0;
    std::int64_t cost = 0;
    bool locked = false;
    std::uint64_t locked_mask = 0;
    touched_.clear();

    auto batch_of = [&](double time) {
      return std::min(config_.batches - 1, static_cast<int>((time - start) / batch_len));
    };
    auto occupy = [&](double from, double to) {
      from = std::max(from, start);
      to = std::min(to, end);
      if (to <= from) return;
      if (rep_time_[s] == 0.0) touched_.push_back(s);
      rep_time_[s] += to - from;
      acc.time_in_state[s] += to - from;
      if (single) {
        // split over time batches for batch-means standard errors
        while (from < to) {
          const int b = batch_of(from);
          const double b_end = std::min(to, start + (b + 1) * batch_len);
          batch_time_[b * space_.size() + s] += b_end - from;
          if (b_end <= from) break;
          from = b_end;
        }
      }
    };
    if (single) batch_time_.assign(static_cast<std::size_t>(config_.batches) * space_.size(), 0.0);

    while (true) {
      const double rate = arrival_rate_ + departure_rate;
      const double next =
          rate > 0.0 ? t - std::log(1.0 - std::generate_canonical<double, 53>(rng)) / rate
                     : std::numeric_limits<double>::infinity();
      if (!locked && next >= start) {
        locked = true;
        locked_mask = space_.blocked_mask(s);
      }
      occupy(t, next);
      if (next > end) break;
      t = next;

      const bool observed = t >= start;
      if (observed) ++acc.events;
      double pick = std::generate_canonical<double, 53>(rng) * rate;
      int j = 0;
      bool arrival = false;
      for (; j < K; ++j) {
        if (pick < classes_[j].lambda) {
          arrival = true;
          break;
        }
        pick -= classes_[j].lambda;
      }
      if (arrival) {
        if (observed) {
          ++acc.arrival_state_counts[s];
          ++acc.arrivals[j];
        }
        if (config_.accounting == CostAccounting::TariffLockedAtStart && observed &&
            ((locked_mask >> j) & 1U)) {
          cost += classes_[j].omega;
          if (single) acc.batch_costs[batch_of(t)] += classes_[j].omega;
        }
        if (space_.admits(s, j)) {
          const auto up = space_.up(s, j);
          if (up == StateSpace::kNone)
            throw std::logic_error("simulation admitted a call into a state outside the space");
          if (observed && prices_ != nullptr && config_.record_bills) {
            acc.bill_samples[j].push_back(prices_->price(s, j));
            acc.bill_groups[j].push_back(
                static_cast<std::uint32_t>(single ? batch_of(t) : rep));
          }
          s = static_cast<std::size_t>(up);
          departure_rate += classes_[j].mu;
        } else {
          if (observed) {
            ++acc.blocked[j];
            if (config_.accounting == CostAccounting::Realized) {
              cost += classes_[j].omega;
              if (single) acc.batch_costs[batch_of(t)] += classes_[j].omega;
            }
          }
        }
        continue;
      }
      // departure: pick the class in proportion to mu_j q_j
      int d = 0;
      for (; d < K - 1; ++d) {
        const double r = classes_[d].mu * space_.calls(s, d);
        if (pick < r) break;
        pick -= r;
      }
      if (space_.calls(s, d) == 0) {  // rounding at the end of the range
        d = K - 1;
        while (d > 0 && space_.calls(s, d) == 0) --d;
      }
      const auto down = space_.down(s, d);
      if (down == StateSpace::kNone) throw std::logic_error("departure from an empty class");
      s = static_cast<std::size_t>(down);
      departure_rate -= classes_[d].mu;
      if (departure_rate < 1e-12) departure_rate = recompute_departure_rate(s);
    }

    if (single) {
      for (int b = 0; b < config_.batches; ++b) {
        for (std::size_t i = 0; i < space_.size(); ++i) {
          const double f = batch_time_[b * space_.size() + i] / batch_len;
          acc.frac_sum[i] += f;
          acc.frac_sumsq[i] += f * f;
        }
      }
    } else {
      for (auto i : touched_) {
        const double f = rep_time_[i] / config_.horizon;
        acc.frac_sum[i] += f;
        acc.frac_sumsq[i] += f * f;
      }
    }
    for (auto i : touched_) rep_time_[i] = 0.0;
    return cost;
  }

 private:
  double recompute_departure_rate(std::size_t s) const {
    double r = 0.0;
    for (int j = 0; j < space_.classes(); ++j) r += classes_[j].mu * space_.calls(s, j);
    return r;
  }

  const StateSpace& space_;
  std::span<const TrafficClass> classes_;
  const SimConfig& config_;
  const ShadowPriceTable* prices_;
  double arrival_rate_ = 0.0;
  std::vector<double> rep_time_;
  std::vector<std::size_t> touched_;
  std::vector<double> batch_time_;
};

}  // namespace

void validate_sim_config(const SimConfig& config) {
  if (!(config.horizon > 0.0) || !std::isfinite(config.horizon))
    throw ValidationError("horizon must be positive and finite");
  if (config.replications < 1) throw ValidationError("replications must be at least 1");
  if (!(config.warmup >= 0.0) || !std::isfinite(config.warmup))
    throw ValidationError("warmup must be non-negative and finite");
  if (config.batches < 2) throw ValidationError("batches must be at least 2");
  if (config.replications > std::numeric_limits<std::uint32_t>::max())
    throw ValidationError("too many replications");
}

SimResult simulate(const StateSpace& space, std::span<const TrafficClass> classes,
                   const SimConfig& config, const ShadowPriceTable* prices) {
  validate_sim_config(config);
  validate_classes(classes);
  if (classes.size() != static_cast<std::size_t>(space.classes()))
    throw ValidationError("class list does not match the state space");
  if (config.record_bills && prices == nullptr)
    throw ValidationError("recording bills needs a shadow price table");
  if (prices != nullptr &&
      (prices->states() != space.size() || prices->classes() != space.classes()))
    throw ValidationError("shadow price table does not match the state space");

  const int K = space.classes();
  const bool single = config.replications == 1;
  const int batches = single ? config.batches : 0;
  const std::size_t chunks = (config.replications + kChunk - 1) / kChunk;
  unsigned workers = config.workers != 0 ? config.workers : std::thread::hardware_concurrency();
  workers = static_cast<unsigned>(std::clamp<std::size_t>(workers, 1, chunks));

  SimResult result;
  result.horizon = config.horizon;
  result.replications = config.replications;
  result.total_cost_samples.assign(config.replications, 0);
  Accumulator total(space.size(), K, batches);

  std::vector<Replication> runners;
  runners.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) runners.emplace_back(space, classes, config, prices);

  // Chunks are handed out in rounds of `workers` and merged in chunk order,
  // so the floating-point sums do not depend on the worker count's timing.
  for (std::size_t round = 0; round * workers < chunks; ++round) {
    std::vector<Accumulator> partial;
    partial.reserve(workers);
    for (unsigned w = 0; w < workers; ++w) partial.emplace_back(space.size(), K, batches);
    std::vector<std::exception_ptr> errors(workers);
    auto work = [&](unsigned w) {
      try {
        const std::size_t chunk = round * workers + w;
        if (chunk >= chunks) return;
        const std::size_t lo = chunk * kChunk;
        const std::size_t hi = std::min(config.replications, lo + kChunk);
        for (std::size_t rep = lo; rep < hi; ++rep)
          result.total_cost_samples[rep] = runners[w].run(rep, partial[w]);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    };
    if (workers == 1) {
      work(0);
    } else {
      std::vector<std::thread> threads;
      for (unsigned w = 0; w < workers; ++w) threads.emplace_back(work, w);
      for (auto& th : threads) th.join();
    }
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    for (unsigned w = 0; w < workers; ++w) total.merge(partial[w]);
  }

  const double observed = std::accumulate(total.time_in_state.begin(),
                                          total.time_in_state.end(), 0.0);
  result.occupancy.resize(space.size());
  result.occupancy_se.resize(space.size());
  const double groups = single ? config.batches : static_cast<double>(config.replications);
  for (std::size_t i = 0; i < space.size(); ++i) {
    result.occupancy[i] = observed > 0.0 ? total.time_in_state[i] / observed : 0.0;
    const double mean = total.frac_sum[i] / groups;
    const double var = std::max(0.0, (total.frac_sumsq[i] - groups * mean * mean) / (groups - 1));
    result.occupancy_se[i] = groups > 1 ? std::sqrt(var / groups) : 0.0;
  }
  result.arrival_state_counts = std::move(total.arrival_state_counts);
  result.arrivals = std::move(total.arrivals);
  result.blocked = std::move(total.blocked);
  result.events = total.events;
  result.bill_samples = std::move(total.bill_samples);
  result.bill_groups = std::move(total.bill_groups);
  result.batch_costs = std::move(total.batch_costs);
  result.groups = static_cast<std::size_t>(groups);
  return result;
}

Estimate SimResult::cost_rate() const {
  if (replications == 1) {
    std::vector<double> rates(batch_costs.size());
    const double len = horizon / static_cast<double>(batch_costs.size());
    for (std::size_t b = 0; b < batch_costs.size(); ++b) rates[b] = batch_costs[b] / len;
    return mean_estimate(rates);
  }
  auto e = mean_total_cost();
  return {e.value / horizon, e.se / horizon};
}

Estimate SimResult::mean_total_cost() const {
  if (replications == 1) {
    auto rate = cost_rate();
    return {static_cast<double>(total_cost_samples.front()), rate.se * horizon};
  }
  std::vector<double> x(total_cost_samples.begin(), total_cost_samples.end());
  return mean_estimate(x);
}

TotalCostHistogram empirical_total_cost_hist(const SimResult& result, int r_max) {
  if (r_max < 0) throw ValidationError("r_max must be non-negative");
  TotalCostHistogram h;
  std::vector<std::uint64_t> counts(r_max + 1, 0);
  for (auto c : result.total_cost_samples) {
    if (c <= r_max) ++counts[c];
    else ++h.overflow;
  }
  h.samples = result.total_cost_samples.size();
  const double n = static_cast<double>(h.samples);
  for (int r = 0; r <= r_max; ++r) {
    HistogramBin bin;
    bin.r = r;
    bin.count = counts[r];
    bin.probability = counts[r] / n;
    bin.se = std::sqrt(bin.probability * (1 - bin.probability) / n);
    bin.wilson = wilson_interval(counts[r], h.samples);
    h.bins.push_back(bin);
  }
  std::vector<double> x(result.total_cost_samples.begin(), result.total_cost_samples.end());
  h.mean = mean_estimate(x);
  return h;
}

BillHistogram empirical_bill_hist(const SimResult& result, int k) {
  if (k < 0 || static_cast<std::size_t>(k) >= result.bill_samples.size())
    throw ValidationError(fmt::format("class {} out of range or bills not recorded", k));
  const auto& prices = result.bill_samples[k];
  const auto& groups = result.bill_groups[k];
  if (prices.empty()) throw ValidationError(fmt::format("class {} was never admitted", k));

  std::vector<std::size_t> order(prices.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return prices[a] < prices[b]; });

  const std::size_t G = result.groups;
  std::vector<double> per_group_total(G, 0.0);
  std::vector<double> per_group_price(G, 0.0);
  for (std::size_t i = 0; i < prices.size(); ++i) {
    per_group_total[groups[i]] += 1.0;
    per_group_price[groups[i]] += prices[i];
  }

  BillHistogram h;
  h.samples = prices.size();
  h.mean = ratio_estimate(per_group_price, per_group_total);
  std::vector<double> per_group_bin(G, 0.0);
  std::size_t pos = 0;
  while (pos < order.size()) {
    const double first = prices[order[pos]];
    std::fill(per_group_bin.begin(), per_group_bin.end(), 0.0);
    BillBin bin;
    bin.price = first;
    while (pos < order.size() && prices[order[pos]] - first <= kPriceMergeTolerance) {
      per_group_bin[groups[order[pos]]] += 1.0;
      ++bin.count;
      ++pos;
    }
    const auto e = ratio_estimate(per_group_bin, per_group_total);
    bin.probability = e.value;
    bin.se = e.se;
    h.bins.push_back(bin);
  }
  return h;
}

}  // namespace losscost
