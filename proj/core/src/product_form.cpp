#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include <fmt/format.h>

#include "losscost/cost_dist.hpp"
#include "losscost/error.hpp"
#include "losscost/stationary.hpp"

namespace losscost {

namespace {

struct ActiveClass {
  int omega;
  double log_weight;  // log(dt lambda) or log(t lambda)
  double rate;        // dt lambda or t lambda
};

// Blocked classes that can add cost. Blocked classes with omega = 0 sum out
// of the law, and lambda = 0 forces r_i = 0.
std::vector<ActiveClass> active_classes(std::span<const TrafficClass> classes,
                                        std::uint64_t blocked_mask, double scale) {
  std::vector<ActiveClass> out;
  for (std::size_t i = 0; i < classes.size(); ++i) {
    if (!((blocked_mask >> i) & 1U)) continue;
    if (classes[i].omega == 0 || classes[i].lambda == 0.0) continue;
    const double rate = scale * classes[i].lambda;
    out.push_back({classes[i].omega, std::log(rate), rate});
  }
  return out;
}

// Visits every (r_1..r_m) over the active classes with sum omega_i r_i <= r_max
// and sum r_i <= count_cap, passing (sum omega r, sum r, sum(r log w - lgamma(r+1))).
template <typename Visit>
void enumerate_counts(const std::vector<ActiveClass>& active, int r_max, long long count_cap,
                      Visit&& visit) {
  auto rec = [&](auto&& self, std::size_t k, int cost, long long count, double log_term) -> void {
    if (k == active.size()) {
      visit(cost, count, log_term);
      return;
    }
    const auto& c = active[k];
    for (int ri = 0; cost + ri * c.omega <= r_max && count + ri <= count_cap; ++ri) {
      self(self, k + 1, cost + ri * c.omega, count + ri,
           log_term + ri * c.log_weight - std::lgamma(ri + 1.0));
    }
  };
  rec(rec, 0, 0, 0, 0.0);
}

void check_pi(const StateSpace& space, std::span<const TrafficClass> classes,
              std::span<const double> pi) {
  if (classes.size() != static_cast<std::size_t>(space.classes()))
    throw ValidationError("class list does not match the state space");
  if (pi.size() != space.size()) throw ValidationError("pi does not match the state space");
}

template <typename Law>
ClosedFormCostDist assemble(const StateSpace& space, std::span<const double> pi, double t,
                            int r_max, Law&& law) {
  ClosedFormCostDist out;
  out.t = t;
  out.r_max = r_max;
  out.states = space.size();
  out.mass.assign(space.size() * (r_max + 1), 0.0);
  std::map<std::uint64_t, std::vector<double>> memo;
  for (std::size_t i = 0; i < space.size(); ++i) {
    const auto mask = space.blocked_mask(i);
    auto it = memo.find(mask);
    if (it == memo.end()) it = memo.emplace(mask, law(mask)).first;
    for (int r = 0; r <= r_max; ++r) out.mass[i * (r_max + 1) + r] = it->second[r] * pi[i];
  }
  return out;
}

}  // namespace

std::vector<double> conditional_cost_discrete(std::span<const TrafficClass> classes,
                                              std::uint64_t blocked_mask, int n, double dt,
                                              int r_max) {
  if (n < 0) throw ValidationError("step count must be non-negative");
  if (!(dt > 0.0)) throw ValidationError("step length must be positive");
  if (r_max < 0) throw ValidationError("r_max must be non-negative");
  const auto active = active_classes(classes, blocked_mask, dt);
  double stay = 1.0;
  for (const auto& c : active) stay -= c.rate;
  if (stay < 0.0)
    throw ValidationError("step too long: blocked arrival probability per step exceeds 1");
  const double log_stay = std::log(stay);
  const double log_n_fact = std::lgamma(n + 1.0);
  std::vector<double> pmf(r_max + 1, 0.0);
  enumerate_counts(active, r_max, n, [&](int cost, long long count, double log_term) {
    const long long rest = n - count;
    if (stay == 0.0 && rest > 0) return;
    const double log_c = log_n_fact - std::lgamma(rest + 1.0) + log_term +
                         (rest > 0 ? rest * log_stay : 0.0);
    pmf[cost] += std::exp(log_c);
  });
  return pmf;
}

std::vector<double> conditional_cost_continuous(std::span<const TrafficClass> classes,
                                                std::uint64_t blocked_mask, double t,
                                                int r_max) {
  if (!(t >= 0.0)) throw ValidationError("time must be non-negative");
  if (r_max < 0) throw ValidationError("r_max must be non-negative");
  std::vector<double> pmf(r_max + 1, 0.0);
  if (t == 0.0) {
    pmf[0] = 1.0;
    return pmf;
  }
  const auto active = active_classes(classes, blocked_mask, t);
  double total_rate = 0.0;
  for (const auto& c : active) total_rate += c.rate;
  enumerate_counts(active, r_max, std::numeric_limits<long long>::max(),
                   [&](int cost, long long, double log_term) {
                     pmf[cost] += std::exp(log_term - total_rate);
                   });
  return pmf;
}

double closed_form_discrete(const StateSpace& space, std::span<const TrafficClass> classes,
                            std::span<const double> pi, int n, double dt, std::size_t q, int r) {
  check_pi(space, classes, pi);
  if (q >= space.size()) throw ValidationError("state index out of range");
  if (r < 0) return 0.0;
  return conditional_cost_discrete(classes, space.blocked_mask(q), n, dt, r)[r] * pi[q];
}

double closed_form_continuous(const StateSpace& space, std::span<const TrafficClass> classes,
                              std::span<const double> pi, double t, std::size_t q, int r) {
  check_pi(space, classes, pi);
  if (q >= space.size()) throw ValidationError("state index out of range");
  if (r < 0) return 0.0;
  return conditional_cost_continuous(classes, space.blocked_mask(q), t, r)[r] * pi[q];
}

std::vector<double> ClosedFormCostDist::total_cost() const {
  std::vector<double> out(r_max + 1, 0.0);
  for (std::size_t i = 0; i < states; ++i)
    for (int r = 0; r <= r_max; ++r) out[r] += at(i, r);
  return out;
}

ClosedFormCostDist closed_form_discrete_grid(const StateSpace& space,
                                             std::span<const TrafficClass> classes,
                                             std::span<const double> pi, int n, double dt,
                                             int r_max) {
  check_pi(space, classes, pi);
  return assemble(space, pi, n * dt, r_max, [&](std::uint64_t mask) {
    return conditional_cost_discrete(classes, mask, n, dt, r_max);
  });
}

ClosedFormCostDist closed_form_continuous_grid(const StateSpace& space,
                                               std::span<const TrafficClass> classes,
                                               std::span<const double> pi, double t, int r_max) {
  check_pi(space, classes, pi);
  return assemble(space, pi, t, r_max, [&](std::uint64_t mask) {
    return conditional_cost_continuous(classes, mask, t, r_max);
  });
}

TotalCostDistribution summarize_total_cost(double t, std::vector<double> mass) {
  TotalCostDistribution out;
  out.t = t;
  double total = 0.0;
  double cumulative = 0.0;
  for (std::size_t r = 0; r < mass.size(); ++r) {
    total += mass[r];
    out.mean += static_cast<double>(r) * mass[r];
  }
  for (std::size_t r = 0; r < mass.size(); ++r) {
    cumulative += mass[r];
    if (out.q95 < 0 && cumulative >= 0.95) out.q95 = static_cast<int>(r);
    if (out.q99 < 0 && cumulative >= 0.99) out.q99 = static_cast<int>(r);
  }
  out.leakage = std::max(0.0, 1.0 - total);
  out.mass = std::move(mass);
  return out;
}

TotalCostDistribution total_cost_distribution(const StateSpace& space,
                                              std::span<const TrafficClass> classes, double t,
                                              int r_max) {
  const auto st = stationary(space, classes);
  if (r_max >= 0)
    return summarize_total_cost(t, closed_form_continuous_grid(space, classes, st.pi, t, r_max)
                                       .total_cost());
  r_max = default_r_max(classes, t);
  auto dist = summarize_total_cost(
      t, closed_form_continuous_grid(space, classes, st.pi, t, r_max).total_cost());
  for (int attempt = 0; attempt < 4 && dist.leakage > 1e-12; ++attempt) {
    r_max = 2 * r_max + 1;
    dist = summarize_total_cost(
        t, closed_form_continuous_grid(space, classes, st.pi, t, r_max).total_cost());
  }
  return dist;
}

DetailedBalanceReport detailed_balance_counterexample(const StateSpace& space,
                                                      std::span<const TrafficClass> classes,
                                                      double t, int r_max, double tolerance) {
  const auto st = stationary(space, classes);
  if (r_max < 0) r_max = default_r_max(classes, t);
  const auto grid = closed_form_continuous_grid(space, classes, st.pi, t, r_max);
  DetailedBalanceReport report;
  report.t = t;
  for (std::size_t i = 0; i < space.size(); ++i) {
    for (int k = 0; k < space.classes(); ++k) {
      const auto up = space.up(i, k);
      if (up == StateSpace::kNone) continue;
      const double rate_down = classes[k].mu * (space.calls(i, k) + 1);
      for (int r = 0; r <= r_max; ++r) {
        const double lhs = rate_down * grid.at(up, r);
        const double rhs = classes[k].lambda * grid.at(i, r);
        const double gap = std::abs(lhs - rhs);
        if (gap > report.magnitude) {
          report.magnitude = gap;
          report.state = i;
          report.cls = k;
          report.r = r;
          report.lhs = lhs;
          report.rhs = rhs;
        }
      }
    }
  }
  report.found = report.magnitude > tolerance;
  if (report.found) {
    report.description = fmt::format(
        "pairwise balance fails between state {} and its class-{} successor at r = {}: "
        "mu (q+1) s(q+e, r) = {:.6e} but lambda s(q, r) = {:.6e} (t = {})",
        space.label(report.state), report.cls, report.r, report.lhs, report.rhs, t);
  } else {
    report.description = fmt::format("no counterexample: largest violation {:.3e} (t = {})",
                                      report.magnitude, t);
  }
  return report;
}

}  // namespace losscost
