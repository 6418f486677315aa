#include <algorithm>
#include <cmath>
#include <limits>

#include <fmt/format.h>

#include "losscost/error.hpp"
#include "losscost/howard.hpp"

namespace losscost {

ShadowPriceTable::ShadowPriceTable(const RelativeCosts& costs, const StateSpace& space)
    : classes_(space.classes()), states_(space.size()) {
  if (costs.v.size() != space.size())
    throw ValidationError("relative costs do not match the state space");
  dense_.assign(states_ * classes_, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t i = 0; i < states_; ++i) {
    for (int k = 0; k < classes_; ++k) {
      const auto up = space.up(i, k);
      if (up == StateSpace::kNone) continue;
      const double p = costs.v[up] - costs.v[i];
      dense_[i * classes_ + k] = p;
      entries_.push_back({i, k, p});
    }
  }
}

bool ShadowPriceTable::has_price(std::size_t i, int k) const {
  return !std::isnan(dense_[i * classes_ + k]);
}

double BillDistribution::mean(int k) const {
  double m = 0.0;
  for (const auto& pm : per_class.at(k)) m += pm.price * pm.probability;
  return m;
}

std::vector<PriceMass> class_bill_distribution(const ShadowPriceTable& prices,
                                               std::span<const double> pi, int k) {
  if (pi.size() != prices.states())
    throw ValidationError("bill_distribution: pi does not match the price table");
  if (k < 0 || k >= prices.classes()) throw ValidationError("class index out of range");
  std::vector<PriceMass> raw;
  double mass = 0.0;
  for (std::size_t i = 0; i < prices.states(); ++i) {
    if (!prices.has_price(i, k) || pi[i] <= 0.0) continue;
    raw.push_back({prices.price(i, k), pi[i]});
    mass += pi[i];
  }
  if (raw.empty() || !(mass > 0.0))
    throw ValidationError(fmt::format("class {} is never admitted", k));
  std::sort(raw.begin(), raw.end(),
            [](const PriceMass& a, const PriceMass& b) { return a.price < b.price; });
  std::vector<PriceMass> bins;
  for (const auto& pm : raw) {
    if (!bins.empty() && pm.price - bins.back().price <= kPriceMergeTolerance) {
      bins.back().probability += pm.probability / mass;
    } else {
      bins.push_back({pm.price, pm.probability / mass});
    }
  }
  return bins;
}

BillDistribution bill_distribution(const ShadowPriceTable& prices, std::span<const double> pi) {
  BillDistribution out;
  for (int k = 0; k < prices.classes(); ++k)
    out.per_class.push_back(class_bill_distribution(prices, pi, k));
  return out;
}

}  // namespace losscost
