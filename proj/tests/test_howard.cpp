#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "instances.hpp"
#include "losscost/error.hpp"
#include "losscost/howard.hpp"
#include "losscost/stationary.hpp"

using namespace losscost;
using namespace losscost::testing;

namespace {

struct Solved {
  Instance inst;
  StateSpace space;
  StationaryDistribution st;
};

Solved solve(const Instance& inst) {
  auto space = enumerate_states(inst.classes, inst.policy);
  auto st = stationary(space, inst.classes);
  return {inst, std::move(space), std::move(st)};
}

// Dense solve of Q v = g 1 - r with the first row replaced by v(0) = 0.
std::vector<double> dense_oracle(const Solved& s) {
  Eigen::MatrixXd A = build_generator_dense(s.space, s.inst.classes);
  Eigen::VectorXd rhs(A.rows());
  for (Eigen::Index i = 0; i < A.rows(); ++i) rhs(i) = s.st.g - s.st.cost_rate[i];
  A.row(0).setZero();
  A(0, 0) = 1.0;
  rhs(0) = 0.0;
  Eigen::VectorXd v = A.fullPivLu().solve(rhs);
  return {v.data(), v.data() + v.size()};
}

}  // namespace

TEST(HowardExact, SingleClassReference) {
  const auto s = solve(single_class());
  const auto v = solve_howard_exact(s.space, s.inst.classes, s.st.g, s.st.cost_rate);
  ASSERT_EQ(v.v.size(), 3u);
  EXPECT_NEAR(v.v[0], 0.0, 1e-15);
  EXPECT_NEAR(v.v[1], 0.2, 1e-12);
  EXPECT_NEAR(v.v[2], 0.6, 1e-12);
  EXPECT_EQ(v.anchor, 0u);
  EXPECT_GT(v.condition, 1.0);
}

TEST(HowardExact, ZeroCostsGiveZeroValues) {
  auto inst = reference_two_class();
  for (auto& c : inst.classes) c.omega = 0;
  const auto s = solve(inst);
  const auto v = solve_howard_exact(s.space, inst.classes, s.st.g, s.st.cost_rate);
  for (double x : v.v) EXPECT_NEAR(x, 0.0, 1e-14);
}

TEST(HowardExact, ResidualAndDenseOracleOnRandomInstances) {
  std::mt19937_64 rng(17);
  for (int n = 0; n < 25; ++n) {
    const auto s = solve(random_instance(rng));
    const auto v = solve_howard_exact(s.space, s.inst.classes, s.st.g, s.st.cost_rate);
    EXPECT_LE(howard_residual(s.space, s.inst.classes, s.st.g, s.st.cost_rate, v.v), 1e-8)
        << s.inst.name;
    const auto oracle = dense_oracle(s);
    for (std::size_t i = 0; i < v.v.size(); ++i)
      EXPECT_NEAR(v.v[i], oracle[i], 1e-8 * std::max(1.0, std::abs(oracle[i])));
  }
}

TEST(HowardExact, InconsistentCostRateFails) {
  const auto s = solve(single_class());
  // with g not equal to pi . r there is no solution
  EXPECT_THROW(solve_howard_exact(s.space, s.inst.classes, 0.5, s.st.cost_rate), NumericError);
}

TEST(SymmetricClosedForm, SmallValues) {
  EXPECT_EQ(relative_cost_symmetric(0, 0.3, 1.5, 2.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_cost_symmetric(1, 0.3, 1.5, 2.0), 0.3 / (1.5 * 2.0));
  EXPECT_THROW(relative_cost_symmetric(-1, 0.3, 1.5, 2.0), ValidationError);
  for (int q = 0; q < 15; ++q)
    EXPECT_NEAR(relative_cost_symmetric(q, 0.3, 1.5, 0.7), symmetric_double_sum(q, 0.3, 1.5, 0.7),
                1e-12 * std::max(1.0, symmetric_double_sum(q, 0.3, 1.5, 0.7)));
}

TEST(SymmetricClosedForm, SingleClassReference) {
  EXPECT_NEAR(relative_cost_symmetric(1, 0.2, 1.0, 1.0), 0.2, 1e-15);
  EXPECT_NEAR(relative_cost_symmetric(2, 0.2, 1.0, 1.0), 0.6, 1e-15);
}

TEST(SymmetricClosedForm, MatchesExactSolver) {
  std::vector<Instance> cases{
      {"K=2 mu=1 rho=2 C=3", {{1, 1, 1, 1}, {1, 1, 1, 1}}, FullSharing{3}},
      {"K=3 b=2", {{0.4, 0.7, 2, 2}, {0.9, 0.7, 2, 0}, {0.3, 0.7, 2, 3}}, FullSharing{9}},
  };
  std::mt19937_64 rng(23);
  for (int n = 0; n < 15; ++n) cases.push_back(random_instance(rng, true));
  for (const auto& inst : cases) {
    const auto s = solve(inst);
    const auto exact = solve_howard_exact(s.space, inst.classes, s.st.g, s.st.cost_rate);
    const auto approx =
        approximate_relative_costs(s.space, inst.classes, inst.policy, s.st.g,
                                   Approximation::Symmetric);
    for (std::size_t i = 0; i < s.space.size(); ++i)
      EXPECT_NEAR(approx.v[i], exact.v[i], 1e-8) << inst.name << " state " << s.space.label(i);
  }
}

TEST(EqualBandwidthApprox, ReducesToSymmetricForEqualRates) {
  const std::vector<TrafficClass> classes{{0.5, 1.3, 1, 1}, {1.1, 1.3, 1, 2}};
  const double rho = total_load(classes);
  for (int a = 0; a < 5; ++a)
    for (int b = 0; b < 5; ++b) {
      const std::vector<int> q{a, b};
      EXPECT_NEAR(relative_cost_equal_bandwidth_approx(q, classes, 0.4),
                  relative_cost_symmetric(a + b, 0.4, 1.3, rho), 1e-13);
    }
}

TEST(EqualBandwidthApprox, ZeroAtEmptyState) {
  const auto inst = asymmetric_equal_bandwidth();
  EXPECT_EQ(relative_cost_equal_bandwidth_approx(std::vector<int>{0, 0}, inst.classes, 0.7), 0.0);
}

TEST(EqualBandwidthApprox, BeatsTheZeroGuess) {
  const auto s = solve(asymmetric_equal_bandwidth(2.0, 3));
  const auto approx = approximate_relative_costs(s.space, s.inst.classes, s.inst.policy, s.st.g,
                                                 Approximation::EqualBandwidth);
  const std::vector<double> zero(s.space.size(), 0.0);
  const double r_approx =
      howard_residual(s.space, s.inst.classes, s.st.g, s.st.cost_rate, approx.v);
  const double r_zero = howard_residual(s.space, s.inst.classes, s.st.g, s.st.cost_rate, zero);
  EXPECT_LT(r_approx, r_zero);
}

TEST(GeneralApprox, ReducesToSymmetricForEqualBandwidthsAndRates) {
  for (int b : {1, 2, 3}) {
    const std::vector<TrafficClass> one{{0.8, 1.4, b, 1}};
    for (int q = 0; q < 8; ++q)
      EXPECT_NEAR(relative_cost_general_approx(std::vector<int>{q}, one, 0.3),
                  relative_cost_symmetric(q, 0.3, 1.4, 0.8 / 1.4), 1e-12);
    const std::vector<TrafficClass> three{{0.8, 1.4, b, 1}, {0.2, 1.4, b, 1}, {1.0, 1.4, b, 0}};
    const double rho = total_load(three);
    for (int q1 = 0; q1 < 4; ++q1)
      for (int q2 = 0; q2 < 4; ++q2)
        EXPECT_NEAR(relative_cost_general_approx(std::vector<int>{q1, q2, 1}, three, 0.3),
                    relative_cost_symmetric(q1 + q2 + 1, 0.3, 1.4, rho), 1e-12);
  }
}

TEST(GeneralApprox, ZeroAtEmptyStateAndFiniteResidual) {
  const Instance inst{"b=(1,2)", {{1.0, 1.0, 1, 1}, {0.5, 1.0, 2, 1}}, FullSharing{4}};
  EXPECT_EQ(relative_cost_general_approx(std::vector<int>{0, 0}, inst.classes, 0.5), 0.0);
  const auto s = solve(inst);
  const auto approx = approximate_relative_costs(s.space, inst.classes, inst.policy, s.st.g,
                                                 Approximation::General);
  const double r = howard_residual(s.space, inst.classes, s.st.g, s.st.cost_rate, approx.v);
  EXPECT_TRUE(std::isfinite(r));
}

TEST(Approximations, ApplicabilityIsChecked) {
  const auto s = solve(reference_two_class());
  EXPECT_THROW(approximate_relative_costs(s.space, s.inst.classes, s.inst.policy, s.st.g,
                                          Approximation::Symmetric),
               ValidationError);
  EXPECT_THROW(approximate_relative_costs(s.space, s.inst.classes, s.inst.policy, s.st.g,
                                          Approximation::EqualBandwidth),
               ValidationError);
  const auto p = solve(per_class_reference());
  EXPECT_THROW(approximate_relative_costs(p.space, p.inst.classes, p.inst.policy, p.st.g,
                                          Approximation::Symmetric),
               ValidationError);
}

TEST(ShadowPrices, SingleClassReference) {
  const auto s = solve(single_class());
  const auto v = solve_howard_exact(s.space, s.inst.classes, s.st.g, s.st.cost_rate);
  const ShadowPriceTable prices(v, s.space);
  ASSERT_EQ(prices.entries().size(), 2u);
  EXPECT_NEAR(prices.price(0, 0), 0.2, 1e-12);
  EXPECT_NEAR(prices.price(1, 0), 0.4, 1e-12);
  EXPECT_FALSE(prices.has_price(2, 0));
  EXPECT_TRUE(std::isnan(prices.price(2, 0)));
}

TEST(ShadowPrices, ZeroCostsGiveZeroPrices) {
  auto inst = per_class_reference();
  for (auto& c : inst.classes) c.omega = 0;
  const auto s = solve(inst);
  const auto v = solve_howard_exact(s.space, inst.classes, s.st.g, s.st.cost_rate);
  for (const auto& e : ShadowPriceTable(v, s.space).entries()) EXPECT_NEAR(e.price, 0.0, 1e-14);
}

TEST(ShadowPrices, AnchorShiftLeavesPricesUnchanged) {
  const auto s = solve(reference_two_class());
  auto v = solve_howard_exact(s.space, s.inst.classes, s.st.g, s.st.cost_rate);
  const ShadowPriceTable before(v, s.space);
  const double shift = v.v[5];
  for (double& x : v.v) x -= shift;  // v pinned at state 5 instead
  v.anchor = 5;
  const ShadowPriceTable after(v, s.space);
  ASSERT_EQ(before.entries().size(), after.entries().size());
  for (std::size_t e = 0; e < before.entries().size(); ++e)
    EXPECT_NEAR(before.entries()[e].price, after.entries()[e].price, 1e-14);
}

TEST(Bills, SingleClassReference) {
  const auto s = solve(single_class());
  const auto v = solve_howard_exact(s.space, s.inst.classes, s.st.g, s.st.cost_rate);
  const auto bills = bill_distribution(ShadowPriceTable(v, s.space), s.st.pi);
  ASSERT_EQ(bills.per_class.size(), 1u);
  ASSERT_EQ(bills.per_class[0].size(), 2u);
  EXPECT_NEAR(bills.per_class[0][0].price, 0.2, 1e-12);
  EXPECT_NEAR(bills.per_class[0][0].probability, 0.5, 1e-14);
  EXPECT_NEAR(bills.per_class[0][1].price, 0.4, 1e-12);
  EXPECT_NEAR(bills.per_class[0][1].probability, 0.5, 1e-14);
  EXPECT_NEAR(bills.mean(0), 0.3, 1e-12);
}

TEST(Bills, NormalizedWithTheDefinitionalMean) {
  std::mt19937_64 rng(31);
  for (int n = 0; n < 10; ++n) {
    const auto s = solve(random_instance(rng));
    const auto v = solve_howard_exact(s.space, s.inst.classes, s.st.g, s.st.cost_rate);
    const ShadowPriceTable prices(v, s.space);
    const auto bills = bill_distribution(prices, s.st.pi);
    for (int k = 0; k < s.space.classes(); ++k) {
      double total = 0.0;
      for (const auto& pm : bills.per_class[k]) {
        total += pm.probability;
        EXPECT_GE(pm.price, -1e-12);
      }
      EXPECT_NEAR(total, 1.0, 1e-12);
      double num = 0.0, den = 0.0;
      for (std::size_t i = 0; i < s.space.size(); ++i)
        if (prices.has_price(i, k)) {
          num += s.st.pi[i] * prices.price(i, k);
          den += s.st.pi[i];
        }
      EXPECT_NEAR(bills.mean(k), num / den, 1e-12);
    }
  }
}

TEST(Bills, EqualPricesAreMerged) {
  // symmetric two-class system: both classes see the same price in a state,
  // and states with the same total share one price
  const Instance inst{"symmetric", {{1, 1, 1, 1}, {1, 1, 1, 1}}, FullSharing{3}};
  const auto s = solve(inst);
  const auto v = solve_howard_exact(s.space, inst.classes, s.st.g, s.st.cost_rate);
  const auto bills = bill_distribution(ShadowPriceTable(v, s.space), s.st.pi);
  EXPECT_EQ(bills.per_class[0].size(), 3u);
}

TEST(Bills, NeverAdmittedClassIsAnError) {
  const Instance inst{"C=0", {{1, 1, 1, 1}}, FullSharing{0}};
  const auto s = solve(inst);
  const auto v = solve_howard_exact(s.space, inst.classes, s.st.g, s.st.cost_rate);
  EXPECT_THROW(bill_distribution(ShadowPriceTable(v, s.space), s.st.pi), ValidationError);
}
