#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "instances.hpp"
#include "losscost/error.hpp"
#include "losscost/stationary.hpp"

using namespace losscost;
using namespace losscost::testing;

namespace {

std::vector<State> states_of(const StateSpace& s) {
  std::vector<State> out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    auto q = s.state(i);
    out.emplace_back(q.begin(), q.end());
  }
  return out;
}

}  // namespace

TEST(EnumerateStates, SingleClassFullSharing) {
  const auto inst = single_class();
  const auto space = enumerate_states(inst.classes, inst.policy);
  ASSERT_EQ(space.size(), 3u);
  EXPECT_EQ(states_of(space), (std::vector<State>{{0}, {1}, {2}}));
  EXPECT_TRUE(space.admits(0, 0));
  EXPECT_TRUE(space.admits(1, 0));
  EXPECT_FALSE(space.admits(2, 0));
}

TEST(EnumerateStates, UnequalBandwidths) {
  const std::vector<TrafficClass> classes{{1, 1, 1, 1}, {1, 1, 2, 1}};
  const auto space = enumerate_states(classes, FullSharing{2});
  EXPECT_EQ(states_of(space), (std::vector<State>{{0, 0}, {0, 1}, {1, 0}, {2, 0}}));
  const auto i10 = *space.find(std::vector<int>{1, 0});
  EXPECT_TRUE(space.admits(i10, 0));
  EXPECT_FALSE(space.admits(i10, 1));
  EXPECT_EQ(space.admitted_mask(i10), 1u);
}

TEST(EnumerateStates, PerClassThresholds) {
  const std::vector<TrafficClass> classes{{1, 1, 1, 1}, {1, 1, 1, 1}};
  const auto space = enumerate_states(classes, PerClassThreshold{{1, 1}});
  EXPECT_EQ(states_of(space), (std::vector<State>{{0, 0}, {0, 1}, {1, 0}, {1, 1}}));
  EXPECT_EQ(space.blocked_mask(3), 3u);
}

TEST(EnumerateStates, NeighbourTablesAreConsistent) {
  std::mt19937_64 rng(11);
  for (int n = 0; n < 10; ++n) {
    const auto inst = random_instance(rng);
    const auto space = enumerate_states(inst.classes, inst.policy);
    EXPECT_EQ(space.total_calls(0), 0);
    for (std::size_t i = 0; i < space.size(); ++i)
      for (int j = 0; j < space.classes(); ++j) {
        if (space.calls(i, j) > 0) {
          ASSERT_NE(space.down(i, j), StateSpace::kNone);
          EXPECT_EQ(space.calls(space.down(i, j), j), space.calls(i, j) - 1);
        }
        if (space.admits(i, j)) {
          EXPECT_EQ(space.calls(space.up(i, j), j), space.calls(i, j) + 1);
        }
      }
  }
}

TEST(EnumerateStates, SizeCapIsEnforced) {
  const std::vector<TrafficClass> classes{{1, 1, 1, 1}, {1, 1, 1, 1}, {1, 1, 1, 1}};
  EXPECT_THROW(enumerate_states(classes, FullSharing{30}, 1000), SizeError);
}

TEST(EnumerateStates, RejectsInvalidInput) {
  EXPECT_THROW(enumerate_states(std::vector<TrafficClass>{{1, 0.0, 1, 1}}, FullSharing{2}),
               ValidationError);
  EXPECT_THROW(enumerate_states(std::vector<TrafficClass>{{1, 1, 0, 1}}, FullSharing{2}),
               ValidationError);
  EXPECT_THROW(enumerate_states(std::vector<TrafficClass>{{1, 1, 1, -1}}, FullSharing{2}),
               ValidationError);
  EXPECT_THROW(enumerate_states(std::vector<TrafficClass>{{1, 1, 1, 1}}, PerClassThreshold{{1, 2}}),
               ValidationError);
}

TEST(CoordinateConvexity, HoldsForBothPolicies) {
  std::mt19937_64 rng(5);
  for (int n = 0; n < 20; ++n) {
    const auto inst = random_instance(rng);
    EXPECT_TRUE(coordinate_convex(enumerate_states(inst.classes, inst.policy))) << inst.name;
  }
}

TEST(CoordinateConvexity, DetectsBlockingInsideTheSpace) {
  // class 2 is blocked at (1,0) although (1,1) is an admitted state
  const auto space = StateSpace::from_states(2, {{0, 0}, {1, 0}, {0, 1}, {1, 1}},
                                             {0b11, 0b00, 0b01, 0b00});
  EXPECT_FALSE(coordinate_convex(space));
}

TEST(CoordinateConvexity, AdmissionOutsideTheSpaceIsRejected) {
  // class 2 admitted at (1,0) but (1,1) missing
  EXPECT_THROW(StateSpace::from_states(2, {{0, 0}, {1, 0}, {0, 1}}, {0b11, 0b11, 0b01}),
               ValidationError);
}

TEST(Stationary, SingleClassReference) {
  const auto inst = single_class();
  const auto space = enumerate_states(inst.classes, inst.policy);
  const auto st = stationary(space, inst.classes);
  EXPECT_NEAR(st.pi[0], 1.0 / 2.5, 1e-15);
  EXPECT_NEAR(st.pi[1], 1.0 / 2.5, 1e-15);
  EXPECT_NEAR(st.pi[2], 0.5 / 2.5, 1e-15);
  EXPECT_NEAR(st.G(), 2.5, 1e-14);
  EXPECT_NEAR(st.g, 0.2, 1e-15);
  EXPECT_EQ(st.cost_rate, (std::vector<double>{0.0, 0.0, 1.0}));
}

TEST(Stationary, ZeroArrivalsStayEmpty) {
  const std::vector<TrafficClass> classes{{0.0, 1.0, 1, 1}, {0.0, 2.0, 1, 4}};
  const auto space = enumerate_states(classes, FullSharing{3});
  const auto st = stationary(space, classes);
  EXPECT_EQ(st.pi[0], 1.0);
  for (std::size_t i = 1; i < space.size(); ++i) EXPECT_EQ(st.pi[i], 0.0);
  EXPECT_EQ(st.g, 0.0);
}

TEST(Stationary, ProductFormAgainstNullSpace) {
  std::mt19937_64 rng(21);
  for (int n = 0; n < 15; ++n) {
    const auto inst = random_instance(rng);
    const auto space = enumerate_states(inst.classes, inst.policy);
    const auto st = stationary(space, inst.classes);
    const auto oracle = null_space_stationary(build_generator_dense(space, inst.classes));
    for (std::size_t i = 0; i < space.size(); ++i)
      EXPECT_NEAR(st.pi[i], oracle(i), 1e-10) << inst.name;
    EXPECT_NEAR(std::accumulate(st.pi.begin(), st.pi.end(), 0.0), 1.0, 1e-12);
    EXPECT_LE(global_balance_residual(build_generator(space, inst.classes), st.pi), 1e-10);
  }
}

TEST(Stationary, PairwiseBalanceOfTheOccupancy) {
  std::mt19937_64 rng(8);
  for (int n = 0; n < 10; ++n) {
    const auto inst = random_instance(rng);
    const auto space = enumerate_states(inst.classes, inst.policy);
    const auto st = stationary(space, inst.classes);
    for (std::size_t i = 0; i < space.size(); ++i)
      for (int j = 0; j < space.classes(); ++j) {
        const auto down = space.down(i, j);
        if (down == StateSpace::kNone) continue;
        EXPECT_NEAR(inst.classes[j].mu * space.calls(i, j) * st.pi[i],
                    inst.classes[j].lambda * st.pi[down], 1e-13);
      }
  }
}

TEST(Stationary, LargeLoadStaysFiniteAndMatchesErlangB) {
  const std::vector<TrafficClass> classes{{900.0, 1.0, 1, 1}};
  const int C = 1000;
  const auto space = enumerate_states(classes, FullSharing{C});
  const auto st = stationary(space, classes);
  EXPECT_THROW((void)st.G(), NumericError);
  EXPECT_TRUE(std::isfinite(st.log_G));
  double e = 1.0;  // Erlang B recursion
  for (int n = 1; n <= C; ++n) e = 900.0 * e / (n + 900.0 * e);
  EXPECT_NEAR(blocking_probabilities(space, st.pi)[0], e, 1e-12);
  EXPECT_NEAR(st.g, 900.0 * e, 1e-9);
}

TEST(Generator, SingleClassMatrix) {
  const auto inst = single_class();
  const auto space = enumerate_states(inst.classes, inst.policy);
  Eigen::MatrixXd expected(3, 3);
  expected << -1, 1, 0, 1, -2, 1, 0, 2, -2;
  EXPECT_TRUE(build_generator_dense(space, inst.classes).isApprox(expected, 0.0));
}

TEST(Generator, RowsSumToZero) {
  std::mt19937_64 rng(3);
  for (int n = 0; n < 10; ++n) {
    const auto inst = random_instance(rng);
    const auto space = enumerate_states(inst.classes, inst.policy);
    const auto Q = build_generator_dense(space, inst.classes);
    for (Eigen::Index i = 0; i < Q.rows(); ++i) EXPECT_NEAR(Q.row(i).sum(), 0.0, 1e-12);
    EXPECT_TRUE(Q.isApprox(Eigen::MatrixXd(build_generator(space, inst.classes))));
  }
}
