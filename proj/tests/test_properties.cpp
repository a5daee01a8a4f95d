#include <gtest/gtest.h>

#include <random>

#include "pnm/analysis.hpp"
#include "pnm/machine.hpp"
#include "support.hpp"

using namespace pnm;

namespace {

FiringVector random_firing(std::mt19937_64& rng, std::size_t transitions, int max_count = 2) {
  std::vector<Tokens> v(transitions);
  for (auto& x : v) x = static_cast<Tokens>(rng() % (max_count + 1));
  return FiringVector(v);
}

} // namespace

TEST(Properties, CompositeMatrixIsDifference) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 300; ++i) {
    const auto naive = oracle::random_net(rng);
    const auto m = build_incidence(testing_support::to_net(naive));
    ASSERT_EQ(m.d.rows(), naive.transitions);
    ASSERT_EQ(m.d.cols(), naive.places);
    for (std::size_t t = 0; t < naive.transitions; ++t)
      for (std::size_t p = 0; p < naive.places; ++p) {
        EXPECT_EQ(m.d(t, p), m.d_plus(t, p) - m.d_minus(t, p));
        EXPECT_GE(m.d_plus(t, p), 0);
        EXPECT_GE(m.d_minus(t, p), 0);
      }
  }
}

TEST(Properties, FiringMatchesNaiveTokenGame) {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 500; ++i) {
    const auto naive = oracle::random_net(rng);
    const auto matrices = build_incidence(testing_support::to_net(naive));
    const auto m0 = oracle::random_marking(rng, naive.places);
    const auto tbar = random_firing(rng, naive.transitions);
    const auto expected = oracle::fire_vector(naive, m0, tbar.counts());
    if (expected) {
      EXPECT_EQ(fire(Marking(m0), tbar, matrices).counts(), *expected);
    } else {
      EXPECT_THROW(fire(Marking(m0), tbar, matrices), InadmissibleFiring);
    }
  }
}

TEST(Properties, EnabledCountMatchesRepeatedFiring) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 500; ++i) {
    const auto naive = oracle::random_net(rng);
    const auto matrices = build_incidence(testing_support::to_net(naive));
    const auto m0 = oracle::random_marking(rng, naive.places);
    for (std::size_t t = 0; t < naive.transitions; ++t)
      EXPECT_EQ(enabled_count(Marking(m0), TransitionId{t}, matrices), oracle::times_enabled(naive, m0, t));
  }
}

TEST(Properties, FiringIsLinear) {
  std::mt19937_64 rng(4);
  int checked = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto naive = oracle::random_net(rng);
    const auto matrices = build_incidence(testing_support::to_net(naive));
    const Marking m0(oracle::random_marking(rng, naive.places, 8));
    const auto a = random_firing(rng, naive.transitions, 1);
    const auto b = random_firing(rng, naive.transitions, 1);
    try {
      const Marking step = fire(fire(m0, a, matrices), b, matrices);
      // Sequential firing lands where the summed vector points, whenever the
      // summed vector is itself admissible.
      try {
        EXPECT_EQ(fire(m0, a + b, matrices), step);
        ++checked;
      } catch (const InadmissibleFiring&) {
      }
    } catch (const InadmissibleFiring&) {
    }
  }
  EXPECT_GT(checked, 50);
}

TEST(Properties, MarkingsStayNonNegative) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 500; ++i) {
    const auto naive = oracle::random_net(rng);
    const auto matrices = build_incidence(testing_support::to_net(naive));
    Marking m(oracle::random_marking(rng, naive.places));
    for (int k = 0; k < 20; ++k) {
      try {
        m = fire(m, random_firing(rng, naive.transitions, 1), matrices);
      } catch (const InadmissibleFiring&) {
      }
      for (auto x : m.counts()) ASSERT_GE(x, 0);
    }
  }
}

TEST(Properties, DeltaHatIsJointlyAdmissible) {
  std::mt19937_64 rng(6);
  for (int i = 0; i < 500; ++i) {
    const auto naive = oracle::random_net(rng);
    const Net net = testing_support::to_net(naive);
    const Marking m0(oracle::random_marking(rng, naive.places));
    const Machine machine(net, m0, {});
    const Selection s = delta_hat({}, m0, machine);
    EXPECT_NO_THROW(fire(m0, s.firing, machine.matrices()));
    // Greedy: nothing more can be added to the selection.
    for (std::size_t t = 0; t < naive.transitions; ++t) {
      if (!oracle::has_inputs(naive, t)) continue;
      Marking after_inputs = m0;
      for (std::size_t p = 0; p < naive.places; ++p) {
        Tokens used = 0;
        for (std::size_t u = 0; u < naive.transitions; ++u) used += s.firing[u] * machine.matrices().d_minus(u, p);
        after_inputs.set(PlaceId{p}, m0[p] - used);
      }
      EXPECT_EQ(enabled_count(after_inputs, TransitionId{t}, machine.matrices()), 0) << "t" << t;
    }
  }
}
