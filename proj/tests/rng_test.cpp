#include "esia/rng.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

namespace esia {
namespace {

TEST(DetRngTest, SameSeedSameStream) {
  DetRng a(42), b(42);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a.next_u64(), b.next_u64());
}

TEST(DetRngTest, DifferentSeedsDiverge) {
  DetRng a(42), b(43);
  int same = 0;
  for (int i = 0; i < 100; ++i) same += a.next_u64() == b.next_u64();
  EXPECT_EQ(same, 0);
}

TEST(DetRngTest, DeriveSeparatesStreams) {
  DetRng a = DetRng::derive(42, 0);
  DetRng b = DetRng::derive(42, 1);
  DetRng c = DetRng::derive(42, 0);
  EXPECT_NE(a.next_u64(), b.next_u64());
  DetRng a2 = DetRng::derive(42, 0);
  EXPECT_EQ(a2.next_u64(), c.next_u64());
}

TEST(DetRngTest, UnitIntervalBounds) {
  DetRng rng(7);
  double lo = 1.0, hi = 0.0;
  for (int i = 0; i < 100000; ++i) {
    const double u = rng.next_unit();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    lo = std::min(lo, u);
    hi = std::max(hi, u);
  }
  // both tails visited
  EXPECT_LT(lo, 0.01);
  EXPECT_GT(hi, 0.99);
}

TEST(DetRngTest, BernoulliDegenerate) {
  DetRng rng(9);
  for (int i = 0; i < 1000; ++i) {
    ASSERT_FALSE(rng.bernoulli(0.0));
    ASSERT_TRUE(rng.bernoulli(1.0));
  }
}

TEST(DetRngTest, BernoulliFrequency) {
  DetRng rng(10);
  const double p = 0.3;
  const int n = 200000;
  int hits = 0;
  for (int i = 0; i < n; ++i) hits += rng.bernoulli(p);
  const double se = std::sqrt(p * (1 - p) / n);
  EXPECT_NEAR(static_cast<double>(hits) / n, p, 4 * se);
}

TEST(DetRngTest, NextBelowInRange) {
  DetRng rng(11);
  std::vector<int> seen(13, 0);
  for (int i = 0; i < 130000; ++i) {
    const uint64_t v = rng.next_below(13);
    ASSERT_LT(v, 13u);
    ++seen[v];
  }
  for (int count : seen) EXPECT_GT(count, 8000);  // roughly uniform
}

TEST(DetRngTest, UniformWithinBounds) {
  DetRng rng(12);
  for (int i = 0; i < 10000; ++i) {
    const double v = rng.uniform(-3.5, 12.25);
    ASSERT_GE(v, -3.5);
    ASSERT_LT(v, 12.25);
  }
}

}  // namespace
}  // namespace esia
