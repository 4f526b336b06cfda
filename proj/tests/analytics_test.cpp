#include "esia/analytics.hpp"

#include <gmpxx.h>
#include <gtest/gtest.h>

#include <cmath>
#include <stdexcept>

namespace esia::analytics {
namespace {

mpq_class qpow(const mpq_class& base, uint64_t e) {
  mpq_class acc = 1;
  for (uint64_t i = 0; i < e; ++i) acc *= base;
  return acc;
}

mpz_class binom(uint64_t n, uint64_t k) {
  mpz_class out;
  mpz_bin_uiui(out.get_mpz_t(), n, k);
  return out;
}

// exact rational tail: P[failures <= floor(n/3)] with failure probability p
mpq_class exact_tail(uint64_t n, const mpq_class& p) {
  const mpq_class live = 1 - p;
  mpq_class sum = 0;
  for (uint64_t i = 0; i <= n / 3; ++i) sum += binom(n, i) * qpow(p, i) * qpow(live, n - i);
  return sum;
}

// exact two-tier success: fogs fail as blocks, surviving heads fail alone
mpq_class exact_b2uh(uint64_t x, uint64_t y, const mpq_class& p) {
  const mpq_class p1 = exact_tail(y, p);
  mpq_class total = 0;
  for (uint64_t j = 0; j <= x / 3; ++j) {
    const mpq_class fog_part = binom(x, j) * qpow(1 - p1, j) * qpow(p1, x - j);
    mpq_class head_part = 0;
    for (uint64_t k = 0; j + k <= x / 3; ++k)
      head_part += binom(x - j, k) * qpow(p, k) * qpow(1 - p, x - j - k);
    total += fog_part * head_part;
  }
  return total;
}

TEST(SingleLayerTest, MatchesExactRational) {
  const struct {
    uint64_t z;
    mpq_class p;
  } cases[] = {
      {4, mpq_class(1, 10)},  {7, mpq_class(1, 5)},   {12, mpq_class(3, 10)},
      {20, mpq_class(2, 5)},  {30, mpq_class(1, 4)},  {30, mpq_class(9, 20)},
      {25, mpq_class(1, 20)}, {16, mpq_class(1, 2)},
  };
  for (const auto& c : cases) {
    const double want = exact_tail(c.z, c.p).get_d();
    const double got = single_layer_success(c.z, c.p.get_d());
    EXPECT_NEAR(got, want, 1e-12 + 1e-10 * want) << "z=" << c.z;
  }
}

TEST(SingleLayerTest, DegenerateProbabilities) {
  EXPECT_DOUBLE_EQ(single_layer_success(12, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(single_layer_success(12, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(fog_success(8, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(fog_success(8, 1.0), 0.0);
}

TEST(SingleLayerTest, RejectsBadArguments) {
  EXPECT_THROW(single_layer_success(0, 0.1), std::domain_error);
  EXPECT_THROW(single_layer_success(10, -0.1), std::domain_error);
  EXPECT_THROW(single_layer_success(10, 1.1), std::domain_error);
  EXPECT_THROW(b2uh_success(0, 4, 0.1), std::domain_error);
}

TEST(B2uhTest, MatchesExactRational) {
  const struct {
    uint64_t x, y;
    mpq_class p;
  } cases[] = {
      {4, 4, mpq_class(1, 10)}, {6, 5, mpq_class(1, 5)},   {9, 4, mpq_class(3, 10)},
      {12, 4, mpq_class(1, 5)}, {10, 8, mpq_class(2, 5)},  {15, 6, mpq_class(1, 4)},
      {8, 7, mpq_class(1, 20)}, {20, 10, mpq_class(3, 20)},
  };
  for (const auto& c : cases) {
    const double want = exact_b2uh(c.x, c.y, c.p).get_d();
    const double got = b2uh_success(c.x, c.y, c.p.get_d());
    EXPECT_NEAR(got, want, 1e-12 + 1e-10 * want) << "x=" << c.x << " y=" << c.y;
  }
}

TEST(B2uhTest, FrozenReferencePoint) {
  // exact value for (12, 4, 1/5): committee math worked out by hand with the
  // rational oracle above
  const double want = exact_b2uh(12, 4, mpq_class(1, 5)).get_d();
  EXPECT_NEAR(want, 0.5989282210394155, 1e-12);
  EXPECT_NEAR(b2uh_success(12, 4, 0.2), want, 1e-11);
}

TEST(B2uhTest, DegenerateProbabilities) {
  EXPECT_DOUBLE_EQ(b2uh_success(12, 4, 0.0), 1.0);
  EXPECT_DOUBLE_EQ(b2uh_success(12, 4, 1.0), 0.0);
}

TEST(B2uhTest, MonotoneInFailureProbability) {
  double prev = 1.1;
  for (double p = 0.0; p <= 1.0; p += 0.05) {
    const double cur = b2uh_success(12, 4, p);
    EXPECT_LE(cur, prev + 1e-12);
    prev = cur;
  }
}

TEST(SuccessChangeTest, Basics) {
  EXPECT_DOUBLE_EQ(success_change(0.9, 0.6), 0.5);
  EXPECT_DOUBLE_EQ(success_change(0.3, 0.6), -0.5);
  EXPECT_THROW(success_change(0.5, 0.0), std::domain_error);
}

TEST(ComplexityTest, BoundFormula) {
  for (uint64_t z : {100ull, 360ull, 660ull, 1092ull}) {
    const double want = 1.89 * std::pow(static_cast<double>(z), 4.0 / 3.0);
    EXPECT_NEAR(min_complexity_bound(static_cast<double>(z)), want, 1e-9 * want);
  }
  EXPECT_EQ(single_layer_messages(360), 360ull * 360ull);
}

TEST(ScalabilityTest, ExpansionRules) {
  const auto s = scalability(360);
  EXPECT_NEAR(s.w_ln, 1.5 - 0.48 / std::log(360.0), 1e-12);
  EXPECT_NEAR(s.w_log10, 1.5 - 0.48 / std::log10(360.0), 1e-12);
  const double oracle = std::pow(360.0 * 360.0 / 1.89, 0.75);
  EXPECT_NEAR(s.z_prime, oracle, 1e-6 * oracle);
  EXPECT_EQ(s.x_suggest, 200u);
  EXPECT_EQ(s.y_suggest, 19u);
  EXPECT_EQ(s.z_used, 4000u);
  EXPECT_LE(static_cast<double>(s.z_used), s.z_prime);
}

TEST(ScalabilityTest, SuggestedPairIsMaximalAndFeasible) {
  for (uint64_t z : {360ull, 660ull, 1092ull}) {
    const auto s = scalability(z);
    EXPECT_LE(static_cast<double>(s.x_suggest * (1 + s.y_suggest)), s.z_prime);
    EXPECT_EQ(s.z_used, s.x_suggest * (1 + s.y_suggest));
    EXPECT_GE(s.y_suggest, 4u);
  }
}

TEST(CrossoverTest, NoSignChangeInTightWindow) {
  // two-tier stays below single layer across this window for the reference
  // configurations; the scan reports that honestly
  EXPECT_FALSE(find_crossover(360, 40, 8, 0.35, 0.45).has_value());
}

TEST(CrossoverTest, FindsHighProbabilityCrossing) {
  const auto cross = find_crossover(360, 40, 8, 0.5, 0.95);
  ASSERT_TRUE(cross.has_value());
  const double pf = *cross;
  EXPECT_GT(pf, 0.5);
  EXPECT_LT(pf, 0.95);
  const double before_s1 = single_layer_success(360, pf - 0.02);
  const double before = success_change(b2uh_success(40, 8, pf - 0.02), before_s1);
  EXPECT_LT(before, 0.0);
}

}  // namespace
}  // namespace esia::analytics
