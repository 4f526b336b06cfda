#include "esia/analytics.hpp"

#include <cmath>
#include <stdexcept>

namespace esia::analytics {

namespace {

double log_choose(uint64_t n, uint64_t k) {
  return std::lgamma(static_cast<double>(n) + 1.0) - std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

void check_pf(double p_f) {
  if (!(p_f >= 0.0 && p_f <= 1.0)) throw std::domain_error("fault probability outside [0, 1]");
}

// P[Binomial(n, p) <= m], each term exponentiated from log space. Terms are
// all <= 1 and the result lives in [0, 1], so plain accumulation is stable;
// underflowed terms vanish harmlessly.
double binom_cdf(uint64_t n, uint64_t m, double p) {
  if (p <= 0.0) return 1.0;
  if (m >= n) return 1.0;
  if (p >= 1.0) return 0.0;
  const double lp = std::log(p);
  const double lq = std::log1p(-p);
  double acc = 0.0;
  for (uint64_t i = 0; i <= m; ++i) {
    const double lt = log_choose(n, i) + static_cast<double>(i) * lp +
                      static_cast<double>(n - i) * lq;
    acc += std::exp(lt);
  }
  return acc < 1.0 ? acc : 1.0;
}

}  // namespace

double single_layer_success(uint64_t z, double p_f) {
  if (z == 0) throw std::domain_error("single_layer_success: empty committee");
  check_pf(p_f);
  return binom_cdf(z, z / 3, p_f);
}

double fog_success(uint64_t y, double p_f) { return single_layer_success(y, p_f); }

double event_a_probability(uint64_t x, uint64_t y, double p_f) {
  if (x == 0) throw std::domain_error("event_a_probability: no fogs");
  check_pf(p_f);
  const double p_fail = 1.0 - fog_success(y, p_f);
  return binom_cdf(x, x / 3, p_fail);
}

double b2uh_success(uint64_t x, uint64_t y, double p_f) {
  if (x == 0 || y == 0) throw std::domain_error("b2uh_success: empty grouping");
  check_pf(p_f);
  const double p1 = fog_success(y, p_f);
  const uint64_t budget = x / 3;
  if (p1 <= 0.0) return 0.0;  // every fog fails; budget floor(x/3) < x
  const double lfail = p1 >= 1.0 ? -INFINITY : std::log1p(-p1);
  const double lok = std::log(p1);
  double acc = 0.0;
  for (uint64_t j = 0; j <= budget && j <= x; ++j) {
    double lpj;
    if (j == 0) {
      lpj = static_cast<double>(x) * lok;
    } else if (lfail == -INFINITY) {
      continue;
    } else {
      lpj = log_choose(x, j) + static_cast<double>(j) * lfail +
            static_cast<double>(x - j) * lok;
    }
    const double cond = binom_cdf(x - j, budget - j, p_f);
    acc += std::exp(lpj) * cond;
  }
  return acc < 1.0 ? acc : 1.0;
}

double success_change(double p_a, double p_b) {
  if (p_b == 0.0) throw std::domain_error("success_change: baseline probability is zero");
  return (p_a - p_b) / p_b;
}

double min_complexity_bound(double z) { return 1.89 * std::pow(z, 4.0 / 3.0); }

uint64_t single_layer_messages(uint64_t z) { return z * z; }

Scalability scalability(uint64_t z) {
  if (z < 2) throw std::domain_error("scalability: Z too small");
  Scalability out{};
  const double zd = static_cast<double>(z);
  out.w_ln = 1.5 - 0.48 / std::log(zd);
  out.w_log10 = 1.5 - 0.48 / std::log10(zd);
  out.z_prime = std::pow(zd * zd / 1.89, 0.75);
  // grouping pair for the expanded capacity: x tracks y(y+2)/2 (rounded both
  // ways when fractional), keep the candidate filling closest to z_prime.
  uint64_t best_used = 0;
  for (uint64_t y = 4;; ++y) {
    const uint64_t twice = y * (y + 2);
    const uint64_t lo = twice / 2;
    const uint64_t hi = (twice + 1) / 2;
    if (static_cast<double>(lo * (y + 1)) > out.z_prime) break;
    for (uint64_t xc : {lo, hi}) {
      const uint64_t used = xc * (y + 1);
      if (static_cast<double>(used) <= out.z_prime && used > best_used) {
        best_used = used;
        out.x_suggest = xc;
        out.y_suggest = y;
        out.z_used = used;
      }
    }
  }
  if (best_used == 0) throw std::domain_error("scalability: no feasible expanded grouping");
  return out;
}

std::optional<double> find_crossover(uint64_t z, uint64_t x, uint64_t y, double lo, double hi) {
  auto change = [&](double pf) {
    const double s1 = single_layer_success(z, pf);
    if (s1 <= 0.0) return 0.0;
    return success_change(b2uh_success(x, y, pf), s1);
  };
  // require a decisive negative (beyond float noise around I ~ 0) before a
  // non-negative sample counts as a sign change.
  constexpr double kNoise = 1e-9;
  double prev_pf = lo;
  double prev = change(lo);
  bool armed = prev < -kNoise;
  for (double pf = lo + 0.01; pf <= hi + 1e-12; pf += 0.01) {
    const double cur = change(pf);
    if (armed && cur >= 0.0) {
      double a = prev_pf, b = pf;
      for (int i = 0; i < 40; ++i) {
        const double mid = 0.5 * (a + b);
        (change(mid) >= 0.0 ? b : a) = mid;
      }
      return 0.5 * (a + b);
    }
    if (cur < -kNoise) armed = true;
    prev_pf = pf;
    prev = cur;
  }
  (void)prev;
  return std::nullopt;
}

}  // namespace esia::analytics
