#pragma once

#include <cstdint>
#include <optional>

namespace esia::analytics {

// P[#faulty <= floor(Z/3)] with i.i.d. vehicle fault probability p_f.
// Evaluated in log space so Z up to 1e4 stays finite and monotone.
double single_layer_success(uint64_t z, double p_f);

// Per-fog success over its y members; same tail with y in place of Z.
double fog_success(uint64_t y, double p_f);

// P[#failed fogs <= floor(x/3)] with per-fog failure prob 1 - fog_success(y).
double event_a_probability(uint64_t x, uint64_t y, double p_f);

// Two-tier success: sum over j failed fogs (j <= floor(x/3)) of
// P[j fogs fail] * P[<= floor(x/3)-j faulty FVs among the x-j survivors].
double b2uh_success(uint64_t x, uint64_t y, double p_f);

// Relative change (p_a - p_b) / p_b; throws std::domain_error when p_b = 0.
double success_change(double p_a, double p_b);

// Asymptotic optimum message count 1.89 * Z^(4/3).
double min_complexity_bound(double z);

// Single-layer PBFT message count.
uint64_t single_layer_messages(uint64_t z);

struct Scalability {
  double w_ln;          // 1.5 - 0.48/ln(Z)
  double w_log10;       // same rule with the base-10 reading
  double z_prime;       // capacity solving Z^2 = 1.89 * Z'^(4/3)
  uint64_t x_suggest;   // grouping pair for the expanded capacity
  uint64_t y_suggest;
  uint64_t z_used;      // x_suggest * (1 + y_suggest) <= z_prime
};
Scalability scalability(uint64_t z);

// Smallest p_f on [lo, hi] (step 0.01 grid + bisection refinement) where
// I = (b2uh - single)/single turns non-negative after being decisively
// negative; nullopt when no such change occurs on the interval.
std::optional<double> find_crossover(uint64_t z, uint64_t x, uint64_t y, double lo, double hi);

}  // namespace esia::analytics
