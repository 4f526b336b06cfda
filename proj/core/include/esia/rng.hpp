#pragma once

#include <cstdint>

namespace esia {

// splitmix64 stream. Used everywhere randomness feeds simulation state so
// results are reproducible across platforms and thread schedules (std::
// distributions are implementation-defined; this is not).
class DetRng {
 public:
  explicit DetRng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // uniform in [0, 1) with 53 bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return next_unit() < p; }

  // uniform in [0, n); rejection-sampled so small n is unbiased.
  uint64_t next_below(uint64_t n) {
    if (n <= 1) return 0;
    const uint64_t limit = ~uint64_t{0} - (~uint64_t{0} % n);
    uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  // Independent child stream; used to decouple per-fog draws from scheduling.
  static DetRng derive(uint64_t seed, uint64_t stream) {
    DetRng a(seed ^ 0x6A09E667F3BCC908ull);
    DetRng b(stream ^ 0xBB67AE8584CAA73Bull);
    return DetRng(a.next_u64() ^ (b.next_u64() + 0x9E3779B97F4A7C15ull));
  }

 private:
  uint64_t state_;
};

}  // namespace esia
