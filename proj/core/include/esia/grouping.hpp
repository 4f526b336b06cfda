#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace esia::grouping {

struct VehicleSnapshot {
  uint32_t id;
  double x_m;
  double y_m;
  double speed_mps;
  double remaining_m;  // distance left to the destination, > 0
  uint32_t road_id;
};

struct HeadWeights {
  double l = 0.5;
  double m = 0.5;  // l + m = 1
};

struct FogWeights {
  double a = 0.5;
  double b = 0.3;
  double c = 0.2;  // a + b + c = 1
};

// The seven reference weight triples used by the stability experiments.
FogWeights weight_scheme(int scheme);

struct GroupSizes {
  uint64_t x;      // fog count
  uint64_t y;      // members per fog
  uint64_t c_min;  // x^2 + x*y^2 at the optimum
};

// Minimize x^2 + x*y^2 subject to Z = x(1+y), y >= 4, by divisor
// enumeration (the closed-form optimum is one of the enumerated pairs when
// it is integral). Throws std::domain_error when no divisor pair is
// feasible (Z < 5).
GroupSizes optimal_group_sizes(uint64_t z);

uint64_t analytic_complexity(uint64_t x, uint64_t y);

// alpha_i = l/s_i + m/n_i with s_i the normalized remaining distance.
// Isolated vehicles (n_i = 0) and degenerate s_i get +infinity so they lose
// head selection unless nothing else is available.
double fog_head_parameter(double s_norm, uint64_t n_i, const HeadWeights& w);

// beta_i = a*|v_i - v_bar|/v_bar + b/s_i + c*d_i/S. v_bar = 0 degenerates to
// 0 when v_i = 0 too, else +infinity.
double fog_factor(double v_mps, double v_bar_mps, double s_norm, double dist_m, double range_m,
                  const FogWeights& w);

// The x vehicles with smallest alpha (ties by ascending id), returned in
// ascending id order. n_i is the number of vehicles within range_m.
std::vector<uint32_t> select_fog_heads(std::span<const VehicleSnapshot> all, size_t x,
                                       const HeadWeights& w, double range_m);

struct FogAssignment {
  uint32_t head;
  std::vector<uint32_t> members;
};

struct GroupingPlan {
  uint64_t x = 0;
  uint64_t y = 0;  // member target per fog
  std::vector<FogAssignment> fogs;
  double beta_threshold = 0.0;
  bool threshold_satisfied = false;   // full coverage under the capacity caps
  std::vector<uint32_t> overflow;     // ids force-joined past threshold or cap
};

// Threshold sweep over beta_th in {0.0, 0.1, ..., 1.0}: vehicles join the
// admissible fog of lowest beta; full fogs evict their worst member when
// the newcomer improves on it. The first threshold achieving full coverage
// wins; otherwise the best-coverage plan is kept and leftovers are joined
// to their lowest-beta fog regardless of threshold (flagged in `overflow`).
// During composition each fog's v_bar is seeded with its head's speed.
GroupingPlan compose_fogs(std::span<const VehicleSnapshot> all, std::span<const uint32_t> heads,
                          uint64_t y_target, const FogWeights& w, double range_m);

// Evens a plan out so every fog carries at least min_members: under-filled
// fogs pull the best-fitting member (lowest beta towards their head, ties by
// id) from the currently largest donor fog. Throws std::domain_error when
// the plan has fewer than x * min_members vehicles overall.
GroupingPlan rebalance_min_fill(const GroupingPlan& plan,
                                std::span<const VehicleSnapshot> all, const FogWeights& w,
                                double range_m, uint64_t min_members);

struct RegroupTriggers {
  bool total_changed = false;
  std::vector<uint32_t> heads_changed;   // fogs (by head id) preferring a new head
  std::vector<uint32_t> members_exceed;  // members whose beta rose above the plan threshold
  bool any() const { return total_changed || !heads_changed.empty() || !members_exceed.empty(); }
};

// Evaluated against fresh snapshots: vehicle set change, per-fog head
// optimality (alpha argmin moved), and per-member beta versus the plan's
// threshold (v_bar here is the fog's current mean speed).
RegroupTriggers detect_regroup_triggers(const GroupingPlan& plan,
                                        std::span<const VehicleSnapshot> now, const HeadWeights& hw,
                                        const FogWeights& fw, double range_m);

struct FogMembership {
  uint32_t head;
  std::vector<uint32_t> members;
};

// U = (left + joined) / initial, clamped to 1; U = 1 outright when the head
// changed. Initial count includes the head. Throws when the before-fog is
// empty.
double updated_rate(const FogMembership& before, const FogMembership& after);
double updated_rate_counts(uint64_t initial, uint64_t left, uint64_t joined, bool head_changed);

}  // namespace esia::grouping
