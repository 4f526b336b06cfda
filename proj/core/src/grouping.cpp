#include "esia/grouping.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <stdexcept>
#include <unordered_map>
#include <unordered_set>

#include "esia/spatial.hpp"

namespace esia::grouping {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double max_remaining(std::span<const VehicleSnapshot> all) {
  double mx = 0.0;
  for (const auto& v : all) mx = std::max(mx, v.remaining_m);
  return mx;
}

std::unordered_map<uint32_t, size_t> index_by_id(std::span<const VehicleSnapshot> all) {
  std::unordered_map<uint32_t, size_t> out;
  out.reserve(all.size());
  for (size_t i = 0; i < all.size(); ++i) {
    if (!out.emplace(all[i].id, i).second)
      throw std::invalid_argument("duplicate vehicle id in snapshot set");
  }
  return out;
}

}  // namespace

FogWeights weight_scheme(int scheme) {
  switch (scheme) {
    case 1: return {0.5, 0.3, 0.2};
    case 2: return {0.5, 0.2, 0.3};
    case 3: return {0.3, 0.5, 0.2};
    case 4: return {0.3, 0.2, 0.5};
    case 5: return {0.4, 0.3, 0.3};
    case 6: return {0.3, 0.4, 0.3};
    case 7: return {0.3, 0.3, 0.4};
    default: throw std::invalid_argument("weight_scheme: scheme must be 1..7");
  }
}

GroupSizes optimal_group_sizes(uint64_t z) {
  GroupSizes best{0, 0, 0};
  bool found = false;
  auto consider = [&](uint64_t d) {
    // d = 1 + y divides z
    if (d < 5) return;
    const uint64_t x = z / d;
    const uint64_t y = d - 1;
    const uint64_t c = analytic_complexity(x, y);
    if (!found || c < best.c_min || (c == best.c_min && x < best.x)) {
      best = {x, y, c};
      found = true;
    }
  };
  for (uint64_t i = 1; i * i <= z; ++i) {
    if (z % i != 0) continue;
    consider(i);
    consider(z / i);
  }
  if (!found) throw std::domain_error("optimal_group_sizes: no feasible (x, y) with y >= 4");
  return best;
}

uint64_t analytic_complexity(uint64_t x, uint64_t y) { return x * x + x * y * y; }

double fog_head_parameter(double s_norm, uint64_t n_i, const HeadWeights& w) {
  if (n_i == 0 || s_norm <= 0.0) return kInf;
  return w.l / s_norm + w.m / static_cast<double>(n_i);
}

double fog_factor(double v_mps, double v_bar_mps, double s_norm, double dist_m, double range_m,
                  const FogWeights& w) {
  if (range_m <= 0.0) throw std::invalid_argument("fog_factor: non-positive range");
  double speed_term;
  if (v_bar_mps == 0.0) {
    if (v_mps != 0.0) return kInf;
    speed_term = 0.0;
  } else {
    speed_term = w.a * std::abs(v_mps - v_bar_mps) / v_bar_mps;
  }
  if (s_norm <= 0.0) return kInf;
  return speed_term + w.b / s_norm + w.c * dist_m / range_m;
}

std::vector<uint32_t> select_fog_heads(std::span<const VehicleSnapshot> all, size_t x,
                                       const HeadWeights& w, double range_m) {
  if (x == 0 || all.size() < x)
    throw std::invalid_argument("select_fog_heads: need at least x vehicles");
  SpatialIndex grid(range_m);
  for (const auto& v : all) grid.insert(v.id, v.x_m, v.y_m);
  const double mx = max_remaining(all);
  std::vector<std::pair<double, uint32_t>> scored;
  scored.reserve(all.size());
  for (const auto& v : all) {
    size_t n_i = 0;
    grid.for_each_within(v.x_m, v.y_m, range_m, [&](uint32_t id, double) {
      if (id != v.id) ++n_i;
    });
    scored.emplace_back(fog_head_parameter(v.remaining_m / mx, n_i, w), v.id);
  }
  std::sort(scored.begin(), scored.end());
  std::vector<uint32_t> heads;
  heads.reserve(x);
  for (size_t i = 0; i < x; ++i) heads.push_back(scored[i].second);
  std::sort(heads.begin(), heads.end());
  return heads;
}

namespace {

struct Candidate {
  double beta;
  uint32_t fog;  // index into heads
};

struct ComposeContext {
  std::span<const VehicleSnapshot> all;
  std::vector<size_t> head_idx;           // snapshot index per fog
  std::vector<size_t> ov_idx;             // snapshot indices of non-heads
  std::vector<std::vector<Candidate>> candidates;  // per OV, beta ascending, beta < 1
  const FogWeights* w;
  double range;
  double max_rem;
};

double beta_for(const ComposeContext& ctx, const VehicleSnapshot& v, size_t fog) {
  const auto& h = ctx.all[ctx.head_idx[fog]];
  const double dx = v.x_m - h.x_m, dy = v.y_m - h.y_m;
  return fog_factor(v.speed_mps, h.speed_mps, v.remaining_m / ctx.max_rem,
                    std::sqrt(dx * dx + dy * dy), ctx.range, *ctx.w);
}

// All fogs with beta < cutoff, ascending (beta, fog). Expanding-ring search
// over head cells with the distance lower bound beta >= b/s + c*d/S pruning
// the tail; c = 0 degrades to a full scan.
std::vector<Candidate> collect_candidates(const ComposeContext& ctx, const SpatialIndex& heads_grid,
                                          const std::unordered_map<uint32_t, uint32_t>& fog_of_head,
                                          const VehicleSnapshot& v, double cutoff) {
  std::vector<Candidate> out;
  const double fixed = ctx.w->b / (v.remaining_m / ctx.max_rem);
  if (fixed >= cutoff) return out;
  for (int ring = 0;; ++ring) {
    if (ctx.w->c > 0.0) {
      const double min_beta = fixed + ctx.w->c * heads_grid.ring_min_distance(ring) / ctx.range;
      if (min_beta >= cutoff) break;
    }
    const bool in_box = heads_grid.visit_ring(v.x_m, v.y_m, ring, [&](uint32_t head_id, double) {
      const uint32_t fog = fog_of_head.at(head_id);
      const double beta = beta_for(ctx, v, fog);
      if (beta < cutoff) out.push_back({beta, fog});
    });
    if (!in_box && ring > 0) break;
  }
  std::sort(out.begin(), out.end(), [](const Candidate& a, const Candidate& b) {
    return a.beta != b.beta ? a.beta < b.beta : a.fog < b.fog;
  });
  return out;
}

struct Assignment {
  // per fog: member slots as (beta, ov index into ctx.ov_idx)
  std::vector<std::vector<std::pair<double, size_t>>> fogs;
  std::vector<size_t> unassigned;  // indices into ctx.ov_idx
  size_t assigned_count = 0;
};

Assignment try_compose(const ComposeContext& ctx, double beta_th, uint64_t cap) {
  Assignment as;
  as.fogs.resize(ctx.head_idx.size());
  std::deque<size_t> queue;
  for (size_t i = 0; i < ctx.ov_idx.size(); ++i) queue.push_back(i);
  size_t guard = 64 + 16 * ctx.ov_idx.size() * (1 + ctx.head_idx.size());
  while (!queue.empty()) {
    if (guard-- == 0) throw std::logic_error("compose_fogs: eviction loop guard tripped");
    const size_t ov = queue.front();
    queue.pop_front();
    bool placed = false;
    for (const Candidate& cand : ctx.candidates[ov]) {
      if (cand.beta >= beta_th) break;
      auto& fog = as.fogs[cand.fog];
      if (fog.size() < cap) {
        fog.emplace_back(cand.beta, ov);
        placed = true;
        break;
      }
      // full: evict the worst member if the newcomer improves on it
      auto worst = std::max_element(fog.begin(), fog.end(),
                                    [&](const auto& a, const auto& b) {
                                      if (a.first != b.first) return a.first < b.first;
                                      return ctx.all[ctx.ov_idx[a.second]].id <
                                             ctx.all[ctx.ov_idx[b.second]].id;
                                    });
      if (worst->first > cand.beta) {
        queue.push_back(worst->second);
        *worst = {cand.beta, ov};
        placed = true;
        break;
      }
    }
    if (!placed) as.unassigned.push_back(ov);
  }
  as.assigned_count = ctx.ov_idx.size() - as.unassigned.size();
  return as;
}

}  // namespace

GroupingPlan compose_fogs(std::span<const VehicleSnapshot> all, std::span<const uint32_t> heads,
                          uint64_t y_target, const FogWeights& w, double range_m) {
  if (heads.empty()) throw std::invalid_argument("compose_fogs: no fog heads");
  if (y_target < 4) throw std::invalid_argument("compose_fogs: member target below 4");
  if (range_m <= 0.0) throw std::invalid_argument("compose_fogs: non-positive range");

  ComposeContext ctx;
  ctx.all = all;
  ctx.w = &w;
  ctx.range = range_m;
  ctx.max_rem = max_remaining(all);
  auto by_id = index_by_id(all);

  std::unordered_map<uint32_t, uint32_t> fog_of_head;
  std::unordered_set<uint32_t> head_set;
  for (size_t f = 0; f < heads.size(); ++f) {
    auto it = by_id.find(heads[f]);
    if (it == by_id.end()) throw std::invalid_argument("compose_fogs: head id not in snapshots");
    ctx.head_idx.push_back(it->second);
    fog_of_head.emplace(heads[f], static_cast<uint32_t>(f));
    head_set.insert(heads[f]);
  }
  for (size_t i = 0; i < all.size(); ++i)
    if (!head_set.count(all[i].id)) ctx.ov_idx.push_back(i);
  std::sort(ctx.ov_idx.begin(), ctx.ov_idx.end(),
            [&](size_t a, size_t b) { return all[a].id < all[b].id; });

  SpatialIndex heads_grid(range_m);
  for (size_t f = 0; f < heads.size(); ++f) {
    const auto& h = all[ctx.head_idx[f]];
    heads_grid.insert(h.id, h.x_m, h.y_m);
  }
  heads_grid.finalize();

  ctx.candidates.resize(ctx.ov_idx.size());
  for (size_t i = 0; i < ctx.ov_idx.size(); ++i)
    ctx.candidates[i] = collect_candidates(ctx, heads_grid, fog_of_head, all[ctx.ov_idx[i]], 1.0);

  Assignment best;
  double best_th = 0.0;
  bool satisfied = false;
  bool have_best = false;
  for (int k = 0; k <= 10; ++k) {
    const double th = static_cast<double>(k) / 10.0;
    Assignment as = try_compose(ctx, th, y_target);
    if (!have_best || as.assigned_count > best.assigned_count) {
      best = std::move(as);
      best_th = th;
      have_best = true;
    }
    if (best.assigned_count == ctx.ov_idx.size()) {
      best_th = th;
      satisfied = true;
      break;
    }
  }

  GroupingPlan plan;
  plan.x = heads.size();
  plan.y = y_target;
  plan.beta_threshold = best_th;
  plan.threshold_satisfied = satisfied;
  plan.fogs.resize(heads.size());
  for (size_t f = 0; f < heads.size(); ++f) plan.fogs[f].head = heads[f];
  for (size_t f = 0; f < heads.size(); ++f) {
    auto& slots = best.fogs[f];
    std::sort(slots.begin(), slots.end(), [&](const auto& a, const auto& b) {
      return ctx.all[ctx.ov_idx[a.second]].id < ctx.all[ctx.ov_idx[b.second]].id;
    });
    for (const auto& [beta, ov] : slots) plan.fogs[f].members.push_back(all[ctx.ov_idx[ov]].id);
  }

  // leftovers join their lowest-beta fog past threshold and capacity
  std::sort(best.unassigned.begin(), best.unassigned.end(),
            [&](size_t a, size_t b) { return all[ctx.ov_idx[a]].id < all[ctx.ov_idx[b]].id; });
  for (size_t ov : best.unassigned) {
    const auto& v = all[ctx.ov_idx[ov]];
    double best_beta = kInf;
    uint32_t best_fog = 0;
    for (int ring = 0;; ++ring) {
      if (ctx.w->c > 0.0 && best_beta < kInf) {
        const double lower = ctx.w->c * heads_grid.ring_min_distance(ring) / ctx.range;
        if (lower >= best_beta) break;
      }
      const bool in_box = heads_grid.visit_ring(v.x_m, v.y_m, ring, [&](uint32_t head_id, double) {
        const uint32_t fog = fog_of_head.at(head_id);
        const double beta = beta_for(ctx, v, fog);
        if (beta < best_beta || (beta == best_beta && fog < best_fog)) {
          best_beta = beta;
          best_fog = fog;
        }
      });
      if (!in_box && ring > 0) break;
    }
    auto& members = plan.fogs[best_fog].members;
    members.insert(std::upper_bound(members.begin(), members.end(), v.id), v.id);
    plan.overflow.push_back(v.id);
  }
  return plan;
}

GroupingPlan rebalance_min_fill(const GroupingPlan& plan, std::span<const VehicleSnapshot> all,
                                const FogWeights& w, double range_m, uint64_t min_members) {
  GroupingPlan out = plan;
  uint64_t total = 0;
  for (const auto& fog : out.fogs) total += fog.members.size();
  if (total < min_members * out.fogs.size())
    throw std::domain_error("rebalance_min_fill: too few vehicles to fill every fog");

  auto by_id = index_by_id(all);
  const double max_rem = max_remaining(all);
  auto beta_towards = [&](uint32_t member_id, uint32_t head_id) {
    const auto& v = all[by_id.at(member_id)];
    const auto& h = all[by_id.at(head_id)];
    const double dx = v.x_m - h.x_m, dy = v.y_m - h.y_m;
    return fog_factor(v.speed_mps, h.speed_mps, v.remaining_m / max_rem,
                      std::sqrt(dx * dx + dy * dy), range_m, w);
  };

  for (;;) {
    size_t needy = out.fogs.size();
    for (size_t f = 0; f < out.fogs.size(); ++f) {
      if (out.fogs[f].members.size() < min_members) {
        needy = f;
        break;
      }
    }
    if (needy == out.fogs.size()) break;
    size_t donor = out.fogs.size();
    for (size_t f = 0; f < out.fogs.size(); ++f) {
      if (out.fogs[f].members.size() <= min_members) continue;
      if (donor == out.fogs.size() ||
          out.fogs[f].members.size() > out.fogs[donor].members.size())
        donor = f;
    }
    auto& pool = out.fogs[donor].members;
    uint32_t pick = pool.front();
    double best = beta_towards(pick, out.fogs[needy].head);
    for (uint32_t id : pool) {
      const double b = beta_towards(id, out.fogs[needy].head);
      if (b < best || (b == best && id < pick)) {
        best = b;
        pick = id;
      }
    }
    pool.erase(std::find(pool.begin(), pool.end(), pick));
    auto& dst = out.fogs[needy].members;
    dst.insert(std::upper_bound(dst.begin(), dst.end(), pick), pick);
  }
  return out;
}

RegroupTriggers detect_regroup_triggers(const GroupingPlan& plan,
                                        std::span<const VehicleSnapshot> now, const HeadWeights& hw,
                                        const FogWeights& fw, double range_m) {
  RegroupTriggers out;
  auto by_id = index_by_id(now);

  std::unordered_set<uint32_t> plan_ids;
  for (const auto& fog : plan.fogs) {
    plan_ids.insert(fog.head);
    plan_ids.insert(fog.members.begin(), fog.members.end());
  }
  if (plan_ids.size() != now.size()) {
    out.total_changed = true;
  } else {
    for (const auto& v : now)
      if (!plan_ids.count(v.id)) {
        out.total_changed = true;
        break;
      }
  }

  SpatialIndex grid(range_m);
  for (const auto& v : now) grid.insert(v.id, v.x_m, v.y_m);
  const double mx = max_remaining(now);

  auto alpha_of = [&](const VehicleSnapshot& v) {
    size_t n_i = 0;
    grid.for_each_within(v.x_m, v.y_m, range_m, [&](uint32_t id, double) {
      if (id != v.id) ++n_i;
    });
    return fog_head_parameter(v.remaining_m / mx, n_i, hw);
  };

  for (const auto& fog : plan.fogs) {
    auto head_it = by_id.find(fog.head);
    if (head_it == by_id.end()) continue;  // covered by total_changed
    const auto& head = now[head_it->second];

    double best_alpha = alpha_of(head);
    uint32_t best_id = fog.head;
    double speed_sum = head.speed_mps;
    size_t present = 1;
    std::vector<size_t> member_rows;
    for (uint32_t mid : fog.members) {
      auto it = by_id.find(mid);
      if (it == by_id.end()) continue;
      member_rows.push_back(it->second);
      speed_sum += now[it->second].speed_mps;
      ++present;
      const double a = alpha_of(now[it->second]);
      if (a < best_alpha || (a == best_alpha && mid < best_id)) {
        best_alpha = a;
        best_id = mid;
      }
    }
    if (best_id != fog.head) out.heads_changed.push_back(fog.head);

    const double v_bar = speed_sum / static_cast<double>(present);
    for (size_t row : member_rows) {
      const auto& v = now[row];
      const double dx = v.x_m - head.x_m, dy = v.y_m - head.y_m;
      const double beta = fog_factor(v.speed_mps, v_bar, v.remaining_m / mx,
                                     std::sqrt(dx * dx + dy * dy), range_m, fw);
      if (beta > plan.beta_threshold) out.members_exceed.push_back(v.id);
    }
  }
  return out;
}

double updated_rate_counts(uint64_t initial, uint64_t left, uint64_t joined, bool head_changed) {
  if (initial == 0) throw std::domain_error("updated_rate: empty fog");
  if (head_changed) return 1.0;
  const double u = static_cast<double>(left + joined) / static_cast<double>(initial);
  return u > 1.0 ? 1.0 : u;
}

double updated_rate(const FogMembership& before, const FogMembership& after) {
  std::unordered_set<uint32_t> b(before.members.begin(), before.members.end());
  std::unordered_set<uint32_t> a(after.members.begin(), after.members.end());
  uint64_t left = 0, joined = 0;
  for (uint32_t id : b)
    if (!a.count(id)) ++left;
  for (uint32_t id : a)
    if (!b.count(id)) ++joined;
  return updated_rate_counts(1 + b.size(), left, joined, before.head != after.head);
}

}  // namespace esia::grouping
