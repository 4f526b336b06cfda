#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <unordered_map>
#include <vector>

namespace esia {

// Uniform-grid index over 2D points. Cell size should match the query
// radius so a radius query touches a bounded neighborhood of cells.
class SpatialIndex {
 public:
  SpatialIndex(double cell_size) : cell_(cell_size > 0 ? cell_size : 1.0) {}

  void insert(uint32_t id, double x, double y) {
    points_.push_back({id, x, y});
    cells_[key(x, y)].push_back(points_.size() - 1);
  }

  // Visit every point with Euclidean distance <= radius of (x, y).
  void for_each_within(double x, double y, double radius,
                       const std::function<void(uint32_t, double)>& fn) const {
    const double r2 = radius * radius;
    const int span = static_cast<int>(std::ceil(radius / cell_));
    const int cx = coord(x), cy = coord(y);
    for (int gx = cx - span; gx <= cx + span; ++gx) {
      for (int gy = cy - span; gy <= cy + span; ++gy) {
        auto it = cells_.find(pack(gx, gy));
        if (it == cells_.end()) continue;
        for (size_t idx : it->second) {
          const auto& p = points_[idx];
          const double dx = p.x - x, dy = p.y - y;
          const double d2 = dx * dx + dy * dy;
          if (d2 <= r2) fn(p.id, std::sqrt(d2));
        }
      }
    }
  }

  // Expanding-ring visitor: invokes fn for every point in the cell ring at
  // Chebyshev distance `ring` from (x, y). Returns false when the ring holds
  // no cells with points and the ring lies entirely outside the populated
  // bounding box (i.e. further rings are empty too).
  bool visit_ring(double x, double y, int ring,
                  const std::function<void(uint32_t, double)>& fn) const {
    const int cx = coord(x), cy = coord(y);
    if (cells_.empty()) return false;
    bool touched_box = false;
    auto visit_cell = [&](int gx, int gy) {
      if (gx >= min_gx_ && gx <= max_gx_ && gy >= min_gy_ && gy <= max_gy_) touched_box = true;
      auto it = cells_.find(pack(gx, gy));
      if (it == cells_.end()) return;
      for (size_t idx : it->second) {
        const auto& p = points_[idx];
        const double dx = p.x - x, dy = p.y - y;
        fn(p.id, std::sqrt(dx * dx + dy * dy));
      }
    };
    if (ring == 0) {
      visit_cell(cx, cy);
      return true;
    }
    for (int gx = cx - ring; gx <= cx + ring; ++gx) {
      visit_cell(gx, cy - ring);
      visit_cell(gx, cy + ring);
    }
    for (int gy = cy - ring + 1; gy <= cy + ring - 1; ++gy) {
      visit_cell(cx - ring, gy);
      visit_cell(cx + ring, gy);
    }
    return touched_box;
  }

  // Smallest possible Euclidean distance from the query point to any point
  // in a cell at Chebyshev ring k (0 for rings 0 and 1).
  double ring_min_distance(int ring) const {
    return ring <= 1 ? 0.0 : (ring - 1) * cell_;
  }

  void finalize() {
    for (const auto& [k, v] : cells_) {
      const int gx = static_cast<int>(static_cast<int32_t>(k >> 32));
      const int gy = static_cast<int>(static_cast<int32_t>(k & 0xFFFFFFFFull));
      min_gx_ = std::min(min_gx_, gx);
      max_gx_ = std::max(max_gx_, gx);
      min_gy_ = std::min(min_gy_, gy);
      max_gy_ = std::max(max_gy_, gy);
    }
  }

  double cell_size() const { return cell_; }

 private:
  struct Pt {
    uint32_t id;
    double x, y;
  };

  int coord(double v) const { return static_cast<int>(std::floor(v / cell_)); }
  static uint64_t pack(int gx, int gy) {
    return (static_cast<uint64_t>(static_cast<uint32_t>(gx)) << 32) |
           static_cast<uint64_t>(static_cast<uint32_t>(gy));
  }
  uint64_t key(double x, double y) const { return pack(coord(x), coord(y)); }

  double cell_;
  std::vector<Pt> points_;
  std::unordered_map<uint64_t, std::vector<size_t>> cells_;
  int min_gx_ = INT32_MAX, max_gx_ = INT32_MIN, min_gy_ = INT32_MAX, max_gy_ = INT32_MIN;
};

}  // namespace esia
