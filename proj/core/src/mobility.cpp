#include "esia/mobility.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "esia/rng.hpp"
#include "esia/spatial.hpp"

namespace esia::mobility {

namespace {

constexpr const char* kCsvHeader = "time_s,vehicle_id,x_m,y_m,speed_mps,remaining_m,road_id";
constexpr double kEps = 1e-9;
constexpr double kJitterMps = 1.5;

struct RoadGrid {
  std::vector<double> xs;  // vertical road x positions, ascending
  std::vector<double> ys;  // horizontal road y positions, ascending

  size_t verticals() const { return xs.size(); }
  bool is_vertical(uint32_t road) const { return road < xs.size(); }
  double total_length() const {
    return xs.size() * (ys.back() - ys.front()) + ys.size() * (xs.back() - xs.front());
  }
  double road_length(uint32_t road) const {
    return is_vertical(road) ? ys.back() - ys.front() : xs.back() - xs.front();
  }
  double road_start(uint32_t road) const { return is_vertical(road) ? ys.front() : xs.front(); }
  // cross-street coordinates along the given road's axis
  const std::vector<double>& crossings(uint32_t road) const { return is_vertical(road) ? ys : xs; }

  std::pair<double, double> position(uint32_t road, double pos) const {
    if (is_vertical(road)) return {xs[road], pos};
    return {pos, ys[road - xs.size()]};
  }
};

RoadGrid make_grid(const WorldConfig& cfg) {
  if (cfg.width_m <= 0 || cfg.height_m <= 0)
    throw std::invalid_argument("generate_world: non-positive world dimensions");
  if (cfg.vertical_roads < 2 || cfg.horizontal_roads < 2)
    throw std::invalid_argument("generate_world: need at least two roads per direction");
  if (cfg.lanes == 0 || cfg.headway_m <= 0)
    throw std::invalid_argument("generate_world: bad capacity parameters");
  if (cfg.speed_min_mps <= 0 || cfg.speed_max_mps < cfg.speed_min_mps)
    throw std::invalid_argument("generate_world: bad speed range");
  if (cfg.trip_min_m <= 0 || cfg.trip_max_m < cfg.trip_min_m)
    throw std::invalid_argument("generate_world: bad trip range");
  if (cfg.dt_s <= 0 || cfg.duration_s < 0)
    throw std::invalid_argument("generate_world: bad time parameters");
  RoadGrid g;
  for (uint32_t k = 0; k < cfg.vertical_roads; ++k)
    g.xs.push_back(cfg.width_m * (k + 1) / (cfg.vertical_roads + 1));
  for (uint32_t j = 0; j < cfg.horizontal_roads; ++j)
    g.ys.push_back(cfg.height_m * (j + 1) / (cfg.horizontal_roads + 1));
  return g;
}

struct Walker {
  uint32_t road = 0;
  double pos = 0.0;  // coordinate along the road axis
  int dir = 1;
  double base_speed = 0.0;
  double remaining = 0.0;
};

// Next intersection strictly ahead, or NaN at a terminal end.
double next_crossing(const RoadGrid& g, const Walker& w) {
  const auto& cs = g.crossings(w.road);
  if (w.dir > 0) {
    auto it = std::upper_bound(cs.begin(), cs.end(), w.pos + kEps);
    return it == cs.end() ? std::nan("") : *it;
  }
  auto it = std::lower_bound(cs.begin(), cs.end(), w.pos - kEps);
  return it == cs.begin() ? std::nan("") : *std::prev(it);
}

void turn_at_intersection(const RoadGrid& g, Walker& w, DetRng& rng) {
  const auto& cs = g.crossings(w.road);
  const size_t cross = std::lower_bound(cs.begin(), cs.end(), w.pos - kEps) - cs.begin();
  size_t k, j;  // vertical index, horizontal index of the intersection
  if (g.is_vertical(w.road)) {
    k = w.road;
    j = cross;
  } else {
    k = cross;
    j = w.road - g.verticals();
  }
  struct Edge {
    uint32_t road;
    int dir;
  };
  std::vector<Edge> edges;
  const uint32_t vroad = static_cast<uint32_t>(k);
  const uint32_t hroad = static_cast<uint32_t>(g.verticals() + j);
  if (j + 1 < g.ys.size()) edges.push_back({vroad, 1});
  if (j > 0) edges.push_back({vroad, -1});
  if (k + 1 < g.xs.size()) edges.push_back({hroad, 1});
  if (k > 0) edges.push_back({hroad, -1});
  const Edge back{w.road, -w.dir};
  std::erase_if(edges, [&](const Edge& e) { return e.road == back.road && e.dir == back.dir; });
  if (edges.empty()) {  // dead end, only reachable on degenerate grids
    w.dir = -w.dir;
    return;
  }
  const Edge pick = edges[rng.next_below(edges.size())];
  if (pick.road != w.road) {
    const auto [x, y] = g.position(w.road, w.pos);
    w.pos = g.is_vertical(pick.road) ? y : x;
    w.road = pick.road;
  }
  w.dir = pick.dir;
}

void advance(const RoadGrid& g, Walker& w, double distance, DetRng& rng) {
  double move = distance;
  while (move > kEps) {
    const double next = next_crossing(g, w);
    if (std::isnan(next)) {  // pointed off the end of the road; bounce
      w.dir = -w.dir;
      continue;
    }
    const double gap = (next - w.pos) * w.dir;
    if (gap > move) {
      w.pos += w.dir * move;
      break;
    }
    w.pos = next;
    move -= gap;
    turn_at_intersection(g, w, rng);
  }
  w.remaining = std::max(0.0, w.remaining - distance);
}

double parse_double(const std::string& s, size_t line) {
  try {
    size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument("trailing junk");
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("trace csv line " + std::to_string(line) + ": bad numeric field '" +
                             s + "'");
  }
}

uint32_t parse_u32(const std::string& s, size_t line) {
  try {
    size_t used = 0;
    const unsigned long v = std::stoul(s, &used);
    if (used != s.size() || v > UINT32_MAX) throw std::invalid_argument("out of range");
    return static_cast<uint32_t>(v);
  } catch (const std::exception&) {
    throw std::runtime_error("trace csv line " + std::to_string(line) + ": bad integer field '" +
                             s + "'");
  }
}

}  // namespace

uint64_t network_capacity(const WorldConfig& cfg) {
  const RoadGrid g = make_grid(cfg);
  return static_cast<uint64_t>(g.total_length() * cfg.lanes / cfg.headway_m);
}

Trace generate_world(const WorldConfig& cfg, uint32_t vehicles) {
  const RoadGrid g = make_grid(cfg);
  const uint64_t cap = static_cast<uint64_t>(g.total_length() * cfg.lanes / cfg.headway_m);
  if (vehicles > cap)
    throw std::invalid_argument("generate_world: " + std::to_string(vehicles) +
                                " vehicles exceed network capacity " + std::to_string(cap));

  const uint32_t roads = static_cast<uint32_t>(g.xs.size() + g.ys.size());
  std::vector<Walker> walkers(vehicles);
  std::vector<DetRng> rngs;
  rngs.reserve(vehicles);
  for (uint32_t id = 0; id < vehicles; ++id) {
    DetRng rng = DetRng::derive(cfg.seed, id);
    Walker w;
    double offset = rng.next_unit() * g.total_length();
    w.road = roads - 1;
    for (uint32_t r = 0; r < roads; ++r) {
      if (offset < g.road_length(r) || r == roads - 1) {
        w.road = r;
        break;
      }
      offset -= g.road_length(r);
    }
    w.pos = g.road_start(w.road) + std::min(offset, g.road_length(w.road) - kEps);
    w.dir = rng.bernoulli(0.5) ? 1 : -1;
    w.base_speed = rng.uniform(cfg.speed_min_mps, cfg.speed_max_mps);
    w.remaining = rng.uniform(cfg.trip_min_m, cfg.trip_max_m);
    walkers[id] = w;
    rngs.push_back(rng);
  }

  const uint64_t steps = static_cast<uint64_t>(cfg.duration_s / cfg.dt_s + kEps);
  Trace trace;
  trace.reserve((steps + 1) * vehicles);
  for (uint64_t k = 0; k <= steps; ++k) {
    const double t = k * cfg.dt_s;
    for (uint32_t id = 0; id < vehicles; ++id) {
      Walker& w = walkers[id];
      DetRng& rng = rngs[id];
      const double jitter = rng.uniform(-kJitterMps, kJitterMps);
      const double speed =
          std::clamp(w.base_speed + jitter, cfg.speed_min_mps, cfg.speed_max_mps);
      const auto [x, y] = g.position(w.road, w.pos);
      trace.push_back({t, id, x, y, speed, w.remaining, w.road});
      advance(g, w, speed * cfg.dt_s, rng);
    }
  }
  return trace;
}

std::vector<double> frame_times(const Trace& trace) {
  std::vector<double> times;
  for (const auto& f : trace)
    if (times.empty() || std::abs(f.time_s - times.back()) > 1e-6) times.push_back(f.time_s);
  std::sort(times.begin(), times.end());
  times.erase(std::unique(times.begin(), times.end(),
                          [](double a, double b) { return std::abs(a - b) <= 1e-6; }),
              times.end());
  return times;
}

std::vector<grouping::VehicleSnapshot> snapshots_at(const Trace& trace, double time_s) {
  std::vector<grouping::VehicleSnapshot> out;
  for (const auto& f : trace) {
    if (std::abs(f.time_s - time_s) > 1e-6) continue;
    out.push_back({f.vehicle_id, f.x_m, f.y_m, f.speed_mps, f.remaining_m, f.road_id});
  }
  if (out.empty()) throw std::out_of_range("snapshots_at: no frames at requested time");
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.id < b.id; });
  return out;
}

std::vector<uint32_t> neighbors_within(std::span<const grouping::VehicleSnapshot> snaps,
                                       uint32_t vehicle_id, double range_m) {
  const grouping::VehicleSnapshot* self = nullptr;
  for (const auto& s : snaps)
    if (s.id == vehicle_id) self = &s;
  if (!self) throw std::invalid_argument("neighbors_within: unknown vehicle id");
  SpatialIndex grid(range_m);
  for (const auto& s : snaps) grid.insert(s.id, s.x_m, s.y_m);
  std::vector<uint32_t> out;
  grid.for_each_within(self->x_m, self->y_m, range_m, [&](uint32_t id, double) {
    if (id != vehicle_id) out.push_back(id);
  });
  std::sort(out.begin(), out.end());
  return out;
}

void save_trace_csv(const Trace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_trace_csv: cannot open " + path);
  out << kCsvHeader << '\n';
  char buf[256];
  for (const auto& f : trace) {
    std::snprintf(buf, sizeof(buf), "%.6f,%u,%.6f,%.6f,%.6f,%.6f,%u", f.time_s, f.vehicle_id,
                  f.x_m, f.y_m, f.speed_mps, f.remaining_m, f.road_id);
    out << buf << '\n';
  }
  if (!out) throw std::runtime_error("save_trace_csv: write failed for " + path);
}

Trace load_trace_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_trace_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line))
    throw std::runtime_error("trace csv line 1: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != kCsvHeader)
    throw std::runtime_error("trace csv line 1: bad header '" + line + "'");
  Trace trace;
  size_t lineno = 1;
  double prev_time = -1.0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 7)
      throw std::runtime_error("trace csv line " + std::to_string(lineno) + ": expected 7 fields, got " +
                               std::to_string(fields.size()));
    TraceFrame f;
    f.time_s = parse_double(fields[0], lineno);
    f.vehicle_id = parse_u32(fields[1], lineno);
    f.x_m = parse_double(fields[2], lineno);
    f.y_m = parse_double(fields[3], lineno);
    f.speed_mps = parse_double(fields[4], lineno);
    f.remaining_m = parse_double(fields[5], lineno);
    f.road_id = parse_u32(fields[6], lineno);
    if (f.time_s < prev_time - 1e-9)
      throw std::runtime_error("trace csv line " + std::to_string(lineno) +
                               ": frame time decreases");
    prev_time = f.time_s;
    trace.push_back(f);
  }
  return trace;
}

}  // namespace esia::mobility
