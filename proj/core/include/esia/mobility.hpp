#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "esia/grouping.hpp"

namespace esia::mobility {

// Manhattan-style road network: a grid of vertical and horizontal roads
// spanning the rectangle between the outermost intersections. Vehicles do a
// random walk over the grid, turning at intersections, and shed remaining
// trip distance as they move.
struct WorldConfig {
  double width_m = 2000.0;
  double height_m = 1600.0;
  uint32_t vertical_roads = 5;
  uint32_t horizontal_roads = 5;
  uint32_t lanes = 2;
  double headway_m = 8.0;  // minimum spacing per vehicle used for capacity
  double speed_min_mps = 8.0;
  double speed_max_mps = 22.0;
  double trip_min_m = 200.0;
  double trip_max_m = 2000.0;
  double duration_s = 10.0;
  double dt_s = 1.0;
  uint64_t seed = 1;
};

struct TraceFrame {
  double time_s = 0.0;
  uint32_t vehicle_id = 0;
  double x_m = 0.0;
  double y_m = 0.0;
  double speed_mps = 0.0;
  double remaining_m = 0.0;
  uint32_t road_id = 0;
};

using Trace = std::vector<TraceFrame>;

// Vehicles the network can hold: total road length * lanes / headway.
uint64_t network_capacity(const WorldConfig& cfg);

// Simulates `vehicles` vehicles for cfg.duration_s and returns one frame per
// vehicle per step (steps at 0, dt, 2*dt, ..., duration). Throws
// std::invalid_argument when the config is malformed or the vehicle count
// exceeds network capacity.
Trace generate_world(const WorldConfig& cfg, uint32_t vehicles);

// Distinct frame times in the trace, ascending.
std::vector<double> frame_times(const Trace& trace);

// All frames at the given time as grouping snapshots, ascending vehicle id.
// Throws std::out_of_range when the trace has no frames at that time.
std::vector<grouping::VehicleSnapshot> snapshots_at(const Trace& trace, double time_s);

// Ids of vehicles within range of the given vehicle (excluding itself),
// ascending. Throws std::invalid_argument when the id is absent.
std::vector<uint32_t> neighbors_within(std::span<const grouping::VehicleSnapshot> snaps,
                                       uint32_t vehicle_id, double range_m);

// CSV round trip. The file starts with the exact header
// time_s,vehicle_id,x_m,y_m,speed_mps,remaining_m,road_id
// and carries doubles with six decimals. Loading validates the header, field
// counts, numeric fields, and that frame times never decrease; violations
// raise std::runtime_error naming the offending line.
void save_trace_csv(const Trace& trace, const std::string& path);
Trace load_trace_csv(const std::string& path);

}  // namespace esia::mobility
