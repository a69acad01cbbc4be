// Copyright 2026 The Roundabout Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ROUNDABOUT__TRAFFIC_HPP_
#define ROUNDABOUT__TRAFFIC_HPP_

#include "roundabout/dynamics.hpp"
#include "roundabout/geometry.hpp"

#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <span>
#include <vector>

namespace roundabout::traffic
{

/// Signed time-to-collision; nullopt when the closing speed is exactly zero.
std::optional<double> ttc_signed(double d_ego, double d_i, double v_ego_delayed, double v_i);

/// Time-to-collision; nullopt ("no closing") when the value is non-positive or undefined.
std::optional<double> ttc(double d_ego, double d_i, double v_ego_delayed, double v_i);

bool in_conflict(std::optional<double> ttc_value, double ttc_threshold);

struct AxisEntry
{
  int id = 0;
  double z = 0.0;
};

struct NeighborPair
{
  std::optional<int> preceding;
  std::optional<int> following;
  int merge_point = 0;
};

/// Orders by descending z, lower id first on ties. The front of the result leads.
std::vector<AxisEntry> order_on_axis(std::span<const AxisEntry> entries);

NeighborPair identify_neighbors(int id, int merge_point, std::span<const AxisEntry> entries);

struct ArrivalParams
{
  std::vector<double> rates_vph{396.0, 396.0, 396.0};  // one per entry
  double exit_side_vph = 0.0;  // extra inflow per leg from the exit-side node
  double penetration = 0.6;
  double initial_speed = 10.0;
  int vehicle_cap = 200;  // arrivals stop once this many vehicles were generated
};

struct Arrival
{
  int id = 0;
  int entry = 0;
  int exit = 0;
  Category category = Category::kCav;
  long tick = 0;
};

/// Poisson arrivals per entry, category and exit draws, and one FIFO queue per entry.
///
/// Counts, categories and exits come from three separate streams, so changing the
/// penetration never shifts arrival times or routes.
class ArrivalProcess
{
public:
  ArrivalProcess(ArrivalParams params, int legs, std::uint64_t seed, double dt);

  /// Draws this tick's arrivals and appends them to the entry queues.
  std::vector<Arrival> draw(long tick);
  /// Pops the head of an entry queue.
  std::optional<Arrival> release(int entry);
  const std::deque<Arrival> & queue(int entry) const { return queues_.at(entry); }
  std::size_t queued() const;
  int generated() const { return next_id_; }
  const ArrivalParams & params() const { return params_; }

private:
  ArrivalParams params_;
  int legs_;
  double dt_;
  std::mt19937_64 count_rng_;
  std::mt19937_64 category_rng_;
  std::mt19937_64 exit_rng_;
  std::vector<std::deque<Arrival>> queues_;
  int next_id_ = 0;
};

/// Minimum free ramp length needed before releasing a queued vehicle at speed v0.
double release_headroom(double v0, double d_min, double reaction_time, double rho_offset);

struct HdvParams
{
  double cruise_speed = 15.0;
  double gain = 1.0;           // 1/s
  double comfort_decel = 3.0;  // m/s^2
  double reaction_time = 1.8;  // s
  double standstill = 6.5;     // m, center to center
  double heading_gain = 1.5;
  double lateral_gain = 0.5;
};

struct LeaderInfo
{
  double gap = 0.0;  // center-to-center, along the follower's route, m
  double speed = 0.0;
};

/// Longitudinal command: gain-limited cruise toward the setpoint, overridden by a
/// car-following brake when a leader is too close.
double hdv_accel(
  double v, const std::optional<LeaderInfo> & leader, const HdvParams & params,
  const DynamicsLimits & limits);

/// Path-following steer: curvature feed-forward plus heading and lateral feedback.
double path_steer(
  const VehicleState & state, const geometry::Route & route, double route_s, double heading_gain,
  double lateral_gain, const DynamicsLimits & limits);

ControlInput hdv_step(
  const VehicleState & state, const geometry::Route & route, const std::optional<LeaderInfo> & leader,
  const HdvParams & params, const DynamicsLimits & limits, long tick);

}  // namespace roundabout::traffic

#endif  // ROUNDABOUT__TRAFFIC_HPP_
