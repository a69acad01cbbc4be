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

#include "roundabout/traffic.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace roundabout::traffic
{

std::optional<double> ttc_signed(double d_ego, double d_i, double v_ego_delayed, double v_i)
{
  const double closing = v_ego_delayed - v_i;
  if (closing == 0.0) {
    return std::nullopt;
  }
  return (d_ego - d_i) / closing;
}

std::optional<double> ttc(double d_ego, double d_i, double v_ego_delayed, double v_i)
{
  const auto value = ttc_signed(d_ego, d_i, v_ego_delayed, v_i);
  if (!value || !(*value > 0.0)) {
    return std::nullopt;
  }
  return value;
}

bool in_conflict(std::optional<double> ttc_value, double ttc_threshold)
{
  return ttc_value && *ttc_value > 0.0 && *ttc_value < ttc_threshold;
}

std::vector<AxisEntry> order_on_axis(std::span<const AxisEntry> entries)
{
  std::vector<AxisEntry> out(entries.begin(), entries.end());
  std::sort(out.begin(), out.end(), [](const AxisEntry & a, const AxisEntry & b) {
    if (a.z != b.z) {
      return a.z > b.z;
    }
    return a.id < b.id;
  });
  return out;
}

NeighborPair identify_neighbors(int id, int merge_point, std::span<const AxisEntry> entries)
{
  NeighborPair pair;
  pair.merge_point = merge_point;
  const auto ordered = order_on_axis(entries);
  const auto it =
    std::find_if(ordered.begin(), ordered.end(), [id](const AxisEntry & e) { return e.id == id; });
  if (it == ordered.end()) {
    return pair;
  }
  if (it != ordered.begin()) {
    pair.preceding = std::prev(it)->id;
  }
  if (std::next(it) != ordered.end()) {
    pair.following = std::next(it)->id;
  }
  return pair;
}

ArrivalProcess::ArrivalProcess(ArrivalParams params, int legs, std::uint64_t seed, double dt)
: params_(std::move(params)),
  legs_(legs),
  dt_(dt),
  count_rng_(seed),
  category_rng_(seed ^ 0x9e3779b97f4a7c15ULL),
  exit_rng_(seed ^ 0xc2b2ae3d27d4eb4fULL),
  queues_(static_cast<std::size_t>(legs))
{
  if (static_cast<int>(params_.rates_vph.size()) != legs) {
    throw std::invalid_argument("one arrival rate per entry is required");
  }
  if (!(params_.penetration >= 0.0 && params_.penetration <= 1.0)) {
    throw std::invalid_argument("penetration must lie in [0, 1]");
  }
  if (!(params_.exit_side_vph >= 0.0)) {
    throw std::invalid_argument("arrival rates must be non-negative");
  }
  for (double r : params_.rates_vph) {
    if (!(r >= 0.0)) {
      throw std::invalid_argument("arrival rates must be non-negative");
    }
  }
}

std::vector<Arrival> ArrivalProcess::draw(long tick)
{
  std::vector<Arrival> out;
  for (int entry = 0; entry < legs_; ++entry) {
    const double mean = (params_.rates_vph[entry] + params_.exit_side_vph) * dt_ / 3600.0;
    std::poisson_distribution<int> count(mean);
    const int n = mean > 0.0 ? count(count_rng_) : 0;
    for (int k = 0; k < n; ++k) {
      if (next_id_ >= params_.vehicle_cap) {
        break;
      }
      Arrival a;
      a.id = next_id_++;
      a.entry = entry;
      a.tick = tick;
      std::bernoulli_distribution cav(params_.penetration);
      a.category = cav(category_rng_) ? Category::kCav : Category::kHdv;
      if (legs_ > 1) {
        std::uniform_int_distribution<int> pick(1, legs_ - 1);
        a.exit = (entry + pick(exit_rng_)) % legs_;
      } else {
        a.exit = entry;
      }
      queues_[entry].push_back(a);
      out.push_back(a);
    }
  }
  return out;
}

std::optional<Arrival> ArrivalProcess::release(int entry)
{
  auto & q = queues_.at(entry);
  if (q.empty()) {
    return std::nullopt;
  }
  Arrival a = q.front();
  q.pop_front();
  return a;
}

std::size_t ArrivalProcess::queued() const
{
  std::size_t n = 0;
  for (const auto & q : queues_) {
    n += q.size();
  }
  return n;
}

double release_headroom(double v0, double d_min, double reaction_time, double rho_offset)
{
  return std::max(d_min, reaction_time * v0 + rho_offset);
}

double hdv_accel(
  double v, const std::optional<LeaderInfo> & leader, const HdvParams & params,
  const DynamicsLimits & limits)
{
  double a = std::min(limits.a_max, params.gain * (params.cruise_speed - v));
  if (leader) {
    // IDM-style interaction term; the free-road part is the cruise law above.
    const double desired = params.standstill + params.reaction_time * v +
                           v * (v - leader->speed) / (2.0 * std::sqrt(limits.a_max * params.comfort_decel));
    const double gap = std::max(leader->gap, 0.1);
    const double ratio = std::max(desired, 0.0) / gap;
    a = std::min(a, limits.a_max * (1.0 - ratio * ratio));
  }
  return std::clamp(a, -limits.a_max, limits.a_max);
}

double path_steer(
  const VehicleState & state, const geometry::Route & route, double route_s, double heading_gain,
  double lateral_gain, const DynamicsLimits & limits)
{
  const geometry::PathPoint p = route.at(route_s);
  const double dx = state.x - p.x;
  const double dy = state.y - p.y;
  // Positive when the vehicle sits left of the path.
  const double lateral = -std::sin(p.heading) * dx + std::cos(p.heading) * dy;
  const double heading_err = geometry::normalize_angle(p.heading - state.theta);
  const double steer = std::atan(state.wheelbase * p.curvature) + heading_gain * heading_err -
                       std::atan(lateral_gain * lateral / (std::abs(state.v) + 1.0));
  return std::clamp(steer, -limits.steer_max, limits.steer_max);
}

ControlInput hdv_step(
  const VehicleState & state, const geometry::Route & route, const std::optional<LeaderInfo> & leader,
  const HdvParams & params, const DynamicsLimits & limits, long tick)
{
  ControlInput u;
  u.accel = hdv_accel(state.v, leader, params, limits);
  u.steer = path_steer(state, route, state.path_s, params.heading_gain, params.lateral_gain, limits);
  u.issued_at = tick;
  return u;
}

}  // namespace roundabout::traffic
