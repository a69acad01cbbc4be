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

#ifndef ROUNDABOUT__GEOMETRY_HPP_
#define ROUNDABOUT__GEOMETRY_HPP_

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace roundabout::geometry
{

class DomainError : public std::domain_error
{
public:
  using std::domain_error::domain_error;
};

/// Raised when a position is queried against a merge point its route never reaches.
class NotApplicableError : public std::logic_error
{
public:
  using std::logic_error::logic_error;
};

struct Point
{
  double x = 0.0;
  double y = 0.0;
};

struct Pose
{
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
};

struct RampDescriptor
{
  double anchor_angle = 0.0;  // rad, position of the ramp/ring junction on the ring
  double length = 0.0;        // m
};

struct MergePoint
{
  int id = 0;
  double arc = 0.0;  // ring arc coordinate of the junction, m
};

struct LayoutParams
{
  Point center{};
  double ring_radius = 30.0;
  double lane_width = 4.0;
  double ramp_length = 60.0;
  double exit_ramp_length = 60.0;
  int legs = 3;
  double first_leg_angle = 0.0;
  // Each exit diverges this far (arc length) upstream of the same leg's merge point.
  double exit_offset = 15.0;
};

/// Single-lane ring with one controlled entry ramp and one exit ramp per leg.
///
/// Arc coordinates run counter-clockwise from angle zero. Segment j is the ring arc
/// from merge point j to merge point j+1; its length is the L_V[j] used by density terms.
class RoundaboutLayout
{
public:
  explicit RoundaboutLayout(const LayoutParams & params = {});

  const LayoutParams & params() const { return params_; }
  Point center() const { return params_.center; }
  double ring_radius() const { return params_.ring_radius; }
  double lane_width() const { return params_.lane_width; }
  double circumference() const;
  int leg_count() const { return params_.legs; }

  const std::vector<MergePoint> & merge_points() const { return merge_points_; }
  const std::vector<RampDescriptor> & entries() const { return entries_; }
  const std::vector<RampDescriptor> & exits() const { return exits_; }
  std::span<const double> segment_lengths() const { return segment_lengths_; }

  double merge_arc(int leg) const;
  double diverge_arc(int leg) const;
  /// Segment index containing the given ring arc coordinate.
  int segment_of_arc(double arc) const;
  /// Wraps any real arc value into [0, circumference).
  double wrap_arc(double arc) const;

private:
  LayoutParams params_;
  std::vector<MergePoint> merge_points_;
  std::vector<RampDescriptor> entries_;
  std::vector<RampDescriptor> exits_;
  std::vector<double> segment_lengths_;
};

/// Point on the ring centerline with its counter-clockwise tangent heading.
Pose arc_to_cartesian(double s_arc, const RoundaboutLayout & layout);

enum class PathElement { kEntryRamp, kRing, kExitRamp };

struct PathPoint
{
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double curvature = 0.0;  // 1/m, zero on the straight ramps
  PathElement element = PathElement::kEntryRamp;
};

/// Entry ramp -> ring arc -> exit ramp, parametrized by route arc length s.
///
/// Both ramps are straight lines tangent to the ring, so heading is continuous.
class Route
{
public:
  Route() = default;
  Route(const RoundaboutLayout & layout, int entry, int exit);

  int entry() const { return entry_; }
  int exit() const { return exit_; }
  double length() const { return entry_length_ + ring_length_ + exit_length_; }
  double entry_ramp_length() const { return entry_length_; }
  double ring_length() const { return ring_length_; }
  double ring_start() const { return entry_length_; }
  double ring_end() const { return entry_length_ + ring_length_; }

  PathElement element_at(double s) const;
  /// Values outside [0, length] extrapolate along the end tangents.
  PathPoint at(double s) const;
  /// Ring arc coordinate of route position s; only meaningful on the ring element.
  double ring_arc_at(double s) const;
  /// Nearest route coordinate to p, searched locally around s_hint.
  double project(Point p, double s_hint) const;
  /// Route coordinate of merge point `merge_id`, if the route reaches it.
  std::optional<double> merge_offset(int merge_id) const;
  /// Route coordinate of ring arc `arc`, if that arc lies on this route's ring interval.
  std::optional<double> offset_of_ring_arc(double arc) const;

private:
  double ring_arc0_ = 0.0;
  double circumference_ = 0.0;
  double radius_ = 0.0;
  Point center_{};
  Point entry_start_{};
  Point entry_dir_{};
  Point exit_start_{};
  Point exit_dir_{};
  double entry_length_ = 0.0;
  double ring_length_ = 0.0;
  double exit_length_ = 0.0;
  int entry_ = 0;
  int exit_ = 0;
  std::vector<std::pair<int, double>> merge_offsets_;
};

struct ZProjection
{
  int merge_point_id = 0;
  double z = 0.0;  // signed m; negative upstream of the merge point
};

/// Signed path distance past merge point `merge_id` on the shared virtual axis.
ZProjection project_to_z(
  const Route & route, double route_s, int merge_id, const RoundaboutLayout & layout);

/// Remaining path distance to the merge point; zero once reached.
double distance_to_merge(
  const Route & route, double route_s, int merge_id, const RoundaboutLayout & layout);

double normalize_angle(double angle);

}  // namespace roundabout::geometry

#endif  // ROUNDABOUT__GEOMETRY_HPP_
