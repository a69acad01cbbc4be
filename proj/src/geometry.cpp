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

#include "roundabout/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace roundabout::geometry
{

namespace
{
constexpr double kTwoPi = 2.0 * std::numbers::pi;

double positive_mod(double value, double period)
{
  double r = std::fmod(value, period);
  if (r < 0.0) {
    r += period;
  }
  // fmod can return `period` itself after the correction above for tiny negatives.
  return r >= period ? 0.0 : r;
}
}  // namespace

double normalize_angle(double angle)
{
  double a = std::remainder(angle, kTwoPi);
  if (a <= -std::numbers::pi) {
    a += kTwoPi;
  }
  return a;
}

RoundaboutLayout::RoundaboutLayout(const LayoutParams & params) : params_(params)
{
  if (!(params.ring_radius > 0.0) || !(params.lane_width > 0.0)) {
    throw DomainError("ring radius and lane width must be positive");
  }
  if (params.legs < 1) {
    throw DomainError("layout needs at least one leg");
  }
  if (!(params.ramp_length > 0.0) || !(params.exit_ramp_length > 0.0)) {
    throw DomainError("ramp lengths must be positive");
  }
  const double c = circumference();
  const double spacing = c / params.legs;
  if (!(params.exit_offset >= 0.0) || params.exit_offset >= spacing) {
    throw DomainError("exit offset must lie between two consecutive merge points");
  }
  for (int j = 0; j < params.legs; ++j) {
    const double angle = params.first_leg_angle + kTwoPi * j / params.legs;
    const double arc = positive_mod(angle * params.ring_radius, c);
    merge_points_.push_back({j, arc});
    entries_.push_back({angle, params.ramp_length});
    exits_.push_back({angle - params.exit_offset / params.ring_radius, params.exit_ramp_length});
  }
  for (int j = 0; j < params.legs; ++j) {
    const double next = merge_points_[(j + 1) % params.legs].arc;
    double len = positive_mod(next - merge_points_[j].arc, c);
    if (params.legs == 1) {
      len = c;
    }
    segment_lengths_.push_back(len);
  }
}

double RoundaboutLayout::circumference() const { return kTwoPi * params_.ring_radius; }

double RoundaboutLayout::wrap_arc(double arc) const { return positive_mod(arc, circumference()); }

double RoundaboutLayout::merge_arc(int leg) const { return merge_points_.at(leg).arc; }

double RoundaboutLayout::diverge_arc(int leg) const
{
  return wrap_arc(merge_arc(leg) - params_.exit_offset);
}

int RoundaboutLayout::segment_of_arc(double arc) const
{
  const double a = wrap_arc(arc);
  for (int j = 0; j < leg_count(); ++j) {
    const double from = merge_points_[j].arc;
    if (positive_mod(a - from, circumference()) < segment_lengths_[j]) {
      return j;
    }
  }
  return leg_count() - 1;
}

Pose arc_to_cartesian(double s_arc, const RoundaboutLayout & layout)
{
  if (!(s_arc >= 0.0) || s_arc >= layout.circumference()) {
    throw DomainError("arc coordinate outside [0, circumference)");
  }
  const double angle = s_arc / layout.ring_radius();
  return {
    layout.center().x + layout.ring_radius() * std::cos(angle),
    layout.center().y + layout.ring_radius() * std::sin(angle),
    normalize_angle(angle + 0.5 * std::numbers::pi)};
}

Route::Route(const RoundaboutLayout & layout, int entry, int exit)
: ring_arc0_(layout.merge_arc(entry)),
  circumference_(layout.circumference()),
  radius_(layout.ring_radius()),
  center_(layout.center()),
  entry_length_(layout.entries().at(entry).length),
  exit_length_(layout.exits().at(exit).length),
  entry_(entry),
  exit_(exit)
{
  ring_length_ = positive_mod(layout.diverge_arc(exit) - ring_arc0_, circumference_);
  if (ring_length_ <= 0.0) {
    ring_length_ = circumference_;
  }

  const Pose merge = arc_to_cartesian(ring_arc0_, layout);
  entry_dir_ = {std::cos(merge.heading), std::sin(merge.heading)};
  entry_start_ = {merge.x - entry_length_ * entry_dir_.x, merge.y - entry_length_ * entry_dir_.y};

  const Pose diverge = arc_to_cartesian(layout.diverge_arc(exit), layout);
  exit_dir_ = {std::cos(diverge.heading), std::sin(diverge.heading)};
  exit_start_ = {diverge.x, diverge.y};

  for (const auto & mp : layout.merge_points()) {
    if (mp.id == entry) {
      merge_offsets_.emplace_back(mp.id, entry_length_);
      continue;
    }
    const double along = positive_mod(mp.arc - ring_arc0_, circumference_);
    if (along > 0.0 && along < ring_length_) {
      merge_offsets_.emplace_back(mp.id, entry_length_ + along);
    }
  }
}

PathElement Route::element_at(double s) const
{
  if (s < entry_length_) {
    return PathElement::kEntryRamp;
  }
  if (s < ring_end()) {
    return PathElement::kRing;
  }
  return PathElement::kExitRamp;
}

double Route::ring_arc_at(double s) const
{
  return positive_mod(ring_arc0_ + (s - entry_length_), circumference_);
}

PathPoint Route::at(double s) const
{
  PathPoint p;
  p.element = element_at(s);
  switch (p.element) {
    case PathElement::kEntryRamp:
      p.x = entry_start_.x + s * entry_dir_.x;
      p.y = entry_start_.y + s * entry_dir_.y;
      p.heading = std::atan2(entry_dir_.y, entry_dir_.x);
      p.curvature = 0.0;
      break;
    case PathElement::kRing: {
      const double angle = ring_arc_at(s) / radius_;
      p.x = center_.x + radius_ * std::cos(angle);
      p.y = center_.y + radius_ * std::sin(angle);
      p.heading = normalize_angle(angle + 0.5 * std::numbers::pi);
      p.curvature = 1.0 / radius_;
      break;
    }
    case PathElement::kExitRamp: {
      const double along = s - ring_end();
      p.x = exit_start_.x + along * exit_dir_.x;
      p.y = exit_start_.y + along * exit_dir_.y;
      p.heading = std::atan2(exit_dir_.y, exit_dir_.x);
      p.curvature = 0.0;
      break;
    }
  }
  return p;
}

double Route::project(Point p, double s_hint) const
{
  double s = s_hint;
  for (int iter = 0; iter < 4; ++iter) {
    const PathPoint q = at(s);
    const double ds = (p.x - q.x) * std::cos(q.heading) + (p.y - q.y) * std::sin(q.heading);
    s += ds;
    if (std::abs(ds) < 1e-12) {
      break;
    }
  }
  return s;
}

std::optional<double> Route::merge_offset(int merge_id) const
{
  for (const auto & [id, offset] : merge_offsets_) {
    if (id == merge_id) {
      return offset;
    }
  }
  return std::nullopt;
}

std::optional<double> Route::offset_of_ring_arc(double arc) const
{
  const double along = positive_mod(arc - ring_arc0_, circumference_);
  if (along <= ring_length_) {
    return entry_length_ + along;
  }
  return std::nullopt;
}

ZProjection project_to_z(
  const Route & route, double route_s, int merge_id, const RoundaboutLayout & layout)
{
  if (merge_id < 0 || merge_id >= layout.leg_count()) {
    throw NotApplicableError("unknown merge point " + std::to_string(merge_id));
  }
  const auto offset = route.merge_offset(merge_id);
  if (!offset) {
    throw NotApplicableError(
      "route " + std::to_string(route.entry()) + "->" + std::to_string(route.exit()) +
      " does not pass merge point " + std::to_string(merge_id));
  }
  return {merge_id, route_s - *offset};
}

double distance_to_merge(
  const Route & route, double route_s, int merge_id, const RoundaboutLayout & layout)
{
  return std::max(0.0, -project_to_z(route, route_s, merge_id, layout).z);
}

}  // namespace roundabout::geometry
