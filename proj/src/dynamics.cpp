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

#include "roundabout/dynamics.hpp"

#include "roundabout/geometry.hpp"

#include <algorithm>
#include <cmath>

namespace roundabout
{

const char * to_string(Category category)
{
  return category == Category::kCav ? "CAV" : "HDV";
}

namespace dynamics
{

void require_finite(const VehicleState & state)
{
  if (!std::isfinite(state.x) || !std::isfinite(state.y) || !std::isfinite(state.theta) ||
      !std::isfinite(state.v) || !std::isfinite(state.wheelbase) || !(state.wheelbase > 0.0))
  {
    throw NumericError("non-finite vehicle state for vehicle " + std::to_string(state.id));
  }
}

void require_finite(const ControlInput & input)
{
  if (!std::isfinite(input.accel) || !std::isfinite(input.steer)) {
    throw NumericError("non-finite control input");
  }
}

Eigen::Vector4d step_unclamped(
  const Eigen::Vector4d & s, const Eigen::Vector2d & u, double dt, double wheelbase)
{
  const double theta = s(2);
  const double v = s(3);
  return {
    s(0) + dt * v * std::cos(theta),
    s(1) + dt * v * std::sin(theta),
    theta + dt * (v / wheelbase) * std::tan(u(1)),
    v + dt * u(0)};
}

VehicleState step(
  const VehicleState & state, const ControlInput & input, double dt, const DynamicsLimits & limits)
{
  require_finite(state);
  require_finite(input);
  if (!(dt > 0.0)) {
    throw NumericError("time step must be positive");
  }
  const Eigen::Vector4d next =
    step_unclamped(state.vector(), {input.accel, input.steer}, dt, state.wheelbase);
  VehicleState out = state;
  out.x = next(0);
  out.y = next(1);
  out.theta = geometry::normalize_angle(next(2));
  out.v = std::clamp(next(3), limits.v_min, limits.v_max);
  out.path_s = state.path_s + dt * state.v;
  return out;
}

Jacobians linearize(
  const Eigen::Vector4d & s, const Eigen::Vector2d & u, double dt, double wheelbase)
{
  const double theta = s(2);
  const double v = s(3);
  const double c = std::cos(theta);
  const double sn = std::sin(theta);
  const double t = std::tan(u(1));

  Jacobians j;
  j.F.setIdentity();
  j.F(0, 2) = -dt * v * sn;
  j.F(0, 3) = dt * c;
  j.F(1, 2) = dt * v * c;
  j.F(1, 3) = dt * sn;
  j.F(2, 3) = dt * t / wheelbase;

  j.G.setZero();
  j.G(2, 1) = dt * (v / wheelbase) * (1.0 + t * t);
  j.G(3, 0) = dt;
  return j;
}

Jacobians linearize(const VehicleState & state, const ControlInput & input, double dt)
{
  require_finite(state);
  require_finite(input);
  return linearize(state.vector(), {input.accel, input.steer}, dt, state.wheelbase);
}

}  // namespace dynamics
}  // namespace roundabout
