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

#ifndef ROUNDABOUT__DYNAMICS_HPP_
#define ROUNDABOUT__DYNAMICS_HPP_

#include <Eigen/Core>

#include <cstdint>
#include <stdexcept>

namespace roundabout
{

enum class Category : std::uint8_t { kCav, kHdv };

const char * to_string(Category category);

struct RouteId
{
  int entry = 0;
  int exit = 0;

  bool operator==(const RouteId &) const = default;
};

/// Kinematic state [x, y, theta, v] plus bookkeeping for one vehicle.
struct VehicleState
{
  int id = 0;
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double v = 0.0;
  double wheelbase = 2.7;
  Category category = Category::kCav;
  RouteId route{};
  double entered_at = 0.0;
  // Arc length along the vehicle's route; the geometry reference for path-based spacing.
  double path_s = 0.0;

  Eigen::Vector4d vector() const { return {x, y, theta, v}; }
};

struct ControlInput
{
  double accel = 0.0;  // m/s^2
  double steer = 0.0;  // rad, front wheel
  long issued_at = 0;  // tick
};

struct DynamicsLimits
{
  double v_min = 0.0;
  double v_max = 20.0;
  double a_max = 5.0;
  double steer_max = 0.6;
};

class NumericError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

namespace dynamics
{

/// One forward-Euler step of the kinematic bicycle model; speed is clamped to the limits.
/// `path_s` advances by the distance travelled, v * dt.
VehicleState step(
  const VehicleState & state, const ControlInput & input, double dt,
  const DynamicsLimits & limits = {});

/// Same update without the speed clamp. The solver differentiates through this one.
Eigen::Vector4d step_unclamped(const Eigen::Vector4d & s, const Eigen::Vector2d & u, double dt,
                               double wheelbase);

struct Jacobians
{
  Eigen::Matrix4d F;
  Eigen::Matrix<double, 4, 2> G;
};

/// Jacobians of the unclamped step w.r.t. state and input at (state, input).
Jacobians linearize(const VehicleState & state, const ControlInput & input, double dt);
Jacobians linearize(const Eigen::Vector4d & s, const Eigen::Vector2d & u, double dt,
                    double wheelbase);

void require_finite(const VehicleState & state);
void require_finite(const ControlInput & input);

}  // namespace dynamics
}  // namespace roundabout

#endif  // ROUNDABOUT__DYNAMICS_HPP_
