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

#ifndef ROUNDABOUT_TESTS__LQ_CLOSED_FORM_HPP_
#define ROUNDABOUT_TESTS__LQ_CLOSED_FORM_HPP_

#include "roundabout/dynamics.hpp"

#include <Eigen/Dense>

namespace oracle
{

/// Minimizer of (x1 - ref)' R (x1 - ref) + u' Q u for the one-step model linearized at zero
/// input: x1 = step(s0, 0) + G u. Normal equations solved with a Cholesky factorization.
Eigen::Vector2d lq_single_step(
  const roundabout::VehicleState & s0, const Eigen::Vector4d & ref, const Eigen::Matrix4d & R,
  const Eigen::Matrix2d & Q, double dt);

/// The objective above at a given input.
double lq_cost(
  const roundabout::VehicleState & s0, const Eigen::Vector4d & ref, const Eigen::Matrix4d & R,
  const Eigen::Matrix2d & Q, double dt, const Eigen::Vector2d & u);

}  // namespace oracle

#endif  // ROUNDABOUT_TESTS__LQ_CLOSED_FORM_HPP_
