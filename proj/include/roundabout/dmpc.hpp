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

#ifndef ROUNDABOUT__DMPC_HPP_
#define ROUNDABOUT__DMPC_HPP_

#include "roundabout/dynamics.hpp"
#include "roundabout/geometry.hpp"

#include <Eigen/Core>

#include <optional>
#include <stdexcept>
#include <vector>

namespace roundabout::dmpc
{

class WeightError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

struct DmpcWeights
{
  Eigen::Matrix4d R = Eigen::Vector4d(1.0, 1.0, 0.1, 0.5).asDiagonal();
  Eigen::Matrix2d Q = Eigen::Vector2d(0.1, 0.1).asDiagonal();
  double lambda = 0.1;

  /// Throws WeightError unless R and Q are symmetric positive definite and lambda >= 0.
  void validate() const;
};

struct SpacingParams
{
  double reaction_time = 1.8;  // s, spacing slope on the ego speed
  double rho_offset = 4.5;     // m, standstill term
  double d_min = 5.0;          // m
  double time_headway = 1.5;   // s
  double body_length = 4.5;    // m
  double a_max = 5.0;          // m/s^2, braking capability used in the delay margin
};

struct RolloverParams
{
  double hc = 0.5;    // m, height of the center of gravity
  double w_hc = 0.9;  // m, half width
  double g = 9.81;
};

/// Residual = LHS - RHS, feasible iff >= 0. Absent neighbors leave the entries empty.
struct SpacingResiduals
{
  std::optional<double> keep_preceding;   // D_pre - (reaction_time v_i + rho_offset)
  std::optional<double> keep_following;   // D_fol - (reaction_time v_i + rho_offset)
  std::optional<double> delay_preceding;  // D_pre - (D_min + v_i T_h + v_i tau + a_max tau^2 / 2)
  std::optional<double> body_preceding;   // D_pre - (L + rho_offset + v_i tau)
  std::optional<double> delay_following;  // D_fol - (D_min + v_im T_h + v_im tau)

  std::vector<double> active() const;
  double min() const;
};

SpacingResiduals spacing_residuals(
  std::optional<double> d_pre, std::optional<double> d_fol, double v_i, double v_im,
  const SpacingParams & params, double tau_bar);

double rollover_residual(double curvature, double v, double hc, double w_hc, double g = 9.81);

/// (s - ref)^T R (s - ref) + u^T Q u, with the heading difference wrapped to (-pi, pi].
double stage_cost(
  const Eigen::Vector4d & s, const Eigen::Vector2d & u, const Eigen::Vector4d & ref,
  const Eigen::Matrix4d & R, const Eigen::Matrix2d & Q);

/// Another vehicle seen along the ego route coordinate, extrapolated at constant speed.
struct NeighborTrack
{
  int id = 0;
  double gap = 0.0;    // neighbor coordinate minus ego coordinate at k = 0, m
  double speed = 0.0;  // m/s
  // A physical neighbor shares the ego's path now; virtual ones come from a merge axis.
  bool physical = true;
  double weight = 1.0;
};

struct SolverOptions
{
  std::vector<double> penalty_schedule{1e2, 1e3, 1e4};
  int max_iterations = 200;
  double step_tolerance = 1e-6;
  double feasibility_tolerance = 1e-3;
  double spacing_margin = 0.0;  // m, tightens every spacing constraint inside the solver
};

struct DmpcProblem
{
  int horizon = 10;
  double dt = 0.1;
  DmpcWeights weights{};
  SpacingParams spacing{};
  RolloverParams rollover{};
  DynamicsLimits limits{};
  double tau_bar = 0.0;  // s

  VehicleState self{};
  double route_s = 0.0;                     // ego coordinate along its route
  const geometry::Route * route = nullptr;  // optional; enables annulus and curvature terms
  const geometry::RoundaboutLayout * layout = nullptr;
  std::vector<Eigen::Vector4d> reference;  // targets for predicted states 1..horizon
  std::vector<NeighborTrack> leaders;
  std::vector<NeighborTrack> followers;

  // Roll out the first-order model around the zero-input trajectory instead of the
  // nonlinear one. The cost is then an exact quadratic in the inputs.
  bool linear_model = false;
  bool enforce_annulus = true;
  SolverOptions options{};
};

struct ControlPlan
{
  std::vector<ControlInput> inputs;
  std::vector<Eigen::Vector4d> states;  // horizon + 1, states[0] is the initial state
  double cost = 0.0;                    // tracking + effort, excludes the delay term
  double max_violation = 0.0;           // largest negative residual magnitude, 0 if feasible
  int iterations = 0;
  double final_weight = 0.0;
  bool degraded = false;
};

/// Evaluates an input sequence: predicted states, cost and worst constraint violation.
ControlPlan evaluate(const DmpcProblem & problem, const std::vector<ControlInput> & inputs);

/// Cost plus lambda * horizon * tau_bar.
double total_cost(const ControlPlan & plan, double lambda, double tau_bar);

ControlPlan solve(const DmpcProblem & problem, const ControlPlan * warm_start = nullptr);

/// Path targets at the reference speed for each element (ring vs ramps).
std::vector<Eigen::Vector4d> build_reference(
  const geometry::Route & route, double route_s, double dt, int horizon, double v_ring,
  double v_ramp);

/// Previous plan advanced by one step, last input repeated.
ControlPlan shift_plan(const ControlPlan & plan);

}  // namespace roundabout::dmpc

#endif  // ROUNDABOUT__DMPC_HPP_
