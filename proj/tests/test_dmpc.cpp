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

#include "roundabout/dmpc.hpp"

#include "doctest.h"

#include <cmath>

using namespace roundabout;
using namespace roundabout::dmpc;

namespace
{

// Straight coasting at speed v from the origin: the reference the zero input tracks exactly.
DmpcProblem coasting_problem(double v)
{
  DmpcProblem p;
  p.self.v = v;
  for (int k = 1; k <= p.horizon; ++k) {
    p.reference.emplace_back(v * k * p.dt, 0.0, 0.0, v);
  }
  p.enforce_annulus = false;
  return p;
}

}  // namespace

TEST_CASE("stage cost")
{
  const Eigen::Matrix4d R = Eigen::Matrix4d::Identity();
  const Eigen::Matrix2d Q = Eigen::Matrix2d::Identity();
  const Eigen::Vector4d ref(1.0, 2.0, 0.3, 10.0);
  CHECK(stage_cost(ref, Eigen::Vector2d::Zero(), ref, R, Q) == 0.0);
  CHECK(stage_cost(ref + Eigen::Vector4d(1, 0, 0, 0), Eigen::Vector2d::Zero(), ref, R, Q) == doctest::Approx(1.0));
  // Heading differences wrap.
  const Eigen::Vector4d a(0, 0, 3.1, 0);
  const Eigen::Vector4d b(0, 0, -3.1, 0);
  CHECK(stage_cost(a, Eigen::Vector2d::Zero(), b, R, Q) == doctest::Approx(std::pow(2 * M_PI - 6.2, 2)));
}

TEST_CASE("delay penalty")
{
  ControlPlan plan;
  CHECK(total_cost(plan, 0.1, 0.2) == doctest::Approx(0.0));
  plan.inputs.resize(10);
  CHECK(total_cost(plan, 0.1, 0.2) == doctest::Approx(0.2));
}

TEST_CASE("weights must be positive definite")
{
  DmpcWeights w;
  CHECK_NOTHROW(w.validate());
  w.R(0, 0) = -1.0;
  CHECK_THROWS_AS(w.validate(), WeightError);
  w = {};
  w.Q(0, 1) = 0.5;
  CHECK_THROWS_AS(w.validate(), WeightError);
  w = {};
  w.lambda = -0.1;
  CHECK_THROWS_AS(w.validate(), WeightError);
}

TEST_CASE("spacing residuals")
{
  const SpacingParams p;
  const auto a = spacing_residuals(20.0, std::nullopt, 10.0, 0.0, p, 0.0);
  CHECK(*a.delay_preceding == doctest::Approx(0.0));
  CHECK_FALSE(a.keep_following.has_value());
  CHECK_FALSE(a.delay_following.has_value());
  const auto b = spacing_residuals(25.0, std::nullopt, 10.0, 0.0, p, 0.0);
  CHECK(*b.keep_preceding == doctest::Approx(2.5));
  const auto c = spacing_residuals(5.0, std::nullopt, 0.0, 0.0, p, 0.0);
  CHECK(*c.delay_preceding == doctest::Approx(0.0));
  const auto none = spacing_residuals(std::nullopt, std::nullopt, 10.0, 0.0, p, 0.2);
  CHECK(none.active().empty());
  // The delay margin tightens every delay-aware constraint.
  const auto d = spacing_residuals(30.0, 30.0, 10.0, 10.0, p, 0.2);
  CHECK(*d.delay_preceding == doctest::Approx(30.0 - (5.0 + 15.0 + 2.0 + 0.5 * 5.0 * 0.04)));
  CHECK(*d.body_preceding == doctest::Approx(30.0 - (4.5 + 4.5 + 2.0)));
  CHECK(*d.delay_following == doctest::Approx(30.0 - (5.0 + 15.0 + 2.0)));
  CHECK(*d.keep_preceding == doctest::Approx(7.5));
  CHECK(d.min() == doctest::Approx(7.5));
}

TEST_CASE("rollover residual")
{
  CHECK(rollover_residual(0.0, 20.0, 0.5, 0.9) == doctest::Approx(0.9 * 9.81));
  CHECK(rollover_residual(1.0 / 30.0, 20.0, 0.5, 0.9) == doctest::Approx(2.162).epsilon(1e-3));
  const double v_star = std::sqrt(0.9 * 9.81 * 30.0 / 0.5);
  CHECK(v_star == doctest::Approx(23.0).epsilon(0.01));
  CHECK(rollover_residual(1.0 / 30.0, v_star, 0.5, 0.9) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("solver stays at the reference when already on it")
{
  DmpcProblem p = coasting_problem(10.0);
  p.tau_bar = 0.2;
  const ControlPlan plan = solve(p);
  for (const auto & u : plan.inputs) {
    CHECK(std::abs(u.accel) < 1e-6);
    CHECK(std::abs(u.steer) < 1e-6);
  }
  CHECK(total_cost(plan, p.weights.lambda, p.tau_bar) <= p.weights.lambda * p.horizon * p.tau_bar + 1e-6);
  CHECK_FALSE(plan.degraded);
}

TEST_CASE("parked predecessor at the minimum distance forces braking")
{
  DmpcProblem p = coasting_problem(10.0);
  p.leaders.push_back({1, p.spacing.d_min, 0.0, true, 1.0});
  const ControlPlan plan = solve(p);
  CHECK(plan.inputs.front().accel <= 0.0);
}

TEST_CASE("violation even when stopped gives an emergency brake plan")
{
  DmpcProblem p = coasting_problem(0.0);
  p.leaders.push_back({1, 2.0, 0.0, true, 1.0});
  const ControlPlan plan = solve(p);
  CHECK(plan.degraded);
  CHECK(plan.inputs.front().accel == doctest::Approx(-p.limits.a_max));
}

TEST_CASE("more spacing violation costs more")
{
  DmpcProblem p = coasting_problem(10.0);
  p.leaders.push_back({1, 25.0, 10.0, true, 1.0});
  const std::vector<ControlInput> zero(p.horizon);
  const ControlPlan near = evaluate(p, zero);
  p.leaders.front().gap = 15.0;
  const ControlPlan nearer = evaluate(p, zero);
  CHECK(nearer.max_violation > near.max_violation);
}

TEST_CASE("solve is deterministic")
{
  DmpcProblem p = coasting_problem(12.0);
  p.reference.back()(3) = 14.0;
  p.leaders.push_back({1, 30.0, 11.0, true, 1.0});
  p.followers.push_back({2, -35.0, 12.0, false, 0.1});
  const ControlPlan a = solve(p);
  const ControlPlan b = solve(p);
  REQUIRE(a.inputs.size() == b.inputs.size());
  for (std::size_t i = 0; i < a.inputs.size(); ++i) {
    CHECK(a.inputs[i].accel == b.inputs[i].accel);
    CHECK(a.inputs[i].steer == b.inputs[i].steer);
  }
  const ControlPlan c = solve(p, &a);
  const ControlPlan d = solve(p, &a);
  CHECK(c.cost == d.cost);
}

TEST_CASE("shift_plan drops the first input and repeats the last")
{
  ControlPlan plan;
  plan.inputs = {{1.0, 0.0, 0}, {2.0, 0.0, 0}, {3.0, 0.1, 0}};
  const ControlPlan s = shift_plan(plan);
  REQUIRE(s.inputs.size() == 3);
  CHECK(s.inputs[0].accel == 2.0);
  CHECK(s.inputs[2].accel == 3.0);
  CHECK(s.inputs[2].steer == 0.1);
}

TEST_CASE("reference follows the route at the element speed")
{
  const geometry::RoundaboutLayout layout;
  const geometry::Route route(layout, 0, 1);
  const auto ref = build_reference(route, 0.0, 0.1, 10, 15.0, 10.0);
  REQUIRE(ref.size() == 10);
  CHECK(ref.front()(3) == doctest::Approx(10.0));
  const auto on_ring = build_reference(route, route.ring_start() + 5.0, 0.1, 10, 15.0, 10.0);
  CHECK(on_ring.front()(3) == doctest::Approx(15.0));
}
