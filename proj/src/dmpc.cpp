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

#include <Eigen/Cholesky>

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

namespace roundabout::dmpc
{

namespace
{

using State5 = std::array<double, 5>;  // x, y, theta, v, route coordinate

bool symmetric_pd(const Eigen::MatrixXd & m)
{
  if (!m.allFinite() || (m - m.transpose()).cwiseAbs().maxCoeff() > 1e-12) {
    return false;
  }
  Eigen::LLT<Eigen::MatrixXd> llt(m);
  return llt.info() == Eigen::Success;
}

// Row-major 5x5 and 5x2 Jacobians of the augmented step.
struct Jac5
{
  std::array<double, 25> F{};
  std::array<double, 10> G{};
};

State5 step5(const State5 & s, double a, double steer, double dt, double wheelbase)
{
  return {
    s[0] + dt * s[3] * std::cos(s[2]),
    s[1] + dt * s[3] * std::sin(s[2]),
    s[2] + dt * (s[3] / wheelbase) * std::tan(steer),
    s[3] + dt * a,
    s[4] + dt * s[3]};
}

Jac5 jac5(const State5 & s, double steer, double dt, double wheelbase)
{
  Jac5 j;
  const double c = std::cos(s[2]);
  const double sn = std::sin(s[2]);
  const double t = std::tan(steer);
  for (int i = 0; i < 5; ++i) {
    j.F[i * 5 + i] = 1.0;
  }
  j.F[0 * 5 + 2] = -dt * s[3] * sn;
  j.F[0 * 5 + 3] = dt * c;
  j.F[1 * 5 + 2] = dt * s[3] * c;
  j.F[1 * 5 + 3] = dt * sn;
  j.F[2 * 5 + 3] = dt * t / wheelbase;
  j.F[4 * 5 + 3] = dt;
  j.G[2 * 2 + 1] = dt * (s[3] / wheelbase) * (1.0 + t * t);
  j.G[3 * 2 + 0] = dt;
  return j;
}

class Evaluator
{
public:
  explicit Evaluator(const DmpcProblem & p)
  : p_(p), n_(p.horizon), xs_(n_ + 1), jacs_(n_), grads_(n_ + 1)
  {
    x0_ = {p.self.x, p.self.y, p.self.theta, p.self.v, p.route_s};
    if (p.layout != nullptr) {
      center_x_ = p.layout->center().x;
      center_y_ = p.layout->center().y;
      radius_ = p.layout->ring_radius();
      half_width_ = 0.5 * p.layout->lane_width();
    }
    if (p.linear_model) {
      nominal_.resize(n_ + 1);
      nominal_[0] = x0_;
      for (int k = 0; k < n_; ++k) {
        jacs_[k] = jac5(nominal_[k], 0.0, p.dt, p.self.wheelbase);
        nominal_[k + 1] = step5(nominal_[k], 0.0, 0.0, p.dt, p.self.wheelbase);
      }
    }
  }

  // Penalized objective; fills `grad` when non-null. `weight` = 0 gives the bare cost.
  double operator()(const std::vector<double> & u, double weight, std::vector<double> * grad)
  {
    rollout(u);
    double total = 0.0;
    violation_ = 0.0;
    for (int k = 1; k <= n_; ++k) {
      grads_[k].fill(0.0);
      total += stage(k, weight, grad != nullptr ? &grads_[k] : nullptr);
    }
    const Eigen::Matrix2d & Q = p_.weights.Q;
    for (int k = 0; k < n_; ++k) {
      const double a = u[2 * k];
      const double d = u[2 * k + 1];
      total += Q(0, 0) * a * a + 2.0 * Q(0, 1) * a * d + Q(1, 1) * d * d;
    }
    if (grad == nullptr) {
      return total;
    }

    grad->assign(2 * n_, 0.0);
    State5 mu = grads_[n_];
    for (int k = n_ - 1; k >= 0; --k) {
      const Jac5 & j = jacs_[k];
      const double a = u[2 * k];
      const double d = u[2 * k + 1];
      double ga = 2.0 * (Q(0, 0) * a + Q(0, 1) * d);
      double gd = 2.0 * (Q(1, 0) * a + Q(1, 1) * d);
      for (int r = 0; r < 5; ++r) {
        ga += j.G[r * 2 + 0] * mu[r];
        gd += j.G[r * 2 + 1] * mu[r];
      }
      (*grad)[2 * k] = ga;
      (*grad)[2 * k + 1] = gd;
      if (k == 0) {
        break;
      }
      State5 next = grads_[k];
      for (int c = 0; c < 5; ++c) {
        double acc = 0.0;
        for (int r = 0; r < 5; ++r) {
          acc += j.F[r * 5 + c] * mu[r];
        }
        next[c] += acc;
      }
      mu = next;
    }
    return total;
  }

  double violation() const { return violation_; }
  const std::vector<State5> & states() const { return xs_; }

private:
  void rollout(const std::vector<double> & u)
  {
    const double dt = p_.dt;
    const double wb = p_.self.wheelbase;
    xs_[0] = x0_;
    for (int k = 0; k < n_; ++k) {
      const double a = u[2 * k];
      const double d = u[2 * k + 1];
      if (p_.linear_model) {
        const Jac5 & j = jacs_[k];
        State5 dx;
        for (int r = 0; r < 5; ++r) {
          dx[r] = xs_[k][r] - nominal_[k][r];
        }
        for (int r = 0; r < 5; ++r) {
          double acc = nominal_[k + 1][r] + j.G[r * 2] * a + j.G[r * 2 + 1] * d;
          for (int c = 0; c < 5; ++c) {
            acc += j.F[r * 5 + c] * dx[c];
          }
          xs_[k + 1][r] = acc;
        }
      } else {
        jacs_[k] = jac5(xs_[k], d, dt, wb);
        xs_[k + 1] = step5(xs_[k], a, d, dt, wb);
      }
    }
  }

  // Adds w * max(0, -r)^2 and its state gradient; tracks the worst raw violation.
  double hinge(double r, double raw_offset, double w, State5 * g, int iv, double dv, int ip, double dp)
  {
    violation_ = std::max(violation_, -(r + raw_offset));
    if (r >= 0.0 || w == 0.0) {
      return 0.0;
    }
    if (g != nullptr) {
      const double c = -2.0 * w * (-r);
      if (iv >= 0) {
        (*g)[iv] += c * dv;
      }
      if (ip >= 0) {
        (*g)[ip] += c * dp;
      }
    }
    return w * r * r;
  }

  double stage(int k, double w, State5 * g)
  {
    const State5 & s = xs_[k];
    const Eigen::Vector4d & ref = p_.reference[k - 1];
    const Eigen::Matrix4d & R = p_.weights.R;
    const std::array<double, 4> e{
      s[0] - ref(0), s[1] - ref(1), geometry::normalize_angle(s[2] - ref(2)), s[3] - ref(3)};
    double cost = 0.0;
    for (int r = 0; r < 4; ++r) {
      double re = 0.0;
      for (int c = 0; c < 4; ++c) {
        re += R(r, c) * e[c];
      }
      cost += e[r] * re;
      if (g != nullptr) {
        (*g)[r] += 2.0 * re;
      }
    }

    const SpacingParams & sp = p_.spacing;
    const double margin = p_.options.spacing_margin;
    const double tau = p_.tau_bar;
    const double v = s[3];
    const double moved = s[4] - x0_[4];
    const double t = k * p_.dt;
    for (const auto & n : p_.leaders) {
      const double wn = w * n.weight;
      const double d = n.gap + n.speed * t - moved;
      cost += hinge(d - (sp.reaction_time * v + sp.rho_offset) - margin, margin, wn, g, 3,
                    -sp.reaction_time, 4, -1.0);
      cost += hinge(
        d - (sp.d_min + v * sp.time_headway + v * tau + 0.5 * sp.a_max * tau * tau) - margin,
        margin, wn, g, 3, -(sp.time_headway + tau), 4, -1.0);
      cost += hinge(d - (sp.body_length + sp.rho_offset + v * tau) - margin, margin, wn, g, 3, -tau,
                    4, -1.0);
    }
    for (const auto & n : p_.followers) {
      const double wn = w * n.weight;
      const double vf = n.speed;
      const double d = moved - (n.gap + vf * t);
      cost += hinge(d - (sp.reaction_time * v + sp.rho_offset) - margin, margin, wn, g, 3,
                    -sp.reaction_time, 4, 1.0);
      cost += hinge(d - (sp.d_min + vf * sp.time_headway + vf * tau) - margin, margin, wn, g, -1,
                    0.0, 4, 1.0);
    }

    const DynamicsLimits & lim = p_.limits;
    cost += hinge(v - lim.v_min, 0.0, w, g, 3, 1.0, -1, 0.0);
    cost += hinge(lim.v_max - v, 0.0, w, g, 3, -1.0, -1, 0.0);

    const bool on_ring =
      p_.route != nullptr && p_.route->element_at(s[4]) == geometry::PathElement::kRing;
    if (on_ring && radius_ > 0.0) {
      const RolloverParams & rp = p_.rollover;
      const double eps = 1.0 / radius_;
      cost += hinge(rp.w_hc * rp.g - eps * v * v * rp.hc, 0.0, w, g, 3, -2.0 * eps * v * rp.hc, -1,
                    0.0);
      if (p_.enforce_annulus) {
        const double dx = s[0] - center_x_;
        const double dy = s[1] - center_y_;
        const double rho = std::max(std::hypot(dx, dy), 1e-9);
        const double r_in = rho - (radius_ - half_width_);
        const double r_out = (radius_ + half_width_) - rho;
        // Gradient of rho w.r.t. (x, y) is the unit radial vector.
        const double ux = dx / rho;
        const double uy = dy / rho;
        cost += hinge(r_in, 0.0, w, g, 0, ux, 1, uy);
        cost += hinge(r_out, 0.0, w, g, 0, -ux, 1, -uy);
      }
    }
    return cost;
  }

  const DmpcProblem & p_;
  int n_;
  State5 x0_{};
  std::vector<State5> xs_;
  std::vector<State5> nominal_;
  std::vector<Jac5> jacs_;
  std::vector<State5> grads_;
  double violation_ = 0.0;
  double center_x_ = 0.0;
  double center_y_ = 0.0;
  double radius_ = 0.0;
  double half_width_ = 0.0;
};

void project(std::vector<double> & u, const DynamicsLimits & lim)
{
  for (std::size_t i = 0; i < u.size(); i += 2) {
    u[i] = std::clamp(u[i], -lim.a_max, lim.a_max);
    u[i + 1] = std::clamp(u[i + 1], -lim.steer_max, lim.steer_max);
  }
}

std::vector<double> flatten(const std::vector<ControlInput> & inputs, int horizon)
{
  std::vector<double> u(2 * horizon, 0.0);
  for (int k = 0; k < horizon && k < static_cast<int>(inputs.size()); ++k) {
    u[2 * k] = inputs[k].accel;
    u[2 * k + 1] = inputs[k].steer;
  }
  return u;
}

void validate_problem(const DmpcProblem & p)
{
  if (p.horizon < 1) {
    throw std::invalid_argument("horizon must be at least one step");
  }
  if (!(p.dt > 0.0)) {
    throw std::invalid_argument("time step must be positive");
  }
  if (static_cast<int>(p.reference.size()) != p.horizon) {
    throw std::invalid_argument("reference must hold one target per horizon step");
  }
  p.weights.validate();
  dynamics::require_finite(p.self);
}

ControlPlan to_plan(const DmpcProblem & p, const std::vector<double> & u, Evaluator & eval)
{
  ControlPlan plan;
  plan.cost = eval(u, 0.0, nullptr);
  plan.max_violation = std::max(0.0, eval.violation());
  plan.inputs.resize(p.horizon);
  for (int k = 0; k < p.horizon; ++k) {
    plan.inputs[k].accel = u[2 * k];
    plan.inputs[k].steer = u[2 * k + 1];
    plan.inputs[k].issued_at = 0;
  }
  plan.states.reserve(p.horizon + 1);
  for (const auto & s : eval.states()) {
    plan.states.emplace_back(s[0], s[1], s[2], s[3]);
  }
  return plan;
}

// Projected gradient with Barzilai-Borwein steps and Armijo backtracking.
int minimize(
  Evaluator & eval, std::vector<double> & u, double weight, const DmpcProblem & p, double & alpha)
{
  const SolverOptions & opt = p.options;
  std::vector<double> g;
  std::vector<double> g_new;
  std::vector<double> trial(u.size());
  double phi = eval(u, weight, &g);
  int it = 0;
  for (; it < opt.max_iterations; ++it) {
    double a = alpha;
    double phi_new = 0.0;
    bool accepted = false;
    for (int bt = 0; bt < 40; ++bt) {
      for (std::size_t i = 0; i < u.size(); ++i) {
        trial[i] = u[i] - a * g[i];
      }
      project(trial, p.limits);
      double decrease = 0.0;
      for (std::size_t i = 0; i < u.size(); ++i) {
        decrease += g[i] * (trial[i] - u[i]);
      }
      phi_new = eval(trial, weight, nullptr);
      if (phi_new <= phi + 1e-4 * decrease) {
        accepted = true;
        break;
      }
      a *= 0.5;
    }
    if (!accepted) {
      break;
    }
    eval(trial, weight, &g_new);
    double ss = 0.0;
    double sy = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) {
      const double s = trial[i] - u[i];
      ss += s * s;
      sy += s * (g_new[i] - g[i]);
    }
    u.swap(trial);
    g.swap(g_new);
    phi = phi_new;
    if (std::sqrt(ss) < opt.step_tolerance) {
      ++it;
      break;
    }
    alpha = sy > 0.0 ? std::clamp(ss / sy, 1e-8, 1e4) : std::min(2.0 * a, 1e4);
  }
  return it;
}

}  // namespace

void DmpcWeights::validate() const
{
  if (!symmetric_pd(R) || !symmetric_pd(Q)) {
    throw WeightError("R and Q must be symmetric positive definite");
  }
  if (!(lambda >= 0.0)) {
    throw WeightError("delay penalty weight must be non-negative");
  }
}

std::vector<double> SpacingResiduals::active() const
{
  std::vector<double> out;
  for (const auto & r :
       {keep_preceding, keep_following, delay_preceding, body_preceding, delay_following}) {
    if (r) {
      out.push_back(*r);
    }
  }
  return out;
}

double SpacingResiduals::min() const
{
  double m = std::numeric_limits<double>::infinity();
  for (double r : active()) {
    m = std::min(m, r);
  }
  return m;
}

SpacingResiduals spacing_residuals(
  std::optional<double> d_pre, std::optional<double> d_fol, double v_i, double v_im,
  const SpacingParams & params, double tau_bar)
{
  SpacingResiduals r;
  const double tau = tau_bar;
  if (d_pre) {
    r.keep_preceding = *d_pre - (params.reaction_time * v_i + params.rho_offset);
    r.delay_preceding = *d_pre - (params.d_min + v_i * params.time_headway + v_i * tau +
                                  0.5 * params.a_max * tau * tau);
    r.body_preceding = *d_pre - (params.body_length + params.rho_offset + v_i * tau);
  }
  if (d_fol) {
    r.keep_following = *d_fol - (params.reaction_time * v_i + params.rho_offset);
    r.delay_following = *d_fol - (params.d_min + v_im * params.time_headway + v_im * tau);
  }
  return r;
}

double rollover_residual(double curvature, double v, double hc, double w_hc, double g)
{
  return w_hc * g - curvature * v * v * hc;
}

double stage_cost(
  const Eigen::Vector4d & s, const Eigen::Vector2d & u, const Eigen::Vector4d & ref,
  const Eigen::Matrix4d & R, const Eigen::Matrix2d & Q)
{
  Eigen::Vector4d e = s - ref;
  e(2) = geometry::normalize_angle(e(2));
  return e.dot(R * e) + u.dot(Q * u);
}

ControlPlan evaluate(const DmpcProblem & problem, const std::vector<ControlInput> & inputs)
{
  validate_problem(problem);
  Evaluator eval(problem);
  std::vector<double> u = flatten(inputs, problem.horizon);
  project(u, problem.limits);
  return to_plan(problem, u, eval);
}

double total_cost(const ControlPlan & plan, double lambda, double tau_bar)
{
  return plan.cost + lambda * static_cast<double>(plan.inputs.size()) * tau_bar;
}

ControlPlan solve(const DmpcProblem & problem, const ControlPlan * warm_start)
{
  validate_problem(problem);
  Evaluator eval(problem);
  std::vector<double> u =
    warm_start != nullptr ? flatten(warm_start->inputs, problem.horizon)
                          : std::vector<double>(2 * problem.horizon, 0.0);
  project(u, problem.limits);
  const std::vector<double> start = u;

  int iterations = 0;
  double weight = 0.0;
  double alpha = 0.05;
  for (double w : problem.options.penalty_schedule) {
    weight = w;
    iterations += minimize(eval, u, w, problem, alpha);
    eval(u, 0.0, nullptr);
    if (eval.violation() <= problem.options.feasibility_tolerance) {
      break;
    }
  }

  ControlPlan plan = to_plan(problem, u, eval);
  if (warm_start != nullptr) {
    ControlPlan warm = to_plan(problem, start, eval);
    if (warm.max_violation <= problem.options.feasibility_tolerance && warm.cost < plan.cost) {
      plan = std::move(warm);
    }
  }
  plan.iterations = iterations;
  plan.final_weight = weight;

  // Stopped and still too close: nothing the horizon can fix, brake as hard as allowed.
  const SpacingParams & sp = problem.spacing;
  const double stop_gap = std::max(
    {sp.rho_offset, sp.d_min + 0.5 * sp.a_max * problem.tau_bar * problem.tau_bar,
     sp.body_length + sp.rho_offset});
  for (const auto & n : problem.leaders) {
    if (n.physical && n.gap < stop_gap) {
      for (auto & in : plan.inputs) {
        in.accel = -problem.limits.a_max;
      }
      std::vector<double> braked = flatten(plan.inputs, problem.horizon);
      ControlPlan out = to_plan(problem, braked, eval);
      out.iterations = iterations;
      out.final_weight = weight;
      out.degraded = true;
      return out;
    }
  }
  return plan;
}

std::vector<Eigen::Vector4d> build_reference(
  const geometry::Route & route, double route_s, double dt, int horizon, double v_ring,
  double v_ramp)
{
  std::vector<Eigen::Vector4d> ref;
  ref.reserve(horizon);
  double s = route_s;
  for (int k = 0; k < horizon; ++k) {
    const double v = route.element_at(s) == geometry::PathElement::kRing ? v_ring : v_ramp;
    s += dt * v;
    const geometry::PathPoint p = route.at(s);
    const double v_target = p.element == geometry::PathElement::kRing ? v_ring : v_ramp;
    ref.emplace_back(p.x, p.y, p.heading, v_target);
  }
  return ref;
}

ControlPlan shift_plan(const ControlPlan & plan)
{
  ControlPlan out = plan;
  if (!out.inputs.empty()) {
    out.inputs.erase(out.inputs.begin());
    out.inputs.push_back(out.inputs.empty() ? ControlInput{} : out.inputs.back());
  }
  if (out.states.size() > 1) {
    out.states.erase(out.states.begin());
    out.states.push_back(out.states.back());
  }
  return out;
}

}  // namespace roundabout::dmpc
