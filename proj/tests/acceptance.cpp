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

// Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero if any criterion fails.

#include "oracles/lq_closed_form.hpp"
#include "oracles/sequence_enumeration.hpp"
#include "roundabout/dmpc.hpp"
#include "roundabout/dynamics.hpp"
#include "roundabout/harness.hpp"
#include "roundabout/metrics.hpp"
#include "roundabout/sequencer.hpp"

#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace roundabout;
namespace fs = std::filesystem;

namespace
{

int failures = 0;

void report(int id, bool pass, const std::string & title, const std::string & detail, double seconds)
{
  std::printf(
    "%s criterion %d: %s (%s) [%.1f s]\n", pass ? "PASS" : "FAIL", id, title.c_str(), detail.c_str(),
    seconds);
  std::fflush(stdout);
  if (!pass) {
    ++failures;
  }
}

class Stopwatch
{
public:
  double seconds() const
  {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

template <typename... Args>
std::string fmt(const char * f, Args... args)
{
  char buf[512];
  std::snprintf(buf, sizeof(buf), f, args...);
  return buf;
}

// ---- 1 -------------------------------------------------------------------------------------

void table_note_audit()
{
  Stopwatch t;
  const double travel = 10.12;
  const double energy = 14.05;
  const double o1 = metrics::avg_obj(travel, energy, metrics::eta(0.1, 5.0, -5.0));
  const double o2 = metrics::avg_obj(travel, energy, metrics::eta(0.2, 5.0, -5.0));
  const bool pass = std::abs(o1 - 28.10) <= 0.05 && std::abs(o2 - 45.66) <= 0.05;
  report(1, pass, "objective weighting audit", fmt("obj(0.1)=%.4f obj(0.2)=%.4f", o1, o2), t.seconds());
}

// ---- 2 -------------------------------------------------------------------------------------

void sequencer_oracle()
{
  Stopwatch t;
  std::mt19937_64 rng(20260101);
  std::uniform_real_distribution<double> z(-60.0, 5.0);
  std::uniform_real_distribution<double> v(1.0, 16.0);
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> count(0, 4);
  double worst = 0.0;
  bool feasible = true;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 5;
    sequencer::PlatoonSnapshot s;
    s.segment_lengths = {62.83, 62.83, 62.83};
    s.base_counts = {count(rng), count(rng), count(rng)};
    s.segment_after = trial % 3;
    std::vector<int> stream(n);
    for (int i = 0; i < n; ++i) {
      sequencer::PlatoonMember m;
      m.id = 100 + i;
      m.z = z(rng);
      m.v_hat = v(rng);
      m.merge_to_exit = 40.0 + 10.0 * i;
      stream[i] = coin(rng);
      m.segment_before = stream[i] == 0 ? -1 : (s.segment_after + 2) % 3;
      s.members.push_back(m);
    }
    // Same-stream predecessors: the nearer vehicle of each approach stays ahead.
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        if (a != b && stream[a] == stream[b] && s.members[a].z > s.members[b].z) {
          bool direct = true;
          for (int c = 0; c < n; ++c) {
            if (stream[c] == stream[a] && s.members[c].z < s.members[a].z && s.members[c].z > s.members[b].z) {
              direct = false;
            }
          }
          if (direct) {
            s.precedence.emplace_back(a, b);
          }
        }
      }
    }
    const sequencer::SequenceWeights w;
    const auto bb = sequencer::solve_sequence(s, w);
    const auto ex = oracle::enumerate_sequences(s, w);
    worst = std::max(worst, std::abs(bb.objective - ex.objective));
    feasible = feasible && sequencer::is_feasible(bb.matrix, s.precedence) && !bb.degraded;
  }
  report(
    2, worst <= 1e-9 && feasible && t.seconds() < 10.0, "branch and bound vs enumeration",
    fmt("max |diff|=%.3g, all feasible=%d", worst, feasible ? 1 : 0), t.seconds());
}

// ---- 3 -------------------------------------------------------------------------------------

void linearization()
{
  Stopwatch t;
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> pos(-100.0, 100.0);
  std::uniform_real_distribution<double> ang(-M_PI, M_PI);
  std::uniform_real_distribution<double> spd(0.0, 20.0);
  std::uniform_real_distribution<double> acc(-5.0, 5.0);
  std::uniform_real_distribution<double> str(-0.6, 0.6);
  const double dt = 0.1;
  const double L = 2.7;
  double worst = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Eigen::Vector4d s(pos(rng), pos(rng), ang(rng), spd(rng));
    const Eigen::Vector2d u(acc(rng), str(rng));
    const auto j = dynamics::linearize(s, u, dt, L);
    auto check = [&](const Eigen::Vector4d & fd, const Eigen::Vector4d & an) {
      const double scale = std::max(1.0, an.cwiseAbs().maxCoeff());
      worst = std::max(worst, (fd - an).cwiseAbs().maxCoeff() / scale);
    };
    for (int c = 0; c < 4; ++c) {
      const double h = 1e-6 * std::max(1.0, std::abs(s(c)));
      Eigen::Vector4d p = s;
      Eigen::Vector4d m = s;
      p(c) += h;
      m(c) -= h;
      check((dynamics::step_unclamped(p, u, dt, L) - dynamics::step_unclamped(m, u, dt, L)) / (2 * h), j.F.col(c));
    }
    for (int c = 0; c < 2; ++c) {
      const double h = 1e-6;
      Eigen::Vector2d p = u;
      Eigen::Vector2d m = u;
      p(c) += h;
      m(c) -= h;
      check((dynamics::step_unclamped(s, p, dt, L) - dynamics::step_unclamped(s, m, dt, L)) / (2 * h), j.G.col(c));
    }
  }
  // Coasting: zero input keeps heading and speed exactly and moves along the heading.
  bool coasting = true;
  for (int trial = 0; trial < 1000; ++trial) {
    VehicleState s;
    s.x = pos(rng);
    s.y = pos(rng);
    s.theta = ang(rng);
    s.v = spd(rng);
    const VehicleState n = dynamics::step(s, {0.0, 0.0, 0}, dt);
    coasting = coasting && n.v == s.v && n.theta == s.theta && n.x == s.x + dt * s.v * std::cos(s.theta) &&
               n.y == s.y + dt * s.v * std::sin(s.theta);
  }
  report(
    3, worst <= 1e-5 && coasting && t.seconds() < 5.0, "linearization vs finite differences",
    fmt("max rel err=%.3g, coasting exact=%d", worst, coasting ? 1 : 0), t.seconds());
}

// ---- 4 -------------------------------------------------------------------------------------

void zero_delay_degeneracy()
{
  Stopwatch t;
  auto cfg = harness::preset_experiment1(0.6);
  cfg.ticks = 3000;
  cfg.arrivals.vehicle_cap = 20;
  cfg.delay.kind = comms::DelayKind::kFixed;
  cfg.delay.fixed_ticks = 0;
  engine::RunOptions o;
  o.record_trajectories = true;
  auto with = cfg;
  with.features.compensation = true;
  auto without = cfg;
  without.features.compensation = false;
  const auto a = engine::run(with, o);
  const auto b = engine::run(without, o);
  bool same = a.trajectories.size() == b.trajectories.size() && !a.trajectories.empty();
  for (std::size_t i = 0; same && i < a.trajectories.size(); ++i) {
    const auto & p = a.trajectories[i];
    const auto & q = b.trajectories[i];
    same = p.tick == q.tick && p.id == q.id && p.x == q.x && p.y == q.y && p.theta == q.theta && p.v == q.v;
  }
  report(
    4, same && !a.report.aborted && t.seconds() < 120.0, "zero delay makes compensation a no-op",
    fmt("%zu trajectory points, %d vehicles", a.trajectories.size(), a.report.spawned),
    t.seconds());
}

// ---- 5 to 7 --------------------------------------------------------------------------------

struct Aggregate
{
  std::array<double, 3> travel{};
  std::array<double, 3> obj{};
  std::array<double, 3> conflict{};
  int aborts = 0;
  double max_spacing_violation = 0.0;
  double max_annulus_violation = 0.0;
  double seconds = 0.0;
};

Aggregate scaled_experiment1(double penetration, engine::Variant variant, const std::vector<std::uint64_t> & seeds)
{
  Stopwatch t;
  Aggregate a;
  for (auto seed : seeds) {
    auto cfg = harness::preset_experiment1(penetration);
    cfg.arrivals.vehicle_cap = 50;
    cfg.ticks = 5000;
    cfg.seed = seed;
    cfg.set_variant(variant);
    const auto r = harness::execute(cfg);
    if (r.report.aborted) {
      ++a.aborts;
    }
    a.max_spacing_violation = std::max(a.max_spacing_violation, r.report.max_spacing_violation);
    a.max_annulus_violation = std::max(a.max_annulus_violation, r.report.max_annulus_violation);
    const auto s = metrics::summarize(r.report);
    for (int i = 0; i < 3; ++i) {
      a.travel[i] += s[i].avg_travel / seeds.size();
      a.obj[i] += s[i].avg_obj_lambda_01 / seeds.size();
      a.conflict[i] += s[i].conflict_ratio / seeds.size();
    }
  }
  a.seconds = t.seconds();
  return a;
}

const std::vector<std::uint64_t> kSeeds{1, 2, 3, 4, 5};

void safety_and_direction()
{
  std::map<std::pair<double, int>, Aggregate> runs;
  for (double p : {0.6, 0.8}) {
    for (auto v : {engine::Variant::kM1, engine::Variant::kM2, engine::Variant::kM3}) {
      runs[{p, static_cast<int>(v)}] = scaled_experiment1(p, v, kSeeds);
    }
  }
  const auto & m2 = runs[{0.6, static_cast<int>(engine::Variant::kM2)}];
  report(
    5, m2.aborts == 0 && m2.max_spacing_violation <= 1e-3 && m2.max_annulus_violation <= 0.0 && m2.seconds < 600.0,
    "safety invariant, 5 seeds",
    fmt("aborts=%d, max spacing violation=%.3g m, max annulus violation=%.3g m", m2.aborts,
        m2.max_spacing_violation, m2.max_annulus_violation),
    m2.seconds);

  double total = 0.0;
  bool pass6 = true;
  std::string detail;
  for (double p : {0.6, 0.8}) {
    const auto & a1 = runs[{p, static_cast<int>(engine::Variant::kM1)}];
    const auto & a2 = runs[{p, static_cast<int>(engine::Variant::kM2)}];
    const auto & a3 = runs[{p, static_cast<int>(engine::Variant::kM3)}];
    total += a1.seconds + a2.seconds + a3.seconds;
    for (int i = 1; i <= 2; ++i) {
      const double tt_margin = 1.0 - a2.travel[i] / std::min(a1.travel[i], a3.travel[i]);
      const double obj_margin = 1.0 - a2.obj[i] / std::min(a1.obj[i], a3.obj[i]);
      pass6 = pass6 && tt_margin >= 0.05 && obj_margin >= 0.05;
      detail += fmt(
        "p=%.1f %c: travel m1/m2/m3=%.2f/%.2f/%.2f margin %.1f%%", p, 'A' + i, a1.travel[i], a2.travel[i],
        a3.travel[i], 100.0 * tt_margin);
      detail += fmt(", obj m1/m2/m3=%.2f/%.2f/%.2f", a1.obj[i], a2.obj[i], a3.obj[i]);
      detail += fmt(" margin %.1f%%; ", 100.0 * obj_margin);
    }
  }
  report(6, pass6 && total < 1800.0, "M2 beats M1 and M3 by 5% at B and C", detail, total);

  const auto & c2 = runs[{0.6, static_cast<int>(engine::Variant::kM2)}];
  const auto & c3 = runs[{0.6, static_cast<int>(engine::Variant::kM3)}];
  const auto ratio = metrics::normalize(c2.conflict, c3.conflict);
  bool pass7 = true;
  for (double r : ratio) {
    pass7 = pass7 && r < 0.8;
  }
  report(
    7, pass7, "conflict ratio M2/M3 below 0.8 at every intersection",
    fmt("A=%.3f B=%.3f C=%.3f", ratio[0], ratio[1], ratio[2]), 0.0);
}

// ---- 8 -------------------------------------------------------------------------------------

void heavy_load_ordering()
{
  Stopwatch t;
  std::map<engine::Variant, std::vector<metrics::IntersectionSummary>> s;
  for (auto v : {engine::Variant::kM1, engine::Variant::kM2, engine::Variant::kM3}) {
    auto cfg = harness::preset_experiment2();
    cfg.ticks = 5000;
    cfg.set_variant(v);
    s[v] = metrics::summarize(harness::execute(cfg).report);
  }
  bool pass = true;
  std::string detail;
  for (int i = 1; i <= 2; ++i) {
    const double o1 = s[engine::Variant::kM1][i].avg_obj_lambda_01;
    const double o2 = s[engine::Variant::kM2][i].avg_obj_lambda_01;
    const double o3 = s[engine::Variant::kM3][i].avg_obj_lambda_01;
    pass = pass && o2 <= o3 * 1.01 && o3 <= o1 * 1.01;
    detail += fmt("%c: obj m2=%.2f m3=%.2f m1=%.2f; ", 'A' + i, o2, o3, o1);
  }
  report(8, pass && t.seconds() < 900.0, "heavy-load ordering M2 <= M3 <= M1 at B and C", detail, t.seconds());
}

// ---- 9 -------------------------------------------------------------------------------------

std::string slurp(const fs::path & p)
{
  std::ifstream f(p, std::ios::binary);
  std::ostringstream s;
  s << f.rdbuf();
  return s.str();
}

void determinism()
{
  Stopwatch t;
  auto cfg = harness::preset_experiment1(0.6);
  cfg.ticks = 2000;
  cfg.arrivals.vehicle_cap = 20;
  const fs::path root = fs::temp_directory_path() / "roundabout_acceptance_determinism";
  fs::remove_all(root);
  harness::write_run(harness::execute(cfg), root / "a");
  harness::write_run(harness::execute(cfg), root / "b");
  bool same = true;
  for (const char * f : {"per_vehicle.csv", "density.csv", "summary.json"}) {
    const auto x = slurp(root / "a" / f);
    same = same && !x.empty() && x == slurp(root / "b" / f);
  }
  fs::remove_all(root);
  report(9, same, "repeat runs are byte-identical", "per_vehicle.csv, density.csv, summary.json", t.seconds());
}

// ---- 10 ------------------------------------------------------------------------------------

void lq_oracle()
{
  Stopwatch t;
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> pos(-50.0, 50.0);
  std::uniform_real_distribution<double> ang(-3.0, 3.0);
  std::uniform_real_distribution<double> spd(3.0, 15.0);
  std::uniform_real_distribution<double> off(-0.5, 0.5);
  std::uniform_real_distribution<double> wgt(0.2, 2.0);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    dmpc::DmpcProblem p;
    p.horizon = 1;
    p.linear_model = true;
    p.enforce_annulus = false;
    p.limits.a_max = 1e3;
    p.limits.steer_max = 1.5;
    p.limits.v_max = 1e3;
    p.limits.v_min = -1e3;
    p.options.max_iterations = 100000;
    p.options.step_tolerance = 1e-14;
    p.self.x = pos(rng);
    p.self.y = pos(rng);
    p.self.theta = ang(rng);
    p.self.v = spd(rng);
    p.weights.R = Eigen::Vector4d(wgt(rng), wgt(rng), wgt(rng), wgt(rng)).asDiagonal();
    p.weights.Q = Eigen::Vector2d(wgt(rng), wgt(rng)).asDiagonal();
    const Eigen::Vector4d free = dynamics::step_unclamped(p.self.vector(), Eigen::Vector2d::Zero(), p.dt, p.self.wheelbase);
    const Eigen::Vector4d ref = free + Eigen::Vector4d(off(rng), off(rng), 0.2 * off(rng), 2.0 * off(rng));
    p.reference = {ref};
    const auto plan = dmpc::solve(p);
    const Eigen::Vector2d u(plan.inputs.front().accel, plan.inputs.front().steer);
    const Eigen::Vector2d star = oracle::lq_single_step(p.self, ref, p.weights.R, p.weights.Q, p.dt);
    worst = std::max(worst, (u - star).cwiseAbs().maxCoeff());
  }
  report(
    10, worst <= 1e-6 && t.seconds() < 5.0, "one-step quadratic subproblem vs closed form",
    fmt("max |u - u*|=%.3g", worst), t.seconds());
}

}  // namespace

int main()
{
  table_note_audit();
  sequencer_oracle();
  linearization();
  zero_delay_degeneracy();
  safety_and_direction();
  heavy_load_ordering();
  determinism();
  lq_oracle();
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
