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

#include "roundabout/engine.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <set>
#include <sstream>

namespace roundabout::engine
{

const char * to_string(Variant v)
{
  switch (v) {
    case Variant::kM1:
      return "m1";
    case Variant::kM2:
      return "m2";
    case Variant::kM3:
      return "m3";
  }
  return "m2";
}

std::optional<Variant> parse_variant(const std::string & text)
{
  std::string t = text;
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char c) { return std::tolower(c); });
  if (t == "m1") {
    return Variant::kM1;
  }
  if (t == "m2") {
    return Variant::kM2;
  }
  if (t == "m3") {
    return Variant::kM3;
  }
  return std::nullopt;
}

Features features_for(Variant v)
{
  switch (v) {
    case Variant::kM1:
      return {true, false, false};
    case Variant::kM2:
      return {true, true, true};
    case Variant::kM3:
      return {false, false, false};
  }
  return {};
}

void ScenarioConfig::set_variant(Variant v)
{
  variant = v;
  features = features_for(v);
}

void ScenarioConfig::validate() const
{
  if (!(dt > 0.0)) {
    throw ConfigError("dt must be positive");
  }
  if (ticks < 0) {
    throw ConfigError("tick count must be non-negative");
  }
  if (static_cast<int>(arrivals.rates_vph.size()) != layout.legs) {
    throw ConfigError("one arrival rate per leg is required");
  }
  if (!(arrivals.penetration >= 0.0 && arrivals.penetration <= 1.0)) {
    throw ConfigError("penetration must lie in [0, 1]");
  }
  if (arrivals.vehicle_cap < 0) {
    throw ConfigError("vehicle cap must be non-negative");
  }
  if (dmpc.horizon < 1) {
    throw ConfigError("horizon must be at least one step");
  }
  if (!(limits.v_max > limits.v_min) || !(limits.a_max > 0.0) || !(limits.steer_max > 0.0)) {
    throw ConfigError("dynamics limits are inconsistent");
  }
  if (delay_window < 1) {
    throw ConfigError("delay window must hold at least one message");
  }
  if (!(pet_threshold > 0.0) || !(conflict_zone > 0.0)) {
    throw ConfigError("PET threshold and conflict zone must be positive");
  }
  if (sequencing.platoon_cap < 1 || sequencing.resolve_period < 1) {
    throw ConfigError("sequencing cap and period must be positive");
  }
  dmpc::DmpcWeights w;
  w.R = dmpc.r_diag.asDiagonal();
  w.Q = dmpc.q_diag.asDiagonal();
  w.lambda = dmpc.lambda;
  try {
    w.validate();
    sequencing.weights.validate();
  } catch (const std::invalid_argument & e) {
    throw ConfigError(e.what());
  }
  // Throws on a bad layout.
  geometry::RoundaboutLayout check(layout);
  (void)check;
}

namespace
{

constexpr double kInf = std::numeric_limits<double>::infinity();

int coordinator_node(int merge_point) { return -1 - merge_point; }

struct Vehicle
{
  VehicleState state;
  geometry::Route route;
  ControlInput input;
  dmpc::ControlPlan plan;
  bool has_plan = false;
  bool committed = false;  // accepted a gap at its merge point
  std::map<int, bool> goes_ahead_of;  // ring vehicle id -> this ramp vehicle enters first
  std::unique_ptr<comms::FusedNeighborView> view;  // connected vehicles only
  std::size_t record = 0;
  std::vector<double> zone_in;  // per merge point, NaN until the zone is entered
};

// Another vehicle's position on an ego route.
struct Mapped
{
  double s = 0.0;
  bool physical = true;
  int merge_point = -1;  // set for virtual positions
};

// What one vehicle (or a coordinator) knows about another.
struct Observed
{
  double s = 0.0;  // along the observed vehicle's own route
  double v = 0.0;
  double x = 0.0;
  double y = 0.0;
};

std::optional<Mapped> map_onto(
  const geometry::Route & ego, const geometry::Route & other, double other_s, double radius)
{
  using geometry::PathElement;
  switch (other.element_at(other_s)) {
    case PathElement::kEntryRamp: {
      const int j = other.entry();
      const double dist = other.entry_ramp_length() - other_s;
      if (j == ego.entry()) {
        return Mapped{other_s, true, -1};
      }
      const auto off = ego.merge_offset(j);
      if (off && dist <= radius) {
        return Mapped{*off - dist, false, j};
      }
      return std::nullopt;
    }
    case PathElement::kRing: {
      const double arc = other.ring_arc_at(other_s);
      if (const auto off = ego.offset_of_ring_arc(arc)) {
        return Mapped{*off, true, -1};
      }
      const int m = ego.entry();
      const auto off_o = other.merge_offset(m);
      if (off_o && other_s < *off_o && *off_o - other_s <= radius) {
        return Mapped{ego.entry_ramp_length() + (other_s - *off_o), false, m};
      }
      return std::nullopt;
    }
    case PathElement::kExitRamp:
      if (other.exit() == ego.exit()) {
        return Mapped{ego.ring_end() + (other_s - other.ring_end()), true, -1};
      }
      return std::nullopt;
  }
  return std::nullopt;
}

// Next merge point ahead on the route and the signed axis coordinate there.
std::optional<std::pair<int, double>> next_merge(const geometry::Route & route, double s, int legs)
{
  std::optional<std::pair<int, double>> best;
  for (int m = 0; m < legs; ++m) {
    const auto off = route.merge_offset(m);
    if (!off || s >= *off) {
      continue;
    }
    const double z = s - *off;
    if (!best || z > best->second) {
      best = std::make_pair(m, z);
    }
  }
  return best;
}

class Simulation
{
public:
  Simulation(const ScenarioConfig & cfg, const RunOptions & opts)
  : cfg_(cfg),
    opts_(opts),
    layout_(cfg.layout),
    arrivals_(cfg.arrivals, cfg.layout.legs, cfg.seed, cfg.dt),
    channel_(cfg.delay, cfg.seed ^ 0x5851f42d4c957f2dULL, cfg.dt, cfg.delay_window),
    legs_(cfg.layout.legs)
  {
    weights_.R = cfg.dmpc.r_diag.asDiagonal();
    weights_.Q = cfg.dmpc.q_diag.asDiagonal();
    weights_.lambda = cfg.dmpc.lambda;
    seq_weights_ = cfg.sequencing.weights;
    if (!cfg.features.global_objective) {
      seq_weights_.alpha3 = 0.0;
      seq_weights_.alpha4 = 0.0;
    }
    for (int m = 0; m < legs_; ++m) {
      channel_.add_node(coordinator_node(m));
      coordinators_.emplace_back(
        cfg.delay.threshold_ticks, cfg.dt, cfg.limits, cfg.features.compensation);
    }
    platoons_.resize(legs_);
    committed_.resize(legs_);
    last_solve_.assign(legs_, std::numeric_limits<long>::min() / 2);

    auto & r = result_.report;
    r.dt = cfg.dt;
    r.a_max = cfg.limits.a_max;
    r.a_min = -cfg.limits.a_max;
    r.pet_threshold = cfg.pet_threshold;
    r.intersections = legs_;
    r.variant = to_string(cfg.variant);
    r.penetration = cfg.arrivals.penetration;
    r.seed = cfg.seed;
  }

  RunResult run()
  {
    for (long k = 0; k < cfg_.ticks; ++k) {
      tick(k);
      result_.report.ticks = k + 1;
      if (result_.report.aborted) {
        break;
      }
      if (arrivals_.generated() >= cfg_.arrivals.vehicle_cap && vehicles_.empty() &&
          arrivals_.queued() == 0)
      {
        break;
      }
    }
    finish();
    return std::move(result_);
  }

private:
  void phase(long k, Phase p)
  {
    if (opts_.on_phase) {
      opts_.on_phase(k, p);
    }
  }

  void tick(long k)
  {
    phase(k, Phase::kDeliver);
    deliver(k);
    update_commitments();
    phase(k, Phase::kSequence);
    if (cfg_.features.sequencing) {
      sequence(k);
    }
    phase(k, Phase::kControl);
    std::map<int, ControlInput> inputs;
    for (auto & [id, veh] : vehicles_) {
      inputs[id] = veh.state.category == Category::kCav ? control_cav(k, veh) : control_hdv(k, veh);
    }
    phase(k, Phase::kStep);
    advance(k, inputs);
  }

  // ---- Step 1: communication -------------------------------------------------------------

  void deliver(long k)
  {
    for (auto & [id, veh] : vehicles_) {
      if (veh.state.category == Category::kCav) {
        channel_.broadcast(id, veh.state, veh.input, k);
      }
    }
    for (auto & [id, veh] : vehicles_) {
      if (veh.view) {
        const auto msgs = channel_.poll(id, k);
        veh.view->ingest(msgs);
        veh.view->refresh(k);
      }
    }
    for (int m = 0; m < legs_; ++m) {
      const auto msgs = channel_.poll(coordinator_node(m), k);
      coordinators_[m].ingest(msgs);
      coordinators_[m].refresh(k);
    }
  }

  std::optional<Observed> observe(const comms::FusedNeighborView * view, const Vehicle & other) const
  {
    if (other.state.category == Category::kHdv || view == nullptr) {
      // Unconnected vehicles are sensed directly.
      return Observed{other.state.path_s, other.state.v, other.state.x, other.state.y};
    }
    const comms::NeighborView * nv = view->find(other.state.id);
    if (nv == nullptr) {
      return std::nullopt;
    }
    const double s = other.route.project({nv->state.x, nv->state.y}, nv->state.path_s);
    return Observed{s, nv->state.v, nv->state.x, nv->state.y};
  }

  // ---- Step 2: sequencing ----------------------------------------------------------------

  struct Candidate
  {
    int id;
    double z;
    double v;
    double s;
    bool ramp;
    bool hdv;
  };

  void sequence(long k)
  {
    const auto seg_len = layout_.segment_lengths();
    for (int m = 0; m < legs_; ++m) {
      const comms::FusedNeighborView & view = coordinators_[m];
      std::vector<Candidate> cands;
      std::vector<int> ring_counts(legs_, 0);
      for (const auto & [id, veh] : vehicles_) {
        const auto obs = observe(&view, veh);
        if (!obs) {
          continue;
        }
        if (veh.route.element_at(obs->s) == geometry::PathElement::kRing) {
          ring_counts[layout_.segment_of_arc(veh.route.ring_arc_at(obs->s))] += 1;
        }
        const auto nm = next_merge(veh.route, obs->s, legs_);
        if (!nm || nm->first != m || nm->second < -cfg_.sequencing.coordination_radius) {
          continue;
        }
        cands.push_back({id, nm->second, obs->v, obs->s,
                         veh.route.element_at(obs->s) == geometry::PathElement::kEntryRamp,
                         veh.state.category == Category::kHdv});
      }
      std::sort(cands.begin(), cands.end(), [](const Candidate & a, const Candidate & b) {
        return a.z != b.z ? a.z > b.z : a.id < b.id;
      });

      std::set<int> ids;
      for (const auto & c : cands) {
        ids.insert(c.id);
      }
      const bool joined = std::any_of(
        ids.begin(), ids.end(), [&](int id) { return platoons_[m].count(id) == 0; });
      platoons_[m] = ids;
      if (cands.empty()) {
        committed_[m].clear();
        continue;
      }
      if (!joined && k - last_solve_[m] < cfg_.sequencing.resolve_period) {
        // Carry the previous order forward, restricted to current members.
        std::vector<int> kept;
        for (int id : committed_[m]) {
          if (ids.count(id)) {
            kept.push_back(id);
          }
        }
        committed_[m] = kept;
        continue;
      }
      last_solve_[m] = k;
      solve_platoon(k, m, cands, ring_counts, seg_len);
    }
  }

  void solve_platoon(
    long k, int m, const std::vector<Candidate> & cands, const std::vector<int> & ring_counts,
    std::span<const double> seg_len)
  {
    const int n = static_cast<int>(cands.size());
    sequencer::PlatoonSnapshot snap;
    snap.segment_lengths.assign(seg_len.begin(), seg_len.end());
    snap.base_counts = ring_counts;
    snap.segment_after = m;
    snap.entry_window = cfg_.sequencing.entry_window;
    snap.v_ref = cfg_.dmpc.v_ref_ring;
    snap.subtract_desired_twice = cfg_.sequencing.subtract_desired_twice;
    for (const auto & c : cands) {
      const Vehicle & veh = vehicles_.at(c.id);
      sequencer::PlatoonMember pm;
      pm.id = c.id;
      pm.z = c.z;
      pm.v_hat = c.v;
      pm.desired_spacing = cfg_.sequencing.desired_spacing;
      pm.merge_to_exit = veh.route.length() - *veh.route.merge_offset(m);
      if (!c.ramp) {
        const int seg = layout_.segment_of_arc(veh.route.ring_arc_at(c.s));
        pm.segment_before = seg;
        snap.base_counts[seg] -= 1;  // counted through the member instead
      }
      snap.members.push_back(pm);
    }

    // Precedence, highest priority first; a pair that would close a cycle is dropped.
    std::vector<std::vector<bool>> reach(n, std::vector<bool>(n, false));
    auto add = [&](int a, int b) {
      if (a == b || reach[b][a] || reach[a][b]) {
        return;
      }
      snap.precedence.emplace_back(a, b);
      for (int i = 0; i < n; ++i) {
        if (i != a && !reach[i][a]) {
          continue;
        }
        for (int j = 0; j < n; ++j) {
          if (j == b || reach[b][j]) {
            reach[i][j] = true;
          }
        }
      }
    };
    // Same approach keeps its order.
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        if (cands[a].ramp == cands[b].ramp) {
          add(a, b);
        }
      }
    }
    // Unconnected vehicles keep the yield rule they drive by.
    for (int a = 0; a < n; ++a) {
      for (int b = a + 1; b < n; ++b) {
        if (!cands[a].hdv && !cands[b].hdv) {
          continue;
        }
        if (cands[a].ramp == cands[b].ramp) {
          add(a, b);
          continue;
        }
        const int ramp = cands[a].ramp ? a : b;
        const int ring = cands[a].ramp ? b : a;
        if (ramp_goes_first(cands[ramp].id, cands[ring].id)) {
          add(ramp, ring);
        } else {
          add(ring, ramp);
        }
      }
    }
    // Once a vehicle is close to the merge point its place relative to every vehicle
    // already in the committed order is fixed; newcomers go behind it.
    std::map<int, int> prev_rank;
    for (std::size_t i = 0; i < committed_[m].size(); ++i) {
      prev_rank[committed_[m][i]] = static_cast<int>(i);
    }
    for (int f = 0; f < n; ++f) {
      if (cands[f].z < -cfg_.sequencing.freeze_distance) {
        continue;
      }
      const auto rf = prev_rank.find(cands[f].id);
      for (int b = 0; b < n; ++b) {
        if (b == f) {
          continue;
        }
        const auto rb = prev_rank.find(cands[b].id);
        if (rf != prev_rank.end() && rb != prev_rank.end()) {
          if (rf->second < rb->second) {
            add(f, b);
          } else {
            add(b, f);
          }
        } else if (rb == prev_rank.end()) {
          add(f, b);
        }
      }
    }
    // Entry gating: while the downstream segment is at capacity the ring goes first.
    const double rho_after = ring_counts[m] / layout_.segment_lengths()[m];
    if (rho_after >= cfg_.sequencing.rho_max) {
      for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
          if (!cands[a].ramp && cands[b].ramp) {
            add(a, b);
          }
        }
      }
    }

    // Only vehicles expected at the merge point within one entry window of each other may
    // swap; a queued ramp vehicle does not take a slot ahead of a moving ring vehicle.
    auto arrival = [&](const Candidate & c) { return -c.z / std::max(c.v, snap.min_speed); };
    for (int a = 0; a < n; ++a) {
      for (int b = 0; b < n; ++b) {
        if (arrival(cands[a]) + cfg_.sequencing.entry_window < arrival(cands[b])) {
          add(a, b);
        }
      }
    }
    const auto res =
      sequencer::solve_sequence(snap, seq_weights_, cfg_.sequencing.platoon_cap);
    result_.report.sequence_solves += 1;
    if (res.degraded) {
      result_.report.sequence_degraded += 1;
    }
    committed_[m].clear();
    for (int row : res.order) {
      committed_[m].push_back(cands[row].id);
    }
    if (opts_.record_sequences) {
      SequenceLogEntry e;
      e.tick = k;
      e.merge_point = m;
      for (const auto & c : cands) {
        e.platoon.push_back(c.id);
      }
      e.order = committed_[m];
      e.objective = res.objective;
      e.nodes = res.nodes;
      e.degraded = res.degraded;
      result_.sequences.push_back(std::move(e));
    }
  }

  // Merge priority between a ramp vehicle and a ring vehicle without a committed order:
  // the ring has priority until the ramp vehicle accepts a gap. `lead` is the ramp
  // vehicle's axis coordinate minus the ring vehicle's.
  bool ramp_goes_first(int ramp_id, int ring_id) const
  {
    const auto it = vehicles_.find(ramp_id);
    if (it == vehicles_.end() || !it->second.committed) {
      return false;
    }
    // Past the merge point: every ring vehicle still upstream of it is behind.
    const auto & ramp = it->second;
    if (ramp.route.element_at(ramp.state.path_s) != geometry::PathElement::kEntryRamp) {
      return true;
    }
    const auto d = ramp.goes_ahead_of.find(ring_id);
    return d != ramp.goes_ahead_of.end() && d->second;
  }

  // A ramp vehicle accepts the gap once every ring vehicle behind it on the merge axis is
  // more than the yield gap away. The decision is never revoked. After that each ring
  // vehicle in range is placed once, behind or ahead, from its true position, so both
  // vehicles read the same order.
  void update_commitments()
  {
    for (auto & [id, veh] : vehicles_) {
      const double s = veh.state.path_s;
      if (veh.route.element_at(s) != geometry::PathElement::kEntryRamp) {
        veh.committed = true;
        continue;
      }
      std::vector<std::pair<int, double>> ring;  // id, lead of this vehicle
      for (const auto & [oid, other] : vehicles_) {
        if (oid == id) {
          continue;
        }
        const auto mapped = map_onto(
          veh.route, other.route, other.state.path_s, cfg_.sequencing.coordination_radius);
        if (mapped && !mapped->physical) {
          ring.emplace_back(oid, s - mapped->s);
        }
      }
      if (!veh.committed) {
        veh.committed = std::none_of(ring.begin(), ring.end(), [&](const auto & r) {
          return r.second >= 0.0 && r.second <= cfg_.sequencing.yield_gap;
        });
      }
      if (veh.committed) {
        for (const auto & [oid, lead] : ring) {
          veh.goes_ahead_of.try_emplace(oid, lead > 0.0);
        }
      }
    }
  }

  // Committed slot rank of `id` at merge point m, if it is in that platoon.
  std::optional<int> rank_of(int m, int id) const
  {
    const auto & order = committed_[m];
    const auto it = std::find(order.begin(), order.end(), id);
    if (it == order.end()) {
      return std::nullopt;
    }
    return static_cast<int>(it - order.begin());
  }

  // ---- Step 3: control -------------------------------------------------------------------

  struct Relation
  {
    int id;
    double gap;
    double speed;
    bool physical;
    bool leader;
  };

  std::vector<Relation> relations(const Vehicle & ego, const comms::FusedNeighborView * view, bool use_order) const
  {
    std::vector<Relation> out;
    const double s_e = ego.state.path_s;
    for (const auto & [id, other] : vehicles_) {
      if (id == ego.state.id) {
        continue;
      }
      const auto obs = observe(view, other);
      if (!obs) {
        continue;
      }
      const auto mapped =
        map_onto(ego.route, other.route, obs->s, cfg_.sequencing.coordination_radius);
      if (!mapped) {
        continue;
      }
      const double gap = mapped->s - s_e;
      bool leader = gap > 0.0 || (gap == 0.0 && id < ego.state.id);
      if (!mapped->physical) {
        const bool ego_on_ramp_side = mapped->merge_point == ego.route.entry();
        leader = ego_on_ramp_side ? !ramp_goes_first(ego.state.id, id)
                                  : ramp_goes_first(id, ego.state.id);
        // Once past the merge point the ego is physically ahead; stale decisions no longer apply.
        const double ego_merge_s = ego_on_ramp_side ? ego.route.entry_ramp_length()
                                                    : *ego.route.merge_offset(mapped->merge_point);
        const bool ego_past = s_e >= ego_merge_s;
        if (ego_past) {
          leader = false;
        }
        const auto re = use_order && !ego_past ? rank_of(mapped->merge_point, ego.state.id) : std::nullopt;
        const auto ro = use_order ? rank_of(mapped->merge_point, id) : std::nullopt;
        if (re && ro) {
          leader = *ro < *re;
        }
      }
      if (std::abs(gap) > cfg_.dmpc.lookahead) {
        continue;
      }
      out.push_back({id, gap, obs->v, mapped->physical, leader});
    }
    return out;
  }

  ControlInput control_hdv(long k, Vehicle & veh)
  {
    std::optional<traffic::LeaderInfo> leader;
    for (const auto & r : relations(veh, nullptr, false)) {
      if (r.leader && (!leader || r.gap < leader->gap)) {
        leader = traffic::LeaderInfo{r.gap, r.speed};
      }
    }
    return traffic::hdv_step(veh.state, veh.route, leader, cfg_.hdv, cfg_.limits, k);
  }

  ControlInput control_cav(long k, Vehicle & veh)
  {
    const bool use_order = cfg_.features.sequencing;
    auto rel = relations(veh, veh.view.get(), use_order);

    dmpc::DmpcProblem prob;
    prob.horizon = cfg_.dmpc.horizon;
    prob.dt = cfg_.dt;
    prob.weights = weights_;
    prob.spacing = cfg_.dmpc.spacing;
    prob.rollover = cfg_.dmpc.rollover;
    prob.limits = cfg_.limits;
    prob.tau_bar = cfg_.features.compensation ? channel_.mean_delay() : 0.0;
    prob.self = veh.state;
    prob.route_s = veh.state.path_s;
    prob.route = &veh.route;
    prob.layout = &layout_;
    prob.reference = dmpc::build_reference(
      veh.route, veh.state.path_s, cfg_.dt, cfg_.dmpc.horizon, cfg_.dmpc.v_ref_ring,
      cfg_.dmpc.v_ref_ramp);
    prob.options = cfg_.dmpc.solver;
    prob.options.spacing_margin = cfg_.dmpc.spacing_margin;

    std::vector<Relation> leaders;
    std::vector<Relation> followers;
    for (const auto & r : rel) {
      (r.leader ? leaders : followers).push_back(r);
    }
    std::sort(leaders.begin(), leaders.end(), [](const Relation & a, const Relation & b) {
      return a.gap != b.gap ? a.gap < b.gap : a.id < b.id;
    });
    std::sort(followers.begin(), followers.end(), [](const Relation & a, const Relation & b) {
      return a.gap != b.gap ? a.gap > b.gap : a.id < b.id;
    });
    for (std::size_t i = 0; i < leaders.size() && static_cast<int>(i) < cfg_.dmpc.max_leaders; ++i) {
      prob.leaders.push_back({leaders[i].id, leaders[i].gap, leaders[i].speed, leaders[i].physical, 1.0});
    }
    // A follower that is already too close cannot be helped by this vehicle: every
    // feasible move raises the speed term faster than the gap. It keeps its own leader
    // constraint, so the pair is left to it.
    const auto & sp0 = cfg_.dmpc.spacing;
    if (!followers.empty() &&
        -followers[0].gap >= sp0.reaction_time * veh.state.v + sp0.rho_offset + cfg_.dmpc.spacing_margin)
    {
      prob.followers.push_back({followers[0].id, followers[0].gap, followers[0].speed,
                                followers[0].physical, cfg_.dmpc.follower_weight});
    }

    dmpc::ControlPlan warm;
    if (veh.has_plan) {
      warm = dmpc::shift_plan(veh.plan);
    }
    dmpc::ControlPlan plan = dmpc::solve(prob, veh.has_plan ? &warm : nullptr);
    auto & rep = result_.report;
    rep.dmpc_solves += 1;
    rep.dmpc_iterations += plan.iterations;
    if (plan.degraded) {
      rep.dmpc_degraded += 1;
    }

    ControlInput u = plan.inputs.front();
    // One-step spacing filter: positions advance with the current speeds, so the next gap
    // is known; cap the acceleration so the next speed keeps the reaction-time spacing.
    // The vehicle directly ahead on the same path is sensed on board; merge partners are
    // known only through the channel.
    const auto & sp = cfg_.dmpc.spacing;
    const double v = veh.state.v;
    auto cap_for = [&](double gap, double leader_speed) {
      const double next_gap = gap + cfg_.dt * (leader_speed - v);
      return ((next_gap - sp.rho_offset - cfg_.dmpc.filter_margin) / sp.reaction_time - v) / cfg_.dt;
    };
    for (const auto & l : leaders) {
      if (!l.physical && l.gap > 0.0) {
        u.accel = std::min(u.accel, cap_for(l.gap, l.speed));
      }
    }
    if (const auto ahead = physical_leader(veh)) {
      u.accel = std::min(u.accel, cap_for(ahead->first, vehicles_.at(ahead->second).state.v));
    }
    u.accel = std::clamp(u.accel, -cfg_.limits.a_max, cfg_.limits.a_max);
    u.steer = std::clamp(u.steer, -cfg_.limits.steer_max, cfg_.limits.steer_max);
    u.issued_at = k;
    veh.plan = plan;
    veh.has_plan = true;
    return u;
  }

  // ---- Step 4: update, spawn, despawn ----------------------------------------------------

  void advance(long k, const std::map<int, ControlInput> & inputs)
  {
    auto & rep = result_.report;
    const double t0 = k * cfg_.dt;
    std::vector<int> finished;
    for (auto & [id, veh] : vehicles_) {
      const ControlInput & u = inputs.at(id);
      const double s_prev = veh.state.path_s;
      VehicleState next = dynamics::step(veh.state, u, cfg_.dt, cfg_.limits);
      next.path_s = veh.route.project({next.x, next.y}, next.path_s);
      veh.state = next;
      veh.input = u;
      auto & record = rep.vehicles[veh.record];
      record.accel.push_back(u.accel);

      const double s_new = veh.state.path_s;
      const double ds = s_new - s_prev;
      auto frac = [&](double target) {
        return ds > 0.0 ? std::clamp((target - s_prev) / ds, 0.0, 1.0) : 1.0;
      };
      for (int m = 0; m < legs_; ++m) {
        const auto off = veh.route.merge_offset(m);
        if (!off) {
          continue;
        }
        const double in = *off - cfg_.conflict_zone;
        const double out = *off + cfg_.conflict_zone;
        if (s_prev < in && s_new >= in) {
          veh.zone_in[m] = t0 + cfg_.dt * frac(in);
        }
        if (s_prev < out && s_new >= out && !std::isnan(veh.zone_in[m])) {
          metrics::ZonePassage p;
          p.merge_point = m;
          p.approach = m == veh.route.entry() ? m : -1;
          p.t_in = veh.zone_in[m];
          p.t_out = t0 + cfg_.dt * frac(out);
          record.passages.push_back(p);
        }
      }
      if (s_new >= veh.route.length()) {
        record.t_exit = t0 + cfg_.dt * frac(veh.route.length());
        finished.push_back(id);
      }
    }
    for (int id : finished) {
      despawn(id);
    }

    check_safety(k);
    if (rep.aborted) {
      return;
    }

    arrivals_.draw(k);
    for (int entry = 0; entry < legs_; ++entry) {
      if (arrivals_.queue(entry).empty()) {
        continue;
      }
      const double need = traffic::release_headroom(
        cfg_.arrivals.initial_speed, cfg_.dmpc.spacing.d_min, cfg_.dmpc.spacing.reaction_time,
        cfg_.dmpc.spacing.rho_offset);
      if (headroom(entry) >= need) {
        spawn(*arrivals_.release(entry));
      }
    }

    for (int j = 0; j < legs_; ++j) {
      int count = 0;
      for (const auto & [id, veh] : vehicles_) {
        if (veh.route.element_at(veh.state.path_s) == geometry::PathElement::kRing &&
            layout_.segment_of_arc(veh.route.ring_arc_at(veh.state.path_s)) == j)
        {
          ++count;
        }
      }
      rep.density.push_back({k, j, count / layout_.segment_lengths()[j]});
    }

    if (opts_.record_trajectories) {
      for (const auto & [id, veh] : vehicles_) {
        result_.trajectories.push_back(
          {k + 1, id, veh.state.x, veh.state.y, veh.state.theta, veh.state.v});
      }
    }
    if (opts_.check_conservation) {
      const int completed = rep.completed;
      const int in_system = static_cast<int>(vehicles_.size());
      const int queued = static_cast<int>(arrivals_.queued());
      if (arrivals_.generated() != completed + in_system + queued) {
        throw std::logic_error("vehicle conservation violated");
      }
    }
  }

  double headroom(int entry) const
  {
    double h = kInf;
    for (const auto & [id, veh] : vehicles_) {
      if (veh.route.entry() == entry &&
          veh.route.element_at(veh.state.path_s) == geometry::PathElement::kEntryRamp)
      {
        // Room left after one step of the new vehicle at the release speed.
        const double closing = std::max(0.0, cfg_.arrivals.initial_speed - veh.state.v);
        h = std::min(h, veh.state.path_s - cfg_.dt * closing);
      }
    }
    return h;
  }

  void spawn(const traffic::Arrival & a)
  {
    Vehicle veh;
    veh.route = geometry::Route(layout_, a.entry, a.exit);
    const geometry::PathPoint p = veh.route.at(0.0);
    veh.state.id = a.id;
    veh.state.x = p.x;
    veh.state.y = p.y;
    veh.state.theta = p.heading;
    veh.state.v = cfg_.arrivals.initial_speed;
    veh.state.category = a.category;
    veh.state.route = {a.entry, a.exit};
    veh.state.entered_at = a.tick * cfg_.dt;
    veh.state.path_s = 0.0;
    veh.zone_in.assign(legs_, std::numeric_limits<double>::quiet_NaN());

    metrics::VehicleRecord rec;
    rec.id = a.id;
    rec.category = a.category;
    rec.entry = a.entry;
    rec.exit = a.exit;
    rec.t_entry = veh.state.entered_at;
    veh.record = result_.report.vehicles.size();
    result_.report.vehicles.push_back(rec);

    if (a.category == Category::kCav) {
      channel_.add_node(a.id);
      for (auto & [id, other] : vehicles_) {
        if (other.state.category == Category::kCav) {
          channel_.connect(a.id, id);
          channel_.connect(id, a.id);
        }
      }
      for (int m = 0; m < legs_; ++m) {
        channel_.connect(a.id, coordinator_node(m));
      }
      veh.view = std::make_unique<comms::FusedNeighborView>(
        cfg_.delay.threshold_ticks, cfg_.dt, cfg_.limits, cfg_.features.compensation);
    }
    vehicles_.emplace(a.id, std::move(veh));
  }

  void despawn(int id)
  {
    auto it = vehicles_.find(id);
    if (it->second.state.category == Category::kCav) {
      channel_.remove_node(id);
    }
    for (auto & [other_id, other] : vehicles_) {
      if (other.view) {
        other.view->forget(id);
      }
    }
    for (auto & c : coordinators_) {
      c.forget(id);
    }
    for (int m = 0; m < legs_; ++m) {
      platoons_[m].erase(id);
      auto & order = committed_[m];
      order.erase(std::remove(order.begin(), order.end(), id), order.end());
    }
    vehicles_.erase(it);
    result_.report.completed += 1;
  }

  // Gap to and id of the nearest vehicle ahead on the same path, from true states.
  std::optional<std::pair<double, int>> physical_leader(const Vehicle & veh) const
  {
    std::optional<std::pair<double, int>> best;
    const int id = veh.state.id;
    for (const auto & [oid, other] : vehicles_) {
      if (oid == id) {
        continue;
      }
      const auto mapped = map_onto(veh.route, other.route, other.state.path_s, 0.0);
      if (!mapped || !mapped->physical) {
        continue;
      }
      const double gap = mapped->s - veh.state.path_s;
      if (gap < 0.0 || (gap == 0.0 && oid > id)) {
        continue;
      }
      if (!best || gap < best->first) {
        best = std::make_pair(gap, oid);
      }
    }
    return best;
  }

  void check_safety(long k)
  {
    auto & rep = result_.report;
    const auto & sp = cfg_.dmpc.spacing;
    for (const auto & [id, veh] : vehicles_) {
      const auto ahead = physical_leader(veh);
      const double nearest = ahead ? ahead->first : kInf;
      const int nearest_id = ahead ? ahead->second : -1;
      if (nearest_id >= 0 && nearest < cfg_.collision_gap) {
        std::ostringstream msg;
        msg << "collision at tick " << k << ": vehicle " << id << " is " << nearest
            << " m behind vehicle " << nearest_id;
        rep.aborted = true;
        rep.abort_reason = msg.str();
        return;
      }
      if (veh.state.category == Category::kCav && nearest_id >= 0) {
        const double need = sp.reaction_time * veh.state.v + sp.rho_offset;
        rep.max_spacing_violation = std::max(rep.max_spacing_violation, need - nearest);
      }
      if (veh.route.element_at(veh.state.path_s) == geometry::PathElement::kRing) {
        const double r = std::hypot(veh.state.x - layout_.center().x, veh.state.y - layout_.center().y);
        const double off = std::abs(r - layout_.ring_radius()) - 0.5 * layout_.lane_width();
        rep.max_annulus_violation = std::max(rep.max_annulus_violation, off);
      }
    }
  }

  void finish()
  {
    auto & rep = result_.report;
    rep.in_system = static_cast<int>(vehicles_.size());
    rep.queued = static_cast<int>(arrivals_.queued());
    rep.spawned = arrivals_.generated();
    std::sort(rep.vehicles.begin(), rep.vehicles.end(),
              [](const metrics::VehicleRecord & a, const metrics::VehicleRecord & b) {
                return a.id < b.id;
              });
    rep.pets = metrics::pet_events(rep.vehicles);
  }

  const ScenarioConfig & cfg_;
  const RunOptions & opts_;
  geometry::RoundaboutLayout layout_;
  traffic::ArrivalProcess arrivals_;
  comms::DelayChannel channel_;
  int legs_;
  dmpc::DmpcWeights weights_;
  sequencer::SequenceWeights seq_weights_;
  std::map<int, Vehicle> vehicles_;
  std::vector<comms::FusedNeighborView> coordinators_;
  std::vector<std::set<int>> platoons_;
  std::vector<std::vector<int>> committed_;
  std::vector<long> last_solve_;
  RunResult result_;
};

}  // namespace

RunResult run(const ScenarioConfig & config, const RunOptions & options)
{
  config.validate();
  Simulation sim(config, options);
  return sim.run();
}

}  // namespace roundabout::engine
