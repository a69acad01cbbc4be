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

#ifndef ROUNDABOUT__ENGINE_HPP_
#define ROUNDABOUT__ENGINE_HPP_

#include "roundabout/comms.hpp"
#include "roundabout/dmpc.hpp"
#include "roundabout/dynamics.hpp"
#include "roundabout/geometry.hpp"
#include "roundabout/metrics.hpp"
#include "roundabout/sequencer.hpp"
#include "roundabout/traffic.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace roundabout::engine
{

class ConfigError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

enum class Variant { kM1, kM2, kM3 };

const char * to_string(Variant v);
std::optional<Variant> parse_variant(const std::string & text);

struct Features
{
  bool sequencing = true;
  bool compensation = true;
  bool global_objective = true;  // travel-time and density terms in the sequencing objective
};

/// M1: sequencing with the local terms only, no delay handling.
/// M2: everything on. M3: no sequencing, no delay handling.
Features features_for(Variant v);

struct DmpcSettings
{
  int horizon = 10;
  Eigen::Vector4d r_diag{1.0, 1.0, 0.1, 0.5};
  Eigen::Vector2d q_diag{0.1, 0.1};
  double lambda = 0.1;
  double v_ref_ring = 15.0;
  double v_ref_ramp = 10.0;
  double follower_weight = 0.1;
  double spacing_margin = 1.0;  // m, solver-side tightening
  double filter_margin = 0.5;   // m, one-step spacing filter on the applied command
  double lookahead = 80.0;      // m, neighbor search range along the route
  int max_leaders = 3;
  dmpc::SpacingParams spacing{};
  dmpc::RolloverParams rollover{};
  dmpc::SolverOptions solver{};
};

struct SequencingSettings
{
  sequencer::SequenceWeights weights{};
  double desired_spacing = 10.0;
  int platoon_cap = 8;
  double coordination_radius = 60.0;
  double freeze_distance = 10.0;
  int resolve_period = 10;  // ticks
  // veh/m; critical density of the spacing policy, 1 / (reaction_time v_ref_ring + rho_offset)
  double rho_max = 0.032;
  double entry_window = 2.0;
  // Without a sequenced order the ring has priority; a ramp vehicle enters once no ring
  // vehicle is within this distance behind it on the merge axis.
  double yield_gap = 30.0;  // m
  bool subtract_desired_twice = true;
};

struct ScenarioConfig
{
  geometry::LayoutParams layout{};
  traffic::ArrivalParams arrivals{};
  traffic::HdvParams hdv{};
  comms::DelayModel delay{};
  Variant variant = Variant::kM2;
  Features features = features_for(Variant::kM2);
  DmpcSettings dmpc{};
  SequencingSettings sequencing{};
  DynamicsLimits limits{};
  double ttc_threshold = 2.5;
  double pet_threshold = 2.0;
  double conflict_zone = 5.0;    // m, half length around each merge point
  double collision_gap = 4.5;    // m, same-path center distance that aborts the run
  int delay_window = 50;         // delivered messages in the mean-delay window
  double dt = 0.1;
  long ticks = 20000;
  std::uint64_t seed = 1;

  /// Sets the variant and its feature flags together.
  void set_variant(Variant v);
  void validate() const;
};

enum class Phase { kDeliver, kSequence, kControl, kStep };

struct TrajectoryPoint
{
  long tick = 0;
  int id = 0;
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;
  double v = 0.0;
};

struct SequenceLogEntry
{
  long tick = 0;
  int merge_point = 0;
  std::vector<int> platoon;  // ids, row order
  std::vector<int> order;    // ids, slot order
  double objective = 0.0;
  long nodes = 0;
  bool degraded = false;
};

struct RunOptions
{
  bool record_trajectories = false;
  bool record_sequences = false;
  bool check_conservation = true;
  std::function<void(long, Phase)> on_phase;
};

struct RunResult
{
  metrics::SimReport report;
  std::vector<TrajectoryPoint> trajectories;
  std::vector<SequenceLogEntry> sequences;
};

RunResult run(const ScenarioConfig & config, const RunOptions & options = {});

}  // namespace roundabout::engine

#endif  // ROUNDABOUT__ENGINE_HPP_
