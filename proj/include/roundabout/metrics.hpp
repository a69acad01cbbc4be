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

#ifndef ROUNDABOUT__METRICS_HPP_
#define ROUNDABOUT__METRICS_HPP_

#include "roundabout/dynamics.hpp"

#include <cstdint>
#include <optional>
#include <ostream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace roundabout::metrics
{

class IncompleteRecordError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// One passage through the conflict zone of a merge point.
struct ZonePassage
{
  int merge_point = 0;
  int approach = 0;  // -1 for the circulating stream, else the feeding entry leg
  double t_in = 0.0;
  double t_out = 0.0;
};

struct VehicleRecord
{
  int id = 0;
  Category category = Category::kCav;
  int entry = 0;
  int exit = 0;
  double t_entry = 0.0;
  std::optional<double> t_exit;
  std::vector<double> accel;  // applied acceleration per tick
  std::vector<ZonePassage> passages;

  bool complete() const { return t_exit.has_value(); }
  double travel_time() const;
};

/// Travel time plus the control term sum(a^2 / 2 * dt).
double energy(const VehicleRecord & record, double dt);

/// lambda * max(a_max^2, a_min^2) / (2 (1 - lambda)); lambda must lie in (0, 1).
double eta(double lambda, double a_max, double a_min);

double avg_obj(double avg_travel, double avg_energy, double eta_value);

struct PetEvent
{
  int merge_point = 0;
  int leader = 0;
  int follower = 0;
  Category leader_category = Category::kCav;
  Category follower_category = Category::kCav;
  double pet = 0.0;
};

/// For each merge point, passages sorted by zone entry time; every consecutive pair from
/// different approaches yields follower entry minus leader exit.
std::vector<PetEvent> pet_events(std::span<const VehicleRecord> records);

struct ConflictRatio
{
  double ratio = 0.0;
  bool empty = true;  // no events; the ratio is reported as 0
};

ConflictRatio conflict_ratio(std::span<const PetEvent> events, double pet_threshold);

/// Element-wise value / baseline. A zero baseline gives NaN unless the value is zero too,
/// in which case the ratio is 1.
std::vector<double> normalize(std::span<const double> values, std::span<const double> baseline);

struct DensitySample
{
  long tick = 0;
  int segment = 0;
  double rho = 0.0;
};

struct IntersectionSummary
{
  int id = 0;
  int completed = 0;
  double avg_travel = 0.0;
  double avg_energy = 0.0;
  double avg_obj_lambda_01 = 0.0;
  double avg_obj_lambda_02 = 0.0;
  int pet_events = 0;
  int pet_events_cav = 0;  // both vehicles connected
  int conflicts = 0;
  double conflict_ratio = 0.0;
  double mean_pet = 0.0;
};

struct SimReport
{
  std::vector<VehicleRecord> vehicles;
  std::vector<PetEvent> pets;
  std::vector<DensitySample> density;
  int spawned = 0;
  int completed = 0;
  int in_system = 0;
  int queued = 0;
  long ticks = 0;
  double dt = 0.1;
  double a_max = 5.0;
  double a_min = -5.0;
  double pet_threshold = 2.0;
  int intersections = 3;
  bool aborted = false;
  std::string abort_reason;
  std::string scenario_hash;
  std::string variant;
  double penetration = 0.0;
  std::uint64_t seed = 0;
  std::string config_echo;
  // Solver diagnostics.
  long dmpc_solves = 0;
  long dmpc_iterations = 0;
  long dmpc_degraded = 0;
  long sequence_solves = 0;
  long sequence_degraded = 0;
  double max_spacing_violation = 0.0;  // realized, connected vehicles, m
  double max_annulus_violation = 0.0;  // realized, m
};

/// Aggregates over completed vehicles grouped by entry leg; PET grouped by merge point.
std::vector<IntersectionSummary> summarize(const SimReport & report);

struct Overall
{
  int completed = 0;
  double avg_travel = 0.0;
  double avg_energy = 0.0;
  double avg_obj_lambda_01 = 0.0;
  double avg_obj_lambda_02 = 0.0;
  double conflict_ratio = 0.0;
};

Overall summarize_all(const SimReport & report);

void write_vehicle_csv(std::ostream & out, const SimReport & report);
void write_density_csv(std::ostream & out, const SimReport & report);
void write_summary_json(std::ostream & out, const SimReport & report);

/// Rounds to 6 significant digits.
double round6(double value);

}  // namespace roundabout::metrics

#endif  // ROUNDABOUT__METRICS_HPP_
