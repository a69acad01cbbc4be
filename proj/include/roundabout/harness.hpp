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

#ifndef ROUNDABOUT__HARNESS_HPP_
#define ROUNDABOUT__HARNESS_HPP_

#include "roundabout/engine.hpp"

#include <filesystem>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

namespace roundabout::harness
{

using engine::ConfigError;
using engine::ScenarioConfig;

class IoError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

class MixedScenarioError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// Flat `section.key = value` text, one key per line, every field present.
std::string emit_config(const ScenarioConfig & config);

/// Unknown keys and malformed values throw ConfigError. Missing keys keep their defaults.
/// `#` starts a comment.
ScenarioConfig parse_config(const std::string & text);
ScenarioConfig load_config(const std::filesystem::path & path);

/// Applies `key=value` assignments on top of `config`, in order.
ScenarioConfig apply_overrides(const ScenarioConfig & config, const std::vector<std::string> & assignments);

/// Every key with its default value and a short description.
void write_defaults_reference(std::ostream & out);

/// 16 hex digits. Covers every field except the controller variant, penetration and seed,
/// so runs that belong in one comparison share a hash.
std::string scenario_hash(const ScenarioConfig & config);

/// All entries at 396 veh/h, random exits, 200-vehicle cap, 20000 ticks.
ScenarioConfig preset_experiment1(double penetration);
/// Entry rates (108, 540, 540) plus 576 veh/h from each exit-side node.
ScenarioConfig preset_experiment2();

/// One config per variant, otherwise identical.
std::vector<ScenarioConfig> variant_sweep(const ScenarioConfig & base);

/// Runs the scenario with the hash and config echo filled in.
engine::RunResult execute(const ScenarioConfig & config, const engine::RunOptions & options = {});

/// per_vehicle.csv, density.csv and summary.json under `dir` (created if missing).
void write_run(const engine::RunResult & result, const std::filesystem::path & dir);

/// Table-shaped comparison over run summaries. Columns are variant x penetration, sorted.
/// Throws MixedScenarioError when the summaries carry different scenario hashes.
struct CompareInput
{
  std::string scenario_hash;
  std::string variant;
  double penetration = 0.0;
  std::vector<metrics::IntersectionSummary> intersections;
};

CompareInput compare_input_from_summary(const std::filesystem::path & summary_json);
CompareInput compare_input_from_report(const metrics::SimReport & report);

/// Rows: per intersection, average travel time, energy, obj(0.1) and obj(0.2).
void write_compare_csv(std::ostream & out, std::vector<CompareInput> runs);
/// Rows: per intersection, conflict ratio and mean PET normalized to the m3 run with the
/// same penetration.
void write_pet_table_csv(std::ostream & out, std::vector<CompareInput> runs);

}  // namespace roundabout::harness

#endif  // ROUNDABOUT__HARNESS_HPP_
