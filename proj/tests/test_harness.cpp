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

#include "roundabout/harness.hpp"

#include "doctest.h"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace roundabout;
using namespace roundabout::harness;
namespace fs = std::filesystem;

TEST_CASE("config text round-trips")
{
  ScenarioConfig c = preset_experiment2();
  c.seed = 99;
  c.dmpc.lambda = 0.2;
  c.set_variant(engine::Variant::kM3);
  const std::string text = emit_config(c);
  CHECK(emit_config(parse_config(text)) == text);
}

TEST_CASE("config parsing errors")
{
  CHECK_THROWS_AS(parse_config("no.such.key = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("sim.seed = 1\nsim.seed = 2\n"), ConfigError);
  CHECK_THROWS_AS(parse_config("sim.ticks = lots\n"), ConfigError);
  const auto c = parse_config("# comment\n\nsim.ticks = 7  # trailing\n");
  CHECK(c.ticks == 7);
}

TEST_CASE("overrides apply in order")
{
  const auto c = apply_overrides({}, {"sim.seed=5", "sim.seed=6", "dmpc.lambda=0.3"});
  CHECK(c.seed == 6);
  CHECK(c.dmpc.lambda == doctest::Approx(0.3));
  CHECK_THROWS_AS(apply_overrides({}, {"sim.seed"}), ConfigError);
}

TEST_CASE("presets")
{
  const auto a = preset_experiment1(0.2);
  CHECK(a.arrivals.penetration == 0.2);
  CHECK(a.arrivals.rates_vph == std::vector<double>{396.0, 396.0, 396.0});
  CHECK(a.arrivals.vehicle_cap == 200);
  CHECK(preset_experiment1(0.0).arrivals.penetration == 0.0);
  CHECK(preset_experiment1(0.8).arrivals.penetration == 0.8);
  CHECK_THROWS(preset_experiment1(1.2));
  const auto b = preset_experiment2();
  CHECK(b.arrivals.rates_vph == std::vector<double>{108.0, 540.0, 540.0});
  CHECK(b.arrivals.exit_side_vph > 0.0);
}

TEST_CASE("scenario hash ignores variant, penetration and seed")
{
  auto a = preset_experiment1(0.2);
  auto b = preset_experiment1(0.8);
  b.seed = 42;
  b.set_variant(engine::Variant::kM1);
  CHECK(scenario_hash(a) == scenario_hash(b));
  CHECK(scenario_hash(a).size() == 16);
  b.arrivals.rates_vph[0] = 400.0;
  CHECK(scenario_hash(a) != scenario_hash(b));
}

TEST_CASE("comparisons refuse mixed scenarios")
{
  CompareInput x{"aaaaaaaaaaaaaaaa", "m1", 0.2, {}};
  CompareInput y{"bbbbbbbbbbbbbbbb", "m2", 0.2, {}};
  std::ostringstream out;
  CHECK_THROWS_AS(write_compare_csv(out, {x, y}), MixedScenarioError);
  CHECK_THROWS_AS(write_pet_table_csv(out, {x, y}), MixedScenarioError);
}

TEST_CASE("an empty run writes valid outputs")
{
  ScenarioConfig c;
  c.ticks = 0;
  const auto r = execute(c);
  CHECK(r.report.scenario_hash == scenario_hash(c));
  const fs::path dir = fs::temp_directory_path() / "roundabout_harness_test";
  fs::remove_all(dir);
  write_run(r, dir);
  CHECK(fs::exists(dir / "per_vehicle.csv"));
  CHECK(fs::exists(dir / "density.csv"));
  const auto back = compare_input_from_summary(dir / "summary.json");
  CHECK(back.scenario_hash == r.report.scenario_hash);
  CHECK(back.variant == "m2");
  fs::remove_all(dir);
}

TEST_CASE("comparison tables")
{
  auto c = preset_experiment1(0.6);
  c.ticks = 600;
  c.arrivals.vehicle_cap = 6;
  std::vector<CompareInput> runs;
  for (const auto & v : variant_sweep(c)) {
    runs.push_back(compare_input_from_report(execute(v).report));
  }
  REQUIRE(runs.size() == 3);
  std::ostringstream table;
  write_compare_csv(table, runs);
  const std::string t = table.str();
  CHECK(t.find("m1@0.6") != std::string::npos);
  CHECK(t.find("m3@0.6") != std::string::npos);
  std::ostringstream pet;
  write_pet_table_csv(pet, runs);
  CHECK(pet.str().find("conflict_ratio_norm") != std::string::npos);
}

TEST_CASE("defaults reference lists every key")
{
  std::ostringstream out;
  write_defaults_reference(out);
  std::istringstream keys(emit_config({}));
  std::string line;
  while (std::getline(keys, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos && line[0] != '#') {
      CHECK(out.str().find(line.substr(0, eq)) != std::string::npos);
    }
  }
}
