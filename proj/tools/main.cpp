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

#include "CLI11.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

namespace fs = std::filesystem;
using namespace roundabout;

namespace
{

struct Common
{
  std::string config_path;
  std::string preset;
  std::optional<double> penetration;
  std::optional<std::uint64_t> seed;
  std::optional<double> lambda;
  std::optional<long> ticks;
  std::optional<int> cap;
  std::vector<std::string> overrides;
  std::string out = "out";
};

void add_common(CLI::App * app, Common & c)
{
  app->add_option("--config", c.config_path, "scenario configuration file")->check(CLI::ExistingFile);
  app->add_option("--preset", c.preset, "exp1 | exp2")->check(CLI::IsMember({"exp1", "exp2"}));
  app->add_option("--penetration", c.penetration, "connected share in [0, 1]")
    ->check(CLI::Range(0.0, 1.0));
  app->add_option("--seed", c.seed, "random seed");
  app->add_option("--lambda", c.lambda, "delay penalty weight")->check(CLI::NonNegativeNumber);
  app->add_option("--ticks", c.ticks, "override the tick count")->check(CLI::NonNegativeNumber);
  app->add_option("--cap", c.cap, "override the vehicle cap")->check(CLI::NonNegativeNumber);
  app->add_option("--out", c.out, "output directory");
  app->add_option("--set", c.overrides, "key=value configuration override (repeatable)");
}

harness::ScenarioConfig base_config(const Common & c)
{
  harness::ScenarioConfig cfg;
  if (!c.config_path.empty()) {
    cfg = harness::load_config(c.config_path);
  } else if (c.preset == "exp2") {
    cfg = harness::preset_experiment2();
  } else if (c.preset == "exp1") {
    cfg = harness::preset_experiment1(c.penetration.value_or(0.6));
  }
  if (c.penetration) {
    cfg.arrivals.penetration = *c.penetration;
  }
  if (c.seed) {
    cfg.seed = *c.seed;
  }
  if (c.lambda) {
    cfg.dmpc.lambda = *c.lambda;
  }
  if (c.ticks) {
    cfg.ticks = *c.ticks;
  }
  if (c.cap) {
    cfg.arrivals.vehicle_cap = *c.cap;
  }
  return harness::apply_overrides(cfg, c.overrides);
}

void report_line(const std::string & tag, const engine::RunResult & r)
{
  const auto o = metrics::summarize_all(r.report);
  std::printf(
    "%s: completed=%d travel=%.3f energy=%.3f obj01=%.3f conflict_ratio=%.3f%s\n", tag.c_str(),
    o.completed, o.avg_travel, o.avg_energy, o.avg_obj_lambda_01, o.conflict_ratio,
    r.report.aborted ? (" ABORTED: " + r.report.abort_reason).c_str() : "");
}

void write_tables(const std::vector<harness::CompareInput> & runs, const fs::path & out)
{
  fs::create_directories(out);
  std::ofstream a(out / "compare.csv", std::ios::binary);
  std::ofstream b(out / "compare_pet.csv", std::ios::binary);
  if (!a || !b) {
    throw harness::IoError("cannot write comparison tables under " + out.string());
  }
  harness::write_compare_csv(a, runs);
  harness::write_pet_table_csv(b, runs);
}

}  // namespace

int main(int argc, char ** argv)
{
  CLI::App app{"Signal-free roundabout simulator with delay-aware coordination"};
  app.require_subcommand(1);

  Common run_opts;
  std::string variant_text = "m2";
  auto * run = app.add_subcommand("run", "run one scenario");
  add_common(run, run_opts);
  run->add_option("--variant", variant_text, "m1 | m2 | m3")
    ->check(CLI::IsMember({"m1", "m2", "m3"}));

  Common sweep_opts;
  std::vector<double> penetrations{0.2, 0.4, 0.6, 0.8};
  auto * sweep = app.add_subcommand("sweep", "variants x penetrations, then compare");
  add_common(sweep, sweep_opts);
  sweep->add_option("--penetrations", penetrations, "penetration list");

  std::vector<std::string> compare_dirs;
  std::string compare_out = "out";
  auto * compare = app.add_subcommand("compare", "compare run directories");
  compare->add_option("dirs", compare_dirs, "run directories holding summary.json")->required();
  compare->add_option("--out", compare_out, "output directory");

  std::string defaults_out;
  auto * defaults = app.add_subcommand("defaults", "print every configuration key with its default");
  defaults->add_option("--out", defaults_out, "write to this file instead of stdout");

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      auto cfg = base_config(run_opts);
      if (!run->get_option("--config")->count() || run->get_option("--variant")->count()) {
        cfg.set_variant(*engine::parse_variant(variant_text));
        cfg = harness::apply_overrides(cfg, run_opts.overrides);
      }
      const auto r = harness::execute(cfg);
      harness::write_run(r, run_opts.out);
      report_line(engine::to_string(cfg.variant), r);
    } else if (sweep->parsed()) {
      const auto base = base_config(sweep_opts);
      std::vector<harness::CompareInput> runs;
      for (double p : penetrations) {
        auto cfg = base;
        cfg.arrivals.penetration = p;
        for (const auto & vc : harness::variant_sweep(cfg)) {
          char name[64];
          std::snprintf(name, sizeof(name), "p%.2f_%s", p, engine::to_string(vc.variant));
          const auto r = harness::execute(vc);
          harness::write_run(r, fs::path(sweep_opts.out) / name);
          report_line(name, r);
          runs.push_back(harness::compare_input_from_report(r.report));
        }
      }
      write_tables(runs, sweep_opts.out);
    } else if (compare->parsed()) {
      std::vector<harness::CompareInput> runs;
      for (const auto & d : compare_dirs) {
        runs.push_back(harness::compare_input_from_summary(fs::path(d) / "summary.json"));
      }
      write_tables(runs, compare_out);
    } else if (defaults->parsed()) {
      if (defaults_out.empty()) {
        harness::write_defaults_reference(std::cout);
      } else {
        std::ofstream f(defaults_out);
        if (!f) {
          throw harness::IoError("cannot write " + defaults_out);
        }
        harness::write_defaults_reference(f);
      }
    }
  } catch (const harness::ConfigError & e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const harness::MixedScenarioError & e) {
    std::cerr << "compare: " << e.what() << '\n';
    return 2;
  } catch (const std::exception & e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
