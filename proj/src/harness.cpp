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

#include "json.hpp"

#include <algorithm>
#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace roundabout::harness
{

namespace
{

std::string fmt(double v)
{
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string trim(const std::string & s)
{
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) {
    return "";
  }
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string & key, const std::string & text)
{
  errno = 0;
  char * end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE) {
    throw ConfigError("bad number for " + key + ": '" + text + "'");
  }
  return v;
}

long to_long(const std::string & key, const std::string & text)
{
  errno = 0;
  char * end = nullptr;
  const long v = std::strtol(text.c_str(), &end, 10);
  if (text.empty() || end != text.c_str() + text.size() || errno == ERANGE) {
    throw ConfigError("bad integer for " + key + ": '" + text + "'");
  }
  return v;
}

std::vector<double> to_list(const std::string & key, const std::string & text)
{
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(to_double(key, trim(item)));
  }
  return out;
}

std::string from_list(const double * v, std::size_t n)
{
  std::string out;
  for (std::size_t i = 0; i < n; ++i) {
    out += (i ? "," : "") + fmt(v[i]);
  }
  return out;
}

struct Field
{
  std::string key;
  std::string doc;
  std::function<std::string(const ScenarioConfig &)> get;
  std::function<void(ScenarioConfig &, const std::string &)> set;
};

template<typename Access>
Field real(std::string key, std::string doc, Access acc)
{
  return {key, doc,
          [acc](const ScenarioConfig & c) { return fmt(acc(const_cast<ScenarioConfig &>(c))); },
          [acc, key](ScenarioConfig & c, const std::string & t) { acc(c) = to_double(key, t); }};
}

template<typename Access>
Field integer(std::string key, std::string doc, Access acc)
{
  return {key, doc,
          [acc](const ScenarioConfig & c) {
            return std::to_string(acc(const_cast<ScenarioConfig &>(c)));
          },
          [acc, key](ScenarioConfig & c, const std::string & t) {
            acc(c) = static_cast<std::remove_reference_t<decltype(acc(c))>>(to_long(key, t));
          }};
}

template<typename Access>
Field flag(std::string key, std::string doc, Access acc)
{
  return {key, doc,
          [acc](const ScenarioConfig & c) {
            return std::string(acc(const_cast<ScenarioConfig &>(c)) ? "true" : "false");
          },
          [acc, key](ScenarioConfig & c, const std::string & t) {
            if (t != "true" && t != "false") {
              throw ConfigError("bad flag for " + key + ": '" + t + "'");
            }
            acc(c) = t == "true";
          }};
}

template<typename Access>
Field list(std::string key, std::string doc, Access acc)
{
  return {key, doc,
          [acc](const ScenarioConfig & c) {
            const auto & v = acc(const_cast<ScenarioConfig &>(c));
            return from_list(v.data(), static_cast<std::size_t>(v.size()));
          },
          [acc, key](ScenarioConfig & c, const std::string & t) {
            auto & v = acc(c);
            const auto parsed = to_list(key, t);
            using V = std::remove_reference_t<decltype(v)>;
            if constexpr (std::is_same_v<V, std::vector<double>>) {
              v = parsed;
            } else {
              if (static_cast<long>(parsed.size()) != v.size()) {
                throw ConfigError(key + " needs " + std::to_string(v.size()) + " values");
              }
              for (std::size_t i = 0; i < parsed.size(); ++i) {
                v[static_cast<long>(i)] = parsed[i];
              }
            }
          }};
}

#define RA_FIELD(kind, key, doc, expr) kind(key, doc, [](ScenarioConfig & c) -> auto & { return expr; })

const std::vector<Field> & fields()
{
  static const std::vector<Field> table = {
    {"controller.variant", "m1 | m2 | m3; also resets the features below",
     [](const ScenarioConfig & c) { return std::string(engine::to_string(c.variant)); },
     [](ScenarioConfig & c, const std::string & t) {
       const auto v = engine::parse_variant(t);
       if (!v) {
         throw ConfigError("bad variant '" + t + "'");
       }
       c.set_variant(*v);
     }},
    RA_FIELD(flag, "features.sequencing", "merge sequencing on", c.features.sequencing),
    RA_FIELD(flag, "features.compensation", "delay compensation on", c.features.compensation),
    RA_FIELD(flag, "features.global_objective", "travel-time and density terms in sequencing",
             c.features.global_objective),

    RA_FIELD(real, "layout.center_x", "m", c.layout.center.x),
    RA_FIELD(real, "layout.center_y", "m", c.layout.center.y),
    RA_FIELD(real, "layout.ring_radius", "m", c.layout.ring_radius),
    RA_FIELD(real, "layout.lane_width", "m", c.layout.lane_width),
    RA_FIELD(real, "layout.ramp_length", "entry ramp, m", c.layout.ramp_length),
    RA_FIELD(real, "layout.exit_ramp_length", "m", c.layout.exit_ramp_length),
    RA_FIELD(integer, "layout.legs", "number of legs", c.layout.legs),
    RA_FIELD(real, "layout.first_leg_angle", "rad", c.layout.first_leg_angle),
    RA_FIELD(real, "layout.exit_offset", "diverge point upstream of the merge point, m",
             c.layout.exit_offset),

    RA_FIELD(list, "arrivals.rates_vph", "per entry, veh/h", c.arrivals.rates_vph),
    RA_FIELD(real, "arrivals.exit_side_vph", "extra inflow per leg, veh/h",
             c.arrivals.exit_side_vph),
    RA_FIELD(real, "arrivals.penetration", "connected share in [0, 1]", c.arrivals.penetration),
    RA_FIELD(real, "arrivals.initial_speed", "m/s", c.arrivals.initial_speed),
    RA_FIELD(integer, "arrivals.vehicle_cap", "total vehicles generated", c.arrivals.vehicle_cap),

    RA_FIELD(real, "hdv.cruise_speed", "m/s", c.hdv.cruise_speed),
    RA_FIELD(real, "hdv.gain", "1/s", c.hdv.gain),
    RA_FIELD(real, "hdv.comfort_decel", "m/s^2", c.hdv.comfort_decel),
    RA_FIELD(real, "hdv.reaction_time", "s", c.hdv.reaction_time),
    RA_FIELD(real, "hdv.standstill", "m", c.hdv.standstill),
    RA_FIELD(real, "hdv.heading_gain", "", c.hdv.heading_gain),
    RA_FIELD(real, "hdv.lateral_gain", "", c.hdv.lateral_gain),

    {"delay.kind", "fixed | uniform",
     [](const ScenarioConfig & c) {
       return std::string(c.delay.kind == comms::DelayKind::kFixed ? "fixed" : "uniform");
     },
     [](ScenarioConfig & c, const std::string & t) {
       if (t == "fixed") {
         c.delay.kind = comms::DelayKind::kFixed;
       } else if (t == "uniform") {
         c.delay.kind = comms::DelayKind::kUniform;
       } else {
         throw ConfigError("bad delay kind '" + t + "'");
       }
     }},
    RA_FIELD(integer, "delay.fixed_ticks", "", c.delay.fixed_ticks),
    RA_FIELD(integer, "delay.min_ticks", "", c.delay.min_ticks),
    RA_FIELD(integer, "delay.max_ticks", "", c.delay.max_ticks),
    RA_FIELD(integer, "delay.threshold_ticks", "fresh when delay <= threshold",
             c.delay.threshold_ticks),
    RA_FIELD(integer, "delay.window", "delivered messages in the mean-delay window",
             c.delay_window),

    RA_FIELD(integer, "dmpc.horizon", "steps", c.dmpc.horizon),
    RA_FIELD(list, "dmpc.r_diag", "tracking weights x, y, heading, speed", c.dmpc.r_diag),
    RA_FIELD(list, "dmpc.q_diag", "input weights accel, steer", c.dmpc.q_diag),
    RA_FIELD(real, "dmpc.lambda", "delay penalty weight", c.dmpc.lambda),
    RA_FIELD(real, "dmpc.v_ref_ring", "m/s", c.dmpc.v_ref_ring),
    RA_FIELD(real, "dmpc.v_ref_ramp", "m/s", c.dmpc.v_ref_ramp),
    RA_FIELD(real, "dmpc.follower_weight", "", c.dmpc.follower_weight),
    RA_FIELD(real, "dmpc.spacing_margin", "m", c.dmpc.spacing_margin),
    RA_FIELD(real, "dmpc.filter_margin", "m", c.dmpc.filter_margin),
    RA_FIELD(real, "dmpc.lookahead", "m", c.dmpc.lookahead),
    RA_FIELD(integer, "dmpc.max_leaders", "", c.dmpc.max_leaders),
    RA_FIELD(real, "dmpc.reaction_time", "spacing slope, s", c.dmpc.spacing.reaction_time),
    RA_FIELD(real, "dmpc.rho_offset", "standstill spacing, m", c.dmpc.spacing.rho_offset),
    RA_FIELD(real, "dmpc.d_min", "m", c.dmpc.spacing.d_min),
    RA_FIELD(real, "dmpc.time_headway", "s", c.dmpc.spacing.time_headway),
    RA_FIELD(real, "dmpc.body_length", "m", c.dmpc.spacing.body_length),
    RA_FIELD(real, "dmpc.brake_a_max", "m/s^2", c.dmpc.spacing.a_max),
    RA_FIELD(real, "dmpc.rollover_hc", "m", c.dmpc.rollover.hc),
    RA_FIELD(real, "dmpc.rollover_w_hc", "m", c.dmpc.rollover.w_hc),
    RA_FIELD(real, "dmpc.gravity", "m/s^2", c.dmpc.rollover.g),
    RA_FIELD(list, "dmpc.penalty_schedule", "", c.dmpc.solver.penalty_schedule),
    RA_FIELD(integer, "dmpc.max_iterations", "", c.dmpc.solver.max_iterations),
    RA_FIELD(real, "dmpc.step_tolerance", "", c.dmpc.solver.step_tolerance),
    RA_FIELD(real, "dmpc.feasibility_tolerance", "", c.dmpc.solver.feasibility_tolerance),

    RA_FIELD(real, "sequencing.alpha1", "spacing indicator weight", c.sequencing.weights.alpha1),
    RA_FIELD(real, "sequencing.alpha2", "speed indicator weight", c.sequencing.weights.alpha2),
    RA_FIELD(real, "sequencing.alpha3", "travel time weight", c.sequencing.weights.alpha3),
    RA_FIELD(real, "sequencing.alpha4", "density weight", c.sequencing.weights.alpha4),
    RA_FIELD(real, "sequencing.B", "indicator scale", c.sequencing.weights.B),
    RA_FIELD(real, "sequencing.M", "indicator scale", c.sequencing.weights.M),
    RA_FIELD(real, "sequencing.desired_spacing", "m", c.sequencing.desired_spacing),
    RA_FIELD(integer, "sequencing.platoon_cap", "exact search up to this size",
             c.sequencing.platoon_cap),
    RA_FIELD(real, "sequencing.coordination_radius", "m", c.sequencing.coordination_radius),
    RA_FIELD(real, "sequencing.freeze_distance", "m", c.sequencing.freeze_distance),
    RA_FIELD(integer, "sequencing.resolve_period", "ticks", c.sequencing.resolve_period),
    RA_FIELD(real, "sequencing.rho_max", "veh/m", c.sequencing.rho_max),
    RA_FIELD(real, "sequencing.entry_window", "s", c.sequencing.entry_window),
    RA_FIELD(real, "sequencing.yield_gap", "ramp yields unless this far ahead, m",
             c.sequencing.yield_gap),
    RA_FIELD(flag, "sequencing.subtract_desired_twice", "spacing indicator as printed",
             c.sequencing.subtract_desired_twice),

    RA_FIELD(real, "limits.v_min", "m/s", c.limits.v_min),
    RA_FIELD(real, "limits.v_max", "m/s", c.limits.v_max),
    RA_FIELD(real, "limits.a_max", "m/s^2", c.limits.a_max),
    RA_FIELD(real, "limits.steer_max", "rad", c.limits.steer_max),

    RA_FIELD(real, "safety.ttc_threshold", "s", c.ttc_threshold),
    RA_FIELD(real, "safety.pet_threshold", "s", c.pet_threshold),
    RA_FIELD(real, "safety.conflict_zone", "half length, m", c.conflict_zone),
    RA_FIELD(real, "safety.collision_gap", "m", c.collision_gap),

    RA_FIELD(real, "sim.dt", "s", c.dt),
    RA_FIELD(integer, "sim.ticks", "", c.ticks),
    RA_FIELD(integer, "sim.seed", "", c.seed),
  };
  return table;
}

#undef RA_FIELD

bool excluded_from_hash(const std::string & key)
{
  return key == "controller.variant" || key.rfind("features.", 0) == 0 ||
         key == "arrivals.penetration" || key == "sim.seed";
}

std::uint64_t fnv1a(const std::string & text)
{
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : text) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

void write_file(const std::filesystem::path & path, const std::function<void(std::ostream &)> & body)
{
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw IoError("cannot open " + path.string() + " for writing");
  }
  body(out);
  out.flush();
  if (!out) {
    throw IoError("write to " + path.string() + " failed");
  }
}

std::string column(const CompareInput & r)
{
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s@%.6g", r.variant.c_str(), r.penetration);
  return buf;
}

void sort_and_check(std::vector<CompareInput> & runs)
{
  if (runs.empty()) {
    throw std::invalid_argument("nothing to compare");
  }
  for (const auto & r : runs) {
    if (r.scenario_hash != runs.front().scenario_hash) {
      throw MixedScenarioError(
        "scenario hashes differ: " + runs.front().scenario_hash + " vs " + r.scenario_hash);
    }
  }
  std::stable_sort(runs.begin(), runs.end(), [](const CompareInput & a, const CompareInput & b) {
    return a.penetration != b.penetration ? a.penetration < b.penetration : a.variant < b.variant;
  });
}

std::string num(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

std::string emit_config(const ScenarioConfig & config)
{
  std::string out;
  for (const auto & f : fields()) {
    out += f.key + " = " + f.get(config) + "\n";
  }
  return out;
}

ScenarioConfig parse_config(const std::string & text)
{
  std::map<std::string, const Field *> by_key;
  for (const auto & f : fields()) {
    by_key[f.key] = &f;
  }
  std::vector<std::pair<const Field *, std::string>> assignments;
  std::set<std::string> seen;
  std::stringstream ss(text);
  std::string line;
  int line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) {
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(line.substr(0, eq));
    const auto it = by_key.find(key);
    if (it == by_key.end()) {
      throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
    if (!seen.insert(key).second) {
      throw ConfigError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    assignments.emplace_back(it->second, trim(line.substr(eq + 1)));
  }
  ScenarioConfig config;
  // The variant resets the feature flags, so it goes first.
  std::stable_partition(assignments.begin(), assignments.end(), [](const auto & a) {
    return a.first->key == "controller.variant";
  });
  for (const auto & [field, value] : assignments) {
    field->set(config, value);
  }
  return config;
}

ScenarioConfig load_config(const std::filesystem::path & path)
{
  std::ifstream in(path);
  if (!in) {
    throw IoError("cannot read " + path.string());
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

ScenarioConfig apply_overrides(const ScenarioConfig & config, const std::vector<std::string> & assignments)
{
  std::map<std::string, const Field *> by_key;
  for (const auto & f : fields()) {
    by_key[f.key] = &f;
  }
  ScenarioConfig out = config;
  for (const auto & a : assignments) {
    const auto eq = a.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("expected key=value, got '" + a + "'");
    }
    const std::string key = trim(a.substr(0, eq));
    const auto it = by_key.find(key);
    if (it == by_key.end()) {
      throw ConfigError("unknown key '" + key + "'");
    }
    it->second->set(out, trim(a.substr(eq + 1)));
  }
  return out;
}

void write_defaults_reference(std::ostream & out)
{
  const ScenarioConfig defaults;
  out << "# Scenario configuration keys and their defaults.\n";
  for (const auto & f : fields()) {
    if (!f.doc.empty()) {
      out << "# " << f.doc << '\n';
    }
    out << f.key << " = " << f.get(defaults) << '\n';
  }
}

std::string scenario_hash(const ScenarioConfig & config)
{
  std::string text;
  for (const auto & f : fields()) {
    if (!excluded_from_hash(f.key)) {
      text += f.key + "=" + f.get(config) + "\n";
    }
  }
  char buf[20];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(fnv1a(text)));
  return buf;
}

ScenarioConfig preset_experiment1(double penetration)
{
  if (!(penetration >= 0.0 && penetration <= 1.0)) {
    throw ConfigError("penetration must lie in [0, 1]");
  }
  ScenarioConfig c;
  c.arrivals.rates_vph.assign(static_cast<std::size_t>(c.layout.legs), 396.0);
  c.arrivals.exit_side_vph = 0.0;
  c.arrivals.penetration = penetration;
  c.arrivals.vehicle_cap = 200;
  c.hdv.cruise_speed = 15.0;
  c.ticks = 20000;
  return c;
}

ScenarioConfig preset_experiment2()
{
  ScenarioConfig c = preset_experiment1(0.6);
  c.arrivals.rates_vph = {108.0, 540.0, 540.0};
  c.arrivals.exit_side_vph = 576.0;
  return c;
}

std::vector<ScenarioConfig> variant_sweep(const ScenarioConfig & base)
{
  std::vector<ScenarioConfig> out;
  for (auto v : {engine::Variant::kM1, engine::Variant::kM2, engine::Variant::kM3}) {
    ScenarioConfig c = base;
    c.set_variant(v);
    out.push_back(c);
  }
  return out;
}

engine::RunResult execute(const ScenarioConfig & config, const engine::RunOptions & options)
{
  engine::RunResult r = engine::run(config, options);
  r.report.scenario_hash = scenario_hash(config);
  r.report.config_echo = emit_config(config);
  return r;
}

void write_run(const engine::RunResult & result, const std::filesystem::path & dir)
{
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create " + dir.string() + ": " + ec.message());
  }
  const auto & rep = result.report;
  write_file(dir / "per_vehicle.csv", [&](std::ostream & o) { metrics::write_vehicle_csv(o, rep); });
  write_file(dir / "density.csv", [&](std::ostream & o) { metrics::write_density_csv(o, rep); });
  write_file(dir / "summary.json", [&](std::ostream & o) { metrics::write_summary_json(o, rep); });
}

CompareInput compare_input_from_report(const metrics::SimReport & report)
{
  CompareInput in;
  in.scenario_hash = report.scenario_hash;
  in.variant = report.variant;
  in.penetration = report.penetration;
  in.intersections = metrics::summarize(report);
  return in;
}

CompareInput compare_input_from_summary(const std::filesystem::path & summary_json)
{
  std::ifstream f(summary_json);
  if (!f) {
    throw IoError("cannot read " + summary_json.string());
  }
  nlohmann::json j;
  try {
    f >> j;
    CompareInput in;
    in.scenario_hash = j.at("scenario_hash").get<std::string>();
    in.variant = j.at("variant").get<std::string>();
    in.penetration = j.at("penetration").get<double>();
    for (const auto & s : j.at("intersections")) {
      metrics::IntersectionSummary is;
      is.id = s.at("id").get<int>();
      is.completed = s.at("completed").get<int>();
      is.avg_travel = s.at("avg_travel_time").get<double>();
      is.avg_energy = s.at("avg_energy").get<double>();
      is.avg_obj_lambda_01 = s.at("avg_obj_lambda_0_1").get<double>();
      is.avg_obj_lambda_02 = s.at("avg_obj_lambda_0_2").get<double>();
      is.pet_events = s.at("pet_events").get<int>();
      is.pet_events_cav = s.at("pet_events_cav").get<int>();
      is.conflicts = s.at("conflicts").get<int>();
      is.conflict_ratio = s.at("conflict_ratio").get<double>();
      is.mean_pet = s.at("mean_pet").get<double>();
      in.intersections.push_back(is);
    }
    return in;
  } catch (const nlohmann::json::exception & e) {
    throw IoError("malformed summary " + summary_json.string() + ": " + e.what());
  }
}

void write_compare_csv(std::ostream & out, std::vector<CompareInput> runs)
{
  sort_and_check(runs);
  out << "# scenario_hash=" << runs.front().scenario_hash << '\n';
  out << "intersection,metric";
  for (const auto & r : runs) {
    out << ',' << column(r);
  }
  out << '\n';
  using Getter = double (*)(const metrics::IntersectionSummary &);
  const std::pair<const char *, Getter> rows[] = {
    {"avg_travel_time", [](const metrics::IntersectionSummary & s) { return s.avg_travel; }},
    {"avg_energy", [](const metrics::IntersectionSummary & s) { return s.avg_energy; }},
    {"avg_obj_lambda_0_1", [](const metrics::IntersectionSummary & s) { return s.avg_obj_lambda_01; }},
    {"avg_obj_lambda_0_2", [](const metrics::IntersectionSummary & s) { return s.avg_obj_lambda_02; }},
  };
  const std::size_t n = runs.front().intersections.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (const auto & [name, get] : rows) {
      out << static_cast<char>('A' + i) << ',' << name;
      for (const auto & r : runs) {
        out << ',' << (i < r.intersections.size() ? num(get(r.intersections[i])) : "");
      }
      out << '\n';
    }
  }
}

void write_pet_table_csv(std::ostream & out, std::vector<CompareInput> runs)
{
  sort_and_check(runs);
  out << "# scenario_hash=" << runs.front().scenario_hash << '\n';
  out << "intersection,metric";
  for (const auto & r : runs) {
    out << ',' << column(r);
  }
  out << '\n';
  std::map<double, const CompareInput *> baseline;
  for (const auto & r : runs) {
    if (r.variant == "m3") {
      baseline[r.penetration] = &r;
    }
  }
  const std::size_t n = runs.front().intersections.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (const char * name : {"conflict_ratio_norm", "mean_pet_norm"}) {
      const bool ratio = std::string(name) == "conflict_ratio_norm";
      std::vector<double> values;
      std::vector<double> base;
      for (const auto & r : runs) {
        const auto it = baseline.find(r.penetration);
        const auto & s = r.intersections.at(i);
        values.push_back(ratio ? s.conflict_ratio : s.mean_pet);
        if (it == baseline.end()) {
          base.push_back(0.0);
          values.back() = std::numeric_limits<double>::quiet_NaN();
        } else {
          const auto & b = it->second->intersections.at(i);
          base.push_back(ratio ? b.conflict_ratio : b.mean_pet);
        }
      }
      const auto norm = metrics::normalize(values, base);
      out << static_cast<char>('A' + i) << ',' << name;
      for (double v : norm) {
        out << ',' << (std::isnan(v) ? std::string("") : num(v));
      }
      out << '\n';
    }
  }
}

}  // namespace roundabout::harness
