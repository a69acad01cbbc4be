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

#include "roundabout/metrics.hpp"

#include "roundabout/geometry.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>

namespace roundabout::metrics
{

namespace
{

std::string num(double v)
{
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

struct Sums
{
  int n = 0;
  double travel = 0.0;
  double energy = 0.0;
};

}  // namespace

double VehicleRecord::travel_time() const
{
  if (!t_exit) {
    throw IncompleteRecordError("vehicle " + std::to_string(id) + " has not exited");
  }
  return *t_exit - t_entry;
}

double energy(const VehicleRecord & record, double dt)
{
  double control = 0.0;
  for (double a : record.accel) {
    control += 0.5 * a * a * dt;
  }
  return record.travel_time() + control;
}

double eta(double lambda, double a_max, double a_min)
{
  if (!(lambda > 0.0 && lambda < 1.0)) {
    throw geometry::DomainError("lambda must lie in (0, 1)");
  }
  return lambda * std::max(a_max * a_max, a_min * a_min) / (2.0 * (1.0 - lambda));
}

double avg_obj(double avg_travel, double avg_energy, double eta_value)
{
  return eta_value * avg_travel + avg_energy;
}

std::vector<PetEvent> pet_events(std::span<const VehicleRecord> records)
{
  struct Item
  {
    const VehicleRecord * rec;
    ZonePassage passage;
  };
  std::map<int, std::vector<Item>> by_point;
  for (const auto & r : records) {
    for (const auto & p : r.passages) {
      by_point[p.merge_point].push_back({&r, p});
    }
  }
  std::vector<PetEvent> out;
  for (auto & [mp, items] : by_point) {
    std::sort(items.begin(), items.end(), [](const Item & a, const Item & b) {
      if (a.passage.t_in != b.passage.t_in) {
        return a.passage.t_in < b.passage.t_in;
      }
      return a.rec->id < b.rec->id;
    });
    for (std::size_t k = 1; k < items.size(); ++k) {
      const Item & lead = items[k - 1];
      const Item & fol = items[k];
      if (lead.passage.approach == fol.passage.approach) {
        continue;
      }
      PetEvent e;
      e.merge_point = mp;
      e.leader = lead.rec->id;
      e.follower = fol.rec->id;
      e.leader_category = lead.rec->category;
      e.follower_category = fol.rec->category;
      e.pet = fol.passage.t_in - lead.passage.t_out;
      out.push_back(e);
    }
  }
  return out;
}

ConflictRatio conflict_ratio(std::span<const PetEvent> events, double pet_threshold)
{
  ConflictRatio r;
  if (events.empty()) {
    return r;
  }
  int conflicts = 0;
  for (const auto & e : events) {
    if (e.pet < pet_threshold) {
      ++conflicts;
    }
  }
  r.empty = false;
  r.ratio = static_cast<double>(conflicts) / static_cast<double>(events.size());
  return r;
}

std::vector<double> normalize(std::span<const double> values, std::span<const double> baseline)
{
  if (values.size() != baseline.size()) {
    throw std::invalid_argument("series and baseline differ in length");
  }
  std::vector<double> out;
  out.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (baseline[i] == 0.0) {
      out.push_back(values[i] == 0.0 ? 1.0 : std::numeric_limits<double>::quiet_NaN());
    } else {
      out.push_back(values[i] / baseline[i]);
    }
  }
  return out;
}

std::vector<IntersectionSummary> summarize(const SimReport & report)
{
  const double eta1 = eta(0.1, report.a_max, report.a_min);
  const double eta2 = eta(0.2, report.a_max, report.a_min);
  std::vector<Sums> sums(report.intersections);
  for (const auto & v : report.vehicles) {
    if (!v.complete() || v.entry < 0 || v.entry >= report.intersections) {
      continue;
    }
    Sums & s = sums[v.entry];
    ++s.n;
    s.travel += v.travel_time();
    s.energy += energy(v, report.dt);
  }
  std::vector<IntersectionSummary> out(report.intersections);
  for (int j = 0; j < report.intersections; ++j) {
    IntersectionSummary & s = out[j];
    s.id = j;
    s.completed = sums[j].n;
    if (sums[j].n > 0) {
      s.avg_travel = sums[j].travel / sums[j].n;
      s.avg_energy = sums[j].energy / sums[j].n;
    }
    s.avg_obj_lambda_01 = avg_obj(s.avg_travel, s.avg_energy, eta1);
    s.avg_obj_lambda_02 = avg_obj(s.avg_travel, s.avg_energy, eta2);
    std::vector<PetEvent> mine;
    double pet_sum = 0.0;
    for (const auto & e : report.pets) {
      if (e.merge_point == j) {
        mine.push_back(e);
        pet_sum += e.pet;
        if (e.leader_category == Category::kCav && e.follower_category == Category::kCav) {
          ++s.pet_events_cav;
        }
        if (e.pet < report.pet_threshold) {
          ++s.conflicts;
        }
      }
    }
    s.pet_events = static_cast<int>(mine.size());
    s.conflict_ratio = conflict_ratio(mine, report.pet_threshold).ratio;
    s.mean_pet = mine.empty() ? 0.0 : pet_sum / static_cast<double>(mine.size());
  }
  return out;
}

Overall summarize_all(const SimReport & report)
{
  Overall o;
  double travel = 0.0;
  double en = 0.0;
  for (const auto & v : report.vehicles) {
    if (!v.complete()) {
      continue;
    }
    ++o.completed;
    travel += v.travel_time();
    en += energy(v, report.dt);
  }
  if (o.completed > 0) {
    o.avg_travel = travel / o.completed;
    o.avg_energy = en / o.completed;
  }
  o.avg_obj_lambda_01 = avg_obj(o.avg_travel, o.avg_energy, eta(0.1, report.a_max, report.a_min));
  o.avg_obj_lambda_02 = avg_obj(o.avg_travel, o.avg_energy, eta(0.2, report.a_max, report.a_min));
  o.conflict_ratio = conflict_ratio(report.pets, report.pet_threshold).ratio;
  return o;
}

void write_vehicle_csv(std::ostream & out, const SimReport & report)
{
  out << "# scenario_hash=" << report.scenario_hash << '\n';
  out << "id,category,entry,exit,t_entry,t_exit,travel_time,energy\n";
  for (const auto & v : report.vehicles) {
    out << v.id << ',' << to_string(v.category) << ',' << v.entry << ',' << v.exit << ','
        << num(v.t_entry) << ',';
    if (v.complete()) {
      out << num(*v.t_exit) << ',' << num(v.travel_time()) << ',' << num(energy(v, report.dt));
    } else {
      out << ",,";
    }
    out << '\n';
  }
}

void write_density_csv(std::ostream & out, const SimReport & report)
{
  out << "# scenario_hash=" << report.scenario_hash << '\n';
  out << "tick,segment,rho\n";
  for (const auto & d : report.density) {
    out << d.tick << ',' << d.segment << ',' << num(d.rho) << '\n';
  }
}

double round6(double value)
{
  if (!std::isfinite(value) || value == 0.0) {
    return value;
  }
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", value);
  return std::strtod(buf, nullptr);
}

void write_summary_json(std::ostream & out, const SimReport & report)
{
  using nlohmann::json;
  json j;
  j["scenario_hash"] = report.scenario_hash;
  j["variant"] = report.variant;
  j["penetration"] = round6(report.penetration);
  j["seed"] = report.seed;
  j["ticks"] = report.ticks;
  j["dt"] = round6(report.dt);
  j["spawned"] = report.spawned;
  j["completed"] = report.completed;
  j["in_system"] = report.in_system;
  j["queued"] = report.queued;
  j["aborted"] = report.aborted;
  j["abort_reason"] = report.abort_reason;

  const Overall o = summarize_all(report);
  j["overall"] = {
    {"completed", o.completed},
    {"avg_travel_time", round6(o.avg_travel)},
    {"avg_energy", round6(o.avg_energy)},
    {"avg_obj_lambda_0_1", round6(o.avg_obj_lambda_01)},
    {"avg_obj_lambda_0_2", round6(o.avg_obj_lambda_02)},
    {"conflict_ratio", round6(o.conflict_ratio)}};

  json inter = json::array();
  for (const auto & s : summarize(report)) {
    inter.push_back({
      {"id", s.id},
      {"completed", s.completed},
      {"avg_travel_time", round6(s.avg_travel)},
      {"avg_energy", round6(s.avg_energy)},
      {"avg_obj_lambda_0_1", round6(s.avg_obj_lambda_01)},
      {"avg_obj_lambda_0_2", round6(s.avg_obj_lambda_02)},
      {"pet_events", s.pet_events},
      {"pet_events_cav", s.pet_events_cav},
      {"conflicts", s.conflicts},
      {"conflict_ratio", round6(s.conflict_ratio)},
      {"mean_pet", round6(s.mean_pet)}});
  }
  j["intersections"] = inter;

  json pets = json::array();
  for (const auto & e : report.pets) {
    pets.push_back({
      {"merge_point", e.merge_point},
      {"leader", e.leader},
      {"follower", e.follower},
      {"leader_category", to_string(e.leader_category)},
      {"follower_category", to_string(e.follower_category)},
      {"pet", round6(e.pet)}});
  }
  j["pet_events"] = pets;

  j["solver"] = {
    {"dmpc_solves", report.dmpc_solves},
    {"dmpc_iterations", report.dmpc_iterations},
    {"dmpc_degraded", report.dmpc_degraded},
    {"sequence_solves", report.sequence_solves},
    {"sequence_degraded", report.sequence_degraded},
    {"max_spacing_violation", round6(report.max_spacing_violation)},
    {"max_annulus_violation", round6(report.max_annulus_violation)}};
  j["config"] = report.config_echo;
  out << j.dump(2) << '\n';
}

}  // namespace roundabout::metrics
