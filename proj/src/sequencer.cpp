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

#include "roundabout/sequencer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

namespace roundabout::sequencer
{

namespace
{

int sign_indicator(double term)
{
  if (term < 0.0) {
    return 1;
  }
  if (term > 0.0) {
    return -1;
  }
  return 0;
}

double free_arrival(const PlatoonMember & m, const PlatoonSnapshot & s)
{
  return -m.z / std::max(m.v_hat, s.min_speed);
}

double spacing_term(const PlatoonMember & ahead, const PlatoonMember & behind, const PlatoonSnapshot & s)
{
  const double dev = ahead.z - behind.z - behind.desired_spacing;
  return s.subtract_desired_twice ? dev - behind.desired_spacing : dev;
}

// Slot-pair cost for (ahead, behind) in consecutive slots.
double pair_cost(
  const PlatoonMember & ahead, const PlatoonMember & behind, const PlatoonSnapshot & s,
  const SequenceWeights & w, double & spacing_part, double & mixed_part)
{
  const int y_d = sign_indicator(spacing_term(ahead, behind, s));
  const int y_v = sign_indicator(behind.v_hat - ahead.v_hat);
  const int chi = y_d - y_v;
  spacing_part = w.alpha1 * w.B * y_d * y_d;
  mixed_part = w.alpha2 * w.M * chi * chi;
  return spacing_part + mixed_part;
}

void require_square(const SequenceMatrix & c, const PlatoonSnapshot & s)
{
  if (c.rows() != c.cols()) {
    throw ShapeError("sequence matrix must be square");
  }
  if (c.rows() != s.size()) {
    throw ShapeError("sequence matrix does not match the platoon size");
  }
}

}  // namespace

SequenceMatrix::SequenceMatrix(int rows, int cols)
: rows_(rows), cols_(cols), cells_(static_cast<std::size_t>(rows) * cols, 0)
{
  if (rows < 0 || cols < 0) {
    throw ShapeError("negative matrix dimension");
  }
}

SequenceMatrix SequenceMatrix::identity(int n)
{
  SequenceMatrix c(n);
  for (int i = 0; i < n; ++i) {
    c.set(i, i, 1);
  }
  return c;
}

SequenceMatrix SequenceMatrix::from_order(std::span<const int> order)
{
  const int n = static_cast<int>(order.size());
  SequenceMatrix c(n);
  for (int slot = 0; slot < n; ++slot) {
    c.set(order[slot], slot, 1);
  }
  return c;
}

std::size_t SequenceMatrix::index(int row, int slot) const
{
  if (row < 0 || row >= rows_ || slot < 0 || slot >= cols_) {
    throw ShapeError("matrix index out of range");
  }
  return static_cast<std::size_t>(row) * cols_ + slot;
}

void SequenceMatrix::set(int row, int slot, int value)
{
  if (value != 0 && value != 1) {
    throw ShapeError("sequence matrix entries are binary");
  }
  cells_[index(row, slot)] = static_cast<std::uint8_t>(value);
}

std::vector<int> SequenceMatrix::order() const
{
  std::vector<int> out(cols_, -1);
  for (int r = 0; r < rows_; ++r) {
    for (int n = 0; n < cols_; ++n) {
      if (at(r, n) == 1) {
        out[n] = r;
      }
    }
  }
  return out;
}

std::vector<int> SequenceMatrix::slots() const
{
  std::vector<int> out(rows_, -1);
  for (int r = 0; r < rows_; ++r) {
    for (int n = 0; n < cols_; ++n) {
      if (at(r, n) == 1) {
        out[r] = n;
      }
    }
  }
  return out;
}

bool is_assignment(const SequenceMatrix & c)
{
  if (c.rows() != c.cols()) {
    throw ShapeError("sequence matrix must be square");
  }
  const int n = c.rows();
  for (int i = 0; i < n; ++i) {
    int row_sum = 0;
    int col_sum = 0;
    for (int j = 0; j < n; ++j) {
      row_sum += c.at(i, j);
      col_sum += c.at(j, i);
    }
    if (row_sum != 1 || col_sum != 1) {
      return false;
    }
  }
  return true;
}

bool is_feasible(const SequenceMatrix & c)
{
  if (!is_assignment(c)) {
    return false;
  }
  const int n = c.rows();
  for (int i = 1; i < n; ++i) {
    for (int slot = 0; slot < n; ++slot) {
      int later = 0;
      for (int l = slot + 1; l < n; ++l) {
        later += c.at(i - 1, l);
      }
      if (c.at(i, slot) > 1 - later) {
        return false;
      }
    }
  }
  return true;
}

bool is_feasible(const SequenceMatrix & c, std::span<const std::pair<int, int>> precedence)
{
  if (!is_assignment(c)) {
    return false;
  }
  const auto slot = c.slots();
  for (const auto & [ahead, behind] : precedence) {
    if (ahead < 0 || behind < 0 || ahead >= c.rows() || behind >= c.rows()) {
      throw ShapeError("precedence pair refers to a missing row");
    }
    if (slot[ahead] > slot[behind]) {
      return false;
    }
  }
  return true;
}

void SequenceWeights::validate() const
{
  const double w[] = {alpha1, alpha2, alpha3, alpha4, B, M};
  for (double x : w) {
    if (!(x >= 0.0)) {
      throw std::invalid_argument("sequence weights must be non-negative");
    }
  }
  if (alpha1 + alpha2 + alpha3 + alpha4 == 0.0) {
    throw std::invalid_argument("at least one objective weight must be positive");
  }
}

double spacing_deviation(const SequenceMatrix & c, const PlatoonSnapshot & snapshot, int slot)
{
  require_square(c, snapshot);
  if (slot < 0 || slot + 1 >= c.cols()) {
    throw std::out_of_range("slot " + std::to_string(slot) + " has no successor");
  }
  const auto order = c.order();
  const PlatoonMember & ahead = snapshot.members.at(order[slot]);
  const PlatoonMember & behind = snapshot.members.at(order[slot + 1]);
  return ahead.z - behind.z - behind.desired_spacing;
}

Indicators deviation_indicators(
  std::span<const double> spacing_terms, std::span<const double> speed_terms)
{
  if (spacing_terms.size() != speed_terms.size()) {
    throw ShapeError("indicator inputs differ in length");
  }
  Indicators out;
  for (std::size_t n = 0; n < spacing_terms.size(); ++n) {
    const int y_d = sign_indicator(spacing_terms[n]);
    const int y_v = sign_indicator(speed_terms[n]);
    out.y_spacing.push_back(y_d);
    out.y_speed.push_back(y_v);
    out.chi.push_back(y_d - y_v);
  }
  return out;
}

void indicator_terms(
  const SequenceMatrix & c, const PlatoonSnapshot & snapshot, std::vector<double> & spacing_terms,
  std::vector<double> & speed_terms)
{
  require_square(c, snapshot);
  const auto order = c.order();
  spacing_terms.clear();
  speed_terms.clear();
  for (int n = 0; n + 1 < c.cols(); ++n) {
    const PlatoonMember & ahead = snapshot.members[order[n]];
    const PlatoonMember & behind = snapshot.members[order[n + 1]];
    spacing_terms.push_back(spacing_term(ahead, behind, snapshot));
    speed_terms.push_back(behind.v_hat - ahead.v_hat);
  }
}

std::vector<TravelTime> travel_times(const SequenceMatrix & c, const PlatoonSnapshot & snapshot)
{
  require_square(c, snapshot);
  const auto order = c.order();
  std::vector<TravelTime> out(snapshot.size());
  double previous = -std::numeric_limits<double>::infinity();
  for (int n = 0; n < c.cols(); ++n) {
    const int row = order[n];
    const PlatoonMember & m = snapshot.members[row];
    const double free = free_arrival(m, snapshot);
    TravelTime & t = out[row];
    t.entry_merge = std::max(0.0, free);
    double arrival = free;
    if (m.z < 0.0 && n > 0) {
      arrival = std::max(free, previous + m.desired_spacing / snapshot.v_ref);
    }
    t.delay = arrival - free;
    t.merge_arrival = arrival;
    t.merge_exit = m.merge_to_exit / snapshot.v_ref;
    t.travel = t.entry_merge + t.delay + t.merge_exit;
    previous = arrival;
  }
  return out;
}

TravelTime travel_time_estimate(int row, const SequenceMatrix & c, const PlatoonSnapshot & snapshot)
{
  return travel_times(c, snapshot).at(row);
}

DensityTerms density_terms(std::span<const int> counts, std::span<const double> segment_lengths)
{
  if (counts.size() != segment_lengths.size() || counts.empty()) {
    throw ShapeError("one count per segment is required");
  }
  DensityTerms d;
  double total_n = 0.0;
  double total_l = 0.0;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    if (!(segment_lengths[j] > 0.0)) {
      throw std::invalid_argument("segment lengths must be positive");
    }
    d.rho.push_back(counts[j] / segment_lengths[j]);
    total_n += counts[j];
    total_l += segment_lengths[j];
  }
  d.mean = total_n / total_l;
  for (double r : d.rho) {
    d.psi.push_back(std::abs(r - d.mean));
  }
  return d;
}

std::vector<int> segment_counts(
  const SequenceMatrix & c, const PlatoonSnapshot & snapshot, std::span<const TravelTime> times)
{
  require_square(c, snapshot);
  std::vector<int> counts = snapshot.base_counts;
  if (counts.size() != snapshot.segment_lengths.size()) {
    throw ShapeError("one base count per segment is required");
  }
  for (int row = 0; row < snapshot.size(); ++row) {
    const PlatoonMember & m = snapshot.members[row];
    if (m.z >= 0.0 || times[row].merge_arrival <= snapshot.entry_window) {
      counts.at(snapshot.segment_after) += 1;
    } else if (m.segment_before >= 0) {
      counts.at(m.segment_before) += 1;
    }
  }
  return counts;
}

ObjectiveTerms objective_terms(
  const SequenceMatrix & c, const PlatoonSnapshot & snapshot, const SequenceWeights & weights)
{
  require_square(c, snapshot);
  if (!is_feasible(c, snapshot.precedence)) {
    throw InfeasibleError("sequence matrix violates the assignment or precedence constraints");
  }
  ObjectiveTerms t;
  const auto order = c.order();
  for (int n = 0; n + 1 < c.cols(); ++n) {
    double sp = 0.0;
    double mx = 0.0;
    pair_cost(snapshot.members[order[n]], snapshot.members[order[n + 1]], snapshot, weights, sp, mx);
    t.spacing += sp;
    t.mixed += mx;
  }
  const auto times = travel_times(c, snapshot);
  const int n = snapshot.size();
  if (n > 0) {
    double sum = 0.0;
    for (int slot = 0; slot < n; ++slot) {
      sum += times[order[slot]].travel;
    }
    t.travel = weights.alpha3 * sum / n;
  }
  if (!snapshot.segment_lengths.empty()) {
    const auto counts = segment_counts(c, snapshot, times);
    const auto d = density_terms(counts, snapshot.segment_lengths);
    t.density = weights.alpha4 * std::accumulate(d.psi.begin(), d.psi.end(), 0.0);
  }
  t.total = t.spacing + t.mixed + t.travel + t.density;
  return t;
}

double objective(
  const SequenceMatrix & c, const PlatoonSnapshot & snapshot, const SequenceWeights & weights)
{
  return objective_terms(c, snapshot, weights).total;
}

std::vector<int> greedy_order(const PlatoonSnapshot & snapshot)
{
  const int n = snapshot.size();
  std::vector<int> pending_before(n, 0);
  for (const auto & [ahead, behind] : snapshot.precedence) {
    ++pending_before.at(behind);
  }
  std::vector<bool> placed(n, false);
  std::vector<int> order;
  for (int slot = 0; slot < n; ++slot) {
    int pick = -1;
    for (int r = 0; r < n; ++r) {
      if (placed[r] || pending_before[r] > 0) {
        continue;
      }
      if (pick < 0) {
        pick = r;
        continue;
      }
      const auto & a = snapshot.members[r];
      const auto & b = snapshot.members[pick];
      if (a.z > b.z || (a.z == b.z && a.id < b.id)) {
        pick = r;
      }
    }
    if (pick < 0) {
      throw InfeasibleError("precedence pairs contain a cycle");
    }
    placed[pick] = true;
    order.push_back(pick);
    for (const auto & [ahead, behind] : snapshot.precedence) {
      if (ahead == pick) {
        --pending_before[behind];
      }
    }
  }
  return order;
}

namespace
{

class BranchAndBound
{
public:
  BranchAndBound(const PlatoonSnapshot & s, const SequenceWeights & w) : s_(s), w_(w), n_(s.size())
  {
    by_id_.resize(n_);
    std::iota(by_id_.begin(), by_id_.end(), 0);
    std::sort(by_id_.begin(), by_id_.end(), [&](int a, int b) {
      return s_.members[a].id < s_.members[b].id;
    });
    pending_before_.assign(n_, 0);
    for (const auto & [ahead, behind] : s_.precedence) {
      ++pending_before_.at(behind);
    }
    placed_.assign(n_, false);
  }

  SequenceResult run()
  {
    order_.clear();
    dfs(0.0, -std::numeric_limits<double>::infinity());
    SequenceResult r;
    if (best_order_.empty()) {
      throw InfeasibleError("no feasible sequence");
    }
    r.order = best_order_;
    r.matrix = SequenceMatrix::from_order(best_order_);
    r.objective = best_;
    r.nodes = nodes_;
    return r;
  }

private:
  void dfs(double bound, double previous_arrival)
  {
    ++nodes_;
    const int slot = static_cast<int>(order_.size());
    if (slot == n_) {
      const SequenceMatrix c = SequenceMatrix::from_order(order_);
      const double value = objective(c, s_, w_);
      if (value < best_ - 1e-12) {
        best_ = value;
        best_order_ = order_;
      }
      return;
    }
    for (int row : by_id_) {
      if (placed_[row] || pending_before_[row] > 0) {
        continue;
      }
      const PlatoonMember & m = s_.members[row];
      double add = 0.0;
      if (slot > 0) {
        double sp = 0.0;
        double mx = 0.0;
        add += pair_cost(s_.members[order_.back()], m, s_, w_, sp, mx);
      }
      const double free = free_arrival(m, s_);
      double arrival = free;
      if (m.z < 0.0 && slot > 0) {
        arrival = std::max(free, previous_arrival + m.desired_spacing / s_.v_ref);
      }
      const double travel = std::max(0.0, free) + (arrival - free) + m.merge_to_exit / s_.v_ref;
      add += w_.alpha3 * travel / n_;
      // Density terms are non-negative, so the committed part is a valid lower bound.
      if (bound + add > best_ + 1e-9) {
        continue;
      }
      place(row);
      dfs(bound + add, arrival);
      unplace(row);
    }
  }

  void place(int row)
  {
    placed_[row] = true;
    order_.push_back(row);
    for (const auto & [ahead, behind] : s_.precedence) {
      if (ahead == row) {
        --pending_before_[behind];
      }
    }
  }

  void unplace(int row)
  {
    placed_[row] = false;
    order_.pop_back();
    for (const auto & [ahead, behind] : s_.precedence) {
      if (ahead == row) {
        ++pending_before_[behind];
      }
    }
  }

  const PlatoonSnapshot & s_;
  const SequenceWeights & w_;
  int n_;
  std::vector<int> by_id_;
  std::vector<int> pending_before_;
  std::vector<bool> placed_;
  std::vector<int> order_;
  std::vector<int> best_order_;
  double best_ = std::numeric_limits<double>::infinity();
  long nodes_ = 0;
};

}  // namespace

SequenceResult solve_sequence(
  const PlatoonSnapshot & snapshot, const SequenceWeights & weights, int cap)
{
  weights.validate();
  const int n = snapshot.size();
  if (n < 1) {
    throw ShapeError("empty platoon");
  }
  if (n > cap) {
    SequenceResult r;
    r.order = greedy_order(snapshot);
    r.matrix = SequenceMatrix::from_order(r.order);
    r.objective = objective(r.matrix, snapshot, weights);
    r.degraded = true;
    return r;
  }
  return BranchAndBound(snapshot, weights).run();
}

}  // namespace roundabout::sequencer
