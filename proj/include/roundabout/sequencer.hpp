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

#ifndef ROUNDABOUT__SEQUENCER_HPP_
#define ROUNDABOUT__SEQUENCER_HPP_

#include <cstdint>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace roundabout::sequencer
{

class ShapeError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

class InfeasibleError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// Binary assignment of vehicles (rows) to virtual car-following slots (columns).
class SequenceMatrix
{
public:
  SequenceMatrix() = default;
  SequenceMatrix(int rows, int cols);
  explicit SequenceMatrix(int n) : SequenceMatrix(n, n) {}

  static SequenceMatrix identity(int n);
  /// order[n] = row placed in slot n.
  static SequenceMatrix from_order(std::span<const int> order);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  int at(int row, int slot) const { return cells_.at(index(row, slot)); }
  void set(int row, int slot, int value);

  /// Row in each slot; -1 for an empty column.
  std::vector<int> order() const;
  /// Slot of each row; -1 for an empty row.
  std::vector<int> slots() const;

  bool operator==(const SequenceMatrix &) const = default;

private:
  std::size_t index(int row, int slot) const;

  int rows_ = 0;
  int cols_ = 0;
  std::vector<std::uint8_t> cells_;
};

/// Every row and every column sums to one.
bool is_assignment(const SequenceMatrix & c);

/// Assignment constraints plus the precedence rule taken literally over consecutive rows:
/// row i may not sit ahead of row i - 1.
bool is_feasible(const SequenceMatrix & c);

/// Assignment constraints plus explicit precedence pairs (a, b): row a sits ahead of row b.
/// Built from the same-stream predecessor, this is the precedence rule with "i - 1"
/// read as the vehicle ahead in the same approach.
bool is_feasible(const SequenceMatrix & c, std::span<const std::pair<int, int>> precedence);

struct PlatoonMember
{
  int id = 0;
  double z = 0.0;                 // delayed position on the merge axis, m
  double v_hat = 0.0;             // delayed speed, m/s
  double desired_spacing = 10.0;  // to its slot predecessor, m
  double merge_to_exit = 0.0;     // remaining route length after the merge point, m
  // Segment this vehicle counts in until it is expected through the merge point;
  // -1 for ramp vehicles that are not on the ring yet.
  int segment_before = -1;
};

struct PlatoonSnapshot
{
  std::vector<PlatoonMember> members;
  std::vector<std::pair<int, int>> precedence;  // (row ahead, row behind)
  std::vector<double> segment_lengths;
  std::vector<int> base_counts;  // ring vehicles outside the platoon, per segment
  int segment_after = 0;         // segment downstream of the merge point
  double entry_window = 2.0;     // s; expected through the merge point within this -> counted after
  double v_ref = 15.0;
  double min_speed = 1.0;  // floor on speeds used as divisors
  // Take the sign of (spacing deviation - desired spacing) as printed; false drops the
  // second subtraction.
  bool subtract_desired_twice = true;

  int size() const { return static_cast<int>(members.size()); }
};

struct SequenceWeights
{
  double alpha1 = 1.0;
  double alpha2 = 1.0;
  double alpha3 = 0.5;
  double alpha4 = 10.0;
  double B = 1.0;
  double M = 1.0;

  void validate() const;
};

/// z(slot) - z(slot + 1) - desired spacing of slot + 1. Slots are 0-based.
double spacing_deviation(const SequenceMatrix & c, const PlatoonSnapshot & snapshot, int slot);

struct Indicators
{
  std::vector<int> y_spacing;
  std::vector<int> y_speed;
  std::vector<int> chi;
};

/// Sign indicators per slot pair: +1 for a negative term, -1 for a positive one, 0 at zero.
/// spacing_terms[n] is the spacing-deviation expression, speed_terms[n] = v(n+1) - v(n).
Indicators deviation_indicators(
  std::span<const double> spacing_terms, std::span<const double> speed_terms);

/// The indicator inputs for a given assignment.
void indicator_terms(
  const SequenceMatrix & c, const PlatoonSnapshot & snapshot, std::vector<double> & spacing_terms,
  std::vector<double> & speed_terms);

struct TravelTime
{
  double entry_merge = 0.0;
  double delay = 0.0;
  double merge_exit = 0.0;
  double travel = 0.0;
  double merge_arrival = 0.0;  // s from now, after the slot wait
};

/// Per-row estimates. Arrivals chain through the slots: each vehicle reaches the merge
/// point no earlier than its slot predecessor plus desired spacing / v_ref.
std::vector<TravelTime> travel_times(const SequenceMatrix & c, const PlatoonSnapshot & snapshot);
TravelTime travel_time_estimate(int row, const SequenceMatrix & c, const PlatoonSnapshot & snapshot);

struct DensityTerms
{
  std::vector<double> rho;
  double mean = 0.0;
  std::vector<double> psi;
};

DensityTerms density_terms(std::span<const int> counts, std::span<const double> segment_lengths);

/// Segment counts N_j for an assignment.
std::vector<int> segment_counts(
  const SequenceMatrix & c, const PlatoonSnapshot & snapshot, std::span<const TravelTime> times);

struct ObjectiveTerms
{
  double spacing = 0.0;
  double mixed = 0.0;
  double travel = 0.0;
  double density = 0.0;
  double total = 0.0;
};

ObjectiveTerms objective_terms(
  const SequenceMatrix & c, const PlatoonSnapshot & snapshot, const SequenceWeights & weights);

/// Throws InfeasibleError for a matrix violating the snapshot's constraints.
double objective(
  const SequenceMatrix & c, const PlatoonSnapshot & snapshot, const SequenceWeights & weights);

struct SequenceResult
{
  SequenceMatrix matrix;
  std::vector<int> order;  // row per slot
  double objective = 0.0;
  long nodes = 0;
  bool degraded = false;
};

/// Nearest-first order honouring the precedence pairs.
std::vector<int> greedy_order(const PlatoonSnapshot & snapshot);

/// Exact minimizer by depth-first branch-and-bound over slots. Candidates are tried in
/// ascending vehicle id and only strictly better leaves replace the incumbent, so ties
/// resolve to the lexicographically smallest id sequence. Above `cap` members the
/// greedy order is returned and flagged degraded.
SequenceResult solve_sequence(
  const PlatoonSnapshot & snapshot, const SequenceWeights & weights, int cap = 8);

}  // namespace roundabout::sequencer

#endif  // ROUNDABOUT__SEQUENCER_HPP_
