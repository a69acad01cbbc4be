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

#ifndef ROUNDABOUT__COMMS_HPP_
#define ROUNDABOUT__COMMS_HPP_

#include "roundabout/dynamics.hpp"

#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <ostream>
#include <random>
#include <set>
#include <span>
#include <stdexcept>
#include <vector>

namespace roundabout::comms
{

class TopologyError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// 1 when the observed delay is within the threshold, else 0.
int delay_indicator(long delay_ticks, long threshold_ticks);

/// One-step prediction with the stale input, through the nonlinear model.
VehicleState predict_state(
  const VehicleState & state, const ControlInput & previous_input, double dt,
  const DynamicsLimits & limits = {});

/// First-order prediction around (nominal, nominal_input):
/// step(nominal) + F (state - nominal) + G (input - nominal_input).
VehicleState predict_state_linear(
  const VehicleState & nominal, const ControlInput & nominal_input, const VehicleState & state,
  const ControlInput & input, double dt);

/// Exact selection between the delivered and the predicted state.
VehicleState fuse(int delta, const VehicleState & delivered, const VehicleState & predicted);
ControlInput effective_input(int delta, const ControlInput & current, const ControlInput & previous);

struct StateMessage
{
  int sender = 0;
  int receiver = 0;
  VehicleState state{};
  ControlInput input{};
  long sent_at = 0;
  long deliver_at = 0;

  long delay() const { return deliver_at - sent_at; }
};

enum class DelayKind { kFixed, kUniform };

struct DelayModel
{
  DelayKind kind = DelayKind::kUniform;
  int fixed_ticks = 0;
  int min_ticks = 1;
  int max_ticks = 3;
  int threshold_ticks = 2;
};

struct TraceRecord
{
  long tick = 0;
  int sender = 0;
  int receiver = 0;
  long sent_at = 0;
  long deliver_at = 0;
};

/// Simulated V2X medium: directed weighted links, each a FIFO of in-flight messages.
///
/// Per-link delivery ticks are monotone, so a message never overtakes an earlier one on
/// the same link. Nothing is dropped.
class DelayChannel
{
public:
  DelayChannel(DelayModel model, std::uint64_t seed, double dt, std::size_t window = 50);

  void add_node(int id);
  /// Removes the node, its links and everything still in flight to or from it.
  void remove_node(int id);
  bool has_node(int id) const { return nodes_.count(id) != 0; }
  void connect(int from, int to, double weight = 1.0);
  double weight(int from, int to) const;

  void send(int from, int to, const VehicleState & state, const ControlInput & input, long tick);
  /// Sends to every out-link of `sender`, in ascending receiver id.
  void broadcast(int sender, const VehicleState & state, const ControlInput & input, long tick);
  /// Messages with deliver_at <= tick not yet consumed, in (sender, send) order.
  std::vector<StateMessage> poll(int receiver, long tick);

  /// Mean delivery delay in seconds over the last `window` delivered messages.
  double mean_delay() const;
  const DelayModel & model() const { return model_; }
  double dt() const { return dt_; }

  void set_trace(bool enabled) { trace_enabled_ = enabled; }
  const std::vector<TraceRecord> & trace() const { return trace_; }
  void write_trace_csv(std::ostream & out) const;

private:
  struct Link
  {
    double weight = 1.0;
    std::deque<StateMessage> pending;
    long last_deliver = std::numeric_limits<long>::min();
  };

  long draw_delay();
  void require_node(int id) const;

  DelayModel model_;
  double dt_;
  std::size_t window_;
  std::mt19937_64 rng_;
  std::set<int> nodes_;
  std::map<int, std::map<int, Link>> inbound_;  // receiver -> sender -> link
  std::map<int, std::set<int>> outbound_;       // sender -> receivers
  std::deque<long> recent_delays_;
  long recent_sum_ = 0;
  bool trace_enabled_ = false;
  std::vector<TraceRecord> trace_;
};

struct NeighborView
{
  VehicleState state{};  // fused state
  ControlInput input{};  // effective input
  int delta = 1;
  long age = 0;  // ticks since the freshest delivered message was sent
};

/// Per-receiver fused picture of every sender heard from so far.
///
/// With compensation on, a stale sender (delta = 0) is advanced by chained one-step
/// predictions from the previous fused state with the last delivered input. With
/// compensation off the freshest delivered state is used as-is.
class FusedNeighborView
{
public:
  FusedNeighborView(
    long threshold_ticks, double dt, DynamicsLimits limits, bool compensate);

  void ingest(std::span<const StateMessage> messages);
  void refresh(long tick);
  const NeighborView * find(int sender) const;
  void forget(int sender);
  const std::map<int, NeighborView> & views() const { return views_; }

private:
  long threshold_;
  double dt_;
  DynamicsLimits limits_;
  bool compensate_;
  std::map<int, StateMessage> freshest_;
  std::map<int, NeighborView> views_;
};

}  // namespace roundabout::comms

#endif  // ROUNDABOUT__COMMS_HPP_
