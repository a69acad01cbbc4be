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

#include "roundabout/comms.hpp"

#include "roundabout/geometry.hpp"

#include <algorithm>
#include <string>

namespace roundabout::comms
{

int delay_indicator(long delay_ticks, long threshold_ticks)
{
  return delay_ticks <= threshold_ticks ? 1 : 0;
}

VehicleState predict_state(
  const VehicleState & state, const ControlInput & previous_input, double dt,
  const DynamicsLimits & limits)
{
  return dynamics::step(state, previous_input, dt, limits);
}

VehicleState predict_state_linear(
  const VehicleState & nominal, const ControlInput & nominal_input, const VehicleState & state,
  const ControlInput & input, double dt)
{
  dynamics::require_finite(state);
  dynamics::require_finite(input);
  const auto jac = dynamics::linearize(nominal, nominal_input, dt);
  const Eigen::Vector4d base = dynamics::step_unclamped(
    nominal.vector(), {nominal_input.accel, nominal_input.steer}, dt, nominal.wheelbase);
  const Eigen::Vector2d du{input.accel - nominal_input.accel, input.steer - nominal_input.steer};
  const Eigen::Vector4d next = base + jac.F * (state.vector() - nominal.vector()) + jac.G * du;

  VehicleState out = state;
  out.x = next(0);
  out.y = next(1);
  out.theta = geometry::normalize_angle(next(2));
  out.v = next(3);
  out.path_s = state.path_s + dt * state.v;
  return out;
}

VehicleState fuse(int delta, const VehicleState & delivered, const VehicleState & predicted)
{
  return delta == 1 ? delivered : predicted;
}

ControlInput effective_input(int delta, const ControlInput & current, const ControlInput & previous)
{
  return delta == 1 ? current : previous;
}

DelayChannel::DelayChannel(DelayModel model, std::uint64_t seed, double dt, std::size_t window)
: model_(model), dt_(dt), window_(window), rng_(seed)
{
  if (model.kind == DelayKind::kFixed && model.fixed_ticks < 0) {
    throw std::invalid_argument("fixed delay must be non-negative");
  }
  if (model.kind == DelayKind::kUniform &&
      (model.min_ticks < 0 || model.max_ticks < model.min_ticks))
  {
    throw std::invalid_argument("uniform delay needs 0 <= min <= max");
  }
  if (window == 0) {
    throw std::invalid_argument("delay window must be positive");
  }
}

void DelayChannel::require_node(int id) const
{
  if (!has_node(id)) {
    throw TopologyError("unknown node " + std::to_string(id));
  }
}

void DelayChannel::add_node(int id)
{
  nodes_.insert(id);
}

void DelayChannel::remove_node(int id)
{
  nodes_.erase(id);
  inbound_.erase(id);
  outbound_.erase(id);
  for (auto & [receiver, links] : inbound_) {
    links.erase(id);
  }
  for (auto & [sender, receivers] : outbound_) {
    receivers.erase(id);
  }
}

void DelayChannel::connect(int from, int to, double weight)
{
  require_node(from);
  require_node(to);
  if (!(weight >= 0.0)) {
    throw TopologyError("link weights must be non-negative");
  }
  inbound_[to][from].weight = weight;
  outbound_[from].insert(to);
}

double DelayChannel::weight(int from, int to) const
{
  const auto rit = inbound_.find(to);
  if (rit != inbound_.end()) {
    const auto lit = rit->second.find(from);
    if (lit != rit->second.end()) {
      return lit->second.weight;
    }
  }
  throw TopologyError("no link " + std::to_string(from) + "->" + std::to_string(to));
}

long DelayChannel::draw_delay()
{
  if (model_.kind == DelayKind::kFixed) {
    return model_.fixed_ticks;
  }
  std::uniform_int_distribution<long> dist(model_.min_ticks, model_.max_ticks);
  return dist(rng_);
}

void DelayChannel::send(
  int from, int to, const VehicleState & state, const ControlInput & input, long tick)
{
  require_node(from);
  require_node(to);
  auto rit = inbound_.find(to);
  if (rit == inbound_.end() || rit->second.count(from) == 0) {
    throw TopologyError("no link " + std::to_string(from) + "->" + std::to_string(to));
  }
  Link & link = rit->second.at(from);
  StateMessage msg{from, to, state, input, tick, tick + draw_delay()};
  msg.deliver_at = std::max(msg.deliver_at, link.last_deliver);
  link.last_deliver = msg.deliver_at;
  link.pending.push_back(msg);
}

void DelayChannel::broadcast(
  int sender, const VehicleState & state, const ControlInput & input, long tick)
{
  require_node(sender);
  const auto it = outbound_.find(sender);
  if (it == outbound_.end()) {
    return;
  }
  for (int receiver : it->second) {
    send(sender, receiver, state, input, tick);
  }
}

std::vector<StateMessage> DelayChannel::poll(int receiver, long tick)
{
  require_node(receiver);
  std::vector<StateMessage> out;
  const auto rit = inbound_.find(receiver);
  if (rit == inbound_.end()) {
    return out;
  }
  for (auto & [sender, link] : rit->second) {
    while (!link.pending.empty() && link.pending.front().deliver_at <= tick) {
      const StateMessage & msg = link.pending.front();
      recent_delays_.push_back(msg.delay());
      recent_sum_ += msg.delay();
      if (recent_delays_.size() > window_) {
        recent_sum_ -= recent_delays_.front();
        recent_delays_.pop_front();
      }
      if (trace_enabled_) {
        trace_.push_back({tick, msg.sender, msg.receiver, msg.sent_at, msg.deliver_at});
      }
      out.push_back(msg);
      link.pending.pop_front();
    }
  }
  return out;
}

double DelayChannel::mean_delay() const
{
  if (recent_delays_.empty()) {
    return 0.0;
  }
  return dt_ * static_cast<double>(recent_sum_) / static_cast<double>(recent_delays_.size());
}

void DelayChannel::write_trace_csv(std::ostream & out) const
{
  out << "tick,sender,receiver,sent_at,deliver_at\n";
  for (const auto & r : trace_) {
    out << r.tick << ',' << r.sender << ',' << r.receiver << ',' << r.sent_at << ','
        << r.deliver_at << '\n';
  }
}

FusedNeighborView::FusedNeighborView(
  long threshold_ticks, double dt, DynamicsLimits limits, bool compensate)
: threshold_(threshold_ticks), dt_(dt), limits_(limits), compensate_(compensate)
{
}

void FusedNeighborView::ingest(std::span<const StateMessage> messages)
{
  for (const auto & msg : messages) {
    auto it = freshest_.find(msg.sender);
    if (it == freshest_.end() || msg.sent_at >= it->second.sent_at) {
      freshest_[msg.sender] = msg;
    }
  }
}

void FusedNeighborView::refresh(long tick)
{
  for (const auto & [sender, msg] : freshest_) {
    const long age = tick - msg.sent_at;
    const int delta = delay_indicator(age, threshold_);
    auto prev = views_.find(sender);

    NeighborView view;
    view.age = age;
    view.delta = delta;
    if (!compensate_ || delta == 1) {
      view.state = msg.state;
      view.input = msg.input;
    } else if (prev != views_.end()) {
      view.state = predict_state(prev->second.state, prev->second.input, dt_, limits_);
      view.input = effective_input(delta, msg.input, prev->second.input);
    } else {
      view.state = predict_state(msg.state, msg.input, dt_, limits_);
      view.input = msg.input;
    }
    views_[sender] = view;
  }
}

const NeighborView * FusedNeighborView::find(int sender) const
{
  const auto it = views_.find(sender);
  return it == views_.end() ? nullptr : &it->second;
}

void FusedNeighborView::forget(int sender)
{
  freshest_.erase(sender);
  views_.erase(sender);
}

}  // namespace roundabout::comms
