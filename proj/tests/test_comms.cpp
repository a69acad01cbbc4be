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

#include "doctest.h"

#include <sstream>

using namespace roundabout;
using namespace roundabout::comms;

TEST_CASE("delay indicator boundary")
{
  CHECK(delay_indicator(0, 3) == 1);
  CHECK(delay_indicator(3, 3) == 1);
  CHECK(delay_indicator(4, 3) == 0);
}

TEST_CASE("one-step prediction")
{
  VehicleState s;
  CHECK(predict_state(s, {}, 0.1).x == 0.0);
  s.v = 10.0;
  CHECK(predict_state(s, {}, 0.1).x == doctest::Approx(1.0));
  // The affine form is exact at the linearization point.
  const VehicleState lin = predict_state_linear(s, {}, s, {}, 0.1);
  CHECK(lin.x == doctest::Approx(1.0));
  CHECK(lin.v == doctest::Approx(10.0));
}

TEST_CASE("fusion selects delivered or predicted state")
{
  VehicleState a;
  a.x = 1.0;
  VehicleState b;
  b.x = 2.0;
  CHECK(fuse(1, a, b).x == 1.0);
  CHECK(fuse(0, a, b).x == 2.0);
  ControlInput cur{1.0, 0.0, 5};
  ControlInput prev{-1.0, 0.0, 4};
  CHECK(effective_input(1, cur, prev).accel == 1.0);
  CHECK(effective_input(0, cur, prev).accel == -1.0);
}

TEST_CASE("stale neighbors are advanced by chained predictions")
{
  FusedNeighborView view(2, 0.1, {}, true);
  StateMessage m;
  m.sender = 4;
  m.state.v = 10.0;
  m.input = {0.0, 0.0, 0};
  m.sent_at = 0;
  m.deliver_at = 1;
  const std::vector<StateMessage> batch{m};
  view.ingest(batch);
  view.refresh(1);
  REQUIRE(view.find(4) != nullptr);
  CHECK(view.find(4)->delta == 1);
  CHECK(view.find(4)->state.x == doctest::Approx(0.0));
  view.refresh(2);
  view.refresh(3);
  CHECK(view.find(4)->delta == 0);
  // Age 3 > threshold: predicted once from the previous fused state.
  CHECK(view.find(4)->state.x == doctest::Approx(1.0));
  view.refresh(4);
  CHECK(view.find(4)->state.x == doctest::Approx(2.0));
}

TEST_CASE("without compensation the freshest state is used as-is")
{
  FusedNeighborView view(0, 0.1, {}, false);
  StateMessage m;
  m.sender = 1;
  m.state.v = 10.0;
  m.sent_at = 0;
  const std::vector<StateMessage> batch{m};
  view.ingest(batch);
  view.refresh(5);
  CHECK(view.find(1)->state.x == 0.0);
}

TEST_CASE("fixed zero delay delivers in the same tick")
{
  DelayModel model;
  model.kind = DelayKind::kFixed;
  model.fixed_ticks = 0;
  DelayChannel ch(model, 1, 0.1);
  ch.add_node(1);
  ch.add_node(2);
  ch.connect(1, 2);
  VehicleState s;
  s.id = 1;
  ch.broadcast(1, s, {}, 7);
  const auto got = ch.poll(2, 7);
  REQUIRE(got.size() == 1);
  CHECK(got[0].delay() == 0);
  CHECK(ch.mean_delay() == 0.0);
}

TEST_CASE("fixed two-tick delay gives a 0.2 s mean")
{
  DelayModel model;
  model.kind = DelayKind::kFixed;
  model.fixed_ticks = 2;
  DelayChannel ch(model, 1, 0.1);
  ch.add_node(1);
  ch.add_node(2);
  ch.connect(1, 2);
  for (long k = 0; k < 20; ++k) {
    ch.broadcast(1, {}, {}, k);
    const auto got = ch.poll(2, k);
    for (const auto & m : got) {
      CHECK(m.delay() == 2);
    }
  }
  CHECK(ch.mean_delay() == doctest::Approx(0.2));
}

TEST_CASE("uniform delay mean and per-link order")
{
  DelayModel model;
  model.kind = DelayKind::kUniform;
  model.min_ticks = 1;
  model.max_ticks = 3;
  DelayChannel ch(model, 42, 0.1, 10000);
  ch.add_node(1);
  ch.add_node(2);
  ch.connect(1, 2);
  long last_sent = -1;
  double sum = 0.0;
  int n = 0;
  for (long k = 0; k < 10010; ++k) {
    if (k < 10000) {
      ch.broadcast(1, {}, {}, k);
    }
    for (const auto & m : ch.poll(2, k)) {
      CHECK(m.sent_at > last_sent);
      last_sent = m.sent_at;
      sum += m.delay();
      ++n;
    }
  }
  CHECK(n == 10000);
  CHECK(ch.mean_delay() == doctest::Approx(0.2).epsilon(0.05));
  // FIFO shortens some draws, so the realized mean sits slightly above the draw mean.
  CHECK(sum / n * 0.1 == doctest::Approx(0.2).epsilon(0.1));
}

TEST_CASE("bad topology and models are rejected")
{
  DelayModel bad;
  bad.kind = DelayKind::kUniform;
  bad.min_ticks = 3;
  bad.max_ticks = 1;
  CHECK_THROWS(DelayChannel(bad, 1, 0.1));
  DelayChannel ch({}, 1, 0.1);
  ch.add_node(1);
  CHECK_THROWS_AS(ch.connect(1, 9), TopologyError);
  ch.add_node(2);
  CHECK_THROWS_AS(ch.connect(1, 2, -1.0), TopologyError);
}

TEST_CASE("trace csv lists every delivery")
{
  DelayChannel ch({}, 3, 0.1);
  ch.set_trace(true);
  ch.add_node(1);
  ch.add_node(2);
  ch.connect(1, 2);
  ch.broadcast(1, {}, {}, 0);
  ch.poll(2, 5);
  std::ostringstream out;
  ch.write_trace_csv(out);
  CHECK(out.str().rfind("tick,sender,receiver,sent_at,deliver_at\n", 0) == 0);
}
