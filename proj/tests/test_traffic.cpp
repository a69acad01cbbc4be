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

#include "roundabout/traffic.hpp"

#include "doctest.h"

#include <vector>

using namespace roundabout;
using namespace roundabout::traffic;

TEST_CASE("time to collision")
{
  CHECK(*ttc(100.0, 60.0, 20.0, 10.0) == doctest::Approx(4.0));
  CHECK(*ttc_signed(100.0, 60.0, 10.0, 20.0) == doctest::Approx(-4.0));
  CHECK_FALSE(ttc(100.0, 60.0, 10.0, 20.0).has_value());
  CHECK_FALSE(ttc(100.0, 60.0, 10.0, 10.0).has_value());
  CHECK(in_conflict(1.0, 2.5));
  CHECK_FALSE(in_conflict(4.0, 2.5));
  CHECK_FALSE(in_conflict(std::nullopt, 2.5));
}

TEST_CASE("neighbors on the merge axis")
{
  const std::vector<AxisEntry> one{{7, -3.0}};
  const auto alone = identify_neighbors(7, 0, one);
  CHECK_FALSE(alone.preceding.has_value());
  CHECK_FALSE(alone.following.has_value());

  const std::vector<AxisEntry> three{{1, -10.0}, {2, -25.0}, {3, -40.0}};
  const auto b = identify_neighbors(2, 0, three);
  CHECK(*b.preceding == 1);
  CHECK(*b.following == 3);

  const std::vector<AxisEntry> tie{{5, -10.0}, {4, -10.0}};
  CHECK(*identify_neighbors(5, 0, tie).preceding == 4);
}

TEST_CASE("neighbor relations are acyclic")
{
  const std::vector<AxisEntry> e{{3, -5.0}, {1, -5.0}, {2, -12.0}, {9, 0.0}};
  const auto order = order_on_axis(e);
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto n = identify_neighbors(order[i].id, 0, e);
    if (i > 0) {
      CHECK(*n.preceding == order[i - 1].id);
    }
    if (i + 1 < order.size()) {
      CHECK(*n.following == order[i + 1].id);
    }
  }
}

TEST_CASE("poisson arrivals")
{
  ArrivalParams p;
  p.vehicle_cap = 1000000;
  ArrivalProcess a(p, 3, 5, 0.1);
  long total = 0;
  for (long k = 0; k < 100000; ++k) {
    for (const auto & v : a.draw(k)) {
      total += v.entry == 0 ? 1 : 0;
    }
  }
  // 396 veh/h over 10^4 s is 1100 with a standard deviation of 33.
  CHECK(total >= 1040);
  CHECK(total <= 1160);
}

TEST_CASE("penetration zero gives only unconnected vehicles")
{
  ArrivalParams p;
  p.penetration = 0.0;
  ArrivalProcess a(p, 3, 1, 0.1);
  for (long k = 0; k < 5000; ++k) {
    for (const auto & v : a.draw(k)) {
      CHECK(v.category == Category::kHdv);
      CHECK(v.exit != v.entry);
    }
  }
}

TEST_CASE("arrivals are reproducible and penetration does not shift them")
{
  ArrivalParams p;
  ArrivalParams q = p;
  q.penetration = 0.9;
  ArrivalProcess a(p, 3, 11, 0.1);
  ArrivalProcess b(p, 3, 11, 0.1);
  ArrivalProcess c(q, 3, 11, 0.1);
  for (long k = 0; k < 3000; ++k) {
    const auto x = a.draw(k);
    const auto y = b.draw(k);
    const auto z = c.draw(k);
    REQUIRE(x.size() == y.size());
    REQUIRE(x.size() == z.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      CHECK(x[i].id == y[i].id);
      CHECK(x[i].category == y[i].category);
      CHECK(x[i].exit == z[i].exit);
      CHECK(x[i].entry == z[i].entry);
    }
  }
}

TEST_CASE("arrival rate conversion")
{
  CHECK(396.0 * 0.1 / 3600.0 == doctest::Approx(0.011));
}

TEST_CASE("cruise law and braking override")
{
  const HdvParams p;
  const DynamicsLimits lim;
  CHECK(hdv_accel(15.0, std::nullopt, p, lim) == doctest::Approx(0.0));
  CHECK(hdv_accel(10.0, std::nullopt, p, lim) == doctest::Approx(5.0));
  CHECK(hdv_accel(15.0, LeaderInfo{5.0, 15.0}, p, lim) < 0.0);
}
