#include "riskplan/policy.hpp"
#include "world_support.hpp"

#include <doctest.h>

#include <random>

using namespace riskplan;
using riskplan::testing::agent;
using riskplan::testing::straight_road;
using riskplan::testing::uniform;
using riskplan::testing::world_with;

namespace {

// Ego standing still at the origin facing +x, `steps` nodes deep.
TrajectoryTree parked_tree(int branches, int trunk, int tail, double speed = 0.0) {
  const BicycleDynamics dyn(VehicleParams{}, 0.2);
  StateVec x0 = StateVec::Zero();
  x0[kV] = speed;
  return TrajectoryTree::build(x0, std::vector<ControlVec>(static_cast<std::size_t>(trunk), ControlVec::Zero()),
                               std::vector<std::vector<ControlVec>>(static_cast<std::size_t>(branches),
                                                                    std::vector<ControlVec>(static_cast<std::size_t>(tail), ControlVec::Zero())),
                               dyn);
}

Scenario with_agent_at(int id, double probability, double x, double y, int steps) {
  Scenario s;
  s.id = id;
  s.probability = probability;
  AgentTrajectory a;
  a.id = 1;
  for (int t = 0; t <= steps; ++t) {
    s.ego.push_back(EgoState{});
    a.states.push_back(AgentState{x, y, 0.0, 0.0});
  }
  s.agents.push_back(a);
  return s;
}

std::vector<LaneId> lanes_of(const std::vector<PolicySpec>& ps, LateralPolicy kind) {
  std::vector<LaneId> out;
  for (const auto& p : ps)
    if (p.lateral == kind) out.push_back(p.target.front());
  return out;
}

}  // namespace

TEST_CASE("policy enumeration examples") {
  const Route route{{"R"}, 10.0, std::nullopt};
  SUBCASE("single lane, no blockers") {
    const auto ps = enumerate_policies(world_with(straight_road(false), 8.0, {}), route);
    REQUIRE(ps.size() == 3);
    for (int i = 0; i < 3; ++i) {
      CHECK(ps[static_cast<std::size_t>(i)].id == i);
      CHECK(ps[static_cast<std::size_t>(i)].lateral == LateralPolicy::LaneKeep);
    }
    CHECK(ps[0].name() == "LaneKeep-Maintain");
    CHECK(ps[1].name() == "LaneKeep-Accelerate");
    CHECK(ps[2].name() == "LaneKeep-Decelerate");
  }
  SUBCASE("two lanes") {
    const auto ps = enumerate_policies(world_with(straight_road(true), 8.0, {}), route);
    CHECK(ps.size() == 6);
    CHECK(lanes_of(ps, LateralPolicy::LaneChange) == std::vector<LaneId>{"L", "L", "L"});
    CHECK(ps[3].name() == "LaneChange(L)-Maintain");
  }
  SUBCASE("parked vehicle in the ego lane adds bypass options") {
    const auto w = world_with(straight_road(true), 8.0, {agent(1, 40.0, 0.0, 0.0)});
    const auto ps = enumerate_policies(w, route);
    CHECK(ps.size() == 9);
    const auto bypass = lanes_of(ps, LateralPolicy::Bypass);
    REQUIRE(bypass.size() == 3);
    for (const auto& p : ps) {
      if (p.lateral != LateralPolicy::Bypass) continue;
      // Clear of the blocker by the margin: 1.0 + 1.0 + 0.5 to the left.
      CHECK(p.lateral_offset == doctest::Approx(2.5));
    }
    // A moving vehicle or one in the other lane is not a blocker.
    CHECK(enumerate_policies(world_with(straight_road(true), 8.0, {agent(1, 40.0, 0.0, 5.0)}), route).size() == 6);
    CHECK(enumerate_policies(world_with(straight_road(true), 8.0, {agent(1, 40.0, 3.5, 0.0)}), route).size() == 6);
  }
  SUBCASE("stop point within range adds StopAt and the cap holds") {
    Route stop = route;
    stop.stop_point = Point2{60.0, 0.0};
    const auto w = world_with(straight_road(true), 8.0, {agent(1, 40.0, 0.0, 0.0)});
    const auto ps = enumerate_policies(w, stop);
    CHECK(ps.size() == 9);
    CHECK(ps[0].longitudinal == LongitudinalPolicy::StopAt);
    CHECK(ps[0].stop_s == doctest::Approx(w.map->reference_line({"R"}).project({60.0, 0.0}).s));
    // Route-leaving lane changes are dropped first.
    CHECK(lanes_of(ps, LateralPolicy::LaneChange).size() == 2);
    stop.stop_point = Point2{150.0, 0.0};
    CHECK(enumerate_policies(world_with(straight_road(true), 8.0, {}), stop).size() == 6);
  }
}

TEST_CASE("ego lane lookup while offset over an opposing lane") {
  std::vector<Lane> lanes{
      {"R", Polyline({{0.0, 0.0}, {200.0, 0.0}}), 3.5, 10.0, std::nullopt, std::nullopt, {}},
      {"O", Polyline({{200.0, 3.5}, {0.0, 3.5}}), 3.5, 10.0, std::nullopt, std::nullopt, {}}};
  auto w = world_with(std::make_shared<const LaneMap>(std::move(lanes)), 5.0, {});
  CHECK(current_lane(w) == "R");
  // Mid-bypass: outside R's strip and against O's direction.
  w.ego.y = 2.6;
  CHECK(current_lane(w) == "R");
  w.ego.y = 6.0;
  CHECK_THROWS_AS(current_lane(w), std::invalid_argument);
}

TEST_CASE("policy contexts") {
  const Route route{{"R"}, 10.0, std::nullopt};
  const auto w = world_with(straight_road(true), 8.0, {});
  const auto ps = enumerate_policies(w, route);
  CHECK(make_policy_context(w, ps[0], route).target_speed == doctest::Approx(8.0));
  CHECK(make_policy_context(w, ps[1], route).target_speed == doctest::Approx(11.0));
  CHECK(make_policy_context(w, ps[2], route).target_speed == doctest::Approx(5.0));
  const auto lc = make_policy_context(w, ps[3], route);
  CHECK(lc.corridor.size() == 2);
  CHECK(lc.reference.project({50.0, 3.5}).d == doctest::Approx(0.0));

  PolicySpec bypass = ps[0];
  bypass.lateral = LateralPolicy::Bypass;
  bypass.lateral_offset = 1.5;
  CHECK(make_policy_context(w, bypass, route).reference.project({50.0, 1.5}).d == doctest::Approx(0.0));

  PolicySpec bad = ps[0];
  bad.target = {"nowhere"};
  CHECK_THROWS_AS(make_policy_context(w, bad, route), std::invalid_argument);

  // Accelerate never exceeds the lane limit unless already above it.
  auto fast = w;
  fast.ego.v = 14.0;
  CHECK(make_policy_context(fast, ps[1], route).target_speed == doctest::Approx(15.0));
  fast.ego.v = 17.0;
  CHECK(make_policy_context(fast, ps[1], route).target_speed == doctest::Approx(17.0));
}

TEST_CASE("same behaviour ignores ids only") {
  PolicySpec a;
  a.id = 1;
  a.target = {"R"};
  PolicySpec b = a;
  b.id = 7;
  CHECK(a.same_behavior(b));
  b.longitudinal = LongitudinalPolicy::Accelerate;
  CHECK_FALSE(a.same_behavior(b));
  b = a;
  b.lateral_offset = 0.5;
  CHECK_FALSE(a.same_behavior(b));
}

TEST_CASE("lane edits and navigation cost") {
  CHECK(lane_edits({}, {}) == 0);
  CHECK(lane_edits({"a", "b"}, {"a", "b"}) == 0);
  CHECK(lane_edits({"a", "b", "c"}, {"a", "c"}) == 1);
  CHECK(lane_edits({"x"}, {"a", "b"}) == 2);
  CHECK(lane_edits({"kitten"}, {"sitting"}) == 1);

  const auto map = straight_road(true);
  const Route route{{"R"}, 10.0, std::nullopt};
  PolicySpec keep;
  keep.target = {"R"};
  PolicySpec change;
  change.lateral = LateralPolicy::LaneChange;
  change.target = {"L"};
  CHECK(navigation_cost(keep, route, *map, "R") == 0.0);
  CHECK(navigation_cost(change, route, *map, "R") == 1.0);
  // Back onto the route from the neighbouring lane.
  CHECK(navigation_cost(keep, route, *map, "L") == 0.0);
}

TEST_CASE("reward components") {
  const VehicleParams vp;
  SUBCASE("hand-built two-branch tree") {
    // Ego parked at the origin; branch 0 sees an agent 1.0 m ahead of its
    // bumper, branch 1 one 2.5 m ahead. Shortfalls below 3 m are 2.0 and 0.5.
    const auto plan = parked_tree(2, 2, 3);
    ScenarioTree st;
    st.branches = {with_agent_at(0, 0.7, 4.8 + 1.0, 0.0, 5), with_agent_at(1, 0.3, 4.8 + 2.5, 0.0, 5)};
    st.branch_step = 2;
    st.horizon_steps = 5;
    const auto r = evaluate_policy(PolicySpec{}, st, plan, 0.0, 0.0, 0.0, 3.0, 0.2, vp);
    CHECK(r.safety == doctest::Approx(0.7 * 2.0 + 0.3 * 0.5));
    CHECK(r.efficiency == doctest::Approx(0.0));
    CHECK(r.uncertainty == doctest::Approx((3.0 - 0.4) / 3.0));
  }
  SUBCASE("empty road at the desired speed") {
    const auto plan = parked_tree(1, 15, 10, 8.0);
    ScenarioTree st;
    Scenario s;
    s.probability = 1.0;
    st.branches = {s};
    st.branch_step = 15;
    st.horizon_steps = 25;
    const RewardWeights w;
    const auto r = evaluate_policy(PolicySpec{}, st, plan, 2.5, 0.0, 8.0, 3.0, 0.2, vp, w);
    CHECK(r.safety == 0.0);
    CHECK(r.efficiency == doctest::Approx(0.0));
    CHECK(r.navigation == 0.0);
    CHECK(r.uncertainty == doctest::Approx(0.0));
    CHECK(r.risk == doctest::Approx(0.1));
    CHECK(r.total == doctest::Approx(-(w.risk * r.risk + w.uncertainty * r.uncertainty)));
  }
  SUBCASE("efficiency prefers the desired speed") {
    ScenarioTree st;
    Scenario s;
    s.probability = 1.0;
    st.branches = {s};
    st.branch_step = 15;
    st.horizon_steps = 25;
    const auto r8 = evaluate_policy(PolicySpec{}, st, parked_tree(1, 15, 10, 8.0), 0.0, 0.0, 8.0, 3.0, 0.2, vp);
    const auto r6 = evaluate_policy(PolicySpec{}, st, parked_tree(1, 15, 10, 6.0), 0.0, 0.0, 8.0, 3.0, 0.2, vp);
    CHECK(r8.efficiency == doctest::Approx(0.0));
    CHECK(r6.efficiency == doctest::Approx(2.0));
    CHECK(r8.total > r6.total);
  }
  SUBCASE("terminal spread between branches") {
    const BicycleDynamics dyn(vp, 0.2);
    StateVec x0 = StateVec::Zero();
    x0[kV] = 5.0;
    // One branch brakes hard, one keeps going.
    const auto plan = TrajectoryTree::build(x0, {}, {std::vector<ControlVec>(10, ControlVec::Zero()),
                                                     std::vector<ControlVec>(10, ControlVec(-5.0, 0.0))}, dyn);
    ScenarioTree st;
    Scenario s;
    s.probability = 0.5;
    st.branches = {s, s};
    const auto r = evaluate_policy(PolicySpec{}, st, plan, 0.0, 0.0, 0.0, 3.0, 0.2, vp);
    const double gap = plan.branch_states(0).back()[kX] - plan.branch_states(1).back()[kX];
    CHECK(gap > 0.5);
    CHECK(r.uncertainty == doctest::Approx(1.0 + gap / 10.0));
  }
}

TEST_CASE("reward total is the negated weighted sum") {
  std::mt19937_64 rng(21);
  for (int i = 0; i < 200; ++i) {
    PolicyReward r{uniform(rng, 0, 3), uniform(rng, 0, 3), uniform(rng, 0, 1), uniform(rng, 0, 10), uniform(rng, 0, 2), 0.0};
    RewardWeights w{uniform(rng, 0, 20), uniform(rng, 0, 2), uniform(rng, 0, 4), uniform(rng, 0, 1), uniform(rng, 0, 2)};
    const double expect = -(w.safety * r.safety + w.efficiency * r.efficiency + w.navigation * r.navigation +
                            w.risk * r.risk + w.uncertainty * r.uncertainty);
    CHECK(PolicyReward::combine(r, w) == expect);
  }
}
