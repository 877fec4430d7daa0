#include "riskplan/forward_sim.hpp"
#include "world_support.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace riskplan;
using riskplan::testing::straight_road;
using riskplan::testing::uniform;
using riskplan::testing::agent;
using riskplan::testing::bundle_for;
using riskplan::testing::keep_lane;
using riskplan::testing::world_with;

namespace {

// Drops every prediction that does not follow `lane` and renormalises.
PredictionBundle only_lane(PredictionBundle b, AgentId id, const LaneId& lane) {
  for (auto& s : b.sets) {
    if (s.agent != id) continue;
    std::erase_if(s.predictions, [&](const PredictedTrajectory& p) { return p.intention.lateral.front() != lane; });
    const double total = s.total_probability();
    for (auto& p : s.predictions) p.intention.probability /= total;
    b.frs[id] = compute_frs(s, 0.2);
  }
  b.combinations = intention_combinations(b.sets, CombinationCaps{});
  return b;
}

double bumper_gap(const EgoState& e, const AgentState& a) { return a.x - e.x - 4.8; }

}  // namespace

TEST_CASE("IDM basics") {
  const DriverModelParams p;
  p.validate();
  CHECK(idm_acceleration(0.0, 10.0, std::nullopt, p) == doctest::Approx(2.0));
  CHECK(idm_acceleration(10.0, 10.0, std::nullopt, p) == doctest::Approx(0.0));
  CHECK(idm_acceleration(15.0, 10.0, std::nullopt, p) == doctest::Approx(-3.0));
  CHECK(idm_acceleration(5.0, 10.0, LeaderInfo{0.0, 0.0, 1}, p) == doctest::Approx(-8.0));
  DriverModelParams bad;
  bad.min_gap = 0.0;
  CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
}

TEST_CASE("leader search on an offset path") {
  const auto map = straight_road(true);
  const Polyline shifted = map->reference_line({"R"}).offset(2.5);
  const TrafficParticipant self{-1, AgentState{10.0, 0.0, 0.0, 5.0}, AgentShape{}};
  const TrafficParticipant parked{1, AgentState{30.0, 0.0, 0.0, 0.0}, AgentShape{}};
  // Lined up with the parked car now, clear of it on the shifted path.
  const auto now = find_leader(self, shifted, {parked});
  REQUIRE(now);
  CHECK(now->gap == doctest::Approx(20.0 - 4.8));
  CHECK_FALSE(find_leader(self, shifted, {parked}, 0.3, true));
  // Something on the path itself always leads.
  const TrafficParticipant on_path{2, AgentState{30.0, 2.5, 0.0, 3.0}, AgentShape{}};
  const auto ahead = find_leader(self, shifted, {parked, on_path}, 0.3, true);
  REQUIRE(ahead);
  CHECK(ahead->id == 2);
  CHECK(ahead->speed == doctest::Approx(3.0));
}

TEST_CASE("key vehicle selection") {
  const auto map = straight_road(true);
  SUBCASE("empty road") {
    const auto w = world_with(map, 8.0, {});
    const auto b = bundle_for(w);
    CHECK(select_key_vehicles(w, b, b.combinations[0], keep_lane(w, 8.0), ForwardSimConfig{}).empty());
  }
  SUBCASE("leader on the ego lane") {
    const auto w = world_with(map, 8.0, {agent(7, 40.0, 0.0, 6.0)});
    const auto b = bundle_for(w);
    const auto keys = select_key_vehicles(w, b, b.combinations[0], keep_lane(w, 8.0), ForwardSimConfig{});
    REQUIRE(keys.size() == 1);
    CHECK(keys[0] == 7);
  }
  SUBCASE("adjacent vehicle counts only through its lane-change reachable set") {
    const auto w = world_with(map, 8.0, {agent(3, 25.0, 3.5, 8.0)});
    const auto b = bundle_for(w);
    // The lane-change rollout crosses the corridor boundary (y = 1.5) within the horizon.
    bool crosses = false;
    for (const auto& p : b.set_for(3).predictions) {
      if (p.intention.lateral.front() != "R") continue;
      for (std::size_t t = 0; t < p.states.size(); ++t) {
        if (p.states[t].y - 1.0 < 1.5 && t * 0.2 <= 2.4) crosses = true;
      }
    }
    CHECK(crosses);
    const auto keys = select_key_vehicles(w, b, b.combinations[0], keep_lane(w, 8.0), ForwardSimConfig{});
    CHECK(keys == std::vector<AgentId>{3});
    const auto keep_only = only_lane(b, 3, "L");
    CHECK(select_key_vehicles(w, keep_only, keep_only.combinations[0], keep_lane(w, 8.0), ForwardSimConfig{}).empty());
  }
  SUBCASE("cap of four by distance") {
    std::vector<AgentTrack> many;
    for (int i = 0; i < 6; ++i) many.push_back(agent(i, 20.0 + 12.0 * (5 - i), 0.0, 8.0));
    const auto w = world_with(map, 8.0, many);
    PredictionConfig pc;
    const auto b = build_prediction_bundle(w, pc, CombinationCaps{1, 1});
    const auto keys = select_key_vehicles(w, b, b.combinations[0], keep_lane(w, 8.0), ForwardSimConfig{});
    CHECK(keys == std::vector<AgentId>{5, 4, 3, 2});
  }
}

TEST_CASE("empty road lane keeping is constant-speed and straight") {
  const auto w = world_with(straight_road(true), 8.0, {});
  const auto b = bundle_for(w);
  const auto sc = simulate_scenario(w, b, b.combinations[0], {}, keep_lane(w, 8.0), ForwardSimConfig{});
  REQUIRE(sc.ego.size() == 26);
  for (int t = 0; t <= 25; ++t) {
    CHECK(sc.ego[t].x == doctest::Approx(10.0 + 8.0 * 0.2 * t).epsilon(1e-12));
    CHECK(sc.ego[t].y == doctest::Approx(0.0).scale(1.0));
    CHECK(sc.ego[t].v == doctest::Approx(8.0));
  }
  CHECK(sc.collision_step == -1);
  CHECK(safety_assess(sc, b, w.ego_params).pass);
}

TEST_CASE("following a slower leader matches a fine-step IDM oracle") {
  const auto map = straight_road(true, 400.0);
  const double gap0 = 30.0;
  auto w = world_with(map, 10.0, {agent(1, 10.0 + 4.8 + gap0, 0.0, 5.0)});
  ForwardSimConfig cfg;
  cfg.horizon_steps = 50;
  const auto b = bundle_for(w, 50);
  const auto sc = simulate_scenario(w, b, b.combinations[0], {1}, keep_lane(w, 10.0), cfg);

  // Standalone IDM ODE at dt = 0.01 s with instantaneous acceleration.
  double xe = 10.0, ve = 10.0, xl = 10.0 + 4.8 + gap0;
  const double vl = 5.0;
  for (int k = 0; k < 1000; ++k) {
    const double acc = idm_acceleration(ve, 10.0, LeaderInfo{xl - xe - 4.8, vl, 1}, cfg.ego_driver);
    xe += ve * 0.01;
    ve = std::max(0.0, ve + acc * 0.01);
    xl += vl * 0.01;
  }
  const auto& e = sc.ego.back();
  const auto& l = sc.agent(1)->states.back();
  CHECK(e.v == doctest::Approx(ve).epsilon(0.1));
  CHECK(std::abs(e.v - 5.0) < 1.0);
  CHECK(bumper_gap(e, l) >= cfg.ego_driver.min_gap);
  CHECK(bumper_gap(e, l) == doctest::Approx(xl - xe - 4.8).epsilon(0.15));
}

TEST_CASE("cut-in agent makes the ego yield without contact") {
  const auto map = straight_road(true);
  // Agent ahead, already straddling the lane line and drifting right at 0.6 m/s.
  auto w = world_with(map, 8.0, {agent(2, 24.0, 1.4, 6.0, -0.6)});
  const auto b = bundle_for(w);
  const auto& set = b.set_for(2);
  double p_change = 0.0;
  for (const auto& p : set.predictions) {
    if (p.intention.lateral.front() == "R") p_change += p.probability();
  }
  CHECK(p_change > 0.5);
  const auto& combo = b.combinations[0];
  CHECK(set.predictions[combo.choice_for(2)].intention.lateral.front() == "R");
  const auto keys = select_key_vehicles(w, b, combo, keep_lane(w, 8.0), ForwardSimConfig{});
  REQUIRE(keys == std::vector<AgentId>{2});
  const auto sc = simulate_scenario(w, b, combo, keys, keep_lane(w, 8.0), ForwardSimConfig{});
  double min_speed = 8.0, min_gap = 1e9;
  for (int t = 0; t <= sc.steps(); ++t) {
    min_speed = std::min(min_speed, sc.ego[t].v);
    min_gap = std::min(min_gap, bumper_gap(sc.ego[t], sc.agent(2)->states[t]));
  }
  CHECK(min_speed < 8.0 - 0.5);
  CHECK(min_gap > 0.0);
  CHECK(sc.collision_step == -1);
}

TEST_CASE("reachable sets") {
  const auto map = straight_road(true);
  const auto w = world_with(map, 8.0, {agent(1, 30.0, 0.0, 8.0)});
  PredictionConfig pc;
  const auto set = predict_agent(w.agents[0], *map, pc);
  REQUIRE(set.predictions.size() == 2);  // keep "R" and change to "L"

  IntentionSet one = set;
  one.predictions.resize(1);
  const auto frs1 = compute_frs(one, 0.2);
  REQUIRE(frs1.steps.size() == 26);
  for (const auto& occ : frs1.steps) {
    REQUIRE(occ.polygons.size() == 1);
    CHECK(occ.polygons[0].area() == doctest::Approx(5.2 * 2.4).epsilon(1e-9));
  }

  IntentionSet twice = one;
  twice.predictions.push_back(one.predictions[0]);
  const auto frs2 = compute_frs(twice, 0.2);
  CHECK(frs2.at(10)[0].vertices() == frs1.at(10)[0].vertices());

  // Keep and change diverge; area at step 10 by inclusion-exclusion, with
  // the intersection measured on a fine grid.
  const auto frs = compute_frs(set, 0.2);
  const Polygon a = footprint(set.predictions[0].states[10], set.shape, 0.2);
  const Polygon c = footprint(set.predictions[1].states[10], set.shape, 0.2);
  double inter = 0.0;
  const double h = 0.01;
  for (double x = std::min(a.min_x(), c.min_x()); x < std::max(a.max_x(), c.max_x()); x += h) {
    for (double y = std::min(a.min_y(), c.min_y()); y < std::max(a.max_y(), c.max_y()); y += h) {
      const Point2 p{x + h / 2, y + h / 2};
      if (a.contains(p) && c.contains(p)) inter += h * h;
    }
  }
  double area = 0.0;
  for (const auto& p : frs.at(10)) area += p.area();
  CHECK(area == doctest::Approx(a.area() + c.area() - inter).epsilon(2e-3));
  CHECK_THROWS_AS(compute_frs(IntentionSet{}, 0.2), std::invalid_argument);
}

TEST_CASE("reachable set contains every predicted footprint") {
  const auto map = straight_road(true);
  std::mt19937_64 rng(31);
  PredictionConfig pc;
  pc.longitudinal_prior = {{LonIntent::Maintain, 0.6}, {LonIntent::Accelerate, 0.2}, {LonIntent::Decelerate, 0.2}};
  for (int trial = 0; trial < 30; ++trial) {
    const auto track = agent(1, uniform(rng, 10, 60), uniform(rng, -0.5, 4.0), uniform(rng, 0, 14), uniform(rng, -1, 1));
    const auto set = predict_agent(track, *map, pc);
    const auto frs = compute_frs(set, 0.2);
    for (const auto& p : set.predictions) {
      for (std::size_t t = 0; t < p.states.size(); ++t) {
        const Polygon body = footprint(p.states[t], set.shape);
        for (const auto& v : body.vertices()) {
          CHECK(point_in_any(v, frs.at(static_cast<int>(t))));
        }
      }
    }
  }
}

TEST_CASE("safety assessment") {
  const auto map = straight_road(true);
  const VehicleParams params;
  Scenario sc;
  for (int t = 0; t <= 10; ++t) sc.ego.push_back({static_cast<double>(t), 0.0, 0.0, 5.0, 0.0, 0.0});
  PredictionBundle empty;
  CHECK(safety_assess(sc, empty, params).pass);

  AgentTrajectory oncoming{4, AgentShape{}, true, {}};
  for (int t = 0; t <= 10; ++t) oncoming.states.push_back({t + 4.0 + (7 - t) * 5.0, 0.0, std::numbers::pi, 5.0});
  sc.agents.push_back(oncoming);
  const auto r = safety_assess(sc, empty, params);
  CHECK_FALSE(r.pass);
  CHECK(r.step == 7);
  CHECK(r.agent == 4);

  // Non-key agent whose inflated footprint edge sits 0.3 m from the ego side.
  Scenario graze;
  for (int t = 0; t <= 10; ++t) graze.ego.push_back({static_cast<double>(t), 0.0, 0.0, 5.0, 0.0, 0.0});
  IntentionSet side;
  side.agent = 9;
  side.predictions.push_back({AgentIntention{{"L"}, LonIntent::Maintain, 1.0}, {}});
  for (int t = 0; t <= 10; ++t) side.predictions[0].states.push_back({static_cast<double>(t), 2.5, 0.0, 5.0});
  PredictionBundle b;
  b.sets.push_back(side);
  b.frs[9] = compute_frs(side, 0.2);
  graze.agents.push_back({9, AgentShape{}, false, side.predictions[0].states});
  double clearance = 1e9;
  for (int t = 0; t <= 10; ++t) {
    clearance = std::min(clearance, polygon_distance(ego_footprint(graze.ego[t], params), b.frs[9].at(t)[0]));
  }
  CHECK(clearance == doctest::Approx(0.3));
  CHECK(safety_assess(graze, b, params).pass);
}

TEST_CASE("fallback braking stops short of a stopped leader") {
  const auto map = straight_road(true, 400.0);
  auto w = world_with(map, 10.0, {agent(1, 10.0 + 4.8 + 30.0, 0.0, 0.0)});
  const auto b = bundle_for(w);
  const auto ctx = keep_lane(w, 10.0);
  const auto first = simulate_scenario(w, b, b.combinations[0], {1}, ctx, ForwardSimConfig{});
  const SafetyResult forced{false, 20, 1};
  const auto fb = simulate_with_fallback(w, b, b.combinations[0], {1}, ctx, first, forced, ForwardSimConfig{});
  CHECK(fb.fallback);
  CHECK_FALSE(fb.unsafe);
  // Closed form: v^2 / (2 b) = 16.7 m < 30 m.
  CHECK(10.0 * 10.0 / (2.0 * 3.0) < 30.0);
  double min_gap = 1e9, max_decel = 0.0;
  for (int t = 0; t <= fb.steps(); ++t) {
    min_gap = std::min(min_gap, bumper_gap(fb.ego[t], fb.agent(1)->states[t]));
    max_decel = std::max(max_decel, -fb.ego[t].a);
  }
  CHECK(fb.ego.back().v == doctest::Approx(0.0));
  CHECK(min_gap > 0.0);
  CHECK(max_decel <= 3.0 + 1e-9);
}

TEST_CASE("fallback steers away from the reachable set centroid") {
  // Right shoulder of 3 m next to lane R.
  std::vector<Lane> lanes{{"R", Polyline({{0, 0}, {200, 0}}), 3.5, 15.0, LaneId{"L"}, std::nullopt, {}},
                          {"L", Polyline({{0, 3.5}, {200, 3.5}}), 3.5, 15.0, std::nullopt, LaneId{"R"}, {}}};
  const Polygon drivable({{0, -4.75}, {200, -4.75}, {200, 5.25}, {0, 5.25}});
  const auto map = std::make_shared<const LaneMap>(lanes, drivable);
  auto w = world_with(map, 8.0, {agent(5, 18.0, 0.6, 0.0)});
  const auto b = bundle_for(w);
  const auto ctx = keep_lane(w, 8.0);
  ForwardSimConfig cfg;
  const auto sc = simulate_scenario(w, b, b.combinations[0], {}, ctx, cfg);
  const auto check = safety_assess(sc, b, w.ego_params);
  REQUIRE_FALSE(check.pass);
  const double offset = fallback_offset(w, b, sc, check, ctx, cfg);
  CHECK(offset < 0.0);
  const auto fb = simulate_with_fallback(w, b, b.combinations[0], {}, ctx, sc, check, cfg);
  CHECK(fb.fallback);
  CHECK(fb.ego.back().y < -0.5);
}

TEST_CASE("closed-loop following keeps a positive gap") {
  const auto map = straight_road(true, 600.0);
  std::mt19937_64 rng(77);
  PredictionConfig pc;
  pc.longitudinal_prior = {{LonIntent::Maintain, 1.0}, {LonIntent::Decelerate, 1.0}};
  ForwardSimConfig cfg;
  for (int trial = 0; trial < 40; ++trial) {
    const double v = uniform(rng, 2.0, 14.0);
    const double gap = uniform(rng, 2.0, 30.0);
    auto w = world_with(map, v, {agent(1, 10.0 + 4.8 + gap, 0.0, v)});
    const auto b = build_prediction_bundle(w, pc, CombinationCaps{});
    for (const auto& combo : b.combinations) {
      const auto sc = simulate_scenario(w, b, combo, {1}, keep_lane(w, 15.0), cfg);
      for (int t = 0; t <= sc.steps(); ++t) CHECK(bumper_gap(sc.ego[t], sc.agent(1)->states[t]) > 0.0);
    }
  }
}

TEST_CASE("rendering keeps one scenario per combination and is deterministic") {
  const auto map = straight_road(true);
  auto w = world_with(map, 8.0, {agent(1, 30.0, 0.0, 6.0), agent(2, 20.0, 3.0, 7.0, -0.4)});
  const auto b = bundle_for(w);
  const auto ctx = keep_lane(w, 8.0);
  const auto a = render_scenarios(w, b, ctx, ForwardSimConfig{});
  const auto c = render_scenarios(w, b, ctx, ForwardSimConfig{});
  REQUIRE(a.size() == b.combinations.size());
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    total += a[i].probability;
    CHECK(a[i].ego == c[i].ego);
    CHECK(a[i].id == static_cast<int>(i));
    for (std::size_t j = 0; j < a[i].agents.size(); ++j) CHECK(a[i].agents[j].states == c[i].agents[j].states);
    CHECK(a[i].ego.size() == 26);
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}
