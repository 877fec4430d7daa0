#include "riskplan/planner.hpp"
#include "world_support.hpp"

#include <doctest.h>

#include <random>

using namespace riskplan;
using riskplan::testing::agent;
using riskplan::testing::straight_road;
using riskplan::testing::uniform;
using riskplan::testing::world_with;

namespace {

const Route kRoute{{"R"}, 10.0, std::nullopt};

bool same_tree(const TrajectoryTree& a, const TrajectoryTree& b) {
  if (a.nodes().size() != b.nodes().size()) return false;
  for (std::size_t j = 0; j < a.nodes().size(); ++j) {
    if (a.nodes()[j].state != b.nodes()[j].state || a.nodes()[j].control != b.nodes()[j].control) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("empty road keeps the lane at the desired speed") {
  const auto w = world_with(straight_road(true), 10.0, {});
  const auto res = plan(w, kRoute, PlannerConfig{});
  CHECK_FALSE(res.degraded);
  CHECK(res.policy.name() == "LaneKeep-Maintain");
  CHECK(res.evaluations.size() == 6);
  CHECK(res.tree.num_branches() == 1);
}

TEST_CASE("cut-in branch decelerates") {
  const auto w = world_with(straight_road(true), 8.0, {agent(2, 24.0, 1.4, 6.0, -0.6)});
  const auto res = plan(w, kRoute, PlannerConfig{});
  CHECK_FALSE(res.degraded);
  MESSAGE("chosen " << res.policy.name() << " branches " << res.tree.num_branches() << " branch step "
                    << res.tree.branch_step());
  // The branch whose scenario has the agent in the ego lane slows down.
  bool found = false;
  for (int k = 0; k < res.tree.num_branches(); ++k) {
    const auto& sc = res.scenarios.branches[static_cast<std::size_t>(k)];
    const auto* a = sc.agent(2);
    REQUIRE(a != nullptr);
    if (std::abs(a->states.back().y) > 1.0) continue;
    found = true;
    double vmin = 1e9;
    for (const auto& x : res.tree.branch_states(k)) vmin = std::min(vmin, x[kV]);
    CHECK(vmin < 8.0);
  }
  CHECK(found);
}

TEST_CASE("planning is deterministic and tie-breaks are stable") {
  const auto w = world_with(straight_road(true), 8.0, {agent(2, 24.0, 1.4, 6.0, -0.6), agent(3, 0.0, 3.5, 9.0)});
  const PlannerConfig cfg;
  const auto a = plan(w, kRoute, cfg);
  const auto b = plan(w, kRoute, cfg);
  CHECK(a.policy.same_behavior(b.policy));
  CHECK(a.policy.id == b.policy.id);
  CHECK(same_tree(a.tree, b.tree));
  REQUIRE(a.evaluations.size() == b.evaluations.size());
  for (std::size_t i = 0; i < a.evaluations.size(); ++i) {
    CHECK(a.evaluations[i].reward.total == b.evaluations[i].reward.total);
  }
  // Re-planning with the previous choice on the same snapshot keeps it.
  std::optional<PolicySpec> prev = a.policy;
  for (int i = 0; i < 3; ++i) {
    const auto r = plan(w, kRoute, cfg, prev);
    CHECK(r.policy.same_behavior(*prev));
    prev = r.policy;
  }
}

TEST_CASE("selection tie-break") {
  std::vector<PolicyEvaluation> evs(3);
  for (int i = 0; i < 3; ++i) {
    evs[static_cast<std::size_t>(i)].policy.id = i;
    evs[static_cast<std::size_t>(i)].policy.target = {"R"};
    evs[static_cast<std::size_t>(i)].reward.total = -1.0;
  }
  evs[1].policy.longitudinal = LongitudinalPolicy::Accelerate;
  evs[2].policy.longitudinal = LongitudinalPolicy::Decelerate;
  CHECK(select_policy(evs, std::nullopt) == 0);
  CHECK(select_policy(evs, evs[2].policy) == 2);
  evs[0].reward.total = -2.0;
  CHECK(select_policy(evs, evs[0].policy) == 1);
  evs[1].feasible = false;
  CHECK(select_policy(evs, std::nullopt) == 2);
  evs[2].feasible = false;
  evs[0].feasible = false;
  CHECK(select_policy(evs, std::nullopt) == -1);
}

TEST_CASE("selection is invariant to a common scaling of the reward weights") {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<PolicyEvaluation> evs(6);
    RewardWeights w{uniform(rng, 0.1, 20), uniform(rng, 0.1, 2), uniform(rng, 0.1, 4), uniform(rng, 0.1, 1),
                    uniform(rng, 0.1, 2)};
    for (int i = 0; i < 6; ++i) {
      auto& r = evs[static_cast<std::size_t>(i)].reward;
      r = {uniform(rng, 0, 1), uniform(rng, 0, 3), static_cast<double>(rng() % 2), uniform(rng, 0, 5), uniform(rng, 0, 1), 0};
      r.total = PolicyReward::combine(r, w);
      evs[static_cast<std::size_t>(i)].policy.id = i;
    }
    const int base = select_policy(evs, std::nullopt);
    const double c = uniform(rng, 0.01, 100.0);
    RewardWeights scaled{w.safety * c, w.efficiency * c, w.navigation * c, w.risk * c, w.uncertainty * c};
    for (auto& e : evs) e.reward.total = PolicyReward::combine(e.reward, scaled);
    CHECK(select_policy(evs, std::nullopt) == base);
  }
}

TEST_CASE("branching modes") {
  const auto w = world_with(straight_road(true), 8.0, {agent(2, 24.0, 1.4, 6.0, -0.6)});
  PlannerConfig cfg;
  cfg.mode = BranchMode::NoBranch;
  const auto nb = plan(w, kRoute, cfg);
  for (const auto& e : nb.evaluations) {
    CHECK(e.scenarios.branches.size() == 1);
    CHECK(e.solution.risk.q == std::vector<double>{1.0});
  }
  cfg.mode = BranchMode::FixedBranch;
  for (const auto& e : plan(w, kRoute, cfg).evaluations) CHECK(e.scenarios.branch_step == 5);
  cfg.mode = BranchMode::DynamicBranch;
  cfg.rcp.alpha = 0.2;
  for (const auto& e : plan(w, kRoute, cfg).evaluations) CHECK(e.solution.risk.alpha == 1.0);
  cfg.mode = BranchMode::DynamicBranchRisk;
  for (const auto& e : plan(w, kRoute, cfg).evaluations) CHECK(e.solution.risk.alpha == 0.2);

  CHECK(branch_mode_from_string("fixed_branch") == BranchMode::FixedBranch);
  CHECK_THROWS_AS(branch_mode_from_string("sideways"), std::invalid_argument);
}

TEST_CASE("every policy colliding yields a degraded braking plan") {
  // An agent sits right on top of the ego.
  const auto w = world_with(straight_road(false), 8.0, {agent(1, 10.5, 0.0, 0.0)});
  const auto res = plan(w, kRoute, PlannerConfig{});
  CHECK(res.degraded);
  CHECK(res.chosen == -1);
  CHECK(res.policy.name() == "LaneKeep-Decelerate");
  const auto states = res.tree.branch_states(0);
  CHECK(states.back()[kV] < states.front()[kV]);
  CHECK(res.tree.max_consistency_error(BicycleDynamics(w.ego_params, 0.2)) <= 1e-9);
}

TEST_CASE("planner configuration validation") {
  PlannerConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.prediction.horizon_steps = 20;
  CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
