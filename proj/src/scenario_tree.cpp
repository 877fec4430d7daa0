#include "riskplan/scenario_tree.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace riskplan {

void DivergenceConfig::validate() const {
  if (!(theta > 0.0)) throw std::invalid_argument("divergence threshold must be positive");
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
  if (!(tau_max > 0.0)) throw std::invalid_argument("tau_max must be positive");
  if (speed_weight < 0.0) throw std::invalid_argument("speed weight must be non-negative");
}

int DivergenceConfig::cap_steps() const { return static_cast<int>(std::floor(tau_max / dt + 1e-9)); }

double divergence(const Scenario& a, const Scenario& b, int step, const DivergenceConfig& cfg) {
  if (a.ego.size() != b.ego.size()) throw std::invalid_argument("scenarios have different horizons");
  if (step < 0 || step >= static_cast<int>(a.ego.size())) throw std::out_of_range("step outside the horizon");
  const EgoState& p = a.ego[static_cast<std::size_t>(step)];
  const EgoState& q = b.ego[static_cast<std::size_t>(step)];
  double d2 = (p.x - q.x) * (p.x - q.x) + (p.y - q.y) * (p.y - q.y);
  if (cfg.include_speed) d2 += cfg.speed_weight * cfg.speed_weight * (p.v - q.v) * (p.v - q.v);
  return std::sqrt(d2);
}

int branch_time(const std::vector<Scenario>& scenarios, const DivergenceConfig& cfg) {
  cfg.validate();
  if (scenarios.empty()) throw std::invalid_argument("branch_time needs at least one scenario");
  const int horizon = scenarios.front().steps();
  for (const auto& s : scenarios) {
    if (s.steps() != horizon) throw std::invalid_argument("scenarios have different horizons");
  }
  const int cap = std::min(cfg.cap_steps(), horizon);
  for (int t = 0; t <= cap; ++t) {
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
      for (std::size_t j = i + 1; j < scenarios.size(); ++j) {
        if (divergence(scenarios[i], scenarios[j], t, cfg) >= cfg.theta) return std::max(0, t - 1);
      }
    }
  }
  return cap;
}

ScenarioTree build_tree(std::vector<Scenario> scenarios, const DivergenceConfig& cfg) {
  ScenarioTree tree;
  tree.branch_step = branch_time(scenarios, cfg);
  tree.horizon_steps = scenarios.front().steps();
  tree.policy_id = scenarios.front().policy_id;
  std::stable_sort(scenarios.begin(), scenarios.end(), [](const Scenario& a, const Scenario& b) {
    return a.probability != b.probability ? a.probability > b.probability : a.id < b.id;
  });
  tree.branches = std::move(scenarios);
  return tree;
}

}  // namespace riskplan
