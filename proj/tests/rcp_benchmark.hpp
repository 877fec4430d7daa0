#pragma once

#include "riskplan/rcp.hpp"

#include <algorithm>
#include <vector>

namespace riskplan::testing {

inline constexpr int kHorizon = 25;
inline constexpr int kBranchStep = 5;

inline std::vector<Polygon> box_at(double x, double y, double heading = 0.0) { return {make_box({x, y}, heading, 2.4, 1.0)}; }

// Ego at 10 m/s on y = 0. Branch 0: the agent keeps the left lane.
// Branch 1: it cuts in 15 m ahead and brakes.
inline RcpProblem cut_in_problem(double p_conflict) {
  RcpProblem pb;
  pb.dt = 0.2;
  pb.horizon = kHorizon;
  pb.branch_step = kBranchStep;
  pb.root << 0.0, 0.0, 0.0, 10.0, 0.0, 0.0;
  pb.probabilities = {1.0 - p_conflict, p_conflict};
  pb.trunk_controls.assign(kBranchStep, ControlVec::Zero());
  pb.branch_controls.assign(2, std::vector<ControlVec>(kHorizon - kBranchStep, ControlVec::Zero()));
  pb.drivable = Polygon({{-50.0, -1.75}, {300.0, -1.75}, {300.0, 5.25}, {-50.0, 5.25}});
  pb.reference = Polyline({{-50.0, 0.0}, {300.0, 0.0}});
  pb.boxes.assign(2, std::vector<std::vector<Polygon>>(kHorizon + 1));
  pb.reachable.assign(2, std::vector<std::vector<Polygon>>(kHorizon + 1));
  pb.speed_ref.assign(2, std::vector<double>(kHorizon + 1, 10.0));
  double x = 15.0, v = 10.0;
  for (int t = 0; t <= kHorizon; ++t) {
    const double y = t <= kBranchStep ? 3.5 : std::max(0.0, 3.5 - 0.35 * (t - kBranchStep));
    pb.boxes[0][static_cast<std::size_t>(t)] = box_at(15.0 + 2.0 * t, 3.5);
    pb.boxes[1][static_cast<std::size_t>(t)] = box_at(x, y);
    if (t >= kBranchStep) v = std::max(2.0, v - 0.4);
    x += v * 0.2;
  }
  return pb;
}

inline double min_gap_to_branch_obstacle(const RcpProblem& pb, const TrajectoryTree& tree, int branch) {
  const VehicleParams vp;
  double gap = 1e9;
  const auto states = tree.branch_states(branch);
  for (int t = 1; t <= pb.horizon; ++t) {
    const Polygon body = ego_footprint(EgoState::from_vector(states[static_cast<std::size_t>(t)]), vp);
    for (const auto& o : pb.boxes[static_cast<std::size_t>(branch)][static_cast<std::size_t>(t)]) {
      gap = std::min(gap, polygon_distance(body, o));
    }
  }
  return gap;
}

}  // namespace riskplan::testing
