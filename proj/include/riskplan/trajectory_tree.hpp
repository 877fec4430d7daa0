#pragma once

#include "riskplan/dynamics.hpp"

#include <vector>

namespace riskplan {

/// State transition used by the tree solver. The bicycle model is the
/// production instance; tests plug in linear systems.
class TreeDynamics {
 public:
  virtual ~TreeDynamics() = default;
  virtual StateVec step(const StateVec& x, const ControlVec& u) const = 0;
  virtual Linearization linearize(const StateVec& x, const ControlVec& u) const = 0;
};

class BicycleDynamics final : public TreeDynamics {
 public:
  BicycleDynamics(VehicleParams params, double dt);
  StateVec step(const StateVec& x, const ControlVec& u) const override;
  Linearization linearize(const StateVec& x, const ControlVec& u) const override;
  double dt() const { return dt_; }

 private:
  VehicleParams params_;
  double dt_;
};

struct TreeNode {
  StateVec state{StateVec::Zero()};
  ControlVec control{ControlVec::Zero()};  // input on the edge from the parent; unused at the root
  int parent{-1};
  int branch{-1};  // -1 for the root and shared nodes
  int step{0};
};

/// Node 0 is the current state. Shared nodes cover steps 1..branch_step as a
/// chain from the root; each branch is a chain covering the remaining steps,
/// hanging off the last shared node. Parents always precede their children.
class TrajectoryTree {
 public:
  TrajectoryTree() = default;

  static TrajectoryTree build(const StateVec& root, const std::vector<ControlVec>& trunk,
                              const std::vector<std::vector<ControlVec>>& branches, const TreeDynamics& dynamics);

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  std::vector<TreeNode>& nodes() { return nodes_; }
  int branch_step() const { return branch_step_; }
  int horizon() const { return horizon_; }
  int num_branches() const { return static_cast<int>(branches_.size()); }
  const std::vector<int>& shared() const { return shared_; }
  const std::vector<int>& branch_nodes(int k) const { return branches_.at(static_cast<std::size_t>(k)); }

  /// Node index of `branch` at `step`; shared steps map to the trunk.
  int node_at(int branch, int step) const;
  std::vector<StateVec> branch_states(int branch) const;
  std::vector<ControlVec> branch_controls(int branch) const;

  /// Recomputes every state from its parent and control.
  void rollout(const TreeDynamics& dynamics);
  double max_consistency_error(const TreeDynamics& dynamics) const;

 private:
  std::vector<TreeNode> nodes_;
  std::vector<int> shared_;
  std::vector<std::vector<int>> branches_;
  int branch_step_{0};
  int horizon_{0};
};

}  // namespace riskplan
