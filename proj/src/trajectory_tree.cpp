#include "riskplan/trajectory_tree.hpp"

#include <stdexcept>

namespace riskplan {

BicycleDynamics::BicycleDynamics(VehicleParams params, double dt) : params_(std::move(params)), dt_(dt) {
  params_.validate();
  if (!(dt > 0.0)) throw std::invalid_argument("dt must be positive");
}

StateVec BicycleDynamics::step(const StateVec& x, const ControlVec& u) const {
  return riskplan::step(x, u, dt_, params_);
}

Linearization BicycleDynamics::linearize(const StateVec& x, const ControlVec& u) const {
  return riskplan::linearize(x, u, dt_, params_);
}

TrajectoryTree TrajectoryTree::build(const StateVec& root, const std::vector<ControlVec>& trunk,
                                     const std::vector<std::vector<ControlVec>>& branches,
                                     const TreeDynamics& dynamics) {
  if (branches.empty()) throw std::invalid_argument("trajectory tree needs at least one branch");
  const std::size_t tail = branches.front().size();
  for (const auto& b : branches) {
    if (b.size() != tail) throw std::invalid_argument("branches have different lengths");
  }
  TrajectoryTree t;
  t.branch_step_ = static_cast<int>(trunk.size());
  t.horizon_ = t.branch_step_ + static_cast<int>(tail);
  t.nodes_.push_back(TreeNode{root, ControlVec::Zero(), -1, -1, 0});
  int prev = 0;
  for (std::size_t i = 0; i < trunk.size(); ++i) {
    t.nodes_.push_back(TreeNode{StateVec::Zero(), trunk[i], prev, -1, static_cast<int>(i) + 1});
    prev = static_cast<int>(t.nodes_.size()) - 1;
    t.shared_.push_back(prev);
  }
  const int fork = prev;
  for (std::size_t k = 0; k < branches.size(); ++k) {
    std::vector<int> chain;
    int parent = fork;
    for (std::size_t i = 0; i < tail; ++i) {
      t.nodes_.push_back(
          TreeNode{StateVec::Zero(), branches[k][i], parent, static_cast<int>(k), t.branch_step_ + static_cast<int>(i) + 1});
      parent = static_cast<int>(t.nodes_.size()) - 1;
      chain.push_back(parent);
    }
    t.branches_.push_back(std::move(chain));
  }
  t.rollout(dynamics);
  return t;
}

int TrajectoryTree::node_at(int branch, int step) const {
  if (step < 0 || step > horizon_) throw std::out_of_range("step outside the tree horizon");
  if (step == 0) return 0;
  if (step <= branch_step_) return shared_[static_cast<std::size_t>(step - 1)];
  return branch_nodes(branch)[static_cast<std::size_t>(step - branch_step_ - 1)];
}

std::vector<StateVec> TrajectoryTree::branch_states(int branch) const {
  std::vector<StateVec> out;
  for (int t = 0; t <= horizon_; ++t) out.push_back(nodes_[static_cast<std::size_t>(node_at(branch, t))].state);
  return out;
}

std::vector<ControlVec> TrajectoryTree::branch_controls(int branch) const {
  std::vector<ControlVec> out;
  for (int t = 1; t <= horizon_; ++t) out.push_back(nodes_[static_cast<std::size_t>(node_at(branch, t))].control);
  return out;
}

void TrajectoryTree::rollout(const TreeDynamics& dynamics) {
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    nodes_[i].state = dynamics.step(nodes_[static_cast<std::size_t>(nodes_[i].parent)].state, nodes_[i].control);
  }
}

double TrajectoryTree::max_consistency_error(const TreeDynamics& dynamics) const {
  double worst = 0.0;
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    const StateVec expect = dynamics.step(nodes_[static_cast<std::size_t>(nodes_[i].parent)].state, nodes_[i].control);
    worst = std::max(worst, (expect - nodes_[i].state).cwiseAbs().maxCoeff());
  }
  return worst;
}

}  // namespace riskplan
