#pragma once

#include "riskplan/ilqr.hpp"
#include "test_support.hpp"

#include <Eigen/Dense>

#include <random>
#include <vector>

namespace riskplan::testing {

class LinearDynamics final : public TreeDynamics {
 public:
  LinearDynamics(StateMat A, InputMat B) : lin_{A, B} {}
  StateVec step(const StateVec& x, const ControlVec& u) const override { return lin_.A * x + lin_.B * u; }
  Linearization linearize(const StateVec&, const ControlVec&) const override { return lin_; }

 private:
  Linearization lin_;
};

// Per-node quadratic: w * ((x - target)' Q (x - target) + u' R u).
class QuadraticCost final : public TreeCost {
 public:
  QuadraticCost(StateMat Q, Eigen::Matrix2d R, std::vector<StateVec> targets, std::vector<double> weights)
      : Q_(Q), R_(R), targets_(std::move(targets)), weights_(std::move(weights)) {}
  double value(int node, const StateVec& x, const ControlVec& u) const override {
    const StateVec e = x - targets_[static_cast<std::size_t>(node)];
    return weights_[static_cast<std::size_t>(node)] * (e.dot(Q_ * e) + u.dot(R_ * u));
  }
  CostExpansion expand(int node, const StateVec& x, const ControlVec& u) const override {
    const double w = weights_[static_cast<std::size_t>(node)];
    const StateVec e = x - targets_[static_cast<std::size_t>(node)];
    CostExpansion c;
    c.value = value(node, x, u);
    c.lx = 2.0 * w * Q_ * e;
    c.lxx = 2.0 * w * Q_;
    c.lu = 2.0 * w * R_ * u;
    c.luu = 2.0 * w * R_;
    return c;
  }

 private:
  StateMat Q_;
  Eigen::Matrix2d R_;
  std::vector<StateVec> targets_;
  std::vector<double> weights_;
};

inline LinearDynamics random_system(std::mt19937_64& rng) {
  StateMat A = StateMat::Identity();
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 6; ++j) A(i, j) += 0.1 * uniform(rng, -1.0, 1.0);
  InputMat B;
  for (int i = 0; i < 6; ++i)
    for (int j = 0; j < 2; ++j) B(i, j) = uniform(rng, -0.5, 0.5);
  return LinearDynamics(A, B);
}

// Finite-horizon Riccati recursion for a chain with stage cost on
// (x_t, u_t), x_t = A x_{t-1} + B u_t, affine in the targets.
inline std::vector<StateVec> riccati_chain(const StateMat& A, const InputMat& B, const StateMat& Q, const Eigen::Matrix2d& R,
                                    const StateVec& x0, const std::vector<StateVec>& targets, int horizon) {
  // Value after step t as a function of x_t: x' P x - 2 p' x + const.
  StateMat P = StateMat::Zero();
  StateVec p = StateVec::Zero();
  std::vector<Eigen::Matrix<double, 2, 6>> K(static_cast<std::size_t>(horizon) + 1);
  std::vector<ControlVec> k(static_cast<std::size_t>(horizon) + 1);
  for (int t = horizon; t >= 1; --t) {
    // Stage t plus tail, in terms of x_t: x'(Q+P)x - 2 (Q r_t + p)' x.
    const StateMat W = Q + P;
    const StateVec w = Q * targets[static_cast<std::size_t>(t)] + p;
    // Substitute x_t = A x + B u and minimize over u.
    const Eigen::Matrix2d Huu = B.transpose() * W * B + R;
    const Eigen::Matrix<double, 2, 6> Hux = B.transpose() * W * A;
    const ControlVec hu = B.transpose() * w;
    K[static_cast<std::size_t>(t)] = -Huu.ldlt().solve(Hux);
    k[static_cast<std::size_t>(t)] = Huu.ldlt().solve(hu);
    const auto& Kt = K[static_cast<std::size_t>(t)];
    const auto& kt = k[static_cast<std::size_t>(t)];
    const StateMat Acl = A + B * Kt;
    P = Acl.transpose() * W * Acl + Kt.transpose() * R * Kt;
    p = Acl.transpose() * (w - W * B * kt) - Kt.transpose() * R * kt;
  }
  std::vector<StateVec> xs{x0};
  for (int t = 1; t <= horizon; ++t) {
    const ControlVec u = K[static_cast<std::size_t>(t)] * xs.back() + k[static_cast<std::size_t>(t)];
    xs.push_back(A * xs.back() + B * u);
  }
  return xs;
}

inline StateVec random_vec(std::mt19937_64& rng, double scale) {
  StateVec v;
  for (int i = 0; i < 6; ++i) v[i] = uniform(rng, -scale, scale);
  return v;
}

}  // namespace riskplan::testing
