#pragma once

#include <Eigen/Core>

#include <array>

namespace riskplan {

inline constexpr int kStateDim = 6;
inline constexpr int kControlDim = 2;

using StateVec = Eigen::Matrix<double, kStateDim, 1>;
using ControlVec = Eigen::Matrix<double, kControlDim, 1>;
using StateMat = Eigen::Matrix<double, kStateDim, kStateDim>;
using InputMat = Eigen::Matrix<double, kStateDim, kControlDim>;

/// Index of each component in StateVec.
enum StateIndex : int { kX = 0, kY = 1, kTheta = 2, kV = 3, kAcc = 4, kDelta = 5 };
enum ControlIndex : int { kJerk = 0, kSteerRate = 1 };

struct EgoState {
  double x{0.0};
  double y{0.0};
  double theta{0.0};
  double v{0.0};
  double a{0.0};
  double delta{0.0};

  StateVec to_vector() const;
  static EgoState from_vector(const StateVec& s);
  bool operator==(const EgoState&) const = default;
};

struct Control {
  double jerk{0.0};
  double steer_rate{0.0};

  ControlVec to_vector() const { return ControlVec(jerk, steer_rate); }
  static Control from_vector(const ControlVec& u) { return {u[kJerk], u[kSteerRate]}; }
  bool operator==(const Control&) const = default;
};

struct VehicleParams {
  double wheelbase{2.8};
  double half_length{2.4};
  double half_width{1.0};
  double max_steer{0.6};
  // Per-dimension box limits; x, y and theta are left unbounded.
  std::array<double, kStateDim> state_lb{-1e9, -1e9, -1e9, 0.0, -6.0, -0.6};
  std::array<double, kStateDim> state_ub{1e9, 1e9, 1e9, 20.0, 3.0, 0.6};
  std::array<double, kControlDim> control_lb{-6.0, -0.6};
  std::array<double, kControlDim> control_ub{6.0, 0.6};

  /// Throws std::invalid_argument when L <= 0 or any lb >= ub.
  void validate() const;
};

/// Explicit Euler step of the kinematic bicycle with rate-level inputs.
/// Speed is clamped at zero and steering at +-max_steer.
EgoState step(const EgoState& s, const Control& u, double dt, const VehicleParams& params);
StateVec step(const StateVec& s, const ControlVec& u, double dt, const VehicleParams& params);

struct Linearization {
  StateMat A{StateMat::Identity()};
  InputMat B{InputMat::Zero()};
};

/// Analytic Jacobians of `step` at (s, u). Rows whose output is clamped have
/// zero sensitivity.
Linearization linearize(const StateVec& s, const ControlVec& u, double dt, const VehicleParams& params);
inline Linearization linearize(const EgoState& s, const Control& u, double dt, const VehicleParams& params) {
  return linearize(s.to_vector(), u.to_vector(), dt, params);
}

}  // namespace riskplan
