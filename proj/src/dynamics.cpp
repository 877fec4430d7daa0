#include "riskplan/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace riskplan {

StateVec EgoState::to_vector() const {
  StateVec s;
  s << x, y, theta, v, a, delta;
  return s;
}

EgoState EgoState::from_vector(const StateVec& s) {
  return {s[kX], s[kY], s[kTheta], s[kV], s[kAcc], s[kDelta]};
}

void VehicleParams::validate() const {
  if (!(wheelbase > 0.0)) throw std::invalid_argument("wheelbase must be positive");
  if (!(half_length > 0.0) || !(half_width > 0.0)) throw std::invalid_argument("vehicle extents must be positive");
  for (int i = 0; i < kStateDim; ++i) {
    if (!(state_lb[i] < state_ub[i])) throw std::invalid_argument("state bound lb >= ub");
  }
  for (int i = 0; i < kControlDim; ++i) {
    if (!(control_lb[i] < control_ub[i])) throw std::invalid_argument("control bound lb >= ub");
  }
}

StateVec step(const StateVec& s, const ControlVec& u, double dt, const VehicleParams& params) {
  if (!(dt > 0.0)) throw std::invalid_argument("step: dt must be positive");
  if (!s.allFinite() || !u.allFinite()) throw std::invalid_argument("step: non-finite input");
  const double v = s[kV];
  const double theta = s[kTheta];
  StateVec n;
  n[kX] = s[kX] + v * std::cos(theta) * dt;
  n[kY] = s[kY] + v * std::sin(theta) * dt;
  n[kTheta] = theta + v / params.wheelbase * std::tan(s[kDelta]) * dt;
  n[kV] = std::max(0.0, v + s[kAcc] * dt);
  n[kAcc] = s[kAcc] + u[kJerk] * dt;
  n[kDelta] = std::clamp(s[kDelta] + u[kSteerRate] * dt, -params.max_steer, params.max_steer);
  return n;
}

EgoState step(const EgoState& s, const Control& u, double dt, const VehicleParams& params) {
  return EgoState::from_vector(step(s.to_vector(), u.to_vector(), dt, params));
}

Linearization linearize(const StateVec& s, const ControlVec& u, double dt, const VehicleParams& params) {
  Linearization lin;
  const double v = s[kV];
  const double theta = s[kTheta];
  const double delta = s[kDelta];
  const double c = std::cos(theta);
  const double sn = std::sin(theta);
  const double cd = std::cos(delta);
  const double L = params.wheelbase;

  lin.A(kX, kTheta) = -v * sn * dt;
  lin.A(kX, kV) = c * dt;
  lin.A(kY, kTheta) = v * c * dt;
  lin.A(kY, kV) = sn * dt;
  lin.A(kTheta, kV) = std::tan(delta) / L * dt;
  lin.A(kTheta, kDelta) = v / (L * cd * cd) * dt;
  if (v + s[kAcc] * dt >= 0.0) {
    lin.A(kV, kAcc) = dt;
  } else {
    lin.A(kV, kV) = 0.0;
  }
  lin.B(kAcc, kJerk) = dt;
  const double next_delta = delta + u[kSteerRate] * dt;
  if (next_delta >= -params.max_steer && next_delta <= params.max_steer) {
    lin.B(kDelta, kSteerRate) = dt;
  } else {
    lin.A(kDelta, kDelta) = 0.0;
  }
  return lin;
}

}  // namespace riskplan
