#include "riskplan/cost_model.hpp"

#include <cmath>
#include <stdexcept>

namespace riskplan {
namespace {

constexpr double kUnbounded = 1e8;

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Circle centre p = (x + o cos th, y + o sin th) and its derivatives with
// respect to (x, y, th).
struct CirclePose {
  Point2 center;
  Eigen::Matrix<double, 2, 3> jac;
  Eigen::Vector2d d2_theta;  // d^2 p / d th^2
};

CirclePose circle_pose(const StateVec& x, double offset) {
  const double c = std::cos(x[kTheta]), s = std::sin(x[kTheta]);
  CirclePose cp;
  cp.center = {x[kX] + offset * c, x[kY] + offset * s};
  cp.jac << 1.0, 0.0, -offset * s, 0.0, 1.0, offset * c;
  cp.d2_theta << -offset * c, -offset * s;
  return cp;
}

// Embeds a (x, y, th) gradient and Hessian into the full state.
void scatter_pose(CostExpansion& e, const Vec3& g, const Mat3& h) {
  const int idx[3] = {kX, kY, kTheta};
  for (int i = 0; i < 3; ++i) {
    e.lx[idx[i]] += g[i];
    for (int j = 0; j < 3; ++j) e.lxx(idx[i], idx[j]) += h(i, j);
  }
}

double bbox_distance(const Point2& p, const Polygon& poly) {
  const double dx = std::max({poly.min_x() - p.x, 0.0, p.x - poly.max_x()});
  const double dy = std::max({poly.min_y() - p.y, 0.0, p.y - poly.max_y()});
  return std::hypot(dx, dy);
}

// Hinge on the soft-min clearance of the body circles to `poly`.
CostExpansion clearance_penalty(const StateVec& x, const Polygon& poly, bool inside, const PenaltyTerm& term,
                                const CostModel& m, HessianMode mode, bool need_derivatives) {
  CostExpansion e;
  if (term.weight == 0.0) return e;
  const double r = m.circle_radius;
  const double sign = inside ? -1.0 : 1.0;

  std::array<CirclePose, 3> poses;
  for (std::size_t c = 0; c < 3; ++c) poses[c] = circle_pose(x, m.circle_offsets[c]);
  if (!inside) {
    // Every clearance is at least the box distance minus r; if that already
    // clears the margin for all circles, so does the soft minimum.
    bool far = true;
    for (const auto& cp : poses) far = far && bbox_distance(cp.center, poly) - r >= term.margin;
    if (far) return e;
  }

  std::array<double, 3> gamma{};
  std::array<Vec3, 3> dgamma;
  std::array<Mat3, 3> d2gamma;
  for (std::size_t c = 0; c < 3; ++c) {
    const auto sd = signed_distance_expansion(poses[c].center, poly);
    gamma[c] = sign * sd.value - r;
    if (!need_derivatives) continue;
    const auto& J = poses[c].jac;
    dgamma[c] = sign * (J.transpose() * sd.gradient);
    d2gamma[c] = sign * (J.transpose() * sd.hessian * J);
    d2gamma[c](2, 2) += sign * sd.gradient.dot(poses[c].d2_theta);
  }
  const auto agg = smooth_aggregate_expansion(gamma, m.beta);
  const double h = term.margin - agg.value;
  if (h <= 0.0) return e;
  e.value = term.weight * h * h;
  if (!need_derivatives) return e;

  Vec3 dS = Vec3::Zero();
  Mat3 d2S = Mat3::Zero();
  for (std::size_t c = 0; c < 3; ++c) {
    dS += agg.gradient[static_cast<int>(c)] * dgamma[c];
    for (std::size_t d = 0; d < 3; ++d) {
      d2S += agg.hessian(static_cast<int>(c), static_cast<int>(d)) * dgamma[c] * dgamma[d].transpose();
    }
    d2S += agg.gradient[static_cast<int>(c)] * d2gamma[c];
  }
  const Vec3 g = -2.0 * term.weight * h * dS;
  Mat3 H = 2.0 * term.weight * dS * dS.transpose();
  if (mode == HessianMode::Exact) H -= 2.0 * term.weight * h * d2S;
  scatter_pose(e, g, H);
  return e;
}

CostExpansion obstacle_set(const StateVec& x, const std::vector<const Polygon*>& polys, const PenaltyTerm& term,
                           const CostModel& m, HessianMode mode, bool need_derivatives) {
  CostExpansion e;
  for (const Polygon* p : polys) e.add(clearance_penalty(x, *p, false, term, m, mode, need_derivatives));
  return e;
}

CostExpansion reference_cost(const StateVec& x, const Polyline& ref, const CostModel& m, HessianMode mode) {
  CostExpansion e;
  if (m.w_ref == 0.0) return e;
  const double w = m.w_ref / 3.0;
  Vec3 g = Vec3::Zero();
  Mat3 H = Mat3::Zero();
  const auto& pts = ref.points();
  for (double offset : m.circle_offsets) {
    const auto cp = circle_pose(x, offset);
    const auto pr = ref.project(cp.center);
    const double d = pr.d;
    e.value += w * d * d;

    // Gradient of the signed offset: the segment's left normal on an edge
    // interior, the radial direction when the foot is a vertex.
    const Point2 a = pts[pr.segment], b = pts[pr.segment + 1];
    const Point2 dir = (b - a) * (1.0 / distance(a, b));
    Eigen::Vector2d n(-dir.y, dir.x);
    Eigen::Matrix2d dn = Eigen::Matrix2d::Zero();
    const bool at_vertex = distance(pr.foot, a) < 1e-12 || distance(pr.foot, b) < 1e-12;
    if (at_vertex && std::abs(d) > 1e-9) {
      const Point2 rel = cp.center - pr.foot;
      n = Eigen::Vector2d(rel.x, rel.y) / d;
      dn = (Eigen::Matrix2d::Identity() - n * n.transpose()) / d;
    }
    const Vec3 dd = cp.jac.transpose() * n;
    g += 2.0 * w * d * dd;
    H += 2.0 * w * dd * dd.transpose();
    if (mode == HessianMode::Exact) {
      Mat3 d2d = cp.jac.transpose() * dn * cp.jac;
      d2d(2, 2) += n.dot(cp.d2_theta);
      H += 2.0 * w * d * d2d;
    }
  }
  scatter_pose(e, g, H);
  return e;
}

void hinge_sq(double value, double lb, double ub, double w, double& cost, double& grad, double& hess) {
  cost = grad = hess = 0.0;
  if (ub < kUnbounded && value > ub) {
    const double h = value - ub;
    cost = w * h * h;
    grad = 2.0 * w * h;
    hess = 2.0 * w;
  } else if (lb > -kUnbounded && value < lb) {
    const double h = lb - value;
    cost = w * h * h;
    grad = -2.0 * w * h;
    hess = 2.0 * w;
  }
}

CostExpansion kinematic_cost(const StateVec& x, const ControlVec& u, const CostModel& m) {
  CostExpansion e;
  double c, g, h;
  for (int i = 0; i < kStateDim; ++i) {
    hinge_sq(x[i], m.vehicle.state_lb[static_cast<std::size_t>(i)], m.vehicle.state_ub[static_cast<std::size_t>(i)],
             m.w_kinematic, c, g, h);
    e.value += c;
    e.lx[i] += g;
    e.lxx(i, i) += h;
  }
  for (int i = 0; i < kControlDim; ++i) {
    hinge_sq(u[i], m.vehicle.control_lb[static_cast<std::size_t>(i)],
             m.vehicle.control_ub[static_cast<std::size_t>(i)], m.w_kinematic, c, g, h);
    e.value += c;
    e.lu[i] += g;
    e.luu(i, i) += h;
  }
  return e;
}

CostExpansion comfort_cost(const StateVec& x, const ControlVec& u, const CostModel& m, HessianMode mode) {
  CostExpansion e;
  e.value += m.w_acc * x[kAcc] * x[kAcc];
  e.lx[kAcc] += 2.0 * m.w_acc * x[kAcc];
  e.lxx(kAcc, kAcc) += 2.0 * m.w_acc;

  // Lateral acceleration v^2 tan(delta) / L.
  const double L = m.vehicle.wheelbase;
  const double v = x[kV], t = std::tan(x[kDelta]);
  const double sec2 = 1.0 + t * t;
  const double f = v * v * t / L;
  const Eigen::Vector2d df(2.0 * v * t / L, v * v * sec2 / L);
  e.value += m.w_lat_acc * f * f;
  Eigen::Matrix2d hf = 2.0 * m.w_lat_acc * df * df.transpose();
  if (mode == HessianMode::Exact) {
    Eigen::Matrix2d d2f;
    d2f << 2.0 * t / L, 2.0 * v * sec2 / L, 2.0 * v * sec2 / L, 2.0 * v * v * sec2 * t / L;
    hf += 2.0 * m.w_lat_acc * f * d2f;
  }
  const int idx[2] = {kV, kDelta};
  for (int i = 0; i < 2; ++i) {
    e.lx[idx[i]] += 2.0 * m.w_lat_acc * f * df[i];
    for (int j = 0; j < 2; ++j) e.lxx(idx[i], idx[j]) += hf(i, j);
  }

  e.value += m.w_jerk * u[kJerk] * u[kJerk] + m.w_steer_rate * u[kSteerRate] * u[kSteerRate];
  e.lu[kJerk] += 2.0 * m.w_jerk * u[kJerk];
  e.lu[kSteerRate] += 2.0 * m.w_steer_rate * u[kSteerRate];
  e.luu(kJerk, kJerk) += 2.0 * m.w_jerk;
  e.luu(kSteerRate, kSteerRate) += 2.0 * m.w_steer_rate;
  return e;
}

CostExpansion evaluate(CostTerm term, const StateVec& x, const ControlVec& u, const NodeEnvironment& env,
                       const CostModel& m, HessianMode mode, bool need_derivatives) {
  switch (term) {
    case CostTerm::Drivable:
      if (env.drivable == nullptr) return {};
      return clearance_penalty(x, *env.drivable, true, m.drivable, m, mode, need_derivatives);
    case CostTerm::Boxes:
      return obstacle_set(x, env.boxes, m.boxes, m, mode, need_derivatives);
    case CostTerm::Reachable:
      return obstacle_set(x, env.reachable, m.reachable, m, mode, need_derivatives);
    case CostTerm::Desired:
      if (env.desired == nullptr) return {};
      return clearance_penalty(x, *env.desired, true, m.desired, m, mode, need_derivatives);
    case CostTerm::Reference:
      if (env.reference == nullptr) return {};
      return reference_cost(x, *env.reference, m, mode);
    case CostTerm::Speed: {
      CostExpansion e;
      if (!env.speed_ref) return e;
      const double dv = x[kV] - *env.speed_ref;
      e.value = m.w_speed * dv * dv;
      e.lx[kV] = 2.0 * m.w_speed * dv;
      e.lxx(kV, kV) = 2.0 * m.w_speed;
      return e;
    }
    case CostTerm::Kinematic:
      return kinematic_cost(x, u, m);
    case CostTerm::Comfort:
      return comfort_cost(x, u, m, mode);
  }
  return {};
}

}  // namespace

void CostModel::validate() const {
  vehicle.validate();
  for (double w : {drivable.weight, boxes.weight, reachable.weight, desired.weight, w_ref, w_speed, w_kinematic, w_acc,
                   w_lat_acc, w_jerk, w_steer_rate}) {
    if (w < 0.0) throw std::invalid_argument("cost weights must be non-negative");
  }
  if (!(beta < 0.0)) throw std::invalid_argument("beta must be negative (soft minimum)");
  if (!(circle_radius > 0.0)) throw std::invalid_argument("circle radius must be positive");
}

CostModel default_cost_model(const VehicleParams& vehicle) {
  CostModel m;
  m.vehicle = vehicle;
  const double o = vehicle.half_length * 2.0 / 3.0;
  m.circle_offsets = {-o, 0.0, o};
  m.circle_radius = std::hypot(vehicle.half_width, vehicle.half_length / 3.0);
  return m;
}

bool is_safety_term(CostTerm term) {
  return term == CostTerm::Drivable || term == CostTerm::Boxes || term == CostTerm::Reachable;
}

void CostExpansion::add(const CostExpansion& o, double w) {
  value += w * o.value;
  lx += w * o.lx;
  lu += w * o.lu;
  lxx += w * o.lxx;
  luu += w * o.luu;
}

CostExpansion term_expansion(CostTerm term, const StateVec& x, const ControlVec& u, const NodeEnvironment& env,
                             const CostModel& model, HessianMode mode) {
  return evaluate(term, x, u, env, model, mode, true);
}

double term_value(CostTerm term, const StateVec& x, const ControlVec& u, const NodeEnvironment& env,
                  const CostModel& model) {
  return evaluate(term, x, u, env, model, HessianMode::GaussNewton, false).value;
}

CostSplit node_cost(const StateVec& x, const ControlVec& u, const NodeEnvironment& env, const CostModel& model) {
  CostSplit s;
  for (CostTerm t : kAllCostTerms) (is_safety_term(t) ? s.safe : s.non_safe) += term_value(t, x, u, env, model);
  return s;
}

SplitExpansion node_cost_expansion(const StateVec& x, const ControlVec& u, const NodeEnvironment& env,
                                   const CostModel& model, HessianMode mode) {
  SplitExpansion s;
  for (CostTerm t : kAllCostTerms) {
    (is_safety_term(t) ? s.safe : s.non_safe).add(evaluate(t, x, u, env, model, mode, true));
  }
  return s;
}

double body_clearance(const StateVec& x, const Polygon& poly, bool inside, const CostModel& model) {
  std::array<double, 3> gamma{};
  for (std::size_t c = 0; c < 3; ++c) {
    const auto cp = circle_pose(x, model.circle_offsets[c]);
    gamma[c] = (inside ? -1.0 : 1.0) * signed_distance(cp.center, poly) - model.circle_radius;
  }
  return smooth_aggregate(gamma, model.beta);
}

}  // namespace riskplan
