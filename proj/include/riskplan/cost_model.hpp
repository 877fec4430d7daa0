#pragma once

#include "riskplan/dynamics.hpp"
#include "riskplan/geometry.hpp"

#include <array>
#include <optional>
#include <vector>

namespace riskplan {

/// Quadratic hinge w * max(margin - clearance, 0)^2.
struct PenaltyTerm {
  double weight{0.0};
  double margin{0.0};
};

struct CostModel {
  VehicleParams vehicle;
  double beta{-4.0};  // soft minimum over the body circles

  PenaltyTerm drivable{40.0, 0.0};
  PenaltyTerm boxes{40.0, 0.5};
  PenaltyTerm reachable{20.0, 0.5};
  PenaltyTerm desired{20.0, 0.0};

  double w_ref{0.3};    // mean squared lateral offset of the circles
  double w_speed{0.5};  // (v - v_ref)^2
  double w_kinematic{100.0};
  double w_acc{0.2};
  double w_lat_acc{0.05};
  double w_jerk{0.05};
  double w_steer_rate{0.5};

  // Body covered by three circles along the heading.
  std::array<double, 3> circle_offsets{-1.6, 0.0, 1.6};
  double circle_radius{1.28};

  void validate() const;
};

/// Circle layout derived from the vehicle box: offsets -2/3, 0, 2/3 of the
/// half length, radius covering a third of the length and the full width.
CostModel default_cost_model(const VehicleParams& vehicle);

/// Per-node constraint handles. Pointers are non-owning.
struct NodeEnvironment {
  const Polygon* drivable{nullptr};
  std::vector<const Polygon*> boxes;      // agent footprints at this step
  std::vector<const Polygon*> reachable;  // reachable-set polygons at this step
  const Polygon* desired{nullptr};
  const Polyline* reference{nullptr};
  std::optional<double> speed_ref;
};

enum class CostTerm { Drivable, Boxes, Reachable, Desired, Reference, Speed, Kinematic, Comfort };
inline constexpr std::array<CostTerm, 8> kAllCostTerms{CostTerm::Drivable, CostTerm::Boxes,     CostTerm::Reachable,
                                                       CostTerm::Desired,  CostTerm::Reference, CostTerm::Speed,
                                                       CostTerm::Kinematic, CostTerm::Comfort};
bool is_safety_term(CostTerm term);

enum class HessianMode { GaussNewton, Exact };

struct CostExpansion {
  double value{0.0};
  StateVec lx{StateVec::Zero()};
  ControlVec lu{ControlVec::Zero()};
  StateMat lxx{StateMat::Zero()};
  Eigen::Matrix2d luu{Eigen::Matrix2d::Zero()};

  void add(const CostExpansion& o, double w = 1.0);
};

struct CostSplit {
  double safe{0.0};
  double non_safe{0.0};
};

struct SplitExpansion {
  CostExpansion safe;
  CostExpansion non_safe;
};

CostExpansion term_expansion(CostTerm term, const StateVec& x, const ControlVec& u, const NodeEnvironment& env,
                             const CostModel& model, HessianMode mode = HessianMode::Exact);
double term_value(CostTerm term, const StateVec& x, const ControlVec& u, const NodeEnvironment& env,
                  const CostModel& model);

CostSplit node_cost(const StateVec& x, const ControlVec& u, const NodeEnvironment& env, const CostModel& model);
SplitExpansion node_cost_expansion(const StateVec& x, const ControlVec& u, const NodeEnvironment& env,
                                   const CostModel& model, HessianMode mode);

/// Soft-minimum clearance of the body circles to an obstacle (positive
/// outside) or, with inside = true, to the boundary of a region the body
/// must stay in (positive inside).
double body_clearance(const StateVec& x, const Polygon& poly, bool inside, const CostModel& model);

}  // namespace riskplan
