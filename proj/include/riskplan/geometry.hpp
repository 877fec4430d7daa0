#pragma once

#include <Eigen/Core>

#include <cmath>
#include <span>
#include <vector>

namespace riskplan {

struct Point2 {
  double x{0.0};
  double y{0.0};

  Point2 operator+(const Point2& o) const { return {x + o.x, y + o.y}; }
  Point2 operator-(const Point2& o) const { return {x - o.x, y - o.y}; }
  Point2 operator*(double k) const { return {x * k, y * k}; }
  bool operator==(const Point2&) const = default;

  double dot(const Point2& o) const { return x * o.x + y * o.y; }
  double cross(const Point2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
};

inline double distance(const Point2& a, const Point2& b) { return (a - b).norm(); }

/// Closest point on segment [a, b] to p.
Point2 closest_point_on_segment(const Point2& p, const Point2& a, const Point2& b);

/// Open polyline with cached cumulative arc length. Consecutive points must be
/// distinct; construction throws std::invalid_argument otherwise.
class Polyline {
 public:
  struct Projection {
    double s{0.0};  // arc length of the foot point
    double d{0.0};  // signed lateral offset, positive to the left
    Point2 foot;
    std::size_t segment{0};
  };

  explicit Polyline(std::vector<Point2> points);

  const std::vector<Point2>& points() const { return points_; }
  const std::vector<double>& arc_lengths() const { return arc_; }
  double length() const { return arc_.back(); }

  Projection project(const Point2& p) const;
  Point2 point_at(double s) const;
  double heading_at(double s) const;
  /// Point at arc length s shifted by lateral offset d (left positive).
  Point2 frenet_to_cartesian(double s, double d) const;

  /// Polyline shifted laterally by d; vertex normals are averaged at joints.
  Polyline offset(double d) const;
  /// Sub-polyline covering [s0, s1] (clamped to the line).
  Polyline slice(double s0, double s1) const;

 private:
  std::size_t segment_at(double s) const;

  std::vector<Point2> points_;
  std::vector<double> arc_;
};

/// Simple polygon stored counter-clockwise. Clockwise input is reversed,
/// repeated and collinear vertices are dropped. Degenerate (area < 1e-12 m^2)
/// or self-intersecting input throws std::invalid_argument.
class Polygon {
 public:
  explicit Polygon(std::vector<Point2> vertices);

  const std::vector<Point2>& vertices() const { return vertices_; }
  std::size_t size() const { return vertices_.size(); }
  double area() const { return area_; }
  Point2 centroid() const;

  /// Winding-number containment; boundary points count as inside.
  bool contains(const Point2& p) const;

  double min_x() const { return min_x_; }
  double max_x() const { return max_x_; }
  double min_y() const { return min_y_; }
  double max_y() const { return max_y_; }

 private:
  std::vector<Point2> vertices_;
  double area_{0.0};
  double min_x_{0.0}, max_x_{0.0}, min_y_{0.0}, max_y_{0.0};
};

/// Shoelace area, positive for counter-clockwise rings.
double signed_area(std::span<const Point2> ring);

/// Positive outside, zero on the boundary, negative inside.
double signed_distance(const Point2& p, const Polygon& poly);

/// Signed distance with its first and second derivatives with respect to p.
/// The Hessian is zero when the closest feature is an edge interior and
/// (I - n n^T) / |p - v| (signed) when it is a vertex.
struct DistanceExpansion {
  double value{0.0};
  Eigen::Vector2d gradient{Eigen::Vector2d::Zero()};
  Eigen::Matrix2d hessian{Eigen::Matrix2d::Zero()};
};
DistanceExpansion signed_distance_expansion(const Point2& p, const Polygon& poly);

bool segments_intersect(const Point2& a0, const Point2& a1, const Point2& b0, const Point2& b1);
bool polygons_intersect(const Polygon& a, const Polygon& b);
/// Euclidean gap between two polygons, zero when they touch or overlap.
double polygon_distance(const Polygon& a, const Polygon& b);

/// Oriented rectangle centred at `center`, optionally inflated on every side.
Polygon make_box(const Point2& center, double heading, double half_length, double half_width,
                 double inflation = 0.0);

/// Band of half-width `half_width` around `line` between arc lengths s0 and
/// s1 (clamped to the line).
Polygon strip_polygon(const Polyline& line, double s0, double s1, double half_width);

/// S_beta(G) = sum exp(beta g_i) g_i / sum exp(beta g_i), evaluated with the
/// max-shift so large |beta g| does not overflow. beta < 0 gives a soft minimum.
double smooth_aggregate(std::span<const double> values, double beta);

struct AggregateExpansion {
  double value{0.0};
  Eigen::VectorXd gradient;
  Eigen::MatrixXd hessian;
};
AggregateExpansion smooth_aggregate_expansion(std::span<const double> values, double beta);

/// Union of the inputs as a set of disjoint simple polygons. Holes enclosed by
/// the union are filled (the result over-covers such regions).
std::vector<Polygon> occupancy_union(const std::vector<Polygon>& polygons);

bool point_in_any(const Point2& p, const std::vector<Polygon>& polygons);

}  // namespace riskplan
