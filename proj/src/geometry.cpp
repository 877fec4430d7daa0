#include "riskplan/geometry.hpp"

#include <boost/geometry.hpp>
#include <boost/geometry/geometries/point_xy.hpp>
#include <boost/geometry/geometries/polygon.hpp>
#include <boost/geometry/geometries/multi_polygon.hpp>

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace riskplan {
namespace {

constexpr double kPointEps = 1e-12;
constexpr double kMinArea = 1e-12;

double orientation(const Point2& a, const Point2& b, const Point2& c) {
  return (b - a).cross(c - a);
}

bool on_segment(const Point2& p, const Point2& a, const Point2& b) {
  return std::min(a.x, b.x) - kPointEps <= p.x && p.x <= std::max(a.x, b.x) + kPointEps &&
         std::min(a.y, b.y) - kPointEps <= p.y && p.y <= std::max(a.y, b.y) + kPointEps;
}

int sign_of(double v) {
  if (v > kPointEps) return 1;
  if (v < -kPointEps) return -1;
  return 0;
}

std::vector<Point2> drop_repeats(std::vector<Point2> pts) {
  std::vector<Point2> out;
  out.reserve(pts.size());
  for (const auto& p : pts) {
    if (out.empty() || distance(out.back(), p) > kPointEps) out.push_back(p);
  }
  while (out.size() > 1 && distance(out.front(), out.back()) <= kPointEps) out.pop_back();
  return out;
}

// Removes vertices whose neighbours are collinear with them (straight runs and
// zero-width spikes alike).
std::vector<Point2> drop_collinear(std::vector<Point2> pts) {
  bool changed = true;
  while (changed && pts.size() >= 3) {
    changed = false;
    for (std::size_t i = 0; i < pts.size() && pts.size() >= 3; ++i) {
      const Point2& prev = pts[(i + pts.size() - 1) % pts.size()];
      const Point2& next = pts[(i + 1) % pts.size()];
      const Point2 e0 = pts[i] - prev;
      const Point2 e1 = next - pts[i];
      const double scale = std::max(e0.norm() * e1.norm(), kPointEps);
      if (std::abs(e0.cross(e1)) <= 1e-12 * scale) {
        pts.erase(pts.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
        break;
      }
    }
  }
  return pts;
}

namespace bg = boost::geometry;
using BgPoint = bg::model::d2::point_xy<double>;
using BgPolygon = bg::model::polygon<BgPoint, false, false>;
using BgMulti = bg::model::multi_polygon<BgPolygon>;

BgPolygon to_boost(const Polygon& poly) {
  BgPolygon out;
  for (const auto& v : poly.vertices()) out.outer().emplace_back(v.x, v.y);
  return out;
}

}  // namespace

Point2 closest_point_on_segment(const Point2& p, const Point2& a, const Point2& b) {
  const Point2 ab = b - a;
  const double len2 = ab.dot(ab);
  if (len2 <= 0.0) return a;
  const double t = std::clamp((p - a).dot(ab) / len2, 0.0, 1.0);
  return a + ab * t;
}

// ---------------------------------------------------------------- Polyline

Polyline::Polyline(std::vector<Point2> points) : points_(std::move(points)) {
  if (points_.size() < 2) throw std::invalid_argument("polyline needs at least two points");
  arc_.reserve(points_.size());
  arc_.push_back(0.0);
  for (std::size_t i = 1; i < points_.size(); ++i) {
    const double seg = distance(points_[i - 1], points_[i]);
    if (!(seg > kPointEps)) throw std::invalid_argument("polyline has repeated consecutive points");
    arc_.push_back(arc_.back() + seg);
  }
}

std::size_t Polyline::segment_at(double s) const {
  if (s <= 0.0) return 0;
  const auto it = std::upper_bound(arc_.begin(), arc_.end(), s);
  const auto idx = static_cast<std::size_t>(std::distance(arc_.begin(), it));
  return std::min(idx == 0 ? 0 : idx - 1, points_.size() - 2);
}

Polyline::Projection Polyline::project(const Point2& p) const {
  Projection best;
  double best_dist = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
    const Point2& a = points_[i];
    const Point2& b = points_[i + 1];
    const Point2 foot = closest_point_on_segment(p, a, b);
    const double dist = distance(p, foot);
    if (dist < best_dist) {
      best_dist = dist;
      best.foot = foot;
      best.segment = i;
      best.s = arc_[i] + distance(a, foot);
    }
  }
  const Point2 dir = points_[best.segment + 1] - points_[best.segment];
  best.d = dir.cross(p - best.foot) >= 0.0 ? best_dist : -best_dist;
  return best;
}

Point2 Polyline::point_at(double s) const {
  s = std::clamp(s, 0.0, length());
  const std::size_t i = segment_at(s);
  const double seg = arc_[i + 1] - arc_[i];
  const double t = (s - arc_[i]) / seg;
  return points_[i] + (points_[i + 1] - points_[i]) * t;
}

double Polyline::heading_at(double s) const {
  const std::size_t i = segment_at(std::clamp(s, 0.0, length()));
  const Point2 d = points_[i + 1] - points_[i];
  return std::atan2(d.y, d.x);
}

Point2 Polyline::frenet_to_cartesian(double s, double d) const {
  const double h = heading_at(s);
  return point_at(s) + Point2{-std::sin(h), std::cos(h)} * d;
}

Polyline Polyline::offset(double d) const {
  std::vector<Point2> out;
  out.reserve(points_.size());
  auto normal = [&](std::size_t seg) {
    const Point2 t = points_[seg + 1] - points_[seg];
    const double n = t.norm();
    return Point2{-t.y / n, t.x / n};
  };
  for (std::size_t i = 0; i < points_.size(); ++i) {
    Point2 n;
    if (i == 0) {
      n = normal(0);
    } else if (i + 1 == points_.size()) {
      n = normal(i - 1);
    } else {
      const Point2 n0 = normal(i - 1);
      const Point2 n1 = normal(i);
      Point2 avg = n0 + n1;
      const double len = avg.norm();
      avg = len > 1e-9 ? avg * (1.0 / len) : n1;
      const double c = std::max(avg.dot(n1), 0.2);
      n = avg * (1.0 / c);
    }
    const Point2 q = points_[i] + n * d;
    if (out.empty() || distance(out.back(), q) > 1e-9) out.push_back(q);
  }
  return Polyline(std::move(out));
}

Polyline Polyline::slice(double s0, double s1) const {
  s0 = std::clamp(s0, 0.0, length());
  s1 = std::clamp(s1, 0.0, length());
  if (s1 - s0 < 1e-6) throw std::invalid_argument("slice shorter than 1e-6 m");
  std::vector<Point2> out{point_at(s0)};
  for (std::size_t i = 0; i < points_.size(); ++i) {
    if (arc_[i] > s0 + 1e-9 && arc_[i] < s1 - 1e-9) out.push_back(points_[i]);
  }
  out.push_back(point_at(s1));
  return Polyline(std::move(out));
}

// ----------------------------------------------------------------- Polygon

double signed_area(std::span<const Point2> ring) {
  double acc = 0.0;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    acc += ring[i].cross(ring[(i + 1) % ring.size()]);
  }
  return 0.5 * acc;
}

Polygon::Polygon(std::vector<Point2> vertices) {
  for (const auto& v : vertices) {
    if (!std::isfinite(v.x) || !std::isfinite(v.y)) {
      throw std::invalid_argument("polygon vertex is not finite");
    }
  }
  vertices = drop_repeats(std::move(vertices));
  if (signed_area(vertices) < 0.0) std::reverse(vertices.begin(), vertices.end());
  vertices = drop_collinear(std::move(vertices));
  if (vertices.size() < 3) throw std::invalid_argument("polygon needs at least three vertices");
  area_ = signed_area(vertices);
  if (area_ < kMinArea) throw std::invalid_argument("degenerate polygon");

  const std::size_t n = vertices.size();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      if (segments_intersect(vertices[i], vertices[(i + 1) % n], vertices[j], vertices[(j + 1) % n])) {
        throw std::invalid_argument("polygon is not simple");
      }
    }
  }
  vertices_ = std::move(vertices);
  min_x_ = max_x_ = vertices_[0].x;
  min_y_ = max_y_ = vertices_[0].y;
  for (const auto& v : vertices_) {
    min_x_ = std::min(min_x_, v.x);
    max_x_ = std::max(max_x_, v.x);
    min_y_ = std::min(min_y_, v.y);
    max_y_ = std::max(max_y_, v.y);
  }
}

Point2 Polygon::centroid() const {
  double cx = 0.0, cy = 0.0;
  const std::size_t n = vertices_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& a = vertices_[i];
    const Point2& b = vertices_[(i + 1) % n];
    const double c = a.cross(b);
    cx += (a.x + b.x) * c;
    cy += (a.y + b.y) * c;
  }
  return {cx / (6.0 * area_), cy / (6.0 * area_)};
}

bool Polygon::contains(const Point2& p) const {
  if (p.x < min_x_ - kPointEps || p.x > max_x_ + kPointEps || p.y < min_y_ - kPointEps ||
      p.y > max_y_ + kPointEps) {
    return false;
  }
  int winding = 0;
  const std::size_t n = vertices_.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& a = vertices_[i];
    const Point2& b = vertices_[(i + 1) % n];
    if (distance(p, closest_point_on_segment(p, a, b)) <= kPointEps) return true;
    if (a.y <= p.y) {
      if (b.y > p.y && orientation(a, b, p) > 0.0) ++winding;
    } else if (b.y <= p.y && orientation(a, b, p) < 0.0) {
      --winding;
    }
  }
  return winding != 0;
}

double signed_distance(const Point2& p, const Polygon& poly) {
  double best = std::numeric_limits<double>::infinity();
  const auto& v = poly.vertices();
  for (std::size_t i = 0; i < v.size(); ++i) {
    best = std::min(best, distance(p, closest_point_on_segment(p, v[i], v[(i + 1) % v.size()])));
  }
  if (best <= kPointEps) return 0.0;
  return poly.contains(p) ? -best : best;
}

DistanceExpansion signed_distance_expansion(const Point2& p, const Polygon& poly) {
  const auto& v = poly.vertices();
  const std::size_t n = v.size();
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_edge = 0;
  double best_t = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& a = v[i];
    const Point2 ab = v[(i + 1) % n] - a;
    const double t = std::clamp((p - a).dot(ab) / ab.dot(ab), 0.0, 1.0);
    const double dist = distance(p, a + ab * t);
    if (dist < best) {
      best = dist;
      best_edge = i;
      best_t = t;
    }
  }
  DistanceExpansion out;
  const double sgn = poly.contains(p) && best > kPointEps ? -1.0 : 1.0;
  out.value = best <= kPointEps ? 0.0 : sgn * best;

  const Point2& a = v[best_edge];
  const Point2 ab = v[(best_edge + 1) % n] - a;
  if (best_t > 0.0 && best_t < 1.0) {
    const double len = ab.norm();
    out.gradient = Eigen::Vector2d(ab.y / len, -ab.x / len);  // outward normal of a CCW edge
    return out;
  }
  const Point2 vertex = best_t <= 0.0 ? a : a + ab;
  if (best <= kPointEps) {
    const double len = ab.norm();
    out.gradient = Eigen::Vector2d(ab.y / len, -ab.x / len);
    return out;
  }
  const Eigen::Vector2d u((p.x - vertex.x) / best, (p.y - vertex.y) / best);
  out.gradient = sgn * u;
  out.hessian = sgn * (Eigen::Matrix2d::Identity() - u * u.transpose()) / best;
  return out;
}

bool segments_intersect(const Point2& a0, const Point2& a1, const Point2& b0, const Point2& b1) {
  const int o1 = sign_of(orientation(a0, a1, b0));
  const int o2 = sign_of(orientation(a0, a1, b1));
  const int o3 = sign_of(orientation(b0, b1, a0));
  const int o4 = sign_of(orientation(b0, b1, a1));
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(b0, a0, a1)) return true;
  if (o2 == 0 && on_segment(b1, a0, a1)) return true;
  if (o3 == 0 && on_segment(a0, b0, b1)) return true;
  if (o4 == 0 && on_segment(a1, b0, b1)) return true;
  return false;
}

bool polygons_intersect(const Polygon& a, const Polygon& b) {
  if (a.max_x() < b.min_x() || b.max_x() < a.min_x() || a.max_y() < b.min_y() ||
      b.max_y() < a.min_y()) {
    return false;
  }
  const auto& va = a.vertices();
  const auto& vb = b.vertices();
  for (std::size_t i = 0; i < va.size(); ++i) {
    for (std::size_t j = 0; j < vb.size(); ++j) {
      if (segments_intersect(va[i], va[(i + 1) % va.size()], vb[j], vb[(j + 1) % vb.size()])) {
        return true;
      }
    }
  }
  return a.contains(vb[0]) || b.contains(va[0]);
}

double polygon_distance(const Polygon& a, const Polygon& b) {
  if (polygons_intersect(a, b)) return 0.0;
  double best = std::numeric_limits<double>::infinity();
  auto scan = [&best](const Polygon& from, const Polygon& to) {
    const auto& vt = to.vertices();
    for (const auto& p : from.vertices()) {
      for (std::size_t j = 0; j < vt.size(); ++j) {
        best = std::min(best, distance(p, closest_point_on_segment(p, vt[j], vt[(j + 1) % vt.size()])));
      }
    }
  };
  scan(a, b);
  scan(b, a);
  return best;
}

Polygon strip_polygon(const Polyline& line, double s0, double s1, double half_width) {
  const Polyline piece = line.slice(std::max(0.0, s0), std::min(line.length(), s1));
  const Polyline left = piece.offset(half_width);
  const Polyline right = piece.offset(-half_width);
  std::vector<Point2> ring(right.points().begin(), right.points().end());
  ring.insert(ring.end(), left.points().rbegin(), left.points().rend());
  return Polygon(std::move(ring));
}

Polygon make_box(const Point2& center, double heading, double half_length, double half_width,
                 double inflation) {
  const double hl = half_length + inflation;
  const double hw = half_width + inflation;
  const Point2 t{std::cos(heading), std::sin(heading)};
  const Point2 n{-t.y, t.x};
  return Polygon({center - t * hl - n * hw, center + t * hl - n * hw, center + t * hl + n * hw,
                  center - t * hl + n * hw});
}

// ------------------------------------------------------- smooth aggregation

double smooth_aggregate(std::span<const double> values, double beta) {
  if (values.empty()) throw std::invalid_argument("smooth_aggregate of an empty set");
  double shift = -std::numeric_limits<double>::infinity();
  for (double g : values) shift = std::max(shift, beta * g);
  double num = 0.0, den = 0.0;
  for (double g : values) {
    const double w = std::exp(beta * g - shift);
    num += w * g;
    den += w;
  }
  return num / den;
}

AggregateExpansion smooth_aggregate_expansion(std::span<const double> values, double beta) {
  if (values.empty()) throw std::invalid_argument("smooth_aggregate of an empty set");
  const auto n = static_cast<Eigen::Index>(values.size());
  double shift = -std::numeric_limits<double>::infinity();
  for (double g : values) shift = std::max(shift, beta * g);
  Eigen::VectorXd w(n);
  for (Eigen::Index i = 0; i < n; ++i) w[i] = std::exp(beta * values[static_cast<std::size_t>(i)] - shift);
  w /= w.sum();

  AggregateExpansion out;
  out.value = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) out.value += w[i] * values[static_cast<std::size_t>(i)];

  // dS/dg_i = w_i (1 + beta (g_i - S))
  Eigen::VectorXd c(n);
  for (Eigen::Index i = 0; i < n; ++i) c[i] = 1.0 + beta * (values[static_cast<std::size_t>(i)] - out.value);
  out.gradient = w.cwiseProduct(c);

  out.hessian.resize(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const double kd = i == j ? 1.0 : 0.0;
      out.hessian(i, j) = beta * w[i] * (kd - w[j]) * c[i] + beta * w[i] * (kd - out.gradient[j]);
    }
  }
  return out;
}

// ---------------------------------------------------------- occupancy union

std::vector<Polygon> occupancy_union(const std::vector<Polygon>& polygons) {
  const std::size_t n = polygons.size();
  // Connected components of the overlap graph; untouched polygons pass through.
  std::vector<std::size_t> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&parent](std::size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (polygons_intersect(polygons[i], polygons[j])) parent[find(i)] = find(j);
    }
  }

  std::vector<Polygon> out;
  std::vector<bool> done(n, false);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t root = find(i);
    if (done[root]) continue;
    done[root] = true;
    std::vector<std::size_t> members;
    for (std::size_t j = i; j < n; ++j) {
      if (find(j) == root) members.push_back(j);
    }
    if (members.size() == 1) {
      out.push_back(polygons[members[0]]);
      continue;
    }
    BgMulti acc;
    acc.push_back(to_boost(polygons[members[0]]));
    for (std::size_t m = 1; m < members.size(); ++m) {
      BgMulti next;
      bg::union_(acc, to_boost(polygons[members[m]]), next);
      acc = std::move(next);
    }
    for (const auto& part : acc) {
      std::vector<Point2> ring;
      ring.reserve(part.outer().size());
      for (const auto& p : part.outer()) ring.push_back({p.x(), p.y()});
      try {
        out.emplace_back(std::move(ring));
      } catch (const std::invalid_argument&) {
        // sliver below the area floor left by the clipper
      }
    }
  }
  return out;
}

bool point_in_any(const Point2& p, const std::vector<Polygon>& polygons) {
  return std::any_of(polygons.begin(), polygons.end(),
                     [&p](const Polygon& poly) { return poly.contains(p); });
}

}  // namespace riskplan
