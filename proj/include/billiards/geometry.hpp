#pragma once

// Planar geometry kernel: points, isometries, convex polygons, and the
// ray-exit primitive that every billiard simulation in this library is
// built on.  All tolerances are relative to the polygon diameter.

#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace billiards {

inline constexpr double kPi = 3.14159265358979323846;

struct Tolerances {
  double vertex_rel = 1e-9;  // vertex-hit window, x polygon diameter
  double line_rel = 1e-12;   // on-line / on-boundary window, x polygon diameter
};

struct Point2 {
  double x = 0.0;
  double y = 0.0;

  Point2 operator+(Point2 o) const { return {x + o.x, y + o.y}; }
  Point2 operator-(Point2 o) const { return {x - o.x, y - o.y}; }
  Point2 operator*(double s) const { return {x * s, y * s}; }
  Point2 operator/(double s) const { return {x / s, y / s}; }
  Point2 operator-() const { return {-x, -y}; }
};

inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point2 a) { return std::sqrt(a.x * a.x + a.y * a.y); }
inline double distance(Point2 a, Point2 b) { return norm(a - b); }
inline Point2 normalized(Point2 a) {
  double n = norm(a);
  if (n == 0.0) throw std::invalid_argument("normalized: zero vector");
  return a / n;
}
// Counterclockwise quarter turn.
inline Point2 rot90(Point2 a) { return {-a.y, a.x}; }
inline Point2 rotated(Point2 a, double radians) {
  double c = std::cos(radians), s = std::sin(radians);
  return {c * a.x - s * a.y, s * a.x + c * a.y};
}
inline Point2 direction_from_angle(double radians) {
  return {std::cos(radians), std::sin(radians)};
}

// Interior angle value in (0, pi).  Construction validates the range so
// degenerate shapes are rejected at the boundary of the API.
class Angle {
 public:
  explicit Angle(double radians) : radians_(radians) {
    if (!(radians > 0.0) || !(radians < kPi))
      throw std::invalid_argument("Angle: need 0 < radians < pi, got " +
                                  std::to_string(radians));
  }
  double radians() const { return radians_; }

 private:
  double radians_;
};

// Orientation-aware rigid motion p -> R(rotation) * F^{flip} * p + translation,
// where F is the reflection across the x axis.  Closed under composition and
// inversion; rotation is kept in (-pi, pi] so deep reflection chains do not
// accumulate unbounded angle magnitudes.
class PlanarIsometry {
 public:
  PlanarIsometry() = default;

  static PlanarIsometry identity() { return {}; }

  static PlanarIsometry rotation(double radians, Point2 about = {}) {
    PlanarIsometry m;
    m.rotation_ = std::remainder(radians, 2.0 * kPi);
    m.flip_ = false;
    m.translation_ = about - m.linear(about);
    return m;
  }

  // Reflection across the line through `on_line` with inclination `line_angle`.
  static PlanarIsometry reflection(Point2 on_line, double line_angle) {
    PlanarIsometry m;
    m.rotation_ = std::remainder(2.0 * line_angle, 2.0 * kPi);
    m.flip_ = true;
    m.translation_ = on_line - m.linear(on_line);
    return m;
  }

  int orientation() const { return flip_ ? -1 : +1; }
  double rotation_angle() const { return rotation_; }
  Point2 translation() const { return translation_; }

  // Linear part only: safe for directions.
  Point2 linear(Point2 d) const {
    if (flip_) d = {d.x, -d.y};
    return rotated(d, rotation_);
  }

  Point2 apply(Point2 p) const { return linear(p) + translation_; }

  // (*this) after `inner`: apply(p) == this->apply(inner.apply(p)).
  PlanarIsometry compose(const PlanarIsometry& inner) const {
    PlanarIsometry m;
    double s = flip_ ? -1.0 : 1.0;
    m.rotation_ = std::remainder(rotation_ + s * inner.rotation_, 2.0 * kPi);
    m.flip_ = (flip_ != inner.flip_);
    m.translation_ = linear(inner.translation_) + translation_;
    return m;
  }

  PlanarIsometry inverse() const {
    PlanarIsometry m;
    if (flip_) {
      // A reflection's linear part is an involution.
      m.rotation_ = rotation_;
      m.flip_ = true;
    } else {
      m.rotation_ = -rotation_;
      m.flip_ = false;
    }
    m.translation_ = -m.linear(translation_);
    return m;
  }

 private:
  double rotation_ = 0.0;
  bool flip_ = false;
  Point2 translation_{};
};

// Convex polygon with counterclockwise vertices.  Side i runs from vertex i
// to vertex (i+1) % size.
class ConvexPolygon {
 public:
  explicit ConvexPolygon(std::vector<Point2> vertices)
      : v_(std::move(vertices)) {
    if (v_.size() < 3)
      throw std::invalid_argument("ConvexPolygon: need at least 3 vertices");
    diameter_ = 0.0;
    for (size_t i = 0; i < v_.size(); ++i)
      for (size_t j = i + 1; j < v_.size(); ++j)
        diameter_ = std::max(diameter_, distance(v_[i], v_[j]));
    for (size_t i = 0; i < v_.size(); ++i) {
      Point2 a = side_vector(static_cast<int>(i));
      Point2 b = side_vector(static_cast<int>((i + 1) % v_.size()));
      if (cross(a, b) <= 0.0)
        throw std::invalid_argument(
            "ConvexPolygon: vertices must be strictly convex and CCW");
    }
    normals_.resize(v_.size());
    offsets_.resize(v_.size());
    for (size_t i = 0; i < v_.size(); ++i) {
      Point2 d = normalized(side_vector(static_cast<int>(i)));
      normals_[i] = {d.y, -d.x};  // interior lies left of a CCW edge
      offsets_[i] = dot(v_[i], normals_[i]);
    }
  }

  int size() const { return static_cast<int>(v_.size()); }
  Point2 vertex(int i) const { return v_[wrap(i)]; }
  Point2 side_start(int i) const { return v_[wrap(i)]; }
  Point2 side_end(int i) const { return v_[wrap(i + 1)]; }
  Point2 side_vector(int i) const { return side_end(i) - side_start(i); }
  double side_length(int i) const { return norm(side_vector(i)); }
  double side_inclination(int i) const {
    Point2 d = side_vector(i);
    return std::atan2(d.y, d.x);
  }
  Point2 outward_normal(int i) const { return normals_[wrap(i)]; }
  double diameter() const { return diameter_; }

  Point2 centroid() const {
    Point2 c{};
    for (Point2 p : v_) c = c + p;
    return c / static_cast<double>(v_.size());
  }

  // Signed distance to the boundary along side i's outward normal
  // (positive outside the half-plane of side i).
  double side_excess(int i, Point2 p) const {
    int k = wrap(i);
    return dot(p, normals_[k]) - offsets_[k];
  }

  bool contains(Point2 p, double slack_abs) const {
    for (int i = 0; i < size(); ++i)
      if (side_excess(i, p) > slack_abs) return false;
    return true;
  }

  // Interior angle at vertex i.
  double vertex_angle(int i) const {
    Point2 to_prev = normalized(vertex(i - 1 + size()) - vertex(i));
    Point2 to_next = normalized(vertex(i + 1) - vertex(i));
    return std::atan2(std::abs(cross(to_next, to_prev)), dot(to_next, to_prev));
  }

 private:
  int wrap(int i) const { return ((i % size()) + size()) % size(); }
  std::vector<Point2> v_;
  std::vector<Point2> normals_;
  std::vector<double> offsets_;
  double diameter_ = 0.0;
};

// Outcomes of shooting a ray from inside (or from the boundary of) a convex
// polygon.  A ray passing within the vertex window of any corner terminates
// there: corners are singular for the billiard flow and must never be
// silently crossed.
struct SideHit {
  int side = -1;
  Point2 point{};
  double t = 0.0;  // arc length along the ray
};
struct VertexHit {
  int vertex = -1;
  Point2 point{};
  double t = 0.0;
};
using RayExit = std::variant<SideHit, VertexHit>;

inline RayExit ray_exit(const ConvexPolygon& poly, Point2 origin, Point2 dir,
                        const Tolerances& tol = {}) {
  double diam = poly.diameter();
  double eps_line = tol.line_rel * diam;
  double eps_vertex = tol.vertex_rel * diam;
  if (norm(dir) == 0.0) throw std::invalid_argument("ray_exit: zero direction");
  Point2 d = normalized(dir);

  if (!poly.contains(origin, eps_vertex))
    throw std::invalid_argument("ray_exit: origin outside the polygon");

  // First boundary crossing: minimum positive distance over the sides the
  // ray is leaving through.
  double t_exit = std::numeric_limits<double>::infinity();
  int exit_side = -1;
  for (int i = 0; i < poly.size(); ++i) {
    double dn = dot(d, poly.outward_normal(i));
    if (dn <= 0.0) continue;
    double t = -poly.side_excess(i, origin) / dn;
    if (t < t_exit) {
      t_exit = t;
      exit_side = i;
    }
  }
  if (exit_side < 0 || !std::isfinite(t_exit))
    throw std::invalid_argument("ray_exit: ray never leaves the polygon");
  if (t_exit < 10.0 * eps_line)
    throw std::invalid_argument(
        "ray_exit: direction points outward from a boundary origin");

  // Corner passage scan, excluding corners the ray legitimately starts at.
  double best_t = std::numeric_limits<double>::infinity();
  int best_vertex = -1;
  for (int i = 0; i < poly.size(); ++i) {
    Point2 w = poly.vertex(i);
    Point2 u = w - origin;
    if (norm(u) <= eps_vertex) continue;  // departing corner
    double tw = dot(u, d);
    if (tw <= 0.0 || tw > t_exit + eps_vertex) continue;
    double miss = norm(u - d * tw);
    if (miss <= eps_vertex && tw < best_t) {
      best_t = tw;
      best_vertex = i;
    }
  }
  if (best_vertex >= 0)
    return VertexHit{best_vertex, poly.vertex(best_vertex), best_t};
  return SideHit{exit_side, origin + d * t_exit, t_exit};
}

// Specular reflection of a direction off side i.
inline Point2 reflect_direction(const ConvexPolygon& poly, int side, Point2 d) {
  Point2 n = poly.outward_normal(side);
  return d - n * (2.0 * dot(d, n));
}

struct Segment {
  Point2 a{};
  Point2 b{};
};

// Reflection across the segment's supporting line, composed after `iso`.
// This is the unfolding step: the new frame is the mirror image of the
// old one, so orientation always flips.
inline PlanarIsometry reflect_across_segment(const PlanarIsometry& iso,
                                             const Segment& seg) {
  Point2 dv = seg.b - seg.a;
  if (norm(dv) == 0.0)
    throw std::invalid_argument("reflect_across_segment: degenerate segment");
  double angle = std::atan2(dv.y, dv.x);
  return PlanarIsometry::reflection(seg.a, angle).compose(iso);
}

// Right triangle with the right angle at the origin, the leg of length
// `leg_adjacent` along +x, and the prescribed acute angle at vertex 1.
// Vertex ids: 0 = right angle, 1 = (leg_adjacent, 0), 2 = (0, leg_opposite).
struct RightTriangle {
  RightTriangle(Angle acute_angle, double leg)
      : acute(acute_angle), leg_adjacent(leg) {
    if (!(acute.radians() < kPi / 2.0))
      throw std::invalid_argument("RightTriangle: acute angle must be < pi/2");
    if (!(leg_adjacent > 0.0))
      throw std::invalid_argument("RightTriangle: leg must be positive");
  }

  Angle acute;
  double leg_adjacent;

  double leg_opposite() const {
    return leg_adjacent * std::tan(acute.radians());
  }

  ConvexPolygon polygon() const {
    return ConvexPolygon({{0.0, 0.0},
                          {leg_adjacent, 0.0},
                          {0.0, leg_opposite()}});
  }
};

// Rhombus given by its half-diagonals, centered at the local origin with
// the diagonals along the axes.  Vertex ids: 0 = (+h, 0), 1 = (0, +v),
// 2 = (-h, 0), 3 = (0, -v); side i joins vertex i to vertex i+1.
struct Rhombus {
  Rhombus(double half_h, double half_v,
          PlanarIsometry pose_in = PlanarIsometry::identity())
      : half_horizontal(half_h), half_vertical(half_v), pose(pose_in) {
    if (!(half_horizontal > 0.0) || !(half_vertical > 0.0))
      throw std::invalid_argument("Rhombus: half-diagonals must be positive");
    if (pose.orientation() < 0)
      throw std::invalid_argument("Rhombus: pose must preserve orientation");
  }

  double half_horizontal;
  double half_vertical;
  PlanarIsometry pose;

  std::array<Point2, 4> local_vertices() const {
    return {Point2{half_horizontal, 0.0}, Point2{0.0, half_vertical},
            Point2{-half_horizontal, 0.0}, Point2{0.0, -half_vertical}};
  }

  ConvexPolygon polygon() const {
    std::vector<Point2> v;
    for (Point2 p : local_vertices()) v.push_back(pose.apply(p));
    return ConvexPolygon(std::move(v));
  }

  // Interior angle at the horizontal-diagonal vertices (ids 0 and 2).
  Angle vertex_angle_horizontal() const {
    return Angle(2.0 * std::atan2(half_vertical, half_horizontal));
  }
  // Interior angle at the vertical-diagonal vertices (ids 1 and 3).
  Angle vertex_angle_vertical() const {
    return Angle(2.0 * std::atan2(half_horizontal, half_vertical));
  }
  Angle vertex_angle(int vertex_id) const {
    return (vertex_id % 2 == 0) ? vertex_angle_horizontal()
                                : vertex_angle_vertical();
  }
};

// Reflect the triangle three times about its right-angle vertex: the four
// copies tile a rhombus whose half-diagonals are the two legs, and whose
// angle at the horizontal vertices is twice the triangle's acute angle.
inline Rhombus triangle_to_rhombus(const RightTriangle& t) {
  return Rhombus(t.leg_adjacent, t.leg_opposite());
}

}  // namespace billiards
