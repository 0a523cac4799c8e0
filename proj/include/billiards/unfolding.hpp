#pragma once

// Unfolding engine: angular beam propagation in the unfolded plane.
//
// Fix a convex polygon and one of its vertices (the apex).  Replacing each
// reflection of an orbit by a reflection of the polygon turns every orbit
// leaving the apex into a straight ray, and the polygon into a chain of
// mirror images.  Directions that share the same chain for the first k
// crossings form an angular interval (a beam).  A vertex image falling
// strictly inside a beam is the far end of a vertex-to-vertex orbit with
// exactly k reflections; it is recorded once, at the depth where it first
// appears, and splits the beam for deeper propagation.

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "billiards/geometry.hpp"

namespace billiards {

// Thrown when beam propagation would exceed its node budget.  Enumeration
// never truncates silently: callers either get the full forest or this.
class BudgetExceeded : public std::runtime_error {
 public:
  BudgetExceeded(long budget, int depth_reached)
      : std::runtime_error("beam propagation exceeded node budget " +
                           std::to_string(budget) + " at depth " +
                           std::to_string(depth_reached)),
        budget(budget),
        depth_reached(depth_reached) {}
  long budget;
  int depth_reached;
};

using Itinerary = std::vector<int>;

// Vertex-to-vertex orbit from the apex, recorded in the polygon's frame.
struct GeneralizedDiagonal {
  int source_vertex = -1;
  int target_vertex = -1;
  int reflections = 0;          // algebraic length
  double direction = 0.0;       // initial direction, radians
  double normalized_direction = 0.0;  // position in (0,1) across the apex sector
  double reverse_direction = 0.0;  // outgoing direction of the reversed orbit
  double length = 0.0;          // Euclidean length of the unfolded chord
  Itinerary itinerary;          // side ids crossed, length == reflections
};

// Maximal interval of directions whose orbits share one itinerary for
// `depth` reflections and avoid all vertices up to that depth.
struct AngularBeam {
  int apex = -1;
  double theta_lo = 0.0;
  double theta_hi = 0.0;
  int depth = 0;
  Itinerary itinerary;
  PlanarIsometry frame;  // development isometry of the deepest polygon image
};

struct BeamOptions {
  long node_budget = 10'000'000;
  double split_eps = 1e-12;  // radians: strictly-inside margin at beam edges
  Tolerances tol{};
};

struct BeamForest {
  int apex = -1;
  int n_max = 0;
  double theta_lo = 0.0;  // root sector (open): directions along the two sides
  double theta_hi = 0.0;
  std::vector<GeneralizedDiagonal> diagonals;  // depth-major, then by direction
  std::vector<AngularBeam> leaves;             // left to right
  long nodes_processed = 0;
};

namespace detail {

struct BeamNode {
  PlanarIsometry iso;
  int depth = 0;
  double lo = 0.0, hi = 0.0;
  Itinerary itinerary;
};

// Exit side (local id) of the polygon image iso(poly) along the ray
// origin + t*d, assuming the ray does cross the image.
inline int image_exit_side(const ConvexPolygon& poly,
                           const PlanarIsometry& iso, Point2 origin,
                           Point2 d) {
  double best_t = std::numeric_limits<double>::infinity();
  int best = -1;
  for (int s = 0; s < poly.size(); ++s) {
    Point2 a = iso.apply(poly.side_start(s));
    Point2 n = iso.linear(poly.outward_normal(s));
    double dn = dot(d, n);
    if (dn <= 1e-15) continue;
    double t = dot(a - origin, n) / dn;
    if (t < best_t) {
      best_t = t;
      best = s;
    }
  }
  if (best < 0)
    throw std::logic_error("image_exit_side: beam ray misses the image");
  return best;
}

}  // namespace detail

inline BeamForest propagate_beams(const ConvexPolygon& poly, int apex_vertex,
                                  int n_max, const BeamOptions& opts = {}) {
  if (apex_vertex < 0 || apex_vertex >= poly.size())
    throw std::invalid_argument("propagate_beams: apex out of range");
  if (n_max < 0) throw std::invalid_argument("propagate_beams: n_max < 0");
  if (opts.node_budget < 1)
    throw std::invalid_argument("propagate_beams: node budget < 1");

  const Point2 apex = poly.vertex(apex_vertex);
  const Point2 u_next = normalized(poly.vertex(apex_vertex + 1) - apex);
  const Point2 u_prev =
      normalized(poly.vertex(apex_vertex - 1 + poly.size()) - apex);

  // All directions of interest live in the apex sector, whose width is the
  // interior angle (< pi).  Measuring angles relative to the bisector keeps
  // the atan2 branch cut on the far side of the sector.
  const Point2 bisector = normalized(u_next + u_prev);
  const double theta_ref = std::atan2(bisector.y, bisector.x);
  auto frame_angle = [theta_ref](Point2 u) {
    double raw = std::atan2(u.y, u.x);
    return theta_ref + std::remainder(raw - theta_ref, 2.0 * kPi);
  };

  BeamForest out;
  out.apex = apex_vertex;
  out.n_max = n_max;
  out.theta_lo = frame_angle(u_next);
  out.theta_hi = frame_angle(u_prev);
  if (!(out.theta_lo < out.theta_hi))
    throw std::logic_error("propagate_beams: degenerate apex sector");
  const double sector = out.theta_hi - out.theta_lo;

  // Local reflections across the supporting lines of the sides; the
  // development isometry of a child image is the parent's composed with the
  // reflection across the exit side, written in local coordinates.
  std::vector<PlanarIsometry> side_reflection;
  for (int s = 0; s < poly.size(); ++s)
    side_reflection.push_back(PlanarIsometry::reflection(
        poly.side_start(s), poly.side_inclination(s)));

  std::deque<detail::BeamNode> queue;
  queue.push_back({PlanarIsometry::identity(), 0, out.theta_lo, out.theta_hi,
                   {}});

  struct VertexEvent {
    double theta;
    double dist;
    int local_id;
  };

  while (!queue.empty()) {
    detail::BeamNode node = std::move(queue.front());
    queue.pop_front();
    if (++out.nodes_processed > opts.node_budget)
      throw BudgetExceeded(opts.node_budget, node.depth);

    // Vertex images strictly inside the beam, nearest first on ties: a ray
    // aligned with two images ends at the nearer one.
    std::vector<VertexEvent> events;
    for (int j = 0; j < poly.size(); ++j) {
      Point2 u = node.iso.apply(poly.vertex(j)) - apex;
      double dist = norm(u);
      if (dist <= opts.tol.vertex_rel * poly.diameter()) continue;
      double theta = frame_angle(u);
      if (theta <= node.lo + opts.split_eps ||
          theta >= node.hi - opts.split_eps)
        continue;
      events.push_back({theta, dist, j});
    }
    std::sort(events.begin(), events.end(),
              [](const VertexEvent& a, const VertexEvent& b) {
                return a.theta < b.theta;
              });
    std::vector<VertexEvent> kept;
    for (const VertexEvent& e : events) {
      if (!kept.empty() && e.theta - kept.back().theta <= opts.split_eps) {
        if (e.dist < kept.back().dist) kept.back() = e;
        continue;
      }
      kept.push_back(e);
    }

    for (const VertexEvent& e : kept) {
      GeneralizedDiagonal d;
      d.source_vertex = apex_vertex;
      d.target_vertex = e.local_id;
      d.reflections = node.depth;
      d.direction = e.theta;
      d.normalized_direction = (e.theta - out.theta_lo) / sector;
      d.length = e.dist;
      Point2 chord = direction_from_angle(e.theta);
      Point2 folded = node.iso.inverse().linear(chord);
      d.reverse_direction = std::atan2(-folded.y, -folded.x);
      d.itinerary = node.itinerary;
      out.diagonals.push_back(std::move(d));
    }

    // Children: sub-intervals between consecutive event directions.
    std::vector<double> cuts{node.lo};
    for (const VertexEvent& e : kept) cuts.push_back(e.theta);
    cuts.push_back(node.hi);
    for (size_t i = 0; i + 1 < cuts.size(); ++i) {
      double a = cuts[i], b = cuts[i + 1];
      if (b - a <= 2.0 * opts.split_eps) continue;  // unresolvable sliver
      if (node.depth == n_max) {
        out.leaves.push_back(
            {apex_vertex, a, b, node.depth, node.itinerary, node.iso});
        continue;
      }
      Point2 mid_dir = direction_from_angle(0.5 * (a + b));
      int s = detail::image_exit_side(poly, node.iso, apex, mid_dir);
      detail::BeamNode child;
      child.iso = node.iso.compose(side_reflection[s]);
      child.depth = node.depth + 1;
      child.lo = a;
      child.hi = b;
      child.itinerary = node.itinerary;
      child.itinerary.push_back(s);
      queue.push_back(std::move(child));
    }
  }
  return out;
}

inline BeamForest propagate_beams(const Rhombus& r, int apex_vertex, int n_max,
                                  const BeamOptions& opts = {}) {
  return propagate_beams(r.polygon(), apex_vertex, n_max, opts);
}

// Orbits of algebraic length <= n from one fixed vertex, per length.
inline std::vector<long> count_Q(const ConvexPolygon& poly, int apex_vertex,
                                 int n_max, const BeamOptions& opts = {}) {
  BeamForest f = propagate_beams(poly, apex_vertex, n_max, opts);
  std::vector<long> q(n_max + 1, 0);
  for (const GeneralizedDiagonal& d : f.diagonals) ++q[d.reflections];
  for (int n = 1; n <= n_max; ++n) q[n] += q[n - 1];
  return q;
}

inline std::vector<long> count_Q(const Rhombus& r, int apex_vertex, int n_max,
                                 const BeamOptions& opts = {}) {
  return count_Q(r.polygon(), apex_vertex, n_max, opts);
}

// Complexity over all vertices with unoriented deduplication: an orbit from
// v to w is found once from each end; the two records agree on (endpoints,
// length, direction pair mod time reversal) and collapse to one.
struct ComplexityTable {
  int n_max = 0;
  std::vector<std::vector<long>> q_per_vertex;  // [vertex][n], cumulative
  std::vector<long> p;                          // [n], cumulative, unoriented
  std::vector<GeneralizedDiagonal> representatives;  // one per unoriented orbit
};

inline ComplexityTable count_complexity(const ConvexPolygon& poly, int n_max,
                                        const BeamOptions& opts = {},
                                        double angle_tol = 1e-10) {
  ComplexityTable table;
  table.n_max = n_max;
  std::vector<GeneralizedDiagonal> all;
  for (int v = 0; v < poly.size(); ++v) {
    BeamForest f = propagate_beams(poly, v, n_max, opts);
    std::vector<long> q(n_max + 1, 0);
    for (const GeneralizedDiagonal& d : f.diagonals) ++q[d.reflections];
    for (int n = 1; n <= n_max; ++n) q[n] += q[n - 1];
    table.q_per_vertex.push_back(std::move(q));
    for (GeneralizedDiagonal& d : f.diagonals) all.push_back(std::move(d));
  }

  auto wrap_angle = [](double a) {
    double w = std::remainder(a, 2.0 * kPi);
    return w < 0.0 ? w + 2.0 * kPi : w;
  };
  struct Keyed {
    int vmin, vmax, refl;
    double angle;
    size_t index;
  };
  std::vector<Keyed> keys;
  keys.reserve(all.size());
  for (size_t i = 0; i < all.size(); ++i) {
    const GeneralizedDiagonal& d = all[i];
    int vmin = std::min(d.source_vertex, d.target_vertex);
    int vmax = std::max(d.source_vertex, d.target_vertex);
    double angle;
    if (d.source_vertex < d.target_vertex)
      angle = wrap_angle(d.direction);
    else if (d.source_vertex > d.target_vertex)
      angle = wrap_angle(d.reverse_direction);
    else
      angle = std::min(wrap_angle(d.direction), wrap_angle(d.reverse_direction));
    keys.push_back({vmin, vmax, d.reflections, angle, i});
  }
  std::sort(keys.begin(), keys.end(), [](const Keyed& a, const Keyed& b) {
    if (a.vmin != b.vmin) return a.vmin < b.vmin;
    if (a.vmax != b.vmax) return a.vmax < b.vmax;
    if (a.refl != b.refl) return a.refl < b.refl;
    return a.angle < b.angle;
  });

  std::vector<long> p(n_max + 1, 0);
  size_t i = 0;
  while (i < keys.size()) {
    size_t j = i + 1;
    while (j < keys.size() && keys[j].vmin == keys[i].vmin &&
           keys[j].vmax == keys[i].vmax && keys[j].refl == keys[i].refl &&
           (keys[j].angle - keys[j - 1].angle < angle_tol ||
            // circular wrap: first and last angles of a bucket can pair up
            (2.0 * kPi - keys[j].angle) + keys[i].angle < angle_tol))
      ++j;
    ++p[keys[i].refl];
    table.representatives.push_back(all[keys[i].index]);
    i = j;
  }
  for (int n = 1; n <= n_max; ++n) p[n] += p[n - 1];
  table.p = std::move(p);
  return table;
}

inline std::vector<long> count_P(const ConvexPolygon& poly, int n_max,
                                 const BeamOptions& opts = {}) {
  return count_complexity(poly, n_max, opts).p;
}

inline std::vector<long> count_P(const Rhombus& r, int n_max,
                                 const BeamOptions& opts = {}) {
  return count_P(r.polygon(), n_max, opts);
}

// ---------------------------------------------------------------------------
// Direct (folded) orbit simulation.

struct TraceVertexHit {
  int vertex = -1;
  int after_reflections = 0;
  Point2 point{};
};

struct OrbitTrace {
  Itinerary itinerary;                 // side ids, one per completed bounce
  std::vector<Point2> points;          // reflection points, folded
  std::vector<Point2> unfolded_points; // same points, unfolded
  Point2 endpoint{};                   // last reflection point (or start)
  Point2 final_direction{};
  std::optional<TraceVertexHit> vertex_hit;
};

inline OrbitTrace trace_orbit(const ConvexPolygon& poly, Point2 start,
                              Point2 direction, int n_reflections,
                              const Tolerances& tol = {}) {
  if (n_reflections < 0)
    throw std::invalid_argument("trace_orbit: n_reflections < 0");
  OrbitTrace tr;
  tr.endpoint = start;
  tr.final_direction = normalized(direction);
  Point2 p = start;
  Point2 d = tr.final_direction;
  PlanarIsometry unfold = PlanarIsometry::identity();
  for (int k = 0; k < n_reflections; ++k) {
    RayExit hit = ray_exit(poly, p, d, tol);
    if (std::holds_alternative<VertexHit>(hit)) {
      const VertexHit& vh = std::get<VertexHit>(hit);
      tr.vertex_hit = TraceVertexHit{vh.vertex, k, vh.point};
      tr.endpoint = vh.point;
      return tr;
    }
    const SideHit& sh = std::get<SideHit>(hit);
    unfold = unfold.compose(PlanarIsometry::reflection(
        poly.side_start(sh.side), poly.side_inclination(sh.side)));
    tr.itinerary.push_back(sh.side);
    tr.points.push_back(sh.point);
    tr.unfolded_points.push_back(unfold.apply(sh.point));
    p = sh.point;
    d = reflect_direction(poly, sh.side, d);
  }
  tr.endpoint = p;
  tr.final_direction = d;
  return tr;
}

inline OrbitTrace trace_orbit(const Rhombus& r, Point2 start, Point2 direction,
                              int n_reflections, const Tolerances& tol = {}) {
  return trace_orbit(r.polygon(), start, direction, n_reflections, tol);
}

// ---------------------------------------------------------------------------
// Rhombus-to-triangle fold: every rhombus orbit projects to a triangle orbit
// under (x, y) -> (|x|, |y|), because the rhombus is the four-fold unfolding
// of the triangle across its legs.  A rhombus orbit between vertices with n
// reflections folds to a vertex-to-vertex triangle orbit with at most 3n
// reflections; an orbit through the rhombus center folds into the
// right-angle vertex early, with strictly fewer.

struct FoldCheck {
  int rhombus_reflections = 0;
  int triangle_reflections = 0;
  bool valid = false;  // fold-back reached a triangle vertex within 3n
};

struct BoundCheckReport {
  long p_rhombus_n = 0;
  long p_triangle_3n = 0;  // verified fold-backs, one per rhombus orbit
  bool holds = false;
  std::vector<FoldCheck> folds;
};

inline BoundCheckReport triangle_complexity_bound_check(
    const RightTriangle& t, int n, const BeamOptions& opts = {}) {
  const Rhombus rh = triangle_to_rhombus(t);
  const ConvexPolygon rhombus_poly = rh.polygon();
  const ConvexPolygon tri_poly = t.polygon();

  ComplexityTable table = count_complexity(rhombus_poly, n, opts);
  BoundCheckReport report;
  report.p_rhombus_n = table.p.empty() ? 0 : table.p.back();

  for (const GeneralizedDiagonal& diag : table.representatives) {
    Point2 v = rhombus_poly.vertex(diag.source_vertex);
    Point2 d = direction_from_angle(diag.direction);
    // Fold the starting configuration into the first quadrant: flip the
    // coordinate carrying the vertex along with the vertex itself, and
    // rectify the transverse coordinate so the folded orbit enters |.|-space.
    Point2 start{std::abs(v.x), std::abs(v.y)};
    Point2 dir = d;
    if (v.x < 0.0) dir.x = -dir.x;
    if (v.y < 0.0) dir.y = -dir.y;
    if (v.x != 0.0) dir.y = std::abs(dir.y);  // transverse coordinate is y
    if (v.y != 0.0) dir.x = std::abs(dir.x);  // transverse coordinate is x

    FoldCheck fc;
    fc.rhombus_reflections = diag.reflections;
    OrbitTrace tr =
        trace_orbit(tri_poly, start, dir, 3 * diag.reflections + 3, opts.tol);
    if (tr.vertex_hit) {
      fc.triangle_reflections = tr.vertex_hit->after_reflections;
      fc.valid = fc.triangle_reflections <= 3 * diag.reflections;
    }
    if (fc.valid) ++report.p_triangle_3n;
    report.folds.push_back(fc);
  }
  report.holds = report.p_triangle_3n >= report.p_rhombus_n;
  return report;
}

}  // namespace billiards
