// Geometry kernel tests: isometry algebra, shape constructors, and the
// ray-exit primitive including its corner-passage guarantees.

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "billiards/geometry.hpp"

using namespace billiards;

namespace {
double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}
}  // namespace

TEST_CASE("Angle validates its open range") {
  CHECK_THROWS_AS(Angle(0.0), std::invalid_argument);
  CHECK_THROWS_AS(Angle(kPi), std::invalid_argument);
  CHECK_THROWS_AS(Angle(-0.3), std::invalid_argument);
  CHECK(Angle(1.25).radians() == 1.25);
}

TEST_CASE("Reflection across the x axis flips the upper half plane") {
  PlanarIsometry refl = PlanarIsometry::reflection({0.0, 0.0}, 0.0);
  Point2 img = refl.apply({0.0, 1.0});
  CHECK(std::abs(img.x) < 1e-15);
  CHECK(std::abs(img.y + 1.0) < 1e-15);
  CHECK(refl.orientation() == -1);
}

TEST_CASE("reflect_across_segment flips orientation and fixes the line") {
  Segment seg{{2.0, 1.0}, {3.0, 4.0}};
  PlanarIsometry m =
      reflect_across_segment(PlanarIsometry::identity(), seg);
  CHECK(m.orientation() == -1);
  CHECK(distance(m.apply(seg.a), seg.a) < 1e-14);
  CHECK(distance(m.apply(seg.b), seg.b) < 1e-14);
  Point2 midpoint = (seg.a + seg.b) / 2.0;
  CHECK(distance(m.apply(midpoint), midpoint) < 1e-14);
}

TEST_CASE("Isometry composition and inversion round-trip") {
  std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
  for (int rep = 0; rep < 50; ++rep) {
    PlanarIsometry a = PlanarIsometry::rotation(
        uniform01(rng) * 6.0 - 3.0, {uniform01(rng), uniform01(rng)});
    PlanarIsometry b = PlanarIsometry::reflection(
        {uniform01(rng) * 2.0, uniform01(rng) * 2.0}, uniform01(rng) * 3.0);
    PlanarIsometry ab = a.compose(b);
    Point2 p{uniform01(rng) * 4.0 - 2.0, uniform01(rng) * 4.0 - 2.0};
    CHECK(distance(ab.apply(p), a.apply(b.apply(p))) < 1e-13);
    CHECK(distance(ab.inverse().apply(ab.apply(p)), p) < 1e-13);
    CHECK(ab.orientation() == a.orientation() * b.orientation());
    // Linear part never touches translations of directions.
    Point2 d{std::cos(1.0), std::sin(1.0)};
    CHECK(std::abs(norm(ab.linear(d)) - 1.0) < 1e-14);
  }
}

TEST_CASE("Two reflections compose to a rotation") {
  PlanarIsometry r1 = PlanarIsometry::reflection({0, 0}, 0.3);
  PlanarIsometry r2 = PlanarIsometry::reflection({0, 0}, 1.1);
  PlanarIsometry rot = r2.compose(r1);
  CHECK(rot.orientation() == +1);
  // Rotation angle is twice the angle between the mirror lines.
  Point2 img = rot.apply({1.0, 0.0});
  CHECK(std::abs(std::atan2(img.y, img.x) - 1.6) < 1e-14);
}

TEST_CASE("Right triangle to rhombus: half-diagonals are the legs") {
  RightTriangle iso(Angle(kPi / 4.0), 1.0);
  Rhombus sq = triangle_to_rhombus(iso);
  CHECK(sq.half_horizontal == 1.0);
  CHECK(std::abs(sq.half_vertical - 1.0) < 1e-15);
  CHECK(std::abs(sq.vertex_angle_horizontal().radians() - kPi / 2.0) < 1e-12);

  RightTriangle generic(Angle(0.4), 2.5);
  Rhombus rh = triangle_to_rhombus(generic);
  CHECK(std::abs(rh.half_vertical - 2.5 * std::tan(0.4)) < 1e-14);
  // Rhombus angle at the horizontal vertices doubles the acute angle.
  CHECK(std::abs(rh.vertex_angle_horizontal().radians() - 0.8) < 1e-12);
  CHECK(std::abs(rh.vertex_angle_vertical().radians() -
                 (kPi - 0.8)) < 1e-12);
}

TEST_CASE("Degenerate shape parameters are rejected") {
  CHECK_THROWS_AS(RightTriangle(Angle(kPi / 2.0 + 0.01), 1.0),
                  std::invalid_argument);
  CHECK_THROWS_AS(RightTriangle(Angle(0.5), 0.0), std::invalid_argument);
  CHECK_THROWS_AS(Rhombus(1.0, -2.0), std::invalid_argument);
}

TEST_CASE("ray_exit: generic interior ray reports the exit side and point") {
  Rhombus sq(1.0, 1.0);
  ConvexPolygon poly = sq.polygon();
  Point2 d = normalized({1.0, 0.3});
  RayExit hit = ray_exit(poly, {0.0, 0.0}, d);
  REQUIRE(std::holds_alternative<SideHit>(hit));
  const SideHit& sh = std::get<SideHit>(hit);
  CHECK(sh.side == 0);  // upper-right side, line x + y = 1
  CHECK(std::abs(sh.point.x + sh.point.y - 1.0) < 1e-12);
  CHECK(std::abs(cross(sh.point, d)) < 1e-12);  // stays on the ray
}

TEST_CASE("ray_exit: ray aimed at a corner is a VertexHit") {
  Rhombus sq(1.0, 1.0);
  ConvexPolygon poly = sq.polygon();
  RayExit hit = ray_exit(poly, {0.0, 0.0}, {1.0, 0.0});
  REQUIRE(std::holds_alternative<VertexHit>(hit));
  CHECK(std::get<VertexHit>(hit).vertex == 0);
  CHECK(distance(std::get<VertexHit>(hit).point, {1.0, 0.0}) == 0.0);
}

TEST_CASE("ray_exit: passing within the corner window terminates there") {
  Rhombus sq(1.0, 1.0);
  ConvexPolygon poly = sq.polygon();
  // This ray grazes vertex 0 at height 1e-12, far inside the 1e-9-relative
  // corner window; it must not silently continue to the far boundary.
  RayExit hit = ray_exit(poly, {-0.9, 1e-12}, {1.0, 0.0});
  REQUIRE(std::holds_alternative<VertexHit>(hit));
  CHECK(std::get<VertexHit>(hit).vertex == 0);
}

TEST_CASE("ray_exit: boundary origin pointing outward is an error") {
  Rhombus sq(1.0, 1.0);
  ConvexPolygon poly = sq.polygon();
  Point2 on_side{0.5, 0.5};
  CHECK_THROWS_AS(ray_exit(poly, on_side, normalized({1.0, 1.0})),
                  std::invalid_argument);
  CHECK_THROWS_AS(ray_exit(poly, {5.0, 0.0}, {-1.0, 0.0}),
                  std::invalid_argument);
  // The same origin with the inward normal is fine.
  RayExit hit = ray_exit(poly, on_side, normalized({-1.0, -1.0}));
  REQUIRE(std::holds_alternative<SideHit>(hit));
  CHECK(std::get<SideHit>(hit).side == 2);
}

TEST_CASE("ray_exit from a vertex into the sector") {
  Rhombus sq(1.0, 1.0);
  ConvexPolygon poly = sq.polygon();
  // Leaving the left vertex along the horizontal diagonal ends at the
  // right vertex: the full diagonal is corner-to-corner.
  RayExit hit = ray_exit(poly, {-1.0, 0.0}, {1.0, 0.0});
  REQUIRE(std::holds_alternative<VertexHit>(hit));
  CHECK(std::get<VertexHit>(hit).vertex == 0);
  CHECK(std::abs(std::get<VertexHit>(hit).t - 2.0) < 1e-12);
}

TEST_CASE("ConvexPolygon rejects non-convex input and reports metrics") {
  CHECK_THROWS_AS(ConvexPolygon({{0, 0}, {1, 0}}), std::invalid_argument);
  CHECK_THROWS_AS(ConvexPolygon({{0, 0}, {2, 0}, {1, 0.0}}),
                  std::invalid_argument);
  ConvexPolygon tri({{0, 0}, {2, 0}, {0, 1}});
  CHECK(tri.diameter() == Catch::Approx(std::sqrt(5.0)));
  CHECK(tri.contains({0.5, 0.25}, 0.0));
  CHECK(!tri.contains({1.5, 0.9}, 1e-9));
  CHECK(std::abs(tri.vertex_angle(0) - kPi / 2.0) < 1e-14);
}

TEST_CASE("Rhombus vertex angles partition the corner sum") {
  std::mt19937_64 rng(42);
  for (int rep = 0; rep < 10; ++rep) {
    double h = 0.2 + 2.0 * uniform01(rng);
    double v = 0.2 + 2.0 * uniform01(rng);
    Rhombus rh(h, v);
    double a = rh.vertex_angle_horizontal().radians();
    double b = rh.vertex_angle_vertical().radians();
    CHECK(std::abs(a + b - kPi) < 1e-12);
    ConvexPolygon poly = rh.polygon();
    CHECK(std::abs(poly.vertex_angle(0) - a) < 1e-12);
    CHECK(std::abs(poly.vertex_angle(1) - b) < 1e-12);
  }
}
