// End-to-end walkthrough of the lower-bound machinery on one seeded rhombus:
// enumerate connector directions, search the indexed partition for a long
// high-index gap, rotate the table so that gap faces up, then hunt a thin
// vertical beam for a periodic orbit and drag it until it collides with a
// vertex, which produces a new connector.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>

#include "billiards/development.hpp"
#include "billiards/partition.hpp"
#include "billiards/unfolding.hpp"

using namespace billiards;

namespace {

const char* failure_name(GoodIntervalFailure f) {
  switch (f) {
    case GoodIntervalFailure::None: return "none";
    case GoodIntervalFailure::TooManyPoints: return "too many cuts";
    case GoodIntervalFailure::DiameterTooLarge: return "diameter too large";
    case GoodIntervalFailure::TooFewCells: return "too few cells";
    case GoodIntervalFailure::EmptyCell: return "empty cell";
    case GoodIntervalFailure::NoSparseInterval: return "no sparse interval";
    case GoodIntervalFailure::NoLongPiece: return "no long piece";
    case GoodIntervalFailure::OnlyLowIndexPieces: return "only low indices";
  }
  return "?";
}

}  // namespace

int main() {
  // Stage 0: a reproducible table.  Seed 23 draws the vertex angle.
  std::mt19937_64 rng(23);
  double angle = ((rng() >> 11) * 0x1.0p-53) * kPi / 2.0;
  Rhombus rh(std::cos(angle / 2.0), std::sin(angle / 2.0));
  std::printf("table: unit-side rhombus, horizontal vertex angle %.6f rad\n",
              angle);

  // Stage 1: connector directions out of vertex 0, up to 48 bounces,
  // recorded as an indexed partition of the direction sector.
  const int n = 48;
  BeamForest forest = propagate_beams(rh.polygon(), 0, n);
  IndexedPartition part = build_partition(
      forest.diagonals, Angle(rh.polygon().vertex_angle(0)), n);
  std::printf(
      "stage 1: %zu connectors within %d bounces give %zu distinct cuts "
      "(diameter %.4f)\n",
      forest.diagonals.size(), n, part.size(), partition_diameter(part));

  // Stage 2: a long gap between high-index cuts.  gamma sits below the
  // critical exponent 2/sqrt(3) - 1; c is the crowding constant.
  const double gamma = 0.1, c = 16.0;
  GoodIntervalSearch s = find_good_interval(part, gamma, c);
  if (!s.interval) {
    std::printf("stage 2: no good interval (%s)\n", failure_name(s.failure));
    return 1;
  }
  std::printf(
      "stage 2: good interval [%.6f, %.6f], length %.6f > bar %.6f,\n"
      "         indices (%d, %d) > bar %.2f, cells %ld, survivors %ld\n",
      s.interval->left, s.interval->right, s.interval->length(),
      s.piece_length_bar, s.interval->left_index, s.interval->right_index,
      s.index_bar, s.cells, s.survivors);

  // Stage 3: rotate the table so the middle of that gap points straight up,
  // and develop the rhombus into its rotated stack of levels.
  double mid = 0.5 * (s.interval->left + s.interval->right);
  double theta = forest.theta_lo + mid * (forest.theta_hi - forest.theta_lo);
  Rhombus posed(rh.half_horizontal, rh.half_vertical,
                PlanarIsometry::rotation(-theta, {0.0, 0.0}));
  RotatedFamily fam(posed);
  std::printf(
      "stage 3: rotated by %.6f rad; development alpha %.6f, inflow measure "
      "%.6f\n",
      theta, fam.alpha(), fam.lambda_total(0));

  // Stage 4: a thin beam of vertical trajectories entering near 65%% of the
  // inflow side.  The search either certifies a periodic orbit or reports
  // the vertex that split the beam.
  int side = fam.inflow_sides(0).front();
  ConvexPolygon poly = fam.level_polygon(0);
  double len = poly.side_length(side);
  double slope = std::abs(poly.side_vector(side).y) / len;
  double ds = 0.02 * fam.lambda_total(0) / slope;
  double center = 0.65 * len;
  BeamInterval beam =
      make_beam_interval(fam, 0, side, std::max(0.0, center - ds / 2),
                         std::min(len, center + ds / 2));
  BeamSearchOptions opts;
  opts.max_steps = 400000;
  BeamSearchResult r = find_periodic_in_beam(fam, beam, opts);
  if (r.outcome == SearchOutcome::Split) {
    std::printf("stage 4: beam split at a vertex after %lld steps\n", r.steps);
    return 1;
  }
  if (r.outcome == SearchOutcome::NotFound) {
    std::printf("stage 4: no return within %lld steps (bound %.0f)\n", r.steps,
                r.step_bound);
    return 1;
  }
  const OrbitCertificate& cert = *r.certificate;
  PeriodicOrbit orbit = certificate_to_billiard_orbit(fam, cert);
  std::printf(
      "stage 4: periodic orbit, period %d (%s), found in %lld steps "
      "(bound %.0f),\n         length %.4f, closure residual %.2e\n",
      cert.period, cert.even_period() ? "even" : "odd", r.steps, r.step_bound,
      orbit.length, orbit.closure_residual);

  // Stage 5: slide the orbit sideways until it collides with a vertex; the
  // collision splits it into a vertex-to-vertex connector.
  double step = fam.diameter() / std::max(50, 10 * orbit.period);
  DragOutcome d = drag_orbit(fam.level_polygon(0), orbit, step, 4000);
  std::printf("stage 5: dragged %d steps, worst closure residual %.2e\n",
              d.drags_done, d.max_residual);
  if (!d.encounter) {
    std::printf("stage 5: no vertex encounter within the drag budget\n");
    return 1;
  }
  const VertexEncounter& e = *d.encounter;
  std::printf(
      "stage 5: vertex %d encountered after distance %.6f; connector "
      "%d -> %d with %d bounces, %s\n",
      e.vertex, e.drag_distance, e.diagonal.source_vertex,
      e.diagonal.target_vertex, e.diagonal.reflections,
      e.diagonal.verified ? "verified by re-trace" : "NOT verified");
  return 0;
}
