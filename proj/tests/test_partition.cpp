#include <cmath>
#include <map>
#include <vector>

#include <catch2/catch_amalgamated.hpp>

#include "billiards/partition.hpp"
#include "billiards/unfolding.hpp"
#include "support/synthetic.hpp"

using namespace billiards;

namespace {

Rhombus unit_square() {
  return triangle_to_rhombus(RightTriangle(Angle(kPi / 4.0), 1.0));
}

IndexedPartition grid_partition(int n, int index, int skip = -1) {
  std::vector<IndexedCut> cuts;
  for (int k = 1; k < n; ++k) {
    if (k == skip) continue;
    cuts.push_back({static_cast<double>(k) / n, index});
  }
  return IndexedPartition(std::move(cuts), std::max(n, index), Angle(1.0));
}

void check_conclusions(const GoodIntervalSearch& s, int n, double gamma,
                       double c) {
  REQUIRE(s.interval.has_value());
  const GoodInterval& g = *s.interval;
  CHECK(g.length() > 1.0 / (6.0 * std::pow(n, gamma + 1.0)));
  double bar = std::pow(std::floor(n / (24.0 * c)), 1.0 / (gamma + 1.0));
  CHECK(g.left_index > bar);
  CHECK(g.right_index > bar);
  CHECK(g.left < g.right);
  CHECK(g.right_position == g.left_position + 1);
}

}  // namespace

TEST_CASE("no cuts means one piece spanning everything") {
  IndexedPartition p({}, 3, Angle(0.7));
  CHECK(p.size() == 0);
  CHECK(partition_diameter(p) == 1.0);
}

TEST_CASE("diameter includes the outermost pieces") {
  IndexedPartition p({{0.25, 1}, {0.5, 1}}, 2, Angle(1.0));
  CHECK(partition_diameter(p) == 0.5);

  IndexedPartition q({{0.9, 1}}, 1, Angle(1.0));
  CHECK(partition_diameter(q) == Catch::Approx(0.9));
}

TEST_CASE("partition construction validates and deduplicates") {
  CHECK_THROWS_AS(IndexedPartition({{0.0, 1}}, 2, Angle(1.0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(IndexedPartition({{1.0, 1}}, 2, Angle(1.0)),
                  std::invalid_argument);
  CHECK_THROWS_AS(IndexedPartition({{0.5, 3}}, 2, Angle(1.0)),
                  std::invalid_argument);  // index above the level

  // Cuts within 1e-12 merge and keep the smaller index.
  IndexedPartition p({{0.5, 7}, {0.5 + 4e-13, 2}, {0.25, 3}}, 9, Angle(1.0));
  REQUIRE(p.size() == 2);
  CHECK(p.cut_points()[0] == 0.25);
  CHECK(p.indices()[1] == 2);
}

TEST_CASE("square corner partitions mirror the enumeration") {
  Rhombus sq = unit_square();
  BeamForest f0 = propagate_beams(sq, 0, 0);
  IndexedPartition p0 =
      build_partition(f0.diagonals, Angle(kPi / 2.0), 0);
  REQUIRE(p0.size() == 1);
  CHECK(p0.cut_points()[0] == Catch::Approx(0.5).margin(1e-12));
  CHECK(p0.indices()[0] == 0);

  BeamForest f4 = propagate_beams(sq, 0, 4);
  IndexedPartition p4 =
      build_partition(f4.diagonals, Angle(kPi / 2.0), 4);
  CHECK(p4.size() == 11);  // enumerated orbit count at depth four
  CHECK(static_cast<long>(p4.size()) == count_Q(sq, 0, 4).back());
}

TEST_CASE("build_partition rejects foreign or overlong orbits") {
  Rhombus sq = unit_square();
  BeamForest f = propagate_beams(sq, 0, 2);
  REQUIRE(f.diagonals.size() >= 2);

  std::vector<GeneralizedDiagonal> mixed = f.diagonals;
  mixed.back().source_vertex = 1;
  CHECK_THROWS_AS(build_partition(mixed, Angle(kPi / 2.0), 2),
                  std::invalid_argument);

  CHECK_THROWS_AS(build_partition(f.diagonals, Angle(kPi / 2.0), 1),
                  std::invalid_argument);  // depth-2 orbits at level 1

  std::vector<GeneralizedDiagonal> outside = f.diagonals;
  outside.back().normalized_direction = 1.0;
  CHECK_THROWS_AS(build_partition(outside, Angle(kPi / 2.0), 2),
                  std::invalid_argument);
}

TEST_CASE("each level refines the previous one") {
  std::mt19937_64 rng(81);
  auto u = [&] { return (rng() >> 11) * 0x1.0p-53; };
  Rhombus r = triangle_to_rhombus(RightTriangle(Angle(0.2 + 0.9 * u()),
                                                0.5 + 1.5 * u()));
  Angle sector(r.vertex_angle(1));

  std::vector<IndexedPartition> levels;
  for (int n = 0; n <= 15; ++n) {
    BeamForest f = propagate_beams(r, 1, n);
    levels.push_back(build_partition(f.diagonals, sector, n));
  }

  for (int n = 0; n < 15; ++n) {
    const IndexedPartition& coarse = levels[n];
    const IndexedPartition& fine = levels[n + 1];
    const auto& fx = fine.cut_points();
    for (size_t i = 0; i < coarse.size(); ++i) {
      double x = coarse.cut_points()[i];
      auto it = std::lower_bound(fx.begin(), fx.end(), x - 1e-12);
      REQUIRE(it != fx.end());
      size_t j = static_cast<size_t>(it - fx.begin());
      CAPTURE(n, i, x);
      REQUIRE(std::abs(fx[j] - x) <= 1e-12);
      CHECK(fine.indices()[j] == coarse.indices()[i]);
    }
  }

  // Pigeonhole floor on the diameter.
  const IndexedPartition& deepest = levels.back();
  CHECK(partition_diameter(deepest) >= 1.0 / (deepest.size() + 1));
}

TEST_CASE("uniform grid yields a survivor with full indices") {
  const int n = 1000;
  const double gamma = 0.1, c = 2.0;
  IndexedPartition p = grid_partition(n, n);

  GoodIntervalSearch s = find_good_interval(p, gamma, c);
  check_conclusions(s, n, gamma, c);
  CHECK(s.interval->left_index == n);
  CHECK(s.interval->right_index == n);
  CHECK(s.interval->length() == Catch::Approx(1.0 / n));
  CHECK(s.failure == GoodIntervalFailure::None);
  CHECK(s.cells == 500);
  CHECK(s.survivors > 0);
}

TEST_CASE("hypothesis violations are reported as such") {
  // One missing grid point doubles a piece to exactly c/n: not strictly
  // below the diameter bar.
  IndexedPartition gap = grid_partition(1000, 1000, 500);
  GoodIntervalSearch s1 = find_good_interval(gap, 0.1, 2.0);
  CHECK(!s1.interval.has_value());
  CHECK(s1.failure == GoodIntervalFailure::DiameterTooLarge);

  // 100 cuts at level 10 overshoot 10^{1.1} ~ 12.6.
  std::vector<IndexedCut> many;
  for (int k = 1; k <= 100; ++k)
    many.push_back({k / 101.0, 1});
  IndexedPartition crowded(std::move(many), 10, Angle(1.0));
  GoodIntervalSearch s2 = find_good_interval(crowded, 0.1, 2.0);
  CHECK(!s2.interval.has_value());
  CHECK(s2.failure == GoodIntervalFailure::TooManyPoints);

  CHECK_THROWS_AS(find_good_interval(gap, -0.5, 2.0), std::invalid_argument);
  CHECK_THROWS_AS(find_good_interval(gap, 0.1, 0.0), std::invalid_argument);
}

TEST_CASE("low-index half is avoided by the survivor") {
  const int n = 10000;
  const double gamma = 0.1, c = 2.0;

  std::vector<IndexedCut> cuts;
  for (int k = 1; k < 5000; ++k)  // dense, low index on (0, 0.5)
    cuts.push_back({k * 1e-4, 1});
  for (int k = 0; k <= 4166; ++k)  // sparser, high index on [0.5, 1)
    cuts.push_back({0.5 + k * 1.2e-4, n});
  IndexedPartition p(std::move(cuts), n, Angle(1.0));

  GoodIntervalSearch s = find_good_interval(p, gamma, c);
  check_conclusions(s, n, gamma, c);
  CHECK(s.interval->left >= 0.5);
  CHECK(s.interval->left_index == n);
  CHECK(s.interval->right_index == n);
  // The low-index half produced long pieces that all died at the index bar.
  CHECK(s.candidates > s.survivors);
}

TEST_CASE("synthetic partitions admit good intervals en masse") {
  const int n = 10000;
  const double gamma = 0.1, c = 2.0;
  int successes = 0;
  for (uint64_t seed = 1; seed <= 100; ++seed) {
    IndexedPartition p = synthetic::random_partition(n, gamma, c, seed);
    REQUIRE(static_cast<double>(p.size()) < std::pow(n, gamma + 1.0));
    REQUIRE(partition_diameter(p) < c / n);
    GoodIntervalSearch s = find_good_interval(p, gamma, c);
    if (s.interval) {
      ++successes;
      check_conclusions(s, n, gamma, c);
    } else {
      WARN("seed " << seed << " found no interval: "
                   << to_string(s.failure));
    }
  }
  CHECK(successes >= 95);
}

TEST_CASE("critical exponent balances the beam-length equation") {
  double g = critical_gamma();
  CHECK(g == Catch::Approx(0.15470053837925146).margin(1e-15));
  CHECK(g == Catch::Approx(2.0 / std::sqrt(3.0) - 1.0).margin(1e-15));

  double t = g + 1.0;
  CHECK(std::abs(3.0 * (t - 1.0 / t) - 1.0 / t) < 1e-12);

  // Unique sign change on (0, 1).
  auto f = [](double x) {
    double s = x + 1.0;
    return 3.0 * (s - 1.0 / s) - 1.0 / s;
  };
  int sign_changes = 0;
  double prev = f(0.001);
  for (int i = 2; i < 1000; ++i) {
    double cur = f(i * 0.001);
    if ((prev < 0.0) != (cur < 0.0)) ++sign_changes;
    prev = cur;
  }
  CHECK(sign_changes == 1);

  // Just below the critical exponent the beam-length budget is feasible.
  double below = g - 0.01, eps = 0.01;
  double tb = below + 1.0;
  CHECK((-3.0 - eps) * (1.0 / tb - tb) < 1.0 / tb);
}

TEST_CASE("growth exponent fit recovers known powers") {
  std::map<int, long> quadratic, linear, constant;
  for (int n = 10; n <= 60; n += 10) {
    quadratic[n] = static_cast<long>(n) * n;
    linear[n] = 3L * n;
    constant[n] = 7;
  }
  GrowthFit q = fit_growth_exponent(quadratic);
  CHECK(q.exponent == Catch::Approx(2.0).margin(1e-9));
  CHECK(q.r_squared == Catch::Approx(1.0).margin(1e-12));
  CHECK(!q.degenerate);

  GrowthFit l = fit_growth_exponent(linear);
  CHECK(l.exponent == Catch::Approx(1.0).margin(1e-9));

  GrowthFit flat = fit_growth_exponent(constant);
  CHECK(flat.degenerate);
  CHECK(flat.exponent == 0.0);

  CHECK_THROWS_AS(fit_growth_exponent({{1, 1}, {2, 2}, {3, 3}, {4, 4}}),
                  std::invalid_argument);
  CHECK_THROWS_AS(fit_growth_exponent(
                      {{1, 0}, {2, 2}, {3, 3}, {4, 4}, {5, 5}}),
                  std::invalid_argument);
}

TEST_CASE("enumerated square complexity grows about quadratically") {
  Rhombus sq = unit_square();
  std::vector<long> p = count_P(sq, 60);
  std::map<int, long> series;
  for (int n = 1; n <= 60; ++n) series[n] = p[n];
  GrowthFit fit = fit_growth_exponent(series);
  CHECK(fit.exponent > 1.5);
  CHECK(fit.exponent < 2.5);
  CHECK(fit.r_squared > 0.98);
}
