#pragma once

// Indexed interval partitions.  The open angular sector at a polygon vertex
// is identified with (0, 1); every vertex-to-vertex orbit of algebraic
// length at most n cuts the interval at its normalized direction, and the
// cut remembers that length as its index.  On top of the partitions sits a
// constructive interval search: find a partition piece that is both long
// (relative to 1/n^{gamma+1}) and bounded by high-index cuts, the kind of
// piece whose angular beam is wide enough downstream to host a parallel
// periodic orbit.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include "billiards/geometry.hpp"
#include "billiards/unfolding.hpp"

namespace billiards {

struct IndexedCut {
  double x = 0.0;  // position in (0, 1)
  int index = 0;   // algebraic length of the orbit that cut here
};

// Finite set of indexed cut points of (0, 1), sorted by position.  The
// implicit endpoints 0 and 1 bound the outermost pieces but are not cuts.
class IndexedPartition {
 public:
  IndexedPartition(std::vector<IndexedCut> cuts, int level, Angle vertex_angle,
                   double dedup_tol = 1e-12)
      : n_(level), vertex_angle_(vertex_angle) {
    if (level < 0)
      throw std::invalid_argument("IndexedPartition: negative level");
    for (const IndexedCut& c : cuts) {
      if (!(c.x > 0.0 && c.x < 1.0))
        throw std::invalid_argument(
            "IndexedPartition: cut point outside (0, 1)");
      if (c.index < 0 || c.index > level)
        throw std::invalid_argument(
            "IndexedPartition: cut index outside [0, level]");
    }
    std::sort(cuts.begin(), cuts.end(), [](IndexedCut a, IndexedCut b) {
      return a.x < b.x || (a.x == b.x && a.index < b.index);
    });
    for (const IndexedCut& c : cuts) {
      if (!xs_.empty() && c.x - xs_.back() <= dedup_tol) {
        idx_.back() = std::min(idx_.back(), c.index);
        continue;
      }
      xs_.push_back(c.x);
      idx_.push_back(c.index);
    }
  }

  int n() const { return n_; }
  Angle vertex_angle() const { return vertex_angle_; }
  size_t size() const { return xs_.size(); }
  const std::vector<double>& cut_points() const { return xs_; }
  const std::vector<int>& indices() const { return idx_; }

 private:
  std::vector<double> xs_;
  std::vector<int> idx_;
  int n_;
  Angle vertex_angle_;
};

// Cuts from enumerated orbits out of one vertex.  Directions arrive already
// normalized across the sector by the enumeration; the vertex angle is kept
// with the partition for serialization and downstream conversions.
inline IndexedPartition build_partition(
    const std::vector<GeneralizedDiagonal>& diagonals, Angle vertex_angle,
    int level) {
  std::vector<IndexedCut> cuts;
  cuts.reserve(diagonals.size());
  for (const GeneralizedDiagonal& d : diagonals) {
    if (d.source_vertex != diagonals.front().source_vertex)
      throw std::invalid_argument(
          "build_partition: orbits from more than one vertex");
    if (d.reflections > level)
      throw std::invalid_argument(
          "build_partition: orbit longer than the partition level");
    if (!(d.normalized_direction > 0.0 && d.normalized_direction < 1.0))
      throw std::invalid_argument(
          "build_partition: direction outside the vertex angle");
    cuts.push_back({d.normalized_direction, d.reflections});
  }
  return IndexedPartition(std::move(cuts), level, vertex_angle);
}

// Largest piece of the partition, the outermost pieces [0, x_first] and
// [x_last, 1] included.
inline double partition_diameter(const IndexedPartition& p) {
  const std::vector<double>& xs = p.cut_points();
  if (xs.empty()) return 1.0;
  double best = xs.front();
  for (size_t i = 0; i + 1 < xs.size(); ++i)
    best = std::max(best, xs[i + 1] - xs[i]);
  return std::max(best, 1.0 - xs.back());
}

struct GoodInterval {
  double left = 0.0;
  double right = 0.0;
  int left_index = 0;
  int right_index = 0;
  size_t left_position = 0;  // positions in the sorted cut sequence
  size_t right_position = 0;
  double length() const { return right - left; }
};

enum class GoodIntervalFailure {
  None,
  TooManyPoints,     // |cuts| >= n^{gamma+1}
  DiameterTooLarge,  // diameter >= c/n
  TooFewCells,       // grid has fewer than three cells; no interval family
  EmptyCell,         // a grid cell holds no cut (impossible under the
                     // diameter hypothesis; kept as a loud fp guard)
  NoSparseInterval,  // every interval of the family is too crowded
  NoLongPiece,       // no piece inside a sparse interval beats the length bar
  OnlyLowIndexPieces // every long piece touches a low-index cut
};

struct GoodIntervalSearch {
  std::optional<GoodInterval> interval;
  GoodIntervalFailure failure = GoodIntervalFailure::None;
  // thresholds used, recorded for inspection and tests
  double piece_length_bar = 0.0;   // 1 / (6 n^{gamma+1})
  double index_bar = 0.0;          // floor(n/(24c))^{1/(gamma+1)}
  double crowding_bar = 0.0;       // 6 c n^{gamma}
  // stage tallies
  long cells = 0;
  long family_intervals = 0;
  long sparse_intervals = 0;
  long candidates = 0;
  long survivors = 0;
};

// Constructive search for a long, high-index partition piece.
//
// Under the two hypotheses (fewer than n^{gamma+1} cuts; every piece shorter
// than c/n), divide (0, 1) into cells of width c/n and take the leftmost cut
// in every cell.  Consecutive odd-numbered representatives bound a family of
// intervals, each at least one cell wide.  An interval of the family is
// "sparse" when strictly fewer than 6c n^gamma cuts fall strictly inside it;
// a sparse interval at least c/n wide must contain a piece of length about
// 1/(6 n^{gamma+1}).  Among those long pieces, the ones bounded on both
// sides by cuts of index above floor(n/(24c))^{1/(gamma+1)} are the useful
// ones, and a counting argument guarantees they exist for large n.  The
// leftmost survivor is returned; every dead end is reported as data, never
// hidden.
inline GoodIntervalSearch find_good_interval(const IndexedPartition& p,
                                             double gamma, double c) {
  if (!(gamma > 0.0))
    throw std::invalid_argument("find_good_interval: gamma must be positive");
  if (!(c > 0.0))
    throw std::invalid_argument("find_good_interval: c must be positive");
  const int n = p.n();
  if (n < 1)
    throw std::invalid_argument("find_good_interval: partition level < 1");

  GoodIntervalSearch out;
  out.piece_length_bar = 1.0 / (6.0 * std::pow(n, gamma + 1.0));
  out.index_bar =
      std::pow(std::floor(n / (24.0 * c)), 1.0 / (gamma + 1.0));
  out.crowding_bar = 6.0 * c * std::pow(n, gamma);

  const std::vector<double>& xs = p.cut_points();
  const std::vector<int>& idx = p.indices();

  if (!(static_cast<double>(xs.size()) < std::pow(n, gamma + 1.0))) {
    out.failure = GoodIntervalFailure::TooManyPoints;
    return out;
  }
  if (!(partition_diameter(p) < c / n)) {
    out.failure = GoodIntervalFailure::DiameterTooLarge;
    return out;
  }

  const long cells = static_cast<long>(std::floor(n / c));
  out.cells = cells;
  if (cells < 3) {
    out.failure = GoodIntervalFailure::TooFewCells;
    return out;
  }

  // Leftmost cut of each cell [(k-1)c/n, kc/n).
  std::vector<size_t> rep;
  rep.reserve(cells);
  size_t pos = 0;
  for (long k = 1; k <= cells; ++k) {
    double cell_lo = (k - 1) * c / n;
    double cell_hi = k * c / n;
    while (pos < xs.size() && xs[pos] < cell_lo) ++pos;
    if (pos >= xs.size() || xs[pos] >= cell_hi) {
      out.failure = GoodIntervalFailure::EmptyCell;
      return out;
    }
    rep.push_back(pos);
  }

  bool saw_sparse = false;
  bool saw_candidate = false;
  std::optional<GoodInterval> best;

  // Intervals between consecutive odd-numbered representatives.
  for (size_t i = 0; i + 2 < rep.size(); i += 2) {
    ++out.family_intervals;
    size_t a = rep[i];
    size_t b = rep[i + 2];
    long inside = static_cast<long>(b - a) - 1;
    if (!(static_cast<double>(inside) < out.crowding_bar)) continue;
    ++out.sparse_intervals;
    saw_sparse = true;

    size_t longest = a;
    double longest_len = -1.0;
    for (size_t t = a; t < b; ++t) {
      double len = xs[t + 1] - xs[t];
      if (len > longest_len) {
        longest_len = len;
        longest = t;
      }
    }
    if (!(longest_len > out.piece_length_bar)) continue;
    ++out.candidates;
    saw_candidate = true;

    if (!(idx[longest] > out.index_bar) ||
        !(idx[longest + 1] > out.index_bar))
      continue;
    ++out.survivors;
    if (!best)
      best = GoodInterval{xs[longest],      xs[longest + 1],
                          idx[longest],     idx[longest + 1],
                          longest,          longest + 1};
  }

  if (best) {
    out.interval = best;
    return out;
  }
  out.failure = !saw_sparse      ? GoodIntervalFailure::NoSparseInterval
                : !saw_candidate ? GoodIntervalFailure::NoLongPiece
                                 : GoodIntervalFailure::OnlyLowIndexPieces;
  return out;
}

inline const char* to_string(GoodIntervalFailure f) {
  switch (f) {
    case GoodIntervalFailure::None: return "none";
    case GoodIntervalFailure::TooManyPoints: return "too_many_points";
    case GoodIntervalFailure::DiameterTooLarge: return "diameter_too_large";
    case GoodIntervalFailure::TooFewCells: return "too_few_cells";
    case GoodIntervalFailure::EmptyCell: return "empty_cell";
    case GoodIntervalFailure::NoSparseInterval: return "no_sparse_interval";
    case GoodIntervalFailure::NoLongPiece: return "no_long_piece";
    case GoodIntervalFailure::OnlyLowIndexPieces:
      return "only_low_index_pieces";
  }
  return "unknown";
}

// Exponent balance point of the whole construction.  The angular beam of a
// good interval is wide enough for the periodic-orbit search exactly while
// 3(t - 1/t) < 1/t with t = gamma + 1; equality pins the critical exponent,
// whose closed form is 2/sqrt(3) - 1.  Solved numerically and cross-checked
// against the closed form before returning.
inline double critical_gamma() {
  auto f = [](double g) {
    double t = g + 1.0;
    return 3.0 * (t - 1.0 / t) - 1.0 / t;
  };
  double lo = 0.0, hi = 1.0;
  if (!(f(lo) < 0.0) || !(f(hi) > 0.0))
    throw std::logic_error("critical_gamma: bracketing failed");
  for (int it = 0; it < 200 && hi - lo > 1e-16; ++it) {
    double mid = 0.5 * (lo + hi);
    (f(mid) < 0.0 ? lo : hi) = mid;
  }
  double numeric = 0.5 * (lo + hi);
  // sqrt(4/3) - 1 evaluates 2/sqrt(3) - 1 with one fewer rounding step.
  double closed = std::sqrt(4.0 / 3.0) - 1.0;
  if (std::abs(numeric - closed) > 1e-12)
    throw std::logic_error("critical_gamma: numeric root disagrees with 2/sqrt(3)-1");
  return closed;
}

struct GrowthFit {
  double exponent = 0.0;
  double r_squared = 0.0;
  bool degenerate = false;  // constant series; exponent forced to 0
};

// Least-squares slope of log P against log n.
inline GrowthFit fit_growth_exponent(const std::map<int, long>& series) {
  if (series.size() < 5)
    throw std::invalid_argument("fit_growth_exponent: need at least 5 points");
  std::vector<double> lx, ly;
  for (auto [n, pn] : series) {
    if (n < 1 || pn < 1)
      throw std::invalid_argument(
          "fit_growth_exponent: points must have n >= 1 and P >= 1");
    lx.push_back(std::log(static_cast<double>(n)));
    ly.push_back(std::log(static_cast<double>(pn)));
  }
  const size_t m = lx.size();
  double mx = 0.0, my = 0.0;
  for (size_t i = 0; i < m; ++i) {
    mx += lx[i];
    my += ly[i];
  }
  mx /= m;
  my /= m;
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (size_t i = 0; i < m; ++i) {
    sxx += (lx[i] - mx) * (lx[i] - mx);
    sxy += (lx[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  GrowthFit fit;
  if (syy == 0.0) {
    fit.degenerate = true;
    return fit;
  }
  fit.exponent = sxy / sxx;
  fit.r_squared = (sxy * sxy) / (sxx * syy);
  return fit;
}

}  // namespace billiards
