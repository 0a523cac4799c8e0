#pragma once

// Circle-rotation machinery.  A direction angle alpha in (0, 1) drives the
// rigid rotation x -> x + alpha (mod 1); how fast its orbit becomes dense is
// what limits the search time for a parallel periodic beam.  The continued
// fraction of alpha packages that rate: convergent denominators q_n give best
// rational approximations, and the first q_{n+1} beyond 1/mu yields an
// explicit upper bound 2 q_{n+1} q_n on the hitting time L(mu), the minimal
// number of steps after which every interval of length mu contains an orbit
// point.  L(mu) itself is computed by direct simulation with an incremental
// sorted gap structure.
//
// A double is a dyadic rational, so its continued fraction is computed by
// exact integer Euclid on that rational rather than by floating floor and
// reciprocal steps, which drift after a dozen terms.  The expansion is cut,
// with a truncation flag, when the exact remainder hits zero, when a partial
// quotient is so large that alpha is indistinguishable from a rational of
// smaller height, or when the denominators would overflow 62 bits.

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

namespace billiards {

// Continued fraction alpha = [0; a_1, a_2, ...] with convergents p_k/q_k.
// Index 0 holds the trivial convergent 0/1, so q[k] pairs with quotient
// a_k = partial_quotients[k-1] and q is strictly increasing from index 1.
struct ContinuedFraction {
  double alpha = 0.0;
  std::vector<long long> partial_quotients;  // a_1, a_2, ... all >= 1
  std::vector<long long> p;                  // p[0] = 0
  std::vector<long long> q;                  // q[0] = 1
  bool truncated = false;  // expansion stopped before the requested depth

  // Number of computed convergent levels beyond the trivial one.
  int depth() const { return static_cast<int>(partial_quotients.size()); }
};

// Expands alpha in (0, 1) to at most `depth` partial quotients by exact
// integer Euclid on the dyadic rational that the double alpha is.  Rational
// values (every double, eventually) end with the truncation flag set; a
// partial quotient above 10^12 is treated as the rational tail showing
// through and truncates likewise.
inline ContinuedFraction cf_expand(double alpha, int depth) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("cf_expand: alpha must lie in (0, 1)");
  if (depth < 1) throw std::invalid_argument("cf_expand: depth must be >= 1");

  ContinuedFraction cf;
  cf.alpha = alpha;
  cf.p = {0};
  cf.q = {1};

  int e = 0;
  double mant = std::frexp(alpha, &e);  // alpha = mant * 2^e, mant in [0.5, 1)
  const int den_exp = 53 - e;
  if (den_exp > 120) {  // alpha below ~2^-67: floor(1/alpha) is already huge
    cf.truncated = true;
    return cf;
  }
  using u128 = unsigned __int128;
  const u128 den = static_cast<u128>(1) << den_exp;
  const auto num = static_cast<u128>(std::ldexp(mant, 53));

  constexpr long long kGiantQuotient = 1000000000000LL;  // 10^12
  constexpr long long kDenominatorCap = 1LL << 62;

  u128 u = den;
  u128 v = num;
  long long q_prev = 0, q_cur = 1;
  long long p_prev = 1, p_cur = 0;
  while (v != 0 && cf.depth() < depth) {
    const u128 quot = u / v;
    const u128 rem = u % v;
    if (quot > static_cast<u128>(kGiantQuotient)) {
      cf.truncated = true;
      break;
    }
    const auto a = static_cast<long long>(quot);
    const __int128 q_next = static_cast<__int128>(a) * q_cur + q_prev;
    const __int128 p_next = static_cast<__int128>(a) * p_cur + p_prev;
    if (q_next > kDenominatorCap) {
      cf.truncated = true;
      break;
    }
    cf.partial_quotients.push_back(a);
    q_prev = q_cur;
    q_cur = static_cast<long long>(q_next);
    p_prev = p_cur;
    p_cur = static_cast<long long>(p_next);
    cf.q.push_back(q_cur);
    cf.p.push_back(p_cur);
    u = v;
    v = rem;
  }
  if (v == 0) cf.truncated = true;  // exact remainder zero: alpha is rational
  return cf;
}

// Upper bound on the hitting time: the smallest n with q_{n+1} > 1/mu gives
// 2 q_{n+1} q_n steps, enough because consecutive multiples of q_n * alpha
// advance by less than 1/q_{n+1} < mu around the circle.
inline long long hitting_bound(const ContinuedFraction& cf, double mu) {
  if (!(mu > 0.0 && mu < 0.5))
    throw std::invalid_argument("hitting_bound: mu must lie in (0, 0.5)");
  for (std::size_t n = 0; n + 1 < cf.q.size(); ++n) {
    if (static_cast<double>(cf.q[n + 1]) * mu > 1.0) {
      const __int128 b = static_cast<__int128>(2) * cf.q[n + 1] * cf.q[n];
      if (b > static_cast<__int128>(INT64_MAX))
        throw std::overflow_error("hitting_bound: bound exceeds 64 bits");
      return static_cast<long long>(b);
    }
  }
  throw std::invalid_argument(
      "hitting_bound: no convergent denominator exceeds 1/mu; expand the "
      "continued fraction deeper");
}

// Exact hitting time by simulation from x = 0 (density of a rotation orbit
// is translation invariant, so the starting point is immaterial): the first
// k such that the k+1 points {0, alpha, ..., k*alpha} leave no circular gap
// of length mu or more.  Positions live in a sorted set and gap lengths in a
// multiset, so each step costs O(log k).  Returns nullopt when `cap` steps
// were not enough.
inline std::optional<long long> hitting_exact(double alpha, double mu,
                                              long long cap) {
  if (!(alpha > 0.0 && alpha < 1.0))
    throw std::invalid_argument("hitting_exact: alpha must lie in (0, 1)");
  if (!(mu > 0.0 && mu < 0.5))
    throw std::invalid_argument("hitting_exact: mu must lie in (0, 0.5)");
  if (cap < 1) throw std::invalid_argument("hitting_exact: cap must be >= 1");

  // Circular gap from a forward to b; the full circle when they coincide.
  const auto gap_between = [](double a, double b) {
    double g = b - a;
    if (g <= 0.0) g += 1.0;
    return g;
  };

  std::set<double> points{0.0};
  std::multiset<double> gaps{1.0};
  double x = 0.0;
  for (long long k = 1; k <= cap; ++k) {
    x += alpha;
    if (x >= 1.0) x -= 1.0;
    const auto [it, fresh] = points.insert(x);
    if (fresh) {
      auto next = std::next(it);
      if (next == points.end()) next = points.begin();
      auto prev = it == points.begin() ? std::prev(points.end()) : std::prev(it);
      const double old_gap =
          points.size() == 2 ? 1.0 : gap_between(*prev, *next);
      const auto old_it = gaps.find(old_gap);
      if (old_it == gaps.end())
        throw std::logic_error("hitting_exact: gap bookkeeping out of sync");
      gaps.erase(old_it);
      gaps.insert(gap_between(*prev, x));
      gaps.insert(gap_between(x, *next));
    }
    if (*gaps.rbegin() < mu) return k;
  }
  return std::nullopt;
}

// Exact and bounded hitting numbers for one (alpha, mu) pair.
struct HittingResult {
  double mu = 0.0;
  std::optional<long long> L_exact;  // nullopt: simulation cap exceeded
  long long L_bound = 0;
};

inline HittingResult hitting_result(const ContinuedFraction& cf, double mu,
                                    long long cap) {
  HittingResult r;
  r.mu = mu;
  r.L_bound = hitting_bound(cf, mu);
  r.L_exact = hitting_exact(cf.alpha, mu, cap);
  return r;
}

// Growth diagnostic ln(q_n)/n for n = 1..depth.  For almost every real the
// sequence tends to a universal constant near 1.19; no convergence is
// enforced here because a single double cannot witness typicality, the
// caller just gets the sequence to inspect.
inline std::vector<std::pair<int, double>> khintchin_diagnostic(
    const ContinuedFraction& cf) {
  if (cf.depth() < 5)
    throw std::invalid_argument(
        "khintchin_diagnostic: need at least 5 convergent levels");
  std::vector<std::pair<int, double>> diag;
  diag.reserve(cf.depth());
  for (int n = 1; n <= cf.depth(); ++n)
    diag.emplace_back(n, std::log(static_cast<double>(cf.q[n])) / n);
  return diag;
}

}  // namespace billiards
