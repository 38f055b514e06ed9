#pragma once

// Valid-by-construction parameterization of CS-Rep sequences: meta anchors,
// cumulative-product monotone coefficients and piecewise reconstruction.
//
// Indexing is 0-based throughout. With n spine points the spine increments
// Δy_j = y_{j+1} − y_j run over j = 0..n−2; pos_p/pos_r (1-based in Counts,
// as in the anchor tables) become pp = pos_p − 1 and pr = pos_r − 1.
//
//   u segments:  [1, pp]  and  [pp+1, n−2]   (ũ_0 = 1 and ũ_{n−1} unused)
//   v segments:  [1, pr]  and  [pr+1, n−1]   (ṽ_0 = 1)
//
// The last entry of every segment is forced to 0 so its coefficient reaches 1.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"
#include "geometry.hpp"

namespace airfoilgen {

/// 4×4 anchor table: rows (start, spine extremum, radius extremum, end) ×
/// columns (x, y, Δy, r).
struct MetaParams {
  enum Row { kStart = 0, kSpineExt = 1, kRadiusExt = 2, kEnd = 3 };
  enum Col { kX = 0, kY = 1, kDy = 2, kR = 3 };

  std::array<std::array<double, 4>, 4> m{};

  double& operator()(int row, int col) { return m[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)]; }
  double operator()(int row, int col) const { return m[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)]; }

  std::array<double, 16> flat() const {
    std::array<double, 16> f{};
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) f[static_cast<std::size_t>(4 * r + c)] = (*this)(r, c);
    return f;
  }
  static MetaParams from_flat(const std::array<double, 16>& f) {
    MetaParams p;
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) p(r, c) = f[static_cast<std::size_t>(4 * r + c)];
    return p;
  }
};

struct CoeffSeq {
  std::vector<double> u_tilde;
  std::vector<double> v_tilde;
};

struct Counts {
  std::size_t n = 0;
  std::size_t pos_p = 0;  // 1-based
  std::size_t pos_r = 0;  // 1-based
};

inline Counts derive_counts(const MetaParams& meta, double delta_x) {
  if (!(delta_x > 0.0)) throw DomainError("derive_counts: delta_x must be positive");
  const double x1 = meta(MetaParams::kStart, MetaParams::kX);
  auto index_of = [&](double x, const char* what) {
    const double steps = (x - x1) / delta_x;
    const double k = std::round(steps);
    if (std::abs(steps - k) * delta_x > 1e-9)
      throw DomainError(std::string("derive_counts: ") + what + " is not on the delta_x grid");
    if (k < 0.0) throw DomainError(std::string("derive_counts: ") + what + " precedes x_1");
    return static_cast<std::size_t>(k) + 1;
  };
  Counts c;
  c.n = index_of(meta(MetaParams::kEnd, MetaParams::kX), "x_n");
  c.pos_p = index_of(meta(MetaParams::kSpineExt, MetaParams::kX), "x_pos_p");
  c.pos_r = index_of(meta(MetaParams::kRadiusExt, MetaParams::kX), "x_pos_r");
  if (c.n < kMinSpinePoints) throw DomainError("derive_counts: fewer than 8 spine points");
  if (c.pos_p > c.n || c.pos_r > c.n) throw DomainError("derive_counts: extremum beyond x_n");
  return c;
}

/// a_i = 1 − Π_{j≤i} ã_j.
inline std::vector<double> cumprod_monotone(const std::vector<double>& a_tilde) {
  std::vector<double> a(a_tilde.size());
  double prod = 1.0;
  for (std::size_t i = 0; i < a_tilde.size(); ++i) {
    if (!(a_tilde[i] >= 0.0 && a_tilde[i] <= 1.0)) throw DomainError("cumprod_monotone: entry outside [0, 1]");
    prod *= a_tilde[i];
    a[i] = 1.0 - prod;
  }
  return a;
}

// ---------------------------------------------------------------------------
// Segment layout
// ---------------------------------------------------------------------------

struct Segment {
  std::size_t first = 0;  // first stepping entry
  std::size_t last = 0;   // forced entry, coefficient reaches 1 here
  double span = 0.0;      // anchor_end − anchor_start
  double threshold = 0.0;

  std::size_t steps() const { return last - first + 1; }
};

struct Layout {
  Counts counts;
  std::array<Segment, 2> u;
  std::array<Segment, 2> v;
};

inline void check_counts(const Counts& c) {
  if (c.n < kMinSpinePoints) throw DomainError("csrep: fewer than 8 spine points");
  if (c.pos_p < 2 || c.pos_p + 2 > c.n) throw DomainError("csrep: pos_p must lie in [2, n-2]");
  if (c.pos_r < 2 || c.pos_r + 1 > c.n) throw DomainError("csrep: pos_r must lie in [2, n-1]");
}

inline Layout make_layout(const MetaParams& meta, double delta_x, const SmoothnessThresholds& th) {
  using M = MetaParams;
  Layout l;
  l.counts = derive_counts(meta, delta_x);
  check_counts(l.counts);
  const std::size_t n = l.counts.n, pp = l.counts.pos_p - 1, pr = l.counts.pos_r - 1;
  l.u[0] = {1, pp, meta(M::kSpineExt, M::kDy) - meta(M::kStart, M::kDy), th.thres_y};
  l.u[1] = {pp + 1, n - 2, meta(M::kEnd, M::kDy) - meta(M::kSpineExt, M::kDy), th.thres_y};
  l.v[0] = {1, pr, meta(M::kRadiusExt, M::kR) - meta(M::kStart, M::kR), th.thres_r};
  l.v[1] = {pr + 1, n - 1, meta(M::kEnd, M::kR) - meta(M::kRadiusExt, M::kR), th.thres_r};
  return l;
}

// Largest per-step coefficient increment keeping |span·step| strictly under
// the threshold.
inline double max_step(const Segment& s) {
  constexpr double kMargin = 1.0 - 1e-9;
  if (s.span == 0.0) return 1.0;
  return std::min(1.0, kMargin * s.threshold / std::abs(s.span));
}

/// Admissible interval for the next ã given the remaining product P: the step
/// P(1−ã) stays within the per-step bound and the remaining steps can still
/// absorb what is left, so the forced final step is bounded too.
inline std::pair<double, double> coefficient_bounds(const Segment& s, std::size_t entry, double prod) {
  if (entry >= s.last) return {0.0, 0.0};
  if (!(prod > 0.0)) return {0.0, 1.0};
  const double c = max_step(s);
  const double remaining = static_cast<double>(s.last - entry);
  const double lo = std::max(0.0, 1.0 - c / prod);
  const double hi = std::min(1.0, remaining * c / prod);
  return {std::min(lo, hi), hi};
}

inline bool segment_feasible(const Segment& s) {
  return static_cast<double>(s.steps()) * max_step(s) >= 1.0;
}

// ---------------------------------------------------------------------------
// Decoding
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<double> segment_coefficients(const std::vector<double>& a_tilde,
                                                const std::array<Segment, 2>& segs, std::size_t len) {
  std::vector<double> a(len, 0.0);
  for (const Segment& s : segs) {
    double prod = 1.0;
    for (std::size_t j = s.first; j <= s.last; ++j) {
      prod *= j == s.last ? 0.0 : a_tilde[j];
      a[j] = 1.0 - prod;
    }
  }
  return a;
}

}  // namespace detail

/// Reconstructs the spine and radius sequences from anchors and coefficients.
/// Anchors are hit exactly: std::lerp is exact at both ends and monotone.
inline CsRep decode_coeffs(const MetaParams& meta, const CoeffSeq& coeffs, double delta_x,
                           const SmoothnessThresholds& th = SmoothnessThresholds{}) {
  using M = MetaParams;
  const Layout l = make_layout(meta, delta_x, th);
  const std::size_t n = l.counts.n, pp = l.counts.pos_p - 1, pr = l.counts.pos_r - 1;
  if (coeffs.u_tilde.size() != n || coeffs.v_tilde.size() != n)
    throw DomainError("decode_coeffs: coefficient length differs from n");
  for (std::size_t j = 0; j < n; ++j)
    if (!(coeffs.u_tilde[j] >= 0.0 && coeffs.u_tilde[j] <= 1.0 && coeffs.v_tilde[j] >= 0.0 &&
          coeffs.v_tilde[j] <= 1.0))
      throw DomainError("decode_coeffs: coefficient outside [0, 1]");

  const std::vector<double> u = detail::segment_coefficients(coeffs.u_tilde, l.u, n);
  const std::vector<double> v = detail::segment_coefficients(coeffs.v_tilde, l.v, n);

  const double dy1 = meta(M::kStart, M::kDy), dyp = meta(M::kSpineExt, M::kDy), dyn = meta(M::kEnd, M::kDy);
  const double r1 = meta(M::kStart, M::kR), rp = meta(M::kRadiusExt, M::kR), rn = meta(M::kEnd, M::kR);

  CsRep cs;
  cs.x0 = meta(M::kStart, M::kX);
  cs.delta_x = delta_x;
  cs.spine_y.resize(n);
  cs.radii.resize(n);
  cs.spine_y[0] = meta(M::kStart, M::kY);
  for (std::size_t j = 0; j + 1 < n; ++j) {
    const double dy = j <= pp ? std::lerp(dy1, dyp, u[j]) : std::lerp(dyp, dyn, u[j]);
    cs.spine_y[j + 1] = cs.spine_y[j] + dy;
  }
  for (std::size_t j = 0; j < n; ++j) cs.radii[j] = j <= pr ? std::lerp(r1, rp, v[j]) : std::lerp(rp, rn, v[j]);
  return cs;
}

// ---------------------------------------------------------------------------
// Unit parameterization: s ∈ [0,1] per entry mapped into the admissible box
// ---------------------------------------------------------------------------

namespace detail {

inline std::vector<double> unit_to_tilde(const std::vector<double>& s, const std::array<Segment, 2>& segs,
                                         std::size_t len) {
  std::vector<double> t(len, 1.0);
  for (const Segment& seg : segs) {
    double prod = 1.0;
    for (std::size_t j = seg.first; j <= seg.last; ++j) {
      if (j == seg.last) {
        t[j] = 0.0;
        break;
      }
      const auto [lo, hi] = coefficient_bounds(seg, j, prod);
      t[j] = lo + std::clamp(s[j], 0.0, 1.0) * (hi - lo);
      prod *= t[j];
    }
  }
  return t;
}

inline std::vector<double> tilde_to_unit(const std::vector<double>& t, const std::array<Segment, 2>& segs,
                                         std::size_t len) {
  std::vector<double> s(len, 0.5);
  for (const Segment& seg : segs) {
    double prod = 1.0;
    for (std::size_t j = seg.first; j < seg.last; ++j) {
      const auto [lo, hi] = coefficient_bounds(seg, j, prod);
      const double tj = std::clamp(t[j], lo, hi);
      s[j] = hi > lo ? (tj - lo) / (hi - lo) : 0.5;
      prod *= tj;
    }
  }
  return s;
}

}  // namespace detail

/// Coefficients from free unit values; every s ∈ [0,1]^n decodes to a CS-Rep
/// within the smoothness thresholds provided the layout is feasible.
inline CoeffSeq unit_to_coeffs(const Layout& l, const std::vector<double>& s_u, const std::vector<double>& s_v) {
  const std::size_t n = l.counts.n;
  if (s_u.size() != n || s_v.size() != n) throw DomainError("unit_to_coeffs: length differs from n");
  return {detail::unit_to_tilde(s_u, l.u, n), detail::unit_to_tilde(s_v, l.v, n)};
}

inline std::pair<std::vector<double>, std::vector<double>> coeffs_to_unit(const Layout& l, const CoeffSeq& c) {
  const std::size_t n = l.counts.n;
  return {detail::tilde_to_unit(c.u_tilde, l.u, n), detail::tilde_to_unit(c.v_tilde, l.v, n)};
}

/// Projects each free entry onto its admissible interval (and the optional
/// constant floor a_tilde_min); forced entries are set to their fixed values.
inline CoeffSeq clamp_feasible(const MetaParams& meta, const CoeffSeq& coeffs, double delta_x,
                               const SmoothnessThresholds& th) {
  const Layout l = make_layout(meta, delta_x, th);
  const std::size_t n = l.counts.n;
  if (coeffs.u_tilde.size() != n || coeffs.v_tilde.size() != n)
    throw DomainError("clamp_feasible: coefficient length differs from n");
  auto clamp_one = [&](const std::vector<double>& in, const std::array<Segment, 2>& segs) {
    std::vector<double> out(n, 1.0);
    for (const Segment& s : segs) {
      double prod = 1.0;
      for (std::size_t j = s.first; j <= s.last; ++j) {
        if (j == s.last) {
          out[j] = 0.0;
          break;
        }
        auto [lo, hi] = coefficient_bounds(s, j, prod);
        lo = std::min(hi, std::max(lo, th.a_tilde_min));
        out[j] = std::clamp(in[j], lo, hi);
        prod *= out[j];
      }
    }
    return out;
  };
  return {clamp_one(coeffs.u_tilde, l.u), clamp_one(coeffs.v_tilde, l.v)};
}

// ---------------------------------------------------------------------------
// Meta feasibility
// ---------------------------------------------------------------------------

/// Empty when the anchors admit a valid decode, otherwise the first reason.
inline std::optional<std::string> meta_infeasibility(const MetaParams& meta, double delta_x,
                                                     const SmoothnessThresholds& th,
                                                     const GeometryLimits& lim = {}) {
  using M = MetaParams;
  Layout l;
  try {
    l = make_layout(meta, delta_x, th);
  } catch (const DomainError& e) {
    return std::string(e.what());
  }
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c)
      if (!std::isfinite(meta(r, c))) return std::string("non-finite anchor");
  const double r1 = meta(M::kStart, M::kR), rp = meta(M::kRadiusExt, M::kR), rn = meta(M::kEnd, M::kR);
  if (!(r1 >= lim.r_nose_min)) return std::string("r_1 below the nose minimum");
  if (!(rn > 0.0 && rn <= lim.r_eps)) return std::string("r_n must lie in (0, r_eps]");
  if (!(rp >= std::max(r1, rn))) return std::string("r_pos_r below an end radius");
  for (const Segment& s : l.u)
    if (!segment_feasible(s)) return std::string("spine slope span exceeds its segment budget");
  for (const Segment& s : l.v)
    if (!segment_feasible(s)) return std::string("radius span exceeds its segment budget");
  return std::nullopt;
}

/// Fills the informational anchors (y at extrema and end, Δy at pos_r, r at
/// pos_p) from a decoded CS-Rep.
inline void complete_meta(MetaParams& meta, const CsRep& cs, const Counts& c) {
  using M = MetaParams;
  const std::size_t n = c.n, pp = c.pos_p - 1, pr = c.pos_r - 1;
  meta(M::kSpineExt, M::kY) = cs.spine_y[pp];
  meta(M::kRadiusExt, M::kY) = cs.spine_y[pr];
  meta(M::kEnd, M::kY) = cs.spine_y[n - 1];
  const std::size_t jr = std::min(pr, n - 2);
  meta(M::kRadiusExt, M::kDy) = cs.spine_y[jr + 1] - cs.spine_y[jr];
  meta(M::kSpineExt, M::kR) = cs.radii[pp];
}

/// Projects arbitrary anchors onto the feasible set: x entries snapped to the
/// δx grid with x_n on it, counts clamped to the index invariants, radii and
/// slopes clamped into their segment budgets. Informational entries are left
/// for complete_meta.
inline MetaParams repair_meta(const MetaParams& in, double delta_x, const SmoothnessThresholds& th,
                              const GeometryLimits& lim = {}) {
  using M = MetaParams;
  if (!(delta_x > 0.0)) throw DomainError("repair_meta: delta_x must be positive");
  MetaParams meta = in;
  auto finite_or = [](double v, double fallback) { return std::isfinite(v) ? v : fallback; };
  const double x_n = std::round(finite_or(in(M::kEnd, M::kX), 1.0) / delta_x) * delta_x;
  auto steps_back = [&](double x) {
    return std::max(0.0, std::round((x_n - finite_or(x, x_n)) / delta_x));
  };
  const auto n = static_cast<std::size_t>(
      std::max(static_cast<double>(kMinSpinePoints), steps_back(in(M::kStart, M::kX)) + 1.0));
  const double x_1 = x_n - static_cast<double>(n - 1) * delta_x;
  auto index_of = [&](double x, std::size_t hi) {
    const double k = std::round((finite_or(x, x_1) - x_1) / delta_x) + 1.0;
    return static_cast<std::size_t>(std::clamp(k, 2.0, static_cast<double>(hi)));
  };
  const std::size_t pos_p = index_of(in(M::kSpineExt, M::kX), n - 2);
  const std::size_t pos_r = index_of(in(M::kRadiusExt, M::kX), n - 1);
  meta(M::kStart, M::kX) = x_1;
  meta(M::kSpineExt, M::kX) = x_1 + static_cast<double>(pos_p - 1) * delta_x;
  meta(M::kRadiusExt, M::kX) = x_1 + static_cast<double>(pos_r - 1) * delta_x;
  meta(M::kEnd, M::kX) = x_n;

  constexpr double kSafety = 0.999 * (1.0 - 1e-9);
  const double rise = kSafety * static_cast<double>(pos_r - 1) * th.thres_r;
  const double fall = kSafety * static_cast<double>(n - pos_r) * th.thres_r;
  const double rn = lim.r_eps;
  const double r1 = std::clamp(finite_or(in(M::kStart, M::kR), lim.r_nose_min), lim.r_nose_min,
                               std::max(lim.r_nose_min, rn + fall));
  const double rp = std::clamp(finite_or(in(M::kRadiusExt, M::kR), r1), r1, std::min(r1 + rise, rn + fall));
  meta(M::kStart, M::kR) = r1;
  meta(M::kRadiusExt, M::kR) = rp;
  meta(M::kEnd, M::kR) = rn;

  const double b1 = kSafety * static_cast<double>(pos_p - 1) * th.thres_y;
  const double b2 = kSafety * static_cast<double>(n - 1 - pos_p) * th.thres_y;
  const double dy1 = finite_or(in(M::kStart, M::kDy), 0.0);
  const double dyp = std::clamp(finite_or(in(M::kSpineExt, M::kDy), dy1), dy1 - b1, dy1 + b1);
  const double dyn = std::clamp(finite_or(in(M::kEnd, M::kDy), dyp), dyp - b2, dyp + b2);
  meta(M::kStart, M::kDy) = dy1;
  meta(M::kSpineExt, M::kDy) = dyp;
  meta(M::kEnd, M::kDy) = dyn;
  meta(M::kStart, M::kY) = finite_or(in(M::kStart, M::kY), 0.0);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) meta(r, c) = finite_or(meta(r, c), 0.0);
  return meta;
}

// ---------------------------------------------------------------------------
// Encoding
// ---------------------------------------------------------------------------

struct Encoded {
  MetaParams meta;
  CoeffSeq coeffs;
};

namespace detail {

inline MetaParams read_anchors(const CsRep& cs, std::size_t pp, std::size_t pr) {
  using M = MetaParams;
  const std::size_t n = cs.size();
  MetaParams meta;
  meta(M::kStart, M::kX) = cs.x(0);
  meta(M::kSpineExt, M::kX) = cs.x(pp);
  meta(M::kRadiusExt, M::kX) = cs.x(pr);
  meta(M::kEnd, M::kX) = cs.x(n - 1);
  meta(M::kStart, M::kY) = cs.spine_y[0];
  meta(M::kStart, M::kDy) = cs.spine_y[1] - cs.spine_y[0];
  meta(M::kSpineExt, M::kDy) = cs.spine_y[pp + 1] - cs.spine_y[pp];
  meta(M::kEnd, M::kDy) = cs.spine_y[n - 1] - cs.spine_y[n - 2];
  meta(M::kStart, M::kR) = cs.radii[0];
  meta(M::kRadiusExt, M::kR) = cs.radii[pr];
  meta(M::kEnd, M::kR) = cs.radii[n - 1];
  complete_meta(meta, cs, {n, pp + 1, pr + 1});
  return meta;
}

// Spine extremum when Δy is monotone: where the spine deviates most from its
// chord, or a fixed fraction of the span for a straight spine.
inline std::size_t spine_extremum_fallback(const std::vector<double>& y) {
  const std::size_t n = y.size();
  std::size_t best = 0;
  double dev = 0.0;
  for (std::size_t j = 1; j + 2 < n; ++j) {
    const double f = static_cast<double>(j) / static_cast<double>(n - 1);
    const double d = std::abs(y[j] - (y[0] + f * (y[n - 1] - y[0])));
    if (d > dev) {
      dev = d;
      best = j;
    }
  }
  if (dev <= 1e-12) best = static_cast<std::size_t>(std::lround(0.3 * static_cast<double>(n - 1)));
  return std::clamp<std::size_t>(best, 1, n - 3);
}

inline double max_abs(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

}  // namespace detail

/// Exact inverse of decode_coeffs on the unimodal set; extrema are detected
/// from sign changes of the increments.
inline Encoded encode_coeffs(const CsRep& cs) {
  const std::size_t n = cs.size();
  if (n < kMinSpinePoints || cs.radii.size() != n) throw DomainError("encode_coeffs: malformed CsRep");
  const std::vector<double> dy = forward_differences(cs.spine_y);
  const std::vector<double> d2y = forward_differences(dy);
  const std::vector<double> dr = forward_differences(cs.radii);

  std::size_t change = 0;
  int first = 0;
  const double tol_y = std::max(1e-15, 1e-9 * detail::max_abs(d2y));
  const std::size_t cy = count_sign_changes(d2y, tol_y, &first, &change);
  if (cy > 1) throw DomainError("encode_coeffs: spine increments are not unimodal");
  const std::size_t pp = cy == 1 ? std::clamp<std::size_t>(change, 1, n - 3)
                                 : detail::spine_extremum_fallback(cs.spine_y);

  const double tol_r = std::max(1e-15, 1e-9 * detail::max_abs(dr));
  const std::size_t cr = count_sign_changes(dr, tol_r, &first, &change);
  std::size_t pr = n - 2;
  if (cr > 1 || (cr == 1 && first < 0)) throw DomainError("encode_coeffs: radius is not unimodal");
  if (cr == 1) {
    pr = change;
  } else if (first < 0) {
    std::size_t k = 0;
    while (std::abs(dr[k]) <= tol_r) ++k;
    if (k == 0) throw DomainError("encode_coeffs: radius never rises from the nose");
    pr = k;
  }
  pr = std::clamp<std::size_t>(pr, 1, n - 2);

  Encoded e;
  e.meta = detail::read_anchors(cs, pp, pr);
  const Layout l = make_layout(e.meta, cs.delta_x, SmoothnessThresholds{});

  auto tilde = [&](const std::vector<double>& values, const std::array<Segment, 2>& segs,
                   const std::array<double, 2>& starts, const char* what) {
    std::vector<double> t(n, 1.0);
    for (std::size_t k = 0; k < 2; ++k) {
      const Segment& s = segs[k];
      double prev = 0.0;
      for (std::size_t j = s.first; j <= s.last; ++j) {
        double u = std::abs(s.span) < 1e-12 ? 0.0 : (values[j] - starts[k]) / s.span;
        if (j == s.last) u = 1.0;
        if (u < -1e-9 || u > 1.0 + 1e-9)
          throw DomainError(std::string("encode_coeffs: ") + what + " leaves its anchor range");
        u = std::clamp(u, 0.0, 1.0);
        const double den = 1.0 - prev;
        double a = den < 1e-12 ? 1.0 : (1.0 - u) / den;
        if (a > 1.0 + 1e-9) throw DomainError(std::string("encode_coeffs: ") + what + " is not monotone");
        t[j] = j == s.last ? 0.0 : std::clamp(a, 0.0, 1.0);
        prev = u;
      }
    }
    return t;
  };
  using M = MetaParams;
  e.coeffs.u_tilde = tilde(dy, l.u, {e.meta(M::kStart, M::kDy), e.meta(M::kSpineExt, M::kDy)}, "spine slope");
  e.coeffs.v_tilde = tilde(cs.radii, l.v, {e.meta(M::kStart, M::kR), e.meta(M::kRadiusExt, M::kR)}, "radius");
  return e;
}

// ---------------------------------------------------------------------------
// Projection of measured sequences onto the valid set
// ---------------------------------------------------------------------------

namespace detail {

// Pool-adjacent-violators: least-squares non-decreasing fit.
inline std::vector<double> isotonic(const std::vector<double>& v) {
  std::vector<double> mean;
  std::vector<std::size_t> count;
  for (double x : v) {
    mean.push_back(x);
    count.push_back(1);
    while (mean.size() > 1 && mean[mean.size() - 2] > mean.back()) {
      const std::size_t c = count.back() + count[count.size() - 2];
      const double m = (mean.back() * static_cast<double>(count.back()) +
                        mean[mean.size() - 2] * static_cast<double>(count[count.size() - 2])) /
                       static_cast<double>(c);
      mean.pop_back();
      count.pop_back();
      mean.back() = m;
      count.back() = c;
    }
  }
  std::vector<double> out;
  out.reserve(v.size());
  for (std::size_t k = 0; k < mean.size(); ++k) out.insert(out.end(), count[k], mean[k]);
  return out;
}

// Index of an interior extremum that stands clear of both ends by at least
// `frac` of the sequence range; nullopt for (noisy) monotone sequences.
inline std::optional<std::size_t> clear_extremum(const std::vector<double>& v, double frac) {
  const auto [mn, mx] = std::minmax_element(v.begin(), v.end());
  const double range = *mx - *mn;
  if (!(range > 0.0)) return std::nullopt;
  const double ends_hi = std::max(v.front(), v.back()), ends_lo = std::min(v.front(), v.back());
  const double up = *mx - ends_hi, down = ends_lo - *mn;
  if (std::max(up, down) < frac * range) return std::nullopt;
  return static_cast<std::size_t>((up >= down ? mx : mn) - v.begin());
}

}  // namespace detail

/// Nearest valid (meta, coeffs) to a measured CS-Rep: extrema are located
/// robustly, each segment's interpolation coefficients are made monotone and
/// then projected into the admissible box. Returns nullopt when the anchors
/// cannot be decoded within the thresholds.
inline std::optional<Encoded> fit_valid(const CsRep& measured, const SmoothnessThresholds& th,
                                        const GeometryLimits& lim = {}) {
  const std::size_t n = measured.size();
  if (n < kMinSpinePoints) return std::nullopt;
  CsRep cs = measured;
  cs.radii.back() = lim.r_eps;

  const std::vector<double> dy = forward_differences(cs.spine_y);
  std::size_t pp = detail::spine_extremum_fallback(cs.spine_y);
  if (auto e = detail::clear_extremum(dy, 0.05)) pp = *e;
  pp = std::clamp<std::size_t>(pp, 1, n - 3);
  const std::size_t pr = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::max_element(cs.radii.begin(), cs.radii.end() - 1) - cs.radii.begin()), 1,
      n - 2);

  Encoded e;
  e.meta = detail::read_anchors(cs, pp, pr);
  if (meta_infeasibility(e.meta, cs.delta_x, th, lim)) return std::nullopt;
  const Layout l = make_layout(e.meta, cs.delta_x, th);

  auto fit = [&](const std::vector<double>& values, const std::array<Segment, 2>& segs,
                 const std::array<double, 2>& starts) {
    std::vector<double> t(n, 1.0);
    for (std::size_t k = 0; k < 2; ++k) {
      const Segment& s = segs[k];
      std::vector<double> u;
      for (std::size_t j = s.first; j < s.last; ++j)
        u.push_back(s.span == 0.0 ? 0.0 : std::clamp((values[j] - starts[k]) / s.span, 0.0, 1.0));
      u = detail::isotonic(u);
      double prod = 1.0;
      for (std::size_t j = s.first; j <= s.last; ++j) {
        if (j == s.last) {
          t[j] = 0.0;
          break;
        }
        const auto [lo, hi] = coefficient_bounds(s, j, prod);
        const double want = prod > 0.0 ? (1.0 - u[j - s.first]) / prod : 1.0;
        t[j] = std::clamp(want, lo, hi);
        prod *= t[j];
      }
    }
    return t;
  };
  using M = MetaParams;
  e.coeffs.u_tilde = fit(dy, l.u, {e.meta(M::kStart, M::kDy), e.meta(M::kSpineExt, M::kDy)});
  e.coeffs.v_tilde = fit(cs.radii, l.v, {e.meta(M::kStart, M::kR), e.meta(M::kRadiusExt, M::kR)});
  complete_meta(e.meta, decode_coeffs(e.meta, e.coeffs, cs.delta_x, th), l.counts);
  return e;
}

// ---------------------------------------------------------------------------
// Random valid draws
// ---------------------------------------------------------------------------

/// Uniform draw of anchors satisfying every MetaParams invariant, with the
/// trailing edge at x = 1 on the δx grid.
inline MetaParams sample_valid_meta(Rng& rng, double delta_x, const SmoothnessThresholds& th,
                                    const GeometryLimits& lim = {}) {
  using M = MetaParams;
  const auto grid_end = static_cast<std::size_t>(std::lround(1.0 / delta_x));
  const auto n_lo = static_cast<std::size_t>(std::lround(0.85 / delta_x)) + 1;
  const auto n_hi = std::min(grid_end, static_cast<std::size_t>(std::lround(0.99 / delta_x))) + 1;
  const std::size_t n = std::max<std::size_t>(kMinSpinePoints + 2, n_lo + rng.below(n_hi - n_lo + 1));
  const double nd = static_cast<double>(n);
  auto pick = [&](double a, double b, std::size_t lo, std::size_t hi) {
    std::size_t i0 = std::max<std::size_t>(lo, static_cast<std::size_t>(a * nd));
    std::size_t i1 = std::min<std::size_t>(hi, static_cast<std::size_t>(b * nd));
    if (i1 < i0) i1 = i0;
    return i0 + rng.below(i1 - i0 + 1);
  };
  const std::size_t pos_r = pick(0.12, 0.45, 2, n - 1);
  const std::size_t pos_p = pick(0.15, 0.70, 2, n - 2);

  MetaParams meta;
  const double x_n = static_cast<double>(grid_end) * delta_x;
  const double x_1 = x_n - (nd - 1.0) * delta_x;
  meta(M::kStart, M::kX) = x_1;
  meta(M::kSpineExt, M::kX) = x_1 + static_cast<double>(pos_p - 1) * delta_x;
  meta(M::kRadiusExt, M::kX) = x_1 + static_cast<double>(pos_r - 1) * delta_x;
  meta(M::kEnd, M::kX) = x_n;

  constexpr double kSafety = 0.95;
  const double rise = kSafety * static_cast<double>(pos_r - 1) * th.thres_r;
  const double fall = kSafety * static_cast<double>(n - pos_r) * th.thres_r;
  const double r1 = rng.uniform(lim.r_nose_min, std::max(lim.r_nose_min, 0.03));
  const double rp_hi = std::min({0.1, r1 + rise, lim.r_eps + fall});
  const double rp = rng.uniform(std::max(r1, std::min(0.03, rp_hi)), std::max(r1, rp_hi));
  meta(M::kStart, M::kR) = r1;
  meta(M::kRadiusExt, M::kR) = rp;
  meta(M::kEnd, M::kR) = lim.r_eps;

  meta(M::kStart, M::kY) = rng.uniform(-0.01, 0.03);
  const double dy1 = rng.uniform(-0.05, 0.4) * delta_x;
  double dyp = rng.uniform(-0.2, 0.2) * delta_x;
  double dyn = rng.uniform(-0.4, 0.05) * delta_x;
  const double b1 = kSafety * static_cast<double>(pos_p - 1) * th.thres_y;
  dyp = std::clamp(dyp, dy1 - b1, dy1 + b1);
  const double b2 = kSafety * static_cast<double>(n - 1 - pos_p) * th.thres_y;
  dyn = std::clamp(dyn, dyp - b2, dyp + b2);
  meta(M::kStart, M::kDy) = dy1;
  meta(M::kSpineExt, M::kDy) = dyp;
  meta(M::kEnd, M::kDy) = dyn;
  return meta;
}

/// Uniform unit values pushed through the admissible box.
inline CoeffSeq sample_valid_coeffs(Rng& rng, const MetaParams& meta, double delta_x,
                                    const SmoothnessThresholds& th) {
  const Layout l = make_layout(meta, delta_x, th);
  std::vector<double> su(l.counts.n), sv(l.counts.n);
  for (auto& s : su) s = rng.uniform();
  for (auto& s : sv) s = rng.uniform();
  return unit_to_coeffs(l, su, sv);
}

}  // namespace airfoilgen
