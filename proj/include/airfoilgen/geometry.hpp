#pragma once

// Profiles, circle-sweeping representation (CS-Rep), envelope sweeping,
// maximal-inscribed-circle extraction and the four geometric validity checks.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"

namespace airfoilgen {

/// Closed polygon, counter-clockwise; the last point connects to the first.
struct Profile {
  std::vector<Point2> points;

  std::size_t size() const { return points.size(); }
  const Point2& operator[](std::size_t i) const { return points[i]; }
};

/// Circle-sweeping representation: spine points on a uniform x grid with a
/// radius per point.
struct CsRep {
  double x0 = 0.0;
  double delta_x = 0.0;
  std::vector<double> spine_y;
  std::vector<double> radii;

  std::size_t size() const { return spine_y.size(); }
  double x(std::size_t i) const { return x0 + static_cast<double>(i) * delta_x; }
  Point2 center(std::size_t i) const { return {x(i), spine_y[i]}; }
};

struct GeometryLimits {
  double r_nose_min = 5e-3;
  double r_eps = 1e-4;
};

struct SmoothnessThresholds {
  double thres_y = 0.1 / 127.0;
  double thres_r = 1.0 / 127.0;
  double a_tilde_min = 0.0;

  static SmoothnessThresholds for_spacing(double delta_x) {
    return {0.1 * delta_x, delta_x, 0.0};
  }
};

inline constexpr double kDefaultDeltaX = 1.0 / 127.0;
inline constexpr std::size_t kDefaultProfileLength = 200;
inline constexpr std::size_t kMinSpinePoints = 8;

// ---------------------------------------------------------------------------
// NACA generators
// ---------------------------------------------------------------------------

/// Four-term-plus-root NACA half thickness with the closed trailing edge
/// coefficient, so y_t(1) = 0.
inline double naca_half_thickness(double x, double t) {
  return 5.0 * t *
         (0.2969 * std::sqrt(x) - 0.1260 * x - 0.3516 * x * x + 0.2843 * x * x * x -
          0.1036 * x * x * x * x);
}

struct Camber {
  double y = 0.0;
  double slope = 0.0;
};

inline Camber naca4_camber(double x, double m, double p) {
  if (m == 0.0) return {};
  if (x < p) return {m / (p * p) * (2.0 * p * x - x * x), 2.0 * m / (p * p) * (p - x)};
  const double q = (1.0 - p) * (1.0 - p);
  return {m / q * ((1.0 - 2.0 * p) + 2.0 * p * x - x * x), 2.0 * m / q * (p - x)};
}

/// Five-digit camber family constants (position of the camber break m, k1,
/// and k2/k1 for reflexed lines), tabulated for a design lift of 0.3.
struct Naca5Constants {
  double p = 0.0;
  double m = 0.0;
  double k1 = 0.0;
  double k2_over_k1 = 0.0;
  bool reflex = false;
};

struct Naca5Code {
  int design_lift_digit = 0;  // L: design CL = 0.15 L
  int position_digit = 0;     // P: max camber at 0.05 P
  int reflex_digit = 0;       // Q: 0 standard, 1 reflexed
  double thickness = 0.0;     // XX / 100
};

inline Naca5Code decode_naca5(int code) {
  if (code < 10000 || code > 99999) throw DomainError("naca5: code must have five digits");
  Naca5Code c;
  c.design_lift_digit = code / 10000;
  c.position_digit = (code / 1000) % 10;
  c.reflex_digit = (code / 100) % 10;
  c.thickness = static_cast<double>(code % 100) / 100.0;
  return c;
}

inline Naca5Constants naca5_constants(int position_digit, int reflex_digit) {
  static constexpr std::array<Naca5Constants, 5> kStandard{{
      {0.05, 0.0580, 361.400, 0.0, false},
      {0.10, 0.1260, 51.640, 0.0, false},
      {0.15, 0.2025, 15.957, 0.0, false},
      {0.20, 0.2900, 6.643, 0.0, false},
      {0.25, 0.3910, 3.230, 0.0, false},
  }};
  static constexpr std::array<Naca5Constants, 4> kReflex{{
      {0.10, 0.1300, 51.990, 0.000764, true},
      {0.15, 0.2170, 15.793, 0.00677, true},
      {0.20, 0.3180, 6.520, 0.0303, true},
      {0.25, 0.4410, 3.191, 0.1355, true},
  }};
  if (reflex_digit == 0 && position_digit >= 1 && position_digit <= 5)
    return kStandard[static_cast<std::size_t>(position_digit - 1)];
  if (reflex_digit == 1 && position_digit >= 2 && position_digit <= 5)
    return kReflex[static_cast<std::size_t>(position_digit - 2)];
  throw DomainError("naca5: unsupported camber family");
}

/// Camber for the tabulated design lift 0.3; callers scale by CL_design/0.3.
inline Camber naca5_camber(double x, const Naca5Constants& c) {
  const double m = c.m, k1 = c.k1;
  if (!c.reflex) {
    if (x < m)
      return {k1 / 6.0 * (x * x * x - 3.0 * m * x * x + m * m * (3.0 - m) * x),
              k1 / 6.0 * (3.0 * x * x - 6.0 * m * x + m * m * (3.0 - m))};
    return {k1 * m * m * m / 6.0 * (1.0 - x), -k1 * m * m * m / 6.0};
  }
  const double r = c.k2_over_k1;
  const double om3 = (1.0 - m) * (1.0 - m) * (1.0 - m);
  const double m3 = m * m * m;
  if (x < m)
    return {k1 / 6.0 * ((x - m) * (x - m) * (x - m) - r * om3 * x - m3 * x + m3),
            k1 / 6.0 * (3.0 * (x - m) * (x - m) - r * om3 - m3)};
  return {k1 / 6.0 * (r * (x - m) * (x - m) * (x - m) - r * om3 * x - m3 * x + m3),
          k1 / 6.0 * (3.0 * r * (x - m) * (x - m) - r * om3 - m3)};
}

namespace detail {

// Cosine-spaced closed profile: starts at the trailing edge, runs over the
// upper surface to the nose and back along the lower surface.
template <class CamberFn>
Profile naca_profile(double t, std::size_t n_pts, CamberFn camber) {
  Profile out;
  out.points.reserve(n_pts);
  for (std::size_t i = 0; i < n_pts; ++i) {
    const double beta = 2.0 * kPi * static_cast<double>(i) / static_cast<double>(n_pts);
    const double x = 0.5 * (1.0 + std::cos(beta));
    const double yt = naca_half_thickness(x, t);
    const Camber c = camber(x);
    const double theta = std::atan(c.slope);
    const double sign = beta <= kPi ? 1.0 : -1.0;
    out.points.push_back({x - sign * yt * std::sin(theta), c.y + sign * yt * std::cos(theta)});
  }
  return out;
}

}  // namespace detail

inline Profile naca4_profile(double m, double p, double t, std::size_t n_pts) {
  if (!(m >= 0.0 && m <= 0.1)) throw DomainError("naca4: max camber outside [0, 0.1]");
  if (m > 0.0 && !(p > 0.0 && p < 1.0)) throw DomainError("naca4: camber position outside (0, 1)");
  if (!(t > 0.0 && t <= 0.4)) throw DomainError("naca4: thickness outside (0, 0.4]");
  if (n_pts < 32) throw DomainError("naca4: need at least 32 points");
  return detail::naca_profile(t, n_pts, [&](double x) { return naca4_camber(x, m, p); });
}

inline Profile naca5_profile(int code, std::size_t n_pts) {
  const Naca5Code c = decode_naca5(code);
  if (c.design_lift_digit < 1) throw DomainError("naca5: design lift digit must be positive");
  if (!(c.thickness > 0.0 && c.thickness <= 0.4)) throw DomainError("naca5: thickness outside (0, 0.4]");
  if (n_pts < 32) throw DomainError("naca5: need at least 32 points");
  const Naca5Constants k = naca5_constants(c.position_digit, c.reflex_digit);
  const double scale = 0.15 * c.design_lift_digit / 0.3;
  return detail::naca_profile(c.thickness, n_pts, [&](double x) {
    Camber cb = naca5_camber(x, k);
    return Camber{scale * cb.y, scale * cb.slope};
  });
}

// ---------------------------------------------------------------------------
// Polygon utilities
// ---------------------------------------------------------------------------

inline double perimeter(const Profile& p) {
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += distance(p[i], p[(i + 1) % p.size()]);
  return s;
}

inline double signed_area(const Profile& p) {
  double a = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) a += cross(p[i], p[(i + 1) % p.size()]);
  return 0.5 * a;
}

/// Equal arc-length samples along the closed boundary, starting at point 0.
inline Profile resample_arclength(const Profile& profile, std::size_t n_pts) {
  const std::size_t k = profile.size();
  if (k < 2 || n_pts < 1) throw DomainError("resample_arclength: need at least two points");
  std::vector<double> cum(k + 1, 0.0);
  for (std::size_t i = 0; i < k; ++i) cum[i + 1] = cum[i] + distance(profile[i], profile[(i + 1) % k]);
  const double total = cum[k];
  if (!(total > 0.0)) throw DomainError("resample_arclength: zero perimeter");

  Profile out;
  out.points.reserve(n_pts);
  std::size_t seg = 0;
  for (std::size_t j = 0; j < n_pts; ++j) {
    const double s = total * static_cast<double>(j) / static_cast<double>(n_pts);
    while (seg + 1 < k && cum[seg + 1] <= s) ++seg;
    const double len = cum[seg + 1] - cum[seg];
    const double f = len > 0.0 ? (s - cum[seg]) / len : 0.0;
    const Point2 a = profile[seg], b = profile[(seg + 1) % k];
    out.points.push_back({a.x + f * (b.x - a.x), a.y + f * (b.y - a.y)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Segment intersection
// ---------------------------------------------------------------------------

namespace detail {

inline int orientation(Point2 a, Point2 b, Point2 c) {
  const double v = cross(b - a, c - a);
  return (v > 0.0) - (v < 0.0);
}

inline bool on_segment(Point2 a, Point2 b, Point2 p) {
  return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y &&
         p.y <= std::max(a.y, b.y);
}

}  // namespace detail

/// Closed-segment intersection test (touching counts).
inline bool segments_intersect(Point2 p1, Point2 p2, Point2 q1, Point2 q2) {
  using detail::on_segment;
  using detail::orientation;
  const int o1 = orientation(p1, p2, q1), o2 = orientation(p1, p2, q2);
  const int o3 = orientation(q1, q2, p1), o4 = orientation(q1, q2, p2);
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(p1, p2, q1)) return true;
  if (o2 == 0 && on_segment(p1, p2, q2)) return true;
  if (o3 == 0 && on_segment(q1, q2, p1)) return true;
  if (o4 == 0 && on_segment(q1, q2, p2)) return true;
  return false;
}

namespace detail {

// Edges i and i+1 share a vertex; they only conflict when the second folds
// back along the first.
inline bool adjacent_edges_conflict(Point2 a, Point2 shared, Point2 c) {
  if (orientation(a, shared, c) != 0) return false;
  return dot(a - shared, c - shared) > 0.0;
}

inline bool edges_conflict(const std::vector<Point2>& v, std::size_t i, std::size_t j) {
  const std::size_t k = v.size();
  if (i == j) return false;
  if ((i + 1) % k == j) return adjacent_edges_conflict(v[i], v[j], v[(j + 1) % k]);
  if ((j + 1) % k == i) return adjacent_edges_conflict(v[j], v[i], v[(i + 1) % k]);
  return segments_intersect(v[i], v[(i + 1) % k], v[j], v[(j + 1) % k]);
}

}  // namespace detail

/// Shamos-Hoey sweep: returns some pair of conflicting edges (edge i joins
/// vertex i to vertex i+1) or nothing when the polygon is simple.
inline std::optional<std::pair<std::size_t, std::size_t>> find_self_intersection(
    const std::vector<Point2>& v) {
  const std::size_t k = v.size();
  if (k < 3) return std::nullopt;

  struct Seg {
    Point2 lo, hi;  // lexicographic (x, y) order
  };
  std::vector<Seg> segs(k);
  auto lex_less = [](Point2 a, Point2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); };
  for (std::size_t i = 0; i < k; ++i) {
    Point2 a = v[i], b = v[(i + 1) % k];
    if (lex_less(b, a)) std::swap(a, b);
    segs[i] = {a, b};
  }

  struct Event {
    Point2 p;
    int kind;  // 0 insert, 1 remove
    std::size_t seg;
  };
  std::vector<Event> events;
  events.reserve(2 * k);
  for (std::size_t i = 0; i < k; ++i) {
    events.push_back({segs[i].lo, 0, i});
    events.push_back({segs[i].hi, 1, i});
  }
  std::sort(events.begin(), events.end(), [&](const Event& a, const Event& b) {
    if (a.p.x != b.p.x) return a.p.x < b.p.x;
    if (a.p.y != b.p.y) return a.p.y < b.p.y;
    if (a.kind != b.kind) return a.kind < b.kind;
    return a.seg < b.seg;
  });

  double sweep_x = 0.0;
  auto y_at = [&](std::size_t i) {
    const Seg& s = segs[i];
    if (s.hi.x == s.lo.x) return s.lo.y;
    const double f = (sweep_x - s.lo.x) / (s.hi.x - s.lo.x);
    return s.lo.y + f * (s.hi.y - s.lo.y);
  };
  auto slope = [&](std::size_t i) {
    const Seg& s = segs[i];
    if (s.hi.x == s.lo.x) return std::numeric_limits<double>::infinity();
    return (s.hi.y - s.lo.y) / (s.hi.x - s.lo.x);
  };
  auto cmp = [&](std::size_t a, std::size_t b) {
    if (a == b) return false;
    const double ya = y_at(a), yb = y_at(b);
    if (ya != yb) return ya < yb;
    const double sa = slope(a), sb = slope(b);
    if (sa != sb) return sa < sb;
    return a < b;
  };
  std::set<std::size_t, decltype(cmp)> status(cmp);
  std::vector<typename std::set<std::size_t, decltype(cmp)>::iterator> where(k, status.end());

  for (const Event& e : events) {
    sweep_x = e.p.x;
    if (e.kind == 0) {
      auto [it, inserted] = status.insert(e.seg);
      where[e.seg] = it;
      if (it != status.begin()) {
        const std::size_t below = *std::prev(it);
        if (detail::edges_conflict(v, below, e.seg)) return std::minmax(below, e.seg);
      }
      if (auto nx = std::next(it); nx != status.end()) {
        if (detail::edges_conflict(v, *nx, e.seg)) return std::minmax(*nx, e.seg);
      }
    } else {
      auto it = where[e.seg];
      if (it == status.end()) continue;
      if (it != status.begin()) {
        auto nx = std::next(it);
        if (nx != status.end()) {
          const std::size_t below = *std::prev(it);
          if (detail::edges_conflict(v, below, *nx)) return std::minmax(below, *nx);
        }
      }
      status.erase(it);
      where[e.seg] = status.end();
    }
  }
  return std::nullopt;
}

namespace detail {

inline Point2 line_intersection(Point2 p1, Point2 p2, Point2 q1, Point2 q2) {
  const Point2 r = p2 - p1, s = q2 - q1;
  const double den = cross(r, s);
  if (den == 0.0) return 0.5 * (p2 + q1);
  const double t = cross(q1 - p1, s) / den;
  return p1 + t * r;
}

// Cuts loops out of a closed polygon until it is simple, keeping the side with
// the larger enclosed area at every crossing.
inline std::vector<Point2> remove_loops(std::vector<Point2> v) {
  auto area = [](const std::vector<Point2>& w) {
    double a = 0.0;
    for (std::size_t i = 0; i < w.size(); ++i) a += cross(w[i], w[(i + 1) % w.size()]);
    return 0.5 * a;
  };
  while (v.size() >= 3) {
    const auto hit = find_self_intersection(v);
    if (!hit) break;
    const auto [a, b] = *hit;
    const std::size_t k = v.size();
    if ((a + 1) % k == b || (b + 1) % k == a) {
      const std::size_t shared = (a + 1) % k == b ? b : a;
      v.erase(v.begin() + static_cast<std::ptrdiff_t>(shared));
      continue;
    }
    const Point2 x = line_intersection(v[a], v[(a + 1) % k], v[b], v[(b + 1) % k]);
    std::vector<Point2> inner{x};
    inner.insert(inner.end(), v.begin() + static_cast<std::ptrdiff_t>(a + 1),
                 v.begin() + static_cast<std::ptrdiff_t>(b + 1));
    std::vector<Point2> outer(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(a + 1));
    outer.push_back(x);
    outer.insert(outer.end(), v.begin() + static_cast<std::ptrdiff_t>(b + 1), v.end());
    v = std::abs(area(inner)) > std::abs(area(outer)) ? std::move(inner) : std::move(outer);
  }
  return v;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Envelope sweeping
// ---------------------------------------------------------------------------

/// Thrown when (Δc r)² > ‖Δc c‖² at some spine index.
struct EnvelopeDomainError : DomainError {
  std::size_t index;
  EnvelopeDomainError(std::size_t i, const std::string& what) : DomainError(what), index(i) {}
};

struct EnvelopeBranches {
  std::vector<Point2> upper;  // nose to tail
  std::vector<Point2> lower;  // nose to tail
  std::vector<Point2> upper_dir;
  std::vector<Point2> lower_dir;
};

/// Envelope tangency points p_i = c_i + r_i d_i for both signs of the normal
/// component. Central differences in the interior, one-sided at the ends.
inline EnvelopeBranches envelope_branches(const CsRep& cs) {
  const std::size_t n = cs.size();
  if (n < 2 || cs.radii.size() != n) throw DomainError("sweep_envelope: malformed CsRep");
  if (!(cs.delta_x > 0.0)) throw DomainError("sweep_envelope: delta_x must be positive");
  EnvelopeBranches b;
  b.upper.resize(n);
  b.lower.resize(n);
  b.upper_dir.resize(n);
  b.lower_dir.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i == 0 ? 0 : i - 1;
    const std::size_t hi = i + 1 == n ? n - 1 : i + 1;
    const double span = static_cast<double>(hi - lo);
    const Point2 dc{(cs.x(hi) - cs.x(lo)) / span, (cs.spine_y[hi] - cs.spine_y[lo]) / span};
    const double dr = (cs.radii[hi] - cs.radii[lo]) / span;
    const double dc2 = dot(dc, dc);
    if (dr * dr > dc2)
      throw EnvelopeDomainError(i, "sweep_envelope: radius changes faster than the spine at index " +
                                       std::to_string(i));
    const double len = std::sqrt(dc2);
    const Point2 e{-dc.y / len, dc.x / len};
    const double along = -dr / dc2;
    const double across = std::sqrt(std::max(0.0, 1.0 - dr * dr / dc2));
    const Point2 du = along * dc + across * e;
    const Point2 dl = along * dc - across * e;
    const Point2 c = cs.center(i);
    b.upper_dir[i] = du;
    b.lower_dir[i] = dl;
    b.upper[i] = c + cs.radii[i] * du;
    b.lower[i] = c + cs.radii[i] * dl;
  }
  return b;
}

namespace detail {

// Interior samples of the counter-clockwise arc from direction `from` to `to`.
inline void append_arc(std::vector<Point2>& out, Point2 center, double r, Point2 from, Point2 to,
                       double max_step) {
  const double a0 = std::atan2(from.y, from.x);
  double sweep = std::atan2(to.y, to.x) - a0;
  while (sweep <= 0.0) sweep += 2.0 * kPi;
  while (sweep > 2.0 * kPi) sweep -= 2.0 * kPi;
  const auto pieces = static_cast<std::size_t>(std::ceil(sweep / max_step));
  for (std::size_t k = 1; k < pieces; ++k) {
    const double a = a0 + sweep * static_cast<double>(k) / static_cast<double>(pieces);
    out.push_back({center.x + r * std::cos(a), center.y + r * std::sin(a)});
  }
}

}  // namespace detail

/// Closed counter-clockwise boundary swept by the circle family: upper branch
/// tail to nose, an arc of the leading circle, lower branch nose to tail, and
/// a trailing arc when the last circle is not negligible. Swallowtail loops
/// of the raw envelope are cut away so the result is always simple.
inline Profile sweep_envelope(const CsRep& cs) {
  const EnvelopeBranches b = envelope_branches(cs);
  const std::size_t n = cs.size();
  constexpr double kArcStep = kPi / 24.0;
  const double span = cs.delta_x * static_cast<double>(n - 1);

  std::vector<Point2> pts;
  pts.reserve(2 * n + 64);
  for (std::size_t i = n; i-- > 0;) pts.push_back(b.upper[i]);
  detail::append_arc(pts, cs.center(0), cs.radii[0], b.upper_dir[0], b.lower_dir[0], kArcStep);
  for (std::size_t i = 0; i < n; ++i) pts.push_back(b.lower[i]);
  if (cs.radii[n - 1] > 1e-3 * span)
    detail::append_arc(pts, cs.center(n - 1), cs.radii[n - 1], b.lower_dir[n - 1],
                       b.upper_dir[n - 1], kArcStep);

  Profile out{detail::remove_loops(std::move(pts))};
  if (signed_area(out) < 0.0) std::reverse(out.points.begin(), out.points.end());
  return out;
}

// ---------------------------------------------------------------------------
// Maximal inscribed circles
// ---------------------------------------------------------------------------

inline double point_segment_distance(Point2 p, Point2 a, Point2 b) {
  const Point2 ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return distance(p, a + t * ab);
}

struct ExtractOptions {
  double r_eps = 1e-4;
  // Stations are kept while |Δr| ≤ slope_cap·δx; where the medial axis
  // degenerates into the nose or a round tail, r grows at the rate of x.
  double slope_cap = 0.9;
};

namespace detail {

struct Station {
  bool inside = false;
  double y = 0.0;
  double r = 0.0;
  double y_lo = 0.0;
  double y_hi = 0.0;
};

inline Station inscribed_on_vertical(const std::vector<Point2>& v, double x) {
  const std::size_t k = v.size();
  std::vector<double> ys;
  for (std::size_t i = 0; i < k; ++i) {
    const Point2 a = v[i], b = v[(i + 1) % k];
    const double xmin = std::min(a.x, b.x), xmax = std::max(a.x, b.x);
    if (!(x >= xmin && x < xmax)) continue;
    const double f = (x - a.x) / (b.x - a.x);
    ys.push_back(a.y + f * (b.y - a.y));
  }
  Station st;
  if (ys.size() < 2) return st;
  std::sort(ys.begin(), ys.end());
  double best = -1.0;
  for (std::size_t i = 0; i + 1 < ys.size(); i += 2) {
    if (ys[i + 1] - ys[i] > best) {
      best = ys[i + 1] - ys[i];
      st.y_lo = ys[i];
      st.y_hi = ys[i + 1];
    }
  }
  if (!(best > 0.0)) return st;
  st.inside = true;

  const double reach = 0.5 * (st.y_hi - st.y_lo);
  std::vector<std::pair<Point2, Point2>> near;
  for (std::size_t i = 0; i < k; ++i) {
    const Point2 a = v[i], b = v[(i + 1) % k];
    if (std::max(a.x, b.x) < x - reach || std::min(a.x, b.x) > x + reach) continue;
    near.emplace_back(a, b);
  }
  auto dist = [&](double y) {
    double d = std::numeric_limits<double>::infinity();
    for (const auto& [a, b] : near) d = std::min(d, point_segment_distance({x, y}, a, b));
    return d;
  };

  // Golden-section search for the maximum of the interior distance.
  constexpr double kInvPhi = 0.6180339887498949;
  double a = st.y_lo, b = st.y_hi;
  double c = b - kInvPhi * (b - a), d = a + kInvPhi * (b - a);
  double fc = dist(c), fd = dist(d);
  const double tol = 1e-14 * std::max(1.0, std::abs(b - a));
  for (int it = 0; it < 200 && b - a > tol; ++it) {
    if (fc < fd) {
      a = c;
      c = d;
      fc = fd;
      d = a + kInvPhi * (b - a);
      fd = dist(d);
    } else {
      b = d;
      d = c;
      fd = fc;
      c = b - kInvPhi * (b - a);
      fc = dist(c);
    }
  }
  st.y = 0.5 * (a + b);
  st.r = dist(st.y);
  return st;
}

}  // namespace detail

/// Medial CS-Rep of a simple profile: at stations x_te − k·δx the spine point
/// maximizes the distance to the boundary along the vertical line and the
/// radius is that distance. The station window grows from the thickest
/// station while the radius stays sweepable; a trailing anchor with radius
/// r_eps closes the representation.
inline CsRep extract_csrep(const Profile& profile, double delta_x, const ExtractOptions& opt = {}) {
  if (!(delta_x > 0.0)) throw DomainError("extract_csrep: delta_x must be positive");
  if (profile.size() < 3) throw DomainError("extract_csrep: profile too small");
  if (find_self_intersection(profile.points)) throw DomainError("extract_csrep: profile is not simple");

  const auto& v = profile.points;
  std::size_t te = 0, le = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i].x > v[te].x) te = i;
    if (v[i].x < v[le].x) le = i;
  }
  const double x_te = v[te].x, x_le = v[le].x;

  // k = number of δx steps ahead of the trailing edge.
  std::vector<detail::Station> st;
  for (std::size_t k = 1;; ++k) {
    const double x = x_te - static_cast<double>(k) * delta_x;
    if (x <= x_le) break;
    st.push_back(detail::inscribed_on_vertical(v, x));
  }
  if (st.empty()) throw DomainError("extract_csrep: delta_x larger than the chord");

  std::size_t best = 0;
  for (std::size_t i = 0; i < st.size(); ++i)
    if (st[i].inside && (!st[best].inside || st[i].r > st[best].r)) best = i;
  if (!st[best].inside) throw DomainError("extract_csrep: no interior intersection at any station");

  const double cap = opt.slope_cap * delta_x;
  auto ok_pair = [&](std::size_t a, std::size_t b) {
    return st[a].inside && st[b].inside && std::abs(st[a].r - st[b].r) <= cap;
  };
  std::size_t nose = best, tail = best;  // index in st: larger k is further forward
  while (nose + 1 < st.size() && ok_pair(nose, nose + 1)) ++nose;
  while (tail > 0 && ok_pair(tail, tail - 1)) --tail;

  CsRep cs;
  cs.delta_x = delta_x;
  for (std::size_t i = nose + 1; i-- > tail;) {
    cs.spine_y.push_back(st[i].y);
    cs.radii.push_back(st[i].r);
  }
  // Trailing anchor one step behind the last kept station.
  const std::size_t anchor_k = tail;  // st index tail is k = tail + 1
  if (anchor_k == 0) {
    cs.spine_y.push_back(v[te].y);
  } else {
    const detail::Station& a = st[anchor_k - 1];
    if (!a.inside) throw DomainError("extract_csrep: trailing anchor outside the profile");
    cs.spine_y.push_back(0.5 * (a.y_lo + a.y_hi));
  }
  cs.radii.push_back(opt.r_eps);
  cs.x0 = x_te - static_cast<double>(nose + 1) * delta_x;

  if (cs.size() < kMinSpinePoints) throw DomainError("extract_csrep: fewer than 8 stations fit the profile");
  return cs;
}

// ---------------------------------------------------------------------------
// Validity
// ---------------------------------------------------------------------------

struct Violation {
  int check = 0;           // 1..4
  std::size_t index = 0;   // offending element (edge, spine index, ...)
  std::size_t other = 0;   // second edge of a crossing, otherwise unused
  double magnitude = 0.0;
};

struct ValidityReport {
  bool simple_closed = true;
  bool rounded_nose_sharp_tail = true;
  bool monotone_progression = true;
  bool smooth_unimodal_thickness = true;
  std::vector<Violation> violations;

  bool all() const {
    return simple_closed && rounded_nose_sharp_tail && monotone_progression && smooth_unimodal_thickness;
  }
};

/// Sign changes of a sequence, ignoring entries with |v| ≤ tol.
inline std::size_t count_sign_changes(const std::vector<double>& v, double tol,
                                      int* first_sign = nullptr, std::size_t* first_change = nullptr) {
  int prev = 0;
  std::size_t changes = 0;
  if (first_sign) *first_sign = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (std::abs(v[i]) <= tol) continue;
    const int s = v[i] > 0.0 ? 1 : -1;
    if (prev == 0 && first_sign) *first_sign = s;
    if (prev != 0 && s != prev) {
      if (changes == 0 && first_change) *first_change = i;
      ++changes;
    }
    prev = s;
  }
  return changes;
}

inline std::vector<double> forward_differences(const std::vector<double>& v) {
  std::vector<double> d;
  if (v.size() < 2) return d;
  d.reserve(v.size() - 1);
  for (std::size_t i = 0; i + 1 < v.size(); ++i) d.push_back(v[i + 1] - v[i]);
  return d;
}

/// Relative floor below which differences count as zero when counting
/// extrema; absorbs prefix-sum rounding.
inline constexpr double kSignTolerance = 1e-9;

inline ValidityReport validate(const Profile& profile, const CsRep& cs, const SmoothnessThresholds& th,
                               const GeometryLimits& lim = {}) {
  ValidityReport rep;
  auto fail = [&](bool& flag, Violation v) {
    flag = false;
    rep.violations.push_back(v);
  };

  // #1 single, closed, simple
  if (profile.size() < 3) {
    fail(rep.simple_closed, {1, 0, 0, 0.0});
  } else if (auto hit = find_self_intersection(profile.points)) {
    fail(rep.simple_closed, {1, hit->first, hit->second, 1.0});
  } else if (!(std::abs(signed_area(profile)) > 0.0)) {
    fail(rep.simple_closed, {1, 0, 0, 0.0});
  }

  const std::size_t n = cs.size();
  if (n < kMinSpinePoints || cs.radii.size() != n) {
    fail(rep.monotone_progression, {3, 0, 0, static_cast<double>(n)});
    return rep;
  }

  // #2 rounded nose, converging tail
  if (!(cs.radii.front() >= lim.r_nose_min))
    fail(rep.rounded_nose_sharp_tail, {2, 0, 0, lim.r_nose_min - cs.radii.front()});
  if (!(cs.radii.back() <= lim.r_eps))
    fail(rep.rounded_nose_sharp_tail, {2, n - 1, 0, cs.radii.back() - lim.r_eps});
  for (std::size_t i = 0; i + 1 < n; ++i)
    if (!(cs.radii[i] > 0.0)) fail(rep.rounded_nose_sharp_tail, {2, i, 0, -cs.radii[i]});

  // #3 strictly increasing spine abscissae
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double step = cs.x(i + 1) - cs.x(i);
    if (!(step > 0.0)) {
      fail(rep.monotone_progression, {3, i, 0, step});
      break;
    }
  }

  // #4 bounded increments and single extrema
  const std::vector<double> dy = forward_differences(cs.spine_y);
  const std::vector<double> d2y = forward_differences(dy);
  const std::vector<double> dr = forward_differences(cs.radii);
  for (std::size_t j = 0; j < d2y.size(); ++j)
    if (!(std::abs(d2y[j]) < th.thres_y)) fail(rep.smooth_unimodal_thickness, {4, j, 0, std::abs(d2y[j])});
  for (std::size_t j = 0; j < dr.size(); ++j)
    if (!(std::abs(dr[j]) < th.thres_r)) fail(rep.smooth_unimodal_thickness, {4, j, 0, std::abs(dr[j])});
  std::size_t where = 0;
  if (const auto c = count_sign_changes(d2y, kSignTolerance * th.thres_y, nullptr, &where); c > 1)
    fail(rep.smooth_unimodal_thickness, {4, where, 0, static_cast<double>(c)});
  int first = 0;
  if (const auto c = count_sign_changes(dr, kSignTolerance * th.thres_r, &first, &where);
      c > 1 || (c == 1 && first < 0))
    fail(rep.smooth_unimodal_thickness, {4, where, 0, static_cast<double>(c)});
  return rep;
}

}  // namespace airfoilgen
