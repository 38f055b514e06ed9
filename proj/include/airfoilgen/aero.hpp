#pragma once

// Aerodynamic surrogate: thin-airfoil zero-lift angle for lift at α = 0 and a
// flat-plate skin friction with a thickness form factor for drag. This is a
// deterministic stand-in for a viscous solver; only its self-consistency is
// relied upon.

#include <algorithm>
#include <cmath>
#include <vector>

#include "core.hpp"
#include "geometry.hpp"

namespace airfoilgen {

inline constexpr double kDefaultReynolds = 2e6;

struct AeroLabel {
  double cl = 0.0;
  double cd = 0.0;
};

namespace detail {

// Camber slope at x: node slopes from central differences (one-sided at the
// ends), linear in between, held constant beyond the spine.
inline double spine_slope(const CsRep& cs, double x) {
  const std::size_t n = cs.size();
  auto node = [&](std::size_t i) {
    const std::size_t lo = i == 0 ? 0 : i - 1, hi = i + 1 == n ? n - 1 : i + 1;
    return (cs.spine_y[hi] - cs.spine_y[lo]) / (cs.x(hi) - cs.x(lo));
  };
  const double s = (x - cs.x0) / cs.delta_x;
  if (s <= 0.0) return node(0);
  if (s >= static_cast<double>(n - 1)) return node(n - 1);
  const auto i = static_cast<std::size_t>(s);
  const double f = s - static_cast<double>(i);
  return (1.0 - f) * node(i) + f * node(i + 1);
}

}  // namespace detail

/// Thin-airfoil lift coefficient at zero incidence, 2∫₀^π z'(x)(cosθ − 1) dθ
/// with x = (1 − cosθ)/2, by midpoint quadrature.
inline double thin_airfoil_cl(const CsRep& cs, std::size_t nodes = 256) {
  double s = 0.0;
  for (std::size_t k = 0; k < nodes; ++k) {
    const double th = kPi * (static_cast<double>(k) + 0.5) / static_cast<double>(nodes);
    const double x = 0.5 * (1.0 - std::cos(th));
    s += detail::spine_slope(cs, x) * (std::cos(th) - 1.0);
  }
  return 2.0 * s * kPi / static_cast<double>(nodes);
}

inline double form_factor_cd(double thickness_ratio, double reynolds) {
  const double cf = 0.074 * std::pow(reynolds, -0.2);
  const double t = thickness_ratio;
  return 2.0 * cf * (1.0 + 2.0 * t + 60.0 * t * t * t * t);
}

inline AeroLabel eval_surrogate(const CsRep& cs, double reynolds = kDefaultReynolds) {
  const std::size_t n = cs.size();
  if (n < kMinSpinePoints || cs.radii.size() != n || !(cs.delta_x > 0.0))
    throw DomainError("eval_surrogate: malformed CsRep");
  if (!(reynolds > 0.0)) throw DomainError("eval_surrogate: Reynolds number must be positive");
  double r_max = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(cs.spine_y[i]) || !std::isfinite(cs.radii[i]))
      throw DomainError("eval_surrogate: non-finite CsRep");
    if (i + 1 < n && !(cs.radii[i] > 0.0)) throw DomainError("eval_surrogate: non-positive radius");
    r_max = std::max(r_max, cs.radii[i]);
  }
  return {thin_airfoil_cl(cs), form_factor_cd(2.0 * r_max, reynolds)};
}

// ---------------------------------------------------------------------------
// Performance classes
// ---------------------------------------------------------------------------

struct ClassGrid {
  std::vector<double> cl_edges;
  std::vector<double> cd_edges;

  std::size_t bins() const { return cl_edges.empty() ? 0 : cl_edges.size() - 1; }
  std::size_t classes() const { return bins() * bins(); }
};

struct PerformanceClass {
  int class_id = -1;
  bool null_flag = false;

  static PerformanceClass null() { return {-1, true}; }
  static PerformanceClass of(int id) { return {id, false}; }
  bool valid() const { return null_flag != (class_id >= 0); }
  friend bool operator==(const PerformanceClass&, const PerformanceClass&) = default;
};

namespace detail {

// Linear-interpolated percentile of sorted data, q in [0, 1].
inline double percentile(const std::vector<double>& sorted, double q) {
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto i = static_cast<std::size_t>(pos);
  if (i + 1 >= sorted.size()) return sorted.back();
  const double f = pos - static_cast<double>(i);
  return sorted[i] + f * (sorted[i + 1] - sorted[i]);
}

inline std::vector<double> equal_edges(std::vector<double> v, std::size_t bins, const char* what) {
  std::sort(v.begin(), v.end());
  const double lo = percentile(v, 0.01), hi = percentile(v, 0.99);
  if (!(hi > lo)) throw DomainError(std::string("build_grid: degenerate ") + what + " range");
  std::vector<double> e(bins + 1);
  for (std::size_t k = 0; k <= bins; ++k)
    e[k] = k == bins ? hi : lo + (hi - lo) * static_cast<double>(k) / static_cast<double>(bins);
  return e;
}

inline std::size_t bin_of(double v, const std::vector<double>& e) {
  const std::size_t bins = e.size() - 1;
  const auto it = std::upper_bound(e.begin(), e.end(), v);
  if (it == e.begin()) return 0;
  return std::min(bins - 1, static_cast<std::size_t>(it - e.begin()) - 1);
}

}  // namespace detail

/// Equal-width bins between the 1st and 99th percentiles of each coefficient.
inline ClassGrid build_grid(const std::vector<AeroLabel>& labels, std::size_t bins = 5) {
  if (bins < 1) throw DomainError("build_grid: need at least one bin");
  if (labels.size() < bins * bins) throw DomainError("build_grid: fewer labels than classes");
  std::vector<double> cl, cd;
  for (const AeroLabel& l : labels) {
    cl.push_back(l.cl);
    cd.push_back(l.cd);
  }
  return {detail::equal_edges(std::move(cl), bins, "cl"), detail::equal_edges(std::move(cd), bins, "cd")};
}

/// Half-open bins [e_k, e_{k+1}), last bin closed, out-of-range values clamp
/// to the edge bins; id = bins·cl_bin + cd_bin.
inline PerformanceClass classify(const AeroLabel& label, const ClassGrid& grid) {
  const std::size_t b = grid.bins();
  if (b == 0 || grid.cd_edges.size() != b + 1) throw DomainError("classify: malformed grid");
  return PerformanceClass::of(
      static_cast<int>(b * detail::bin_of(label.cl, grid.cl_edges) + detail::bin_of(label.cd, grid.cd_edges)));
}

/// Fraction of labels falling into the target class.
inline double conditional_accuracy(const std::vector<AeroLabel>& labels, const PerformanceClass& target,
                                   const ClassGrid& grid) {
  if (labels.empty()) throw DomainError("conditional_accuracy: no labels");
  std::size_t hits = 0;
  for (const AeroLabel& l : labels) hits += classify(l, grid) == target;
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

}  // namespace airfoilgen
