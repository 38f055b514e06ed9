#pragma once

// Point-set distances and distribution metrics over generated shapes.

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "core.hpp"

namespace airfoilgen {

using PointSet = std::vector<Point2>;

/// Uniform bucket grid for exact nearest-neighbour queries.
class NearestGrid {
 public:
  explicit NearestGrid(const PointSet& pts) : pts_(pts) {
    if (pts.empty()) throw DomainError("NearestGrid: empty point set");
    lo_ = hi_ = pts[0];
    for (const Point2& p : pts) {
      lo_.x = std::min(lo_.x, p.x);
      lo_.y = std::min(lo_.y, p.y);
      hi_.x = std::max(hi_.x, p.x);
      hi_.y = std::max(hi_.y, p.y);
    }
    const double w = hi_.x - lo_.x, h = hi_.y - lo_.y;
    const double side = std::max({w, h, 1e-12});
    const double cells = std::max(1.0, std::sqrt(static_cast<double>(pts.size())));
    cell_ = side / cells;
    nx_ = static_cast<long>(w / cell_) + 1;
    ny_ = static_cast<long>(h / cell_) + 1;
    buckets_.assign(static_cast<std::size_t>(nx_ * ny_), {});
    for (std::size_t i = 0; i < pts.size(); ++i) buckets_[bucket(cx(pts[i].x), cy(pts[i].y))].push_back(i);
  }

  /// Exact distance to the nearest stored point.
  double nearest(Point2 q) const {
    const long qx = std::clamp(cx(q.x), 0L, nx_ - 1), qy = std::clamp(cy(q.y), 0L, ny_ - 1);
    // Distance from q to the clamped cell block; rings grow from there.
    double best = std::numeric_limits<double>::infinity();
    const long max_ring = std::max(nx_, ny_);
    for (long ring = 0; ring <= max_ring; ++ring) {
      for (long ix = qx - ring; ix <= qx + ring; ++ix) {
        for (long iy = qy - ring; iy <= qy + ring; ++iy) {
          if (std::max(std::abs(ix - qx), std::abs(iy - qy)) != ring) continue;
          if (ix < 0 || iy < 0 || ix >= nx_ || iy >= ny_) continue;
          for (std::size_t i : buckets_[bucket(ix, iy)]) best = std::min(best, distance(q, pts_[i]));
        }
      }
      // Everything outside the examined block lies at least this far away.
      const double gap = gap_outside(q, qx, qy, ring);
      if (best <= gap) break;
    }
    return best;
  }

 private:
  long cx(double x) const { return std::min(nx_ - 1, std::max(0L, static_cast<long>((x - lo_.x) / cell_))); }
  long cy(double y) const { return std::min(ny_ - 1, std::max(0L, static_cast<long>((y - lo_.y) / cell_))); }
  std::size_t bucket(long ix, long iy) const { return static_cast<std::size_t>(ix * ny_ + iy); }

  double gap_outside(Point2 q, long qx, long qy, long ring) const {
    const double x0 = lo_.x + static_cast<double>(qx - ring) * cell_;
    const double x1 = lo_.x + static_cast<double>(qx + ring + 1) * cell_;
    const double y0 = lo_.y + static_cast<double>(qy - ring) * cell_;
    const double y1 = lo_.y + static_cast<double>(qy + ring + 1) * cell_;
    double g = std::numeric_limits<double>::infinity();
    if (qx - ring > 0) g = std::min(g, q.x - x0);
    if (qx + ring + 1 < nx_) g = std::min(g, x1 - q.x);
    if (qy - ring > 0) g = std::min(g, q.y - y0);
    if (qy + ring + 1 < ny_) g = std::min(g, y1 - q.y);
    return g;
  }

  const PointSet& pts_;
  Point2 lo_, hi_;
  double cell_ = 1.0;
  long nx_ = 1, ny_ = 1;
  std::vector<std::vector<std::size_t>> buckets_;
};

namespace detail {

inline void require_points(const PointSet& p, const char* what) {
  if (p.empty()) throw DomainError(std::string(what) + ": empty point set");
}

inline std::vector<double> nearest_distances(const PointSet& from, const PointSet& to) {
  std::vector<double> d(from.size());
  if (to.size() <= 32) {
    for (std::size_t i = 0; i < from.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (const Point2& q : to) best = std::min(best, distance(from[i], q));
      d[i] = best;
    }
    return d;
  }
  const NearestGrid grid(to);
  for (std::size_t i = 0; i < from.size(); ++i) d[i] = grid.nearest(from[i]);
  return d;
}

inline double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace detail

/// ½ (mean nearest distance P→Q + mean nearest distance Q→P).
inline double chamfer(const PointSet& p, const PointSet& q) {
  detail::require_points(p, "chamfer");
  detail::require_points(q, "chamfer");
  return 0.5 * (detail::mean(detail::nearest_distances(p, q)) + detail::mean(detail::nearest_distances(q, p)));
}

inline double directed_hausdorff(const PointSet& p, const PointSet& q) {
  detail::require_points(p, "hausdorff");
  detail::require_points(q, "hausdorff");
  const auto d = detail::nearest_distances(p, q);
  return *std::max_element(d.begin(), d.end());
}

inline double hausdorff(const PointSet& p, const PointSet& q) {
  return std::max(directed_hausdorff(p, q), directed_hausdorff(q, p));
}

/// Mean over generated shapes of the Hausdorff distance to the closest
/// dataset shape.
inline double fidelity(const std::vector<PointSet>& generated, const std::vector<PointSet>& dataset) {
  if (generated.empty() || dataset.empty()) throw DomainError("fidelity: empty list");
  double s = 0.0;
  for (const PointSet& g : generated) {
    double best = std::numeric_limits<double>::infinity();
    for (const PointSet& d : dataset) best = std::min(best, hausdorff(g, d));
    s += best;
  }
  return s / static_cast<double>(generated.size());
}

/// Mean pairwise Hausdorff distance among generated shapes.
inline double diversity(const std::vector<PointSet>& generated) {
  if (generated.size() < 2) throw DomainError("diversity: need at least two samples");
  double s = 0.0;
  std::size_t pairs = 0;
  for (std::size_t i = 0; i < generated.size(); ++i)
    for (std::size_t j = i + 1; j < generated.size(); ++j) {
      s += hausdorff(generated[i], generated[j]);
      ++pairs;
    }
  return s / static_cast<double>(pairs);
}

}  // namespace airfoilgen
