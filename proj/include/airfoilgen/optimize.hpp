#pragma once

// Nelder–Mead search toward a (cl, cd) target. Iterates are built from the
// continuous anchors plus a low-order cosine basis added to the unit
// coefficients, then decoded, so every evaluated shape is valid.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include "aero.hpp"
#include "csrep.hpp"

namespace airfoilgen {

struct OptimizerOptions {
  std::size_t budget = 200;  // objective evaluations
  double tol = 2e-3;
  std::size_t basis = 3;     // cosine modes per coefficient sequence
  double delta_x = kDefaultDeltaX;
  double reynolds = kDefaultReynolds;
};

struct OptimizationResult {
  AeroLabel target;
  std::string init_source;
  bool success = false;
  std::size_t iterations = 0;
  std::size_t evaluations = 0;
  double wall_time = 0.0;
  double err_cl = 0.0;
  double err_cd = 0.0;
  MetaParams meta;
  CoeffSeq coeffs;
  CsRep cs;
};

/// Maps a search vector onto a decodable shape around an initial point.
class ShapeParameterization {
 public:
  ShapeParameterization(const MetaParams& meta, const CoeffSeq& coeffs, const OptimizerOptions& opt)
      : meta0_(meta), opt_(opt), th_(SmoothnessThresholds::for_spacing(opt.delta_x)) {
    if (auto why = meta_infeasibility(meta, opt.delta_x, th_)) throw DomainError("optimize: infeasible init: " + *why);
    const Layout l = make_layout(meta, opt.delta_x, th_);
    std::tie(su0_, sv0_) = coeffs_to_unit(l, coeffs);
  }

  std::size_t dims() const { return kMetaVars.size() + 2 * opt_.basis; }

  struct Shape {
    MetaParams meta;
    CoeffSeq coeffs;
    CsRep cs;
  };

  Shape shape(const std::vector<double>& x) const {
    MetaParams m = meta0_;
    for (std::size_t i = 0; i < kMetaVars.size(); ++i) {
      const auto [row, col] = kMetaVars[i];
      m(row, col) += scale(i) * x[i];
    }
    m = repair_meta(m, opt_.delta_x, th_);
    const Layout l = make_layout(m, opt_.delta_x, th_);
    const std::size_t n = l.counts.n;
    std::vector<double> su = su0_, sv = sv0_;
    for (std::size_t j = 0; j < n; ++j) {
      const double t = n > 1 ? static_cast<double>(j) / static_cast<double>(n - 1) : 0.0;
      for (std::size_t k = 0; k < opt_.basis; ++k) {
        const double phi = std::cos(kPi * static_cast<double>(k) * t);
        su[j] += kBasisScale * x[kMetaVars.size() + k] * phi;
        sv[j] += kBasisScale * x[kMetaVars.size() + opt_.basis + k] * phi;
      }
      su[j] = std::clamp(su[j], 0.0, 1.0);
      sv[j] = std::clamp(sv[j], 0.0, 1.0);
    }
    Shape s;
    s.coeffs = unit_to_coeffs(l, su, sv);
    s.cs = decode_coeffs(m, s.coeffs, opt_.delta_x, th_);
    complete_meta(m, s.cs, l.counts);
    s.meta = m;
    return s;
  }

 private:
  static constexpr std::array<std::pair<int, int>, 6> kMetaVars = {
      {{MetaParams::kStart, MetaParams::kY},
       {MetaParams::kStart, MetaParams::kDy},
       {MetaParams::kSpineExt, MetaParams::kDy},
       {MetaParams::kEnd, MetaParams::kDy},
       {MetaParams::kStart, MetaParams::kR},
       {MetaParams::kRadiusExt, MetaParams::kR}}};
  static constexpr double kBasisScale = 0.1;

  double scale(std::size_t i) const {
    switch (i) {
      case 0: return 0.01;
      case 1:
      case 2:
      case 3: return 5.0 * th_.thres_y;
      case 4: return 2e-3;
      default: return 5e-3;
    }
  }

  MetaParams meta0_;
  OptimizerOptions opt_;
  SmoothnessThresholds th_;
  std::vector<double> su0_, sv0_;
};

/// Nelder–Mead on |cl − cl*| + |cd − cd*|. Success when both errors are
/// within tolerance; an init already inside succeeds at iteration 0.
inline OptimizationResult optimize_to_target(const AeroLabel& target, const MetaParams& meta, const CoeffSeq& coeffs,
                                             const OptimizerOptions& opt, const std::string& init_source = "given",
                                             const std::function<void(const CsRep&)>& on_eval = {}) {
  const auto start = std::chrono::steady_clock::now();
  const ShapeParameterization param(meta, coeffs, opt);
  const std::size_t d = param.dims();

  OptimizationResult res;
  res.target = target;
  res.init_source = init_source;
  struct Vertex {
    std::vector<double> x;
    double f = 0.0, ecl = 0.0, ecd = 0.0;
  };
  auto eval = [&](std::vector<double> x) {
    const auto s = param.shape(x);
    if (on_eval) on_eval(s.cs);
    const AeroLabel l = eval_surrogate(s.cs, opt.reynolds);
    ++res.evaluations;
    Vertex v{std::move(x), 0.0, std::abs(l.cl - target.cl), std::abs(l.cd - target.cd)};
    v.f = v.ecl + v.ecd;
    return v;
  };
  auto inside = [&](const Vertex& v) { return v.ecl <= opt.tol && v.ecd <= opt.tol; };
  auto finish = [&](const Vertex& best, bool ok) {
    const auto s = param.shape(best.x);
    res.success = ok;
    res.err_cl = best.ecl;
    res.err_cd = best.ecd;
    res.meta = s.meta;
    res.coeffs = s.coeffs;
    res.cs = s.cs;
    res.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return res;
  };

  std::vector<Vertex> simplex;
  simplex.push_back(eval(std::vector<double>(d, 0.0)));
  if (inside(simplex[0])) return finish(simplex[0], true);
  for (std::size_t i = 0; i < d && res.evaluations < opt.budget; ++i) {
    std::vector<double> x(d, 0.0);
    x[i] = 1.0;
    simplex.push_back(eval(std::move(x)));
  }
  auto by_f = [](const Vertex& a, const Vertex& b) { return a.f < b.f; };
  auto combine = [&](const std::vector<double>& c, const std::vector<double>& w, double t) {
    std::vector<double> x(d);
    for (std::size_t i = 0; i < d; ++i) x[i] = c[i] + t * (w[i] - c[i]);
    return x;
  };
  while (true) {
    std::stable_sort(simplex.begin(), simplex.end(), by_f);
    if (inside(simplex[0])) return finish(simplex[0], true);
    if (res.evaluations >= opt.budget || simplex.size() < d + 1) return finish(simplex[0], false);
    ++res.iterations;
    std::vector<double> c(d, 0.0);
    for (std::size_t k = 0; k < d; ++k)
      for (std::size_t i = 0; i < d; ++i) c[i] += simplex[k].x[i] / static_cast<double>(d);
    Vertex& worst = simplex[d];
    const Vertex r = eval(combine(c, worst.x, -1.0));
    if (r.f < simplex[0].f) {
      Vertex e = res.evaluations < opt.budget ? eval(combine(c, worst.x, -2.0)) : r;
      worst = e.f < r.f ? std::move(e) : r;
    } else if (r.f < simplex[d - 1].f) {
      worst = r;
    } else {
      const bool outside = r.f < worst.f;
      if (res.evaluations >= opt.budget) {
        if (outside) worst = r;
        continue;
      }
      Vertex k = eval(combine(c, worst.x, outside ? -0.5 : 0.5));
      if (k.f < (outside ? r.f : worst.f)) {
        worst = std::move(k);
      } else {
        for (std::size_t v = 1; v <= d && res.evaluations < opt.budget; ++v)
          simplex[v] = eval(combine(simplex[0].x, simplex[v].x, 0.5));
      }
    }
  }
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw DomainError("median: empty input");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace airfoilgen
