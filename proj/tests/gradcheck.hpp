#pragma once

// Central finite-difference oracle for parameter and input gradients.

#include <algorithm>
#include <cmath>
#include <functional>

#include "airfoilgen/nn.hpp"

namespace oracle {

using airfoilgen::Matrix;

inline Matrix numeric_grad(Matrix& x, const std::function<double()>& loss, double h = 1e-6) {
  Matrix numeric(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double keep = x.data()[i];
    x.data()[i] = keep + h;
    const double lp = loss();
    x.data()[i] = keep - h;
    const double lm = loss();
    x.data()[i] = keep;
    numeric.data()[i] = (lp - lm) / (2.0 * h);
  }
  return numeric;
}

/// ‖analytic − numeric‖ / max(‖analytic‖, ‖numeric‖, floor) for one tensor,
/// the numeric gradient from central differences of `loss`.
inline double grad_rel_error(Matrix& x, const Matrix& analytic, const std::function<double()>& loss,
                             double h = 1e-6, double floor = 1e-10) {
  const Matrix numeric = numeric_grad(x, loss, h);
  const double denom = std::max({analytic.norm(), numeric.norm(), floor});
  return (analytic - numeric).norm() / denom;
}

}  // namespace oracle
