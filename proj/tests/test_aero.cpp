#include <gtest/gtest.h>

#include <cmath>

#include "airfoilgen/aero.hpp"
#include "airfoilgen/csrep.hpp"

using namespace airfoilgen;

namespace {

CsRep camber_csrep(double m, double p, double dx, double r) {
  CsRep cs;
  cs.x0 = 0.0;
  cs.delta_x = dx;
  const auto n = static_cast<std::size_t>(std::lround(1.0 / dx)) + 1;
  for (std::size_t i = 0; i < n; ++i) {
    cs.spine_y.push_back(naca4_camber(cs.x(i), m, p).y);
    cs.radii.push_back(i + 1 == n ? 1e-4 : r);
  }
  return cs;
}

}  // namespace

TEST(Surrogate, SymmetricSpineHasNoLift) {
  const CsRep cs = camber_csrep(0.0, 0.4, 0.01, 0.05);
  EXPECT_EQ(eval_surrogate(cs).cl, 0.0);
}

// Oracle: 10,000-node trapezoid rule on the analytic camber slope.
TEST(Surrogate, Naca2412LiftMatchesTrapezoidIntegral) {
  const double m = 0.02, p = 0.4;
  const int N = 10000;
  double s = 0.0;
  for (int k = 0; k <= N; ++k) {
    const double th = kPi * k / N;
    const double w = (k == 0 || k == N) ? 0.5 : 1.0;
    s += w * naca4_camber(0.5 * (1 - std::cos(th)), m, p).slope * (std::cos(th) - 1);
  }
  const double cl_ref = 2.0 * s * kPi / N;
  const CsRep cs = camber_csrep(m, p, 1e-3, 0.05);
  EXPECT_NEAR(eval_surrogate(cs).cl, cl_ref, 1e-4);
  EXPECT_NEAR(cl_ref, 0.2297, 2e-3);
}

TEST(Surrogate, DragFormula) {
  const CsRep cs = camber_csrep(0.0, 0.4, 0.01, 0.06);
  const double expected = 2 * 0.074 * std::pow(2e6, -0.2) * (1 + 0.24 + 60 * std::pow(0.12, 4));
  EXPECT_NEAR(eval_surrogate(cs, 2e6).cd, expected, 1e-15);
}

TEST(Surrogate, LiftInvariances) {
  Rng rng(1);
  const double dx = kDefaultDeltaX;
  const auto th = SmoothnessThresholds::for_spacing(dx);
  for (int t = 0; t < 50; ++t) {
    const MetaParams meta = sample_valid_meta(rng, dx, th);
    CsRep cs = decode_coeffs(meta, sample_valid_coeffs(rng, meta, dx, th), dx, th);
    const double cl = eval_surrogate(cs).cl;
    CsRep shifted = cs;
    for (auto& y : shifted.spine_y) y += 0.25;
    EXPECT_NEAR(eval_surrogate(shifted).cl, cl, 1e-12);
    CsRep mirrored = cs;
    for (auto& y : mirrored.spine_y) y = -y;
    EXPECT_EQ(eval_surrogate(mirrored).cl, -cl);
  }
}

TEST(Surrogate, DragIncreasesWithThickness) {
  double prev = 0.0;
  for (double r = 0.01; r < 0.2; r += 0.005) {
    const double cd = eval_surrogate(camber_csrep(0.0, 0.4, 0.01, r)).cd;
    EXPECT_GT(cd, prev);
    prev = cd;
  }
}

TEST(Surrogate, RejectsMalformed) {
  CsRep cs = camber_csrep(0.0, 0.4, 0.01, 0.05);
  cs.radii[3] = 0.0;
  EXPECT_THROW(eval_surrogate(cs), DomainError);
  cs.radii.resize(5);
  EXPECT_THROW(eval_surrogate(cs), DomainError);
}

TEST(Grid, UniformSplitOfClampedRange) {
  std::vector<AeroLabel> labels;
  for (int i = 0; i < 10; ++i) labels.push_back({0.0, 0.01});
  for (int i = 0; i <= 80; ++i) labels.push_back({i / 80.0, 0.01 + 0.01 * i / 80.0});
  for (int i = 0; i < 10; ++i) labels.push_back({1.0, 0.02});
  const ClassGrid g = build_grid(labels);
  const std::vector<double> want{0.0, 0.2, 0.4, 0.6, 0.8, 1.0};
  ASSERT_EQ(g.cl_edges.size(), 6u);
  for (int k = 0; k < 6; ++k) EXPECT_NEAR(g.cl_edges[k], want[k], 1e-15);
}

TEST(Grid, OutlierDoesNotMoveEdges) {
  std::vector<AeroLabel> labels;
  for (int i = 0; i < 200; ++i) labels.push_back({i / 199.0, 0.01 + i * 1e-5});
  const ClassGrid a = build_grid(labels);
  labels.push_back({100.0, 1.0});
  const ClassGrid b = build_grid(labels);
  for (int k = 0; k < 6; ++k) {
    EXPECT_NEAR(a.cl_edges[k], b.cl_edges[k], 0.01);
    EXPECT_NEAR(a.cd_edges[k], b.cd_edges[k], 1e-4);
  }
  for (const AeroLabel& l : labels) {
    const PerformanceClass c = classify(l, b);
    EXPECT_TRUE(c.valid());
    EXPECT_LT(c.class_id, 25);
  }
}

TEST(Grid, Errors) {
  std::vector<AeroLabel> few(10, {0.1, 0.01});
  EXPECT_THROW(build_grid(few), DomainError);
  std::vector<AeroLabel> flat(40, {0.1, 0.01});
  EXPECT_THROW(build_grid(flat), DomainError);
}

TEST(Classify, EdgesAndClamping) {
  ClassGrid g{{0, 1, 2, 3, 4, 5}, {0, 10, 20, 30, 40, 50}};
  EXPECT_EQ(classify({0, 0}, g).class_id, 0);
  EXPECT_EQ(classify({1, 0}, g).class_id, 5);
  EXPECT_EQ(classify({0, 10}, g).class_id, 1);
  EXPECT_EQ(classify({5, 50}, g).class_id, 24);
  EXPECT_EQ(classify({99, 99}, g).class_id, 24);
  EXPECT_EQ(classify({-9, -9}, g).class_id, 0);
  EXPECT_FALSE(classify({2.5, 25}, g).null_flag);
}

TEST(Accuracy, FractionInTarget) {
  ClassGrid g{{0, 1, 2, 3}, {0, 1, 2, 3}};
  std::vector<AeroLabel> in(4, {0.5, 0.5});
  EXPECT_EQ(conditional_accuracy(in, PerformanceClass::of(0), g), 1.0);
  EXPECT_EQ(conditional_accuracy(in, PerformanceClass::of(4), g), 0.0);
  in.push_back({1.5, 1.5});
  EXPECT_DOUBLE_EQ(conditional_accuracy(in, PerformanceClass::of(0), g), 0.8);
  EXPECT_THROW(conditional_accuracy({}, PerformanceClass::of(0), g), DomainError);
}
