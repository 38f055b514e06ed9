#include <gtest/gtest.h>

#include "airfoilgen/geometry.hpp"
#include "airfoilgen/metrics.hpp"
#include "oracles.hpp"

using namespace airfoilgen;

namespace {

PointSet random_set(Rng& rng, std::size_t n, double spread = 1.0) {
  PointSet s(n);
  for (auto& p : s) p = {rng.uniform(-spread, spread), rng.uniform(-spread, spread)};
  return s;
}

}  // namespace

TEST(Chamfer, Examples) {
  const PointSet a{{0, 0}, {2, 0}}, b{{1, 0}};
  EXPECT_EQ(chamfer(a, a), 0.0);
  EXPECT_EQ(chamfer(PointSet{{0, 0}}, PointSet{{1, 0}}), 1.0);
  EXPECT_EQ(chamfer(a, b), 1.0);
  EXPECT_THROW(chamfer({}, b), DomainError);
}

TEST(Hausdorff, Examples) {
  const PointSet a{{0, 0}, {2, 0}}, b{{0, 0}};
  EXPECT_EQ(hausdorff(a, a), 0.0);
  EXPECT_EQ(hausdorff(a, b), 2.0);
  EXPECT_THROW(hausdorff(a, {}), DomainError);
}

TEST(Metrics, MatchBruteForceExactly) {
  Rng rng(17);
  for (int t = 0; t < 200; ++t) {
    const PointSet p = random_set(rng, 1 + rng.below(50)), q = random_set(rng, 1 + rng.below(50));
    EXPECT_EQ(chamfer(p, q), oracle::chamfer(p, q));
    EXPECT_EQ(hausdorff(p, q), oracle::hausdorff(p, q));
  }
}

TEST(Metrics, GridPathMatchesBruteForceOnLargeSets) {
  Rng rng(18);
  for (int t = 0; t < 20; ++t) {
    PointSet p = random_set(rng, 300), q = random_set(rng, 250, 0.3);
    q.push_back({5.0, -4.0});
    EXPECT_EQ(chamfer(p, q), oracle::chamfer(p, q));
    EXPECT_EQ(hausdorff(p, q), oracle::hausdorff(p, q));
  }
  const Profile a = naca4_profile(0.02, 0.4, 0.12, 200), b = naca4_profile(0.04, 0.3, 0.1, 200);
  EXPECT_EQ(chamfer(a.points, b.points), oracle::chamfer(a.points, b.points));
}

TEST(Metrics, SymmetryAndScale) {
  Rng rng(19);
  for (int t = 0; t < 50; ++t) {
    const PointSet p = random_set(rng, 40), q = random_set(rng, 30);
    EXPECT_EQ(chamfer(p, q), chamfer(q, p));
    EXPECT_EQ(hausdorff(p, q), hausdorff(q, p));
    PointSet sp = p, sq = q;
    for (auto& v : sp) v = 4.0 * v;
    for (auto& v : sq) v = 4.0 * v;
    EXPECT_NEAR(chamfer(sp, sq), 4.0 * chamfer(p, q), 1e-12);
    EXPECT_NEAR(hausdorff(sp, sq), 4.0 * hausdorff(p, q), 1e-12);
    EXPECT_GE(hausdorff(p, q), chamfer(p, q));
  }
}

TEST(Fidelity, Examples) {
  Rng rng(20);
  std::vector<PointSet> data;
  for (int i = 0; i < 100; ++i) data.push_back(random_set(rng, 10 + rng.below(30)));
  std::vector<PointSet> gen(data.begin(), data.begin() + 5);
  EXPECT_EQ(fidelity(gen, data), 0.0);
  EXPECT_EQ(fidelity({data[0]}, {data[1]}), hausdorff(data[0], data[1]));

  std::vector<PointSet> g10;
  for (int i = 0; i < 10; ++i) g10.push_back(random_set(rng, 20));
  double brute = 0.0;
  for (const auto& g : g10) {
    double best = 1e300;
    for (const auto& d : data) best = std::min(best, oracle::hausdorff(g, d));
    brute += best;
  }
  EXPECT_EQ(fidelity(g10, data), brute / 10.0);
  EXPECT_THROW(fidelity({}, data), DomainError);
}

TEST(Diversity, Examples) {
  Rng rng(21);
  const PointSet a = random_set(rng, 12);
  EXPECT_EQ(diversity({a, a, a}), 0.0);
  const PointSet b = random_set(rng, 12);
  EXPECT_EQ(diversity({a, b}), hausdorff(a, b));
  std::vector<PointSet> five;
  for (int i = 0; i < 5; ++i) five.push_back(random_set(rng, 1 + rng.below(50)));
  double s = 0.0;
  for (int i = 0; i < 5; ++i)
    for (int j = i + 1; j < 5; ++j) s += oracle::hausdorff(five[i], five[j]);
  EXPECT_EQ(diversity(five), s / 10.0);
  EXPECT_THROW(diversity({a}), DomainError);
}
