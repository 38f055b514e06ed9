#include <gtest/gtest.h>

#include <cmath>

#include "airfoilgen/csrep.hpp"
#include "airfoilgen/metrics.hpp"

using namespace airfoilgen;
using M = MetaParams;

namespace {

MetaParams simple_meta(double dx, std::size_t n, std::size_t pos_p, std::size_t pos_r) {
  MetaParams m;
  m(M::kStart, M::kX) = 0.0;
  m(M::kSpineExt, M::kX) = static_cast<double>(pos_p - 1) * dx;
  m(M::kRadiusExt, M::kX) = static_cast<double>(pos_r - 1) * dx;
  m(M::kEnd, M::kX) = static_cast<double>(n - 1) * dx;
  m(M::kStart, M::kY) = 0.0;
  m(M::kStart, M::kDy) = 0.1 * dx;
  m(M::kSpineExt, M::kDy) = 0.05 * dx;
  m(M::kEnd, M::kDy) = -0.2 * dx;
  m(M::kStart, M::kR) = 0.01;
  m(M::kRadiusExt, M::kR) = 0.06;
  m(M::kEnd, M::kR) = 1e-4;
  return m;
}

bool fully_valid(const CsRep& cs, const SmoothnessThresholds& th) {
  return validate(sweep_envelope(cs), cs, th).all();
}

}  // namespace

TEST(Counts, DerivedFromGrid) {
  MetaParams m;
  m(M::kStart, M::kX) = 0.0;
  m(M::kEnd, M::kX) = 1.0;
  m(M::kSpineExt, M::kX) = 0.3;
  m(M::kRadiusExt, M::kX) = 0.2;
  const Counts c = derive_counts(m, 0.01);
  EXPECT_EQ(c.n, 101u);
  EXPECT_EQ(c.pos_p, 31u);
  EXPECT_EQ(c.pos_r, 21u);
  m(M::kEnd, M::kX) = 0.0;
  EXPECT_THROW(derive_counts(m, 0.01), DomainError);
  m(M::kEnd, M::kX) = 0.995;
  EXPECT_THROW(derive_counts(m, 0.01), DomainError);
}

TEST(Cumprod, Examples) {
  EXPECT_EQ(cumprod_monotone({1, 1, 1}), (std::vector<double>{0, 0, 0}));
  EXPECT_EQ(cumprod_monotone({0, 0.3, 0.9}), (std::vector<double>{1, 1, 1}));
  EXPECT_EQ(cumprod_monotone({0.5, 0.5}), (std::vector<double>{0.5, 0.75}));
  EXPECT_THROW(cumprod_monotone({0.5, 1.5}), DomainError);
}

TEST(Cumprod, MonotoneOnRandomInput) {
  Rng rng(5);
  for (int t = 0; t < 1000; ++t) {
    std::vector<double> a(1 + rng.below(60));
    for (auto& v : a) v = rng.uniform();
    const auto out = cumprod_monotone(a);
    for (std::size_t i = 0; i < out.size(); ++i) {
      EXPECT_GE(out[i], 0.0);
      EXPECT_LE(out[i], 1.0);
      if (i) {
        EXPECT_GE(out[i], out[i - 1]);
      }
    }
  }
}

TEST(Decode, AnchorsAreExact) {
  const double dx = kDefaultDeltaX;
  const auto th = SmoothnessThresholds::for_spacing(dx);
  Rng rng(9);
  for (int t = 0; t < 200; ++t) {
    const MetaParams m = sample_valid_meta(rng, dx, th);
    const CoeffSeq c = sample_valid_coeffs(rng, m, dx, th);
    const CsRep cs = decode_coeffs(m, c, dx, th);
    const Counts k = derive_counts(m, dx);
    const std::size_t n = k.n, pp = k.pos_p - 1, pr = k.pos_r - 1;
    auto dy = [&](std::size_t j) { return cs.spine_y[j + 1] - cs.spine_y[j]; };
    EXPECT_NEAR(dy(0), m(M::kStart, M::kDy), 1e-12);
    EXPECT_NEAR(dy(pp), m(M::kSpineExt, M::kDy), 1e-12);
    EXPECT_NEAR(dy(n - 2), m(M::kEnd, M::kDy), 1e-12);
    EXPECT_EQ(cs.radii[0], m(M::kStart, M::kR));
    EXPECT_EQ(cs.radii[pr], m(M::kRadiusExt, M::kR));
    EXPECT_EQ(cs.radii[n - 1], m(M::kEnd, M::kR));
    EXPECT_EQ(cs.x0, m(M::kStart, M::kX));
  }
}

TEST(Decode, FlatInteriorHoldsStartAnchor) {
  const double dx = 0.01;
  const MetaParams m = simple_meta(dx, 60, 20, 15);
  CoeffSeq c{std::vector<double>(60, 1.0), std::vector<double>(60, 1.0)};
  const SmoothnessThresholds th{1.0, 1.0, 0.0};
  const CsRep cs = decode_coeffs(m, c, dx, th);
  for (std::size_t j = 0; j + 1 < 19; ++j) EXPECT_NEAR(cs.spine_y[j + 1] - cs.spine_y[j], m(M::kStart, M::kDy), 1e-15);
  EXPECT_NEAR(cs.spine_y[20] - cs.spine_y[19], m(M::kSpineExt, M::kDy), 1e-15);
}

TEST(Decode, RejectsBadLengthAndRange) {
  const double dx = 0.01;
  const MetaParams m = simple_meta(dx, 60, 20, 15);
  EXPECT_THROW(decode_coeffs(m, CoeffSeq{std::vector<double>(59, 1.0), std::vector<double>(60, 1.0)}, dx),
               DomainError);
  CoeffSeq bad{std::vector<double>(60, 1.0), std::vector<double>(60, 1.0)};
  bad.u_tilde[3] = -0.1;
  EXPECT_THROW(decode_coeffs(m, bad, dx), DomainError);
}

TEST(Decode, FuzzEveryDrawIsValid) {
  const double dx = kDefaultDeltaX;
  const auto th = SmoothnessThresholds::for_spacing(dx);
  Rng rng(2024);
  int failures = 0;
  for (int t = 0; t < 1000; ++t) {
    const MetaParams m = sample_valid_meta(rng, dx, th);
    ASSERT_FALSE(meta_infeasibility(m, dx, th).has_value());
    const CsRep cs = decode_coeffs(m, sample_valid_coeffs(rng, m, dx, th), dx, th);
    failures += !fully_valid(cs, th);
  }
  EXPECT_EQ(failures, 0);
}

TEST(Decode, ExtremeUnitValuesStayValid) {
  const double dx = kDefaultDeltaX;
  const auto th = SmoothnessThresholds::for_spacing(dx);
  Rng rng(77);
  for (int t = 0; t < 200; ++t) {
    const MetaParams m = sample_valid_meta(rng, dx, th);
    const Layout l = make_layout(m, dx, th);
    std::vector<double> su(l.counts.n), sv(l.counts.n);
    for (auto& s : su) s = rng.below(2) ? 1.0 : 0.0;
    for (auto& s : sv) s = rng.below(2) ? 1.0 : 0.0;
    EXPECT_TRUE(fully_valid(decode_coeffs(m, unit_to_coeffs(l, su, sv), dx, th), th));
  }
}

TEST(Encode, RoundTripIsExact) {
  const double dx = kDefaultDeltaX;
  const auto th = SmoothnessThresholds::for_spacing(dx);
  Rng rng(31);
  for (int t = 0; t < 300; ++t) {
    const MetaParams m = sample_valid_meta(rng, dx, th);
    const CsRep cs = decode_coeffs(m, sample_valid_coeffs(rng, m, dx, th), dx, th);
    const Encoded e = encode_coeffs(cs);
    const CsRep back = decode_coeffs(e.meta, e.coeffs, dx, th);
    ASSERT_EQ(back.size(), cs.size());
    for (std::size_t i = 0; i < cs.size(); ++i) {
      EXPECT_NEAR(back.spine_y[i], cs.spine_y[i], 1e-9);
      EXPECT_NEAR(back.radii[i], cs.radii[i], 1e-9);
    }
  }
}

TEST(Encode, ConstantRadiusGivesUnitInterior) {
  CsRep cs;
  cs.x0 = 0.0;
  cs.delta_x = 0.01;
  for (int i = 0; i < 40; ++i) {
    cs.spine_y.push_back(0.001 * i);
    cs.radii.push_back(0.05);
  }
  const Encoded e = encode_coeffs(cs);
  const Counts k = derive_counts(e.meta, cs.delta_x);
  for (std::size_t j = 1; j + 1 < k.pos_r; ++j) EXPECT_EQ(e.coeffs.v_tilde[j], 1.0);
}

TEST(Encode, RejectsNonUnimodal) {
  CsRep cs;
  cs.x0 = 0.0;
  cs.delta_x = 0.1;
  cs.spine_y.assign(9, 0.0);
  cs.radii = {0.02, 0.08, 0.03, 0.06, 0.05, 0.04, 0.03, 0.02, 1e-4};
  EXPECT_THROW(encode_coeffs(cs), DomainError);
}

TEST(Encode, ExtractedSectionRoundTrips) {
  const double dx = kDefaultDeltaX;
  const auto th = SmoothnessThresholds::for_spacing(dx);
  const Profile p = naca4_profile(0.02, 0.4, 0.12, 200);
  const auto fitted = fit_valid(extract_csrep(naca4_profile(0.02, 0.4, 0.12, 1000), dx), th);
  ASSERT_TRUE(fitted.has_value());
  const CsRep cs = decode_coeffs(fitted->meta, fitted->coeffs, dx, th);
  const Encoded e = encode_coeffs(cs);
  const CsRep back = decode_coeffs(e.meta, e.coeffs, dx, th);
  const Profile swept = resample_arclength(sweep_envelope(back), 200);
  EXPECT_LE(chamfer(resample_arclength(p, 200).points, swept.points), 5e-3);
  EXPECT_TRUE(fully_valid(back, th));
}

TEST(Clamp, IdempotentAndFloored) {
  const double dx = kDefaultDeltaX;
  auto th = SmoothnessThresholds::for_spacing(dx);
  Rng rng(4);
  const MetaParams m = sample_valid_meta(rng, dx, th);
  const std::size_t n = derive_counts(m, dx).n;
  CoeffSeq raw{std::vector<double>(n), std::vector<double>(n)};
  for (auto& v : raw.u_tilde) v = rng.uniform();
  for (auto& v : raw.v_tilde) v = rng.uniform();
  const CoeffSeq once = clamp_feasible(m, raw, dx, th);
  const CoeffSeq twice = clamp_feasible(m, once, dx, th);
  EXPECT_EQ(once.u_tilde, twice.u_tilde);
  EXPECT_EQ(once.v_tilde, twice.v_tilde);

  th.a_tilde_min = 0.3;
  CoeffSeq zero = raw;
  zero.u_tilde[2] = 0.0;
  const CoeffSeq lifted = clamp_feasible(m, zero, dx, th);
  EXPECT_GE(lifted.u_tilde[2], 0.3);
}

TEST(Clamp, RandomCoefficientsDecodeSmooth) {
  const double dx = kDefaultDeltaX;
  const auto th = SmoothnessThresholds::for_spacing(dx);
  Rng rng(8);
  for (int t = 0; t < 500; ++t) {
    const MetaParams m = sample_valid_meta(rng, dx, th);
    const std::size_t n = derive_counts(m, dx).n;
    CoeffSeq raw{std::vector<double>(n), std::vector<double>(n)};
    for (auto& v : raw.u_tilde) v = rng.uniform();
    for (auto& v : raw.v_tilde) v = rng.uniform();
    const CsRep cs = decode_coeffs(m, clamp_feasible(m, raw, dx, th), dx, th);
    const auto d2y = forward_differences(forward_differences(cs.spine_y));
    for (double v : d2y) ASSERT_LT(std::abs(v), th.thres_y);
    for (double v : forward_differences(cs.radii)) ASSERT_LT(std::abs(v), th.thres_r);
  }
}

TEST(Unit, RoundTripThroughBox) {
  const double dx = kDefaultDeltaX;
  const auto th = SmoothnessThresholds::for_spacing(dx);
  Rng rng(12);
  const MetaParams m = sample_valid_meta(rng, dx, th);
  const Layout l = make_layout(m, dx, th);
  std::vector<double> su(l.counts.n), sv(l.counts.n);
  for (auto& s : su) s = rng.uniform();
  for (auto& s : sv) s = rng.uniform();
  const CoeffSeq c = unit_to_coeffs(l, su, sv);
  const auto [bu, bv] = coeffs_to_unit(l, c);
  const CoeffSeq again = unit_to_coeffs(l, bu, bv);
  for (std::size_t i = 0; i < l.counts.n; ++i) {
    EXPECT_NEAR(again.u_tilde[i], c.u_tilde[i], 1e-12);
    EXPECT_NEAR(again.v_tilde[i], c.v_tilde[i], 1e-12);
  }
}

TEST(Fit, NacaSweepIsMostlyRepresentable) {
  const double dx = kDefaultDeltaX;
  const auto th = SmoothnessThresholds::for_spacing(dx);
  int ok = 0, total = 0;
  double worst = 0.0;
  for (double m : {0.0, 0.02, 0.04, 0.06})
    for (double p : {0.2, 0.4, 0.6})
      for (double t : {0.08, 0.12, 0.16, 0.2}) {
        ++total;
        const Profile src = naca4_profile(m, p, t, 1000);
        const auto f = fit_valid(extract_csrep(src, dx), th);
        if (!f) continue;
        const CsRep cs = decode_coeffs(f->meta, f->coeffs, dx, th);
        if (!fully_valid(cs, th)) continue;
        ++ok;
        worst = std::max(worst, chamfer(resample_arclength(src, 200).points,
                                        resample_arclength(sweep_envelope(cs), 200).points));
      }
  EXPECT_EQ(ok, total);
  EXPECT_LE(worst, 5e-3);
}

TEST(RepairMeta, ArbitraryAnchorsBecomeFeasible) {
  Rng rng(301);
  const double dx = kDefaultDeltaX;
  const auto th = SmoothnessThresholds::for_spacing(dx);
  for (int t = 0; t < 2000; ++t) {
    std::array<double, 16> f{};
    for (auto& v : f) v = rng.uniform(-0.2, 1.2);
    f[0] = rng.uniform(-0.5, 0.5);
    f[15] = rng.uniform(-0.1, 0.2);
    const MetaParams m = repair_meta(MetaParams::from_flat(f), dx, th);
    EXPECT_FALSE(meta_infeasibility(m, dx, th).has_value()) << *meta_infeasibility(m, dx, th);
    const MetaParams again = repair_meta(m, dx, th);
    for (int r = 0; r < 4; ++r)
      for (int c = 0; c < 4; ++c) EXPECT_NEAR(again(r, c), m(r, c), 1e-15);
    const CsRep cs = decode_coeffs(m, sample_valid_coeffs(rng, m, dx, th), dx, th);
    const Profile p = sweep_envelope(cs);
    EXPECT_TRUE(validate(p, cs, th).all());
  }
}

TEST(RepairMeta, FeasibleAnchorsKeepTheirDecodeEntries) {
  Rng rng(302);
  const double dx = kDefaultDeltaX;
  const auto th = SmoothnessThresholds::for_spacing(dx);
  for (int t = 0; t < 500; ++t) {
    const MetaParams m = sample_valid_meta(rng, dx, th);
    const MetaParams r = repair_meta(m, dx, th);
    for (int row = 0; row < 4; ++row)
      for (int c = 0; c < 4; ++c) EXPECT_NEAR(r(row, c), m(row, c), 1e-12);
  }
}
