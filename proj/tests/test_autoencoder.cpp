#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>

#include "airfoilgen/autoencoder.hpp"
#include "gradcheck.hpp"

using namespace airfoilgen;

namespace {

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double s = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = s * rng.normal();
  return m;
}

AeConfig small_config() {
  AeConfig c;
  c.profile_len = 12;
  c.code_dim = 4;
  c.d_model = 8;
  c.enc_hidden = 8;
  c.d_z = 4;
  c.bins = 6;
  c.meta_hidden = 8;
  c.coeff_hidden = 8;
  c.history = 2;
  return c;
}

MetaQuantizer sampled_quantizer(Rng& rng, std::size_t bins) {
  const auto th = SmoothnessThresholds::for_spacing(kDefaultDeltaX);
  std::vector<MetaParams> metas;
  for (int i = 0; i < 200; ++i) {
    MetaParams m = sample_valid_meta(rng, kDefaultDeltaX, th);
    const CsRep cs = decode_coeffs(m, sample_valid_coeffs(rng, m, kDefaultDeltaX, th), kDefaultDeltaX, th);
    complete_meta(m, cs, derive_counts(m, kDefaultDeltaX));
    metas.push_back(m);
  }
  return MetaQuantizer::fit(metas, bins);
}

std::vector<AeExample> random_examples(const Autoencoder& model, Rng& rng, int count) {
  const auto th = model.cfg.thresholds();
  std::vector<AeExample> out;
  for (int i = 0; i < count; ++i) {
    MetaParams m = sample_valid_meta(rng, model.cfg.delta_x, th);
    const CoeffSeq c = sample_valid_coeffs(rng, m, model.cfg.delta_x, th);
    complete_meta(m, decode_coeffs(m, c, model.cfg.delta_x, th), derive_counts(m, model.cfg.delta_x));
    out.push_back(model.prepare(
        random_matrix(rng, static_cast<Eigen::Index>(model.cfg.profile_len), static_cast<Eigen::Index>(model.cfg.code_dim),
                      0.3),
        m, c));
  }
  return out;
}

void check_gradients(Autoencoder& model, const std::vector<AeExample>& ex) {
  std::vector<const AeExample*> batch;
  for (const AeExample& e : ex) batch.push_back(&e);
  const ParamList ps = model.params();
  zero_grads(ps);
  model.loss_and_grad(batch);
  std::vector<Matrix> analytic;
  for (Param* p : ps) analytic.push_back(p->grad);
  auto loss = [&] { return model.loss_and_grad(batch).total; };
  for (std::size_t i = 0; i < ps.size(); ++i)
    EXPECT_LT(oracle::grad_rel_error(ps[i]->value, analytic[i], loss), 1e-4) << ps[i]->name;
}

}  // namespace

TEST(MetaQuantizer, BinCentresRoundTripAndErrorBound) {
  Rng rng(1);
  const MetaQuantizer q = sampled_quantizer(rng, 256);
  for (std::size_t k = 0; k < kMetaEntries; ++k) {
    if (q.width(k) == 0.0) continue;  // constant entries, see DegenerateRange
    for (int b = 0; b < 256; b += 17) EXPECT_EQ(q.bin(k, q.center(k, b)), b);
    for (int t = 0; t < 200; ++t) {
      const double v = rng.uniform(q.lo[k], q.hi[k]);
      EXPECT_LE(std::abs(q.center(k, q.bin(k, v)) - v), 0.5 * q.width(k) * (1 + 1e-12));
    }
  }
}

TEST(MetaQuantizer, DegenerateRange) {
  MetaParams m;
  m(MetaParams::kEnd, MetaParams::kR) = 1e-4;
  const MetaQuantizer q = MetaQuantizer::fit({m, m}, 8);
  const std::size_t k = 4 * MetaParams::kEnd + MetaParams::kR;
  EXPECT_EQ(q.bin(k, 1e-4), 0);
  EXPECT_EQ(q.center(k, 0), 1e-4);
  EXPECT_THROW(MetaQuantizer::fit({}, 8), DomainError);
}

TEST(Encoder, MeanPoolIsPermutationInvariant) {
  Rng rng(2);
  const Matrix c = Matrix::Constant(10, 3, 0.37);
  Matrix g = random_matrix(rng, 10, 3);
  Matrix perm(10, 3), cperm(10, 3);
  for (int i = 0; i < 10; ++i) {
    perm.row(i) = g.row((i * 3) % 10);
    cperm.row(i) = c.row((i * 7) % 10);
  }
  EXPECT_EQ(Autoencoder::mean_pool(cperm, 10), Autoencoder::mean_pool(c, 10));
  EXPECT_LT((Autoencoder::mean_pool(perm, 10) - Autoencoder::mean_pool(g, 10)).norm(), 1e-15);
}

TEST(Encoder, ZeroBackboneGivesZeroLatent) {
  Rng rng(3);
  const AeConfig cfg = small_config();
  Autoencoder m(cfg, sampled_quantizer(rng, cfg.bins), rng);
  for (Dense* d : {&m.enc_in, &m.enc_h1, &m.enc_h2, &m.enc_out}) {
    d->W.value.setZero();
    d->b.value.setZero();
  }
  EXPECT_EQ(m.encode(random_matrix(rng, 12, 4)), RowVec::Zero(4));
  EXPECT_THROW(m.encode(random_matrix(rng, 11, 4)), DomainError);
}

TEST(Decoder, RandomLatentsAlwaysDecodeValid) {
  Rng rng(4);
  AeConfig cfg;
  Autoencoder m(cfg, sampled_quantizer(rng, cfg.bins), rng);
  const auto th = cfg.thresholds();
  int valid = 0;
  for (int t = 0; t < 1000; ++t) {
    RowVec z(32);
    for (Eigen::Index i = 0; i < 32; ++i) z(i) = 3.0 * rng.normal();
    std::vector<std::array<double, 2>> units;
    const MetaParams meta = m.decode_meta(z);
    ASSERT_FALSE(meta_infeasibility(meta, cfg.delta_x, th).has_value());
    m.decode_coeffs_ar(z, meta, &units);
    for (const auto& s : units) {
      ASSERT_GE(s[0], 0.0);
      ASSERT_LE(s[0], 1.0);
      ASSERT_GE(s[1], 0.0);
      ASSERT_LE(s[1], 1.0);
    }
    const auto d = m.decode(z);
    valid += validate(sweep_envelope(d.cs), d.cs, th).all();
  }
  EXPECT_EQ(valid, 1000);
}

TEST(Decoder, TeacherForcingMatchesTrainingPass) {
  Rng rng(5);
  const AeConfig cfg = small_config();
  Autoencoder m(cfg, sampled_quantizer(rng, cfg.bins), rng);
  const auto ex = random_examples(m, rng, 1);
  const AeExample& e = ex[0];
  const RowVec z = m.encode(e.embeddings);

  std::vector<std::array<double, 2>> forced, free;
  m.decode_coeffs_ar(z, e.meta, &forced, &e);
  m.decode_coeffs_ar(z, e.meta, &free);
  ASSERT_EQ(forced.size(), e.u.size());
  EXPECT_EQ(forced[0], free[0]);

  // token MSE recomputed from the teacher-forced unit values
  const auto th = cfg.thresholds();
  double sum = 0.0, tokens = 0.0;
  for (std::size_t j = 0; j < e.u.size(); ++j) {
    if (e.u[j].active) {
      sum += std::pow((e.u[j].value(forced[j][0]) - e.dy_target[j]) / th.thres_y, 2);
      tokens += 1.0;
    }
    sum += std::pow((e.v[j].value(forced[j][1]) - e.r_target[j]) / th.thres_r, 2);
    tokens += 1.0;
  }
  EXPECT_NEAR(m.loss_and_grad({&e}).mse, sum / tokens, 1e-12 * (1.0 + sum / tokens));
}

TEST(Decoder, GroundTruthTokensAreReproducedByForcedHeads) {
  Rng rng(6);
  const AeConfig cfg = small_config();
  Autoencoder m(cfg, sampled_quantizer(rng, cfg.bins), rng);
  const auto ex = random_examples(m, rng, 3);
  for (const AeExample& e : ex) {
    const Layout l = make_layout(e.meta, cfg.delta_x, cfg.thresholds());
    const auto [su, sv] = coeffs_to_unit(l, e.coeffs);
    for (std::size_t j = 0; j < e.u.size(); ++j) {
      if (e.u[j].active) {
        EXPECT_NEAR(e.u[j].value(su[j]), e.dy_target[j], 1e-15);
      }
      EXPECT_NEAR(e.v[j].value(sv[j]), e.r_target[j], 1e-15);
    }
  }
}

TEST(Loss, Weights) {
  const AeConfig c;
  EXPECT_EQ(c.lambda_ce, 1e-3);
  EXPECT_EQ(c.lambda_mse, 1.0);
  EXPECT_EQ(c.lambda_aux, 1e-6);
  EXPECT_EQ(c.leaky_slope, 0.01);
  EXPECT_EQ(c.lr, 3e-5);
  EXPECT_EQ(c.batch, 128u);
  EXPECT_EQ(c.d_z, 32u);
  EXPECT_EQ(c.bins, 256u);
}

TEST(Loss, AuxiliaryTermInactiveOnFeasibleSequences) {
  Rng rng(7);
  const AeConfig cfg = small_config();
  Autoencoder m(cfg, sampled_quantizer(rng, cfg.bins), rng);
  const auto ex = random_examples(m, rng, 4);
  for (const AeExample& e : ex) EXPECT_LT(m.loss_and_grad({&e}).aux, 0.0);
}

TEST(Loss, EndToEndGradientCheck) {
  Rng rng(8);
  const AeConfig cfg = small_config();
  Autoencoder m(cfg, sampled_quantizer(rng, cfg.bins), rng);
  check_gradients(m, random_examples(m, rng, 2));
}

TEST(Loss, EndToEndGradientCheckUnitWeightsWithAttention) {
  Rng rng(9);
  AeConfig cfg = small_config();
  cfg.enc_attention = 1;
  cfg.lambda_ce = 1.0;
  cfg.lambda_aux = 1.0;
  Autoencoder m(cfg, sampled_quantizer(rng, cfg.bins), rng);
  check_gradients(m, random_examples(m, rng, 2));
}

TEST(Training, FirstEpochLowersLoss) {
  Rng rng(10);
  AeConfig cfg = small_config();
  cfg.lr = 1e-3;
  cfg.batch = 8;
  cfg.epochs = 1;
  Autoencoder m(cfg, sampled_quantizer(rng, cfg.bins), rng);
  const auto ex = random_examples(m, rng, 48);
  const double before = evaluate_losses(m, ex, 16).total;
  AdamState opt;
  train_autoencoder(m, opt, ex, rng, [](const AeEpoch&) {});
  EXPECT_LT(evaluate_losses(m, ex, 16).total, before);
  EXPECT_THROW(train_autoencoder(m, opt, {}, rng, [](const AeEpoch&) {}), DomainError);
}

TEST(Persistence, SidecarAndCheckpointRebuildModel) {
  Rng rng(11);
  const AeConfig cfg = small_config();
  Autoencoder m(cfg, sampled_quantizer(rng, cfg.bins), rng);
  const auto dir = std::filesystem::temp_directory_path() / "airfoilgen_ae_test";
  std::filesystem::create_directories(dir);
  save_checkpoint((dir / "ae.bin").string(), m.params());
  Autoencoder back = ae_from_sidecar(nlohmann::json::parse(ae_sidecar(m).dump()));
  load_checkpoint((dir / "ae.bin").string(), back.params());
  const RowVec z = random_matrix(rng, 1, 4);
  const auto a = m.decode(z), b = back.decode(z);
  EXPECT_EQ(a.cs.spine_y, b.cs.spine_y);
  EXPECT_EQ(a.cs.radii, b.cs.radii);
  EXPECT_THROW(ae_from_sidecar(nlohmann::json::object()), IoError);
  std::filesystem::remove_all(dir);
}
