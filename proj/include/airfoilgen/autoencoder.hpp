#pragma once

// Shape autoencoder: quantized point embeddings are pooled into a latent z;
// z is decoded into categorical anchor predictions and an autoregressive
// sequence of unit values pushed through the admissible coefficient box, so
// every decoded shape is valid.

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "csrep.hpp"
#include "json.hpp"
#include "nn.hpp"

namespace airfoilgen {

inline constexpr std::size_t kMetaEntries = 16;

// ---------------------------------------------------------------------------
// Anchor quantizer
// ---------------------------------------------------------------------------

struct MetaQuantizer {
  std::size_t bins = 256;
  std::array<double, kMetaEntries> lo{};
  std::array<double, kMetaEntries> hi{};

  /// Ranges are the data extremes widened by `pad` of their span.
  static MetaQuantizer fit(const std::vector<MetaParams>& metas, std::size_t bins = 256, double pad = 0.02) {
    if (metas.empty()) throw DomainError("MetaQuantizer::fit: no data");
    if (bins < 2) throw DomainError("MetaQuantizer::fit: need at least two bins");
    MetaQuantizer q;
    q.bins = bins;
    q.lo.fill(std::numeric_limits<double>::infinity());
    q.hi.fill(-std::numeric_limits<double>::infinity());
    for (const MetaParams& m : metas) {
      const auto f = m.flat();
      for (std::size_t k = 0; k < kMetaEntries; ++k) {
        q.lo[k] = std::min(q.lo[k], f[k]);
        q.hi[k] = std::max(q.hi[k], f[k]);
      }
    }
    for (std::size_t k = 0; k < kMetaEntries; ++k) {
      const double span = q.hi[k] - q.lo[k];
      q.lo[k] -= pad * span;
      q.hi[k] += pad * span;
    }
    return q;
  }

  double width(std::size_t k) const { return (hi[k] - lo[k]) / static_cast<double>(bins); }

  int bin(std::size_t k, double v) const {
    if (!(hi[k] > lo[k])) return 0;
    const double b = std::floor((v - lo[k]) / (hi[k] - lo[k]) * static_cast<double>(bins));
    return static_cast<int>(std::clamp(b, 0.0, static_cast<double>(bins - 1)));
  }

  double center(std::size_t k, int b) const {
    if (!(hi[k] > lo[k])) return lo[k];
    return lo[k] + (static_cast<double>(b) + 0.5) * width(k);
  }

  /// Position within the range, centred on zero.
  double normalized(std::size_t k, double v) const {
    if (!(hi[k] > lo[k])) return 0.0;
    return (v - lo[k]) / (hi[k] - lo[k]) - 0.5;
  }

  std::array<int, kMetaEntries> bins_of(const MetaParams& m) const {
    std::array<int, kMetaEntries> b{};
    const auto f = m.flat();
    for (std::size_t k = 0; k < kMetaEntries; ++k) b[k] = bin(k, f[k]);
    return b;
  }

  MetaParams dequantize(const std::array<int, kMetaEntries>& b) const {
    std::array<double, kMetaEntries> f{};
    for (std::size_t k = 0; k < kMetaEntries; ++k) f[k] = center(k, b[k]);
    return MetaParams::from_flat(f);
  }
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct AeConfig {
  std::size_t profile_len = kDefaultProfileLength;
  std::size_t code_dim = 16;
  std::size_t d_model = 64;
  std::size_t enc_hidden = 64;
  std::size_t enc_attention = 0;  // attention blocks ahead of the dense stack
  std::size_t d_z = 32;
  std::size_t bins = 256;
  std::size_t meta_hidden = 128;
  std::size_t coeff_hidden = 128;
  std::size_t history = 4;  // previous tokens seen by the coefficient decoder
  double delta_x = kDefaultDeltaX;
  double lambda_ce = 1e-3;
  double lambda_mse = 1.0;
  double lambda_aux = 1e-6;
  double leaky_slope = 0.01;
  double lr = 3e-5;
  std::size_t batch = 128;
  std::size_t epochs = 100;

  SmoothnessThresholds thresholds() const { return SmoothnessThresholds::for_spacing(delta_x); }
  std::size_t step_context_dim() const { return kMetaEntries + 5 + 2 * history + 2; }
  std::size_t step_input_dim() const { return d_z + step_context_dim(); }
};

// ---------------------------------------------------------------------------
// Constrained coefficient head
// ---------------------------------------------------------------------------

/// One entry of the u (spine slope) or v (radius) sequence. Free entries map
/// a unit value s through the admissible box given the running product; the
/// rest are fixed and carry no gradient.
struct HeadStep {
  bool active = true;
  bool free = false;
  double lo = 0.0, hi = 0.0;
  double prod = 1.0;
  double from = 0.0, to = 0.0;
  double fixed_a = 0.0;

  double tilde(double s) const { return lo + s * (hi - lo); }
  double coefficient(double s) const { return free ? 1.0 - prod * tilde(s) : fixed_a; }
  double value(double s) const { return std::lerp(from, to, coefficient(s)); }
  double dvalue_ds() const { return free ? -(to - from) * prod * (hi - lo) : 0.0; }
};

namespace detail {

// Step j of a two-segment sequence; `anchors` are (start, extremum, end).
inline HeadStep head_step(const std::array<Segment, 2>& segs, const std::array<double, 3>& anchors, std::size_t j,
                          double prod, std::size_t length) {
  HeadStep h;
  if (j >= length) {
    h.active = false;
    return h;
  }
  h.prod = prod;
  if (j == 0) {
    h.from = anchors[0];
    h.to = anchors[1];
    h.fixed_a = 0.0;
    return h;
  }
  const std::size_t k = j <= segs[0].last ? 0 : 1;
  h.from = anchors[k];
  h.to = anchors[k + 1];
  if (j == segs[k].last) {
    h.fixed_a = 1.0;
    return h;
  }
  h.free = true;
  std::tie(h.lo, h.hi) = coefficient_bounds(segs[k], j, prod);
  return h;
}

// Running product after step j.
inline double advance_prod(const HeadStep& h, const std::array<Segment, 2>& segs, std::size_t j, double prod,
                           double s) {
  if (!h.active || j == 0) return 1.0;
  if (j == segs[0].last) return 1.0;  // next entry opens the second segment
  if (!h.free) return 0.0;
  return prod * h.tilde(s);
}

}  // namespace detail

/// Anchor-derived state of one decode: layout plus per-head anchors.
struct DecodeFrame {
  Layout layout;
  std::array<double, 3> dy_anchors{};
  std::array<double, 3> r_anchors{};
  std::array<double, kMetaEntries> meta_norm{};

  std::size_t n() const { return layout.counts.n; }
};

// ---------------------------------------------------------------------------
// Training examples
// ---------------------------------------------------------------------------

/// A record prepared for teacher forcing: quantized point embeddings, anchor
/// bins and per-step contexts built from the ground-truth token prefix.
struct AeExample {
  Matrix embeddings;  // profile_len × code_dim
  MetaParams meta;
  CoeffSeq coeffs;
  std::array<int, kMetaEntries> bins{};
  Matrix context;  // n × step_context_dim
  std::vector<HeadStep> u, v;
  std::vector<double> dy_target, r_target;  // n entries; dy_target[n−1] unused
};

struct AeLosses {
  double total = 0.0;
  double ce = 0.0;
  double mse = 0.0;
  double aux = 0.0;
};

// ---------------------------------------------------------------------------
// Model
// ---------------------------------------------------------------------------

class Autoencoder {
 public:
  AeConfig cfg;
  MetaQuantizer quantizer;

  Dense enc_in;
  std::vector<Attention> enc_att;
  Dense enc_h1, enc_h2, enc_out;
  Dense meta_l1, meta_l2, meta_out;
  LayerNorm meta_n1, meta_n2;
  Dense coef_l1, coef_l2, coef_out;

  Autoencoder() = default;
  Autoencoder(const AeConfig& c, const MetaQuantizer& q, Rng& rng) : cfg(c), quantizer(q) {
    if (q.bins != c.bins) throw DomainError("Autoencoder: quantizer bins differ from config");
    enc_in = Dense(c.code_dim, c.d_model, rng, "enc.in");
    for (std::size_t i = 0; i < c.enc_attention; ++i)
      enc_att.emplace_back(c.d_model, rng, "enc.att" + std::to_string(i));
    enc_h1 = Dense(c.d_model, c.enc_hidden, rng, "enc.h1");
    enc_h2 = Dense(c.enc_hidden, c.enc_hidden, rng, "enc.h2");
    enc_out = Dense(c.enc_hidden, c.d_z, rng, "enc.out");
    meta_l1 = Dense(c.d_z, c.meta_hidden, rng, "meta.l1");
    meta_n1 = LayerNorm(c.meta_hidden, "meta.n1");
    meta_l2 = Dense(c.meta_hidden, c.meta_hidden, rng, "meta.l2");
    meta_n2 = LayerNorm(c.meta_hidden, "meta.n2");
    meta_out = Dense(c.meta_hidden, kMetaEntries * c.bins, rng, "meta.out");
    coef_l1 = Dense(c.step_input_dim(), c.coeff_hidden, rng, "coef.l1");
    coef_l2 = Dense(c.coeff_hidden, c.coeff_hidden, rng, "coef.l2");
    coef_out = Dense(c.coeff_hidden, 2, rng, "coef.out");
    pe_ = positional_encoding(c.profile_len, c.d_model);
  }

  ParamList params() {
    ParamList p = enc_in.params();
    for (Attention& a : enc_att) append(p, a.params());
    for (Dense* d : {&enc_h1, &enc_h2, &enc_out, &meta_l1}) append(p, d->params());
    append(p, meta_n1.params());
    append(p, meta_l2.params());
    append(p, meta_n2.params());
    for (Dense* d : {&meta_out, &coef_l1, &coef_l2, &coef_out}) append(p, d->params());
    return p;
  }

  // ---- decode frame and step features ------------------------------------

  DecodeFrame frame(const MetaParams& meta) const {
    using M = MetaParams;
    DecodeFrame f;
    f.layout = make_layout(meta, cfg.delta_x, cfg.thresholds());
    f.dy_anchors = {meta(M::kStart, M::kDy), meta(M::kSpineExt, M::kDy), meta(M::kEnd, M::kDy)};
    f.r_anchors = {meta(M::kStart, M::kR), meta(M::kRadiusExt, M::kR), meta(M::kEnd, M::kR)};
    const auto flat = meta.flat();
    for (std::size_t k = 0; k < kMetaEntries; ++k) f.meta_norm[k] = quantizer.normalized(k, flat[k]);
    return f;
  }

  /// Context of step j from the token prefix (dy, r hold at least j entries).
  void step_context(const DecodeFrame& f, std::size_t j, const std::vector<double>& dy, const std::vector<double>& r,
                    double prod_u, double prod_v, double* out) const {
    const std::size_t n = f.n(), pp = f.layout.counts.pos_p - 1, pr = f.layout.counts.pos_r - 1;
    const double nm1 = static_cast<double>(n - 1);
    std::size_t c = 0;
    for (double m : f.meta_norm) out[c++] = m;
    out[c++] = static_cast<double>(j) / nm1;
    out[c++] = (static_cast<double>(j) - static_cast<double>(pp)) / nm1;
    out[c++] = (static_cast<double>(j) - static_cast<double>(pr)) / nm1;
    out[c++] = j <= pp ? 1.0 : 0.0;
    out[c++] = j <= pr ? 1.0 : 0.0;
    for (std::size_t k = 1; k <= cfg.history; ++k) {
      const bool have = j >= k;
      out[c++] = have ? 4.0 * dy[j - k] / cfg.delta_x : 0.0;
      out[c++] = have ? r[j - k] / 0.05 : 0.0;
    }
    out[c++] = 1.0 - prod_u;
    out[c++] = 1.0 - prod_v;
  }

  // ---- training examples --------------------------------------------------

  AeExample prepare(const Matrix& embeddings, const MetaParams& meta, const CoeffSeq& coeffs) const {
    require_shape(embeddings, static_cast<Eigen::Index>(cfg.profile_len), static_cast<Eigen::Index>(cfg.code_dim),
                  "Autoencoder::prepare");
    AeExample e;
    e.embeddings = embeddings;
    e.meta = meta;
    e.coeffs = coeffs;
    e.bins = quantizer.bins_of(meta);
    const DecodeFrame f = frame(meta);
    const std::size_t n = f.n();
    if (coeffs.u_tilde.size() != n || coeffs.v_tilde.size() != n)
      throw DomainError("Autoencoder::prepare: coefficient length differs from n");
    const CsRep cs = decode_coeffs(meta, coeffs, cfg.delta_x, cfg.thresholds());
    e.dy_target.assign(n, 0.0);
    for (std::size_t j = 0; j + 1 < n; ++j) e.dy_target[j] = cs.spine_y[j + 1] - cs.spine_y[j];
    e.r_target = cs.radii;

    e.context.resize(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(cfg.step_context_dim()));
    double pu = 1.0, pv = 1.0;
    for (std::size_t j = 0; j < n; ++j) {
      step_context(f, j, e.dy_target, e.r_target, pu, pv, e.context.row(static_cast<Eigen::Index>(j)).data());
      const HeadStep hu = detail::head_step(f.layout.u, f.dy_anchors, j, pu, n - 1);
      const HeadStep hv = detail::head_step(f.layout.v, f.r_anchors, j, pv, n);
      e.u.push_back(hu);
      e.v.push_back(hv);
      pu = detail::advance_prod(hu, f.layout.u, j, pu, inverse_unit(hu, coeffs.u_tilde[j]));
      pv = detail::advance_prod(hv, f.layout.v, j, pv, inverse_unit(hv, coeffs.v_tilde[j]));
    }
    return e;
  }

  // ---- inference ----------------------------------------------------------

  RowVec encode(const Matrix& embeddings) const {
    require_shape(embeddings, static_cast<Eigen::Index>(cfg.profile_len), static_cast<Eigen::Index>(cfg.code_dim),
                  "Autoencoder::encode");
    Matrix f = enc_in.apply(embeddings) + pe_;
    for (const Attention& a : enc_att) f = a.apply(f, f.rows());
    const Matrix h1 = SiLU::apply(enc_h1.apply(f));
    const Matrix h2 = SiLU::apply(enc_h2.apply(h1));
    return mean_pool(enc_out.apply(h2), f.rows()).row(0);
  }

  Matrix meta_logits(const RowVec& z) const {
    const Matrix h1 = SiLU::apply(meta_n1.apply(meta_l1.apply(z)));
    const Matrix h2 = SiLU::apply(meta_n2.apply(meta_l2.apply(h1)));
    return meta_out.apply(h2);
  }

  /// Argmax bins, bin centres, projection onto feasible anchors.
  MetaParams decode_meta(const RowVec& z) const {
    const Matrix logits = meta_logits(z);
    std::array<int, kMetaEntries> b{};
    for (std::size_t k = 0; k < kMetaEntries; ++k) {
      Eigen::Index arg = 0;
      logits.row(0).segment(static_cast<Eigen::Index>(k * cfg.bins), static_cast<Eigen::Index>(cfg.bins)).maxCoeff(&arg);
      b[k] = static_cast<int>(arg);
    }
    return repair_meta(quantizer.dequantize(b), cfg.delta_x, cfg.thresholds());
  }

  /// Unit values of one step from its full input row.
  std::array<double, 2> step_units(const RowVec& input) const {
    const Matrix h1 = SiLU::apply(coef_l1.apply(input));
    const Matrix h2 = SiLU::apply(coef_l2.apply(h1));
    const Matrix o = coef_out.apply(h2);
    return {sigmoid(o(0, 0)), sigmoid(o(0, 1))};
  }

  /// Greedy autoregressive decode. With `forced` tokens the prefix is taken
  /// from them instead of the model's own outputs (teacher forcing).
  CoeffSeq decode_coeffs_ar(const RowVec& z, const MetaParams& meta, std::vector<std::array<double, 2>>* units = nullptr,
                            const AeExample* forced = nullptr) const {
    const DecodeFrame f = frame(meta);
    const std::size_t n = f.n();
    std::vector<double> dy(n, 0.0), r(n, 0.0), su(n, 0.5), sv(n, 0.5);
    RowVec input(static_cast<Eigen::Index>(cfg.step_input_dim()));
    input.head(static_cast<Eigen::Index>(cfg.d_z)) = z;
    double pu = 1.0, pv = 1.0;
    if (units) units->clear();
    for (std::size_t j = 0; j < n; ++j) {
      if (forced) {
        input.tail(static_cast<Eigen::Index>(cfg.step_context_dim())) = forced->context.row(static_cast<Eigen::Index>(j));
      } else {
        step_context(f, j, dy, r, pu, pv, input.data() + cfg.d_z);
      }
      const auto s = step_units(input);
      if (units) units->push_back(s);
      const HeadStep hu = detail::head_step(f.layout.u, f.dy_anchors, j, pu, n - 1);
      const HeadStep hv = detail::head_step(f.layout.v, f.r_anchors, j, pv, n);
      su[j] = s[0];
      sv[j] = s[1];
      if (hu.active) dy[j] = hu.value(s[0]);
      r[j] = hv.value(s[1]);
      pu = detail::advance_prod(hu, f.layout.u, j, pu, s[0]);
      pv = detail::advance_prod(hv, f.layout.v, j, pv, s[1]);
    }
    return unit_to_coeffs(f.layout, su, sv);
  }

  struct Decoded {
    MetaParams meta;
    CoeffSeq coeffs;
    CsRep cs;
  };

  Decoded decode(const RowVec& z) const {
    require_shape(z, 1, static_cast<Eigen::Index>(cfg.d_z), "Autoencoder::decode");
    Decoded d;
    d.meta = decode_meta(z);
    d.coeffs = decode_coeffs_ar(z, d.meta);
    d.cs = decode_coeffs(d.meta, d.coeffs, cfg.delta_x, cfg.thresholds());
    complete_meta(d.meta, d.cs, make_layout(d.meta, cfg.delta_x, cfg.thresholds()).counts);
    return d;
  }

  // ---- training -----------------------------------------------------------

  /// Joint loss over a batch with teacher forcing; gradients accumulate into
  /// the parameters.
  AeLosses loss_and_grad(const std::vector<const AeExample*>& batch) {
    if (batch.empty()) throw DomainError("Autoencoder::loss_and_grad: empty batch");
    const auto B = static_cast<Eigen::Index>(batch.size());
    const auto L = static_cast<Eigen::Index>(cfg.profile_len);
    const auto dz = static_cast<Eigen::Index>(cfg.d_z);

    // encoder
    Matrix q(B * L, static_cast<Eigen::Index>(cfg.code_dim));
    for (Eigen::Index b = 0; b < B; ++b) q.middleRows(b * L, L) = batch[static_cast<std::size_t>(b)]->embeddings;
    Matrix f = enc_in.forward(q);
    for (Eigen::Index b = 0; b < B; ++b) f.middleRows(b * L, L) += pe_;
    for (Attention& a : enc_att) f = a.forward(f, L);
    const Matrix h1 = enc_a1_.forward(enc_h1.forward(f));
    const Matrix h2 = enc_a2_.forward(enc_h2.forward(h1));
    const Matrix Z = mean_pool(enc_out.forward(h2), L);

    // anchor heads
    const Matrix m1 = meta_a1_.forward(meta_n1.forward(meta_l1.forward(Z)));
    const Matrix m2 = meta_a2_.forward(meta_n2.forward(meta_l2.forward(m1)));
    const Matrix logits = meta_out.forward(m2);
    AeLosses out;
    Matrix dlogits(logits.rows(), logits.cols());
    const auto bins = static_cast<Eigen::Index>(cfg.bins);
    for (std::size_t k = 0; k < kMetaEntries; ++k) {
      std::vector<int> t;
      for (const AeExample* e : batch) t.push_back(e->bins[k]);
      const LossGrad lg = softmax_xent(logits.middleCols(static_cast<Eigen::Index>(k) * bins, bins), t);
      out.ce += lg.loss;
      dlogits.middleCols(static_cast<Eigen::Index>(k) * bins, bins) = cfg.lambda_ce * lg.grad;
    }

    // coefficient steps
    Eigen::Index rows = 0;
    for (const AeExample* e : batch) rows += e->context.rows();
    Matrix x(rows, static_cast<Eigen::Index>(cfg.step_input_dim()));
    {
      Eigen::Index r0 = 0;
      for (Eigen::Index b = 0; b < B; ++b) {
        const AeExample& e = *batch[static_cast<std::size_t>(b)];
        const Eigen::Index n = e.context.rows();
        x.block(r0, 0, n, dz) = Z.row(b).replicate(n, 1);
        x.block(r0, dz, n, e.context.cols()) = e.context;
        r0 += n;
      }
    }
    const Matrix c1 = coef_a1_.forward(coef_l1.forward(x));
    const Matrix c2 = coef_a2_.forward(coef_l2.forward(c1));
    const Matrix o = coef_out.forward(c2);

    const auto th = cfg.thresholds();
    double tokens = 0.0;
    for (const AeExample* e : batch)
      for (std::size_t j = 0; j < e->u.size(); ++j) tokens += (e->u[j].active ? 1.0 : 0.0) + 1.0;
    Matrix dout = Matrix::Zero(rows, 2);
    {
      Eigen::Index r0 = 0;
      const double invB = 1.0 / static_cast<double>(B);
      for (const AeExample* e : batch) {
        const std::size_t n = e->u.size();
        for (std::size_t j = 0; j < n; ++j) {
          const Eigen::Index row = r0 + static_cast<Eigen::Index>(j);
          const double su = sigmoid(o(row, 0)), sv = sigmoid(o(row, 1));
          double g_u = 0.0, g_v = 0.0;  // dL/dvalue
          const HeadStep& hu = e->u[j];
          const HeadStep& hv = e->v[j];
          if (hu.active) {
            const double err = (hu.value(su) - e->dy_target[j]) / th.thres_y;
            out.mse += err * err / tokens;
            g_u += cfg.lambda_mse * 2.0 * err / (th.thres_y * tokens);
          }
          const double rv = hv.value(sv);
          const double err = (rv - e->r_target[j]) / th.thres_r;
          out.mse += err * err / tokens;
          g_v += cfg.lambda_mse * 2.0 * err / (th.thres_r * tokens);
          if (j >= 1) {
            const double drr = rv - e->r_target[j - 1];
            const double dyy = e->dy_target[j - 1];
            const double d = drr * drr - cfg.delta_x * cfg.delta_x - dyy * dyy;
            const double slope = d > 0.0 ? 1.0 : cfg.leaky_slope;
            out.aux += cfg.lambda_aux * slope * d * invB;
            g_v += cfg.lambda_aux * slope * 2.0 * drr * invB;
          }
          dout(row, 0) = g_u * hu.dvalue_ds() * su * (1.0 - su);
          dout(row, 1) = g_v * hv.dvalue_ds() * sv * (1.0 - sv);
        }
        r0 += static_cast<Eigen::Index>(n);
      }
    }
    out.total = cfg.lambda_ce * out.ce + cfg.lambda_mse * out.mse + out.aux;

    // backward
    const Matrix dx = coef_l1.backward(coef_a1_.backward(coef_l2.backward(coef_a2_.backward(coef_out.backward(dout)))));
    Matrix dZ = meta_l1.backward(
        meta_n1.backward(meta_a1_.backward(meta_l2.backward(meta_n2.backward(meta_a2_.backward(meta_out.backward(dlogits)))))));
    {
      Eigen::Index r0 = 0;
      for (Eigen::Index b = 0; b < B; ++b) {
        const Eigen::Index n = batch[static_cast<std::size_t>(b)]->context.rows();
        dZ.row(b) += dx.block(r0, 0, n, dz).colwise().sum();
        r0 += n;
      }
    }
    Matrix dg(B * L, dz);
    for (Eigen::Index b = 0; b < B; ++b) dg.middleRows(b * L, L) = (dZ.row(b) / static_cast<double>(L)).replicate(L, 1);
    Matrix df = enc_h1.backward(enc_a1_.backward(enc_h2.backward(enc_a2_.backward(enc_out.backward(dg)))));
    for (auto it = enc_att.rbegin(); it != enc_att.rend(); ++it) df = it->backward(df);
    enc_in.backward(df);
    return out;
  }

  /// Mean over consecutive blocks of `len` rows.
  static Matrix mean_pool(const Matrix& g, Eigen::Index len) {
    if (len <= 0 || g.rows() % len != 0) throw DomainError("mean_pool: bad block length");
    Matrix z(g.rows() / len, g.cols());
    for (Eigen::Index b = 0; b < z.rows(); ++b) z.row(b) = g.middleRows(b * len, len).colwise().mean();
    return z;
  }

 private:
  // Unit value reproducing a ground-truth ũ at a free entry.
  static double inverse_unit(const HeadStep& h, double t) {
    if (!h.free || !(h.hi > h.lo)) return 0.5;
    return std::clamp((t - h.lo) / (h.hi - h.lo), 0.0, 1.0);
  }

  Matrix pe_;
  SiLU enc_a1_, enc_a2_, meta_a1_, meta_a2_, coef_a1_, coef_a2_;
};

// ---------------------------------------------------------------------------
// Training loop and persistence
// ---------------------------------------------------------------------------

struct AeEpoch {
  std::size_t epoch = 0;
  AeLosses train;
};

/// Mean batch losses over the examples without updating anything.
inline AeLosses evaluate_losses(Autoencoder& model, const std::vector<AeExample>& data, std::size_t batch) {
  AeLosses sum;
  std::size_t seen = 0;
  for (std::size_t s = 0; s < data.size(); s += batch) {
    std::vector<const AeExample*> b;
    for (std::size_t i = s; i < std::min(data.size(), s + batch); ++i) b.push_back(&data[i]);
    const AeLosses l = model.loss_and_grad(b);
    const auto w = static_cast<double>(b.size());
    sum.total += l.total * w;
    sum.ce += l.ce * w;
    sum.mse += l.mse * w;
    sum.aux += l.aux * w;
    seen += b.size();
  }
  const auto inv = 1.0 / static_cast<double>(seen);
  return {sum.total * inv, sum.ce * inv, sum.mse * inv, sum.aux * inv};
}

template <class Callback>
std::vector<AeEpoch> train_autoencoder(Autoencoder& model, AdamState& opt, const std::vector<AeExample>& data, Rng& rng,
                                       Callback&& on_epoch) {
  if (data.empty()) throw DomainError("train_autoencoder: empty dataset");
  const ParamList ps = model.params();
  opt.lr = model.cfg.lr;
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<AeEpoch> curve;
  for (std::size_t ep = 1; ep <= model.cfg.epochs; ++ep) {
    shuffle(order, rng);
    AeEpoch rec;
    rec.epoch = ep;
    for (std::size_t s = 0; s < order.size(); s += model.cfg.batch) {
      std::vector<const AeExample*> b;
      for (std::size_t i = s; i < std::min(order.size(), s + model.cfg.batch); ++i) b.push_back(&data[order[i]]);
      zero_grads(ps);
      const AeLosses l = model.loss_and_grad(b);
      adam_step(opt, ps);
      const auto w = static_cast<double>(b.size()) / static_cast<double>(order.size());
      rec.train.total += l.total * w;
      rec.train.ce += l.ce * w;
      rec.train.mse += l.mse * w;
      rec.train.aux += l.aux * w;
    }
    curve.push_back(rec);
    on_epoch(rec);
  }
  return curve;
}

inline nlohmann::json ae_sidecar(const Autoencoder& m) {
  nlohmann::json j;
  j["d_z"] = m.cfg.d_z;
  j["B"] = m.cfg.bins;
  j["delta_x"] = m.cfg.delta_x;
  j["profile_len"] = m.cfg.profile_len;
  j["code_dim"] = m.cfg.code_dim;
  j["d_model"] = m.cfg.d_model;
  j["enc_hidden"] = m.cfg.enc_hidden;
  j["enc_attention"] = m.cfg.enc_attention;
  j["meta_hidden"] = m.cfg.meta_hidden;
  j["coeff_hidden"] = m.cfg.coeff_hidden;
  j["history"] = m.cfg.history;
  j["quantizer_lo"] = m.quantizer.lo;
  j["quantizer_hi"] = m.quantizer.hi;
  return j;
}

/// Rebuilds an architecture-compatible model from a sidecar; weights still
/// come from the checkpoint.
inline Autoencoder ae_from_sidecar(const nlohmann::json& j, AeConfig base = {}) {
  try {
    base.d_z = j.at("d_z");
    base.bins = j.at("B");
    base.delta_x = j.at("delta_x");
    base.profile_len = j.at("profile_len");
    base.code_dim = j.at("code_dim");
    base.d_model = j.at("d_model");
    base.enc_hidden = j.at("enc_hidden");
    base.enc_attention = j.at("enc_attention");
    base.meta_hidden = j.at("meta_hidden");
    base.coeff_hidden = j.at("coeff_hidden");
    base.history = j.at("history");
    MetaQuantizer q;
    q.bins = base.bins;
    q.lo = j.at("quantizer_lo").get<std::array<double, kMetaEntries>>();
    q.hi = j.at("quantizer_hi").get<std::array<double, kMetaEntries>>();
    Rng rng(0);
    return Autoencoder(base, q, rng);
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("autoencoder sidecar: ") + e.what());
  }
}

}  // namespace airfoilgen
