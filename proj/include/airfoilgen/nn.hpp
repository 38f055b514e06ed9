#pragma once

// Small double-precision neural kernel: dense, layer norm, SiLU and
// self-attention layers with hand-written backward passes, Adam, sinusoidal
// positions, residual vector quantization and a flat binary checkpoint.
//
// Layers cache their last forward input; every backward call consumes the
// matching forward call.

#include <Eigen/Dense>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "core.hpp"
#include "geometry.hpp"

namespace airfoilgen {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using RowVec = Eigen::Matrix<double, 1, Eigen::Dynamic>;

struct Param {
  std::string name;
  Matrix value;
  Matrix grad;

  Param() = default;
  Param(std::string n, Matrix v) : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}
  void zero_grad() { grad.setZero(); }
};

using ParamList = std::vector<Param*>;

inline void zero_grads(const ParamList& ps) {
  for (Param* p : ps) p->zero_grad();
}

inline void append(ParamList& to, const ParamList& from) { to.insert(to.end(), from.begin(), from.end()); }

inline void require_shape(const Matrix& m, Eigen::Index rows, Eigen::Index cols, const char* what) {
  if ((rows >= 0 && m.rows() != rows) || (cols >= 0 && m.cols() != cols))
    throw DomainError(std::string(what) + ": shape mismatch");
}

// ---------------------------------------------------------------------------
// Layers
// ---------------------------------------------------------------------------

class Dense {
 public:
  Param W, b;

  Dense() = default;
  Dense(std::size_t in, std::size_t out, Rng& rng, const std::string& name, double gain = 1.0) {
    const double lim = gain * std::sqrt(6.0 / static_cast<double>(in + out));
    Matrix w(in, out);
    for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-lim, lim);
    W = Param(name + ".W", w);
    b = Param(name + ".b", Matrix::Zero(1, static_cast<Eigen::Index>(out)));
  }

  Eigen::Index in_dim() const { return W.value.rows(); }
  Eigen::Index out_dim() const { return W.value.cols(); }

  Matrix forward(const Matrix& x) {
    require_shape(x, -1, in_dim(), "Dense::forward");
    x_ = x;
    return apply(x);
  }

  /// Forward without caching, for inference.
  Matrix apply(const Matrix& x) const {
    require_shape(x, -1, in_dim(), "Dense::apply");
    Matrix y = x * W.value;
    y.rowwise() += b.value.row(0);
    return y;
  }

  Matrix backward(const Matrix& dy) {
    require_shape(dy, x_.rows(), out_dim(), "Dense::backward");
    W.grad.noalias() += x_.transpose() * dy;
    b.grad += dy.colwise().sum();
    return dy * W.value.transpose();
  }

  ParamList params() { return {&W, &b}; }

 private:
  Matrix x_;
};

inline double sigmoid(double x) {
  return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

class SiLU {
 public:
  Matrix forward(const Matrix& x) {
    x_ = x;
    return apply(x);
  }
  static Matrix apply(const Matrix& x) {
    return x.unaryExpr([](double v) { return v * sigmoid(v); });
  }
  Matrix backward(const Matrix& dy) const {
    require_shape(dy, x_.rows(), x_.cols(), "SiLU::backward");
    return dy.cwiseProduct(x_.unaryExpr([](double v) {
      const double s = sigmoid(v);
      return s + v * s * (1.0 - s);
    }));
  }

 private:
  Matrix x_;
};

/// Row-wise normalization to zero mean and unit variance, before the affine.
inline Matrix layer_norm(const Matrix& x, double eps = 1e-5) {
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double mu = x.row(i).mean();
    const double var = (x.row(i).array() - mu).square().mean();
    y.row(i) = (x.row(i).array() - mu) / std::sqrt(var + eps);
  }
  return y;
}

class LayerNorm {
 public:
  Param gamma, beta;
  double eps = 1e-5;

  LayerNorm() = default;
  LayerNorm(std::size_t dim, const std::string& name)
      : gamma(name + ".gamma", Matrix::Ones(1, static_cast<Eigen::Index>(dim))),
        beta(name + ".beta", Matrix::Zero(1, static_cast<Eigen::Index>(dim))) {}

  Matrix forward(const Matrix& x) {
    require_shape(x, -1, gamma.value.cols(), "LayerNorm::forward");
    xhat_ = layer_norm(x, eps);
    inv_std_.resize(x.rows());
    for (Eigen::Index i = 0; i < x.rows(); ++i) {
      const double mu = x.row(i).mean();
      inv_std_[static_cast<std::size_t>(i)] = 1.0 / std::sqrt((x.row(i).array() - mu).square().mean() + eps);
    }
    return affine(xhat_);
  }

  Matrix apply(const Matrix& x) const {
    require_shape(x, -1, gamma.value.cols(), "LayerNorm::apply");
    return affine(layer_norm(x, eps));
  }

  Matrix backward(const Matrix& dy) {
    require_shape(dy, xhat_.rows(), xhat_.cols(), "LayerNorm::backward");
    gamma.grad += dy.cwiseProduct(xhat_).colwise().sum();
    beta.grad += dy.colwise().sum();
    const double n = static_cast<double>(dy.cols());
    Matrix dx(dy.rows(), dy.cols());
    for (Eigen::Index i = 0; i < dy.rows(); ++i) {
      const RowVec g = dy.row(i).cwiseProduct(gamma.value.row(0));
      const double s1 = g.sum(), s2 = g.dot(xhat_.row(i));
      dx.row(i) = inv_std_[static_cast<std::size_t>(i)] / n *
                  (n * g.array() - s1 - xhat_.row(i).array() * s2).matrix();
    }
    return dx;
  }

  ParamList params() { return {&gamma, &beta}; }

 private:
  Matrix affine(const Matrix& xhat) const {
    Matrix y = xhat.array().rowwise() * gamma.value.row(0).array();
    y.rowwise() += beta.value.row(0);
    return y;
  }
  Matrix xhat_;
  std::vector<double> inv_std_;
};

inline Matrix softmax_rows(const Matrix& s) {
  Matrix a(s.rows(), s.cols());
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const double mx = s.row(i).maxCoeff();
    a.row(i) = (s.row(i).array() - mx).exp();
    a.row(i) /= a.row(i).sum();
  }
  return a;
}

/// Single-head self-attention with output projection and residual,
/// Y = X + softmax(QKᵀ/√d)·V·Wo, applied independently to consecutive blocks
/// of `seq_len` rows.
class Attention {
 public:
  Dense q, k, v, o;

  Attention() = default;
  Attention(std::size_t dim, Rng& rng, const std::string& name)
      : q(dim, dim, rng, name + ".q"), k(dim, dim, rng, name + ".k"), v(dim, dim, rng, name + ".v"),
        o(dim, dim, rng, name + ".o") {}

  Matrix forward(const Matrix& x, Eigen::Index seq_len) {
    if (seq_len <= 0 || x.rows() % seq_len != 0) throw DomainError("Attention::forward: bad sequence length");
    seq_ = seq_len;
    Q_ = q.forward(x);
    K_ = k.forward(x);
    V_ = v.forward(x);
    const double scale = 1.0 / std::sqrt(static_cast<double>(x.cols()));
    A_.resize(static_cast<std::size_t>(x.rows() / seq_len));
    Matrix h(x.rows(), x.cols());
    for (Eigen::Index blk = 0; blk * seq_len < x.rows(); ++blk) {
      const Eigen::Index r0 = blk * seq_len;
      Matrix& a = A_[static_cast<std::size_t>(blk)];
      a = softmax_rows(Q_.middleRows(r0, seq_len) * K_.middleRows(r0, seq_len).transpose() * scale);
      h.middleRows(r0, seq_len) = a * V_.middleRows(r0, seq_len);
    }
    return x + o.forward(h);
  }

  /// Forward without caching, for inference.
  Matrix apply(const Matrix& x, Eigen::Index seq_len) const {
    if (seq_len <= 0 || x.rows() % seq_len != 0) throw DomainError("Attention::apply: bad sequence length");
    const Matrix qx = q.apply(x), kx = k.apply(x), vx = v.apply(x);
    const double scale = 1.0 / std::sqrt(static_cast<double>(x.cols()));
    Matrix h(x.rows(), x.cols());
    for (Eigen::Index r0 = 0; r0 < x.rows(); r0 += seq_len)
      h.middleRows(r0, seq_len) =
          softmax_rows(qx.middleRows(r0, seq_len) * kx.middleRows(r0, seq_len).transpose() * scale) *
          vx.middleRows(r0, seq_len);
    return x + o.apply(h);
  }

  Matrix backward(const Matrix& dy) {
    const Matrix dh = o.backward(dy);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dy.cols()));
    Matrix dq(dy.rows(), dy.cols()), dk(dy.rows(), dy.cols()), dv(dy.rows(), dy.cols());
    for (Eigen::Index blk = 0; blk * seq_ < dy.rows(); ++blk) {
      const Eigen::Index r0 = blk * seq_;
      const Matrix& a = A_[static_cast<std::size_t>(blk)];
      const Matrix dhb = dh.middleRows(r0, seq_);
      const Matrix da = dhb * V_.middleRows(r0, seq_).transpose();
      dv.middleRows(r0, seq_) = a.transpose() * dhb;
      Matrix ds = a.cwiseProduct(da);
      const Eigen::VectorXd rs = ds.rowwise().sum();
      ds = a.cwiseProduct(da.colwise() - rs) * scale;
      dq.middleRows(r0, seq_) = ds * K_.middleRows(r0, seq_);
      dk.middleRows(r0, seq_) = ds.transpose() * Q_.middleRows(r0, seq_);
    }
    return dy + q.backward(dq) + k.backward(dk) + v.backward(dv);
  }

  ParamList params() {
    ParamList p;
    for (Dense* d : {&q, &k, &v, &o}) append(p, d->params());
    return p;
  }

 private:
  Eigen::Index seq_ = 1;
  Matrix Q_, K_, V_;
  std::vector<Matrix> A_;
};

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

struct LossGrad {
  double loss = 0.0;
  Matrix grad;
};

/// Mean cross-entropy of row-wise softmax against integer targets.
inline LossGrad softmax_xent(const Matrix& logits, const std::vector<int>& targets) {
  if (static_cast<Eigen::Index>(targets.size()) != logits.rows()) throw DomainError("softmax_xent: shape mismatch");
  LossGrad out;
  out.grad = softmax_rows(logits);
  const double inv = 1.0 / static_cast<double>(logits.rows());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const int t = targets[static_cast<std::size_t>(i)];
    if (t < 0 || t >= logits.cols()) throw DomainError("softmax_xent: target out of range");
    out.loss -= std::log(std::max(out.grad(i, t), std::numeric_limits<double>::min()));
    out.grad(i, t) -= 1.0;
  }
  out.loss *= inv;
  out.grad *= inv;
  return out;
}

/// Mean squared error over all entries.
inline LossGrad mse_loss(const Matrix& pred, const Matrix& target) {
  require_shape(pred, target.rows(), target.cols(), "mse_loss");
  LossGrad out;
  const Matrix d = pred - target;
  const double inv = 1.0 / static_cast<double>(d.size());
  out.loss = d.squaredNorm() * inv;
  out.grad = 2.0 * inv * d;
  return out;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t step = 0;
  std::vector<Matrix> m;
  std::vector<Matrix> v;
};

inline void adam_step(AdamState& s, const ParamList& params) {
  if (s.m.empty()) {
    for (const Param* p : params) {
      s.m.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
      s.v.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  if (s.m.size() != params.size()) throw DomainError("adam_step: parameter count mismatch");
  ++s.step;
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.step));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Param& p = *params[i];
    require_shape(p.grad, p.value.rows(), p.value.cols(), "adam_step");
    require_shape(s.m[i], p.value.rows(), p.value.cols(), "adam_step");
    s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * p.grad;
    s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= s.lr * (s.m[i].array() / c1) / ((s.v[i].array() / c2).sqrt() + s.eps);
  }
}

// ---------------------------------------------------------------------------
// Positional encoding and neighbourhoods
// ---------------------------------------------------------------------------

/// PE(pos, 2i) = sin(pos / 10000^(2i/d)), PE(pos, 2i+1) = cos(same).
inline Matrix positional_encoding(std::size_t length, std::size_t dim) {
  if (dim == 0 || dim % 2 != 0) throw DomainError("positional_encoding: dim must be even");
  Matrix pe(static_cast<Eigen::Index>(length), static_cast<Eigen::Index>(dim));
  for (std::size_t pos = 0; pos < length; ++pos)
    for (std::size_t i = 0; i < dim / 2; ++i) {
      const double rate = std::pow(10000.0, -2.0 * static_cast<double>(i) / static_cast<double>(dim));
      const double a = static_cast<double>(pos) * rate;
      pe(static_cast<Eigen::Index>(pos), static_cast<Eigen::Index>(2 * i)) = std::sin(a);
      pe(static_cast<Eigen::Index>(pos), static_cast<Eigen::Index>(2 * i + 1)) = std::cos(a);
    }
  return pe;
}

/// Row i concatenates the k boundary points centred on point i, cyclically.
inline Matrix gather_neighbors(const Profile& profile, std::size_t k) {
  if (k % 2 == 0) throw DomainError("gather_neighbors: window must be odd");
  const std::size_t n = profile.size();
  if (n == 0) throw DomainError("gather_neighbors: empty profile");
  const auto half = static_cast<long>(k / 2);
  Matrix o(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(2 * k));
  for (std::size_t i = 0; i < n; ++i)
    for (long j = -half; j <= half; ++j) {
      const auto idx = static_cast<std::size_t>(((static_cast<long>(i) + j) % static_cast<long>(n) + static_cast<long>(n)) %
                                                static_cast<long>(n));
      const auto col = static_cast<Eigen::Index>(2 * (j + half));
      o(static_cast<Eigen::Index>(i), col) = profile[idx].x;
      o(static_cast<Eigen::Index>(i), col + 1) = profile[idx].y;
    }
  return o;
}

// ---------------------------------------------------------------------------
// Residual vector quantization
// ---------------------------------------------------------------------------

/// Hierarchical codebook. In every layer after the first, code 0 is pinned
/// to the zero vector so the residual norm never grows with depth.
struct Codebook {
  std::vector<Param> tables;                   // depth × (K × dim)
  std::vector<std::vector<std::uint64_t>> usage;

  Codebook() = default;
  Codebook(std::size_t depth, std::size_t codes, std::size_t dim, Rng& rng, double scale = 0.1) {
    if (depth == 0 || codes < 2 || dim == 0) throw DomainError("Codebook: empty configuration");
    for (std::size_t l = 0; l < depth; ++l) {
      Matrix t(codes, dim);
      for (Eigen::Index i = 0; i < t.size(); ++i) t.data()[i] = scale * rng.normal() / static_cast<double>(l + 1);
      if (l > 0) t.row(0).setZero();
      tables.emplace_back("rvq.layer" + std::to_string(l), t);
    }
    usage.assign(depth, std::vector<std::uint64_t>(codes, 0));
  }

  std::size_t depth() const { return tables.size(); }
  std::size_t codes() const { return tables.empty() ? 0 : static_cast<std::size_t>(tables[0].value.rows()); }
  std::size_t dim() const { return tables.empty() ? 0 : static_cast<std::size_t>(tables[0].value.cols()); }
  bool pinned(std::size_t layer, std::size_t code) const { return layer > 0 && code == 0; }

  ParamList params() {
    ParamList p;
    for (Param& t : tables) p.push_back(&t);
    return p;
  }
};

struct RvqResult {
  std::vector<std::size_t> codes;
  RowVec quantized;
  std::vector<RowVec> residuals;  // input residual of each layer
  double codebook_loss = 0.0;     // Σ_l ‖sg(r_l) − c_l‖²
  double commit_residual = 0.0;   // final residual, ‖o − sg(quantized)‖²
};

inline std::size_t nearest_code(const Matrix& table, const RowVec& r) {
  std::size_t best = 0;
  double bd = std::numeric_limits<double>::infinity();
  for (Eigen::Index c = 0; c < table.rows(); ++c) {
    const double d = (table.row(c) - r).squaredNorm();
    if (d < bd) {
      bd = d;
      best = static_cast<std::size_t>(c);
    }
  }
  return best;
}

inline RvqResult rvq_quantize(const RowVec& o, const Codebook& cb) {
  if (cb.depth() == 0 || cb.codes() == 0) throw DomainError("rvq_quantize: empty codebook");
  if (static_cast<std::size_t>(o.size()) != cb.dim()) throw DomainError("rvq_quantize: dimension mismatch");
  RvqResult r;
  r.quantized = RowVec::Zero(o.size());
  RowVec residual = o;
  for (std::size_t l = 0; l < cb.depth(); ++l) {
    const Matrix& t = cb.tables[l].value;
    const std::size_t c = nearest_code(t, residual);
    r.codes.push_back(c);
    r.residuals.push_back(residual);
    r.codebook_loss += (residual - t.row(static_cast<Eigen::Index>(c))).squaredNorm();
    r.quantized += t.row(static_cast<Eigen::Index>(c));
    residual -= t.row(static_cast<Eigen::Index>(c));
  }
  r.commit_residual = residual.squaredNorm();
  return r;
}

struct RvqConfig {
  std::size_t window = 5;    // neighbourhood points k
  std::size_t depth = 2;     // s
  std::size_t codes = 256;   // K
  std::size_t code_dim = 16;
  std::size_t hidden = 64;
  double w_recon = 1.00;
  double w_codebook = 0.01;
  double commitment = 0.25;
  double lr = 1e-3;
};

/// Projection → RVQ → residual MLP decoder reconstructing the neighbourhood.
class RvqModel {
 public:
  RvqConfig cfg;
  Dense proj;
  Codebook codebook;
  Dense dec_in, dec_mid, dec_out;

  RvqModel() = default;
  RvqModel(const RvqConfig& c, Rng& rng)
      : cfg(c),
        proj(2 * c.window, c.code_dim, rng, "rvq.proj"),
        codebook(c.depth, c.codes, c.code_dim, rng),
        dec_in(c.code_dim, c.hidden, rng, "rvq.dec_in"),
        dec_mid(c.hidden, c.hidden, rng, "rvq.dec_mid"),
        dec_out(c.hidden, 2 * c.window, rng, "rvq.dec_out") {}

  ParamList params() {
    ParamList p = proj.params();
    append(p, codebook.params());
    for (Dense* d : {&dec_in, &dec_mid, &dec_out}) append(p, d->params());
    return p;
  }

  struct Losses {
    double total = 0.0;
    double recon = 0.0;
    double codebook = 0.0;
    double commit = 0.0;
  };

  /// Quantized embeddings (rows) and code tuples for a neighbourhood batch.
  Matrix quantize(const Matrix& o, std::vector<std::vector<std::size_t>>* codes = nullptr) const {
    const Matrix e = proj.apply(o);
    Matrix q(e.rows(), e.cols());
    if (codes) codes->assign(static_cast<std::size_t>(e.rows()), {});
    for (Eigen::Index i = 0; i < e.rows(); ++i) {
      const RvqResult r = rvq_quantize(e.row(i), codebook);
      q.row(i) = r.quantized;
      if (codes) (*codes)[static_cast<std::size_t>(i)] = r.codes;
    }
    return q;
  }

  Matrix reconstruct(const Matrix& o) const {
    const Matrix q = quantize(o);
    const Matrix h1 = SiLU::apply(dec_in.apply(q));
    const Matrix h2 = h1 + SiLU::apply(dec_mid.apply(h1));
    return dec_out.apply(h2);
  }

  /// Loss and gradients for one batch; the caller applies the optimizer.
  Losses loss_and_grad(const Matrix& o, std::vector<RowVec>* residual_pool = nullptr) {
    const Eigen::Index B = o.rows();
    const Matrix e = proj.forward(o);
    Matrix q(B, e.cols());
    std::vector<RvqResult> res(static_cast<std::size_t>(B));
    for (Eigen::Index i = 0; i < B; ++i) {
      res[static_cast<std::size_t>(i)] = rvq_quantize(e.row(i), codebook);
      q.row(i) = res[static_cast<std::size_t>(i)].quantized;
      for (std::size_t l = 0; l < codebook.depth(); ++l) {
        ++codebook.usage[l][res[static_cast<std::size_t>(i)].codes[l]];
        if (residual_pool) residual_pool->push_back(res[static_cast<std::size_t>(i)].residuals[l]);
      }
    }
    // decoder with straight-through input
    const Matrix a1 = dec_in.forward(q);
    const Matrix h1 = act1_.forward(a1);
    const Matrix a2 = dec_mid.forward(h1);
    const Matrix h2 = h1 + act2_.forward(a2);
    const Matrix out = dec_out.forward(h2);
    const LossGrad rec = mse_loss(out, o);

    Losses L;
    L.recon = rec.loss;
    const double invB = 1.0 / static_cast<double>(B);
    for (const RvqResult& r : res) {
      L.codebook += r.codebook_loss * invB;
      L.commit += r.commit_residual * invB;
    }
    L.total = cfg.w_recon * L.recon + cfg.w_codebook * (L.codebook + cfg.commitment * L.commit);

    Matrix dh2 = dec_out.backward(cfg.w_recon * rec.grad);
    Matrix dh1 = dh2 + dec_mid.backward(act2_.backward(dh2));
    Matrix dq = dec_in.backward(act1_.backward(dh1));
    // straight-through: dq passes to e; the commitment term pulls e to sg(q)
    Matrix de = dq + cfg.w_codebook * cfg.commitment * 2.0 * invB * (e - q);
    proj.backward(de);
    for (Eigen::Index i = 0; i < B; ++i) {
      const RvqResult& r = res[static_cast<std::size_t>(i)];
      for (std::size_t l = 0; l < codebook.depth(); ++l) {
        if (codebook.pinned(l, r.codes[l])) continue;
        const auto c = static_cast<Eigen::Index>(r.codes[l]);
        codebook.tables[l].grad.row(c) +=
            cfg.w_codebook * 2.0 * invB * (codebook.tables[l].value.row(c) - r.residuals[l]);
      }
    }
    return L;
  }

  /// Replaces codes unused since the last reset by pooled residuals.
  std::size_t reseed_dead_codes(const std::vector<RowVec>& pool, Rng& rng) {
    std::size_t reseeded = 0;
    const std::size_t depth = codebook.depth();
    for (std::size_t l = 0; l < depth; ++l) {
      for (std::size_t c = 0; c < codebook.codes(); ++c) {
        if (codebook.usage[l][c] > 0 || codebook.pinned(l, c) || pool.empty()) continue;
        // pool holds residuals interleaved by layer
        const std::size_t per_layer = pool.size() / depth;
        if (per_layer == 0) continue;
        const std::size_t pick = rng.below(per_layer) * depth + l;
        codebook.tables[l].value.row(static_cast<Eigen::Index>(c)) = pool[pick];
        ++reseeded;
      }
      std::fill(codebook.usage[l].begin(), codebook.usage[l].end(), 0);
    }
    return reseeded;
  }

 private:
  SiLU act1_, act2_;
};

struct RvqEpoch {
  double total = 0.0;
  double recon = 0.0;
  std::size_t reseeded = 0;
};

/// Shuffled minibatch epochs over neighbourhood rows; dead codes are
/// re-seeded after every epoch.
inline std::vector<RvqEpoch> train_rvq(RvqModel& model, AdamState& opt, const Matrix& data, std::size_t epochs,
                                       std::size_t batch, Rng& rng) {
  if (data.rows() == 0) throw DomainError("train_rvq: empty data");
  if (batch == 0) throw DomainError("train_rvq: batch must be positive");
  const ParamList ps = model.params();
  std::vector<std::size_t> order(static_cast<std::size_t>(data.rows()));
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<RvqEpoch> curve;
  for (std::size_t e = 0; e < epochs; ++e) {
    shuffle(order, rng);
    RvqEpoch ep;
    std::vector<RowVec> pool;
    std::size_t seen = 0;
    for (std::size_t s = 0; s < order.size(); s += batch) {
      const std::size_t m = std::min(batch, order.size() - s);
      Matrix x(static_cast<Eigen::Index>(m), data.cols());
      for (std::size_t i = 0; i < m; ++i) x.row(static_cast<Eigen::Index>(i)) = data.row(static_cast<Eigen::Index>(order[s + i]));
      pool.clear();
      zero_grads(ps);
      const RvqModel::Losses L = model.loss_and_grad(x, &pool);
      adam_step(opt, ps);
      ep.total += L.total * static_cast<double>(m);
      ep.recon += L.recon * static_cast<double>(m);
      seen += m;
    }
    ep.total /= static_cast<double>(seen);
    ep.recon /= static_cast<double>(seen);
    ep.reseeded = model.reseed_dead_codes(pool, rng);
    curve.push_back(ep);
  }
  return curve;
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

template <class T>
void put_le(std::string& buf, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  unsigned char b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  buf.append(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get_le(const std::string& buf, std::size_t& pos) {
  if (pos + sizeof(T) > buf.size()) throw IoError("checkpoint: truncated file");
  unsigned char b[sizeof(T)];
  std::memcpy(b, buf.data() + pos, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  pos += sizeof(T);
  T v;
  std::memcpy(&v, b, sizeof(T));
  return v;
}

}  // namespace detail

/// "FFNN", version, manifest of (name, rows, cols), then every value as a
/// little-endian float64 in manifest order.
inline std::string serialize_params(const std::vector<const Param*>& params) {
  std::string buf = "FFNN";
  detail::put_le<std::uint32_t>(buf, kCheckpointVersion);
  detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(params.size()));
  for (const Param* p : params) {
    detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(p->name.size()));
    buf += p->name;
    detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(p->value.rows()));
    detail::put_le<std::uint32_t>(buf, static_cast<std::uint32_t>(p->value.cols()));
  }
  for (const Param* p : params)
    for (Eigen::Index i = 0; i < p->value.size(); ++i) detail::put_le<double>(buf, p->value.data()[i]);
  return buf;
}

inline void deserialize_params(const std::string& buf, const ParamList& params) {
  std::size_t pos = 0;
  if (buf.size() < 4 || buf.compare(0, 4, "FFNN") != 0) throw IoError("checkpoint: bad magic");
  pos = 4;
  if (detail::get_le<std::uint32_t>(buf, pos) != kCheckpointVersion) throw IoError("checkpoint: unknown version");
  const auto count = detail::get_le<std::uint32_t>(buf, pos);
  if (count != params.size()) throw IoError("checkpoint: parameter count mismatch");
  for (const Param* p : params) {
    const auto len = detail::get_le<std::uint32_t>(buf, pos);
    if (pos + len > buf.size()) throw IoError("checkpoint: truncated manifest");
    const std::string name = buf.substr(pos, len);
    pos += len;
    const auto rows = detail::get_le<std::uint32_t>(buf, pos);
    const auto cols = detail::get_le<std::uint32_t>(buf, pos);
    if (name != p->name || rows != p->value.rows() || cols != p->value.cols())
      throw IoError("checkpoint: manifest does not match model (" + name + ")");
  }
  for (Param* p : params)
    for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] = detail::get_le<double>(buf, pos);
  if (pos != buf.size()) throw IoError("checkpoint: trailing bytes");
}

inline void write_file(const std::string& path, const std::string& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("write failed: " + path);
}

inline std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path);
  return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

inline void save_checkpoint(const std::string& path, const ParamList& params) {
  std::vector<const Param*> cp(params.begin(), params.end());
  write_file(path, serialize_params(cp));
}

inline void load_checkpoint(const std::string& path, const ParamList& params) {
  deserialize_params(read_file(path), params);
}

}  // namespace airfoilgen
