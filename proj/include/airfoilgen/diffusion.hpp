#pragma once

// Denoising diffusion over shape embeddings with class conditioning and
// classifier-free guidance. Steps are 1-based: t = 1..T.

#include <cmath>
#include <string>
#include <vector>

#include "core.hpp"
#include "nn.hpp"

namespace airfoilgen {

struct BetaSchedule {
  std::vector<double> beta;       // beta[t-1] = β_t
  std::vector<double> alpha;      // α_t = 1 − β_t
  std::vector<double> alpha_bar;  // ᾱ_t = Π_{j≤t} α_j

  std::size_t T() const { return beta.size(); }
  double b(std::size_t t) const { return beta.at(t - 1); }
  double a(std::size_t t) const { return alpha.at(t - 1); }
  double ab(std::size_t t) const { return alpha_bar.at(t - 1); }
};

/// Schedule from explicit β values in [0, 1).
inline BetaSchedule schedule_from_betas(std::vector<double> betas) {
  if (betas.empty()) throw DomainError("schedule_from_betas: empty schedule");
  BetaSchedule s;
  double prod = 1.0;
  for (double b : betas) {
    if (!(b >= 0.0 && b < 1.0)) throw DomainError("schedule_from_betas: beta outside [0, 1)");
    s.alpha.push_back(1.0 - b);
    prod *= 1.0 - b;
    s.alpha_bar.push_back(prod);
  }
  s.beta = std::move(betas);
  return s;
}

/// β_t linear from beta_min (t = 1) to beta_max (t = T) inclusive.
inline BetaSchedule make_schedule(std::size_t T = 1000, double beta_min = 1e-4, double beta_max = 0.02) {
  if (T < 2) throw DomainError("make_schedule: need T >= 2");
  if (!(beta_min > 0.0 && beta_min < beta_max && beta_max < 1.0))
    throw DomainError("make_schedule: need 0 < beta_min < beta_max < 1");
  std::vector<double> b(T);
  for (std::size_t i = 0; i < T; ++i)
    b[i] = beta_min + (beta_max - beta_min) * static_cast<double>(i) / static_cast<double>(T - 1);
  return schedule_from_betas(std::move(b));
}

/// z_t = √ᾱ_t·z0 + √(1−ᾱ_t)·ε, row-wise.
inline Matrix q_sample(const Matrix& z0, std::size_t t, const Matrix& eps, const BetaSchedule& s) {
  if (t < 1 || t > s.T()) throw DomainError("q_sample: step out of range");
  require_shape(eps, z0.rows(), z0.cols(), "q_sample");
  return std::sqrt(s.ab(t)) * z0 + std::sqrt(1.0 - s.ab(t)) * eps;
}

/// One reverse step; fresh noise √β_t·ξ is added only for t > 1.
inline Matrix p_sample_step(const Matrix& zt, std::size_t t, const Matrix& eps_pred, const BetaSchedule& s, Rng& rng) {
  if (t < 1 || t > s.T()) throw DomainError("p_sample_step: step out of range");
  require_shape(eps_pred, zt.rows(), zt.cols(), "p_sample_step");
  Matrix mean = (zt - (s.b(t) / std::sqrt(1.0 - s.ab(t))) * eps_pred) / std::sqrt(s.a(t));
  if (t > 1) {
    const double sd = std::sqrt(s.b(t));
    for (Eigen::Index i = 0; i < mean.size(); ++i) mean.data()[i] += sd * rng.normal();
  }
  return mean;
}

/// (1+ω)·ε_cond − ω·ε_null.
inline Matrix cfg_combine(const Matrix& eps_cond, const Matrix& eps_null, double omega) {
  require_shape(eps_null, eps_cond.rows(), eps_cond.cols(), "cfg_combine");
  return (1.0 + omega) * eps_cond - omega * eps_null;
}

inline Matrix standard_normal(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

// ---------------------------------------------------------------------------
// Denoiser
// ---------------------------------------------------------------------------

struct DenoiserConfig {
  std::size_t dim = 32;
  std::size_t hidden = 128;
  std::size_t blocks = 2;
  std::size_t time_dim = 64;
  std::size_t classes = 0;  // conditional classes, excluding the null row
  double cond_dropout = 0.1;
  double lr = 1e-3;
  std::size_t batch = 128;
  std::size_t steps = 20000;
};

/// Class row for the embedding table: 0 is the null class.
inline constexpr int kNullClass = -1;
inline std::size_t class_row(int class_id) { return class_id < 0 ? 0 : static_cast<std::size_t>(class_id) + 1; }

/// Dense residual stack; the class embedding is added to the time embedding.
class Denoiser {
 public:
  DenoiserConfig cfg;
  Dense in, t1, t2, out;
  std::vector<Dense> b1, b2;
  Param class_table;

  Denoiser() = default;
  Denoiser(const DenoiserConfig& c, Rng& rng) : cfg(c) {
    if (c.time_dim % 2 != 0) throw DomainError("Denoiser: time_dim must be even");
    in = Dense(c.dim, c.hidden, rng, "den.in");
    t1 = Dense(c.time_dim, c.hidden, rng, "den.t1");
    t2 = Dense(c.hidden, c.hidden, rng, "den.t2");
    for (std::size_t i = 0; i < c.blocks; ++i) {
      b1.emplace_back(c.hidden, c.hidden, rng, "den.b" + std::to_string(i) + ".1");
      b2.emplace_back(c.hidden, c.hidden, rng, "den.b" + std::to_string(i) + ".2", 0.1);
    }
    out = Dense(c.hidden, c.dim, rng, "den.out", 0.1);
    Matrix table(static_cast<Eigen::Index>(c.classes + 1), static_cast<Eigen::Index>(c.hidden));
    for (Eigen::Index i = 0; i < table.size(); ++i) table.data()[i] = 0.1 * rng.normal();
    table.row(0).setZero();
    class_table = Param("den.class", table);
    acts_.resize(2 * c.blocks + 2);
  }

  ParamList params() {
    ParamList p;
    for (Dense* d : {&in, &t1, &t2}) append(p, d->params());
    for (std::size_t i = 0; i < b1.size(); ++i) {
      append(p, b1[i].params());
      append(p, b2[i].params());
    }
    append(p, out.params());
    p.push_back(&class_table);
    return p;
  }

  Matrix time_features(const std::vector<std::size_t>& t) const {
    Matrix f(static_cast<Eigen::Index>(t.size()), static_cast<Eigen::Index>(cfg.time_dim));
    const std::size_t half = cfg.time_dim / 2;
    for (std::size_t r = 0; r < t.size(); ++r)
      for (std::size_t i = 0; i < half; ++i) {
        const double rate = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(half));
        const double a = static_cast<double>(t[r]) * rate;
        f(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(i)) = std::sin(a);
        f(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(half + i)) = std::cos(a);
      }
    return f;
  }

  /// ε prediction for a batch; `classes` holds class ids or kNullClass.
  Matrix forward(const Matrix& zt, const std::vector<std::size_t>& t, const std::vector<int>& classes) {
    check(zt, t, classes);
    rows_.clear();
    for (int c : classes) rows_.push_back(class_row(c));
    Matrix h = in.forward(zt) + t2.forward(acts_[0].forward(t1.forward(time_features(t))));
    for (std::size_t r = 0; r < rows_.size(); ++r) h.row(static_cast<Eigen::Index>(r)) += class_table.value.row(static_cast<Eigen::Index>(rows_[r]));
    for (std::size_t i = 0; i < b1.size(); ++i)
      h += b2[i].forward(acts_[2 + 2 * i].forward(b1[i].forward(acts_[1 + 2 * i].forward(h))));
    return out.forward(acts_.back().forward(h));
  }

  /// Inference without caching.
  Matrix apply(const Matrix& zt, const std::vector<std::size_t>& t, const std::vector<int>& classes) const {
    check(zt, t, classes);
    Matrix h = in.apply(zt) + t2.apply(SiLU::apply(t1.apply(time_features(t))));
    for (std::size_t r = 0; r < classes.size(); ++r)
      h.row(static_cast<Eigen::Index>(r)) += class_table.value.row(static_cast<Eigen::Index>(class_row(classes[r])));
    for (std::size_t i = 0; i < b1.size(); ++i) h += b2[i].apply(SiLU::apply(b1[i].apply(SiLU::apply(h))));
    return out.apply(SiLU::apply(h));
  }

  void backward(const Matrix& deps) {
    Matrix dh = acts_.back().backward(out.backward(deps));
    for (std::size_t k = b1.size(); k-- > 0;)
      dh += acts_[1 + 2 * k].backward(b1[k].backward(acts_[2 + 2 * k].backward(b2[k].backward(dh))));
    for (std::size_t r = 0; r < rows_.size(); ++r)
      if (rows_[r] != 0) class_table.grad.row(static_cast<Eigen::Index>(rows_[r])) += dh.row(static_cast<Eigen::Index>(r));
    in.backward(dh);
    t1.backward(acts_[0].backward(t2.backward(dh)));
  }

 private:
  void check(const Matrix& zt, const std::vector<std::size_t>& t, const std::vector<int>& classes) const {
    require_shape(zt, -1, static_cast<Eigen::Index>(cfg.dim), "Denoiser");
    if (t.size() != static_cast<std::size_t>(zt.rows()) || classes.size() != t.size())
      throw DomainError("Denoiser: batch size mismatch");
    for (int c : classes)
      if (c >= static_cast<int>(cfg.classes)) throw DomainError("Denoiser: class id out of range");
  }

  std::vector<SiLU> acts_;
  std::vector<std::size_t> rows_;
};

/// One optimizer step on the noise-prediction MSE. Each class is replaced by
/// the null class with probability cfg.cond_dropout.
inline double diffusion_train_step(Denoiser& model, AdamState& opt, const Matrix& z0, const std::vector<int>& classes,
                                   const BetaSchedule& s, Rng& rng) {
  if (z0.rows() == 0) throw DomainError("diffusion_train_step: empty batch");
  if (classes.size() != static_cast<std::size_t>(z0.rows())) throw DomainError("diffusion_train_step: size mismatch");
  std::vector<std::size_t> t(classes.size());
  std::vector<int> c(classes.size());
  for (std::size_t i = 0; i < t.size(); ++i) {
    t[i] = 1 + rng.below(s.T());
    c[i] = rng.uniform() < model.cfg.cond_dropout ? kNullClass : classes[i];
  }
  const Matrix eps = standard_normal(rng, z0.rows(), z0.cols());
  Matrix zt(z0.rows(), z0.cols());
  for (Eigen::Index i = 0; i < z0.rows(); ++i)
    zt.row(i) = std::sqrt(s.ab(t[static_cast<std::size_t>(i)])) * z0.row(i) +
                std::sqrt(1.0 - s.ab(t[static_cast<std::size_t>(i)])) * eps.row(i);
  const ParamList ps = model.params();
  zero_grads(ps);
  const LossGrad lg = mse_loss(model.forward(zt, t, c), eps);
  model.backward(lg.grad);
  model.class_table.grad.row(0).setZero();
  adam_step(opt, ps);
  model.class_table.value.row(0).setZero();
  return lg.loss;
}

/// Guided noise estimate for a batch sharing one non-null class.
inline Matrix cfg_noise(const Matrix& zt, std::size_t t, int class_id, double omega, const Denoiser& model) {
  if (class_id < 0) throw DomainError("cfg_noise: the null class cannot be a condition");
  const std::vector<std::size_t> ts(static_cast<std::size_t>(zt.rows()), t);
  const Matrix cond = model.apply(zt, ts, std::vector<int>(ts.size(), class_id));
  if (omega == 0.0) return cond;
  return cfg_combine(cond, model.apply(zt, ts, std::vector<int>(ts.size(), kNullClass)), omega);
}

/// Ancestral sampling from pure noise. kNullClass gives the unconditional
/// model; a class id uses guidance weight ω.
inline Matrix sample(const Denoiser& model, const BetaSchedule& s, int class_id, double omega, std::size_t count,
                     Rng& rng) {
  Matrix z = standard_normal(rng, static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(model.cfg.dim));
  const std::vector<int> nulls(count, kNullClass);
  for (std::size_t t = s.T(); t >= 1; --t) {
    const Matrix eps = class_id < 0 ? model.apply(z, std::vector<std::size_t>(count, t), nulls)
                                    : cfg_noise(z, t, class_id, omega, model);
    z = p_sample_step(z, t, eps, s, rng);
  }
  return z;
}

/// Per-dimension standardization of latents ahead of diffusion.
struct LatentScaler {
  RowVec mean;
  RowVec scale;

  static LatentScaler fit(const Matrix& z) {
    if (z.rows() < 2) throw DomainError("LatentScaler::fit: need at least two rows");
    LatentScaler s;
    s.mean = z.colwise().mean();
    s.scale = ((z.rowwise() - s.mean).array().square().colwise().sum() / static_cast<double>(z.rows() - 1)).sqrt();
    for (Eigen::Index i = 0; i < s.scale.size(); ++i)
      if (!(s.scale(i) > 1e-12)) s.scale(i) = 1.0;
    return s;
  }
  Matrix forward(const Matrix& z) const { return (z.rowwise() - mean).array().rowwise() / scale.array(); }
  Matrix inverse(const Matrix& u) const { return (u.array().rowwise() * scale.array()).matrix().rowwise() + mean; }
};

}  // namespace airfoilgen
