#pragma once

// Training stages, checkpoint bundles, sampling and the experiment runners
// (reconstruction, conditional accuracy, fidelity/diversity, optimization
// initialization).

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <functional>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "optimize.hpp"
#include "svg.hpp"

namespace airfoilgen {

using Logger = std::function<void(const std::string&)>;

inline std::string path_join(const std::string& dir, const std::string& name) {
  return (std::filesystem::path(dir) / name).string();
}

inline void ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
}

inline std::string format_row(const std::vector<double>& v) {
  std::string out;
  char buf[40];
  for (std::size_t i = 0; i < v.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", v[i]);
    if (i) out += ',';
    out += buf;
  }
  return out + "\n";
}

// ---------------------------------------------------------------------------
// RVQ stage
// ---------------------------------------------------------------------------

inline Matrix neighbourhood_rows(const std::vector<const DatasetRecord*>& recs, std::size_t window) {
  if (recs.empty()) throw DomainError("neighbourhood_rows: no records");
  const auto per = static_cast<Eigen::Index>(recs[0]->profile.size());
  Matrix out(per * static_cast<Eigen::Index>(recs.size()), static_cast<Eigen::Index>(2 * window));
  for (std::size_t i = 0; i < recs.size(); ++i) {
    const Matrix o = gather_neighbors(recs[i]->profile, window);
    if (o.rows() != per) throw DomainError("neighbourhood_rows: profile lengths differ");
    out.middleRows(static_cast<Eigen::Index>(i) * per, per) = o;
  }
  return out;
}

inline Matrix record_embeddings(const RvqModel& rvq, const Profile& p) {
  return rvq.quantize(gather_neighbors(p, rvq.cfg.window));
}

inline nlohmann::json rvq_sidecar(const RvqConfig& c) {
  return {{"window", c.window}, {"depth", c.depth}, {"codes", c.codes}, {"code_dim", c.code_dim},
          {"hidden", c.hidden}};
}

inline void save_rvq(const std::string& dir, RvqModel& m) {
  ensure_dir(dir);
  save_checkpoint(path_join(dir, "rvq.bin"), m.params());
  write_file(path_join(dir, "rvq.json"), rvq_sidecar(m.cfg).dump(2) + "\n");
}

inline RvqModel load_rvq(const std::string& dir) {
  RvqConfig c;
  try {
    const auto j = nlohmann::json::parse(read_file(path_join(dir, "rvq.json")));
    c.window = j.at("window");
    c.depth = j.at("depth");
    c.codes = j.at("codes");
    c.code_dim = j.at("code_dim");
    c.hidden = j.at("hidden");
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("rvq sidecar: ") + e.what());
  }
  Rng rng(0);
  RvqModel m(c, rng);
  load_checkpoint(path_join(dir, "rvq.bin"), m.params());
  return m;
}

struct RvqStage {
  RvqModel model;
  std::vector<RvqEpoch> curve;
};

/// Trains on a seeded subsample of the training-split neighbourhoods.
inline RvqStage train_rvq_stage(const Dataset& ds, const PipelineConfig& c, Rng& rng, const Logger& log = {}) {
  const Matrix all = neighbourhood_rows(ds.split(Split::kTrain), c.rvq.window);
  Matrix rows = all;
  if (c.rvq_rows > 0 && static_cast<std::size_t>(all.rows()) > c.rvq_rows) {
    std::vector<std::size_t> idx(static_cast<std::size_t>(all.rows()));
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    shuffle(idx, rng);
    idx.resize(c.rvq_rows);
    std::sort(idx.begin(), idx.end());
    rows.resize(static_cast<Eigen::Index>(idx.size()), all.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) rows.row(static_cast<Eigen::Index>(i)) = all.row(static_cast<Eigen::Index>(idx[i]));
  }
  RvqStage st{RvqModel(c.rvq, rng), {}};
  AdamState opt;
  opt.lr = c.rvq.lr;
  for (std::size_t e = 0; e < c.rvq_epochs; ++e) {
    const auto ep = train_rvq(st.model, opt, rows, 1, c.rvq_batch, rng);
    st.curve.push_back(ep[0]);
    if (log) log("rvq epoch " + std::to_string(e + 1) + " loss " + std::to_string(ep[0].total));
  }
  return st;
}

// ---------------------------------------------------------------------------
// Autoencoder stage
// ---------------------------------------------------------------------------

inline void save_ae(const std::string& dir, Autoencoder& m) {
  ensure_dir(dir);
  save_checkpoint(path_join(dir, "ae.bin"), m.params());
  write_file(path_join(dir, "ae.json"), ae_sidecar(m).dump(2) + "\n");
}

inline Autoencoder load_ae(const std::string& dir) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_file(path_join(dir, "ae.json")));
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("ae sidecar: ") + e.what());
  }
  Autoencoder m = ae_from_sidecar(j);
  load_checkpoint(path_join(dir, "ae.bin"), m.params());
  return m;
}

inline std::vector<AeExample> ae_examples(const Autoencoder& ae, const RvqModel& rvq,
                                          const std::vector<const DatasetRecord*>& recs) {
  std::vector<AeExample> out;
  out.reserve(recs.size());
  for (const DatasetRecord* r : recs) out.push_back(ae.prepare(record_embeddings(rvq, r->profile), r->meta, r->coeffs));
  return out;
}

inline AeConfig ae_config(const PipelineConfig& c) {
  AeConfig a = c.ae;
  a.profile_len = c.profile_len;
  a.code_dim = c.rvq.code_dim;
  a.delta_x = c.delta_x;
  return a;
}

struct AeStage {
  Autoencoder model;
  std::vector<AeEpoch> curve;
};

inline AeStage train_ae_stage(const Dataset& ds, const RvqModel& rvq, const PipelineConfig& c, Rng& rng,
                              const Logger& log = {}) {
  const auto train = ds.split(Split::kTrain);
  if (train.empty()) throw DomainError("train_ae_stage: empty training split");
  std::vector<MetaParams> metas;
  for (const DatasetRecord* r : train) metas.push_back(r->meta);
  const AeConfig cfg = ae_config(c);
  AeStage st{Autoencoder(cfg, MetaQuantizer::fit(metas, cfg.bins), rng), {}};
  const std::vector<AeExample> ex = ae_examples(st.model, rvq, train);
  AdamState opt;
  st.curve = train_autoencoder(st.model, opt, ex, rng, [&](const AeEpoch& e) {
    if (log)
      log("ae epoch " + std::to_string(e.epoch) + " total " + std::to_string(e.train.total) + " ce " +
          std::to_string(e.train.ce) + " mse " + std::to_string(e.train.mse));
  });
  return st;
}

inline Profile decoded_profile(const CsRep& cs, std::size_t len) { return resample_arclength(sweep_envelope(cs), len); }

struct ReconStats {
  double mean_chd = 0.0;
  double max_chd = 0.0;
  double mean_hd = 0.0;
  std::size_t count = 0;
};

inline ReconStats reconstruction_stats(const Autoencoder& ae, const RvqModel& rvq,
                                       const std::vector<const DatasetRecord*>& recs, std::size_t threads = 1) {
  if (recs.empty()) throw DomainError("reconstruction_stats: no records");
  std::vector<double> chd(recs.size()), hd(recs.size());
  parallel_for(recs.size(), threads, [&](std::size_t i) {
    const auto d = ae.decode(ae.encode(record_embeddings(rvq, recs[i]->profile)));
    const Profile p = decoded_profile(d.cs, recs[i]->profile.size());
    chd[i] = chamfer(recs[i]->profile.points, p.points);
    hd[i] = hausdorff(recs[i]->profile.points, p.points);
  });
  ReconStats s;
  s.count = recs.size();
  for (std::size_t i = 0; i < recs.size(); ++i) {
    s.mean_chd += chd[i] / static_cast<double>(recs.size());
    s.mean_hd += hd[i] / static_cast<double>(recs.size());
    s.max_chd = std::max(s.max_chd, chd[i]);
  }
  return s;
}

// ---------------------------------------------------------------------------
// Diffusion stage
// ---------------------------------------------------------------------------

struct DiffusionBundle {
  Denoiser model;
  BetaSchedule schedule;
  LatentScaler scaler;
  double beta_min = 1e-4, beta_max = 0.02;
};

inline Matrix encode_records(const Autoencoder& ae, const RvqModel& rvq, const std::vector<const DatasetRecord*>& recs) {
  Matrix z(static_cast<Eigen::Index>(recs.size()), static_cast<Eigen::Index>(ae.cfg.d_z));
  for (std::size_t i = 0; i < recs.size(); ++i)
    z.row(static_cast<Eigen::Index>(i)) = ae.encode(record_embeddings(rvq, recs[i]->profile));
  return z;
}

inline void save_diffusion(const std::string& dir, DiffusionBundle& b) {
  ensure_dir(dir);
  save_checkpoint(path_join(dir, "diffusion.bin"), b.model.params());
  const DenoiserConfig& c = b.model.cfg;
  const nlohmann::json j = {
      {"dim", c.dim},         {"hidden", c.hidden},
      {"blocks", c.blocks},   {"time_dim", c.time_dim},
      {"classes", c.classes}, {"T", b.schedule.T()},
      {"beta_min", b.beta_min}, {"beta_max", b.beta_max},
      {"scaler_mean", std::vector<double>(b.scaler.mean.data(), b.scaler.mean.data() + b.scaler.mean.size())},
      {"scaler_scale", std::vector<double>(b.scaler.scale.data(), b.scaler.scale.data() + b.scaler.scale.size())}};
  write_file(path_join(dir, "diffusion.json"), j.dump(2) + "\n");
}

inline DiffusionBundle load_diffusion(const std::string& dir) {
  DenoiserConfig c;
  std::size_t T = 0;
  double bmin = 0.0, bmax = 0.0;
  std::vector<double> mean, scale;
  try {
    const auto j = nlohmann::json::parse(read_file(path_join(dir, "diffusion.json")));
    c.dim = j.at("dim");
    c.hidden = j.at("hidden");
    c.blocks = j.at("blocks");
    c.time_dim = j.at("time_dim");
    c.classes = j.at("classes");
    T = j.at("T");
    bmin = j.at("beta_min");
    bmax = j.at("beta_max");
    mean = j.at("scaler_mean").get<std::vector<double>>();
    scale = j.at("scaler_scale").get<std::vector<double>>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("diffusion sidecar: ") + e.what());
  }
  if (mean.size() != c.dim || scale.size() != c.dim) throw IoError("diffusion sidecar: scaler size differs from dim");
  Rng rng(0);
  DiffusionBundle b{Denoiser(c, rng), make_schedule(T, bmin, bmax), {}, bmin, bmax};
  b.scaler.mean = Eigen::Map<const RowVec>(mean.data(), static_cast<Eigen::Index>(mean.size()));
  b.scaler.scale = Eigen::Map<const RowVec>(scale.data(), static_cast<Eigen::Index>(scale.size()));
  load_checkpoint(path_join(dir, "diffusion.bin"), b.model.params());
  return b;
}

struct DiffusionStage {
  DiffusionBundle bundle;
  std::vector<double> curve;  // mean loss per 100 steps
};

inline DiffusionStage train_diffusion_stage(const Dataset& ds, const Autoencoder& ae, const RvqModel& rvq,
                                            const PipelineConfig& c, Rng& rng, const Logger& log = {}) {
  const auto train = ds.split(Split::kTrain);
  const Matrix z = encode_records(ae, rvq, train);
  DenoiserConfig dc = c.den;
  dc.dim = ae.cfg.d_z;
  dc.classes = ds.manifest.grid.classes();
  DiffusionStage st{{Denoiser(dc, rng), make_schedule(c.diffusion_T, c.beta_min, c.beta_max), LatentScaler::fit(z),
                     c.beta_min, c.beta_max},
                    {}};
  const Matrix u = st.bundle.scaler.forward(z);
  AdamState opt;
  opt.lr = dc.lr;
  double window = 0.0;
  Matrix batch(static_cast<Eigen::Index>(dc.batch), u.cols());
  std::vector<int> classes(dc.batch);
  for (std::size_t step = 1; step <= dc.steps; ++step) {
    for (std::size_t i = 0; i < dc.batch; ++i) {
      const std::size_t k = rng.below(train.size());
      batch.row(static_cast<Eigen::Index>(i)) = u.row(static_cast<Eigen::Index>(k));
      classes[i] = train[k]->class_id;
    }
    window += diffusion_train_step(st.bundle.model, opt, batch, classes, st.bundle.schedule, rng);
    if (step % 100 == 0 || step == dc.steps) {
      const std::size_t len = step % 100 == 0 ? 100 : step % 100;
      st.curve.push_back(window / static_cast<double>(len));
      if (log && step % 1000 == 0) log("diffusion step " + std::to_string(step) + " loss " + std::to_string(st.curve.back()));
      window = 0.0;
    }
  }
  return st;
}

// ---------------------------------------------------------------------------
// Generation
// ---------------------------------------------------------------------------

struct Generated {
  RowVec z;
  Autoencoder::Decoded shape;
  AeroLabel label;
};

/// Samples latents (class or kNullClass), undoes the latent scaling and
/// decodes through the autoencoder.
inline std::vector<Generated> generate(const DiffusionBundle& b, const Autoencoder& ae, int class_id, double omega,
                                       std::size_t count, Rng& rng, double reynolds = kDefaultReynolds) {
  if (count == 0) return {};
  const Matrix z = b.scaler.inverse(sample(b.model, b.schedule, class_id, omega, count, rng));
  std::vector<Generated> out(count);
  for (std::size_t i = 0; i < count; ++i) {
    out[i].z = z.row(static_cast<Eigen::Index>(i));
    out[i].shape = ae.decode(out[i].z);
    out[i].label = eval_surrogate(out[i].shape.cs, reynolds);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Experiment runners
// ---------------------------------------------------------------------------

struct ConditionalReport {
  double omega = 3.0;
  std::vector<double> accuracy;       // per class at omega
  std::vector<double> accuracy_zero;  // per class at omega = 0
  double mean = 0.0, worst = 0.0, mean_zero = 0.0, worst_zero = 0.0;
  struct Point {
    int target;
    double omega;
    double cl, cd;
    int hit_class;
  };
  std::vector<Point> scatter;
};

/// Both guidance weights share the per-class noise stream, so the comparison
/// is paired.
inline ConditionalReport run_conditional_eval(const DiffusionBundle& b, const Autoencoder& ae, const ClassGrid& grid,
                                              std::size_t per_class, double omega, std::uint64_t seed,
                                              double reynolds = kDefaultReynolds, const Logger& log = {}) {
  ConditionalReport rep;
  rep.omega = omega;
  const std::size_t K = grid.classes();
  if (K == 0 || per_class == 0) throw DomainError("run_conditional_eval: empty grid or count");
  for (std::size_t k = 0; k < K; ++k) {
    for (const double w : {omega, 0.0}) {
      Rng rng = Rng(seed, 7).fork(k);
      const auto gen = generate(b, ae, static_cast<int>(k), w, per_class, rng, reynolds);
      std::vector<AeroLabel> labels;
      for (const Generated& g : gen) {
        labels.push_back(g.label);
        rep.scatter.push_back({static_cast<int>(k), w, g.label.cl, g.label.cd, classify(g.label, grid).class_id});
      }
      const double acc = conditional_accuracy(labels, PerformanceClass::of(static_cast<int>(k)), grid);
      (w == omega ? rep.accuracy : rep.accuracy_zero).push_back(acc);
      if (omega == 0.0) {
        rep.accuracy_zero.push_back(acc);
        break;
      }
    }
    if (log)
      log("class " + std::to_string(k) + " accuracy " + std::to_string(rep.accuracy.back()) + " (omega 0: " +
          std::to_string(rep.accuracy_zero.back()) + ")");
  }
  auto summarize = [](const std::vector<double>& v, double& mean, double& worst) {
    mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    worst = *std::min_element(v.begin(), v.end());
  };
  summarize(rep.accuracy, rep.mean, rep.worst);
  summarize(rep.accuracy_zero, rep.mean_zero, rep.worst_zero);
  return rep;
}

struct OptimizationExperiment {
  std::vector<OptimizationResult> generated, random;
  double success_generated = 0.0, success_random = 0.0;
  double median_iter_generated = 0.0, median_iter_random = 0.0;
};

/// Paired runs toward held-out labels: a conditional sample of the target's
/// class versus a uniform draw over valid anchors and coefficient boxes.
/// Median iterations count failed runs at the iterations they used.
inline OptimizationExperiment run_optimization_experiment(const DiffusionBundle& b, const Autoencoder& ae,
                                                          const Dataset& ds, const PipelineConfig& c,
                                                          const Logger& log = {}) {
  auto pool = ds.split(Split::kTest);
  if (pool.size() < c.opt_targets) pool = ds.split(Split::kTrain);
  if (pool.size() < c.opt_targets) throw DomainError("run_optimization_experiment: not enough targets");
  Rng pick(c.seed, 11);
  shuffle(pool, pick);
  pool.resize(c.opt_targets);
  OptimizerOptions opt;
  opt.budget = c.opt_budget;
  opt.tol = c.opt_tol;
  opt.basis = c.opt_basis;
  opt.delta_x = ds.manifest.delta_x;
  opt.reynolds = ds.manifest.reynolds;
  const auto th = SmoothnessThresholds::for_spacing(opt.delta_x);
  OptimizationExperiment ex;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const AeroLabel target = pool[i]->label;
    Rng grng = Rng(c.seed, 13).fork(i);
    const auto g = generate(b, ae, pool[i]->class_id, c.omega, 1, grng, opt.reynolds);
    ex.generated.push_back(optimize_to_target(target, g[0].shape.meta, g[0].shape.coeffs, opt, "generated"));
    Rng rrng = Rng(c.seed, 17).fork(i);
    const MetaParams m = sample_valid_meta(rrng, opt.delta_x, th);
    ex.random.push_back(optimize_to_target(target, m, sample_valid_coeffs(rrng, m, opt.delta_x, th), opt, "random"));
    if (log)
      log("target " + std::to_string(i) + " generated " + (ex.generated.back().success ? "ok" : "fail") + " in " +
          std::to_string(ex.generated.back().iterations) + ", random " + (ex.random.back().success ? "ok" : "fail") +
          " in " + std::to_string(ex.random.back().iterations));
  }
  auto summarize = [](const std::vector<OptimizationResult>& v, double& rate, double& med) {
    std::vector<double> it;
    std::size_t ok = 0;
    for (const auto& r : v) {
      ok += r.success;
      it.push_back(static_cast<double>(r.iterations));
    }
    rate = static_cast<double>(ok) / static_cast<double>(v.size());
    med = median(it);
  };
  summarize(ex.generated, ex.success_generated, ex.median_iter_generated);
  summarize(ex.random, ex.success_random, ex.median_iter_random);
  return ex;
}

struct FidelityReport {
  double fidelity = 0.0;
  double diversity = 0.0;
  std::size_t generated = 0, reference = 0;
};

inline FidelityReport run_unconditional_eval(const DiffusionBundle& b, const Autoencoder& ae, const Dataset& ds,
                                             const PipelineConfig& c) {
  Rng rng(c.seed, 19);
  const auto gen = generate(b, ae, kNullClass, 0.0, c.fidelity_samples, rng, ds.manifest.reynolds);
  std::vector<PointSet> g, ref;
  for (const Generated& s : gen) g.push_back(decoded_profile(s.shape.cs, ds.manifest.profile_len).points);
  const auto train = ds.split(Split::kTrain);
  const std::size_t stride = std::max<std::size_t>(1, train.size() / std::max<std::size_t>(1, c.fidelity_reference));
  for (std::size_t i = 0; i < train.size() && ref.size() < c.fidelity_reference; i += stride)
    ref.push_back(train[i]->profile.points);
  FidelityReport r;
  r.generated = g.size();
  r.reference = ref.size();
  r.fidelity = fidelity(g, ref);
  r.diversity = diversity(g);
  return r;
}

}  // namespace airfoilgen
