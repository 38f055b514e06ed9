// Acceptance run: one PASS/FAIL line per criterion. Criteria 6-10 drive the
// CLI end to end on the desk configuration and read its reports.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>

#include "airfoilgen/airfoilgen.hpp"
#include "gradcheck.hpp"
#include "oracles.hpp"

using namespace airfoilgen;
namespace fs = std::filesystem;
using clk = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

double since(clk::time_point t) { return std::chrono::duration<double>(clk::now() - t).count(); }

std::string num(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Matrix random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double s = 1.0) {
  Matrix m(r, c);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = s * rng.normal();
  return m;
}

PointSet random_set(Rng& rng, std::size_t n) {
  PointSet p(n);
  for (auto& q : p) q = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
  // an occasional duplicate exercises ties
  if (n > 3 && rng.below(4) == 0) p[n - 1] = p[0];
  return p;
}

// ---------------------------------------------------------------------------
// 1. validity by construction
// ---------------------------------------------------------------------------

Outcome criterion_validity() {
  const auto th = SmoothnessThresholds::for_spacing(kDefaultDeltaX);
  Rng rng(2026, 1);
  const auto t = clk::now();
  std::size_t failures = 0;
  for (int i = 0; i < 10000; ++i) {
    try {
      const MetaParams m = sample_valid_meta(rng, kDefaultDeltaX, th);
      const CoeffSeq c = sample_valid_coeffs(rng, m, kDefaultDeltaX, th);
      const CsRep cs = decode_coeffs(m, c, kDefaultDeltaX, th);
      failures += !validate(sweep_envelope(cs), cs, th).all();
    } catch (const std::exception&) {
      ++failures;
    }
  }
  const double secs = since(t);
  return {failures == 0 && secs <= 120.0,
          "10000 random decodes, " + std::to_string(failures) + " invalid, " + num("%.1f", secs) + "s (limit 120s)"};
}

// ---------------------------------------------------------------------------
// 2. geometry round trip
// ---------------------------------------------------------------------------

Outcome criterion_roundtrip() {
  Rng rng(2026, 2);
  double worst_chd = 0.0, worst_hd = 0.0;
  std::size_t bad = 0;
  for (int i = 0; i < 100; ++i) {
    const double m = rng.uniform(0.0, 0.06), p = rng.uniform(0.2, 0.6), th = rng.uniform(0.08, 0.20);
    try {
      const Profile src = naca4_profile(m, p, th, kDefaultProfileLength);
      const Profile back = resample_arclength(sweep_envelope(extract_csrep(src, kDefaultDeltaX)), src.size());
      const double chd = chamfer(src.points, back.points), hd = hausdorff(src.points, back.points);
      worst_chd = std::max(worst_chd, chd);
      worst_hd = std::max(worst_hd, hd);
      bad += chd > 5e-3 || hd > 2e-2;
    } catch (const std::exception&) {
      ++bad;
    }
  }
  return {bad == 0, "100 NACA-4 sections, max ChD " + num("%.3e", worst_chd) + " (<= 5e-3), max HD " +
                        num("%.3e", worst_hd) + " (<= 2e-2), " + std::to_string(bad) + " over"};
}

// ---------------------------------------------------------------------------
// 3. metric oracles
// ---------------------------------------------------------------------------

Outcome criterion_metrics() {
  Rng rng(2026, 3);
  std::size_t mismatches = 0;
  for (int t = 0; t < 200; ++t) {
    const PointSet p = random_set(rng, 1 + rng.below(50)), q = random_set(rng, 1 + rng.below(50));
    mismatches += chamfer(p, q) != oracle::chamfer(p, q);
    mismatches += hausdorff(p, q) != oracle::hausdorff(p, q);

    std::vector<PointSet> gen, data;
    for (std::size_t i = 0, n = 2 + rng.below(3); i < n; ++i) gen.push_back(random_set(rng, 1 + rng.below(50)));
    for (std::size_t i = 0, n = 1 + rng.below(4); i < n; ++i) data.push_back(random_set(rng, 1 + rng.below(50)));
    double fid = 0.0;
    for (const auto& g : gen) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& d : data) best = std::min(best, oracle::hausdorff(g, d));
      fid += best;
    }
    mismatches += fidelity(gen, data) != fid / static_cast<double>(gen.size());
    double div = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < gen.size(); ++i)
      for (std::size_t j = i + 1; j < gen.size(); ++j, ++pairs) div += oracle::hausdorff(gen[i], gen[j]);
    mismatches += diversity(gen) != div / static_cast<double>(pairs);
  }
  return {mismatches == 0, "200 instances x 4 metrics vs O(n^2) brute force, " + std::to_string(mismatches) +
                               " inexact"};
}

// ---------------------------------------------------------------------------
// 4. gradient integrity
// ---------------------------------------------------------------------------

Outcome criterion_gradients() {
  Rng rng(2026, 4);
  double worst = 0.0;
  std::string worst_name;
  auto note = [&](const std::string& name, double e) {
    if (e > worst || worst_name.empty()) {
      worst = std::max(worst, e);
      worst_name = name;
    }
  };
  auto probe = [](const Matrix& y, const Matrix& r) { return y.cwiseProduct(r).sum(); };

  {
    Dense d(5, 3, rng, "dense");
    d.b.value = random_matrix(rng, 1, 3);
    Matrix x = random_matrix(rng, 4, 5);
    const Matrix r = random_matrix(rng, 4, 3);
    d.forward(x);
    const Matrix dx = d.backward(r);
    auto loss = [&] { return probe(d.apply(x), r); };
    note("dense.x", oracle::grad_rel_error(x, dx, loss));
    note("dense.W", oracle::grad_rel_error(d.W.value, d.W.grad, loss));
    note("dense.b", oracle::grad_rel_error(d.b.value, d.b.grad, loss));
  }
  {
    LayerNorm ln(6, "ln");
    ln.gamma.value = random_matrix(rng, 1, 6);
    ln.beta.value = random_matrix(rng, 1, 6);
    Matrix x = random_matrix(rng, 3, 6);
    const Matrix r = random_matrix(rng, 3, 6);
    ln.forward(x);
    const Matrix dx = ln.backward(r);
    auto loss = [&] { return probe(ln.apply(x), r); };
    note("layernorm.x", oracle::grad_rel_error(x, dx, loss));
    note("layernorm.gamma", oracle::grad_rel_error(ln.gamma.value, ln.gamma.grad, loss));
    note("layernorm.beta", oracle::grad_rel_error(ln.beta.value, ln.beta.grad, loss));
  }
  {
    SiLU act;
    Matrix x = random_matrix(rng, 3, 7, 3.0);
    const Matrix r = random_matrix(rng, 3, 7);
    act.forward(x);
    const Matrix dx = act.backward(r);
    note("silu.x", oracle::grad_rel_error(x, dx, [&] { return probe(SiLU::apply(x), r); }));
  }
  {
    Attention att(4, rng, "attention");
    Matrix x = random_matrix(rng, 6, 4);
    const Matrix r = random_matrix(rng, 6, 4);
    att.forward(x, 3);
    const Matrix dx = att.backward(r);
    auto loss = [&] { return probe(att.forward(x, 3), r); };
    note("attention.x", oracle::grad_rel_error(x, dx, loss));
    for (Param* p : att.params()) {
      if (p == &att.k.b) {
        // softmax is blind to a key bias; both sides must vanish
        note(p->name, att.k.b.grad.norm() + oracle::numeric_grad(att.k.b.value, loss).norm());
        continue;
      }
      note(p->name, oracle::grad_rel_error(p->value, p->grad, loss));
    }
  }
  {
    Matrix z = random_matrix(rng, 5, 4);
    const std::vector<int> t{0, 3, 1, 1, 2};
    note("softmax_xent", oracle::grad_rel_error(z, softmax_xent(z, t).grad, [&] { return softmax_xent(z, t).loss; }));
    Matrix p = random_matrix(rng, 3, 4);
    const Matrix tt = random_matrix(rng, 3, 4);
    note("mse", oracle::grad_rel_error(p, mse_loss(p, tt).grad, [&] { return mse_loss(p, tt).loss; }));
  }
  {
    RvqConfig c;
    c.codes = 8;
    c.hidden = 6;
    RvqModel m(c, rng);
    const Matrix o = random_matrix(rng, 5, 10, 0.3);
    zero_grads(m.params());
    m.loss_and_grad(o);
    auto loss = [&] {
      RvqModel copy = m;
      return copy.loss_and_grad(o).total;
    };
    for (Dense* d : {&m.dec_in, &m.dec_mid, &m.dec_out})
      for (Param* p : d->params()) note("rvq." + p->name, oracle::grad_rel_error(p->value, p->grad, loss));
  }
  for (const bool attention : {false, true}) {
    AeConfig cfg;
    cfg.profile_len = 12;
    cfg.code_dim = 4;
    cfg.d_model = 8;
    cfg.enc_hidden = 8;
    cfg.d_z = 4;
    cfg.bins = 6;
    cfg.meta_hidden = 8;
    cfg.coeff_hidden = 8;
    cfg.history = 2;
    cfg.enc_attention = attention ? 1 : 0;
    const auto th = cfg.thresholds();
    std::vector<MetaParams> metas;
    for (int i = 0; i < 200; ++i) {
      MetaParams m = sample_valid_meta(rng, cfg.delta_x, th);
      complete_meta(m, decode_coeffs(m, sample_valid_coeffs(rng, m, cfg.delta_x, th), cfg.delta_x, th),
                    derive_counts(m, cfg.delta_x));
      metas.push_back(m);
    }
    Autoencoder model(cfg, MetaQuantizer::fit(metas, cfg.bins), rng);
    std::vector<AeExample> ex;
    for (int i = 0; i < 2; ++i) {
      MetaParams m = sample_valid_meta(rng, cfg.delta_x, th);
      const CoeffSeq c = sample_valid_coeffs(rng, m, cfg.delta_x, th);
      complete_meta(m, decode_coeffs(m, c, cfg.delta_x, th), derive_counts(m, cfg.delta_x));
      ex.push_back(model.prepare(random_matrix(rng, 12, 4, 0.3), m, c));
    }
    const std::vector<const AeExample*> batch{&ex[0], &ex[1]};
    const ParamList ps = model.params();
    zero_grads(ps);
    model.loss_and_grad(batch);
    std::vector<Matrix> analytic;
    for (Param* p : ps) analytic.push_back(p->grad);
    auto loss = [&] { return model.loss_and_grad(batch).total; };
    for (std::size_t i = 0; i < ps.size(); ++i)
      note(std::string(attention ? "ae+attn." : "ae.") + ps[i]->name,
           oracle::grad_rel_error(ps[i]->value, analytic[i], loss));
  }
  {
    DenoiserConfig cfg;
    cfg.dim = 3;
    cfg.hidden = 6;
    cfg.time_dim = 4;
    cfg.classes = 3;
    Denoiser d(cfg, rng);
    const Matrix zt = random_matrix(rng, 5, 3);
    const Matrix target = random_matrix(rng, 5, 3);
    const std::vector<std::size_t> t{1, 7, 300, 999, 40};
    const std::vector<int> cls{0, kNullClass, 2, 1, 2};
    const ParamList ps = d.params();
    zero_grads(ps);
    d.backward(mse_loss(d.forward(zt, t, cls), target).grad);
    auto loss = [&] { return mse_loss(d.apply(zt, t, cls), target).loss; };
    for (Param* p : ps) {
      if (p == &d.class_table) continue;
      note("denoiser." + p->name, oracle::grad_rel_error(p->value, p->grad, loss));
    }
    Matrix rows = d.class_table.value.bottomRows(3);
    const Matrix analytic = d.class_table.grad.bottomRows(3);
    note("denoiser.class_table", oracle::grad_rel_error(rows, analytic, [&] {
           d.class_table.value.bottomRows(3) = rows;
           return loss();
         }));
  }
  return {worst <= 1e-4, "worst relative error " + num("%.2e", worst) + " at " + worst_name + " (<= 1e-4)"};
}

// ---------------------------------------------------------------------------
// 5. diffusion sanity
// ---------------------------------------------------------------------------

Outcome criterion_diffusion() {
  const BetaSchedule s = make_schedule();
  std::string detail;
  bool ok = true;

  // (a) closed-form marginals against the iterated chain
  double worst_a = 0.0;
  for (std::size_t t : {std::size_t{100}, std::size_t{500}, s.T()}) {
    Rng a(2026, 50 + t), b(2026, 60 + t);
    const Eigen::Index N = 10000, D = 8;
    const Matrix z0 = Matrix::Constant(N, D, 100.0);
    const Matrix closed = q_sample(z0, t, standard_normal(a, N, D), s);
    Matrix chain = z0;
    for (std::size_t k = 1; k <= t; ++k) chain = std::sqrt(s.a(k)) * chain + std::sqrt(s.b(k)) * standard_normal(b, N, D);
    auto moments = [](const Matrix& m) {
      const double mean = m.mean();
      return std::pair{mean, (m.array() - mean).square().sum() / static_cast<double>(m.size() - 1)};
    };
    const auto [m1, v1] = moments(closed);
    const auto [m2, v2] = moments(chain);
    worst_a = std::max({worst_a, std::abs(m1 / m2 - 1.0), std::abs(v1 / v2 - 1.0)});
  }
  ok &= worst_a <= 0.01;
  detail += "(a) max moment deviation " + num("%.2f%%", 100.0 * worst_a);

  // (b) analytic Gaussian denoiser: E[eps | z_t] for z0 ~ N(mu, sigma^2)
  const double mu = 1.3, sigma = 0.4;
  Rng rb(2026, 70);
  Matrix z = standard_normal(rb, 5000, 1);
  for (std::size_t t = s.T(); t >= 1; --t) {
    const double ab = s.ab(t);
    const Matrix eps = std::sqrt(1.0 - ab) * (z.array() - std::sqrt(ab) * mu).matrix() / (ab * sigma * sigma + 1.0 - ab);
    z = p_sample_step(z, t, eps, s, rb);
  }
  const double err_b = std::abs(z.mean() - mu);
  ok &= err_b <= 0.05;
  detail += ", (b) mean error " + num("%.4f", err_b);

  // (c) toy two-Gaussian mixture
  Rng rng(2026, 80);
  DenoiserConfig cfg;
  cfg.dim = 2;
  cfg.hidden = 32;
  cfg.time_dim = 16;
  cfg.lr = 2e-3;
  Denoiser d(cfg, rng);
  AdamState opt;
  opt.lr = cfg.lr;
  const double mode[2][2] = {{-1.5, 0.5}, {1.5, -0.5}};
  const double sd = 0.15;
  for (int step = 0; step < 20000; ++step) {
    if (step == 15000) opt.lr = cfg.lr / 4;
    Matrix z0(128, 2);
    for (Eigen::Index i = 0; i < 128; ++i) {
      const auto k = rng.below(2);
      z0(i, 0) = mode[k][0] + sd * rng.normal();
      z0(i, 1) = mode[k][1] + sd * rng.normal();
    }
    diffusion_train_step(d, opt, z0, std::vector<int>(128, kNullClass), s, rng);
  }
  Rng gen(2026, 81);
  const Matrix zs = sample(d, s, kNullClass, 0.0, 2000, gen);
  double sum[2][2] = {}, cnt[2] = {};
  for (Eigen::Index i = 0; i < zs.rows(); ++i) {
    const int k = zs(i, 0) < 0.0 ? 0 : 1;
    sum[k][0] += zs(i, 0);
    sum[k][1] += zs(i, 1);
    cnt[k] += 1;
  }
  double err_c = 0.0;
  for (int k = 0; k < 2; ++k) {
    if (cnt[k] == 0) {
      err_c = std::numeric_limits<double>::infinity();
      break;
    }
    err_c = std::max({err_c, std::abs(sum[k][0] / cnt[k] - mode[k][0]), std::abs(sum[k][1] / cnt[k] - mode[k][1])});
  }
  ok &= err_c <= 0.05 && cnt[0] > 0 && cnt[1] > 0;
  detail += ", (c) mode error " + num("%.4f", err_c) + " (mass " + num("%.0f", cnt[0]) + "/" + num("%.0f", cnt[1]) + ")";
  return {ok, detail};
}

// ---------------------------------------------------------------------------
// 6-10. CLI chain
// ---------------------------------------------------------------------------

struct Chain {
  std::string cli, config, work;
  bool ok = true;
  std::string failed;
  double seconds = 0.0;
};

int run(const std::string& cmd, const std::string& log) {
  const std::string full = cmd + " >> '" + log + "' 2>&1";
  const int rc = std::system(full.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

void run_chain(Chain& ch, const std::string& dir, bool evaluate) {
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string log = (fs::path(dir) / "chain.log").string();
  const std::string base = "'" + ch.cli + "' --config '" + ch.config + "' --out-dir '" + dir + "' ";
  std::vector<std::string> steps = {"build-dataset", "train-rvq", "train-ae", "train-diffusion",
                                    "generate --classes all --omega 3 --count 16"};
  if (evaluate) steps.push_back("evaluate");
  const auto t = clk::now();
  for (const auto& s : steps) {
    const auto ts = clk::now();
    const int rc = run(base + s, log);
    std::cout << "  chain " << fs::path(dir).filename().string() << ": " << s << " exit " << rc << " in "
              << num("%.1f", since(ts)) << "s" << std::endl;
    if (rc != 0) {
      ch.ok = false;
      ch.failed = s + " (exit " + std::to_string(rc) + ", see " + log + ")";
      break;
    }
  }
  ch.seconds = since(t);
}

nlohmann::json read_report(const std::string& dir) {
  try {
    return nlohmann::json::parse(read_file((fs::path(dir) / "eval" / "report.json").string()));
  } catch (const std::exception&) {
    return {};
  }
}

Outcome criterion_reconstruction(const nlohmann::json& rep, const std::string& dir) {
  if (rep.empty()) return {false, "no evaluation report"};
  std::size_t train = 0;
  for (const auto& r : load_dataset((fs::path(dir) / "dataset").string(), false).records) train += r.split == Split::kTrain;
  const double chd = rep["reconstruction"]["test"]["mean_chd"];
  const std::size_t n = rep["reconstruction"]["test"]["count"];
  return {train >= 2000 && chd <= 1e-2, "trained on " + std::to_string(train) + " records (>= 2000), held-out mean ChD " +
                                             num("%.3e", chd) + " over " + std::to_string(n) + " (<= 1e-2)"};
}

Outcome criterion_conditional(const nlohmann::json& rep) {
  if (rep.empty()) return {false, "no evaluation report"};
  const auto& c = rep["conditional"];
  const double mean = c["mean"], mean0 = c["mean_omega0"], omega = c["omega"];
  const std::size_t bins = c["grid_bins"];
  return {bins == 3 && omega == 3.0 && mean >= 0.8 && mean >= mean0,
          std::to_string(bins) + "x" + std::to_string(bins) + " grid, omega " + num("%.1f", omega) + ": mean " +
              num("%.3f", mean) + " (>= 0.8), worst " + num("%.3f", c["worst"].get<double>()) + ", omega 0 mean " +
              num("%.3f", mean0)};
}

Outcome criterion_optimization(const nlohmann::json& rep) {
  if (rep.empty() || !rep.contains("optimization")) return {false, "no optimization report"};
  const auto& o = rep["optimization"];
  const double sg = o["success_generated"], sr = o["success_random"];
  const double mg = o["median_iterations_generated"], mr = o["median_iterations_random"];
  const std::size_t n = o["targets"];
  const double tol = o["tolerance"];
  return {n == 20 && tol == 2e-3 && sg > sr && mg < mr,
          std::to_string(n) + " targets at tol " + num("%.0e", tol) + ": success " + num("%.2f", sg) + " vs " +
              num("%.2f", sr) + ", median iterations " + num("%.1f", mg) + " vs " + num("%.1f", mr)};
}

Outcome criterion_determinism(const std::string& a, const std::string& b) {
  const std::vector<std::string> files = {
      "dataset/manifest.json",   "dataset/records.jsonl", "rvq/rvq.bin",           "rvq/rvq.json",
      "ae/ae.bin",               "ae/ae.json",            "diffusion/diffusion.bin", "diffusion/diffusion.json",
      "generated/embeddings.csv", "generated/csrep.jsonl", "generated/profiles.csv"};
  std::size_t same = 0;
  std::string diff;
  for (const auto& f : files) {
    try {
      if (read_file((fs::path(a) / f).string()) == read_file((fs::path(b) / f).string()))
        ++same;
      else
        diff += " " + f;
    } catch (const IoError&) {
      diff += " " + f + "(missing)";
    }
  }
  return {same == files.size(), std::to_string(same) + "/" + std::to_string(files.size()) + " artifacts byte-identical" +
                                    (diff.empty() ? "" : ", differing:" + diff)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"airfoilgen acceptance"};
  std::string cli, work = "acceptance_work", config;
  bool skip_chain = false;
  app.add_option("--cli", cli, "airfoilgen CLI binary")->required();
  app.add_option("--config", config, "desk configuration")->required();
  app.add_option("--work", work, "scratch directory");
  app.add_flag("--skip-chain", skip_chain, "run criteria 1-5 only");
  CLI11_PARSE(app, argc, argv);

  int failures = 0;
  auto report = [&](int n, const std::string& name, const Outcome& o) {
    failures += !o.pass;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << n << " (" << name << "): " << o.detail << std::endl;
  };
  auto guarded = [](const std::function<Outcome()>& f) {
    try {
      return f();
    } catch (const std::exception& e) {
      return Outcome{false, std::string("exception: ") + e.what()};
    }
  };

  report(1, "validity by construction", guarded(criterion_validity));
  report(2, "geometry round trip", guarded(criterion_roundtrip));
  report(3, "metric oracles", guarded(criterion_metrics));
  report(4, "gradient integrity", guarded(criterion_gradients));
  report(5, "diffusion sanity", guarded(criterion_diffusion));
  if (skip_chain) return failures ? 1 : 0;

  fs::create_directories(work);
  Chain first;
  first.cli = fs::absolute(cli).string();
  first.config = fs::absolute(config).string();
  first.work = fs::absolute(work).string();
  const std::string run1 = (fs::path(first.work) / "run1").string(), run2 = (fs::path(first.work) / "run2").string();
  run_chain(first, run1, true);
  const nlohmann::json rep = read_report(run1);
  report(6, "desk-scale reconstruction", guarded([&] { return criterion_reconstruction(rep, run1); }));
  report(7, "conditional control", guarded([&] { return criterion_conditional(rep); }));
  report(8, "optimization initialization", guarded([&] { return criterion_optimization(rep); }));

  Chain second = first;
  second.ok = true;
  run_chain(second, run2, false);
  report(9, "determinism", second.ok ? guarded([&] { return criterion_determinism(run1, run2); })
                                     : Outcome{false, "second run failed at " + second.failed});
  report(10, "end-to-end CLI",
         {first.ok && first.seconds <= 2700.0,
          first.ok ? "six-step chain in " + num("%.1f", first.seconds) + "s (limit 2700s)"
                   : "failed at " + first.failed});
  return failures ? 1 : 0;
}
