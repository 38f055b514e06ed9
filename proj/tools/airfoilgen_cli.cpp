// airfoilgen command line: dataset construction, training stages, sampling,
// evaluation, optimization, plotting and validation.
//
// Exit codes: 0 success, 2 validation failure, 3 I/O error, 4 config error.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>
#include <sstream>

#include "airfoilgen/airfoilgen.hpp"

using namespace airfoilgen;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;
constexpr int kExitConfig = 4;

// Random streams per command, so stages never share draws.
constexpr std::uint64_t kStreamRvq = 1, kStreamAe = 2, kStreamDiffusion = 3, kStreamAugment = 5,
                        kStreamGenerate = 23, kStreamOptimize = 29;

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
  std::string out_dir = "out";
};

struct Paths {
  std::string dataset, rvq, ae, diffusion;
};

using clk = std::chrono::steady_clock;

double since(clk::time_point t) { return std::chrono::duration<double>(clk::now() - t).count(); }

void log_line(const std::string& s) { std::cerr << s << std::endl; }

PipelineConfig resolve_config(const Globals& g) {
  PipelineConfig c = g.config.empty() ? PipelineConfig{} : load_config(g.config);
  if (g.seed) c.seed = *g.seed;
  if (g.threads) {
    if (*g.threads == 0) throw ConfigError("--threads must be positive");
    c.threads = *g.threads;
  }
  return c;
}

std::string or_default(const std::string& v, const Globals& g, const char* sub) {
  return v.empty() ? path_join(g.out_dir, sub) : v;
}

void write_json(const std::string& path, const nlohmann::json& j) { write_file(path, j.dump(2) + "\n"); }

std::string csv_header(const std::string& first, const std::vector<std::string>& rest) {
  std::string h = first;
  for (const auto& r : rest) h += "," + r;
  return h + "\n";
}

nlohmann::json label_json(const AeroLabel& l) { return {{"cl", l.cl}, {"cd", l.cd}}; }

std::vector<int> parse_classes(const std::string& list, std::size_t classes) {
  std::vector<int> out;
  if (list == "all") {
    for (std::size_t k = 0; k < classes; ++k) out.push_back(static_cast<int>(k));
    return out;
  }
  std::stringstream ss(list);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok == "null") {
      out.push_back(kNullClass);
      continue;
    }
    try {
      std::size_t used = 0;
      const int k = std::stoi(tok, &used);
      if (used != tok.size() || k < 0 || static_cast<std::size_t>(k) >= classes) throw std::invalid_argument(tok);
      out.push_back(k);
    } catch (const std::logic_error&) {
      throw ConfigError("--classes: '" + tok + "' is not a class id in [0, " + std::to_string(classes) + ") or null");
    }
  }
  if (out.empty()) throw ConfigError("--classes is empty");
  return out;
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

int cmd_build_dataset(const Globals& g, const std::string& out) {
  const PipelineConfig c = resolve_config(g);
  const auto t = clk::now();
  const Dataset ds = build_dataset(c);
  const std::string dir = or_default(out, g, "dataset");
  write_dataset(dir, ds);
  write_json(path_join(dir, "config.json"), config_json(c));
  log_line("build-dataset: " + std::to_string(ds.records.size()) + " records, " +
           std::to_string(ds.manifest.counts.at("discarded")) + " discarded, " + std::to_string(nonempty_classes(ds)) +
           " non-empty classes in " + std::to_string(since(t)) + "s -> " + dir);
  return kExitOk;
}

int cmd_augment(const Globals& g, const Paths& p, const std::string& out, double factor) {
  const PipelineConfig c = resolve_config(g);
  const Dataset base = load_dataset(or_default(p.dataset, g, "dataset"), true, c.threads);
  Rng rng(c.seed, kStreamAugment);
  const Dataset ds = augment(base, factor, rng, c);
  const std::string dir = or_default(out, g, "dataset_augmented");
  write_dataset(dir, ds);
  log_line("augment: " + std::to_string(base.records.size()) + " -> " + std::to_string(ds.records.size()) +
           " records, non-empty classes " + std::to_string(nonempty_classes(base)) + " -> " +
           std::to_string(nonempty_classes(ds)) + " -> " + dir);
  return kExitOk;
}

int cmd_train_rvq(const Globals& g, const Paths& p) {
  const PipelineConfig c = resolve_config(g);
  const Dataset ds = load_dataset(or_default(p.dataset, g, "dataset"), true, c.threads);
  Rng rng(c.seed, kStreamRvq);
  const auto t = clk::now();
  RvqStage st = train_rvq_stage(ds, c, rng, log_line);
  const std::string dir = or_default(p.rvq, g, "rvq");
  save_rvq(dir, st.model);
  std::string csv = "epoch,total,recon,reseeded\n";
  std::vector<double> curve;
  for (std::size_t e = 0; e < st.curve.size(); ++e) {
    csv += std::to_string(e + 1) + "," + format_row({st.curve[e].total, st.curve[e].recon,
                                                    static_cast<double>(st.curve[e].reseeded)});
    curve.push_back(st.curve[e].total);
  }
  write_file(path_join(dir, "loss.csv"), csv);
  plot_svg(curve_chart({{"rvq loss", curve}}, "RVQ training", "epoch", "loss"), path_join(dir, "loss.svg"));
  log_line("train-rvq: " + std::to_string(since(t)) + "s -> " + dir);
  return kExitOk;
}

int cmd_train_ae(const Globals& g, const Paths& p) {
  const PipelineConfig c = resolve_config(g);
  const Dataset ds = load_dataset(or_default(p.dataset, g, "dataset"), true, c.threads);
  const RvqModel rvq = load_rvq(or_default(p.rvq, g, "rvq"));
  Rng rng(c.seed, kStreamAe);
  const auto t = clk::now();
  AeStage st = train_ae_stage(ds, rvq, c, rng, log_line);
  const std::string dir = or_default(p.ae, g, "ae");
  save_ae(dir, st.model);
  std::string csv = "epoch,total,ce,mse,aux\n";
  std::vector<double> total, mse;
  for (const AeEpoch& e : st.curve) {
    csv += std::to_string(e.epoch) + "," + format_row({e.train.total, e.train.ce, e.train.mse, e.train.aux});
    total.push_back(e.train.total);
    mse.push_back(e.train.mse);
  }
  write_file(path_join(dir, "loss.csv"), csv);
  plot_svg(curve_chart({{"total", total}, {"mse", mse}}, "Autoencoder training", "epoch", "loss"),
           path_join(dir, "loss.svg"));
  nlohmann::json rep;
  for (Split s : {Split::kVal, Split::kTest}) {
    const auto recs = ds.split(s);
    if (recs.empty()) continue;
    const ReconStats r = reconstruction_stats(st.model, rvq, recs, c.threads);
    rep[split_name(s)] = {{"mean_chd", r.mean_chd}, {"max_chd", r.max_chd}, {"mean_hd", r.mean_hd}, {"count", r.count}};
    log_line(std::string("train-ae: ") + split_name(s) + " mean ChD " + std::to_string(r.mean_chd));
  }
  write_json(path_join(dir, "reconstruction.json"), rep);
  log_line("train-ae: " + std::to_string(since(t)) + "s -> " + dir);
  return kExitOk;
}

int cmd_train_diffusion(const Globals& g, const Paths& p) {
  const PipelineConfig c = resolve_config(g);
  const Dataset ds = load_dataset(or_default(p.dataset, g, "dataset"), true, c.threads);
  const RvqModel rvq = load_rvq(or_default(p.rvq, g, "rvq"));
  const Autoencoder ae = load_ae(or_default(p.ae, g, "ae"));
  Rng rng(c.seed, kStreamDiffusion);
  const auto t = clk::now();
  DiffusionStage st = train_diffusion_stage(ds, ae, rvq, c, rng, log_line);
  const std::string dir = or_default(p.diffusion, g, "diffusion");
  save_diffusion(dir, st.bundle);
  std::string csv = "step,loss\n";
  for (std::size_t i = 0; i < st.curve.size(); ++i)
    csv += std::to_string(std::min((i + 1) * 100, c.den.steps)) + "," + format_row({st.curve[i]});
  write_file(path_join(dir, "loss.csv"), csv);
  plot_svg(curve_chart({{"noise mse", st.curve}}, "Diffusion training", "step / 100", "loss"),
           path_join(dir, "loss.svg"));
  write_json(path_join(dir, "grid.json"), {{"cl_edges", ds.manifest.grid.cl_edges}, {"cd_edges", ds.manifest.grid.cd_edges}});
  log_line("train-diffusion: " + std::to_string(since(t)) + "s -> " + dir);
  return kExitOk;
}

ClassGrid load_grid(const std::string& diffusion_dir) {
  try {
    const auto j = nlohmann::json::parse(read_file(path_join(diffusion_dir, "grid.json")));
    return {j.at("cl_edges").get<std::vector<double>>(), j.at("cd_edges").get<std::vector<double>>()};
  } catch (const nlohmann::json::exception& e) {
    throw IoError(std::string("grid.json: ") + e.what());
  }
}

struct SampleOptions {
  std::string classes = "all";
  double omega = 3.0;
  std::size_t count = 16;
  std::string out;
};

int cmd_generate(const Globals& g, const Paths& p, const SampleOptions& so) {
  const PipelineConfig c = resolve_config(g);
  const std::string ddir = or_default(p.diffusion, g, "diffusion");
  const DiffusionBundle b = load_diffusion(ddir);
  const Autoencoder ae = load_ae(or_default(p.ae, g, "ae"));
  const ClassGrid grid = load_grid(ddir);
  if (so.omega < 0.0) throw ConfigError("--omega must be non-negative");
  if (so.count == 0) throw ConfigError("--count must be positive");
  const auto classes = parse_classes(so.classes, b.model.cfg.classes);
  const std::string dir = or_default(so.out, g, "generated");
  ensure_dir(dir);

  std::vector<std::string> zcols;
  for (std::size_t i = 0; i < ae.cfg.d_z; ++i) zcols.push_back("z" + std::to_string(i));
  std::string emb = csv_header("sample,class,omega", zcols);
  std::string profiles = "sample,x,y\n";
  std::string csreps, labels = "sample,class,cl,cd,assigned_class,valid\n";
  std::vector<Profile> shown;
  const auto th = SmoothnessThresholds::for_spacing(ae.cfg.delta_x);
  std::size_t sample = 0, invalid = 0, hits = 0, conditioned = 0;
  for (const int k : classes) {
    Rng rng = Rng(c.seed, kStreamGenerate).fork(class_row(k));
    const auto gen = generate(b, ae, k, k == kNullClass ? 0.0 : so.omega, so.count, rng, c.reynolds);
    for (const Generated& s : gen) {
      const Profile env = sweep_envelope(s.shape.cs);
      const bool ok = validate(env, s.shape.cs, th).all();
      invalid += !ok;
      const int assigned = classify(s.label, grid).class_id;
      if (k != kNullClass) {
        ++conditioned;
        hits += assigned == k;
      }
      const std::string id = std::to_string(sample);
      char head[64];
      std::snprintf(head, sizeof head, "%zu,%d,%.17g,", sample, k, k == kNullClass ? 0.0 : so.omega);
      emb += head + format_row(std::vector<double>(s.z.data(), s.z.data() + s.z.size()));
      const Profile prof = decoded_profile(s.shape.cs, c.profile_len);
      for (const Point2& q : prof.points) profiles += id + "," + format_row({q.x, q.y});
      nlohmann::json j = {{"sample", sample}, {"class", k}, {"label", label_json(s.label)}, {"csrep", csrep_json(s.shape.cs)}};
      csreps += j.dump() + "\n";
      char row[160];
      std::snprintf(row, sizeof row, "%zu,%d,%.17g,%.17g,%d,%d\n", sample, k, s.label.cl, s.label.cd, assigned, ok ? 1 : 0);
      labels += row;
      if (shown.size() < 8 && (shown.empty() || s.label.cl != 0.0)) shown.push_back(prof);
      ++sample;
    }
  }
  write_file(path_join(dir, "embeddings.csv"), emb);
  write_file(path_join(dir, "csrep.jsonl"), csreps);
  write_file(path_join(dir, "profiles.csv"), profiles);
  write_file(path_join(dir, "labels.csv"), labels);
  plot_svg(profile_chart(shown, "Generated airfoils"), path_join(dir, "profiles.svg"));
  log_line("generate: " + std::to_string(sample) + " samples, " + std::to_string(invalid) + " invalid" +
           (conditioned ? ", in-class " + std::to_string(hits) + "/" + std::to_string(conditioned) : "") + " -> " + dir);
  return invalid ? kExitValidation : kExitOk;
}

SvgChart scatter_chart(const ConditionalReport& rep, const ClassGrid& grid) {
  SvgChart ch;
  ch.title = "Conditional samples (omega " + detail::fmt("%.1f", rep.omega) + ")";
  ch.x_label = "cd";
  ch.y_label = "cl";
  const std::size_t K = grid.classes();
  for (std::size_t k = 0; k < K; ++k) {
    SvgSeries s;
    s.label = "class " + std::to_string(k);
    s.style = SeriesStyle::kMarkers;
    s.color = static_cast<int>(k);
    for (const auto& q : rep.scatter)
      if (q.target == static_cast<int>(k) && q.omega == rep.omega) s.points.push_back({q.cd, q.cl});
    if (!s.points.empty()) ch.series.push_back(std::move(s));
  }
  return ch;
}

int cmd_evaluate(const Globals& g, const Paths& p, const std::string& out, bool skip_opt) {
  const PipelineConfig c = resolve_config(g);
  const Dataset ds = load_dataset(or_default(p.dataset, g, "dataset"), true, c.threads);
  const RvqModel rvq = load_rvq(or_default(p.rvq, g, "rvq"));
  const Autoencoder ae = load_ae(or_default(p.ae, g, "ae"));
  const DiffusionBundle b = load_diffusion(or_default(p.diffusion, g, "diffusion"));
  const std::string dir = or_default(out, g, "eval");
  ensure_dir(dir);
  nlohmann::json rep;
  nlohmann::json timing;

  auto t = clk::now();
  for (Split s : {Split::kVal, Split::kTest}) {
    const auto recs = ds.split(s);
    if (recs.empty()) continue;
    const ReconStats r = reconstruction_stats(ae, rvq, recs, c.threads);
    rep["reconstruction"][split_name(s)] = {
        {"mean_chd", r.mean_chd}, {"max_chd", r.max_chd}, {"mean_hd", r.mean_hd}, {"count", r.count}};
    log_line(std::string("evaluate: reconstruction ") + split_name(s) + " mean ChD " + std::to_string(r.mean_chd));
  }
  timing["reconstruction"] = since(t);

  t = clk::now();
  const ConditionalReport cr = run_conditional_eval(b, ae, ds.manifest.grid, c.per_class, c.omega, c.seed, c.reynolds, log_line);
  rep["conditional"] = {{"omega", cr.omega},          {"per_class", c.per_class},     {"grid_bins", ds.manifest.grid.bins()},
                        {"accuracy", cr.accuracy},    {"accuracy_omega0", cr.accuracy_zero},
                        {"mean", cr.mean},            {"worst", cr.worst},
                        {"mean_omega0", cr.mean_zero}, {"worst_omega0", cr.worst_zero}};
  std::string scatter = "target,omega,cl,cd,assigned_class\n";
  for (const auto& q : cr.scatter) {
    char row[160];
    std::snprintf(row, sizeof row, "%d,%.17g,%.17g,%.17g,%d\n", q.target, q.omega, q.cl, q.cd, q.hit_class);
    scatter += row;
  }
  write_file(path_join(dir, "scatter.csv"), scatter);
  plot_svg(scatter_chart(cr, ds.manifest.grid), path_join(dir, "conditional.svg"));
  log_line("evaluate: conditional mean " + std::to_string(cr.mean) + " worst " + std::to_string(cr.worst) +
           " (omega 0 mean " + std::to_string(cr.mean_zero) + ")");
  timing["conditional"] = since(t);

  t = clk::now();
  const FidelityReport fr = run_unconditional_eval(b, ae, ds, c);
  rep["unconditional"] = {{"fidelity", fr.fidelity}, {"diversity", fr.diversity}, {"generated", fr.generated},
                          {"reference", fr.reference}};
  log_line("evaluate: fidelity " + std::to_string(fr.fidelity) + " diversity " + std::to_string(fr.diversity));
  timing["unconditional"] = since(t);

  if (!skip_opt) {
    t = clk::now();
    const OptimizationExperiment ox = run_optimization_experiment(b, ae, ds, c, log_line);
    std::string csv = "target,init,success,iterations,evaluations,err_cl,err_cd,wall_time\n";
    for (std::size_t i = 0; i < ox.generated.size(); ++i)
      for (const OptimizationResult* r : {&ox.generated[i], &ox.random[i]}) {
        char row[200];
        std::snprintf(row, sizeof row, "%zu,%s,%d,%zu,%zu,%.17g,%.17g,%.6f\n", i, r->init_source.c_str(), r->success ? 1 : 0,
                      r->iterations, r->evaluations, r->err_cl, r->err_cd, r->wall_time);
        csv += row;
      }
    write_file(path_join(dir, "optimization.csv"), csv);
    rep["optimization"] = {{"targets", ox.generated.size()},
                           {"tolerance", c.opt_tol},
                           {"budget", c.opt_budget},
                           {"success_generated", ox.success_generated},
                           {"success_random", ox.success_random},
                           {"median_iterations_generated", ox.median_iter_generated},
                           {"median_iterations_random", ox.median_iter_random}};
    log_line("evaluate: optimization success " + std::to_string(ox.success_generated) + " vs " +
             std::to_string(ox.success_random) + ", median iterations " + std::to_string(ox.median_iter_generated) +
             " vs " + std::to_string(ox.median_iter_random));
    timing["optimization"] = since(t);
  }
  write_json(path_join(dir, "report.json"), rep);
  write_json(path_join(dir, "timing.json"), timing);
  log_line("evaluate: -> " + dir);
  return kExitOk;
}

int cmd_optimize(const Globals& g, const Paths& p, double cl, double cd, const std::string& init, int cls,
                 const std::string& out) {
  const PipelineConfig c = resolve_config(g);
  OptimizerOptions opt;
  opt.budget = c.opt_budget;
  opt.tol = c.opt_tol;
  opt.basis = c.opt_basis;
  opt.delta_x = c.delta_x;
  opt.reynolds = c.reynolds;
  const auto th = SmoothnessThresholds::for_spacing(opt.delta_x);
  const AeroLabel target{cl, cd};
  Rng rng(c.seed, kStreamOptimize);
  OptimizationResult r;
  if (init == "random") {
    const MetaParams m = sample_valid_meta(rng, opt.delta_x, th);
    r = optimize_to_target(target, m, sample_valid_coeffs(rng, m, opt.delta_x, th), opt, "random");
  } else if (init == "generated") {
    const std::string ddir = or_default(p.diffusion, g, "diffusion");
    const DiffusionBundle b = load_diffusion(ddir);
    const Autoencoder ae = load_ae(or_default(p.ae, g, "ae"));
    if (ae.cfg.delta_x != opt.delta_x) throw ConfigError("delta_x differs from the autoencoder checkpoint");
    const ClassGrid grid = load_grid(ddir);
    const int k = cls >= 0 ? cls : classify(target, grid).class_id;
    if (k < 0 || static_cast<std::size_t>(k) >= grid.classes()) throw ConfigError("--class out of range");
    const auto s = generate(b, ae, k, c.omega, 1, rng, c.reynolds);
    r = optimize_to_target(target, s[0].shape.meta, s[0].shape.coeffs, opt, "generated");
  } else {
    throw ConfigError("--init must be random or generated");
  }
  const std::string dir = or_default(out, g, "optimize");
  ensure_dir(dir);
  write_json(path_join(dir, "result.json"),
             {{"target", label_json(target)}, {"init", r.init_source}, {"success", r.success},
              {"iterations", r.iterations}, {"evaluations", r.evaluations}, {"wall_time", r.wall_time},
              {"err_cl", r.err_cl}, {"err_cd", r.err_cd}, {"csrep", csrep_json(r.cs)}});
  const Profile prof = decoded_profile(r.cs, c.profile_len);
  write_file(path_join(dir, "profile.csv"), profile_csv(prof));
  plot_svg(profile_chart({prof}, "Optimized airfoil"), path_join(dir, "profile.svg"));
  log_line(std::string("optimize: ") + (r.success ? "success" : "failure") + " after " + std::to_string(r.iterations) +
           " iterations, errors " + std::to_string(r.err_cl) + " / " + std::to_string(r.err_cd) + " -> " + dir);
  return r.success ? kExitOk : kExitValidation;
}

std::vector<std::pair<std::string, std::vector<double>>> read_curves(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line)) throw IoError(path + ": empty curve file");
  std::vector<std::string> names;
  std::stringstream hs(line);
  std::string tok;
  while (std::getline(hs, tok, ',')) names.push_back(tok);
  if (names.size() < 2) throw IoError(path + ": need a step column and at least one value column");
  std::vector<std::pair<std::string, std::vector<double>>> curves;
  for (std::size_t i = 1; i < names.size(); ++i) curves.push_back({names[i], {}});
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::getline(ls, tok, ',');
    for (auto& c : curves) {
      if (!std::getline(ls, tok, ',')) throw IoError(path + ": short row");
      try {
        c.second.push_back(std::stod(tok));
      } catch (const std::logic_error&) {
        throw IoError(path + ": bad number '" + tok + "'");
      }
    }
  }
  return curves;
}

int cmd_plot(const std::vector<std::string>& profiles, const std::string& curves, const std::string& title,
             const std::string& output) {
  if (output.empty()) throw ConfigError("plot: --output is required");
  if (profiles.empty() == curves.empty()) throw ConfigError("plot: give either --profiles or --curves");
  if (!profiles.empty()) {
    std::vector<Profile> ps;
    for (const auto& f : profiles) ps.push_back(parse_profile_csv(read_file(f)));
    plot_svg(profile_chart(ps, title), output);
  } else {
    plot_svg(curve_chart(read_curves(curves), title, "step", "value"), output);
  }
  log_line("plot: -> " + output);
  return kExitOk;
}

int cmd_validate(const Globals& g, const std::string& dataset, const std::string& csrep) {
  const PipelineConfig c = resolve_config(g);
  if (dataset.empty() == csrep.empty()) throw ConfigError("validate: give either --dataset or --csrep");
  if (!dataset.empty()) {
    const Dataset ds = load_dataset(dataset, true, c.threads);
    log_line("validate: " + std::to_string(ds.records.size()) + " records pass");
    return kExitOk;
  }
  std::istringstream in(read_file(csrep));
  std::string line;
  std::size_t n = 0, bad = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw IoError(csrep + ": " + e.what());
    }
    const CsRep cs = csrep_from_json(j.contains("csrep") ? j.at("csrep") : j);
    const auto th = SmoothnessThresholds::for_spacing(cs.delta_x);
    const ValidityReport r = validate(sweep_envelope(cs), cs, th);
    if (!r.all()) {
      ++bad;
      log_line("validate: entry " + std::to_string(n) + " fails " + std::to_string(r.violations.size()) + " check(s)");
    }
    ++n;
  }
  log_line("validate: " + std::to_string(n - bad) + "/" + std::to_string(n) + " shapes valid");
  return bad ? kExitValidation : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"airfoilgen: valid-by-construction airfoil generation"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "key = value config file");
  app.add_option("--seed", g.seed, "override the config seed");
  app.add_option("--out-dir", g.out_dir, "root directory for outputs")->capture_default_str();
  app.add_option("--threads", g.threads, "worker threads for record-wise work");
  app.fallthrough();

  Paths p;
  auto add_paths = [&](CLI::App* sub, bool rvq, bool ae, bool diffusion) {
    sub->add_option("--dataset", p.dataset, "dataset directory (default <out-dir>/dataset)");
    if (rvq) sub->add_option("--rvq", p.rvq, "RVQ checkpoint directory");
    if (ae) sub->add_option("--ae", p.ae, "autoencoder checkpoint directory");
    if (diffusion) sub->add_option("--checkpoint", p.diffusion, "diffusion checkpoint directory");
  };

  std::string out;
  double factor = 1.0;
  bool skip_opt = false;
  SampleOptions so;
  double cl = 0.0, cd = 0.0;
  std::string init = "generated";
  int cls = -1;
  std::vector<std::string> profile_files;
  std::string curve_file, title = "airfoilgen", plot_out, csrep_file;

  auto* build = app.add_subcommand("build-dataset", "enumerate NACA sweeps into a labeled CS-Rep dataset");
  build->add_option("--output", out, "dataset directory");
  auto* aug = app.add_subcommand("augment", "add jittered valid records");
  add_paths(aug, false, false, false);
  aug->add_option("--factor", factor, "size multiplier (>= 1)")->required();
  aug->add_option("--output", out, "augmented dataset directory");
  auto* trvq = app.add_subcommand("train-rvq", "train the residual vector quantizer");
  add_paths(trvq, true, false, false);
  auto* tae = app.add_subcommand("train-ae", "train the constrained autoencoder");
  add_paths(tae, true, true, false);
  auto* tdif = app.add_subcommand("train-diffusion", "train the latent denoiser");
  add_paths(tdif, true, true, true);
  auto* gen = app.add_subcommand("generate", "sample latents and decode airfoils");
  add_paths(gen, false, true, true);
  gen->add_option("--classes", so.classes, "comma list of class ids, 'null', or 'all'")->capture_default_str();
  gen->add_option("--omega", so.omega, "guidance weight")->capture_default_str();
  gen->add_option("--count", so.count, "samples per class")->capture_default_str();
  gen->add_option("--output", so.out, "output directory");
  auto* eval = app.add_subcommand("evaluate", "reconstruction, conditional, fidelity and optimization reports");
  add_paths(eval, true, true, true);
  eval->add_option("--output", out, "report directory");
  eval->add_flag("--skip-optimization", skip_opt, "omit the optimization-initialization experiment");
  auto* optc = app.add_subcommand("optimize", "Nelder-Mead toward a (cl, cd) target");
  add_paths(optc, false, true, true);
  optc->add_option("--target-cl", cl, "target lift coefficient")->required();
  optc->add_option("--target-cd", cd, "target drag coefficient")->required();
  optc->add_option("--init", init, "generated or random")->capture_default_str();
  optc->add_option("--class", cls, "class used for a generated init (default: class of the target)");
  optc->add_option("--output", out, "result directory");
  auto* plot = app.add_subcommand("plot", "render profile CSVs or a loss CSV to SVG");
  plot->add_option("--profiles", profile_files, "profile CSV files (x,y rows)");
  plot->add_option("--curves", curve_file, "CSV with a step column and value columns");
  plot->add_option("--title", title, "chart title");
  plot->add_option("--output", plot_out, "SVG path");
  auto* val = app.add_subcommand("validate", "re-verify a dataset or check CS-Rep files");
  std::string val_dataset;
  val->add_option("--dataset", val_dataset, "dataset directory");
  val->add_option("--csrep", csrep_file, "CS-Rep JSON lines (as written by generate)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*build) return cmd_build_dataset(g, out);
    if (*aug) return cmd_augment(g, p, out, factor);
    if (*trvq) return cmd_train_rvq(g, p);
    if (*tae) return cmd_train_ae(g, p);
    if (*tdif) return cmd_train_diffusion(g, p);
    if (*gen) {
      so.out = so.out.empty() ? out : so.out;
      return cmd_generate(g, p, so);
    }
    if (*eval) return cmd_evaluate(g, p, out, skip_opt);
    if (*optc) return cmd_optimize(g, p, cl, cd, init, cls, out);
    if (*plot) return cmd_plot(profile_files, curve_file, title, plot_out);
    if (*val) return cmd_validate(g, val_dataset, csrep_file);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << std::endl;
    return kExitConfig;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << std::endl;
    return kExitIo;
  } catch (const ValidationError& e) {
    std::cerr << "validation failure: " << e.what() << std::endl;
    return kExitValidation;
  } catch (const DomainError& e) {
    std::cerr << "validation failure: " << e.what() << std::endl;
    return kExitValidation;
  }
  return kExitConfig;
}
