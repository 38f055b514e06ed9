#pragma once

// Run configuration, dataset records, manifest, persistence, seeded splits,
// dataset construction from the NACA families and coefficient augmentation.

#include <algorithm>
#include <atomic>
#include <exception>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "aero.hpp"
#include "autoencoder.hpp"
#include "csrep.hpp"
#include "diffusion.hpp"
#include "json.hpp"
#include "metrics.hpp"
#include "nn.hpp"

namespace airfoilgen {

struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

struct PipelineConfig {
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  // dataset
  double delta_x = kDefaultDeltaX;
  std::size_t profile_len = kDefaultProfileLength;
  std::size_t source_points = 1000;
  double m_max = 0.09, m_step = 0.01;
  double p_min = 0.1, p_max = 0.7, p_step = 0.1;
  double t_min = 0.06, t_max = 0.24, t_step = 0.004;
  bool naca5 = true;
  double reynolds = kDefaultReynolds;
  std::size_t grid_bins = 5;
  double roundtrip_tol = 5e-3;
  double aug_jitter = 0.05;

  // networks
  RvqConfig rvq;
  std::size_t rvq_epochs = 10, rvq_batch = 256, rvq_rows = 100000;
  AeConfig ae;
  DenoiserConfig den;
  std::size_t diffusion_T = 1000;
  double beta_min = 1e-4, beta_max = 0.02;

  // evaluation
  double omega = 3.0;
  std::size_t per_class = 128;
  std::size_t fidelity_samples = 64, fidelity_reference = 512;
  std::size_t opt_targets = 20, opt_budget = 200, opt_basis = 3;
  double opt_tol = 2e-3;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size() || !std::isfinite(d)) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + key + "' expects a number, got '" + v + "'");
  }
}

inline std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (v.empty() || v[0] == '-') throw std::invalid_argument(v);
    const unsigned long long d = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw ConfigError("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
}

inline bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ConfigError("config: '" + key + "' expects true/false, got '" + v + "'");
}

using Setter = std::function<void(PipelineConfig&, const std::string&, const std::string&)>;

template <class T>
Setter set_size(T PipelineConfig::*f) {
  return [f](PipelineConfig& c, const std::string& k, const std::string& v) {
    c.*f = static_cast<T>(parse_u64(k, v));
  };
}

inline const std::map<std::string, Setter>& config_setters() {
  auto num = [](double PipelineConfig::*f) {
    return Setter([f](PipelineConfig& c, const std::string& k, const std::string& v) { c.*f = parse_double(k, v); });
  };
  auto sz = [](auto member) {
    return Setter([member](PipelineConfig& c, const std::string& k, const std::string& v) {
      member(c) = static_cast<std::size_t>(parse_u64(k, v));
    });
  };
  auto dbl = [](auto member) {
    return Setter([member](PipelineConfig& c, const std::string& k, const std::string& v) {
      member(c) = parse_double(k, v);
    });
  };
  static const std::map<std::string, Setter> table = {
      {"seed", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.seed = parse_u64(k, v); }},
      {"threads", set_size(&PipelineConfig::threads)},
      {"delta_x", num(&PipelineConfig::delta_x)},
      {"profile_len", set_size(&PipelineConfig::profile_len)},
      {"source_points", set_size(&PipelineConfig::source_points)},
      {"naca4.m_max", num(&PipelineConfig::m_max)},
      {"naca4.m_step", num(&PipelineConfig::m_step)},
      {"naca4.p_min", num(&PipelineConfig::p_min)},
      {"naca4.p_max", num(&PipelineConfig::p_max)},
      {"naca4.p_step", num(&PipelineConfig::p_step)},
      {"naca4.t_min", num(&PipelineConfig::t_min)},
      {"naca4.t_max", num(&PipelineConfig::t_max)},
      {"naca4.t_step", num(&PipelineConfig::t_step)},
      {"naca5", [](PipelineConfig& c, const std::string& k, const std::string& v) { c.naca5 = parse_bool(k, v); }},
      {"reynolds", num(&PipelineConfig::reynolds)},
      {"grid_bins", set_size(&PipelineConfig::grid_bins)},
      {"roundtrip_tol", num(&PipelineConfig::roundtrip_tol)},
      {"augment.jitter", num(&PipelineConfig::aug_jitter)},
      {"rvq.window", sz([](PipelineConfig& c) -> std::size_t& { return c.rvq.window; })},
      {"rvq.depth", sz([](PipelineConfig& c) -> std::size_t& { return c.rvq.depth; })},
      {"rvq.codes", sz([](PipelineConfig& c) -> std::size_t& { return c.rvq.codes; })},
      {"rvq.code_dim", sz([](PipelineConfig& c) -> std::size_t& { return c.rvq.code_dim; })},
      {"rvq.hidden", sz([](PipelineConfig& c) -> std::size_t& { return c.rvq.hidden; })},
      {"rvq.lr", dbl([](PipelineConfig& c) -> double& { return c.rvq.lr; })},
      {"rvq.commitment", dbl([](PipelineConfig& c) -> double& { return c.rvq.commitment; })},
      {"rvq.epochs", set_size(&PipelineConfig::rvq_epochs)},
      {"rvq.batch", set_size(&PipelineConfig::rvq_batch)},
      {"rvq.rows", set_size(&PipelineConfig::rvq_rows)},
      {"ae.d_model", sz([](PipelineConfig& c) -> std::size_t& { return c.ae.d_model; })},
      {"ae.enc_hidden", sz([](PipelineConfig& c) -> std::size_t& { return c.ae.enc_hidden; })},
      {"ae.enc_attention", sz([](PipelineConfig& c) -> std::size_t& { return c.ae.enc_attention; })},
      {"ae.d_z", sz([](PipelineConfig& c) -> std::size_t& { return c.ae.d_z; })},
      {"ae.bins", sz([](PipelineConfig& c) -> std::size_t& { return c.ae.bins; })},
      {"ae.meta_hidden", sz([](PipelineConfig& c) -> std::size_t& { return c.ae.meta_hidden; })},
      {"ae.coeff_hidden", sz([](PipelineConfig& c) -> std::size_t& { return c.ae.coeff_hidden; })},
      {"ae.history", sz([](PipelineConfig& c) -> std::size_t& { return c.ae.history; })},
      {"ae.lambda_ce", dbl([](PipelineConfig& c) -> double& { return c.ae.lambda_ce; })},
      {"ae.lambda_mse", dbl([](PipelineConfig& c) -> double& { return c.ae.lambda_mse; })},
      {"ae.lambda_aux", dbl([](PipelineConfig& c) -> double& { return c.ae.lambda_aux; })},
      {"ae.lr", dbl([](PipelineConfig& c) -> double& { return c.ae.lr; })},
      {"ae.batch", sz([](PipelineConfig& c) -> std::size_t& { return c.ae.batch; })},
      {"ae.epochs", sz([](PipelineConfig& c) -> std::size_t& { return c.ae.epochs; })},
      {"diffusion.T", set_size(&PipelineConfig::diffusion_T)},
      {"diffusion.beta_min", num(&PipelineConfig::beta_min)},
      {"diffusion.beta_max", num(&PipelineConfig::beta_max)},
      {"diffusion.hidden", sz([](PipelineConfig& c) -> std::size_t& { return c.den.hidden; })},
      {"diffusion.blocks", sz([](PipelineConfig& c) -> std::size_t& { return c.den.blocks; })},
      {"diffusion.time_dim", sz([](PipelineConfig& c) -> std::size_t& { return c.den.time_dim; })},
      {"diffusion.cond_dropout", dbl([](PipelineConfig& c) -> double& { return c.den.cond_dropout; })},
      {"diffusion.lr", dbl([](PipelineConfig& c) -> double& { return c.den.lr; })},
      {"diffusion.batch", sz([](PipelineConfig& c) -> std::size_t& { return c.den.batch; })},
      {"diffusion.steps", sz([](PipelineConfig& c) -> std::size_t& { return c.den.steps; })},
      {"eval.omega", num(&PipelineConfig::omega)},
      {"eval.per_class", set_size(&PipelineConfig::per_class)},
      {"eval.fidelity_samples", set_size(&PipelineConfig::fidelity_samples)},
      {"eval.fidelity_reference", set_size(&PipelineConfig::fidelity_reference)},
      {"opt.targets", set_size(&PipelineConfig::opt_targets)},
      {"opt.budget", set_size(&PipelineConfig::opt_budget)},
      {"opt.basis", set_size(&PipelineConfig::opt_basis)},
      {"opt.tol", num(&PipelineConfig::opt_tol)},
  };
  return table;
}

}  // namespace detail

inline void check_config(const PipelineConfig& c) {
  auto need = [](bool ok, const char* what) {
    if (!ok) throw ConfigError(std::string("config: ") + what);
  };
  need(c.delta_x > 0.0 && c.delta_x < 0.2, "delta_x must lie in (0, 0.2)");
  need(c.profile_len >= 16, "profile_len must be at least 16");
  need(c.source_points >= 64, "source_points must be at least 64");
  need(c.m_step > 0.0 && c.p_step > 0.0 && c.t_step > 0.0, "sweep steps must be positive");
  need(c.m_max >= 0.0 && c.p_min > 0.0 && c.p_max < 1.0 && c.p_min <= c.p_max, "bad camber sweep");
  need(c.t_min > 0.0 && c.t_min <= c.t_max && c.t_max < 0.5, "bad thickness sweep");
  need(c.grid_bins >= 1, "grid_bins must be positive");
  need(c.rvq.window % 2 == 1, "rvq.window must be odd");
  need(c.rvq.depth >= 1 && c.rvq.codes >= 2, "rvq needs depth >= 1 and codes >= 2");
  need(c.ae.bins >= 2 && c.ae.d_z >= 1 && c.ae.batch >= 1, "bad autoencoder sizes");
  need(c.ae.d_model % 2 == 0, "ae.d_model must be even");
  need(c.den.cond_dropout >= 0.0 && c.den.cond_dropout <= 1.0, "diffusion.cond_dropout must lie in [0, 1]");
  need(c.den.batch >= 1 && c.den.time_dim % 2 == 0, "bad diffusion sizes");
  need(c.diffusion_T >= 2 && c.beta_min > 0.0 && c.beta_min <= c.beta_max && c.beta_max < 1.0,
       "bad diffusion schedule");
  need(c.omega >= 0.0, "eval.omega must be non-negative");
  need(c.opt_tol > 0.0 && c.opt_budget >= 1, "bad optimizer settings");
}

/// key = value lines; '#' starts a comment. Unknown keys are errors.
inline PipelineConfig parse_config(const std::string& text, PipelineConfig cfg = {}) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq)), value = detail::trim(line.substr(eq + 1));
    const auto& table = detail::config_setters();
    const auto it = table.find(key);
    if (it == table.end()) throw ConfigError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
    it->second(cfg, key, value);
  }
  cfg.ae.profile_len = cfg.profile_len;
  cfg.ae.code_dim = cfg.rvq.code_dim;
  cfg.ae.delta_x = cfg.delta_x;
  cfg.den.dim = cfg.ae.d_z;
  check_config(cfg);
  return cfg;
}

inline PipelineConfig load_config(const std::string& path) {
  return parse_config(read_file(path));
}

inline nlohmann::json config_json(const PipelineConfig& c) {
  return {{"seed", c.seed},
          {"delta_x", c.delta_x},
          {"profile_len", c.profile_len},
          {"source_points", c.source_points},
          {"naca4", {{"m_max", c.m_max}, {"m_step", c.m_step}, {"p_min", c.p_min}, {"p_max", c.p_max},
                     {"p_step", c.p_step}, {"t_min", c.t_min}, {"t_max", c.t_max}, {"t_step", c.t_step}}},
          {"naca5", c.naca5},
          {"reynolds", c.reynolds},
          {"grid_bins", c.grid_bins},
          {"rvq", {{"window", c.rvq.window}, {"depth", c.rvq.depth}, {"codes", c.rvq.codes},
                   {"code_dim", c.rvq.code_dim}, {"hidden", c.rvq.hidden}, {"lr", c.rvq.lr},
                   {"epochs", c.rvq_epochs}, {"batch", c.rvq_batch}, {"rows", c.rvq_rows}}},
          {"ae", {{"d_model", c.ae.d_model}, {"d_z", c.ae.d_z}, {"bins", c.ae.bins}, {"lr", c.ae.lr},
                  {"batch", c.ae.batch}, {"epochs", c.ae.epochs}, {"history", c.ae.history}}},
          {"diffusion", {{"T", c.diffusion_T}, {"beta_min", c.beta_min}, {"beta_max", c.beta_max},
                         {"hidden", c.den.hidden}, {"blocks", c.den.blocks}, {"steps", c.den.steps},
                         {"batch", c.den.batch}, {"lr", c.den.lr}, {"cond_dropout", c.den.cond_dropout}}},
          {"eval", {{"omega", c.omega}, {"per_class", c.per_class}}},
          {"opt", {{"targets", c.opt_targets}, {"budget", c.opt_budget}, {"tol", c.opt_tol}}}};
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

/// Two-column CSV, 17 significant digits.
inline std::string profile_csv(const Profile& p) {
  std::string out;
  char buf[96];
  for (const Point2& q : p.points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", q.x, q.y);
    out += buf;
  }
  return out;
}

inline Profile parse_profile_csv(const std::string& text) {
  Profile p;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw IoError("profile csv: expected x,y");
    try {
      p.points.push_back({std::stod(line.substr(0, comma)), std::stod(line.substr(comma + 1))});
    } catch (const std::exception&) {
      throw IoError("profile csv: bad number in '" + line + "'");
    }
  }
  return p;
}

inline nlohmann::json csrep_json(const CsRep& cs) {
  return {{"x0", cs.x0}, {"delta_x", cs.delta_x}, {"spine_y", cs.spine_y}, {"radii", cs.radii}};
}

inline CsRep csrep_from_json(const nlohmann::json& j) {
  CsRep cs;
  cs.x0 = j.at("x0");
  cs.delta_x = j.at("delta_x");
  cs.spine_y = j.at("spine_y").get<std::vector<double>>();
  cs.radii = j.at("radii").get<std::vector<double>>();
  if (cs.spine_y.size() != cs.radii.size()) throw DomainError("csrep: spine and radius lengths differ");
  return cs;
}

// ---------------------------------------------------------------------------
// Records and manifest
// ---------------------------------------------------------------------------

enum class Split { kTrain, kVal, kTest };

inline const char* split_name(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kVal: return "val";
    default: return "test";
  }
}

inline Split split_from_name(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "val") return Split::kVal;
  if (s == "test") return Split::kTest;
  throw DomainError("unknown split '" + s + "'");
}

inline constexpr std::array<double, 3> kSplitRatios = {0.90, 0.05, 0.05};

/// Pure function of (id, seed).
inline Split split_of(const std::string& id, std::uint64_t seed) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : id) h = (h ^ c) * 0x100000001b3ULL;
  const double u = static_cast<double>(Rng::mix(h ^ Rng::mix(seed)) >> 11) * 0x1.0p-53;
  if (u < kSplitRatios[0]) return Split::kTrain;
  if (u < kSplitRatios[0] + kSplitRatios[1]) return Split::kVal;
  return Split::kTest;
}

struct DatasetRecord {
  std::string id;
  std::string source;  // naca4, naca5, augmented
  Profile profile;
  CsRep csrep;
  MetaParams meta;
  CoeffSeq coeffs;
  AeroLabel label;
  int class_id = -1;
  Split split = Split::kTrain;
};

inline constexpr int kFormatVersion = 1;

struct Manifest {
  int format_version = kFormatVersion;
  double delta_x = kDefaultDeltaX;
  std::size_t profile_len = kDefaultProfileLength;
  ClassGrid grid;
  std::uint64_t seed = 0;
  double reynolds = kDefaultReynolds;
  std::map<std::string, std::size_t> counts;
  std::string records_file = "records.jsonl";
};

struct Dataset {
  Manifest manifest;
  std::vector<DatasetRecord> records;

  std::vector<const DatasetRecord*> split(Split s) const {
    std::vector<const DatasetRecord*> out;
    for (const DatasetRecord& r : records)
      if (r.split == s) out.push_back(&r);
    return out;
  }
};

inline nlohmann::json record_json(const DatasetRecord& r) {
  nlohmann::json pts = nlohmann::json::array();
  for (const Point2& p : r.profile.points) pts.push_back({p.x, p.y});
  return {{"id", r.id},
          {"source", r.source},
          {"split", split_name(r.split)},
          {"class_id", r.class_id},
          {"label", {{"cl", r.label.cl}, {"cd", r.label.cd}}},
          {"meta", r.meta.flat()},
          {"u_tilde", r.coeffs.u_tilde},
          {"v_tilde", r.coeffs.v_tilde},
          {"csrep", csrep_json(r.csrep)},
          {"profile", pts}};
}

inline DatasetRecord record_from_json(const nlohmann::json& j) {
  DatasetRecord r;
  r.id = j.at("id");
  r.source = j.at("source");
  r.split = split_from_name(j.at("split"));
  r.class_id = j.at("class_id");
  r.label.cl = j.at("label").at("cl");
  r.label.cd = j.at("label").at("cd");
  r.meta = MetaParams::from_flat(j.at("meta").get<std::array<double, 16>>());
  r.coeffs.u_tilde = j.at("u_tilde").get<std::vector<double>>();
  r.coeffs.v_tilde = j.at("v_tilde").get<std::vector<double>>();
  r.csrep = csrep_from_json(j.at("csrep"));
  for (const auto& p : j.at("profile")) r.profile.points.push_back({p.at(0), p.at(1)});
  return r;
}

inline nlohmann::json manifest_json(const Manifest& m) {
  return {{"format_version", m.format_version},
          {"delta_x", m.delta_x},
          {"profile_length", m.profile_len},
          {"grid", {{"bins", m.grid.bins()}, {"cl_edges", m.grid.cl_edges}, {"cd_edges", m.grid.cd_edges}}},
          {"split_ratios", kSplitRatios},
          {"seeds", {{"seed", m.seed}, {"split", m.seed}}},
          {"reynolds", m.reynolds},
          {"counts", m.counts},
          {"records_file", m.records_file}};
}

inline Manifest manifest_from_json(const nlohmann::json& j) {
  Manifest m;
  m.format_version = j.at("format_version");
  if (m.format_version != kFormatVersion)
    throw ValidationError("manifest: unrecognized format version " + std::to_string(m.format_version));
  m.delta_x = j.at("delta_x");
  m.profile_len = j.at("profile_length");
  m.grid.cl_edges = j.at("grid").at("cl_edges").get<std::vector<double>>();
  m.grid.cd_edges = j.at("grid").at("cd_edges").get<std::vector<double>>();
  m.seed = j.at("seeds").at("seed");
  m.reynolds = j.at("reynolds");
  m.counts = j.at("counts").get<std::map<std::string, std::size_t>>();
  m.records_file = j.at("records_file");
  return m;
}

inline void update_counts(Dataset& ds, std::size_t discarded) {
  auto& c = ds.manifest.counts;
  c.clear();
  c["total"] = ds.records.size();
  c["discarded"] = discarded;
  for (const char* s : {"naca4", "naca5", "augmented", "train", "val", "test"}) c[s] = 0;
  for (const DatasetRecord& r : ds.records) {
    ++c[r.source];
    ++c[split_name(r.split)];
  }
}

/// Consistency of one persisted record; empty when it passes.
inline std::optional<std::string> record_problem(const DatasetRecord& r, const Manifest& m, double roundtrip_tol) {
  const auto th = SmoothnessThresholds::for_spacing(m.delta_x);
  if (auto why = meta_infeasibility(r.meta, m.delta_x, th)) return "infeasible anchors: " + *why;
  CsRep cs;
  try {
    cs = decode_coeffs(r.meta, r.coeffs, m.delta_x, th);
  } catch (const DomainError& e) {
    return std::string("decode failed: ") + e.what();
  }
  if (cs.size() != r.csrep.size()) return std::string("stored csrep length differs from decode");
  for (std::size_t i = 0; i < cs.size(); ++i)
    if (std::abs(cs.spine_y[i] - r.csrep.spine_y[i]) > 1e-12 || std::abs(cs.radii[i] - r.csrep.radii[i]) > 1e-12)
      return std::string("stored csrep differs from decode");
  Profile swept;
  try {
    swept = sweep_envelope(cs);
  } catch (const DomainError& e) {
    return std::string("sweep failed: ") + e.what();
  }
  if (!validate(swept, cs, th).all()) return std::string("validity checks fail");
  if (r.profile.size() != m.profile_len) return std::string("profile length differs from manifest");
  const double chd = chamfer(r.profile.points, resample_arclength(swept, m.profile_len).points);
  if (!(chd <= roundtrip_tol)) return "profile/csrep round trip ChD " + std::to_string(chd);
  const AeroLabel l = eval_surrogate(cs, m.reynolds);
  if (std::abs(l.cl - r.label.cl) > 1e-12 || std::abs(l.cd - r.label.cd) > 1e-12)
    return std::string("label differs from surrogate");
  if (classify(r.label, m.grid).class_id != r.class_id) return std::string("class_id differs from grid");
  return std::nullopt;
}

/// Runs fn(i) for i in [0, n) across threads; callers write into slot i so
/// the result order never depends on scheduling.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr error;
  std::mutex error_mu;
  for (std::size_t t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// Integrity sweep over every record.
inline void verify_dataset(const Dataset& ds, double roundtrip_tol = 5e-3, std::size_t threads = 1) {
  std::vector<std::optional<std::string>> problems(ds.records.size());
  parallel_for(ds.records.size(), threads,
               [&](std::size_t i) { problems[i] = record_problem(ds.records[i], ds.manifest, roundtrip_tol); });
  for (std::size_t i = 0; i < problems.size(); ++i)
    if (problems[i]) throw ValidationError("record " + ds.records[i].id + ": " + *problems[i]);
  std::map<std::string, std::size_t> seen;
  for (const DatasetRecord& r : ds.records) {
    if (++seen[r.id] > 1) throw ValidationError("duplicate record id " + r.id);
    if (split_of(r.id, ds.manifest.seed) != r.split) throw ValidationError("record " + r.id + ": split tag differs");
  }
  Dataset copy;
  copy.records = ds.records;
  update_counts(copy, 0);
  for (const char* k : {"total", "naca4", "naca5", "augmented", "train", "val", "test"}) {
    const auto it = ds.manifest.counts.find(k);
    if (it == ds.manifest.counts.end() || it->second != copy.manifest.counts[k])
      throw ValidationError(std::string("manifest count '") + k + "' differs from the records");
  }
}

inline void write_dataset(const std::string& dir, const Dataset& ds) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
  std::string lines;
  for (const DatasetRecord& r : ds.records) lines += record_json(r).dump() + "\n";
  write_file((std::filesystem::path(dir) / ds.manifest.records_file).string(), lines);
  write_file((std::filesystem::path(dir) / "manifest.json").string(), manifest_json(ds.manifest).dump(2) + "\n");
}

/// Loads and, unless told otherwise, re-validates every record.
inline Dataset load_dataset(const std::string& dir, bool verify = true, std::size_t threads = 1) {
  Dataset ds;
  try {
    ds.manifest = manifest_from_json(nlohmann::json::parse(read_file((std::filesystem::path(dir) / "manifest.json").string())));
    std::istringstream in(read_file((std::filesystem::path(dir) / ds.manifest.records_file).string()));
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) ds.records.push_back(record_from_json(nlohmann::json::parse(line)));
  } catch (const nlohmann::json::exception& e) {
    throw IoError("dataset " + dir + ": " + e.what());
  }
  if (verify) verify_dataset(ds, 5e-3, threads);
  return ds;
}

// ---------------------------------------------------------------------------
// Construction
// ---------------------------------------------------------------------------

struct Candidate {
  std::string id;
  std::string source;
  std::function<Profile(std::size_t)> make;
};

inline std::vector<Candidate> naca_candidates(const PipelineConfig& c) {
  std::vector<Candidate> out;
  char buf[64];
  auto steps = [](double lo, double hi, double step) {
    return static_cast<int>(std::floor((hi - lo) / step + 1e-9));
  };
  const std::vector<int> ms = [&] {
    std::vector<int> v;
    for (int i = 0; i <= steps(0.0, c.m_max, c.m_step); ++i) v.push_back(i);
    return v;
  }();
  for (int mi : ms) {
    const double m = mi * c.m_step;
    const int np = mi == 0 ? 0 : steps(c.p_min, c.p_max, c.p_step);
    for (int pi = 0; pi <= np; ++pi) {
      const double p = mi == 0 ? 0.0 : c.p_min + pi * c.p_step;
      for (int ti = 0; ti <= steps(c.t_min, c.t_max, c.t_step); ++ti) {
        const double t = c.t_min + ti * c.t_step;
        std::snprintf(buf, sizeof buf, "naca4-m%.3f-p%.2f-t%.3f", m, p, t);
        out.push_back({buf, "naca4", [m, p, t](std::size_t n) { return naca4_profile(m, p, t, n); }});
      }
    }
  }
  if (c.naca5) {
    const int tt_lo = static_cast<int>(std::ceil(100.0 * c.t_min - 1e-9));
    const int tt_hi = static_cast<int>(std::floor(100.0 * c.t_max + 1e-9));
    for (int code : {210, 220, 230, 240, 250, 221, 231, 241, 251})
      for (int tt = tt_lo; tt <= tt_hi; ++tt) {
        const int full = code * 100 + tt;
        std::snprintf(buf, sizeof buf, "naca5-%05d", full);
        out.push_back({buf, "naca5", [full](std::size_t n) { return naca5_profile(full, n); }});
      }
  }
  return out;
}

/// Source profile → CS-Rep → valid (meta, coeffs); nullopt when the section
/// cannot be represented within the round-trip tolerance.
inline std::optional<DatasetRecord> make_record(const std::string& id, const std::string& source, const Profile& src,
                                                const PipelineConfig& c) {
  const auto th = SmoothnessThresholds::for_spacing(c.delta_x);
  try {
    const auto fitted = fit_valid(extract_csrep(src, c.delta_x), th);
    if (!fitted) return std::nullopt;
    DatasetRecord r;
    r.id = id;
    r.source = source;
    r.meta = fitted->meta;
    r.coeffs = fitted->coeffs;
    r.csrep = decode_coeffs(r.meta, r.coeffs, c.delta_x, th);
    const Profile swept = sweep_envelope(r.csrep);
    if (!validate(swept, r.csrep, th).all()) return std::nullopt;
    r.profile = resample_arclength(src, c.profile_len);
    if (!(chamfer(r.profile.points, resample_arclength(swept, c.profile_len).points) <= c.roundtrip_tol))
      return std::nullopt;
    complete_meta(r.meta, r.csrep, derive_counts(r.meta, c.delta_x));
    r.label = eval_surrogate(r.csrep, c.reynolds);
    r.split = split_of(id, c.seed);
    return r;
  } catch (const DomainError&) {
    return std::nullopt;
  }
}

inline Dataset build_dataset(const PipelineConfig& c) {
  check_config(c);
  const std::vector<Candidate> cands = naca_candidates(c);
  std::vector<std::optional<DatasetRecord>> slots(cands.size());
  parallel_for(cands.size(), c.threads, [&](std::size_t i) {
    slots[i] = make_record(cands[i].id, cands[i].source, cands[i].make(c.source_points), c);
  });
  Dataset ds;
  std::size_t discarded = 0;
  for (auto& s : slots) {
    if (s) {
      ds.records.push_back(std::move(*s));
    } else {
      ++discarded;
    }
  }
  std::sort(ds.records.begin(), ds.records.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  std::vector<AeroLabel> labels;
  for (const DatasetRecord& r : ds.records) labels.push_back(r.label);
  ds.manifest.delta_x = c.delta_x;
  ds.manifest.profile_len = c.profile_len;
  ds.manifest.seed = c.seed;
  ds.manifest.reynolds = c.reynolds;
  ds.manifest.grid = build_grid(labels, c.grid_bins);
  for (DatasetRecord& r : ds.records) r.class_id = classify(r.label, ds.manifest.grid).class_id;
  update_counts(ds, discarded);
  return ds;
}

inline std::size_t nonempty_classes(const Dataset& ds) {
  std::vector<bool> hit(ds.manifest.grid.classes(), false);
  for (const DatasetRecord& r : ds.records) hit[static_cast<std::size_t>(r.class_id)] = true;
  return static_cast<std::size_t>(std::count(hit.begin(), hit.end(), true));
}

inline bool in_grid(const AeroLabel& l, const ClassGrid& g) {
  return l.cl >= g.cl_edges.front() && l.cl <= g.cl_edges.back() && l.cd >= g.cd_edges.front() &&
         l.cd <= g.cd_edges.back();
}

/// Grows the dataset to round(factor·N) records by jittering anchors and
/// coefficients of random base records. The grid and existing records are
/// kept as they are.
inline Dataset augment(const Dataset& base, double factor, Rng& rng, const PipelineConfig& c) {
  using M = MetaParams;
  if (!(factor >= 1.0)) throw DomainError("augment: factor must be at least 1");
  Dataset out = base;
  if (base.records.empty()) return out;
  const std::size_t target = static_cast<std::size_t>(std::llround(factor * static_cast<double>(base.records.size())));
  const double dx = base.manifest.delta_x;
  const auto th = SmoothnessThresholds::for_spacing(dx);
  const double j = c.aug_jitter;
  std::size_t attempts = 0, rejected = 0;
  const std::size_t max_attempts = 50 * (target - base.records.size()) + 100;
  while (out.records.size() < target && attempts < max_attempts) {
    ++attempts;
    const DatasetRecord& src = base.records[rng.below(base.records.size())];
    MetaParams m = src.meta;
    const double ys = std::max(std::abs(m(M::kSpineExt, M::kY) - m(M::kStart, M::kY)), 1e-3);
    m(M::kStart, M::kY) += j * ys * rng.normal();
    for (int row : {M::kStart, M::kSpineExt, M::kEnd}) m(row, M::kDy) *= 1.0 + j * rng.normal();
    for (int row : {M::kStart, M::kRadiusExt}) m(row, M::kR) *= 1.0 + j * rng.normal();
    m = repair_meta(m, dx, th);
    CoeffSeq cf = src.coeffs;
    for (double& a : cf.u_tilde) a = std::clamp(a * (1.0 + j * rng.normal()), 0.0, 1.0);
    for (double& a : cf.v_tilde) a = std::clamp(a * (1.0 + j * rng.normal()), 0.0, 1.0);
    if (meta_infeasibility(m, dx, th) || derive_counts(m, dx).n != cf.u_tilde.size()) {
      ++rejected;
      continue;
    }
    cf = clamp_feasible(m, cf, dx, th);
    DatasetRecord r;
    r.id = "aug-" + src.id + "-" + std::to_string(attempts);
    r.source = "augmented";
    r.meta = m;
    r.coeffs = cf;
    r.csrep = decode_coeffs(m, cf, dx, th);
    const Profile swept = sweep_envelope(r.csrep);
    r.label = eval_surrogate(r.csrep, base.manifest.reynolds);
    if (!validate(swept, r.csrep, th).all() || !in_grid(r.label, base.manifest.grid)) {
      ++rejected;
      continue;
    }
    complete_meta(r.meta, r.csrep, derive_counts(r.meta, dx));
    r.profile = resample_arclength(swept, base.manifest.profile_len);
    r.class_id = classify(r.label, base.manifest.grid).class_id;
    r.split = split_of(r.id, base.manifest.seed);
    out.records.push_back(std::move(r));
  }
  std::sort(out.records.begin(), out.records.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  const auto it = base.manifest.counts.find("discarded");
  update_counts(out, (it == base.manifest.counts.end() ? 0 : it->second) + rejected);
  return out;
}

}  // namespace airfoilgen
