#pragma once

#include <fmt/format.h>

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "geometry.hpp"
#include "kernels.hpp"
#include "log.hpp"
#include "material.hpp"
#include "parallel.hpp"
#include "reconstruct.hpp"
#include "specfun.hpp"

namespace carleman::cli {

using json = nlohmann::json;

inline constexpr int config_schema_version = 1;

enum ExitCode : int { exit_ok = 0, exit_config = 1, exit_selftest = 2, exit_numeric = 3, exit_table = 4 };

// --------------------------------------------------------------- config

/// One entry of the tau grid: an explicit value or the tau rule.
struct TauEntry {
  bool automatic = false;
  double value = 0.0;
};

/// Cells of one sweep block: every tau entry against every delta.
struct Sweep {
  std::vector<TauEntry> taus;
  std::vector<double> deltas;
};

struct Tolerances {
  double tau_slope_rel = 0.25;
  double tau_ratio = 0.1;
  double delta_exponent_rel = 0.3;
  double constant_spread = 5.0;
};

struct ExperimentConfig {
  std::string experiment;
  MaterialParams material;
  DomainSpec domain;
  int source_count = 4;
  std::uint64_t seed = 7;
  std::vector<Sweep> sweeps;
  std::vector<Vec3> probes;
  std::optional<double> M;  ///< empty: max over Sigma of the manufactured solution
  Tolerances tolerances;
  TauReading reading = TauReading::literal;
  bool quadrature_floor = true;
  unsigned threads = 0;  ///< 0: all available cores
  std::string output_dir = ".";
};

namespace detail {

/// Typed, path-aware access to one JSON object; unknown keys are rejected.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) fail(path_, "expected an object");
  }

  [[noreturn]] static void fail(const std::string& path, const std::string& what) {
    throw ConfigError((path.empty() ? std::string("<root>") : path) + ": " + what);
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& get(const std::string& key) {
    if (!has(key)) fail(at(key), "required key is missing");
    return j_.at(key);
  }

  double number(const std::string& key, double fallback) {
    if (!has(key)) return fallback;
    return as_number(j_.at(key), at(key));
  }

  static double as_number(const json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "expected a number");
    double d = v.get<double>();
    if (!std::isfinite(d)) fail(path, "expected a finite number");
    return d;
  }

  std::int64_t integer(const std::string& key, std::int64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_integer()) fail(at(key), "expected an integer");
    return v.get<std::int64_t>();
  }

  std::uint64_t unsigned_integer(const std::string& key, std::uint64_t fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_number_integer() || (v.is_number_integer() && !v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      fail(at(key), "expected a non-negative integer");
    return v.get<std::uint64_t>();
  }

  std::string string(const std::string& key, const std::string& fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_string()) fail(at(key), "expected a string");
    return v.get<std::string>();
  }

  bool boolean(const std::string& key, bool fallback) {
    if (!has(key)) return fallback;
    const json& v = j_.at(key);
    if (!v.is_boolean()) fail(at(key), "expected true or false");
    return v.get<bool>();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) fail(at(it.key()), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline Vec3 parse_point(const json& v, const std::string& path) {
  if (!v.is_array() || v.size() != 3) Fields::fail(path, "expected an array of three numbers");
  Vec3 p;
  for (int i = 0; i < 3; ++i) p[i] = Fields::as_number(v[i], path + "[" + std::to_string(i) + "]");
  return p;
}

}  // namespace detail

/// Parses and validates a config document. Everything that can be checked
/// without evaluating a kernel is checked here.
inline ExperimentConfig parse_config(const json& doc) {
  using detail::Fields;
  ExperimentConfig c;
  Fields root(doc, "");
  const json& ver = root.get("schema_version");
  if (!ver.is_number_integer() || ver.get<int>() != config_schema_version)
    Fields::fail("schema_version", "unsupported schema version (expected " + std::to_string(config_schema_version) + ")");
  c.experiment = root.string("experiment", "");
  if (c.experiment.empty() || c.experiment.find_first_of(",\"\n") != std::string::npos)
    Fields::fail("experiment", "expected a non-empty name without commas, quotes or newlines");

  if (root.has("material")) {
    Fields m(root.get("material"), "material");
    auto& p = c.material;
    p.lambda_c = m.number("lambda", p.lambda_c);
    p.mu_c = m.number("mu", p.mu_c);
    p.nu_c = m.number("nu", p.nu_c);
    p.beta_c = m.number("beta", p.beta_c);
    p.epsilon_c = m.number("epsilon", p.epsilon_c);
    p.alpha_c = m.number("alpha", p.alpha_c);
    p.rho_d = m.number("rho", p.rho_d);
    p.theta_c = m.number("theta", p.theta_c);
    p.sigma_f = m.number("sigma", p.sigma_f);
    m.finish();
  }
  auto bad = validate(c.material);
  if (!bad.empty()) Fields::fail("material", "violates " + bad.front());

  {
    Fields d(root.get("domain"), "domain");
    std::string branch = d.string("branch", "");
    if (branch == "cap") {
      c.domain.branch = Branch::cap;
      c.domain.radius = d.number("radius", 1.0);
      if (!(c.domain.radius > 0.0)) Fields::fail("domain.radius", "must be positive");
    } else if (branch == "cone") {
      c.domain.branch = Branch::cone;
      c.domain.rho_e = d.number("rho_e", 2.0);
      c.domain.height = d.number("height", 1.0);
      if (!(c.domain.rho_e > 1.0)) Fields::fail("domain.rho_e", "must exceed 1");
      if (!(c.domain.height > 0.0)) Fields::fail("domain.height", "must be positive");
      c.domain.kappa = std::tan(std::numbers::pi / (2.0 * c.domain.rho_e));
    } else {
      Fields::fail("domain.branch", "expected \"cap\" or \"cone\"");
    }
    auto res = d.integer("resolution", 24);
    if (res < 3 || res > 64) Fields::fail("domain.resolution", "must lie in [3, 64] (at least 16 nodes per surface)");
    c.domain.resolution = static_cast<int>(res);
    d.finish();
  }

  if (root.has("sources")) {
    Fields s(root.get("sources"), "sources");
    auto n = s.integer("count", c.source_count);
    if (n < 1 || n > 64) Fields::fail("sources.count", "must lie in [1, 64]");
    c.source_count = static_cast<int>(n);
    s.finish();
  }
  c.seed = root.unsigned_integer("seed", c.seed);

  WaveNumbers wn;
  try {
    wn = wave_numbers(c.material);
    kernel_coeffs(c.material, wn);
  } catch (const Error& e) {
    Fields::fail("material", e.what());
  }

  {
    const json& sw = root.get("sweeps");
    std::vector<std::pair<const json*, std::string>> blocks;
    if (sw.is_array()) {
      if (sw.empty()) Fields::fail("sweeps", "expected at least one sweep block");
      for (std::size_t i = 0; i < sw.size(); ++i) blocks.push_back({&sw[i], "sweeps[" + std::to_string(i) + "]"});
    } else {
      blocks.push_back({&sw, "sweeps"});
    }
    for (auto& [bj, bpath] : blocks) {
      Fields s(*bj, bpath);
      Sweep sweep;
      const json& taus = s.get("tau");
      if (!taus.is_array() || taus.empty()) Fields::fail(s.at("tau"), "expected a non-empty array");
      for (std::size_t i = 0; i < taus.size(); ++i) {
        std::string path = s.at("tau") + "[" + std::to_string(i) + "]";
        TauEntry t;
        if (taus[i].is_string() && taus[i].get<std::string>() == "auto") {
          t.automatic = true;
        } else {
          t.value = Fields::as_number(taus[i], path);
          if (!(t.value > wn.k_max()))
            Fields::fail(path, fmt::format("tau must exceed max k_l = {:.6g}", wn.k_max()));
        }
        sweep.taus.push_back(t);
      }
      const json& deltas = s.get("delta");
      if (!deltas.is_array() || deltas.empty()) Fields::fail(s.at("delta"), "expected a non-empty array");
      for (std::size_t i = 0; i < deltas.size(); ++i) {
        std::string path = s.at("delta") + "[" + std::to_string(i) + "]";
        double d = Fields::as_number(deltas[i], path);
        if (!(d >= 0.0 && d < 1.0)) Fields::fail(path, "delta must lie in [0, 1)");
        sweep.deltas.push_back(d);
      }
      bool any_auto = std::any_of(sweep.taus.begin(), sweep.taus.end(), [](auto& t) { return t.automatic; });
      bool any_zero = std::any_of(sweep.deltas.begin(), sweep.deltas.end(), [](double d) { return d == 0.0; });
      if (any_auto && any_zero)
        Fields::fail(bpath, "tau \"auto\" needs every delta > 0 (the rule uses ln(M/delta))");
      s.finish();
      c.sweeps.push_back(std::move(sweep));
    }
  }

  {
    const json& probes = root.get("probes");
    if (!probes.is_array() || probes.empty()) Fields::fail("probes", "expected a non-empty array of points");
    for (std::size_t i = 0; i < probes.size(); ++i) {
      std::string path = "probes[" + std::to_string(i) + "]";
      Vec3 p = detail::parse_point(probes[i], path);
      if (!c.domain.contains(p)) Fields::fail(path, "probe is not inside the domain");
      c.probes.push_back(p);
    }
  }

  if (root.has("M")) {
    const json& m = root.get("M");
    if (m.is_string() && m.get<std::string>() == "auto") {
      c.M.reset();
    } else {
      double v = Fields::as_number(m, "M");
      if (!(v > 0.0)) Fields::fail("M", "must be positive");
      c.M = v;
    }
  }

  if (root.has("tolerances")) {
    Fields t(root.get("tolerances"), "tolerances");
    auto& tol = c.tolerances;
    tol.tau_slope_rel = t.number("tau_slope_rel", tol.tau_slope_rel);
    tol.tau_ratio = t.number("tau_ratio", tol.tau_ratio);
    tol.delta_exponent_rel = t.number("delta_exponent_rel", tol.delta_exponent_rel);
    tol.constant_spread = t.number("constant_spread", tol.constant_spread);
    if (!(tol.tau_slope_rel > 0 && tol.tau_ratio > 0 && tol.delta_exponent_rel > 0 && tol.constant_spread >= 1))
      Fields::fail("tolerances", "tolerances must be positive (constant_spread >= 1)");
    t.finish();
  }

  std::string reading = root.string("tau_reading", "literal");
  if (reading == "literal") c.reading = TauReading::literal;
  else if (reading == "product_rule") c.reading = TauReading::product_rule;
  else Fields::fail("tau_reading", "expected \"literal\" or \"product_rule\"");

  c.quadrature_floor = root.boolean("quadrature_floor", c.quadrature_floor);
  auto threads = root.integer("threads", 0);
  if (threads < 0 || threads > 1024) Fields::fail("threads", "must lie in [0, 1024]");
  c.threads = static_cast<unsigned>(threads);
  c.output_dir = root.string("output_dir", c.output_dir);
  root.finish();
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open config file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": invalid JSON: " + e.what());
  }
  return parse_config(doc);
}

// -------------------------------------------------------------- results

/// Column order of results.csv.
inline const std::vector<std::string>& result_columns() {
  static const std::vector<std::string> cols = {
      "experiment", "branch",     "sweep_id",  "probe_id",  "x1",          "x2",          "x3",         "boundary_distance",
      "tau",        "tau_rule",   "delta",     "M",           "error_abs",   "error_rel",  "u_norm",
      "bound",      "sigma_mass", "s_mass",    "quad_floor",  "kernel_quad", "nodes_s",    "nodes_sigma",
      "seed",       "noise_seed"};
  return cols;
}

struct ResultRow {
  std::string experiment;
  Branch branch = Branch::cap;
  int sweep_id = 0;
  int probe_id = 0;
  Vec3 probe{};
  double boundary_distance = 0.0;
  double tau = 0.0;
  std::string tau_rule;  ///< explicit, auto, auto-floored
  double delta = 0.0;
  double M = 0.0;
  double error_abs = 0.0;
  double error_rel = 0.0;
  double u_norm = 0.0;
  double bound = 0.0;       ///< M sigma_mass + delta s_mass
  double sigma_mass = 0.0;  ///< sum over Sigma of w (|Pi| + |T Pi|)
  double s_mass = 0.0;      ///< same over S
  double quad_floor = 0.0;  ///< |U_tau - U_tau at 5/4 resolution|, noise-free rows only
  double kernel_quad = 0.0;
  std::size_t nodes_s = 0;
  std::size_t nodes_sigma = 0;
  std::uint64_t seed = 0;
  std::uint64_t noise_seed = 0;
};

inline std::string num(double v) { return fmt::format("{:.10e}", v); }

inline std::string csv_line(const ResultRow& r) {
  return fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}", r.experiment,
                     to_string(r.branch), r.sweep_id, r.probe_id, num(r.probe[0]), num(r.probe[1]), num(r.probe[2]),
                     num(r.boundary_distance), num(r.tau), r.tau_rule, num(r.delta), num(r.M), num(r.error_abs),
                     num(r.error_rel), num(r.u_norm), num(r.bound), num(r.sigma_mass), num(r.s_mass),
                     num(r.quad_floor), num(r.kernel_quad), r.nodes_s, r.nodes_sigma, r.seed, r.noise_seed);
}

inline std::string csv_header() {
  std::string h;
  for (const auto& c : result_columns()) h += (h.empty() ? "" : ",") + c;
  return h;
}

// ----------------------------------------------------------- reconstruct

struct RunOutput {
  std::vector<ResultRow> rows;
  std::vector<double> seconds;  ///< wall time per row
  json audit;
};

/// Noise seed of one delta value; equal deltas get equal noise in every block.
inline std::uint64_t noise_seed_for(std::uint64_t seed, double delta) {
  return seed * 0x9E3779B97F4A7C15ULL ^ (std::bit_cast<std::uint64_t>(delta) * 0xBF58476D1CE4E5B9ULL);
}

namespace detail {

inline json point_json(const Vec3& p) { return json::array({p[0], p[1], p[2]}); }

inline json tau_audit_json(const TauAudit& a) {
  return {{"taus", a.taus},           {"errors", a.errors},           {"quad_floors", a.floors},
          {"prefactor_power", a.power}, {"slope", a.slope},             {"expected_slope", a.expected},
          {"ratio_last_first", a.ratio}, {"decreasing", a.decreasing},  {"floor_reached", a.floor_reached},
          {"slope_ok", a.slope_ok},     {"ratio_ok", a.ratio_ok}};
}

inline json delta_audit_json(const DeltaAudit& a) {
  json j = {{"deltas", a.deltas},
            {"taus", a.taus},
            {"errors", a.errors},
            {"log_power", a.power},
            {"exponent", a.exponent},
            {"exponent_log_adjusted", a.exponent_log_adjusted},
            {"constants", a.constants},
            {"bounds", a.bounds},
            {"constant_spread", a.constant_spread},
            {"error_monotone", a.error_monotone},
            {"bound_monotone", a.bound_monotone},
            {"exponent_ok", a.exponent_ok},
            {"spread_ok", a.spread_ok}};
  j["expected_exponent"] = std::isnan(a.expected) ? json(nullptr) : json(a.expected);
  return j;
}

struct Cell {
  std::size_t sweep = 0;
  std::size_t probe = 0;
  TauEntry tau;
  double delta = 0.0;
};

/// Cells in (sweep block, probe, tau, delta) order.
inline std::vector<Cell> cells_of(const ExperimentConfig& cfg) {
  std::vector<Cell> cells;
  for (std::size_t s = 0; s < cfg.sweeps.size(); ++s)
    for (std::size_t p = 0; p < cfg.probes.size(); ++p)
      for (const auto& t : cfg.sweeps[s].taus)
        for (double d : cfg.sweeps[s].deltas) cells.push_back({s, p, t, d});
  return cells;
}

}  // namespace detail

/// Runs every sweep cell. Rows come out in (sweep block, probe, tau, delta)
/// order whatever the thread count.
inline RunOutput run_sweep(const ExperimentConfig& cfg) {
  const unsigned threads = cfg.threads ? cfg.threads : default_threads();
  const Medium medium = Medium::from(cfg.material);
  const DomainSpec& ds = cfg.domain;
  auto build = [&](int res) {
    return ds.branch == Branch::cap ? make_cap(ds.radius, res) : make_cone(ds.rho_e, ds.height, res);
  };
  const DomainQuadrature dq = build(ds.resolution);
  const DomainQuadrature dq_fine = build(2 * ds.resolution);
  const int floor_res = static_cast<int>(std::lround(1.25 * ds.resolution));
  const auto cells = detail::cells_of(cfg);
  const bool any_clean = std::any_of(cells.begin(), cells.end(), [](auto& c) { return c.delta == 0.0; });
  std::optional<DomainQuadrature> dq_floor;
  if (cfg.quadrature_floor && any_clean) dq_floor = build(floor_res);

  const ManufacturedSolution ms = manufacture(ds, medium, cfg.source_count, cfg.seed);
  const double M = cfg.M ? *cfg.M : data_bound(ms, dq_fine.Sigma, threads);
  const CauchyData clean = cauchy_data(ms, dq.S, threads);
  CauchyData floor_data;
  if (dq_floor) floor_data = cauchy_data(ms, dq_floor->S, threads);
  std::map<double, CauchyData> noisy;
  std::map<double, TauChoice> auto_tau;
  for (const auto& c : cells) {
    if (c.delta == 0.0 || noisy.count(c.delta)) continue;
    if (!(c.delta < M))
      throw ConfigError(fmt::format("sweeps[{}]: delta = {} is not below M = {:.6g}", c.sweep, c.delta, M));
    noisy[c.delta] = add_noise(clean, c.delta, noise_seed_for(cfg.seed, c.delta));
    auto_tau[c.delta] = choose_tau(M, c.delta, dq, medium.wn);
  }

  PhiOptions phi;
  phi.reading = cfg.reading;
  auto spec_for = [&](double tau) {
    return ds.branch == Branch::cap ? KernelSpec::cap(tau, phi) : KernelSpec::cone(tau, ds.rho_e, phi);
  };

  RunOutput out;
  out.rows.resize(cells.size());
  out.seconds.resize(cells.size());
  std::vector<Vec6> truth(cfg.probes.size());
  for (std::size_t p = 0; p < cfg.probes.size(); ++p) truth[p] = ms.value(cfg.probes[p]);

  parallel_for(cells.size(), threads, [&](std::size_t i) {
    const auto t0 = std::chrono::steady_clock::now();
    const detail::Cell& cell = cells[i];
    const Vec3& x = cfg.probes[cell.probe];
    ResultRow& r = out.rows[i];
    r.experiment = cfg.experiment;
    r.branch = ds.branch;
    r.sweep_id = static_cast<int>(cell.sweep);
    r.probe_id = static_cast<int>(cell.probe);
    r.probe = x;
    r.boundary_distance = ds.boundary_distance(x);
    r.delta = cell.delta;
    r.M = M;
    r.nodes_s = dq.S.size();
    r.nodes_sigma = dq.Sigma.size();
    r.seed = cfg.seed;
    r.noise_seed = r.delta > 0.0 ? noise_seed_for(cfg.seed, r.delta) : 0;
    if (cell.tau.automatic) {
      const TauChoice& tc = auto_tau.at(cell.delta);
      r.tau = tc.tau;
      r.tau_rule = tc.floored ? "auto-floored" : "auto";
    } else {
      r.tau = cell.tau.value;
      r.tau_rule = "explicit";
    }
    try {
      const KernelSpec spec = spec_for(r.tau);
      check_carleman_spec(spec, medium);
      const CauchyData& data = r.delta > 0.0 ? noisy.at(r.delta) : clean;
      BoundarySum b = boundary_sum(x, data, dq.S, medium, spec);
      Vec6 e;
      for (int c = 0; c < 6; ++c) e[c] = b.value[c] - truth[cell.probe][c];
      r.u_norm = norm(truth[cell.probe]);
      r.error_abs = norm(e);
      r.error_rel = r.error_abs / r.u_norm;
      r.kernel_quad = b.quad_error;
      r.s_mass = b.mass;
      r.sigma_mass = kernel_mass(x, dq.Sigma, medium, spec);
      r.bound = M * r.sigma_mass + r.delta * r.s_mass;
      if (dq_floor && r.delta == 0.0) {
        Vec6 c = boundary_sum(x, floor_data, dq_floor->S, medium, spec).value;
        Vec6 d;
        for (int k = 0; k < 6; ++k) d[k] = b.value[k] - c[k];
        r.quad_floor = norm(d);
      }
    } catch (...) {
      rethrow_with_context(
          fmt::format("probe {} ({}, {}, {}), tau {}, delta {}", cell.probe, x[0], x[1], x[2], r.tau, r.delta));
    }
    out.seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });

  // audit
  const bool cap = ds.branch == Branch::cap;
  json& a = out.audit;
  a["schema_version"] = config_schema_version;
  a["experiment"] = cfg.experiment;
  a["branch"] = to_string(ds.branch);
  a["M"] = M;
  a["M_source"] = cfg.M ? "config" : "manufactured";
  a["k_max"] = medium.wn.k_max();
  a["x3_top"] = ds.x3_top();
  a["nodes_s"] = dq.S.size();
  a["nodes_sigma"] = dq.Sigma.size();
  if (!cap) {
    a["rho_e"] = ds.rho_e;
    a["kappa"] = ds.kappa;
    a["R"] = std::pow(cone_r_power(dq.S, ds.rho_e), 1.0 / ds.rho_e);
  }
  if (dq_floor) a["floor_resolution"] = floor_res;
  bool pass = true;
  json probes = json::array();
  std::vector<double> qs;
  for (std::size_t p = 0; p < cfg.probes.size(); ++p) {
    const Vec3& x = cfg.probes[p];
    json pj;
    pj["probe_id"] = p;
    pj["point"] = detail::point_json(x);
    pj["boundary_distance"] = ds.boundary_distance(x);

    // noise-free explicit-tau rows and tau-rule rows, one per abscissa
    std::map<double, const ResultRow*> clean_rows, rule_rows;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].probe != p) continue;
      if (!cells[i].tau.automatic && cells[i].delta == 0.0) clean_rows.emplace(cells[i].tau.value, &out.rows[i]);
      if (cells[i].tau.automatic) rule_rows.emplace(cells[i].delta, &out.rows[i]);
    }

    if (clean_rows.size() >= 3) {
      std::vector<double> taus, errs, floors, mass;
      for (auto& [t, r] : clean_rows) {
        taus.push_back(t);
        errs.push_back(r->error_abs);
        floors.push_back(r->quad_floor);
        mass.push_back(r->sigma_mass);
      }
      const double expected = cap ? -x[2] : -std::pow(x[2], ds.rho_e);
      const int power = cap ? 1 : 3;
      TauTolerances tol{cfg.tolerances.tau_slope_rel, cfg.tolerances.tau_ratio, cap};
      TauAudit ta = audit_tau(x, taus, errs, floors, expected, 0, tol);
      TauAudit ma = audit_tau(x, taus, mass, std::vector<double>(taus.size(), 0.0), expected, power, tol);
      json tj = detail::tau_audit_json(ta);
      json mj = {{"values", ma.errors},
                 {"prefactor_power", ma.power},
                 {"slope", ma.slope},
                 {"expected_slope", ma.expected},
                 {"decreasing", ma.decreasing},
                 {"slope_ok", ma.slope_ok}};
      bool ok = ta.decreasing && ma.decreasing;
      if (cap) ok = ok && ta.ratio_ok && ta.slope_ok && ma.slope_ok;
      tj["pass"] = ok;
      pj["tau_sweep"] = tj;
      pj["sigma_mass"] = mj;
      pass = pass && ok;
    } else {
      pj["tau_sweep"] = {{"skipped", "fewer than 3 noise-free explicit tau values"}};
    }

    if (rule_rows.size() >= 3) {
      std::vector<double> deltas, taus, errs;
      for (auto& [d, r] : rule_rows) {
        deltas.push_back(d);
        taus.push_back(r->tau);
        errs.push_back(r->error_abs);
      }
      DeltaTolerances tol{cfg.tolerances.delta_exponent_rel, cfg.tolerances.constant_spread, cap};
      const double expected = cap ? x[2] / ds.x3_top() : std::numeric_limits<double>::quiet_NaN();
      DeltaAudit da = audit_delta(x, M, deltas, taus, errs, expected, cap ? 1 : 3, tol);
      json dj = detail::delta_audit_json(da);
      bool ok = da.error_monotone && da.exponent_ok;
      if (cap) {
        ok = ok && da.bound_monotone && da.spread_ok;
      } else {
        dj["q"] = da.exponent;
        qs.push_back(da.exponent);
      }
      dj["pass"] = ok;
      pj["delta_sweep"] = dj;
      pass = pass && ok;
    } else {
      pj["delta_sweep"] = {{"skipped", "fewer than 3 delta values with tau \"auto\""}};
    }
    probes.push_back(pj);
  }
  a["probes"] = probes;
  if (!cap && !qs.empty()) a["q"] = qs.front();
  a["pass"] = pass;
  return out;
}

inline void write_outputs(const RunOutput& out, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream f(dir / "results.csv", std::ios::binary);
    f << csv_header() << '\n';
    for (const auto& r : out.rows) f << csv_line(r) << '\n';
    if (!f) throw Error("cannot write " + (dir / "results.csv").string());
  }
  {
    std::ofstream f(dir / "timing.csv", std::ios::binary);
    f << "row,probe_id,tau,delta,seconds\n";
    for (std::size_t i = 0; i < out.rows.size(); ++i)
      f << fmt::format("{},{},{},{},{:.6f}\n", i, out.rows[i].probe_id, num(out.rows[i].tau), num(out.rows[i].delta),
                       out.seconds[i]);
  }
  {
    std::ofstream f(dir / "audit.json", std::ios::binary);
    f << out.audit.dump(2) << '\n';
  }
}

struct ReconstructOptions {
  std::string config;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
};

inline int run_reconstruct(const ReconstructOptions& opt, std::ostream& err) {
  ExperimentConfig cfg;
  try {
    cfg = load_config(opt.config);
    if (opt.seed) cfg.seed = *opt.seed;
    if (opt.threads) cfg.threads = *opt.threads;
    if (opt.out) cfg.output_dir = *opt.out;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return exit_config;
  }
  try {
    RunOutput out = run_sweep(cfg);
    write_outputs(out, cfg.output_dir);
    log().info("wrote {} rows to {}", out.rows.size(), cfg.output_dir);
    return exit_ok;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return exit_config;
  } catch (const std::exception& e) {
    err << "numerical failure: " << e.what() << '\n';
    return exit_numeric;
  }
}

// ------------------------------------------------------------- selftest

struct CheckResult {
  std::string name;
  double measured = 0.0;
  double tolerance = 0.0;
  bool pass = false;
  std::string detail;
};

struct SelftestOptions {
  std::string filter;       ///< substring of the check name; empty runs all
  double c3_scale = 1.0;    ///< fault injection for the Carleman representation check
};

namespace detail {

inline double max_ml_e1_error() {
  double worst = 0.0;
  for (int i = 0; i <= 100; ++i) {
    double x = -5.0 + 0.1 * i;
    worst = std::max(worst, std::abs(mittag_leffler(1.0, x) - std::exp(x)));
  }
  return worst;
}

inline double max_j0_error() {
  // J0 at 1, 5, 10 and its first zero
  const double ref[4][2] = {{1.0, 0.7651976865579666},
                            {5.0, -0.1775967713143383},
                            {10.0, -0.2459357644513483},
                            {2.404825557695773, 0.0}};
  double worst = 0.0;
  for (auto& r : ref) worst = std::max(worst, std::abs(bessel_j0(r[0]) - r[1]));
  return worst;
}

inline double max_weber_error() {
  double worst = 0.0;
  for (double tau : {2.0, 3.5, 5.0})
    for (double k : {0.5, 1.0, 1.5})
      for (double s : {0.05, 0.3, 0.8}) {
        QuadSpec q;
        q.nodes = 24;
        q.panel_width = 0.5;
        q.abel_eta = 0.2;
        q.extrapolation_order = 5;
        q.tolerance = 1e-4;
        auto f = [&](double u) {
          double a = std::sqrt(u * u + s);
          return std::sin(tau * a) / a * std::cos(k * u);
        };
        worst = std::max(worst, std::abs(semiinf_quad(f, q).value - weber_disc(tau, k, s)));
      }
  return worst;
}

inline double max_psi_residual(const Medium& m) {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int t = 0; t < 20; ++t) {
    Vec3 x{uniform01(rng), uniform01(rng), uniform01(rng)};
    Vec3 dir{2 * uniform01(rng) - 1, 2 * uniform01(rng) - 1, 2 * uniform01(rng) - 1};
    double len = norm(dir), r = 0.3 + 1.2 * uniform01(rng);
    Vec3 y{x[0] + r * dir[0] / len, x[1] + r * dir[1] / len, x[2] + r * dir[2] / len};
    for (int col = 0; col < 6; ++col) {
      Field6 column = [&](const Vec3& z) {
        auto k = psi_matrix(z, x, m);
        Vec6 v;
        for (int row = 0; row < 6; ++row) v[row] = k.m[row][col];
        return v;
      };
      Vec6 res = apply_system_fd(column, y, m);
      Vec6 ref = column(y);
      worst = std::max(worst, norm(res) / norm(ref));
    }
  }
  return worst;
}

}  // namespace detail

inline std::vector<CheckResult> run_selftest(const SelftestOptions& opt) {
  std::vector<CheckResult> out;
  auto want = [&](const std::string& name) { return opt.filter.empty() || name.find(opt.filter) != std::string::npos; };
  auto record = [&](std::string name, double measured, double tol, std::string detail = {}) {
    out.push_back({std::move(name), measured, tol, measured <= tol, std::move(detail)});
  };
  auto guarded = [&](const std::string& name, double tol, const std::function<double()>& f) {
    if (!want(name)) return;
    try {
      record(name, f(), tol);
    } catch (const std::exception& e) {
      out.push_back({name, std::numeric_limits<double>::infinity(), tol, false, e.what()});
    }
  };

  guarded("specfun.mittag_leffler_e1_exp", 1e-10, detail::max_ml_e1_error);
  guarded("specfun.mittag_leffler_cosh", 1e-8,
          [] { return std::abs(mittag_leffler_classical(2.0, 1.0).real() - std::cosh(1.0)); });
  guarded("specfun.bessel_j0", 1e-12, detail::max_j0_error);
  guarded("specfun.weber_disc_abel", 5e-5, detail::max_weber_error);

  const Medium m = Medium::from({});
  guarded("kernels.psi_residual", 1e-4, [&] { return detail::max_psi_residual(m); });
  guarded("kernels.phi_cap_oracle", 1e-5, [] {
    Vec3 y{0.3, -0.2, 0.1}, x{0.0, 0.1, 0.5};
    auto ref = phi_cap_oracle(y, x, 1.2, 4.0);
    return std::abs(phi_cap(y, x, 1.2, 4.0).value() - ref.value) / std::abs(ref.value);
  });

  const bool need_geometry =
      want("geometry.betti") || want("representation.fundamental") || want("representation.carleman_cap");
  if (need_geometry) {
    const DomainQuadrature dq = make_cap(1.0, 16);
    const SurfaceQuadrature full = dq.full();
    const ManufacturedSolution u = manufacture(dq.domain, m, 4, 7);
    guarded("geometry.betti", 1e-6, [&] {
      ManufacturedSolution v = manufacture(dq.domain, m, 3, 99);
      return betti(u, v, full).relative();
    });
    CauchyData data;
    if (want("representation.fundamental") || want("representation.carleman_cap")) data = cauchy_data(u, full);
    const std::vector<Vec3> probes = {{0.0, 0.0, 0.3}, {0.2, 0.1, 0.4}, {-0.3, 0.2, 0.5}, {0.1, -0.4, 0.3}, {0.0, 0.2, 0.7}};
    auto worst_rel = [&](const KernelSpec& spec) {
      double worst = 0.0;
      for (const auto& x : probes) {
        Vec6 r = boundary_sum(x, data, full, m, spec).value, t = u.value(x);
        Vec6 e;
        for (int c = 0; c < 6; ++c) e[c] = r[c] - t[c];
        worst = std::max(worst, norm(e) / norm(t));
      }
      return worst;
    };
    guarded("representation.fundamental", 1e-3, [&] { return worst_rel(KernelSpec::fundamental()); });
    guarded("representation.carleman_cap", 1e-3, [&] {
      PhiOptions o;
      o.c3_scale = opt.c3_scale;
      return worst_rel(KernelSpec::cap(4.0, o));
    });
  }
  return out;
}

inline int report_selftest(const std::vector<CheckResult>& checks, std::ostream& os) {
  bool ok = !checks.empty();
  for (const auto& c : checks) {
    os << fmt::format("{:<34} {}  measured {:.3e}  tolerance {:.1e}{}\n", c.name, c.pass ? "PASS" : "FAIL",
                      c.measured, c.tolerance, c.detail.empty() ? "" : "  (" + c.detail + ")");
    ok = ok && c.pass;
  }
  if (checks.empty()) os << "no checks matched the filter\n";
  os << fmt::format("{} of {} checks passed\n",
                    std::count_if(checks.begin(), checks.end(), [](auto& c) { return c.pass; }), checks.size());
  return ok ? exit_ok : exit_selftest;
}

// ---------------------------------------------------------------- table

struct TableGroup {
  std::string branch;
  int probe_id = 0;
  std::string sweep;  ///< "tau" (noise-free, explicit tau) or "delta" (tau rule)
  std::vector<double> x, log_error;
  double slope = 0.0;
};

/// Column order of the plot-ready CSV written by `table`.
inline const std::vector<std::string>& plot_columns() {
  static const std::vector<std::string> cols = {"branch", "probe_id", "sweep", "x", "log_error", "slope"};
  return cols;
}

namespace detail {

inline std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace detail

/// Groups rows by branch, probe and sweep kind and fits ln(error) against tau
/// (noise-free explicit rows) and against ln(delta) (tau-rule rows).
inline std::vector<TableGroup> convergence_groups(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw AuditError("results file is empty");
  auto head = detail::split_csv(line);
  if (head != result_columns()) throw AuditError("results header does not match the documented schema");
  auto col = [&](const std::string& n) {
    return static_cast<std::size_t>(std::find(head.begin(), head.end(), n) - head.begin());
  };
  const std::size_t cb = col("branch"), cp = col("probe_id"), ct = col("tau"), cr = col("tau_rule"), cd = col("delta"),
                    ce = col("error_abs");
  std::map<std::tuple<std::string, int, std::string>, TableGroup> groups;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = detail::split_csv(line);
    if (cells.size() != head.size()) throw AuditError("results line " + std::to_string(lineno) + ": wrong column count");
    double tau = std::stod(cells[ct]), delta = std::stod(cells[cd]), err = std::stod(cells[ce]);
    int probe = std::stoi(cells[cp]);
    std::string sweep;
    double x;
    if (cells[cr] == "explicit" && delta == 0.0) {
      sweep = "tau";
      x = tau;
    } else if (cells[cr] != "explicit" && delta > 0.0) {
      sweep = "delta";
      x = std::log(delta);
    } else {
      continue;
    }
    auto& g = groups[{cells[cb], probe, sweep}];
    g.branch = cells[cb];
    g.probe_id = probe;
    g.sweep = sweep;
    g.x.push_back(x);
    g.log_error.push_back(std::log(err));
  }
  std::vector<TableGroup> out;
  for (auto& [key, g] : groups) {
    if (g.x.size() < 3) continue;
    std::vector<std::size_t> idx(g.x.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return g.x[a] < g.x[b]; });
    TableGroup s = g;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      s.x[i] = g.x[idx[i]];
      s.log_error[i] = g.log_error[idx[i]];
    }
    s.slope = fit_line(s.x, s.log_error).slope;
    out.push_back(std::move(s));
  }
  return out;
}

inline void write_table(const std::vector<TableGroup>& groups, std::ostream& text, std::ostream* plot) {
  std::string branch;
  for (const auto& g : groups) {
    if (g.branch != branch) {
      branch = g.branch;
      text << "== branch " << branch << " ==\n";
    }
    text << fmt::format("probe {} vs {} ({}):\n", g.probe_id, g.sweep, g.sweep == "tau" ? "tau" : "ln delta");
    for (std::size_t i = 0; i < g.x.size(); ++i) text << fmt::format("  {:>12.5g}  {:>12.5f}\n", g.x[i], g.log_error[i]);
    text << fmt::format("  slope {:.5f}\n", g.slope);
  }
  if (plot) {
    std::string h;
    for (const auto& c : plot_columns()) h += (h.empty() ? "" : ",") + c;
    *plot << h << '\n';
    for (const auto& g : groups)
      for (std::size_t i = 0; i < g.x.size(); ++i)
        *plot << fmt::format("{},{},{},{},{},{}\n", g.branch, g.probe_id, g.sweep, num(g.x[i]), num(g.log_error[i]),
                             num(g.slope));
  }
}

inline int run_table(const std::string& in_path, const std::optional<std::string>& plot_path, std::ostream& os,
                     std::ostream& err) {
  std::ifstream in(in_path);
  if (!in) {
    err << "cannot open " << in_path << '\n';
    return exit_table;
  }
  try {
    auto groups = convergence_groups(in);
    if (groups.empty()) {
      err << "insufficient rows: no probe has a sweep with at least 3 points\n";
      return exit_table;
    }
    std::ofstream plot;
    if (plot_path) plot.open(*plot_path, std::ios::binary);
    write_table(groups, os, plot_path ? &plot : nullptr);
    return exit_ok;
  } catch (const std::exception& e) {
    err << "table: " << e.what() << '\n';
    return exit_table;
  }
}

}  // namespace carleman::cli
