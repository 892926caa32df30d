#include "pmns/run.hpp"

#include <omp.h>
#include <openssl/evp.h>
#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "pmns/bounds.hpp"
#include "pmns/initdata.hpp"
#include "pmns/kernel_oracle.hpp"
#include "pmns/lattice.hpp"
#include "pmns/montecarlo.hpp"
#include "pmns/nonlinear.hpp"
#include "pmns/rng.hpp"
#include "pmns/stats.hpp"
#include "pmns/stepper.hpp"
#include "pmns/symbols.hpp"

namespace fs = std::filesystem;

namespace pmns {

const std::vector<std::string>& experiment_subcommands() {
  static const std::vector<std::string> s = {"sample",      "evolve",       "bounds", "concentrate",
                                             "density",     "kernel-check", "census"};
  return s;
}

std::string default_out_dir() {
  const char* env = std::getenv("PMNS_OUT_DIR");
  return env && *env ? env : "runs";
}

Json default_config() {
  Json c;
  c["run"] = {{"seed", nullptr}, {"threads", 1}, {"ladder", Json::array()}, {"out_dir", ""}};
  c["lattice"] = {{"K", nullptr}, {"kappa", 0.25}};
  c["initdata"] = {{"amplitude", 0.0},
                   {"amplitude_exponent", 0.25},
                   {"phases", "random"},
                   {"rv", "bernoulli"},
                   {"max_csv_rows", 5000000}};
  c["symbol"] = {{"kind", "navier_stokes"}};
  c["stepper"] = {{"rho", 0.125}, {"T", 0.0},    {"n_intervals", 0}, {"q_sub", 4},
                  {"refine", 1},  {"half_width", 2.5}, {"probes", 10}, {"trace", true}};
  c["bounds"] = {{"M", 1.0},
                 {"rho", 1e-3},
                 {"lambda", 1.0},
                 {"lambdas", {1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1.0}},
                 {"log10_ladder", default_log10_ladder()},
                 {"longterm_epsilon", 0.9}};
  c["montecarlo"] = {{"trials", 2000},
                     {"repetitions", 5},
                     {"delta", 11.0 / 16},
                     {"probes", 8},
                     {"probe_kind", "corner"},
                     {"threshold_scales", {1.0, 1e-4}},
                     {"compute_norms", false},
                     {"density_trials", 200},
                     {"density_probes", 256},
                     {"density_threshold_scale", 1.0}};
  c["kernel_oracle"] = {{"instances", 8},
                        {"samples", 200000},
                        {"sigmas", {1.0, 1.0 / 8, 1.0 / 64}},
                        {"ladder", {27, 64, 125}},
                        {"stability_factor", 2.0}};
  c["census"] = {{"probes", 64}, {"cell_budget", 200000}};
  return c;
}

Json parse_config(const std::string& text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
}

Json load_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

namespace {

bool same_kind(const Json& def, const Json& v) {
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_number_integer()) return v.is_number_integer();
  if (def.is_number()) return v.is_number();
  if (def.is_string()) return v.is_string();
  if (def.is_array()) {
    return v.is_array() && std::all_of(v.begin(), v.end(), [](const Json& e) { return e.is_number(); });
  }
  return true;
}

std::string kind_name(const Json& def) {
  if (def.is_boolean()) return "a boolean";
  if (def.is_number_integer()) return "an integer";
  if (def.is_number()) return "a number";
  if (def.is_string()) return "a string";
  if (def.is_array()) return "an array of numbers";
  return "a value";
}

std::string join(const std::vector<std::string>& v, const std::string& sep) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? sep : "") + v[i];
  return s;
}

}  // namespace

Json resolve_config(const Json& raw, const RunOverrides& ov, const std::string& subcommand) {
  if (!raw.is_object()) throw ValidationError("config must be a JSON object");
  Json cfg = default_config();
  std::vector<std::string> errors;
  for (const auto& [section, body] : raw.items()) {
    if (!cfg.contains(section)) {
      errors.push_back("unknown section '" + section + "'");
      continue;
    }
    if (!body.is_object()) {
      errors.push_back("section '" + section + "' must be an object");
      continue;
    }
    for (const auto& [key, value] : body.items()) {
      const std::string name = section + "." + key;
      if (!cfg[section].contains(key)) {
        errors.push_back("unknown key '" + name + "'");
        continue;
      }
      const Json& def = cfg[section][key];
      if (def.is_null()) {
        // Required keys: seed is an unsigned integer, K a positive integer.
        if (!value.is_number_integer() || value.get<long long>() < 0) {
          if (!(value.is_number_unsigned())) {
            errors.push_back("'" + name + "' must be a nonnegative integer");
            continue;
          }
        }
      } else if (!same_kind(def, value)) {
        errors.push_back("'" + name + "' must be " + kind_name(def));
        continue;
      }
      cfg[section][key] = value;
    }
  }
  if (ov.seed) cfg["run"]["seed"] = *ov.seed;
  if (ov.threads) cfg["run"]["threads"] = *ov.threads;
  if (ov.ladder) cfg["run"]["ladder"] = *ov.ladder;
  if (ov.out_dir) cfg["run"]["out_dir"] = *ov.out_dir;
  std::vector<std::string> missing;
  if (cfg["run"]["seed"].is_null()) missing.push_back("run.seed");
  const bool needs_K = subcommand != "bounds" && subcommand != "kernel-check";
  if (needs_K && cfg["lattice"]["K"].is_null() && cfg["run"]["ladder"].empty()) {
    missing.push_back("lattice.K");
  }
  if (!missing.empty()) errors.push_back("missing required keys: " + join(missing, ", "));
  if (cfg["run"]["threads"].get<int>() < 1) errors.push_back("'run.threads' must be at least 1");
  if (!errors.empty()) throw ValidationError("invalid config: " + join(errors, "; "));
  if (cfg["run"]["out_dir"].get<std::string>().empty()) cfg["run"]["out_dir"] = default_out_dir();
  return cfg;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf, static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx, md, &len);
  EVP_MD_CTX_free(ctx);
  static const char* hex = "0123456789abcdef";
  std::string s;
  for (unsigned i = 0; i < len; ++i) {
    s += hex[md[i] >> 4];
    s += hex[md[i] & 15];
  }
  return s;
}

namespace {

// ---------------------------------------------------------------- CSV helpers

std::string num(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%.17g", v);
  return b;
}

std::string label(double v) {
  char b[40];
  std::snprintf(b, sizeof b, "%g", v);
  return b;
}

class Csv {
 public:
  Csv(const fs::path& path, const std::string& schema, const std::string& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    out_ << "# schema=" << schema << "\n" << header << "\n";
  }
  template <class... T>
  void row(const T&... cells) {
    bool first = true;
    ((out_ << (first ? "" : ",") << cell(cells), first = false), ...);
    out_ << "\n";
  }

 private:
  static std::string cell(double v) { return num(v); }
  static std::string cell(int v) { return std::to_string(v); }
  static std::string cell(long v) { return std::to_string(v); }
  static std::string cell(long long v) { return std::to_string(v); }
  static std::string cell(std::uint64_t v) { return std::to_string(v); }
  static std::string cell(bool v) { return v ? "1" : "0"; }
  static std::string cell(const std::string& v) { return v; }
  static std::string cell(const char* v) { return v; }
  std::ofstream out_;
};

std::string k_suffix(double K) { return "_K" + label(K); }

// ---------------------------------------------------------------- plan

struct Plan {
  std::string sub;
  Json cfg;
  std::uint64_t seed = 0;
  int threads = 1;
  std::vector<double> ks;
  std::vector<std::shared_ptr<const Partition>> parts;
  BilinearSymbol symbol = BilinearSymbol::navier_stokes();
};

RandomFieldSpec field_spec(const Plan& pl, std::int64_t K, std::uint64_t seed) {
  const Json& d = pl.cfg["initdata"];
  RandomFieldSpec s;
  s.K = K;
  s.kappa = pl.cfg["lattice"]["kappa"].get<double>();
  s.amplitude = d["amplitude"].get<double>();
  s.amplitude_exponent = d["amplitude_exponent"].get<double>();
  s.phases = phase_kind_from_string(d["phases"].get<std::string>());
  s.rv = rv_kind_from_string(d["rv"].get<std::string>());
  s.seed = seed;
  return s;
}

std::uint64_t k_seed(const Plan& pl, double K) {
  return rng::derive(pl.seed, static_cast<std::uint64_t>(std::llround(K)));
}

std::vector<Vec3> mc_probes(const Plan& pl, double K) {
  const Json& m = pl.cfg["montecarlo"];
  const auto n = m["probes"].get<std::size_t>();
  const std::uint64_t ps = rng::derive(k_seed(pl, K), rng::kProbes);
  const std::string kind = m["probe_kind"].get<std::string>();
  if (kind == "corner") return corner_probes(n, ps);
  return make_probes(omega_of(K).omega, 8, n, ps);
}

ExceedanceConfig exceedance_config(const Plan& pl, std::size_t i) {
  const Json& m = pl.cfg["montecarlo"];
  const double K = pl.ks[i];
  ExceedanceConfig c;
  c.field = field_spec(pl, static_cast<std::int64_t>(K), k_seed(pl, K));
  c.probes = mc_probes(pl, K);
  c.delta = m["delta"].get<double>();
  c.threshold_scales = m["threshold_scales"].get<std::vector<double>>();
  c.trials = m["trials"].get<int>();
  c.repetitions = m["repetitions"].get<int>();
  c.compute_norms = m["compute_norms"].get<bool>();
  c.symbol = pl.symbol;
  return c;
}

DensityConfig density_config(const Plan& pl, std::size_t i) {
  const Json& m = pl.cfg["montecarlo"];
  const double K = pl.ks[i];
  DensityConfig c;
  c.field = field_spec(pl, static_cast<std::int64_t>(K), k_seed(pl, K));
  c.delta = m["delta"].get<double>();
  c.trials = m["density_trials"].get<int>();
  c.probe_count = m["density_probes"].get<std::size_t>();
  c.probe_seed = rng::derive(k_seed(pl, K), rng::kProbes);
  c.threshold_scale = m["density_threshold_scale"].get<double>();
  c.symbol = pl.symbol;
  return c;
}

KernelConfig kernel_config(const Plan& pl) {
  const Json& k = pl.cfg["kernel_oracle"];
  KernelConfig c;
  c.ladder = pl.cfg["run"]["ladder"].empty() ? k["ladder"].get<std::vector<double>>() : pl.ks;
  c.instances = k["instances"].get<int>();
  c.samples = k["samples"].get<long>();
  c.seed = pl.seed;
  c.sigmas = k["sigmas"].get<std::vector<double>>();
  c.stability_factor = k["stability_factor"].get<double>();
  return c;
}

BoundParams bound_params(const Plan& pl) {
  const Json& b = pl.cfg["bounds"];
  BoundParams p;
  p.M = b["M"].get<double>();
  p.rho = b["rho"].get<double>();
  p.lambda = b["lambda"].get<double>();
  return p;
}

std::vector<double> bounds_log10_ladder(const Plan& pl) {
  if (!pl.cfg["run"]["ladder"].empty()) {
    std::vector<double> l;
    for (double K : pl.ks) l.push_back(std::log10(K));
    return l;
  }
  return pl.cfg["bounds"]["log10_ladder"].get<std::vector<double>>();
}

EvolveOptions evolve_options(const Plan& pl) {
  const Json& s = pl.cfg["stepper"];
  EvolveOptions o;
  o.rho = s["rho"].get<double>();
  o.T = s["T"].get<double>();
  o.n_intervals = s["n_intervals"].get<int>();
  o.q_sub = s["q_sub"].get<int>();
  o.refine = s["refine"].get<int>();
  o.half_width = s["half_width"].get<double>();
  o.trace = s["trace"].get<bool>();
  return o;
}

bool needs_partition(const std::string& sub) {
  return sub == "sample" || sub == "evolve" || sub == "concentrate" || sub == "density" ||
         sub == "census";
}

Plan make_plan(const Json& cfg, const std::string& sub) {
  const auto& subs = experiment_subcommands();
  if (std::find(subs.begin(), subs.end(), sub) == subs.end()) {
    throw ValidationError("unknown subcommand '" + sub + "'");
  }
  Plan pl;
  pl.sub = sub;
  pl.cfg = cfg;
  pl.seed = cfg["run"]["seed"].get<std::uint64_t>();
  pl.threads = cfg["run"]["threads"].get<int>();
  if (!cfg["run"]["ladder"].empty()) {
    pl.ks = cfg["run"]["ladder"].get<std::vector<double>>();
  } else if (!cfg["lattice"]["K"].is_null()) {
    pl.ks = {cfg["lattice"]["K"].get<double>()};
  }
  for (double K : pl.ks) {
    if (!(K >= 1) || !std::isfinite(K)) throw ValidationError("ladder entries must be finite and >= 1");
  }
  pl.symbol = BilinearSymbol::make(cfg["symbol"]["kind"].get<std::string>());
  const Json& d = cfg["initdata"];
  phase_kind_from_string(d["phases"].get<std::string>());
  rv_kind_from_string(d["rv"].get<std::string>());
  const std::string pk = cfg["montecarlo"]["probe_kind"].get<std::string>();
  if (pk != "corner" && pk != "annulus") {
    throw ValidationError("montecarlo.probe_kind must be 'corner' or 'annulus'");
  }

  if (needs_partition(sub)) {
    if (pl.ks.empty()) throw ValidationError("missing required keys: lattice.K");
    for (double K : pl.ks) {
      if (K != std::floor(K)) throw ValidationError("K must be an integer cube for " + sub);
      auto P = std::make_shared<const Partition>(
          Partition::build(static_cast<std::int64_t>(K), cfg["lattice"]["kappa"].get<double>()));
      field_spec(pl, P->K(), 0).validate();
      pl.parts.push_back(P);
    }
  }
  // Module-level validation before anything is written.
  if (sub == "sample") {
    const double cap = cfg["initdata"]["max_csv_rows"].get<double>();
    for (const auto& P : pl.parts) {
      if (2.0 * static_cast<double>(P->subblock_count()) > cap) {
        throw ValidationError("field CSV for K=" + std::to_string(P->K()) + " would exceed initdata.max_csv_rows");
      }
    }
  } else if (sub == "evolve") {
    const auto o = evolve_options(pl);
    if (!(o.rho > 0 && o.rho <= 1)) throw ValidationError("stepper.rho must lie in (0, 1]");
    if (o.q_sub < 1 || o.refine < 1 || !(o.half_width > 0) || o.n_intervals < 0) {
      throw ValidationError("stepper.q_sub, refine, half_width must be positive and n_intervals >= 0");
    }
    if (cfg["stepper"]["probes"].get<int>() < 1) throw ValidationError("stepper.probes must be positive");
  } else if (sub == "bounds") {
    auto p = bound_params(pl);
    const auto ladder = bounds_log10_ladder(pl);
    if (ladder.empty()) throw ValidationError("bounds ladder is empty");
    p.log_K = ladder.front() * std::log(10.0);
    p.validate();
    for (double l : cfg["bounds"]["lambdas"].get<std::vector<double>>()) {
      if (!(l > 0)) throw ValidationError("bounds.lambdas must be positive");
    }
    const double eps = cfg["bounds"]["longterm_epsilon"].get<double>();
    if (!(eps >= 0 && eps <= 1)) throw ValidationError("bounds.longterm_epsilon must lie in [0, 1]");
  } else if (sub == "concentrate") {
    for (std::size_t i = 0; i < pl.ks.size(); ++i) validate_config(exceedance_config(pl, i));
  } else if (sub == "density") {
    for (std::size_t i = 0; i < pl.ks.size(); ++i) validate_config(density_config(pl, i));
  } else if (sub == "kernel-check") {
    validate_config(kernel_config(pl));
  } else if (sub == "census") {
    if (cfg["census"]["probes"].get<int>() < 1 || cfg["census"]["cell_budget"].get<long>() < 1) {
      throw ValidationError("census.probes and census.cell_budget must be positive");
    }
  }
  return pl;
}

// ---------------------------------------------------------------- subcommands

Json entry(double K) {
  Json e;
  e["K"] = K;
  e["metrics"] = Json::object();
  return e;
}

void run_sample(const Plan& pl, const fs::path& dir, Json& sum) {
  for (std::size_t i = 0; i < pl.ks.size(); ++i) {
    const RandomField f(pl.parts[i], field_spec(pl, pl.parts[i]->K(), k_seed(pl, pl.ks[i])));
    std::ofstream out(dir / ("field" + k_suffix(pl.ks[i]) + ".csv"));
    write_field_csv(out, f);
    const auto n = norms(f);
    Json e = entry(pl.ks[i]);
    e["metrics"]["amplitude"] = f.amplitude();
    e["metrics"]["subblocks"] = static_cast<double>(pl.parts[i]->subblock_count());
    e["metrics"]["pm2"] = n.pm2;
    e["metrics"]["l2"] = n.l2;
    e["metrics"]["h_half"] = n.h_half;
    sum["entries"].push_back(e);
  }
}

void run_evolve(const Plan& pl, const fs::path& dir, Json& sum) {
  for (std::size_t i = 0; i < pl.ks.size(); ++i) {
    const double K = pl.ks[i];
    const RandomField f(pl.parts[i], field_spec(pl, pl.parts[i]->K(), k_seed(pl, K)));
    EvolveOptions o = evolve_options(pl);
    o.probes = make_probes(1, 2, pl.cfg["stepper"]["probes"].get<std::size_t>(),
                           rng::derive(k_seed(pl, K), rng::kProbes));
    o.partition = pl.parts[i].get();
    o.good_probes = o.probes;
    const auto r = evolve(f, K, pl.symbol, o);
    Csv csv(dir / ("evolve" + k_suffix(K) + ".csv"), "evolve/1",
            "n,t,probe,xi_x,xi_y,xi_z,re1,im1,re2,im2,re3,im3");
    double last = 0;
    for (std::size_t n = 0; n < r.times.size(); ++n)
      for (std::size_t p = 0; p < o.probes.size(); ++p) {
        const auto& v = r.probe_values[n][p];
        csv.row(static_cast<long>(n), r.times[n], static_cast<long>(p), o.probes[p].x, o.probes[p].y,
                o.probes[p].z, v[0].real(), v[0].imag(), v[1].real(), v[1].imag(), v[2].real(),
                v[2].imag());
        if (n + 1 == r.times.size()) last = std::max(last, max_abs(v));
      }
    if (o.trace) {
      Csv tr(dir / ("trace" + k_suffix(K) + ".csv"), "trace/1", "n,t,A,B,a,b,c,E");
      for (const auto& row : r.trace) tr.row(row.n, row.t, row.A, row.B, row.a, row.b, row.c, row.E);
    }
    Json e = entry(K);
    e["metrics"]["T"] = r.T;
    e["metrics"]["rho"] = r.rho;
    e["metrics"]["steps"] = static_cast<double>(r.times.size() - 1);
    e["metrics"]["nonlinear_evaluations"] = static_cast<double>(r.nonlinear_evaluations);
    e["metrics"]["final_probe_max"] = last;
    sum["entries"].push_back(e);
  }
}

void run_bounds(const Plan& pl, const fs::path& dir, Json& sum) {
  const BoundParams base = bound_params(pl);
  const auto ladder = bounds_log10_ladder(pl);
  {
    Csv csv(dir / "slack.csv", "slack/1",
            "lambda,log10_K,n,log_a,log_b,log_c,log_A,log_B,log_E,slack_a,slack_b,slack_c,slack_A,slack_B,slack_E");
    for (double l10 : ladder) {
      BoundParams p = base;
      p.log_K = l10 * std::log(10.0);
      const auto rep = verify_uniform(p, true);
      for (const auto& r : rep.rows) {
        const auto& s = r.state;
        csv.row(p.lambda, l10, s.n, s.a.log(), s.b.log(), s.c.log(), s.A.log(), s.B.log(), s.E.log(),
                r.slack[0], r.slack[1], r.slack[2], r.slack[3], r.slack[4], r.slack[5]);
      }
    }
  }
  const auto lambdas = pl.cfg["bounds"]["lambdas"].get<std::vector<double>>();
  const auto fr = lambda_frontier(base, lambdas, ladder);
  Csv csv(dir / "thresholds.csv", "thresholds/1",
          "lambda,log10_K,holds,first_violation,first_violation_n,min_slack_a,min_slack_b,min_slack_c,"
          "min_slack_A,min_slack_B,min_slack_E");
  for (const auto& t : fr) {
    for (const auto& r : t.reports) {
      csv.row(t.lambda, r.params.log_K / std::log(10.0), r.holds,
              r.first_violation.empty() ? std::string("-") : r.first_violation, r.first_violation_n,
              r.min_slack[0], r.min_slack[1], r.min_slack[2], r.min_slack[3], r.min_slack[4], r.min_slack[5]);
    }
    Json e;
    e["K"] = nullptr;
    e["metrics"] = {{"lambda", t.lambda}, {"threshold_found", t.found ? 1.0 : 0.0}};
    if (t.found) e["metrics"]["threshold_log10_K"] = t.log10_K;
    sum["entries"].push_back(e);
  }
  const auto lt = longterm_threshold(pl.cfg["bounds"]["longterm_epsilon"].get<double>(), ladder);
  sum["longterm"] = {{"epsilon", lt.epsilon}, {"found", lt.found}, {"min_value", lt.min_value}};
  if (lt.found) sum["longterm"]["log10_K"] = lt.log10_K;
}

void run_concentrate(const Plan& pl, const fs::path& dir, Json& sum) {
  for (std::size_t i = 0; i < pl.ks.size(); ++i) {
    const double K = pl.ks[i];
    const auto cfg = exceedance_config(pl, i);
    const auto r = exceedance_experiment(pl.parts[i], cfg);
    std::string header = "trial,seed,probe,probe_max";
    for (double s : cfg.threshold_scales) header += ",exceed_" + label(s);
    {
      std::ofstream out(dir / ("exceedance" + k_suffix(K) + ".csv"));
      out << "# schema=exceedance/1\n" << header << "\n";
      const std::size_t nt = cfg.threshold_scales.size();
      for (const auto& t : r.trials)
        for (std::size_t p = 0; p < cfg.probes.size(); ++p) {
          out << t.trial << ',' << t.seed << ',' << p << ',' << num(t.probe_max[p]);
          for (std::size_t k = 0; k < nt; ++k) out << ',' << int(t.exceed[p * nt + k]);
          out << '\n';
        }
    }
    {
      Csv csv(dir / ("moments" + k_suffix(K) + ".csv"), "moments/1",
              "probe,xi_x,xi_y,xi_z,block,mirror,var_predicted,var_empirical,ratio,mean_abs_predicted,mean_abs_empirical");
      for (const auto& m : r.moments) {
        const Vec3 xi = cfg.probes[static_cast<std::size_t>(m.probe)];
        csv.row(m.probe, xi.x, xi.y, xi.z, static_cast<long long>(m.block), m.mirror, m.var_predicted,
                m.var_empirical, m.ratio(), m.mean_abs_predicted, m.mean_abs_empirical);
      }
    }
    Json e = entry(K);
    auto& mt = e["metrics"];
    mt["amplitude"] = r.amplitude;
    mt["base_threshold"] = r.base_threshold;
    mt["blocks_compared"] = static_cast<double>(r.moments.size());
    if (!r.moments.empty()) {
      mt["min_variance_ratio"] = r.min_variance_ratio;
      mt["max_variance_ratio"] = r.max_variance_ratio;
      mt["variance_constant"] = r.variance_constant;
    }
    mt["log_hoeffding"] = r.bounds.log_hoeffding;
    mt["log_chebyshev"] = r.bounds.log_chebyshev;
    for (const auto& ts : r.thresholds) {
      const std::string s = label(ts.scale);
      mt["exceed_mean@" + s] = ts.mean_probability;
      mt["exceed_median_rep@" + s] = ts.median_repetition;
      mt["exceed_any@" + s] = ts.any_probe_probability;
    }
    sum["entries"].push_back(e);
  }
}

void run_density(const Plan& pl, const fs::path& dir, Json& sum) {
  std::vector<DensityResult> all;
  for (std::size_t i = 0; i < pl.ks.size(); ++i) {
    const double K = pl.ks[i];
    const auto r = bad_density_experiment(pl.parts[i], density_config(pl, i));
    std::string header = "trial,seed,density";
    const std::size_t nsh = r.shell_density.empty() ? 0 : r.shell_density[0].size();
    for (std::size_t j = 0; j < nsh; ++j) header += ",shell_" + std::to_string(j);
    std::ofstream out(dir / ("density" + k_suffix(K) + ".csv"));
    out << "# schema=density/1\n" << header << "\n";
    for (std::size_t t = 0; t < r.trials.size(); ++t) {
      out << r.trials[t].trial << ',' << r.trials[t].seed << ',' << num(r.trials[t].density);
      for (double d : r.shell_density[t]) out << ',' << num(d);
      out << '\n';
    }
    Json e = entry(K);
    auto& mt = e["metrics"];
    mt["probability"] = r.probability;
    mt["ci_lo"] = r.ci.lo;
    mt["ci_hi"] = r.ci.hi;
    mt["failure_probability"] = 1 - r.probability;
    mt["mean_density"] = r.mean_density;
    mt["target"] = r.target;
    mt["threshold"] = r.threshold;
    mt["chain_lhs"] = r.chain_lhs;
    mt["chain_rhs"] = r.chain_rhs;
    sum["entries"].push_back(e);
    all.push_back(r);
  }
  try {
    const auto fit = failure_exponent(all);
    sum["failure_exponent"] = {{"slope", fit.slope}, {"lo", fit.slope_ci.lo}, {"hi", fit.slope_ci.hi},
                               {"n", fit.n}};
  } catch (const ValidationError&) {
    sum["failure_exponent"] = nullptr;  // fewer than two K with failures
  }
}

void run_kernel(const Plan& pl, const fs::path& dir, Json& sum) {
  const auto cfg = kernel_config(pl);
  const auto rep = check_lemmas(cfg);
  std::ofstream out(dir / "kernel.csv");
  out << "# schema=kernel/1\n";
  write_kernel_csv(out, rep);
  for (std::size_t k = 0; k < cfg.ladder.size(); ++k) {
    Json e = entry(cfg.ladder[k]);
    for (int l = 0; l < 3; ++l) {
      e["metrics"]["sup_ratio_" + std::to_string(l + 1)] = rep.sup_ratio[static_cast<std::size_t>(l)][k];
    }
    sum["entries"].push_back(e);
  }
  sum["kernel"] = {{"spread", {rep.spread[0], rep.spread[1], rep.spread[2]}},
                   {"stable", {rep.stable[0], rep.stable[1], rep.stable[2]}},
                   {"sigma_direction_ok", rep.sigma_direction_ok}};
}

void run_census(const Plan& pl, const fs::path& dir, Json& sum) {
  for (std::size_t i = 0; i < pl.ks.size(); ++i) {
    const double K = pl.ks[i];
    const auto probes = make_probes(omega_of(K).omega, 4, pl.cfg["census"]["probes"].get<std::size_t>(),
                                    rng::derive(k_seed(pl, K), rng::kProbes));
    const auto rep = overlap_census(*pl.parts[i], probes, pl.cfg["census"]["cell_budget"].get<long>());
    Csv csv(dir / ("census" + k_suffix(K) + ".csv"), "census/1",
            "probe,xi_x,xi_y,xi_z,self_overlap,mirror_self_overlap,self_max_distance,max_neighbors,cells_checked");
    for (std::size_t p = 0; p < rep.entries.size(); ++p) {
      const auto& c = rep.entries[p];
      csv.row(static_cast<long>(p), c.xi.x, c.xi.y, c.xi.z, c.self_overlap, c.mirror_self_overlap,
              c.self_max_distance, c.max_neighbors, c.cells_checked);
    }
    Json e = entry(K);
    e["metrics"]["max_self_overlap"] = rep.max_self_overlap;
    e["metrics"]["max_neighbors"] = rep.max_neighbors;
    sum["entries"].push_back(e);
  }
}

// ---------------------------------------------------------------- run directories

std::string utc_stamp(std::chrono::system_clock::time_point tp, const char* fmt) {
  const std::time_t t = std::chrono::system_clock::to_time_t(tp);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char b[64];
  std::strftime(b, sizeof b, fmt, &tm);
  return b;
}

fs::path fresh_dir(const fs::path& root, const std::string& stem) {
  fs::create_directories(root);
  fs::path d = root / stem;
  for (int i = 1; fs::exists(d); ++i) d = root / (stem + "-" + std::to_string(i));
  fs::create_directory(d);
  return d;
}

std::string host_name() {
  char b[256] = {0};
  if (gethostname(b, sizeof b - 1) != 0) return "unknown";
  return b;
}

void write_json(const fs::path& p, const Json& j) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << j.dump(2) << "\n";
}

Json artifact_list(const fs::path& dir) {
  std::vector<std::string> names;
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto n = e.path().filename().string();
    if (e.is_regular_file() && n != "manifest.json") names.push_back(n);
  }
  std::sort(names.begin(), names.end());
  Json a = Json::array();
  for (const auto& n : names) {
    a.push_back({{"file", n}, {"sha256", sha256_file(dir / n)}, {"bytes", fs::file_size(dir / n)}});
  }
  return a;
}

void finish(const fs::path& dir, const std::string& sub, const Json& params, std::uint64_t seed,
            int threads, std::chrono::system_clock::time_point start, double wall) {
  Json m;
  m["schema"] = kManifestSchema;
  m["subcommand"] = sub;
  m["version"] = PMNS_VERSION;
  m["seed"] = seed;
  m["threads"] = threads;
  m["started_utc"] = utc_stamp(start, "%Y-%m-%dT%H:%M:%SZ");
  m["wall_seconds"] = wall;
  m["host"] = host_name();
  m["parameters"] = params;
  m["artifacts"] = artifact_list(dir);
  write_json(dir / "manifest.json", m);
}

}  // namespace

RunOutcome execute(const Json& resolved, const std::string& subcommand) {
  const Plan pl = make_plan(resolved, subcommand);
  omp_set_num_threads(pl.threads);
  const auto start = std::chrono::system_clock::now();
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = fresh_dir(resolved["run"]["out_dir"].get<std::string>(),
                                 subcommand + "-" + utc_stamp(start, "%Y%m%dT%H%M%SZ") + "-s" +
                                     std::to_string(pl.seed));
  Json sum;
  sum["schema"] = kSummarySchema;
  sum["subcommand"] = subcommand;
  sum["seed"] = pl.seed;
  sum["entries"] = Json::array();
  if (subcommand == "sample") run_sample(pl, dir, sum);
  else if (subcommand == "evolve") run_evolve(pl, dir, sum);
  else if (subcommand == "bounds") run_bounds(pl, dir, sum);
  else if (subcommand == "concentrate") run_concentrate(pl, dir, sum);
  else if (subcommand == "density") run_density(pl, dir, sum);
  else if (subcommand == "kernel-check") run_kernel(pl, dir, sum);
  else if (subcommand == "census") run_census(pl, dir, sum);
  write_json(dir / "summary.json", sum);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  finish(dir, subcommand, resolved, pl.seed, pl.threads, start, wall);
  return {dir, sum};
}

RunOutcome report(const std::vector<fs::path>& run_dirs, const fs::path& out_root) {
  if (run_dirs.empty()) throw ValidationError("report needs at least one run directory");
  std::vector<Json> sums;
  for (const auto& d : run_dirs) {
    const fs::path sp = d / "summary.json", mp = d / "manifest.json";
    if (!fs::exists(sp) || !fs::exists(mp)) {
      throw ValidationError(d.string() + " is not a completed run directory");
    }
    Json s, m;
    try {
      std::ifstream a(sp), b(mp);
      s = Json::parse(a);
      m = Json::parse(b);
    } catch (const Json::parse_error& e) {
      throw ValidationError("unreadable summary or manifest in " + d.string());
    }
    if (s.value("schema", "") != kSummarySchema || m.value("schema", "") != kManifestSchema) {
      throw ValidationError("incompatible schema version in " + d.string());
    }
    for (const auto& a : m["artifacts"]) {
      if (sha256_file(d / a["file"].get<std::string>()) != a["sha256"].get<std::string>()) {
        throw std::runtime_error("artifact " + a["file"].get<std::string>() + " in " + d.string() +
                                 " does not match its manifest hash");
      }
    }
    s["run"] = d.filename().string();
    sums.push_back(std::move(s));
  }

  const auto start = std::chrono::system_clock::now();
  const auto t0 = std::chrono::steady_clock::now();
  const fs::path dir = fresh_dir(out_root, "report-" + utc_stamp(start, "%Y%m%dT%H%M%SZ"));
  // (subcommand, metric) -> (K, value) for the fits
  std::map<std::pair<std::string, std::string>, std::vector<std::pair<double, double>>> series;
  {
    Csv csv(dir / "report.csv", "report/1", "run,subcommand,K,metric,value");
    for (const auto& s : sums) {
      const std::string sub = s["subcommand"].get<std::string>();
      for (const auto& e : s["entries"]) {
        const bool hasK = e.contains("K") && e["K"].is_number();
        for (const auto& [name, v] : e["metrics"].items()) {
          if (!v.is_number()) continue;
          const double x = v.get<double>();
          csv.row(s["run"].get<std::string>(), sub, hasK ? num(e["K"].get<double>()) : std::string(""),
                  name, x);
          if (hasK) series[{sub, name}].emplace_back(e["K"].get<double>(), x);
        }
      }
    }
  }
  Json merged;
  merged["schema"] = kSummarySchema;
  merged["subcommand"] = "report";
  merged["runs"] = Json::array();
  merged["entries"] = Json::array();
  for (const auto& s : sums) {
    merged["runs"].push_back(s["run"]);
    for (const auto& e : s["entries"]) merged["entries"].push_back(e);
  }
  merged["fits"] = Json::array();
  {
    Csv csv(dir / "fits.csv", "fits/1", "subcommand,metric,n,slope,slope_lo,slope_hi,intercept");
    for (const auto& [key, pts] : series) {
      std::set<double> ks;
      std::vector<double> x, y;
      for (const auto& [K, v] : pts) {
        if (K > 0 && v > 0 && std::isfinite(v)) {
          x.push_back(std::log(K));
          y.push_back(std::log(v));
          ks.insert(K);
        }
      }
      if (ks.size() < 3) continue;
      const auto f = fit_line(x, y);
      csv.row(key.first, key.second, static_cast<long>(f.n), f.slope, f.slope_ci.lo, f.slope_ci.hi,
              f.intercept);
      merged["fits"].push_back({{"subcommand", key.first},
                                {"metric", key.second},
                                {"n", f.n},
                                {"slope", f.slope},
                                {"slope_lo", f.slope_ci.lo},
                                {"slope_hi", f.slope_ci.hi}});
    }
  }
  write_json(dir / "summary.json", merged);
  Json params;
  params["inputs"] = Json::array();
  for (const auto& d : run_dirs) params["inputs"].push_back(d.string());
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  finish(dir, "report", params, 0, 1, start, wall);
  return {dir, merged};
}

}  // namespace pmns
