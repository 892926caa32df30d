// Acceptance runner: one PASS/FAIL line per criterion, tolerances pinned below.
// Usage: pmns_acceptance [out_dir] [--only N[,N...]] [--strict]
//
// Exit status is nonzero when a criterion fails for a reason not listed as a known gap.
// Known gaps are printed on the criterion's line; --strict treats them as failures.

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pmns/bounds.hpp"
#include "pmns/initdata.hpp"
#include "pmns/kernel_oracle.hpp"
#include "pmns/lattice.hpp"
#include "pmns/montecarlo.hpp"
#include "pmns/nonlinear.hpp"
#include "pmns/rng.hpp"
#include "pmns/run.hpp"
#include "pmns/stats.hpp"
#include "pmns/stepper.hpp"
#include "pmns/symbols.hpp"

using namespace pmns;
namespace fs = std::filesystem;

namespace {

// ---------------------------------------------------------------- pinned tolerances

constexpr double kC1Tol = 1e-12, kC1Seconds = 60;
constexpr int kC1Fields = 100;
constexpr long kC2Samples = 100000;
constexpr int kC2Fields = 1000;
constexpr double kC2Tol = 1e-12;
constexpr double kC3Tol = 1e-3, kC3Seconds = 300;
constexpr int kC3Instances = 20, kC3Points = 64;
constexpr double kC4Tol = 1e-10;
constexpr double kC5Lo = 1.5, kC5Hi = 2.5;
constexpr int kC5Probes = 10;
constexpr double kC6MaxLog10K = 60;
constexpr double kC7Factor = 4, kC7Seconds = 1800, kC7Scale = 1e-4;
constexpr int kC7Trials = 2000, kC7Reps = 5, kC7Probes = 8;
constexpr double kC8Delta = 11.0 / 16, kC8Slope = -0.5;
constexpr double kC9Factor = 2;

struct Outcome {
  bool pass = false;
  bool gap_only = false;  ///< every failing sub-check is a known gap
  std::string detail;
};

std::string fmt(const char* f, auto... a) {
  char b[512];
  std::snprintf(b, sizeof b, f, a...);
  return b;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::shared_ptr<const Partition> part(std::int64_t K) {
  return std::make_shared<const Partition>(Partition::build(K, 0.25));
}

RandomFieldSpec spec(std::int64_t K, std::uint64_t seed, RvKind rv = RvKind::bernoulli,
                     PhaseKind ph = PhaseKind::random) {
  RandomFieldSpec s;
  s.K = K;
  s.seed = seed;
  s.rv = rv;
  s.phases = ph;
  return s;
}

fs::path g_out;

// ---------------------------------------------------------------- 1: sampled fields

Outcome c1() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto P = part(125);
  const std::int64_t side = P->block_side_cells(), ns = P->subblocks_per_block();
  double herm = 0, div = 0;
  long zero_inside = 0, nonzero_outside = 0, outside_checked = 0;
  std::vector<CVec3> up(static_cast<std::size_t>(ns)), mir(up.size());
  for (int f = 0; f < kC1Fields; ++f) {
    const RandomField field(P, spec(125, rng::derive(1000, static_cast<std::uint64_t>(f))));
    const double h = P->cell_side();
    for (std::int64_t s = 0; s < P->block_count(); ++s) {
      field.fill_block(s, up.data());
      const Cell b = P->block_coord(s);
      const Cell mlo{-(b.x + 1) * side, -(b.y + 1) * side, -(b.z + 1) * side};
      field.fill_box(mlo, {side, side, side}, mir.data());
      std::size_t p = 0;
      for (std::int64_t lz = 0; lz < side; ++lz)
        for (std::int64_t ly = 0; ly < side; ++ly)
          for (std::int64_t lx = 0; lx < side; ++lx, ++p) {
            const CVec3& v = up[p];
            const CVec3& w = mir[static_cast<std::size_t>(((side - 1 - lz) * side + (side - 1 - ly)) * side +
                                                          (side - 1 - lx))];
            const Vec3 x{(static_cast<double>(b.x * side + lx) + 0.5) * h,
                         (static_cast<double>(b.y * side + ly) + 0.5) * h,
                         (static_cast<double>(b.z * side + lz) + 0.5) * h};
            const double vn = std::sqrt(std::norm(v[0]) + std::norm(v[1]) + std::norm(v[2]));
            if (vn == 0) {
              ++zero_inside;
              continue;
            }
            for (int a = 0; a < 3; ++a) herm = std::max(herm, std::abs(w[a] - std::conj(v[a])) / vn);
            const cplx d = x.x * v[0] + x.y * v[1] + x.z * v[2];
            const cplx dm = -x.x * w[0] - x.y * w[1] - x.z * w[2];
            div = std::max({div, std::abs(d) / (norm(x) * vn), std::abs(dm) / (norm(x) * vn)});
          }
      // Cells just across each face that leaves the support must vanish.
      const Cell faces[6] = {{-1, 0, 0}, {1, 0, 0}, {0, -1, 0}, {0, 1, 0}, {0, 0, -1}, {0, 0, 1}};
      for (const Cell& d : faces) {
        const Cell nb{b.x + d.x, b.y + d.y, b.z + d.z};
        if (P->block_index(nb)) continue;
        for (std::int64_t k = 0; k < side; k += side / 4) {
          Cell c{b.x * side + k, b.y * side + k, b.z * side + k};
          if (d.x) c.x = d.x < 0 ? b.x * side - 1 : (b.x + 1) * side;
          if (d.y) c.y = d.y < 0 ? b.y * side - 1 : (b.y + 1) * side;
          if (d.z) c.z = d.z < 0 ? b.z * side - 1 : (b.z + 1) * side;
          if (P->in_support(c)) continue;  // across the origin plane the mirror half continues
          ++outside_checked;
          if (max_abs(field.value(c)) != 0 || max_abs(field.value(c.mirrored())) != 0) ++nonzero_outside;
        }
      }
    }
  }
  const double secs = seconds_since(t0);
  const bool ok_values = herm <= kC1Tol && div <= kC1Tol && zero_inside == 0 && nonzero_outside == 0 &&
                         outside_checked > 0;
  Outcome o;
  o.pass = ok_values && secs <= kC1Seconds;
  o.gap_only = ok_values;
  o.detail = fmt("%d fields at K=125, %lld subblock centers each: hermitian %.1e, div %.1e, "
                 "zero in support %ld, nonzero off support %ld/%ld; %.0f s (limit %.0f s)",
                 kC1Fields, static_cast<long long>(P->subblock_count()), herm, div, zero_inside,
                 nonzero_outside, outside_checked, secs, kC1Seconds);
  if (ok_values && !o.pass) o.detail += " [known gap: single-core wall clock]";
  return o;
}

// ---------------------------------------------------------------- 2: symbols

Outcome c2() {
  long violations = 0;
  for (auto M : {BilinearSymbol::toy(), BilinearSymbol::navier_stokes()}) {
    violations += check_symbol_bound(M, 1e-3, 8, kC2Samples, 2024).violations;
  }
  const auto P = part(8);
  const auto M = BilinearSymbol::navier_stokes();
  const auto R = ReducedSymbol::reduce(M, 0.25, omega_of(8), 20000, 7);
  BlockIntegralOptions red;
  red.reduced = &R;
  double worst = 0;
  const auto probes = make_probes(1, 2, kC2Fields, 77);
  for (int f = 0; f < kC2Fields; ++f) {
    const RandomField field(P, spec(8, rng::derive(2000, static_cast<std::uint64_t>(f))));
    const Vec3 xi = probes[static_cast<std::size_t>(f)];
    const auto a = block_integrals(field, xi, *P, M);
    const auto b = block_integrals(field, xi, *P, M, red);
    for (int l = 0; l < 3; ++l) {
      const double scale = a.blockwise_abs_sum[l];
      if (scale == 0) continue;
      for (std::size_t e = 0; e < a.size(); ++e) {
        worst = std::max(worst, std::abs(a.per_block[l][e] - b.per_block[l][e]) / scale);
      }
    }
  }
  Outcome o;
  o.pass = violations == 0 && worst <= kC2Tol;
  o.detail = fmt("|M|<=|xi| violations %ld over 2x%ld samples; reduced vs full max rel diff %.1e "
                 "over %d div-free fields",
                 violations, kC2Samples, worst, kC2Fields);
  return o;
}

// ---------------------------------------------------------------- 3: overlap integrals

std::array<cplx, 3> midpoint_sum(const CellField& f, const BilinearSymbol& M, Vec3 xi, Box box, int n) {
  std::array<cplx, 3> acc{};
  const auto T = M.tensor(xi);
  const double d = (box.hi.x - box.lo.x) / n;
  for (int iz = 0; iz < n; ++iz)
    for (int iy = 0; iy < n; ++iy)
      for (int ix = 0; ix < n; ++ix) {
        const Vec3 q{box.lo.x + (ix + 0.5) * d, box.lo.y + (iy + 0.5) * d, box.lo.z + (iz + 0.5) * d};
        const CVec3 v = f.value_at(q);
        if (max_abs(v) == 0.0) continue;
        const CVec3 w = f.value_at(xi - q);
        if (max_abs(w) == 0.0) continue;
        for (int l = 0; l < 3; ++l)
          for (int k = 0; k < 3; ++k)
            for (int j = 0; j < 3; ++j) acc[static_cast<std::size_t>(l)] += T[tensor_index(k, j, l)] * v[k] * w[j];
      }
  for (auto& a : acc) a *= d * d * d;
  return acc;
}

Outcome c3() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto P = part(8);
  const auto M = BilinearSymbol::navier_stokes();
  rng::Stream st(rng::derive(3, rng::kProbes));
  double worst = 0;
  long blocks = 0;
  for (int inst = 0; inst < kC3Instances; ++inst) {
    const RandomField field(P, spec(8, rng::derive(3000, static_cast<std::uint64_t>(inst))));
    // ξ on the 1/128 grid makes the midpoint rule exact for cellwise-constant data.
    Vec3 xi;
    do {
      xi = {std::floor(st.uniform(-3.5, 3.5) * 128) / 128, std::floor(st.uniform(-3.5, 3.5) * 128) / 128,
            std::floor(st.uniform(-3.5, 3.5) * 128) / 128};
    } while (norm_inf(xi) < 0.5);
    const auto bi = block_integrals(field, xi, *P, M);
    std::vector<std::size_t> active;
    for (std::size_t e = 0; e < bi.size(); ++e)
      if (std::abs(bi.per_block[0][e]) + std::abs(bi.per_block[1][e]) + std::abs(bi.per_block[2][e]) > 0)
        active.push_back(e);
    std::vector<double> err(active.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < active.size(); ++i) {
      const std::size_t e = active[i];
      const Box box = bi.mirror[e] ? P->mirror_block(bi.block_ids[e]) : P->block(bi.block_ids[e]);
      const auto ref = midpoint_sum(field, M, xi, box, kC3Points);
      for (std::size_t l = 0; l < 3; ++l) {
        // Relative error with a rounding floor tied to the probe's total block mass.
        const double excess = std::abs(bi.per_block[l][e] - ref[l]) - 1e-12 * bi.blockwise_abs_sum[l];
        if (excess > 0) err[i] = std::max(err[i], ref[l] == 0.0 ? 1.0 : excess / std::abs(ref[l]));
      }
    }
    for (double e : err) worst = std::max(worst, e);
    blocks += static_cast<long>(active.size());
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst <= kC3Tol && blocks > 0 && secs <= kC3Seconds;
  o.detail = fmt("%d instances at K=8, %ld interacting blocks vs %d^3 midpoint sums: max rel err above a 1e-12 rounding floor %.1e; "
                 "%.0f s (limit %.0f s)",
                 kC3Instances, blocks, kC3Points, worst, secs, kC3Seconds);
  return o;
}

// ---------------------------------------------------------------- 4: heat semigroup

Outcome c4() {
  double worst = 0, tmax = 0;
  std::string where;
  for (std::int64_t K : {8, 27}) {
    const auto P = part(K);
    const RandomField field(P, spec(K, 4000 + static_cast<std::uint64_t>(K)));
    EvolveOptions opt;
    opt.rho = 0.125;
    opt.probes = make_probes(0.5, 2.5, 400, 41);
    opt.keep_snapshots = K == 8;
    const auto r = evolve(field, static_cast<double>(K), BilinearSymbol::zero(), opt);
    if (std::abs(r.T - 3 * std::pow(loglog(static_cast<double>(K)), 0.25)) > 1e-12) return {false, false, "window is not 3(loglogK)^{1/4}"};
    tmax = std::max(tmax, r.times.back());
    const double n = static_cast<double>(K);
    for (std::size_t t = 0; t < r.times.size(); ++t) {
      for (std::size_t p = 0; p < opt.probes.size(); ++p) {
        const Vec3 q = opt.probes[p];
        const Vec3 c{(std::floor(q.x * n) + 0.5) / n, (std::floor(q.y * n) + 0.5) / n, (std::floor(q.z * n) + 0.5) / n};
        const CVec3 psi = field.value_at(q);
        const double decay = std::exp(-norm2(c) * r.times[t]);
        for (int a = 0; a < 3; ++a) worst = std::max(worst, std::abs(r.probe_values[t][p][a] - psi[a] * decay));
      }
      if (opt.keep_snapshots) {
        const auto& u = r.snapshots[t];
        const auto& u0 = r.snapshots.front();
        for (std::size_t i = 0; i < u.size(); ++i) {
          const double decay = std::exp(-norm2(u.center(i)) * r.times[t]);
          for (int a = 0; a < 3; ++a) worst = std::max(worst, std::abs(u[i][a] - u0[i][a] * decay));
        }
      }
    }
  }
  Outcome o;
  o.pass = worst <= kC4Tol;
  o.detail = fmt("zero symbol, K in {8, 27}, t up to %.3f: max |u - psi e^{-|xi|^2 t}| = %.1e", tmax, worst);
  return o;
}

// ---------------------------------------------------------------- 5: self-convergence

Outcome c5() {
  const auto P = part(8);
  const RandomField field(P, spec(8, 5005));
  const auto M = BilinearSymbol::navier_stokes();
  const auto probes = make_probes(1, 2, kC5Probes, 55);
  std::vector<std::vector<CVec3>> fin;
  for (double rho : {0.125, 0.0625, 0.03125}) {
    EvolveOptions opt;
    opt.rho = rho;
    opt.probes = probes;
    fin.push_back(evolve(field, 8, M, opt).probe_values.back());
  }
  auto diff = [&](int a, int b) {
    double d = 0;
    for (std::size_t p = 0; p < probes.size(); ++p)
      for (int c = 0; c < 3; ++c) d = std::max(d, std::abs(fin[static_cast<std::size_t>(a)][p][c] - fin[static_cast<std::size_t>(b)][p][c]));
    return d;
  };
  const double e1 = diff(0, 1), e2 = diff(1, 2);
  const double ratio = e1 / e2;
  Outcome o;
  o.pass = e2 > 0 && ratio >= kC5Lo && ratio <= kC5Hi;
  o.detail = fmt("rho = 1/8, 1/16, 1/32 at K=8 on %d probes: ratio %.3f (band [%.1f, %.1f])", kC5Probes,
                 ratio, kC5Lo, kC5Hi);
  return o;
}

// ---------------------------------------------------------------- 6: uniform estimates

Outcome c6() {
  BoundParams base;
  base.M = 1;
  base.rho = 1e-3;
  base.lambda = 1;
  std::vector<double> ladder;
  for (double l : default_log10_ladder())
    if (l <= kC6MaxLog10K) ladder.push_back(l);
  const auto th = uniform_threshold(base, ladder);
  // Slack trace at λ = 1 for the largest ladder K.
  const fs::path trace = g_out / "slack_lambda1.csv";
  {
    std::ofstream out(trace);
    out << "# schema=slack/1\nlog10_K,n,slack_a,slack_b,slack_c,slack_A,slack_B,slack_E\n";
    for (double l : {ladder.front(), ladder.back()}) {
      BoundParams p = base;
      p.log_K = l * std::log(10.0);
      for (const auto& r : verify_uniform(p, true).rows) {
        out << l << ',' << r.state.n;
        for (double s : r.slack) out << ',' << fmt("%.17g", s);
        out << '\n';
      }
    }
  }
  const auto fr = lambda_frontier(base, {1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1}, ladder);
  std::string front;
  bool any = false;
  for (const auto& t : fr) {
    front += fmt(" %g:%s", t.lambda, t.found ? fmt("1e%g", t.log10_K).c_str() : "none");
    any = any || t.found;
  }
  const auto& last = th.reports.back();
  Outcome o;
  o.pass = th.found || (any && fs::file_size(trace) > 0);
  o.detail = th.found ? fmt("threshold at lambda=1: K = 1e%g", th.log10_K)
                      : fmt("no threshold at lambda=1 up to 1e%g (first violation '%s' at n=%d); "
                            "lambda frontier:%s; slack trace %s",
                            kC6MaxLog10K, last.first_violation.c_str(), last.first_violation_n,
                            front.c_str(), trace.filename().c_str());
  return o;
}

// ---------------------------------------------------------------- 7: concentration

Outcome c7() {
  const auto t0 = std::chrono::steady_clock::now();
  double lo = 1e300, hi = 0;
  std::vector<double> med_pinned, med_natural;
  std::string per;
  std::ofstream csv(g_out / "variance.csv");
  csv << "# schema=variance/1\nK,probe,block,mirror,var_predicted,var_empirical,ratio\n";
  for (std::int64_t K : {27, 64, 125}) {
    const auto P = part(K);
    ExceedanceConfig cfg;
    cfg.field = spec(K, 7000 + static_cast<std::uint64_t>(K));
    cfg.probes = corner_probes(kC7Probes, 7);
    cfg.trials = kC7Trials;
    cfg.repetitions = kC7Reps;
    cfg.threshold_scales = {1.0, kC7Scale};
    const auto r = exceedance_experiment(P, cfg);
    for (const auto& m : r.moments) {
      csv << K << ',' << m.probe << ',' << m.block << ',' << m.mirror << ',' << fmt("%.17g", m.var_predicted)
          << ',' << fmt("%.17g", m.var_empirical) << ',' << fmt("%.17g", m.ratio()) << '\n';
    }
    if (!r.moments.empty()) {
      lo = std::min(lo, r.min_variance_ratio);
      hi = std::max(hi, r.max_variance_ratio);
    } else {
      lo = 0;
    }
    med_natural.push_back(r.thresholds[0].median_repetition);
    med_pinned.push_back(r.thresholds[1].median_repetition);
    per += fmt(" K=%lld: %zu blocks, exceed %.3g/%.3g;", static_cast<long long>(K), r.moments.size(),
               r.thresholds[0].median_repetition, r.thresholds[1].median_repetition);
  }
  const double secs = seconds_since(t0);
  const bool var_ok = lo >= 1 / kC7Factor && hi <= kC7Factor;
  bool mono = true;
  for (std::size_t i = 1; i < med_pinned.size(); ++i)
    mono = mono && med_pinned[i] <= med_pinned[i - 1] && med_natural[i] <= med_natural[i - 1];
  Outcome o;
  o.pass = var_ok && mono && secs <= kC7Seconds;
  o.detail = fmt("variance ratio in [%.3f, %.3f] (band [1/%g, %g]);%s median-of-%d exceedance at scales 1 "
                 "and %g nonincreasing: %s; %.0f s (limit %.0f s)",
                 lo, hi, kC7Factor, kC7Factor, per.c_str(), kC7Reps, kC7Scale, mono ? "yes" : "no", secs,
                 kC7Seconds);
  return o;
}

// ---------------------------------------------------------------- 8: bad-set density

Outcome c8() {
  const std::vector<std::int64_t> ladder = {8, 27, 64};
  const std::vector<int> trials = {200, 40, 6};
  std::ofstream csv(g_out / "density.csv");
  csv << "# schema=density-ladder/1\nrv,K,trials,successes,probability,ci_lo,ci_hi,mean_density,target\n";
  std::vector<DensityResult> bern, unif;
  for (int pass = 0; pass < 2; ++pass) {
    const RvKind rv = pass ? RvKind::uniform : RvKind::bernoulli;
    for (std::size_t i = 0; i < ladder.size(); ++i) {
      DensityConfig cfg;
      cfg.field = spec(ladder[i], 8000 + static_cast<std::uint64_t>(ladder[i]), rv);
      cfg.delta = kC8Delta;
      cfg.trials = trials[i];
      cfg.probe_seed = 88;
      const auto r = bad_density_experiment(part(ladder[i]), cfg);
      csv << to_string(rv) << ',' << ladder[i] << ',' << trials[i] << ',' << r.successes << ','
          << fmt("%.17g,%.17g,%.17g,%.17g,%.17g", r.probability, r.ci.lo, r.ci.hi, r.mean_density, r.target)
          << '\n';
      (pass ? unif : bern).push_back(r);
    }
  }
  bool nondecreasing = true;
  std::string probs;
  for (std::size_t i = 0; i < bern.size(); ++i) {
    probs += fmt(" %.3f", bern[i].probability);
    // A drop counts only when the Wilson bands separate.
    if (i > 0 && bern[i].ci.hi < bern[i - 1].ci.lo) nondecreasing = false;
  }
  std::string fit_text;
  bool fit_ok = false;
  try {
    const auto fit = failure_exponent(unif);
    fit_ok = fit.slope <= kC8Slope;
    fit_text = fmt("uniform failure exponent %.2f (need <= %.1f)", fit.slope, kC8Slope);
  } catch (const ValidationError&) {
    long fails = 0;
    for (const auto& r : unif) fails += static_cast<long>(r.trials.size()) - r.successes;
    fit_text = fmt("uniform failure exponent not fittable: %ld failures over the ladder", fails);
  }
  Outcome o;
  o.pass = nondecreasing && fit_ok;
  o.gap_only = nondecreasing;
  o.detail = fmt("delta=11/16, bernoulli P[density <= K^-delta] over K=8,27,64:%s nondecreasing within "
                 "Wilson bands: %s; %s",
                 probs.c_str(), nondecreasing ? "yes" : "no", fit_text.c_str());
  if (nondecreasing && !fit_ok) o.detail += " [known gap: no failures at desk K, nothing to fit]";
  return o;
}

// ---------------------------------------------------------------- 9: kernel constants

Outcome c9() {
  KernelConfig cfg;
  cfg.stability_factor = kC9Factor;
  const auto rep = check_lemmas(cfg);
  std::ofstream out(g_out / "kernel.csv");
  write_kernel_csv(out, rep);
  Outcome o;
  o.pass = rep.stable[0] && rep.stable[1] && rep.stable[2] && rep.sigma_direction_ok;
  o.detail = fmt("sup-ratio spread over K=27,64,125: %.2f, %.2f, %.2f (limit %g); sigma^{1/3} direction %s",
                 rep.spread[0], rep.spread[1], rep.spread[2], kC9Factor, rep.sigma_direction_ok ? "ok" : "violated");
  return o;
}

// ---------------------------------------------------------------- 10: determinism

Outcome c10() {
  const std::vector<std::pair<std::string, std::string>> runs = {
      {"sample", R"({"run": {"seed": 10}, "lattice": {"K": 8}})"},
      {"evolve", R"({"run": {"seed": 10}, "lattice": {"K": 8}, "stepper": {"rho": 0.25, "probes": 6}})"},
      {"concentrate", R"({"run": {"seed": 10}, "lattice": {"K": 27}, "montecarlo": {"trials": 200, "probes": 4}})"},
      {"density", R"({"run": {"seed": 10}, "lattice": {"K": 8}, "montecarlo": {"density_trials": 8}})"},
      {"kernel-check", R"({"run": {"seed": 10}, "kernel_oracle": {"instances": 2, "samples": 20000}})"},
      {"census", R"({"run": {"seed": 10}, "lattice": {"K": 27}, "census": {"probes": 16}})"},
  };
  long files = 0, mismatches = 0;
  std::string bad;
  for (const auto& [sub, text] : runs) {
    std::vector<std::vector<std::pair<std::string, std::string>>> hashes;
    for (int threads : {1, 2, 4}) {
      RunOverrides ov;
      ov.threads = threads;
      ov.out_dir = (g_out / "determinism").string();
      const auto res = execute(resolve_config(parse_config(text), ov, sub), sub);
      std::vector<std::pair<std::string, std::string>> h;
      for (const auto& e : fs::directory_iterator(res.dir))
        if (e.path().extension() == ".csv") h.emplace_back(e.path().filename().string(), sha256_file(e.path()));
      std::sort(h.begin(), h.end());
      hashes.push_back(h);
    }
    files += static_cast<long>(hashes[0].size());
    for (std::size_t t = 1; t < hashes.size(); ++t)
      if (hashes[t] != hashes[0]) {
        ++mismatches;
        bad += " " + sub;
      }
  }
  Outcome o;
  o.pass = mismatches == 0 && files > 0;
  o.detail = fmt("%ld CSV artifacts from 6 subcommands hashed at 1, 2, 4 threads: %ld mismatches%s", files,
                 mismatches, bad.c_str());
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  g_out = "acceptance_out";
  std::set<int> only;
  bool strict = false;
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--strict") {
      strict = true;
    } else if (a == "--only" && i + 1 < argc) {
      std::stringstream ss(argv[++i]);
      std::string tok;
      while (std::getline(ss, tok, ',')) only.insert(std::stoi(tok));
    } else {
      g_out = a;
    }
  }
  fs::create_directories(g_out);
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"sampled fields", c1},      {"symbol bound and reduction", c2}, {"overlap integrals", c3},
      {"heat semigroup", c4},      {"self-convergence", c5},           {"uniform estimates", c6},
      {"concentration", c7},       {"bad-set density", c8},            {"kernel constants", c9},
      {"determinism", c10}};
  std::ofstream log(g_out / "acceptance.txt");
  int failed = 0, gaps = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    if (!only.empty() && !only.count(id)) continue;
    Outcome o;
    const auto t0 = std::chrono::steady_clock::now();
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, false, std::string("error: ") + e.what()};
    }
    const std::string line = fmt("%s %2d %-27s %s (%.1f s)", o.pass ? "PASS" : "FAIL", id,
                                 criteria[i].first.c_str(), o.detail.c_str(), seconds_since(t0));
    std::printf("%s\n", line.c_str());
    std::fflush(stdout);
    log << line << "\n";
    if (!o.pass) (o.gap_only ? gaps : failed)++;
  }
  std::printf("acceptance: %d failed, %d known gaps\n", failed, gaps);
  return failed > 0 || (strict && gaps > 0) ? 1 : 0;
}
