#include "pmns/montecarlo.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pmns/rng.hpp"

namespace pmns {

TailBounds tail_bounds(double K, double delta, double beta, double c) {
  if (!(K >= 2)) throw ValidationError("tail bounds need K >= 2");
  if (!(beta > 0) || !(c > 0)) throw ValidationError("beta and c must be positive");
  TailBounds t;
  t.K = K;
  t.delta = delta;
  t.beta = beta;
  t.c = c;
  const double L = std::log(K);
  t.log_hoeffding = std::log(beta) + L - c * std::exp(2 * delta * L);
  t.log_chebyshev = std::log(beta) - 2 * delta * L;
  return t;
}

double tail_crossover_K(double delta, double beta, double c) {
  (void)beta;  // cancels from both sides
  if (!(delta > 0)) return std::numeric_limits<double>::infinity();
  // Hoeffding ≤ Chebyshev ⇔ f(L) = (1 + 2δ)L - c e^{2δL} ≤ 0 with L = log K; f is concave.
  auto f = [&](double L) { return (1 + 2 * delta) * L - c * std::exp(2 * delta * L); };
  const double L0 = std::log(2.0);
  const double Lstar = std::log((1 + 2 * delta) / (2 * delta * c)) / (2 * delta);
  double lo = std::max(L0, Lstar);
  if (f(lo) <= 0) return 2.0;  // f ≤ 0 on all of [log 2, ∞)
  double hi = lo + 1;
  while (f(hi) > 0) hi = lo + 2 * (hi - lo);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) > 0 ? lo : hi) = mid;
  }
  return std::exp(hi);
}

namespace {

struct PartnerGeometry {
  std::int64_t nvec[3];
  double w[3][2];

  PartnerGeometry(Vec3 xi, std::int64_t n_unit) {
    for (int a = 0; a < 3; ++a) {
      const double u = xi[a] * static_cast<double>(n_unit);
      const double fl = std::floor(u);
      nvec[a] = static_cast<std::int64_t>(fl) - 1;
      w[a][1] = u - fl;
      w[a][0] = 1.0 - w[a][1];
    }
  }
  double weight(int c) const { return w[0][c & 1] * w[1][(c >> 1) & 1] * w[2][(c >> 2) & 1]; }
  Cell partner(Cell a, int c) const {
    return {nvec[0] - a.x + (c & 1), nvec[1] - a.y + ((c >> 1) & 1), nvec[2] - a.z + ((c >> 2) & 1)};
  }
};

// Lower corner (in cells) of block s or its mirror.
Cell block_lo(const Partition& P, std::int64_t s, bool mirror) {
  const std::int64_t S = P.block_side_cells();
  const Cell b = P.block_coord(s);
  Cell lo{b.x * S, b.y * S, b.z * S};
  if (mirror) lo = {-lo.x - S, -lo.y - S, -lo.z - S};
  return lo;
}

bool block_active(const Partition& P, const PartnerGeometry& g, std::int64_t s, bool mirror) {
  const std::int64_t S = P.block_side_cells();
  const Cell lo = block_lo(P, s, mirror);
  const Cell plo{g.nvec[0] - lo.x - (S - 1), g.nvec[1] - lo.y - (S - 1), g.nvec[2] - lo.z - (S - 1)};
  return box_meets_support(P, 1, plo, {plo.x + S + 1, plo.y + S + 1, plo.z + S + 1});
}

std::vector<std::int64_t> active_blocks(const Partition& P, Vec3 xi) {
  const PartnerGeometry g(xi, P.K());
  std::vector<std::int64_t> ids;
  for (std::int64_t s = 0; s < P.block_count(); ++s) {
    if (block_active(P, g, s, false) || block_active(P, g, s, true)) ids.push_back(s);
  }
  return ids;
}

// The two basis vectors of the field on a cell: value = Σ_j r^j e_j.
std::array<CVec3, 2> basis(const RandomField& f, Cell cell, const SubblockRef& ref) {
  const Partition& P = f.partition();
  const Cell uc = ref.mirror ? cell.mirrored() : cell;
  const Vec3 c = P.center(uc);
  const double inv = 1.0 / norm2(c);
  std::array<CVec3, 2> e{};
  for (int j = 0; j < 2; ++j) {
    const cplx th = f.theta(j, ref.s, ref.p) * inv;
    e[j][j] = th;
    e[j][2] = -c[j] * th / c.z;
    if (ref.mirror) e[j] = conj(e[j]);
  }
  return e;
}

BlockQuadraticForm build_form(const RandomField& f, const PartnerGeometry& g, const SymbolTensor& T,
                              std::int64_t s, bool mirror) {
  const Partition& P = f.partition();
  const std::int64_t S = P.block_side_cells();
  const double h = P.cell_side(), vol = h * h * h;
  const Cell lo = block_lo(P, s, mirror);

  struct Term {
    std::uint64_t x, y;
    std::array<cplx, 3> c;
  };
  std::vector<Term> terms;
  for (std::int64_t z = 0; z < S; ++z)
    for (std::int64_t y = 0; y < S; ++y)
      for (std::int64_t x = 0; x < S; ++x) {
        const Cell a{lo.x + x, lo.y + y, lo.z + z};
        const auto ra = P.locate(a);
        if (!ra) continue;
        const auto ea = basis(f, a, *ra);
        for (int c = 0; c < 8; ++c) {
          const double wt = g.weight(c);
          if (wt == 0.0) continue;
          const Cell b = g.partner(a, c);
          const auto rb = P.locate(b);
          if (!rb) continue;
          const auto eb = basis(f, b, *rb);
          for (int j1 = 0; j1 < 2; ++j1)
            for (int j2 = 0; j2 < 2; ++j2) {
              Term t;
              t.x = rv_key(P, ra->s, ra->p, j1);
              t.y = rv_key(P, rb->s, rb->p, j2);
              if (t.x > t.y) std::swap(t.x, t.y);
              for (int l = 0; l < 3; ++l) {
                cplx acc = 0;
                for (int k = 0; k < 3; ++k)
                  for (int j = 0; j < 3; ++j) acc += T[tensor_index(k, j, l)] * ea[j1][k] * eb[j2][j];
                t.c[l] = acc * (vol * wt);
              }
              terms.push_back(t);
            }
        }
      }
  std::sort(terms.begin(), terms.end(), [](const Term& a, const Term& b) {
    return a.x != b.x ? a.x < b.x : a.y < b.y;
  });
  BlockQuadraticForm q;
  q.block = s;
  q.mirror = mirror;
  for (const auto& t : terms) {
    if (!q.x.empty() && q.x.back() == t.x && q.y.back() == t.y) {
      for (int l = 0; l < 3; ++l) q.coef.back()[l] += t.c[l];
    } else {
      q.x.push_back(t.x);
      q.y.push_back(t.y);
      q.coef.push_back(t.c);
    }
  }
  return q;
}

}  // namespace

double BlockQuadraticForm::variance(double m2, double v2) const {
  double v = 0;
  for (std::size_t i = 0; i < coef.size(); ++i) {
    double c2 = 0;
    for (const auto& c : coef[i]) c2 += std::norm(c);
    v += c2 * (x[i] == y[i] ? v2 : m2 * m2);
  }
  return v;
}

std::array<cplx, 3> BlockQuadraticForm::mean(double m2) const {
  std::array<cplx, 3> m{};
  for (std::size_t i = 0; i < coef.size(); ++i)
    if (x[i] == y[i])
      for (int l = 0; l < 3; ++l) m[l] += coef[i][l] * m2;
  return m;
}

std::array<cplx, 3> BlockQuadraticForm::evaluate(const RandomField& field) const {
  const auto spb = static_cast<std::uint64_t>(field.partition().subblocks_per_block());
  auto r = [&](std::uint64_t key) {
    const std::uint64_t sp = key / 2;
    return field.random_variable(static_cast<int>(key % 2), static_cast<std::int64_t>(sp / spb),
                                 static_cast<std::int64_t>(sp % spb));
  };
  std::array<cplx, 3> v{};
  for (std::size_t i = 0; i < coef.size(); ++i) {
    const double rr = r(x[i]) * r(y[i]);
    for (int l = 0; l < 3; ++l) v[l] += coef[i][l] * rr;
  }
  return v;
}

std::vector<BlockQuadraticForm> block_quadratic_forms(const RandomField& field, Vec3 xi,
                                                      const BilinearSymbol& M) {
  const Partition& P = field.partition();
  const PartnerGeometry g(xi, P.K());
  const SymbolTensor T = M.tensor(xi);
  std::vector<BlockQuadraticForm> out;
  if (M.is_zero()) return out;
  for (int mir = 0; mir < 2; ++mir)
    for (std::int64_t s = 0; s < P.block_count(); ++s) {
      if (!block_active(P, g, s, mir == 1)) continue;
      auto q = build_form(field, g, T, s, mir == 1);
      if (!q.empty()) out.push_back(std::move(q));
    }
  return out;
}

std::array<double, 2> rv_moments(RvKind kind) {
  switch (kind) {
    case RvKind::bernoulli: return {1.0, 0.0};
    case RvKind::uniform: return {1.0 / 3, 1.0 / 5 - 1.0 / 9};
    case RvKind::custom: break;
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  return {nan, nan};
}

std::vector<Vec3> corner_probes(std::size_t count, std::uint64_t seed) {
  rng::Stream st(rng::derive(seed, rng::kProbes));
  std::vector<Vec3> out(count);
  for (auto& p : out) p = {st.uniform(3.6, 3.9), st.uniform(3.6, 3.9), st.uniform(3.6, 3.9)};
  return out;
}

namespace {

std::uint64_t trial_seed(std::uint64_t master, int t) {
  return rng::derive(rng::derive(master, rng::kTrials), static_cast<std::uint64_t>(t));
}

RandomFieldSpec trial_spec(const RandomFieldSpec& base, int t) {
  RandomFieldSpec s = base;
  s.phase_seed = base.phase_seed.value_or(base.seed);
  s.seed = trial_seed(base.seed, t);
  return s;
}

}  // namespace

void validate_config(const ExceedanceConfig& cfg) {
  if (cfg.trials < 100) throw ValidationError("exceedance experiment needs at least 100 trials");
  if (!(cfg.delta > 0 && cfg.delta < 1)) throw ValidationError("delta must lie in (0, 1)");
  if (cfg.probes.empty()) throw ValidationError("exceedance experiment needs probe frequencies");
  if (cfg.repetitions < 1 || cfg.repetitions > cfg.trials) {
    throw ValidationError("repetitions must lie in [1, trials]");
  }
  if (cfg.threshold_scales.empty()) throw ValidationError("at least one threshold scale is needed");
  for (double t : cfg.threshold_scales) {
    if (std::isnan(t) || t < 0) throw ValidationError("threshold scales must be nonnegative");
  }
  cfg.field.validate();
}

void validate_config(const DensityConfig& cfg) {
  if (cfg.trials < 1) throw ValidationError("density experiment needs at least one trial");
  if (cfg.probe_count < 200) throw ValidationError("density experiment needs at least 200 probes");
  if (!(cfg.delta >= 0 && cfg.delta < 1)) throw ValidationError("delta must lie in [0, 1)");
  if (!(cfg.threshold_scale > 0)) throw ValidationError("threshold scale must be positive");
  cfg.field.validate();
}

ExceedanceResult exceedance_experiment(const std::shared_ptr<const Partition>& P,
                                       const ExceedanceConfig& cfg) {
  validate_config(cfg);

  ExceedanceResult res;
  const double K = static_cast<double>(P->K());
  res.K = K;
  res.delta = cfg.delta;
  res.base_threshold = std::sqrt(loglog(K)) / std::pow(K, 2 - cfg.delta);
  res.bounds = tail_bounds(K, cfg.delta);
  const RandomField ref(P, trial_spec(cfg.field, 0));
  res.amplitude = ref.amplitude();

  const std::size_t np = cfg.probes.size(), nt = cfg.threshold_scales.size();
  std::vector<std::vector<std::int64_t>> ids(np);
  for (std::size_t i = 0; i < np; ++i) ids[i] = active_blocks(*P, cfg.probes[i]);

  // Empirical: block integrals per trial, restricted to the active blocks.
  const int T = cfg.trials;
  std::vector<std::vector<std::vector<std::array<cplx, 3>>>> values(static_cast<std::size_t>(T));
  res.trials.resize(static_cast<std::size_t>(T));
#pragma omp parallel for schedule(dynamic)
  for (int t = 0; t < T; ++t) {
    const RandomField f(P, trial_spec(cfg.field, t));
    TrialReport& rep = res.trials[static_cast<std::size_t>(t)];
    rep.trial = t;
    rep.seed = f.spec().seed;
    rep.probe_max.assign(np, 0.0);
    rep.exceed.assign(np * nt, 0);
    auto& vals = values[static_cast<std::size_t>(t)];
    vals.resize(np);
    for (std::size_t i = 0; i < np; ++i) {
      if (ids[i].empty()) continue;
      BlockIntegralOptions opt;
      opt.blocks = ids[i];
      const auto bi = block_integrals(f, cfg.probes[i], *P, cfg.symbol, opt);
      vals[i].resize(bi.size());
      double mx = 0;
      for (std::size_t e = 0; e < bi.size(); ++e)
        for (int l = 0; l < 3; ++l) {
          vals[i][e][l] = bi.per_block[l][e];
          mx = std::max(mx, std::abs(bi.per_block[l][e]));
        }
      rep.probe_max[i] = mx;
      for (std::size_t k = 0; k < nt; ++k) {
        rep.exceed[i * nt + k] = mx >= cfg.threshold_scales[k] * res.base_threshold ? 1 : 0;
      }
    }
    if (cfg.compute_norms) rep.norms = norms(f);
  }

  // Threshold summaries.
  const int R = cfg.repetitions;
  for (std::size_t k = 0; k < nt; ++k) {
    ThresholdSummary ts;
    ts.scale = cfg.threshold_scales[k];
    ts.threshold = ts.scale * res.base_threshold;
    ts.probe_probability.assign(np, 0.0);
    long any = 0, worst = 0;
    std::vector<long> rep_hits(static_cast<std::size_t>(R), 0), rep_n(static_cast<std::size_t>(R), 0);
    std::vector<long> hits(np, 0);
    for (int t = 0; t < T; ++t) {
      const auto& tr = res.trials[static_cast<std::size_t>(t)];
      bool a = false;
      const auto r = static_cast<std::size_t>(static_cast<long>(t) * R / T);
      rep_n[r] += static_cast<long>(np);
      for (std::size_t i = 0; i < np; ++i)
        if (tr.exceed[i * nt + k]) {
          ++hits[i];
          ++rep_hits[r];
          a = true;
        }
      if (a) ++any;
    }
    double sum = 0;
    for (std::size_t i = 0; i < np; ++i) {
      ts.probe_probability[i] = static_cast<double>(hits[i]) / T;
      sum += ts.probe_probability[i];
      worst = std::max(worst, hits[i]);
    }
    ts.mean_probability = sum / static_cast<double>(np);
    ts.max_probability = static_cast<double>(worst) / T;
    ts.max_ci = wilson_interval(worst, T);
    ts.any_probe_probability = static_cast<double>(any) / T;
    ts.any_probe_ci = wilson_interval(any, T);
    for (int r = 0; r < R; ++r) {
      ts.repetition_probability.push_back(static_cast<double>(rep_hits[static_cast<std::size_t>(r)]) /
                                          static_cast<double>(rep_n[static_cast<std::size_t>(r)]));
    }
    ts.median_repetition = median(ts.repetition_probability);
    res.thresholds.push_back(std::move(ts));
  }

  // Second moments: exact prediction from the quadratic forms against the sample moments.
  if (cfg.predict && !cfg.symbol.is_zero()) {
    const auto mom = rv_moments(cfg.field.rv);
    struct Job {
      std::size_t probe, entry;
      std::int64_t s;
      bool mirror;
    };
    std::vector<Job> jobs;
    for (std::size_t i = 0; i < np; ++i) {
      const std::size_t nb = ids[i].size();
      for (std::size_t e = 0; e < 2 * nb; ++e) jobs.push_back({i, e, ids[i][e % nb], e >= nb});
    }
    std::vector<BlockMoment> all(jobs.size());
    std::vector<char> keep(jobs.size(), 0);
#pragma omp parallel for schedule(dynamic)
    for (std::size_t jdx = 0; jdx < jobs.size(); ++jdx) {
      const Job& jb = jobs[jdx];
      const Vec3 xi = cfg.probes[jb.probe];
      const PartnerGeometry g(xi, P->K());
      if (!block_active(*P, g, jb.s, jb.mirror)) continue;
      const auto q = build_form(ref, g, cfg.symbol.tensor(xi), jb.s, jb.mirror);
      const double vp = q.variance(mom[0], mom[1]);
      if (!(vp > 0)) continue;
      const auto mp = q.mean(mom[0]);
      std::array<cplx, 3> mean{};
      for (int t = 0; t < T; ++t)
        for (int l = 0; l < 3; ++l) mean[l] += values[static_cast<std::size_t>(t)][jb.probe][jb.entry][l];
      for (auto& m : mean) m /= static_cast<double>(T);
      double ve = 0;
      for (int t = 0; t < T; ++t)
        for (int l = 0; l < 3; ++l)
          ve += std::norm(values[static_cast<std::size_t>(t)][jb.probe][jb.entry][l] - mean[l]);
      ve /= static_cast<double>(T - 1);
      BlockMoment bm;
      bm.probe = static_cast<int>(jb.probe);
      bm.block = jb.s;
      bm.mirror = jb.mirror;
      bm.var_predicted = vp;
      bm.var_empirical = ve;
      bm.mean_abs_predicted = std::sqrt(std::norm(mp[0]) + std::norm(mp[1]) + std::norm(mp[2]));
      bm.mean_abs_empirical = std::sqrt(std::norm(mean[0]) + std::norm(mean[1]) + std::norm(mean[2]));
      all[jdx] = bm;
      keep[jdx] = 1;
    }
    std::vector<double> consts;
    res.min_variance_ratio = std::numeric_limits<double>::infinity();
    res.max_variance_ratio = 0;
    const double th4 = std::pow(res.amplitude, 4);
    for (std::size_t jdx = 0; jdx < jobs.size(); ++jdx) {
      if (!keep[jdx]) continue;
      const auto& bm = all[jdx];
      res.moments.push_back(bm);
      res.min_variance_ratio = std::min(res.min_variance_ratio, bm.ratio());
      res.max_variance_ratio = std::max(res.max_variance_ratio, bm.ratio());
      consts.push_back(bm.var_empirical * K * K * K * K / th4);
    }
    res.variance_constant = consts.empty() ? 0.0 : median(consts);
  }
  return res;
}

DensityResult bad_density_experiment(const std::shared_ptr<const Partition>& P,
                                     const DensityConfig& cfg) {
  validate_config(cfg);

  DensityResult res;
  const double K = static_cast<double>(P->K());
  const Omega om = omega_of(K);
  res.K = K;
  res.delta = cfg.delta;
  res.threshold = cfg.threshold_scale * std::sqrt(loglog(K)) / std::pow(K, 1 - cfg.delta);
  res.target = std::pow(K, -cfg.delta);
  res.chain_lhs = std::pow(K, -11.0 / 16) * annulus_volume(om.omega, 8) /
                  annulus_volume(om.omega, 2 * om.omega);
  res.chain_rhs = std::pow(K, -0.25);
  res.chain_holds = res.chain_lhs < res.chain_rhs;

  const auto probes = make_probes(om.omega, 8, cfg.probe_count, cfg.probe_seed);
  double dsum = 0;
  for (int t = 0; t < cfg.trials; ++t) {
    const RandomField f(P, trial_spec(cfg.field, t));
    auto rep = bad_set(f, *P, cfg.symbol, res.threshold, probes, om);
    TrialReport tr;
    tr.trial = t;
    tr.seed = f.spec().seed;
    tr.probe_max = rep.magnitude;
    tr.exceed.resize(rep.flagged.size());
    for (std::size_t i = 0; i < rep.flagged.size(); ++i) tr.exceed[i] = rep.flagged[i] ? 1 : 0;
    tr.density = rep.aggregate_density;
    dsum += tr.density;
    if (tr.density <= res.target) ++res.successes;
    res.shell_density.push_back(rep.shell_density);
    res.trials.push_back(std::move(tr));
  }
  res.probability = static_cast<double>(res.successes) / cfg.trials;
  res.ci = wilson_interval(res.successes, cfg.trials);
  res.mean_density = dsum / cfg.trials;
  return res;
}

LineFit failure_exponent(const std::vector<DensityResult>& ladder) {
  std::vector<double> x, y;
  for (const auto& r : ladder) {
    const double fail = 1.0 - r.probability;
    if (fail > 0) {
      x.push_back(std::log(r.K));
      y.push_back(std::log(fail));
    }
  }
  if (x.size() < 2) throw ValidationError("need failures at two or more K to fit an exponent");
  return fit_line(x, y);
}

CensusReport overlap_census(const Partition& P, const std::vector<Vec3>& probes, long cell_budget) {
  if (cell_budget < 1) throw ValidationError("census cell budget must be positive");
  CensusReport rep;
  rep.K = P.K();
  rep.entries.resize(probes.size());
  const long support_cells = 2 * P.subblock_count();
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < probes.size(); ++i) {
    const Vec3 xi = probes[i];
    const PartnerGeometry g(xi, P.K());
    CensusEntry ce;
    ce.xi = xi;
    const Vec3 half = 0.5 * xi;
    for (int c = 0; c < 8; ++c) {
      if (g.weight(c) == 0.0) continue;
      // Partner of a is a itself iff 2a = nvec + c.
      bool integral = true;
      Cell a;
      std::int64_t v[3];
      for (int ax = 0; ax < 3; ++ax) {
        const std::int64_t t = g.nvec[ax] + ((c >> ax) & 1);
        if (t % 2 != 0) integral = false;
        v[ax] = t / 2;
      }
      a = {v[0], v[1], v[2]};
      if (integral && P.in_support(a)) {
        ++ce.self_overlap;
        ce.self_max_distance = std::max(ce.self_max_distance, norm_inf(P.center(a) - half));
      }
      // Partner of a is the mirror -a-1 iff nvec + c = -1 on every axis (then for every a).
      if (g.nvec[0] + (c & 1) == -1 && g.nvec[1] + ((c >> 1) & 1) == -1 && g.nvec[2] + ((c >> 2) & 1) == -1) {
        ce.mirror_self_overlap += support_cells;
      }
    }
    // Partner counts over the blocks that interact at ξ.
    std::vector<std::pair<std::int64_t, bool>> blocks;
    for (std::int64_t s = 0; s < P.block_count(); ++s)
      for (int m = 0; m < 2; ++m)
        if (block_active(P, g, s, m == 1)) blocks.emplace_back(s, m == 1);
    const std::int64_t S = P.block_side_cells();
    const long total = static_cast<long>(blocks.size()) * S * S * S;
    const long stride = std::max<long>(1, (total + cell_budget - 1) / cell_budget);
    for (long idx = 0; idx < total; idx += stride) {
      const auto& [s, mir] = blocks[static_cast<std::size_t>(idx / (S * S * S))];
      const long r = idx % (S * S * S);
      const Cell lo = block_lo(P, s, mir);
      const Cell a{lo.x + r % S, lo.y + (r / S) % S, lo.z + r / (S * S)};
      int n = 0;
      for (int c = 0; c < 8; ++c)
        if (g.weight(c) > 0 && P.in_support(g.partner(a, c))) ++n;
      ce.max_neighbors = std::max(ce.max_neighbors, n);
      ++ce.cells_checked;
    }
    rep.entries[i] = ce;
  }
  for (const auto& e : rep.entries) {
    rep.max_self_overlap = std::max(rep.max_self_overlap, e.self_overlap);
    rep.max_neighbors = std::max(rep.max_neighbors, e.max_neighbors);
  }
  return rep;
}

}  // namespace pmns
