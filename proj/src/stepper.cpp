#include "pmns/stepper.hpp"

#include <fftw3.h>

#include <cmath>
#include <limits>
#include <mutex>

namespace pmns {

namespace {

// FFTW planning is not thread-safe.
std::mutex& fftw_mutex() {
  static std::mutex m;
  return m;
}

std::int64_t pos_mod(std::int64_t a, std::int64_t P) {
  std::int64_t r = a % P;
  return r < 0 ? r + P : r;
}

}  // namespace

LatticeField::LatticeField(std::int64_t cells_per_unit, std::int64_t L)
    : n_(cells_per_unit), L_(L) {
  if (cells_per_unit < 1 || L < 1) throw ValidationError("lattice needs positive spacing and extent");
  data_.assign(static_cast<std::size_t>(8 * L * L * L), CVec3{});
}

LatticeField LatticeField::project(const CellField& src, std::int64_t cells_per_unit,
                                   std::int64_t L) {
  LatticeField f(cells_per_unit, L);
  const std::int64_t ratio = cells_per_unit / src.cells_per_unit();
  if (ratio * src.cells_per_unit() != cells_per_unit) {
    throw ValidationError("probe lattice must refine the source lattice (spacing divides 1/K)");
  }
  const std::size_t N = f.size();
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < N; ++i) f.data_[i] = src.value_at(f.center(i));
  return f;
}

Cell LatticeField::cell(std::size_t i) const {
  const auto s = static_cast<std::size_t>(2 * L_);
  const auto x = static_cast<std::int64_t>(i % s), y = static_cast<std::int64_t>((i / s) % s),
             z = static_cast<std::int64_t>(i / (s * s));
  return {x - L_, y - L_, z - L_};
}

CVec3 LatticeField::value(Cell c) const { return contains(c) ? data_[index(c)] : CVec3{}; }

bool LatticeField::may_be_nonzero(Cell lo, Cell hi) const {
  return lo.x < L_ && hi.x > -L_ && lo.y < L_ && hi.y > -L_ && lo.z < L_ && hi.z > -L_;
}

void LatticeField::fill_box(Cell lo, Cell n, CVec3* out) const {
  std::size_t i = 0;
  for (std::int64_t z = 0; z < n.z; ++z)
    for (std::int64_t y = 0; y < n.y; ++y) {
      for (std::int64_t x = 0; x < n.x; ++x) {
        Cell c{lo.x + x, lo.y + y, lo.z + z};
        out[i++] = contains(c) ? data_[index(c)] : CVec3{};
      }
    }
}

double LatticeField::l2() const {
  double s = 0;
  for (const auto& v : data_) s += std::norm(v[0]) + std::norm(v[1]) + std::norm(v[2]);
  const double h = 1.0 / static_cast<double>(n_);
  return std::sqrt(s * h * h * h);
}

std::int64_t good_fft_size(std::int64_t n) {
  for (std::int64_t m = std::max<std::int64_t>(n, 1);; ++m) {
    std::int64_t r = m;
    for (std::int64_t p : {2, 3, 5, 7})
      while (r % p == 0) r /= p;
    if (r == 1) return m;
  }
}

struct NonlinearOperator::Plans {
  std::int64_t P = 0;
  fftw_complex* buf = nullptr;
  fftw_plan fwd = nullptr, bwd = nullptr;
  std::vector<std::vector<cplx>> vhat, ghat;
  std::vector<cplx> prod;

  ~Plans() {
    std::lock_guard<std::mutex> lock(fftw_mutex());
    if (fwd) fftw_destroy_plan(fwd);
    if (bwd) fftw_destroy_plan(bwd);
    if (buf) fftw_free(buf);
  }
};

NonlinearOperator::NonlinearOperator(std::int64_t cells_per_unit, std::int64_t L, BilinearSymbol M)
    : n_(cells_per_unit), L_(L), P_(good_fft_size(3 * L)), M_(std::move(M)),
      plans_(std::make_unique<Plans>()) {
  const std::size_t N = static_cast<std::size_t>(P_ * P_ * P_);
  plans_->P = P_;
  std::lock_guard<std::mutex> lock(fftw_mutex());
  plans_->buf = fftw_alloc_complex(N);
  // FFTW_ESTIMATE picks the same algorithm every run, keeping outputs bit-reproducible.
  const int P = static_cast<int>(P_);
  plans_->fwd = fftw_plan_dft_3d(P, P, P, plans_->buf, plans_->buf, FFTW_FORWARD, FFTW_ESTIMATE);
  plans_->bwd = fftw_plan_dft_3d(P, P, P, plans_->buf, plans_->buf, FFTW_BACKWARD, FFTW_ESTIMATE);
  plans_->vhat.assign(3, std::vector<cplx>(N));
  plans_->ghat.assign(3, std::vector<cplx>(N));
  plans_->prod.assign(N, 0.0);
}

NonlinearOperator::~NonlinearOperator() = default;

void NonlinearOperator::apply(const LatticeField& u, LatticeField& out) {
  if (u.cells_per_unit() != n_ || u.half_width() != L_ || out.half_width() != L_ ||
      out.cells_per_unit() != n_) {
    throw ValidationError("nonlinear operator applied to a field of different geometry");
  }
  std::fill(out.data().begin(), out.data().end(), CVec3{});
  if (M_.is_zero()) return;
  ++evaluations_;

  Plans& pl = *plans_;
  const std::int64_t P = P_, L = L_;
  const std::size_t N = static_cast<std::size_t>(P * P * P);
  auto* buf = reinterpret_cast<cplx*>(pl.buf);
  auto at = [P](std::int64_t x, std::int64_t y, std::int64_t z) {
    return static_cast<std::size_t>((pos_mod(z, P) * P + pos_mod(y, P)) * P + pos_mod(x, P));
  };

  for (int comp = 0; comp < 3; ++comp) {
    // v at lattice index a, stored at a mod P.
    std::fill(buf, buf + N, cplx(0.0));
    for (std::int64_t z = -L; z < L; ++z)
      for (std::int64_t y = -L; y < L; ++y)
        for (std::int64_t x = -L; x < L; ++x) buf[at(x, y, z)] = u[u.index({x, y, z})][comp];
    fftw_execute(pl.fwd);
    std::copy(buf, buf + N, pl.vhat[comp].begin());

    // g(m) = (1/8) Σ_{c∈{0,1}³} v(m + c), m ∈ [-L-1, L).
    std::fill(buf, buf + N, cplx(0.0));
    for (std::int64_t z = -L - 1; z < L; ++z)
      for (std::int64_t y = -L - 1; y < L; ++y)
        for (std::int64_t x = -L - 1; x < L; ++x) {
          cplx s = 0;
          for (int cz = 0; cz < 2; ++cz)
            for (int cy = 0; cy < 2; ++cy)
              for (int cx = 0; cx < 2; ++cx) s += u.value({x + cx, y + cy, z + cz})[comp];
          buf[at(x, y, z)] = 0.125 * s;
        }
    fftw_execute(pl.fwd);
    std::copy(buf, buf + N, pl.ghat[comp].begin());
  }

  const double h = 1.0 / static_cast<double>(n_);
  const double scale = h * h * h / static_cast<double>(N);
  std::vector<std::vector<cplx>> I(6);
  int pair = 0;
  for (int k = 0; k < 3; ++k)
    for (int j = k; j < 3; ++j, ++pair) {
      // I^{kj} = I^{jk}; average the two discrete orderings so rounding stays symmetric.
      const auto &vk = pl.vhat[k], &gj = pl.ghat[j], &vj = pl.vhat[j], &gk = pl.ghat[k];
      for (std::size_t i = 0; i < N; ++i) buf[i] = 0.5 * (vk[i] * gj[i] + vj[i] * gk[i]);
      fftw_execute(pl.bwd);
      I[pair].resize(u.size());
      for (std::int64_t z = -L; z < L; ++z)
        for (std::int64_t y = -L; y < L; ++y)
          for (std::int64_t x = -L; x < L; ++x)
            I[pair][u.index({x, y, z})] = buf[at(x - 1, y - 1, z - 1)] * scale;
    }

  const int pair_of[3][3] = {{0, 1, 2}, {1, 3, 4}, {2, 4, 5}};
  const std::size_t cells = u.size();
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < cells; ++i) {
    const SymbolTensor T = M_.tensor(u.center(i));
    CVec3 r{};
    for (int l = 0; l < 3; ++l)
      for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 3; ++j) {
          const cplx m = T[tensor_index(k, j, l)];
          if (m != 0.0) r[l] += m * I[pair_of[k][j]][i];
        }
    out[i] = r;
  }
}

std::array<double, 2> exp_linear_weights(double lambda, double delta) {
  const double z = lambda * delta;
  double phi1, phi2;
  if (z < 0.1) {
    // With t_n = (-z)^n/(n+1)!: φ1 = Σ t_n, φ2 = Σ t_n (n+1)/(n+2).
    double term = 1.0;
    phi1 = phi2 = 0;
    for (int n = 0; n < 16; ++n) {
      phi1 += term;
      phi2 += term * (n + 1.0) / (n + 2.0);
      term *= -z / (n + 2.0);
    }
  } else {
    const double em = std::exp(-z);
    phi1 = -std::expm1(-z) / z;
    phi2 = (-std::expm1(-z) - z * em) / (z * z);
  }
  // Near node gets Δ(φ1 - φ2), far node Δφ2.
  return {delta * (phi1 - phi2), delta * phi2};
}

double default_window(double K) { return 3.0 * std::pow(loglog(K), 0.25); }

BoundRegions make_bound_regions(const LatticeField& geom, double K, const BadSet* bad) {
  BoundRegions R;
  R.K = K;
  R.omega = omega_of(K).omega;
  R.loglogK = loglog(K);
  if (bad && !bad->empty()) {
    R.bad_mask.resize(geom.size());
    for (std::size_t i = 0; i < geom.size(); ++i) R.bad_mask[i] = bad->contains(geom.center(i));
  }
  return R;
}

BoundTraceRow measure_regions(const LatticeField& u, const BoundRegions& R) {
  BoundTraceRow row;
  row.E = std::numeric_limits<double>::quiet_NaN();
  for (std::size_t i = 0; i < u.size(); ++i) {
    const Vec3 xi = u.center(i);
    const double m = norm2(xi) * max_abs(u[i]);
    if (m == 0.0) continue;
    const bool is_bad = !R.bad_mask.empty() && R.bad_mask[i];
    if (is_bad) row.B = std::max(row.B, m);
    if (!is_bad && in_annulus(xi, 1.0, 2.0)) row.A = std::max(row.A, m);
    if (in_box(xi, R.omega)) row.a = std::max(row.a, m);
    if (!is_bad && (in_annulus(xi, R.omega, 1.0) || in_annulus(xi, 2.0, R.loglogK))) {
      row.b = std::max(row.b, m);
    }
    if (!in_box(xi, R.loglogK)) row.c = std::max(row.c, m);
  }
  return row;
}

namespace {

void merge_max(BoundTraceRow& acc, const BoundTraceRow& r) {
  acc.A = std::max(acc.A, r.A);
  acc.B = std::max(acc.B, r.B);
  acc.a = std::max(acc.a, r.a);
  acc.b = std::max(acc.b, r.b);
  acc.c = std::max(acc.c, r.c);
}

}  // namespace

EvolveResult evolve(const CellField& psi, double K, const BilinearSymbol& M,
                    const EvolveOptions& opt) {
  if (!(opt.rho > 0) || !(opt.rho <= 1)) throw ValidationError("rho must lie in (0, 1]");
  if (opt.q_sub < 1) throw ValidationError("q_sub must be at least 1");
  if (opt.refine < 1) throw ValidationError("refine must be a positive integer");
  if (!(opt.half_width > 0)) throw ValidationError("half_width must be positive");

  EvolveResult res;
  res.T = opt.T > 0 ? opt.T : default_window(K);
  res.rho = opt.rho;
  const double window = opt.rho * res.T;
  const double horizon = opt.horizon > 0 ? opt.horizon : res.T;
  const int n_max = static_cast<int>(std::floor(horizon / window + 1e-9));
  const int N = opt.n_intervals > 0 ? opt.n_intervals : n_max;
  if (N > n_max) {
    throw ValidationError("n_intervals * rho * T exceeds the configured horizon");
  }
  const int q = opt.q_sub;
  const double delta = window / q;
  res.delta = delta;

  const std::int64_t n_unit = psi.cells_per_unit() * opt.refine;
  const std::int64_t L = static_cast<std::int64_t>(std::ceil(opt.half_width * static_cast<double>(n_unit) - 1e-9));
  res.cells_per_unit = n_unit;
  res.half_width_cells = L;

  LatticeField u = LatticeField::project(psi, n_unit, L);
  const std::size_t cells = u.size();
  NonlinearOperator op(n_unit, L, M);
  res.fft_size = op.padded_size();

  // Per-cell heat factors.
  std::vector<double> lam(cells);
  for (std::size_t i = 0; i < cells; ++i) lam[i] = norm2(u.center(i));
  auto w = std::vector<std::array<double, 2>>(cells);
  for (std::size_t i = 0; i < cells; ++i) w[i] = exp_linear_weights(lam[i], delta);

  BoundRegions regions;
  if (opt.trace) regions = make_bound_regions(u, K, opt.bad);

  auto record = [&](const LatticeField& f, double t) {
    res.times.push_back(t);
    std::vector<CVec3> pv;
    pv.reserve(opt.probes.size());
    for (const auto& p : opt.probes) pv.push_back(f.value_at(p));
    res.probe_values.push_back(std::move(pv));
    if (opt.keep_snapshots) res.snapshots.push_back(f);
  };
  auto measure_E = [&](const LatticeField& f, bool restrict) {
    if (!opt.partition || opt.good_probes.empty()) return std::numeric_limits<double>::quiet_NaN();
    BlockIntegralOptions bo;
    bo.restrict_to_R12 = restrict;
    double e = 0;
    for (const auto& p : opt.good_probes) {
      e = std::max(e, block_integrals(f, p, *opt.partition, M, bo).max_abs_sum());
    }
    return e;
  };

  record(u, 0.0);
  if (opt.trace) {
    BoundTraceRow r0 = measure_regions(u, regions);
    r0.n = 0;
    r0.t = 0;
    r0.E = measure_E(u, false);
    res.trace.push_back(r0);
  }

  // History: N at the q + 1 nodes of the previous interval (all N[ψ] before t = 0).
  std::vector<LatticeField> hist(static_cast<std::size_t>(q + 1), LatticeField(n_unit, L));
  std::vector<LatticeField> cur(static_cast<std::size_t>(q + 1), LatticeField(n_unit, L));
  op.apply(u, hist[0]);
  for (int k = 1; k <= q; ++k) hist[static_cast<std::size_t>(k)] = hist[0];

  LatticeField node(n_unit, L);
  for (int n = 0; n < N; ++n) {
    const double tau = n * window;
    BoundTraceRow acc;
    cur[0] = hist[static_cast<std::size_t>(q)];  // N(τ_n), already known
    for (int i = 1; i <= q; ++i) {
      // û(τ_n + iΔ) = e^{-λ iΔ} û(τ_n) + Σ_{k<i} e^{-λ (q+i-k-1)Δ} (near N_{k+1} + far N_k)
#pragma omp parallel for schedule(static)
      for (std::size_t c = 0; c < cells; ++c) {
        CVec3 v;
        const double decay = std::exp(-lam[c] * i * delta);
        for (int a = 0; a < 3; ++a) v[a] = decay * u[c][a];
        for (int k = 0; k < i; ++k) {
          const double e = std::exp(-lam[c] * (q + i - k - 1) * delta);
          const CVec3& nf = hist[static_cast<std::size_t>(k)][c];
          const CVec3& nn = hist[static_cast<std::size_t>(k + 1)][c];
          for (int a = 0; a < 3; ++a) v[a] += e * (w[c][0] * nn[a] + w[c][1] * nf[a]);
        }
        node[c] = v;
      }
      if (opt.trace) merge_max(acc, measure_regions(node, regions));
      if (i < q) op.apply(node, cur[static_cast<std::size_t>(i)]);
    }
    u = node;
    op.apply(u, cur[static_cast<std::size_t>(q)]);
    std::swap(hist, cur);
    record(u, tau + window);
    if (opt.trace) {
      acc.n = n + 1;
      acc.t = tau + window;
      acc.E = measure_E(u, true);
      res.trace.push_back(acc);
    }
  }
  res.final_field = u;
  res.nonlinear_evaluations = op.evaluations();
  return res;
}

}  // namespace pmns
