#include "pmns/symbols.hpp"

#include "pmns/rng.hpp"

namespace pmns {

namespace {

Vec3 sample_annulus(rng::Stream& st, double lo, double hi) {
  for (;;) {
    Vec3 p{st.uniform(-hi, hi), st.uniform(-hi, hi), st.uniform(-hi, hi)};
    if (!in_box(p, lo)) return p;
  }
}

// Uniform in R_{1,2} ∩ H_κ (|x_3| ≥ κ).
Vec3 sample_support(rng::Stream& st, double kappa) {
  for (;;) {
    Vec3 p = sample_annulus(st, 1.0, 2.0);
    if (std::abs(p.z) >= kappa) return p;
  }
}

}  // namespace

std::string to_string(SymbolKind k) {
  switch (k) {
    case SymbolKind::zero: return "zero";
    case SymbolKind::toy: return "toy";
    case SymbolKind::navier_stokes: return "navier_stokes";
    case SymbolKind::custom: return "custom";
  }
  return "?";
}

SymbolKind symbol_kind_from_string(const std::string& s) {
  if (s == "zero") return SymbolKind::zero;
  if (s == "toy") return SymbolKind::toy;
  if (s == "navier_stokes") return SymbolKind::navier_stokes;
  if (s == "custom") return SymbolKind::custom;
  throw ValidationError("unknown symbol kind '" + s + "' (expected zero, toy, navier_stokes)");
}

BilinearSymbol BilinearSymbol::zero() { return BilinearSymbol{}; }

BilinearSymbol BilinearSymbol::toy() {
  BilinearSymbol M;
  M.kind_ = SymbolKind::toy;
  M.name_ = "toy";
  return M;
}

BilinearSymbol BilinearSymbol::navier_stokes() {
  BilinearSymbol M;
  M.kind_ = SymbolKind::navier_stokes;
  M.name_ = "navier_stokes";
  return M;
}

BilinearSymbol BilinearSymbol::custom(SymbolEvaluator eval, std::string name, long verify_samples,
                                      std::uint64_t seed) {
  if (!eval) throw ValidationError("custom symbol needs an evaluator");
  BilinearSymbol M;
  M.kind_ = SymbolKind::custom;
  M.name_ = std::move(name);
  M.custom_ = std::move(eval);
  auto check = check_symbol_bound(M, 1.0 / 64.0, 8.0, verify_samples, seed);
  if (check.violations > 0) {
    throw ValidationError("custom symbol '" + M.name_ + "' violates |M| <= |xi| at " +
                          std::to_string(check.violations) + " of " +
                          std::to_string(check.samples) + " sampled points (max ratio " +
                          std::to_string(check.max_ratio) + ")");
  }
  return M;
}

BilinearSymbol BilinearSymbol::make(const std::string& kind) {
  switch (symbol_kind_from_string(kind)) {
    case SymbolKind::zero: return zero();
    case SymbolKind::toy: return toy();
    case SymbolKind::navier_stokes: return navier_stokes();
    case SymbolKind::custom: break;
  }
  throw ValidationError("custom symbols must be constructed with an evaluator");
}

cplx BilinearSymbol::operator()(int k, int j, int l, Vec3 xi) const {
  switch (kind_) {
    case SymbolKind::zero: return 0.0;
    case SymbolKind::toy: return (k == 0 && j == 0 && l == 0) ? cplx(norm(xi)) : cplx(0.0);
    case SymbolKind::navier_stokes: {
      double r2 = norm2(xi);
      if (r2 == 0.0) return 0.0;
      double proj = (j == l ? 1.0 : 0.0) - xi[j] * xi[l] / r2;
      return cplx(0.0, -xi[k] * proj);
    }
    case SymbolKind::custom: return custom_(k, j, l, xi);
  }
  return 0.0;
}

SymbolTensor BilinearSymbol::tensor(Vec3 xi) const {
  SymbolTensor T{};
  if (kind_ == SymbolKind::zero) return T;
  if (kind_ == SymbolKind::toy) {
    T[tensor_index(0, 0, 0)] = norm(xi);
    return T;
  }
  for (int l = 0; l < 3; ++l)
    for (int k = 0; k < 3; ++k)
      for (int j = 0; j < 3; ++j) T[tensor_index(k, j, l)] = (*this)(k, j, l, xi);
  return T;
}

SymbolBoundCheck check_symbol_bound(const BilinearSymbol& M, double lo, double hi, long samples,
                                    std::uint64_t seed) {
  SymbolBoundCheck out;
  out.samples = samples;
  rng::Stream st(rng::derive(seed, rng::kSymbolCheck));
  for (long i = 0; i < samples; ++i) {
    Vec3 xi = sample_annulus(st, lo, hi);
    double r = norm(xi);
    SymbolTensor T = M.tensor(xi);
    double worst = 0;
    for (const auto& v : T) worst = std::max(worst, std::abs(v));
    // One ulp of headroom: the NS projection has norm exactly 1.
    if (worst > r * (1 + 4e-16)) ++out.violations;
    out.max_ratio = std::max(out.max_ratio, worst / r);
  }
  return out;
}

ReducedSymbol ReducedSymbol::reduce(const BilinearSymbol& M, double kappa, const Omega& omega,
                                    long samples, std::uint64_t seed) {
  if (!(kappa > 0.0) || !(kappa < 1.0)) throw ValidationError("kappa must lie in (0, 1)");
  ReducedSymbol R;
  R.base_ = M;
  R.kappa_ = kappa;
  if (M.is_zero()) return R;
  rng::Stream st(rng::derive(seed, rng::kSymbolCheck + 100));
  double sup = 0;
  for (long i = 0; i < samples; ++i) {
    Vec3 xi = sample_annulus(st, omega.omega, 8.0);
    Vec3 q = sample_support(st, kappa);
    Vec3 p = sample_support(st, kappa);
    SymbolTensor T = M.tensor(xi);
    for (int l = 0; l < 3; ++l)
      for (int k = 0; k < 2; ++k)
        for (int j = 0; j < 2; ++j) sup = std::max(sup, std::abs(R.from_tensor(T, k, j, l, q, p)));
  }
  R.C_ = 1.1 * sup;
  return R;
}

cplx ReducedSymbol::from_tensor(const SymbolTensor& T, int k, int j, int l, Vec3 q,
                                Vec3 p) const {
  if (std::abs(q.z) < kappa_ || std::abs(p.z) < kappa_) {
    throw ValidationError("reduced symbol evaluated outside H_kappa (|x_3| < kappa)");
  }
  const double ak = -q[k] / q.z;
  const double aj = -p[j] / p.z;
  return T[tensor_index(k, j, l)] + ak * T[tensor_index(2, j, l)] + aj * T[tensor_index(k, 2, l)] +
         ak * aj * T[tensor_index(2, 2, l)];
}

cplx ReducedSymbol::operator()(int k, int j, int l, Vec3 xi, Vec3 q, Vec3 p) const {
  return from_tensor(base_.tensor(xi), k, j, l, q, p);
}

}  // namespace pmns
