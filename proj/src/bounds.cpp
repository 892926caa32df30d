#include "pmns/bounds.hpp"

#include <algorithm>

#include "pmns/types.hpp"

namespace pmns {

LogNum LogNum::from_value(double x) {
  if (std::isnan(x) || x < 0) throw ValidationError("log-domain numbers must be finite and nonnegative");
  return from_log(std::log(x));
}

LogNum operator+(LogNum a, LogNum b) {
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  const double hi = std::max(a.l_, b.l_), lo = std::min(a.l_, b.l_);
  if (hi == std::numeric_limits<double>::infinity()) return LogNum::from_log(hi);
  return LogNum::from_log(hi + std::log1p(std::exp(lo - hi)));
}

double log_slack(LogNum value, LogNum bound) {
  if (value.is_zero()) return std::numeric_limits<double>::infinity();
  return bound.log() - value.log();
}

void BoundParams::validate() const {
  if (!(log_K > 1)) throw ValidationError("bounds need K > e so that log log K > 0");
  if (!std::isfinite(log_K)) throw ValidationError("log K must be finite");
  if (!(M >= 0) || !std::isfinite(M)) throw ValidationError("M must be a finite nonnegative number");
  if (!(rho > 0 && rho <= 1)) throw ValidationError("rho must lie in (0, 1]");
  if (!(lambda > 0) || !std::isfinite(lambda)) throw ValidationError("lambda must be positive");
  if (log_theta && std::isnan(*log_theta)) throw ValidationError("log theta is NaN");
}

namespace {

struct Consts {
  LogNum lam, rho, theta, ll, q, M;
  LogNum K18, K27;  // K^{-1/8}, K^{-2/7}
};

Consts consts(const BoundParams& p) {
  Consts c;
  c.lam = LogNum::from_value(p.lambda);
  c.rho = LogNum::from_value(p.rho);
  c.theta = p.theta();
  c.ll = LogNum::from_value(p.loglogK());
  c.q = c.ll.pow(0.25);
  c.M = LogNum::from_value(p.M);
  c.K18 = p.K_pow(-1.0 / 8);
  c.K27 = p.K_pow(-2.0 / 7);
  return c;
}

LogNum common_term(const BoundState& s, const Consts& k) {
  return k.theta * s.B * (s.a + s.b + s.c + s.A + s.B);
}

LogNum a_bracket(const BoundState& s, const Consts& k) {
  const LogNum& a = s.a;
  const LogNum& b = s.b;
  const LogNum& c = s.c;
  const LogNum& A = s.A;
  return a * a + a * b + k.K18 * A * A + k.K18 * A * b + common_term(s, k) + k.K18 * c * c +
         k.K18 * c * b;
}

}  // namespace

BoundState initial_state(const BoundParams& p) {
  p.validate();
  BoundState s;
  const LogNum q = LogNum::from_value(p.loglogK()).pow(0.25);
  s.A = s.B = LogNum::from_value(p.M) * q;
  s.E = p.M == 0 ? LogNum::zero() : p.K_pow(-0.25);
  return s;
}

LogNum recurrence_X(const BoundState& s, const BoundParams& p) {
  const Consts k = consts(p);
  const LogNum& a = s.a;
  const LogNum& b = s.b;
  const LogNum& c = s.c;
  const LogNum& A = s.A;
  return k.K18 * a * b + k.K18 * a * A + A * b + b * b + b * c / k.ll + common_term(s, k) +
         c * c / k.ll;
}

LogNum recurrence_Y(const BoundState& s, const BoundParams& p) {
  const Consts k = consts(p);
  const LogNum X = recurrence_X(s, p);
  const LogNum two = LogNum::from_value(2);
  const LogNum u = s.B * k.K27 + s.A * s.A + X;
  const LogNum v = s.A * k.K27 + s.E + X;
  return k.theta * u * u + two * k.theta * u * v + v * v;
}

TrapCheck trap_check(const BoundState& s, const BoundParams& p) {
  const Consts k = consts(p);
  TrapCheck t;
  t.c_value = k.lam * (s.b * s.b + s.b * s.c + (s.b + s.c / k.ll) * (s.A + k.theta * s.B + s.a) +
                       s.c * s.c);
  t.c_bound = p.K_pow(-1.0 / 17) / LogNum::from_value(2);
  t.A_value = s.E + recurrence_X(s, p);
  t.A_bound = p.K_pow(-1.0 / 16);
  return t;
}

BoundState advance(const BoundState& s, const BoundParams& p) {
  for (LogNum v : {s.a, s.b, s.c, s.A, s.B, s.E}) {
    if (std::isnan(v.log())) throw ValidationError("bound state contains NaN");
  }
  const Consts k = consts(p);
  const LogNum& a = s.a;
  const LogNum& b = s.b;
  const LogNum& c = s.c;
  const LogNum& A = s.A;
  const LogNum& B = s.B;
  const LogNum& E = s.E;
  const LogNum common = common_term(s, k);
  const LogNum X = recurrence_X(s, p);
  const LogNum Y = recurrence_Y(s, p);
  const LogNum qr = k.q * k.rho;

  BoundState r;
  r.n = s.n + 1;
  r.B = B + k.lam * (a * a + a * b + a * A + b * A + A * A + b * c + c * c + common) * qr;
  r.a = a + k.lam * a_bracket(s, k) * (k.ll / p.K()).pow(0.25) * k.rho;
  r.b = b + k.lam * (a * a + a * b + a * c + b * b + b * c + A * b + A * c + c * c + E + common) *
                k.ll * qr;
  r.E = E + k.lam * (A + k.theta * B) * (A * k.K27 + E + X) * qr +
        k.theta * k.lam * (A + B) * (B * k.K27 + A * A + X) * qr +
        k.lam * k.lam * Y * k.ll.pow(0.5) * k.rho * k.rho;
  // Zero data stays zero, so the ceilings only apply when M > 0.
  r.c = p.M == 0 ? LogNum::zero() : p.K_pow(-1.0 / 17);
  r.A = LogNum::from_value(2) * k.M * k.q;
  return r;
}

UniformCeilings uniform_ceilings(int n, const BoundParams& p) {
  const Consts k = consts(p);
  const double ll = p.loglogK();
  const LogNum nrho = LogNum::from_value(n * p.rho);
  const double growth = std::log1p(12 * p.M * p.M * std::pow(ll, 2.5) * p.rho);
  UniformCeilings u;
  u.a = p.K_pow(-1.0 / 16) * LogNum::from_log((n - 1) * std::log1p(p.rho)) * nrho;
  u.b = p.K_pow(-1.0 / 14) * LogNum::from_log((n - 1) * growth) * nrho;
  u.c = p.K_pow(-1.0 / 17);
  u.A = LogNum::from_value(2) * k.M * k.q;
  u.B = k.M * k.q + LogNum::from_value(1 + 4 * p.M * p.M * std::pow(ll, 2.5)) * k.q * nrho;
  u.E = p.K_pow(-1.0 / 14) * LogNum::from_log(n * growth) * nrho;
  return u;
}

UniformReport verify_uniform(const BoundParams& p, bool keep_rows) {
  p.validate();
  UniformReport rep;
  rep.params = p;
  std::fill(std::begin(rep.min_slack), std::end(rep.min_slack),
            std::numeric_limits<double>::infinity());
  const int N = static_cast<int>(std::floor(1.0 / p.rho + 1e-9));
  BoundState s = initial_state(p);
  for (int n = 1; n <= N; ++n) {
    SlackRow row;
    row.traps = trap_check(s, p);
    s = advance(s, p);
    row.state = s;
    row.ceiling = uniform_ceilings(n, p);
    row.slack[0] = log_slack(s.a, row.ceiling.a);
    row.slack[1] = log_slack(s.b, row.ceiling.b);
    // c and A sit exactly on their ceilings; what can fail is the trap that keeps them there.
    row.slack[2] = p.M == 0 ? std::numeric_limits<double>::infinity()
                            : log_slack(row.traps.c_value, row.traps.c_bound);
    row.slack[3] = p.M == 0 ? std::numeric_limits<double>::infinity()
                            : log_slack(row.traps.A_value, row.traps.A_bound);
    row.slack[4] = log_slack(s.B, row.ceiling.B);
    row.slack[5] = log_slack(s.E, row.ceiling.E);
    for (int i = 0; i < 6; ++i) {
      rep.min_slack[i] = std::min(rep.min_slack[i], row.slack[i]);
      if (rep.holds && row.slack[i] < 0) {
        rep.holds = false;
        rep.first_violation = kUniformNames[i];
        rep.first_violation_n = n;
      }
    }
    if (keep_rows) rep.rows.push_back(row);
  }
  return rep;
}

ThresholdResult uniform_threshold(BoundParams base, const std::vector<double>& log10_ladder) {
  ThresholdResult res;
  res.lambda = base.lambda;
  for (double l10 : log10_ladder) {
    base.log_K = l10 * std::log(10.0);
    res.reports.push_back(verify_uniform(base, false));
    if (!res.found && res.reports.back().holds) {
      res.found = true;
      res.log10_K = l10;
    }
  }
  return res;
}

std::vector<ThresholdResult> lambda_frontier(const BoundParams& base,
                                             const std::vector<double>& lambdas,
                                             const std::vector<double>& log10_ladder) {
  std::vector<ThresholdResult> out(lambdas.size());
  const int n = static_cast<int>(lambdas.size());
#pragma omp parallel for schedule(dynamic)
  for (int i = 0; i < n; ++i) {
    BoundParams p = base;
    p.lambda = lambdas[static_cast<std::size_t>(i)];
    out[static_cast<std::size_t>(i)] = uniform_threshold(p, log10_ladder);
  }
  return out;
}

std::vector<double> default_log10_ladder() {
  std::vector<double> l;
  for (int e = 6; e <= 60; e += 3) l.push_back(e);
  return l;
}

FineBoundState initial_fine(int depth) {
  if (depth < 1) throw ValidationError("fine bound depth must be at least 1");
  FineBoundState f;
  f.a.assign(static_cast<std::size_t>(depth), LogNum::zero());
  return f;
}

LogNum fine_V(const BoundState& s, const BoundParams& p) {
  const Consts k = consts(p);
  return k.lam * a_bracket(s, k);
}

FineBoundState advance_fine(const FineBoundState& fine, const BoundState& state,
                            const BoundParams& p, double omega) {
  if (!(omega > 0)) throw ValidationError("omega must be positive");
  const Consts k = consts(p);
  FineBoundState r = fine;
  r.n = fine.n + 1;
  r.V = fine_V(state, p);
  const LogNum nrho = LogNum::from_value(state.n * p.rho);
  for (std::size_t i = 0; i < r.a.size(); ++i) {
    const LogNum scale = LogNum::from_value(omega / std::ldexp(1.0, static_cast<int>(i))).pow(2) * k.q;
    r.a[i] = fine.a[i] + r.V * scale * nrho;
    if (!r.a[i].is_zero()) r.max_ratio = std::max(r.max_ratio, (r.a[i] / scale).value());
  }
  return r;
}

double longterm_expression(double log_K) {
  const double q = std::pow(std::log(log_K), 0.25);
  return 2 * q * std::exp(-q) + std::exp(-log_K / 16);
}

LongtermResult longterm_threshold(double epsilon, const std::vector<double>& log10_ladder) {
  if (std::isnan(epsilon) || epsilon < 0 || epsilon > 1) {
    throw ValidationError("epsilon must lie in [0, 1]");
  }
  LongtermResult res;
  res.epsilon = epsilon;
  for (double l10 : log10_ladder) {
    const double lk = l10 * std::log(10.0);
    if (!(lk > 1)) throw ValidationError("ladder entries must exceed K = e");
    const double v = longterm_expression(lk);
    res.curve.emplace_back(l10, v);
    res.min_value = std::min(res.min_value, v);
    if (!res.found && v < epsilon) {
      res.found = true;
      res.log10_K = l10;
      res.value_at_K = v;
      res.nonlinear_bound = epsilon * epsilon + 200 * std::pow(std::log(lk), 5.5) * std::exp(-lk / 12);
    }
  }
  return res;
}

}  // namespace pmns
