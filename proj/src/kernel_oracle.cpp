#include "pmns/kernel_oracle.hpp"

#include <algorithm>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "pmns/lattice.hpp"
#include "pmns/rng.hpp"

namespace pmns {

namespace {

constexpr double kPi = 3.14159265358979323846;

Vec3 random_direction(rng::Stream& st) {
  const double z = st.uniform(-1, 1), phi = st.uniform(0, 2 * kPi);
  const double s = std::sqrt(std::max(0.0, 1 - z * z));
  return {s * std::cos(phi), s * std::sin(phi), z};
}

struct Accumulator {
  double sum = 0, sum2 = 0;
  long n = 0;
  void add(double v) {
    sum += v;
    sum2 += v * v;
    ++n;
  }
  double mean() const { return n ? sum / static_cast<double>(n) : 0.0; }
  double var_of_mean() const {
    if (n < 2) return 0;
    const double m = mean();
    return std::max(0.0, (sum2 / static_cast<double>(n) - m * m)) / static_cast<double>(n - 1);
  }
};

}  // namespace

KernelEstimate kernel_integral(const Region& G, double half_side, Vec3 xi, long samples,
                               std::uint64_t seed) {
  if (samples < 1000) throw ValidationError("kernel integral needs at least 1000 samples");
  if (!(half_side > 0) || !std::isfinite(half_side)) throw ValidationError("half side must be positive");
  if (!std::isfinite(xi.x) || !std::isfinite(xi.y) || !std::isfinite(xi.z)) {
    throw ValidationError("xi must be finite");
  }
  const double xn = norm(xi);
  const bool two_balls = xn > 0;
  const double r = two_balls ? std::min(0.45 * xn, half_side / 4) : half_side / 8;
  const long n_ball = samples / 4;
  const long n_rest = samples - (two_balls ? 2 : 1) * n_ball;

  rng::Stream st(rng::derive(seed, rng::kKernel));
  Accumulator b0, b1, rest;
  // Radius uniform in [0, r) gives density 1/(4π r |q - center|²) on the ball.
  for (long i = 0; i < n_ball; ++i) {
    const Vec3 q = (r * st.uniform()) * random_direction(st);
    const double d2 = norm2(xi - q);
    b0.add(G(q) && d2 > 0 ? 4 * kPi * r / d2 : 0.0);
  }
  if (two_balls) {
    for (long i = 0; i < n_ball; ++i) {
      const Vec3 q = xi + (r * st.uniform()) * random_direction(st);
      const double q2 = norm2(q);
      b1.add(G(q) && q2 > 0 ? 4 * kPi * r / q2 : 0.0);
    }
  }
  const double cube = std::pow(2 * half_side, 3), r2 = r * r;
  for (long i = 0; i < n_rest; ++i) {
    const Vec3 q{st.uniform(-half_side, half_side), st.uniform(-half_side, half_side),
                 st.uniform(-half_side, half_side)};
    const double q2 = norm2(q), d2 = norm2(xi - q);
    if (q2 < r2 || (two_balls && d2 < r2) || !G(q)) {
      rest.add(0.0);
      continue;
    }
    rest.add(cube / (q2 * d2));
  }
  KernelEstimate e;
  e.value = b0.mean() + b1.mean() + rest.mean();
  e.std_error = std::sqrt(b0.var_of_mean() + b1.var_of_mean() + rest.var_of_mean());
  e.samples = samples;
  return e;
}

double radial_kernel_integral(double r_lo, double r_hi, double xi_norm) {
  if (!(r_lo >= 0) || !(r_hi >= r_lo) || !(xi_norm >= 0)) {
    throw ValidationError("radial kernel integral needs 0 <= r_lo <= r_hi and |xi| >= 0");
  }
  if (r_lo == r_hi) return 0;
  const double x = xi_norm;
  if (x == 0) {
    if (r_lo == 0) return std::numeric_limits<double>::infinity();
    return 4 * kPi * (1 / r_lo - (std::isinf(r_hi) ? 0.0 : 1 / r_hi));
  }
  // Spherical average of |ξ-q|⁻² over |q| = ρ is log|(ρ+x)/(ρ-x)| / (2ρx).
  auto g = [x](double rho) {
    if (rho < 1e-300) return 2 / x;
    if (rho < x) return std::log1p(2 * rho / (x - rho)) / rho;
    if (rho > x) return std::log1p(2 * x / (rho - x)) / rho;
    return std::numeric_limits<double>::infinity();
  };
  boost::math::quadrature::tanh_sinh<double> ts;
  auto finite = [&](double a, double b) { return a < b ? ts.integrate(g, a, b) : 0.0; };
  double acc = 0;
  const double fin_hi = std::isinf(r_hi) ? std::max(r_lo, 2 * x) : r_hi;
  if (r_lo < x && x < fin_hi) {
    acc += finite(r_lo, x) + finite(x, fin_hi);
  } else {
    acc += finite(r_lo, fin_hi);
  }
  if (std::isinf(r_hi)) {
    boost::math::quadrature::exp_sinh<double> es;
    acc += es.integrate([&](double t) { return g(fin_hi + t); });
  }
  return 2 * kPi / x * acc;
}

ShellCellSet::ShellCellSet(double omega, double outer, double sigma, std::uint64_t seed, int radial,
                           int polar, int azimuthal)
    : omega_(omega), outer_(outer), sigma_(sigma), nr_(radial), nc_(polar), nphi_(azimuthal) {
  if (!(omega > 0) || !(outer > omega)) throw ValidationError("need 0 < omega < outer");
  if (!(sigma >= 0 && sigma <= 1)) throw ValidationError("sigma must lie in [0, 1]");
  if (radial < 1 || polar < 1 || azimuthal < 1) throw ValidationError("cell counts must be positive");
  const int shells = static_cast<int>(std::ceil(std::log2(outer / omega) - 1e-12));
  const std::size_t n = static_cast<std::size_t>(nr_) * nc_ * nphi_;
  const auto keep = static_cast<std::size_t>(std::floor(sigma * static_cast<double>(n) + 1e-9));
  for (int j = 0; j < shells; ++j) {
    std::vector<std::uint64_t> key(n);
    for (std::size_t i = 0; i < n; ++i) key[i] = rng::bits(rng::derive(seed, static_cast<std::uint64_t>(j)), i);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
    std::vector<char> sel(n, 0);
    for (std::size_t i = 0; i < keep; ++i) sel[order[i]] = 1;
    selected_.push_back(std::move(sel));
  }
}

bool ShellCellSet::contains(Vec3 q) const {
  const double rq = norm(q);
  if (!(rq >= omega_) || rq >= outer_) return false;
  const int j = std::min(static_cast<int>(std::floor(std::log2(rq / omega_))), shells() - 1);
  const double lo = std::ldexp(omega_, j), hi = std::min(2 * lo, outer_);
  // Equal-volume cells: uniform in r³, cos θ and φ.
  const double u = (rq * rq * rq - lo * lo * lo) / (hi * hi * hi - lo * lo * lo);
  const int ir = std::clamp(static_cast<int>(u * nr_), 0, nr_ - 1);
  const int ic = std::clamp(static_cast<int>((q.z / rq + 1) / 2 * nc_), 0, nc_ - 1);
  const double phi = std::atan2(q.y, q.x) + kPi;
  const int ip = std::clamp(static_cast<int>(phi / (2 * kPi) * nphi_), 0, nphi_ - 1);
  return selected_[static_cast<std::size_t>(j)][(static_cast<std::size_t>(ir) * nc_ + ic) * nphi_ + ip] != 0;
}

double ShellCellSet::shell_density(int j) const {
  const auto& s = selected_.at(static_cast<std::size_t>(j));
  return static_cast<double>(std::count(s.begin(), s.end(), 1)) / static_cast<double>(s.size());
}

Region concentrated_ball(Vec3 center, double radius, double omega, double outer) {
  return [=](Vec3 q) {
    const double rq = norm(q);
    return rq >= omega && rq < outer && norm2(q - center) < radius * radius;
  };
}

double concentrated_radius(Vec3 xi, double omega, double outer, double sigma) {
  const double xn = norm(xi);
  const int s = xn > omega ? static_cast<int>(std::floor(std::log2(xn / omega))) : 0;
  const double lo = std::ldexp(omega, std::max(s - 1, 0));
  const double shell = 4.0 / 3 * kPi * 7 * lo * lo * lo;
  // Keep the σ = 1 ball inside R_{ω,outer} so that smaller σ shrinks it homothetically.
  const double fit = std::max(0.0, std::min(xn - omega, outer - xn));
  return std::cbrt(sigma) * std::min({0.5 * xn, fit, std::cbrt(shell * 3 / (4 * kPi))});
}

void validate_config(const KernelConfig& cfg) {
  if (cfg.ladder.empty()) throw ValidationError("kernel check needs a K ladder");
  for (double K : cfg.ladder) {
    if (!(K >= 16) || !std::isfinite(K)) throw ValidationError("kernel ladder entries must be at least 16");
  }
  if (cfg.samples < 1000) throw ValidationError("kernel integral needs at least 1000 samples");
  if (!(cfg.stability_factor >= 1)) throw ValidationError("stability factor must be at least 1");
  if (cfg.instances < 1) throw ValidationError("kernel check needs at least one instance");
  if (cfg.sigmas.empty()) throw ValidationError("kernel check needs sigma levels");
  for (double s : cfg.sigmas) {
    if (!(s > 0 && s <= 1)) throw ValidationError("sigma levels must lie in (0, 1]");
  }
  if (!std::is_sorted(cfg.sigmas.rbegin(), cfg.sigmas.rend())) {
    throw ValidationError("sigma levels must be decreasing");
  }
}

KernelReport check_lemmas(const KernelConfig& cfg) {
  validate_config(cfg);
  KernelReport rep;
  rep.ladder = cfg.ladder;
  constexpr double outer = 8;

  // Lay out every row first, then estimate them in parallel.
  std::vector<LemmaRow> rows;
  std::vector<std::uint64_t> row_seed;
  for (std::size_t k = 0; k < cfg.ladder.size(); ++k) {
    const double K = cfg.ladder[k];
    const double om = omega_of(K).omega, ll = loglog(K);
    const std::uint64_t kseed = rng::derive(cfg.seed, static_cast<std::uint64_t>(K));
    rng::Stream st(rng::derive(kseed, rng::kProbes));
    for (int i = 0; i < cfg.instances; ++i) {
      const Vec3 dir = random_direction(st);
      const double mag = om / 4 * std::pow(4 * outer / om, st.uniform());
      for (const char* variant : {"cells", "ball"})
        for (double s : cfg.sigmas) {
          LemmaRow r;
          r.lemma = 1;
          r.K = K;
          r.instance = i;
          r.variant = variant;
          r.sigma = s;
          r.xi = mag * dir;
          r.bound = std::cbrt(s) / mag;
          rows.push_back(r);
          row_seed.push_back(rng::derive(kseed, static_cast<std::uint64_t>(i)));
        }
      LemmaRow low;
      low.lemma = 2;
      low.K = K;
      low.instance = i;
      low.variant = "sphere";
      low.xi = (0.5 * std::pow(K, -1.0 / 8)) * random_direction(st);
      low.bound = 1 / (std::pow(K, 1.0 / 8) * norm(low.xi));
      rows.push_back(low);
      row_seed.push_back(rng::derive(kseed, 1000 + static_cast<std::uint64_t>(i)));
      LemmaRow far = low;
      far.lemma = 3;
      far.xi = (2 * ll) * random_direction(st);
      far.bound = 1 / (ll * norm(far.xi));
      rows.push_back(far);
      row_seed.push_back(rng::derive(kseed, 2000 + static_cast<std::uint64_t>(i)));
    }
  }

  const long n = static_cast<long>(rows.size());
#pragma omp parallel for schedule(dynamic)
  for (long idx = 0; idx < n; ++idx) {
    LemmaRow& r = rows[static_cast<std::size_t>(idx)];
    const std::uint64_t sd = row_seed[static_cast<std::size_t>(idx)];
    const double om = omega_of(r.K).omega;
    KernelEstimate e;
    double tail = 0;
    if (r.lemma == 1) {
      if (r.variant == "cells") {
        // Same seed per instance, so the sets are nested in σ.
        const ShellCellSet G(om, outer, r.sigma, sd);
        e = kernel_integral([&](Vec3 q) { return G.contains(q); }, outer, r.xi, cfg.samples,
                            rng::derive(sd, 1));
      } else {
        const Region G = concentrated_ball(r.xi, concentrated_radius(r.xi, om, outer, r.sigma), om, outer);
        e = kernel_integral(G, outer, r.xi, cfg.samples, rng::derive(sd, 2));
      }
    } else if (r.lemma == 2) {
      e = kernel_integral([](Vec3 q) { const double q2 = norm2(q); return q2 >= 1 && q2 < outer * outer; },
                          outer, r.xi, cfg.samples, sd);
      tail = radial_kernel_integral(outer, std::numeric_limits<double>::infinity(), norm(r.xi));
    } else {
      e = kernel_integral([](Vec3 q) { return norm2(q) < outer * outer; }, outer, r.xi, cfg.samples, sd);
    }
    r.integral = e.value + tail;
    r.std_error = e.std_error;
    r.ratio = r.integral / r.bound;
    r.ratio_stderr = r.std_error / r.bound;
  }
  rep.rows = rows;

  rep.sup_ratio.assign(3, std::vector<double>(cfg.ladder.size(), 0.0));
  for (const auto& r : rep.rows) {
    const auto k = static_cast<std::size_t>(
        std::find(cfg.ladder.begin(), cfg.ladder.end(), r.K) - cfg.ladder.begin());
    auto& s = rep.sup_ratio[static_cast<std::size_t>(r.lemma - 1)][k];
    s = std::max(s, r.ratio);
  }
  for (int l = 0; l < 3; ++l) {
    const auto& v = rep.sup_ratio[static_cast<std::size_t>(l)];
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    rep.spread[l] = *lo > 0 ? *hi / *lo : std::numeric_limits<double>::infinity();
    rep.stable[l] = rep.spread[l] <= cfg.stability_factor;
  }

  // σ direction: rows of one (K, instance, variant) appear consecutively in decreasing σ.
  for (std::size_t i = 0; i < rep.rows.size();) {
    const auto& r0 = rep.rows[i];
    if (r0.lemma != 1) {
      ++i;
      continue;
    }
    SigmaCheck sc;
    sc.K = r0.K;
    sc.instance = r0.instance;
    sc.variant = r0.variant;
    std::size_t j = i;
    for (; j < rep.rows.size() && rep.rows[j].lemma == 1 && rep.rows[j].K == r0.K &&
           rep.rows[j].instance == r0.instance && rep.rows[j].variant == r0.variant;
         ++j) {
      sc.sigma.push_back(rep.rows[j].sigma);
      sc.ratio.push_back(rep.rows[j].ratio);
      sc.ratio_stderr.push_back(rep.rows[j].ratio_stderr);
    }
    for (std::size_t a = 1; a < sc.ratio.size(); ++a) {
      const double se = std::hypot(sc.ratio_stderr[a], sc.ratio_stderr[a - 1]);
      if (sc.ratio[a] > sc.ratio[a - 1] + 2 * se) sc.ok = false;
    }
    rep.sigma_direction_ok = rep.sigma_direction_ok && sc.ok;
    rep.sigma_checks.push_back(std::move(sc));
    i = j;
  }
  return rep;
}

void write_kernel_csv(std::ostream& os, const KernelReport& rep) {
  os << "lemma,K,instance,variant,sigma,xi_x,xi_y,xi_z,integral,stderr,bound,ratio,ratio_stderr\n";
  os.precision(17);
  for (const auto& r : rep.rows) {
    os << r.lemma << ',' << r.K << ',' << r.instance << ',' << r.variant << ',' << r.sigma << ','
       << r.xi.x << ',' << r.xi.y << ',' << r.xi.z << ',' << r.integral << ',' << r.std_error << ','
       << r.bound << ',' << r.ratio << ',' << r.ratio_stderr << '\n';
  }
}

}  // namespace pmns
