#include "doctest.h"

#include <boost/multiprecision/cpp_dec_float.hpp>
#include <cmath>

#include "pmns/bounds.hpp"
#include "pmns/types.hpp"

using namespace pmns;
using Big = boost::multiprecision::cpp_dec_float_50;

namespace {

// Independent evaluation of the recurrences in 50-digit decimal arithmetic, written directly
// from the displayed formulas.
struct BigState {
  Big a, b, c, A, B, E;
};

BigState big_run(double log10K, double M, double rho, double lambda, int steps) {
  using boost::multiprecision::exp;
  using boost::multiprecision::log;
  using boost::multiprecision::pow;
  const Big logK = Big(log10K) * log(Big(10));
  const Big ll = log(logK);
  const Big q = pow(ll, Big(0.25));
  auto Kp = [&](Big p) { return exp(p * logK); };
  const Big th = Kp(Big(-1) / 12), lam(lambda), r(rho), m(M);
  const Big K18 = Kp(Big(-1) / 8), K27 = Kp(Big(-2) / 7);
  BigState s{0, 0, 0, m * q, m * q, Kp(Big(-1) / 4)};
  for (int n = 0; n < steps; ++n) {
    const Big &a = s.a, &b = s.b, &c = s.c, &A = s.A, &B = s.B, &E = s.E;
    const Big com = th * B * (a + b + c + A + B);
    const Big X = a * b * K18 + a * A * K18 + A * b + b * b + b * c / ll + com + c * c / ll;
    const Big u = B * K27 + A * A + X, v = A * K27 + E + X;
    const Big Y = th * u * u + 2 * th * u * v + v * v;
    BigState t;
    t.B = B + lam * (a * a + a * b + a * A + b * A + A * A + b * c + c * c + com) * q * r;
    t.a = a + lam * (a * a + a * b + A * A * K18 + A * b * K18 + com + c * c * K18 + c * b * K18) *
                  pow(ll / Kp(Big(1)), Big(0.25)) * r;
    t.b = b + lam * (a * a + a * b + a * c + b * b + b * c + A * b + A * c + c * c + E + com) * ll * q * r;
    t.E = E + lam * (A + th * B) * (A * K27 + E + X) * q * r + th * lam * (A + B) * (B * K27 + A * A + X) * q * r +
          lam * lam * Y * pow(ll, Big(0.5)) * r * r;
    t.c = Kp(Big(-1) / 17);
    t.A = 2 * m * q;
    s = t;
  }
  return s;
}

void check_close(LogNum x, const Big& y) {
  if (y == 0) {
    CHECK(x.is_zero());
    return;
  }
  const double ly = static_cast<double>(boost::multiprecision::log(y));
  CHECK(std::abs(x.log() - ly) <= 1e-9 * std::max(1.0, std::abs(ly)));
}

BoundParams params(double log10K, double lambda = 1, double M = 1, double rho = 1e-3) {
  BoundParams p;
  p.log_K = log10K * std::log(10.0);
  p.lambda = lambda;
  p.M = M;
  p.rho = rho;
  return p;
}

}  // namespace

TEST_CASE("log-domain arithmetic") {
  auto x = LogNum::from_value(3), y = LogNum::from_value(4);
  CHECK((x + y).value() == doctest::Approx(7));
  CHECK((x * y).value() == doctest::Approx(12));
  CHECK((y / x).value() == doctest::Approx(4.0 / 3));
  CHECK(x.pow(2).value() == doctest::Approx(9));
  CHECK((x + LogNum::zero()) == x);
  CHECK((x * LogNum::zero()).is_zero());
  CHECK(LogNum::zero().pow(0) == LogNum::one());
  // Far outside double range.
  auto big = LogNum::from_log(1e6), tiny = LogNum::from_log(-1e6);
  CHECK((big + big).log() == doctest::Approx(1e6 + std::log(2.0)));
  CHECK((big * tiny).log() == doctest::Approx(0.0));
  CHECK((big + tiny) == big);
  CHECK(log_slack(LogNum::zero(), x) == std::numeric_limits<double>::infinity());
  CHECK_THROWS_AS(LogNum::from_value(-1), ValidationError);
  CHECK_THROWS_AS(LogNum::from_value(std::nan("")), ValidationError);
}

TEST_CASE("first step from zero low and high modes") {
  auto p = params(12, 1.7);
  auto s0 = initial_state(p);
  auto s1 = advance(s0, p);
  const double ll = std::log(p.log_K), K = 1e12, th = std::pow(K, -1.0 / 12);
  const double A0 = std::pow(ll, 0.25), B0 = A0;
  const double a1 = 1.7 * (std::pow(K, -1.0 / 8) * A0 * A0 + th * B0 * (A0 + B0)) *
                    std::pow(ll / K, 0.25) * 1e-3;
  CHECK(s1.a.value() == doctest::Approx(a1).epsilon(1e-12));
  CHECK(s1.n == 1);
  CHECK(s1.c.value() == doctest::Approx(std::pow(K, -1.0 / 17)));
  CHECK(s1.A.value() == doctest::Approx(2 * A0));
}

TEST_CASE("sparsity with theta = 0 and E = 0") {
  auto p = params(12, 1.0);
  p.log_theta = -std::numeric_limits<double>::infinity();
  auto s0 = initial_state(p);
  s0.E = LogNum::zero();
  auto s1 = advance(s0, p);
  const double ll = std::log(p.log_K), q = std::pow(ll, 0.25), A0 = q, K = 1e12;
  CHECK(s1.B.value() == doctest::Approx(A0 + A0 * A0 * q * 1e-3).epsilon(1e-12));
  // E does not stay zero: the A²/K^{2/7} term and the ρ² term feed it.
  const double v = A0 * std::pow(K, -2.0 / 7);
  const double E1 = A0 * v * q * 1e-3 + v * v * std::sqrt(ll) * 1e-6;
  CHECK(s1.E.value() == doctest::Approx(E1).epsilon(1e-12));
  CHECK(s1.b.value() == doctest::Approx(0.0));
}

TEST_CASE("log-domain recurrence matches a 50-digit decimal evaluation") {
  SUBCASE("K = 1e12, first 12 steps") {
    auto p = params(12);
    auto s = initial_state(p);
    for (int n = 0; n < 12; ++n) s = advance(s, p);
    auto big = big_run(12, 1, 1e-3, 1, 12);
    check_close(s.a, big.a);
    check_close(s.b, big.b);
    check_close(s.B, big.B);
    check_close(s.E, big.E);
  }
  SUBCASE("K = 1e300, full run") {
    auto p = params(300);
    auto s = initial_state(p);
    for (int n = 0; n < 1000; ++n) s = advance(s, p);
    auto big = big_run(300, 1, 1e-3, 1, 1000);
    check_close(s.a, big.a);
    check_close(s.b, big.b);
    check_close(s.c, big.c);
    check_close(s.A, big.A);
    check_close(s.B, big.B);
    check_close(s.E, big.E);
  }
}

TEST_CASE("recurrences are nondecreasing in n") {
  for (double l10 : {9.0, 60.0, 300.0}) {
    auto rep = verify_uniform(params(l10));
    REQUIRE(rep.rows.size() == 1000);
    for (std::size_t i = 1; i < rep.rows.size(); ++i) {
      const auto &x = rep.rows[i - 1].state, &y = rep.rows[i].state;
      CHECK(x.a <= y.a);
      CHECK(x.b <= y.b);
      CHECK(x.B <= y.B);
      CHECK(x.E <= y.E);
    }
  }
}

TEST_CASE("uniform estimates: zero data, violations, lambda direction") {
  auto zero = uniform_threshold(params(6, 1, 0), default_log10_ladder());
  CHECK(zero.found);
  CHECK(zero.log10_K == 6);
  for (const auto& r : zero.reports) CHECK(r.holds);

  auto below = verify_uniform(params(6));
  CHECK_FALSE(below.holds);
  CHECK_FALSE(below.first_violation.empty());
  CHECK(below.first_violation_n >= 1);

  std::vector<double> lams = {1e-6, 1e-5, 1e-4, 1e-3, 1e-2, 1e-1, 1};
  auto fr = lambda_frontier(params(6), lams, default_log10_ladder());
  double prev = 0;
  for (const auto& t : fr) {
    const double k = t.found ? t.log10_K : std::numeric_limits<double>::infinity();
    CHECK(k >= prev);
    prev = k;
  }
  // Where a threshold exists, every inequality has strictly positive slack there.
  for (const auto& t : fr) {
    if (!t.found) continue;
    for (const auto& r : t.reports) {
      if (r.params.log_K != doctest::Approx(t.log10_K * std::log(10.0))) continue;
      for (double s : r.min_slack) CHECK(s > 0);
    }
  }
}

TEST_CASE("fine low-frequency bounds") {
  auto p = params(60);
  auto f = initial_fine(5);
  auto s = initial_state(p);
  BoundState still = s;
  still.a = still.b = still.c = still.A = still.B = LogNum::zero();
  auto g = advance_fine(f, still, p, 0.25);
  for (auto v : g.a) CHECK(v.is_zero());

  for (int n = 0; n < 20; ++n) {
    f = advance_fine(f, s, p, 0.25);
    s = advance(s, p);
  }
  for (std::size_t i = 0; i + 1 < f.a.size(); ++i) {
    CHECK(f.a[i + 1].value() == doctest::Approx(f.a[i].value() / 4).epsilon(1e-12));
  }
  CHECK(f.max_ratio > 0);
  CHECK(std::isfinite(f.max_ratio));
}

TEST_CASE("long-term threshold") {
  auto ladder = default_log10_ladder();
  auto r1 = longterm_threshold(1.0, ladder);
  REQUIRE(r1.found);
  double expect = NAN;
  for (double l : ladder)
    if (longterm_expression(l * std::log(10.0)) < 1.0) {
      expect = l;
      break;
    }
  CHECK(r1.log10_K == expect);
  CHECK(r1.nonlinear_bound > 1.0);
  CHECK_FALSE(longterm_threshold(0.0, ladder).found);
  double prev = -1;
  for (double eps : {0.99, 0.9, 0.8, 0.75, 0.7}) {
    auto r = longterm_threshold(eps, ladder);
    const double k = r.found ? r.log10_K : std::numeric_limits<double>::infinity();
    CHECK(k >= prev);
    prev = k;
  }
  CHECK_THROWS_AS(longterm_threshold(1.5, ladder), ValidationError);
}
