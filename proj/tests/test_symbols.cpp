#include "doctest.h"

#include <cmath>

#include "pmns/rng.hpp"
#include "pmns/symbols.hpp"

using namespace pmns;

TEST_CASE("zero symbol") {
  auto M = BilinearSymbol::zero();
  CHECK(M(0, 1, 2, {1, 2, 3}) == cplx(0.0));
  auto R = ReducedSymbol::reduce(M, 0.25, omega_of(256));
  CHECK(R.bound_constant() == 0.0);
  CHECK(R(0, 1, 2, {1, 2, 3}, {1, 1, 1}, {1, 1, 1}) == cplx(0.0));
}

TEST_CASE("navier-stokes symbol entries") {
  auto M = BilinearSymbol::navier_stokes();
  // At ξ = (0,0,1) only k = 3 carries a nonzero factor ξ_k.
  CHECK(M(2, 0, 0, {0, 0, 1}) == cplx(0.0, -1.0));
  CHECK(M(0, 0, 0, {0, 0, 1}) == cplx(0.0));
  CHECK(M(0, 0, 0, {1, 0, 0}) == cplx(0.0));  // projection removes the parallel part
  CHECK(M(0, 1, 1, {1, 0, 0}) == cplx(0.0, -1.0));
  CHECK(M(0, 0, 0, {0, 0, 0}) == cplx(0.0));
  // Output is transverse: Σ_l ξ_l M_kjl(ξ) = 0.
  Vec3 xi{0.3, -1.2, 0.7};
  for (int k = 0; k < 3; ++k)
    for (int j = 0; j < 3; ++j) {
      cplx s = 0;
      for (int l = 0; l < 3; ++l) s += xi[l] * M(k, j, l, xi);
      CHECK(std::abs(s) < 1e-15);
    }
}

TEST_CASE("toy symbol") {
  auto M = BilinearSymbol::toy();
  CHECK(M(0, 0, 0, {3, 4, 0}) == cplx(5.0));
  CHECK(M(0, 0, 1, {3, 4, 0}) == cplx(0.0));
  CHECK(M(1, 0, 0, {3, 4, 0}) == cplx(0.0));
}

TEST_CASE("generalized NS bound holds on samples") {
  Omega o = omega_of(256);
  for (auto M : {BilinearSymbol::toy(), BilinearSymbol::navier_stokes(), BilinearSymbol::zero()}) {
    auto chk = check_symbol_bound(M, o.omega, 8.0, 20000, 3);
    CHECK(chk.violations == 0);
    CHECK(chk.max_ratio <= 1.0 + 1e-15);
  }
  auto bad = [](int, int, int, Vec3 xi) { return cplx(2 * norm(xi)); };
  CHECK_THROWS_AS((void)BilinearSymbol::custom(bad, "double"), ValidationError);
  auto ok = BilinearSymbol::custom([](int k, int j, int l, Vec3 xi) {
    return (k == j && j == l) ? cplx(0, 0.5 * norm(xi)) : cplx(0.0);
  });
  CHECK(ok(1, 1, 1, {0, 0, 2}) == cplx(0, 1));
  CHECK_THROWS_AS((void)BilinearSymbol::make("heat"), ValidationError);
}

TEST_CASE("reduced symbol reproduces the full sum for divergence-free factors") {
  const double kappa = 0.25;
  auto M = BilinearSymbol::navier_stokes();
  auto R = ReducedSymbol::reduce(M, kappa, omega_of(256), 4000);
  rng::Stream st(11);
  for (int trial = 0; trial < 200; ++trial) {
    auto point = [&]() {
      for (;;) {
        Vec3 p{st.uniform(-2, 2), st.uniform(-2, 2), st.uniform(-2, 2)};
        if (in_annulus(p, 1, 2) && std::abs(p.z) >= kappa) return p;
      }
    };
    Vec3 q = point(), p = point();
    Vec3 xi = q + p;
    auto field = [&](Vec3 c) {
      CVec3 v{cplx(st.uniform(-1, 1), st.uniform(-1, 1)), cplx(st.uniform(-1, 1), st.uniform(-1, 1)), 0.0};
      v[2] = -(c.x * v[0] + c.y * v[1]) / c.z;
      return v;
    };
    CVec3 v = field(q), w = field(p);
    for (int l = 0; l < 3; ++l) {
      cplx full = 0, red = 0;
      double scale = 0;
      for (int k = 0; k < 3; ++k)
        for (int j = 0; j < 3; ++j) {
          full += M(k, j, l, xi) * v[k] * w[j];
          scale += std::abs(M(k, j, l, xi) * v[k] * w[j]);
        }
      for (int k = 0; k < 2; ++k)
        for (int j = 0; j < 2; ++j) red += R(k, j, l, xi, q, p) * v[k] * w[j];
      CHECK(std::abs(full - red) <= 1e-12 * std::max(scale, 1e-300));
    }
  }
  CHECK_THROWS_AS((void)R(0, 0, 0, {1, 1, 1}, {1.5, 0, 0.1}, {1.5, 0, 1}), ValidationError);
}

TEST_CASE("toy reduced constant stays inside the elimination envelope") {
  const double kappa = 0.25;
  auto R = ReducedSymbol::reduce(BilinearSymbol::toy(), kappa, omega_of(256), 20000);
  const double sup_xi = 8 * std::sqrt(3.0);
  CHECK(R.bound_constant() > 0);
  CHECK(std::isfinite(R.bound_constant()));
  // |a_k| <= 2/κ on the support, so |M̃| <= |ξ| (1 + 2/κ)².
  CHECK(R.bound_constant() <= 1.1 * sup_xi * std::pow(1 + 2 / kappa, 2));
  auto Rns = ReducedSymbol::reduce(BilinearSymbol::navier_stokes(), kappa, omega_of(256), 20000);
  CHECK(Rns.bound_constant() <= 1.1 * sup_xi * std::pow(1 + 2 / kappa, 2));
}
