#include "doctest.h"

#include <cmath>
#include <limits>

#include "pmns/montecarlo.hpp"

using namespace pmns;

namespace {

std::shared_ptr<Partition> part(std::int64_t K, double kappa = 0.25) {
  return std::make_shared<Partition>(Partition::build(K, kappa));
}

RandomFieldSpec spec_for(const Partition& P, std::uint64_t seed, RvKind rv = RvKind::bernoulli) {
  RandomFieldSpec s;
  s.K = P.K();
  s.kappa = P.kappa_requested();
  s.seed = seed;
  s.phases = PhaseKind::random;
  s.rv = rv;
  return s;
}

}  // namespace

TEST_CASE("quadratic forms reproduce the block integrals") {
  auto P = part(8);
  for (RvKind rv : {RvKind::bernoulli, RvKind::uniform}) {
    RandomField f(P, spec_for(*P, 17, rv));
    for (Vec3 xi : {Vec3{1.3, 2.15, 3.4}, Vec3{-0.7, 2.9, 0.45}, Vec3{3.7, 3.8, 3.76}}) {
      const auto forms = block_quadratic_forms(f, xi, BilinearSymbol::navier_stokes());
      const auto bi = block_integrals(f, xi, *P, BilinearSymbol::navier_stokes());
      std::vector<char> seen(bi.size(), 0);
      for (const auto& q : forms) {
        std::size_t e = 0;
        while (e < bi.size() && !(bi.block_ids[e] == q.block && bi.mirror[e] == q.mirror)) ++e;
        REQUIRE(e < bi.size());
        seen[e] = 1;
        const auto v = q.evaluate(f);
        for (int l = 0; l < 3; ++l) CHECK(std::abs(v[l] - bi.per_block[l][e]) <= 1e-12);
      }
      for (std::size_t e = 0; e < bi.size(); ++e)
        if (!seen[e])
          for (int l = 0; l < 3; ++l) CHECK(bi.per_block[l][e] == cplx(0));
    }
  }
}

TEST_CASE("predicted block variance matches the sample variance") {
  auto P = part(8);
  ExceedanceConfig cfg;
  cfg.field = spec_for(*P, 5);
  cfg.probes = {Vec3{1.3, 2.15, 3.4}, Vec3{-0.7, 2.9, 0.45}};
  cfg.trials = 2000;
  auto res = exceedance_experiment(P, cfg);
  REQUIRE(res.moments.size() > 10);
  double biggest = 0;
  for (const auto& m : res.moments) biggest = std::max(biggest, m.var_predicted);
  int checked = 0;
  for (const auto& m : res.moments) {
    if (m.var_predicted < 1e-3 * biggest) continue;
    CHECK(m.ratio() > 0.8);
    CHECK(m.ratio() < 1.25);
    ++checked;
  }
  CHECK(checked > 5);
  CHECK(res.min_variance_ratio > 0.25);
  CHECK(res.max_variance_ratio < 4);
  CHECK(res.trials.size() == 2000);
  REQUIRE(res.thresholds.size() == 1);
  CHECK(res.thresholds[0].repetition_probability.size() == 5);

  SUBCASE("infinite threshold is never exceeded") {
    cfg.trials = 100;
    cfg.repetitions = 1;
    cfg.predict = false;
    cfg.threshold_scales = {std::numeric_limits<double>::infinity(), 0.0};
    auto r = exceedance_experiment(P, cfg);
    CHECK(r.thresholds[0].any_probe_probability == 0);
    CHECK(r.thresholds[1].any_probe_probability == 1);
    CHECK(r.moments.empty());
  }
}

TEST_CASE("experiments are reproducible") {
  auto P = part(8);
  ExceedanceConfig cfg;
  cfg.field = spec_for(*P, 9);
  cfg.probes = {Vec3{1.3, 2.15, 3.4}};
  cfg.trials = 100;
  cfg.repetitions = 2;
  auto a = exceedance_experiment(P, cfg), b = exceedance_experiment(P, cfg);
  for (std::size_t t = 0; t < a.trials.size(); ++t) {
    CHECK(a.trials[t].seed == b.trials[t].seed);
    CHECK(a.trials[t].probe_max == b.trials[t].probe_max);
  }
  CHECK(a.trials[0].seed != a.trials[1].seed);
  CHECK_THROWS_AS(([&] {
                    auto c = cfg;
                    c.trials = 50;
                    exceedance_experiment(P, c);
                  })(),
                  ValidationError);
}

TEST_CASE("random variable moments") {
  auto b = rv_moments(RvKind::bernoulli), u = rv_moments(RvKind::uniform);
  CHECK(b[0] == 1);
  CHECK(b[1] == 0);
  CHECK(u[0] == doctest::Approx(1.0 / 3));
  CHECK(u[1] == doctest::Approx(4.0 / 45));
  CHECK(std::isnan(rv_moments(RvKind::custom)[0]));
}

TEST_CASE("tail bounds") {
  const double d = 11.0 / 16;
  auto t = tail_bounds(256, d);
  CHECK(t.log_hoeffding == doctest::Approx(std::log(256.0) - std::pow(256.0, 2 * d)));
  CHECK(t.log_chebyshev == doctest::Approx(-2 * d * std::log(256.0)));
  CHECK(t.log_hoeffding < t.log_chebyshev);
  CHECK(tail_bounds(256, 0.0, 0.5).log_chebyshev == doctest::Approx(std::log(0.5)));
  CHECK(tail_crossover_K(0.0) == std::numeric_limits<double>::infinity());
  // With a tiny constant the Hoeffding bound loses at moderate K and wins beyond the crossover.
  const double c = 1e-3, Kx = tail_crossover_K(d, 1, c);
  CHECK(Kx > 2);
  CHECK(tail_bounds(Kx * 1.01, d, 1, c).log_hoeffding < tail_bounds(Kx * 1.01, d, 1, c).log_chebyshev);
  CHECK(tail_bounds(Kx * 0.99, d, 1, c).log_hoeffding > tail_bounds(Kx * 0.99, d, 1, c).log_chebyshev);
  CHECK(tail_crossover_K(d, 1, 100) == 2);
}

TEST_CASE("bad density: zero field and chain") {
  auto P = part(8);
  DensityConfig cfg;
  cfg.field = spec_for(*P, 3);
  cfg.field.amplitude = 1e-300;
  cfg.trials = 3;
  cfg.probe_count = 200;
  auto r = bad_density_experiment(P, cfg);
  CHECK(r.mean_density == 0);
  CHECK(r.probability == 1);
  CHECK(r.successes == 3);
  CHECK(r.chain_rhs == doctest::Approx(std::pow(8.0, -0.25)));

  cfg.field.amplitude = 0;
  cfg.threshold_scale = 1e-300;
  auto all = bad_density_experiment(P, cfg);
  // Every probe that meets the support is flagged, in every trial.
  CHECK(all.mean_density > 0);
  for (const auto& t : all.trials) CHECK(t.density == all.trials[0].density);
  cfg.threshold_scale = 0;
  CHECK_THROWS_AS(bad_density_experiment(P, cfg), ValidationError);

  DensityResult a, b;
  a.K = 8;
  a.probability = 0.5;
  b.K = 64;
  b.probability = 0.875;
  auto fit = failure_exponent({a, b});
  CHECK(fit.slope == doctest::Approx(-2.0 / 3));
  CHECK_THROWS_AS(failure_exponent({a}), ValidationError);
}

TEST_CASE("overlap census") {
  auto P = part(8);
  // ξ on the cell lattice with odd coordinates has no self-overlapping subblock.
  auto r = overlap_census(*P, {Vec3{3, 3, 3}});
  CHECK(r.entries[0].self_overlap == 0);
  CHECK(r.entries[0].max_neighbors <= 1);

  // Twice a support cell center: exactly that cell overlaps itself.
  const auto c = P->center(P->subblock_cell(4, 11));
  auto s = overlap_census(*P, {2.0 * c});
  CHECK(s.entries[0].self_overlap == 1);
  CHECK(s.entries[0].self_max_distance == doctest::Approx(0).epsilon(1e-15));

  auto probes = make_probes(1, 4, 50, 7);
  auto g = overlap_census(*P, probes, 5000);
  CHECK(g.max_neighbors <= 8);
  CHECK(g.max_neighbors >= 1);
  for (const auto& e : g.entries) {
    CHECK(e.self_max_distance <= 1.0 / 8 + 1e-12);
    CHECK(e.mirror_self_overlap == 0);
    CHECK(e.cells_checked <= 5000);
  }
}
