#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "pmns/initdata.hpp"
#include "pmns/lattice.hpp"
#include "pmns/nonlinear.hpp"
#include "pmns/stats.hpp"
#include "pmns/symbols.hpp"

namespace pmns {

/// Theoretical tail bounds in log form: Hoeffding βK exp(-cK^{2δ}) and Chebyshev β/K^{2δ}.
struct TailBounds {
  double K = 0, delta = 0, beta = 1, c = 1;
  double log_hoeffding = 0, log_chebyshev = 0;
};

TailBounds tail_bounds(double K, double delta, double beta = 1, double c = 1);
/// Smallest K ≥ 2 above which the Hoeffding value never exceeds the Chebyshev value.
double tail_crossover_K(double delta, double beta = 1, double c = 1);

/// Key of the random variable r^j_{s,p} (j = 0, 1): (s · K² + p) · 2 + j.
inline std::uint64_t rv_key(const Partition& P, std::int64_t s, std::int64_t p, int j) {
  return (static_cast<std::uint64_t>(s) * static_cast<std::uint64_t>(P.subblocks_per_block()) +
          static_cast<std::uint64_t>(p)) * 2u + static_cast<std::uint64_t>(j);
}

/// A block integral written as a quadratic form Σ coef · r_x r_y in the random variables
/// (x ≤ y, merged), with the phases and amplitudes fixed.
struct BlockQuadraticForm {
  std::int64_t block = 0;
  bool mirror = false;
  std::vector<std::uint64_t> x, y;  ///< rv_key values, x ≤ y
  std::vector<std::array<cplx, 3>> coef;

  /// Σ_l E|I^l - E I^l|² for independent symmetric variables with E r² = m2 and
  /// Var r² = v2.
  double variance(double m2, double v2) const;
  std::array<cplx, 3> mean(double m2) const;
  /// Value for the variables of `field` (which must share the phases).
  std::array<cplx, 3> evaluate(const RandomField& field) const;
  bool empty() const { return coef.empty(); }
};

/// Quadratic forms of every block of 𝒫 (upper and mirror) that is nonzero at ξ.
std::vector<BlockQuadraticForm> block_quadratic_forms(const RandomField& field, Vec3 xi,
                                                      const BilinearSymbol& M);

/// E r² and Var r² of the configured random variable (NaN for custom ones).
std::array<double, 2> rv_moments(RvKind kind);

struct TrialReport {
  int trial = 0;
  std::uint64_t seed = 0;
  std::vector<double> probe_max;  ///< per probe, max over blocks and l of |∫_H|
  /// exceed[probe * n_thresholds + t]
  std::vector<std::uint8_t> exceed;
  double density = std::numeric_limits<double>::quiet_NaN();
  std::optional<FieldNorms> norms;
};

struct ExceedanceConfig {
  RandomFieldSpec field;  ///< field.seed is the master seed; field.phase_seed fixes the phases
  std::vector<Vec3> probes;
  double delta = 11.0 / 16;
  std::vector<double> threshold_scales = {1.0};  ///< multiples of (log log K)^{1/2}/K^{2-δ}
  int trials = 2000;
  int repetitions = 5;  ///< trials are split into this many consecutive groups
  bool compute_norms = false;
  bool predict = true;
  BilinearSymbol symbol = BilinearSymbol::navier_stokes();
};

struct BlockMoment {
  int probe = 0;
  std::int64_t block = 0;
  bool mirror = false;
  double var_predicted = 0, var_empirical = 0;
  double mean_abs_predicted = 0, mean_abs_empirical = 0;
  double ratio() const { return var_empirical / var_predicted; }
};

struct ThresholdSummary {
  double scale = 1, threshold = 0;
  std::vector<double> probe_probability;  ///< P̂ per probe over all trials
  double mean_probability = 0, max_probability = 0;
  Interval max_ci;                         ///< Wilson CI of the worst probe
  std::vector<double> repetition_probability;  ///< probe-averaged exceedance per repetition
  double median_repetition = 0;
  double any_probe_probability = 0;
  Interval any_probe_ci;
};

struct ExceedanceResult {
  double K = 0, delta = 0, base_threshold = 0, amplitude = 0;
  std::vector<TrialReport> trials;
  std::vector<ThresholdSummary> thresholds;
  std::vector<BlockMoment> moments;  ///< blocks whose predicted variance is positive
  double min_variance_ratio = 0, max_variance_ratio = 0;
  /// median over blocks of var·K⁴/|Θ|⁴ (the constant in the K^{-4} scaling)
  double variance_constant = 0;
  TailBounds bounds;
};

void validate_config(const ExceedanceConfig& cfg);
ExceedanceResult exceedance_experiment(const std::shared_ptr<const Partition>& P,
                                       const ExceedanceConfig& cfg);

/// Corner probes near (3.75, 3.75, 3.75) where only a handful of blocks interact.
std::vector<Vec3> corner_probes(std::size_t count, std::uint64_t seed);

struct DensityConfig {
  RandomFieldSpec field;
  double delta = 11.0 / 16;
  int trials = 200;
  std::size_t probe_count = 256;
  std::uint64_t probe_seed = 1;
  double threshold_scale = 1.0;  ///< multiple of (log log K)^{1/2}/K^{1-δ}
  BilinearSymbol symbol = BilinearSymbol::navier_stokes();
};

struct DensityResult {
  double K = 0, delta = 0, threshold = 0, target = 0;  ///< target = K^{-δ}
  std::vector<TrialReport> trials;
  std::vector<std::vector<double>> shell_density;       ///< per trial, δ_j from probes
  long successes = 0;                                   ///< trials with density ≤ target
  double probability = 0;
  Interval ci;
  double mean_density = 0;
  // Chain from the aggregate density to the shell densities at this K.
  double chain_lhs = 0;  ///< K^{-11/16} vol(R_{ω,8}) / vol(R_{ω,2ω})
  double chain_rhs = 0;  ///< K^{-1/4}
  bool chain_holds = false;
};

void validate_config(const DensityConfig& cfg);
DensityResult bad_density_experiment(const std::shared_ptr<const Partition>& P,
                                     const DensityConfig& cfg);

/// Log-log fit of the failure probability 1 - P̂ against K over the results with
/// nonzero failures.
LineFit failure_exponent(const std::vector<DensityResult>& ladder);

struct CensusEntry {
  Vec3 xi;
  int self_overlap = 0;         ///< subblocks W with W ∩ (ξ - W) of positive volume
  long mirror_self_overlap = 0;  ///< subblocks W with W ∩ (ξ + W) of positive volume
  double self_max_distance = 0; ///< max L∞ distance of those subblock centers from ξ/2
  int max_neighbors = 0;        ///< max over W of partner subblocks with positive overlap
  long cells_checked = 0;
};

struct CensusReport {
  std::int64_t K = 0;
  std::vector<CensusEntry> entries;
  int max_self_overlap = 0, max_neighbors = 0;
};

/// Counts overlaps exhaustively near ξ/2 and over up to `cell_budget` support cells
/// (a deterministic sample when the interaction region is larger).
CensusReport overlap_census(const Partition& P, const std::vector<Vec3>& probes,
                            long cell_budget = 200000);

}  // namespace pmns
