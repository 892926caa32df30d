#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "pmns/initdata.hpp"
#include "pmns/lattice.hpp"
#include "pmns/nonlinear.hpp"
#include "pmns/symbols.hpp"

namespace pmns {

/// Cellwise-constant field on the cube of cells [-L, L)³ with spacing 1/cells_per_unit.
class LatticeField final : public CellField {
 public:
  LatticeField() = default;
  LatticeField(std::int64_t cells_per_unit, std::int64_t L);
  /// Piecewise-constant projection: each cell takes the source value at its center.
  static LatticeField project(const CellField& src, std::int64_t cells_per_unit, std::int64_t L);

  std::int64_t cells_per_unit() const override { return n_; }
  CVec3 value(Cell c) const override;
  bool may_be_nonzero(Cell lo, Cell hi) const override;
  void fill_box(Cell lo, Cell n, CVec3* out) const override;

  std::int64_t half_width() const { return L_; }
  std::int64_t side() const { return 2 * L_; }
  std::size_t size() const { return data_.size(); }
  std::size_t index(Cell c) const {
    return static_cast<std::size_t>(((c.z + L_) * 2 * L_ + (c.y + L_)) * 2 * L_ + (c.x + L_));
  }
  Cell cell(std::size_t i) const;
  Vec3 center(std::size_t i) const { return cell_center(cell(i)); }
  bool contains(Cell c) const {
    return c.x >= -L_ && c.x < L_ && c.y >= -L_ && c.y < L_ && c.z >= -L_ && c.z < L_;
  }

  CVec3& operator[](std::size_t i) { return data_[i]; }
  const CVec3& operator[](std::size_t i) const { return data_[i]; }
  std::vector<CVec3>& data() { return data_; }
  const std::vector<CVec3>& data() const { return data_; }

  /// (Σ |v|² h³)^{1/2}
  double l2() const;

 private:
  std::int64_t n_ = 1, L_ = 0;
  std::vector<CVec3> data_;
};

/// Pseudo-spectral evaluation of N^l(ξ) = Σ_kj M_kjl(ξ) ∫ u^k(q) u^j(ξ - q) dq at every cell
/// center, exact for cellwise-constant u (the partner average is the overlap weight at a
/// cell center), using zero-padded FFTs.
class NonlinearOperator {
 public:
  NonlinearOperator(std::int64_t cells_per_unit, std::int64_t L, BilinearSymbol M);
  ~NonlinearOperator();
  NonlinearOperator(const NonlinearOperator&) = delete;
  NonlinearOperator& operator=(const NonlinearOperator&) = delete;

  /// out = N[u]; out must have the same geometry as u.
  void apply(const LatticeField& u, LatticeField& out);
  std::int64_t padded_size() const { return P_; }
  long evaluations() const { return evaluations_; }

 private:
  struct Plans;
  std::int64_t n_, L_, P_;
  BilinearSymbol M_;
  std::unique_ptr<Plans> plans_;
  long evaluations_ = 0;
};

/// Smallest integer ≥ n whose only prime factors are 2, 3, 5, 7.
std::int64_t good_fft_size(std::int64_t n);

/// Exponential quadrature weights for ∫_0^Δ e^{-λs} [N_hi (1 - s/Δ) + N_lo s/Δ] ds:
/// returns {weight of the node nearer the evaluation time, weight of the farther node}.
std::array<double, 2> exp_linear_weights(double lambda, double delta);

/// Regions of the empirical bound trace.
struct BoundTraceRow {
  int n = 0;
  double t = 0;
  double A = 0;  ///< sup |ξ|²|û^l| over R_{1,2} off the bad set
  double B = 0;  ///< over the bad set
  double a = 0;  ///< over R_{0,ω} \ {0}
  double b = 0;  ///< over R_{ω,1} ∪ R_{2,loglogK} off the bad set
  double c = 0;  ///< outside R_{0,loglogK}
  double E = 0;  ///< max over good probes of the blockwise abs sum (NaN if not measured)
};

struct BoundRegions {
  double K = 8;
  double omega = 0.5;
  double loglogK = 0;
  /// Precomputed bad-set mask on the lattice (empty means no bad set).
  std::vector<bool> bad_mask;
};

BoundRegions make_bound_regions(const LatticeField& geom, double K, const BadSet* bad);

/// Sups of |ξ|²|û^l| over the regions, as a trace row (E left as NaN).
BoundTraceRow measure_regions(const LatticeField& u, const BoundRegions& R);

struct EvolveOptions {
  double rho = 0.125;       ///< ρ = 1/N
  double T = 0;             ///< window; nonpositive selects 3 (log log K)^{1/4}
  int n_intervals = 0;      ///< 0 evolves to the horizon
  double horizon = 0;       ///< max n ρ T; nonpositive selects T
  int q_sub = 4;            ///< quadrature nodes per interval
  int refine = 1;           ///< lattice cells per subblock side
  double half_width = 2.5;  ///< Λ: the lattice covers [-Λ, Λ)³
  std::vector<Vec3> probes;  ///< values recorded at every τ_n
  bool keep_snapshots = false;

  // Empirical bound trace (optional).
  bool trace = false;
  const BadSet* bad = nullptr;
  const Partition* partition = nullptr;  ///< needed for the E column
  std::vector<Vec3> good_probes;          ///< probes for E (already filtered to good ones)
};

struct EvolveResult {
  double T = 0, rho = 0, delta = 0;
  std::int64_t cells_per_unit = 0, half_width_cells = 0, fft_size = 0;
  std::vector<double> times;                   ///< τ_n, n = 0..N
  std::vector<std::vector<CVec3>> probe_values;  ///< [n][probe]
  std::vector<LatticeField> snapshots;         ///< at τ_n if requested
  LatticeField final_field;
  std::vector<BoundTraceRow> trace;
  long nonlinear_evaluations = 0;
};

double default_window(double K);

/// Delayed mild scheme: for t = τ_n + iΔ (Δ = ρT/q)
///   û(t) = e^{-|ξ|² iΔ} û(τ_n) + ∫_{τ_{n-1}}^{t-ρT} e^{-|ξ|²(t-s)} N[û(s)] ds,
/// with û(s) = ψ̂ for s ≤ 0 and N linearly interpolated between the stored nodes of
/// the previous interval (exact exponential weights).
EvolveResult evolve(const CellField& psi, double K, const BilinearSymbol& M,
                    const EvolveOptions& opt);

}  // namespace pmns
