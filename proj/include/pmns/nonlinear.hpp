#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "pmns/initdata.hpp"
#include "pmns/lattice.hpp"
#include "pmns/symbols.hpp"

namespace pmns {

/// Dense copy of a RandomField's upper-half values (mirror values by conjugation).
/// Much faster to query than the lazy field; costs 48 bytes per subblock.
class SubblockField final : public CellField {
 public:
  explicit SubblockField(const RandomField& field);

  std::int64_t cells_per_unit() const override { return partition_->K(); }
  CVec3 value(Cell c) const override;
  const Partition& partition() const { return *partition_; }

 private:
  std::shared_ptr<const Partition> partition_;
  std::vector<CVec3> upper_;
};

/// True if the lattice box [lo, hi) (in cells of 1/(K·refine)) meets the partition's
/// support (upper region or its mirror).
bool box_meets_support(const Partition& P, std::int64_t refine, Cell lo, Cell hi);

struct BlockIntegralOptions {
  /// Only count partner frequencies ξ - q inside R_{1,2}.
  bool restrict_to_R12 = false;
  /// Evaluate with the reduced symbol (components 1, 2 only); requires `reduced`.
  const ReducedSymbol* reduced = nullptr;
  /// Restrict to these upper block indices (both the block and its mirror); all if empty.
  std::vector<std::int64_t> blocks;
  /// Skip mirror blocks.
  bool upper_only = false;
};

/// Per-block integrals ∫_{H} Σ_{k,j} M_kjl(ξ) û^k(q) û^j(ξ - q) dq over the blocks of 𝒫
/// (upper blocks first, then their mirrors).
struct BlockIntegralVector {
  Vec3 xi;
  std::vector<std::int64_t> block_ids;  ///< upper block index of each entry
  std::vector<bool> mirror;             ///< entry is the mirrored block
  std::array<std::vector<cplx>, 3> per_block;
  std::array<double, 3> blockwise_abs_sum{};

  std::size_t size() const { return block_ids.size(); }
  double max_abs_sum() const {
    return std::max({blockwise_abs_sum[0], blockwise_abs_sum[1], blockwise_abs_sum[2]});
  }
};

/// Exact evaluation for fields constant on lattice cells: the q-integral over a cell
/// against a translated reflected cell is a product of three 1-D interval overlaps.
/// The lattice must refine the partition (cells_per_unit a multiple of K).
BlockIntegralVector block_integrals(const CellField& field, Vec3 xi, const Partition& P,
                                    const BilinearSymbol& M,
                                    const BlockIntegralOptions& opt = {});

/// Low-discrepancy probes in R_{lo,hi}: Sobol points in [-hi,hi)³ with a seeded
/// Cranley-Patterson shift, rejecting the inner box.
std::vector<Vec3> make_probes(double lo, double hi, std::size_t count, std::uint64_t seed);

/// The flagged probes, answering membership by nearest probe inside R_{ω,8}.
class BadSet {
 public:
  BadSet() = default;
  BadSet(std::vector<Vec3> probes, std::vector<bool> flagged, double omega);
  bool contains(Vec3 xi) const;
  bool empty() const;

 private:
  std::vector<Vec3> probes_;
  std::vector<bool> flagged_;
  double omega_ = 0;
  bool any_ = false;
};

struct BadSetReport {
  double threshold = 0;
  std::vector<double> magnitude;  ///< max over l of the blockwise abs sum, per probe
  std::vector<bool> flagged;
  double aggregate_density = 0;   ///< flagged fraction (probes are uniform in R_{ω,8})
  std::vector<double> shell_density;      ///< j = 0..J+3, flagged fraction of probes in shell
  std::vector<long> shell_probe_count;
  std::vector<double> shell_quadrature;   ///< δ_j by quadrature of the nearest-probe set
  bool last_shell_outside = true;          ///< shell J+3 is R_{8,16}, outside R_{ω,8}
  BadSet set;
};

/// Flags probe ξ as bad iff max_l blockwise_abs_sum(ξ) ≥ threshold.
BadSetReport bad_set(const CellField& field, const Partition& P, const BilinearSymbol& M,
                     double threshold, const std::vector<Vec3>& probes, const Omega& omega,
                     const BlockIntegralOptions& opt = {}, int quadrature_resolution = 0);

/// Magnitudes only (max_l blockwise abs sum per probe), parallel over probes.
std::vector<double> probe_magnitudes(const CellField& field, const Partition& P,
                                     const BilinearSymbol& M, const std::vector<Vec3>& probes,
                                     const BlockIntegralOptions& opt = {});

}  // namespace pmns
