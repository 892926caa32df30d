#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>

#include "pmns/lattice.hpp"
#include "pmns/types.hpp"

namespace pmns {

/// A complex 3-vector field that is constant on the cells of a cubic lattice
/// (cell i covers [i/n, (i+1)/n) per axis, n = cells_per_unit()).
class CellField {
 public:
  virtual ~CellField() = default;
  virtual std::int64_t cells_per_unit() const = 0;
  virtual CVec3 value(Cell c) const = 0;
  /// False only if the field vanishes on every cell of [lo, hi).
  virtual bool may_be_nonzero(Cell lo, Cell hi) const {
    (void)lo;
    (void)hi;
    return true;
  }
  /// Values on the box [lo, lo + n) in x-fastest order.
  virtual void fill_box(Cell lo, Cell n, CVec3* out) const;

  CVec3 value_at(Vec3 xi) const;
  Vec3 cell_center(Cell c) const;
};

enum class RvKind { bernoulli, uniform, custom };
enum class PhaseKind { unit, constant, random };

std::string to_string(RvKind k);
RvKind rv_kind_from_string(const std::string& s);
std::string to_string(PhaseKind k);
PhaseKind phase_kind_from_string(const std::string& s);

/// Custom random variable: maps a uniform u ∈ [0,1) and the index (j, s, p) to a
/// value in [-1, 1]; the caller is responsible for zero mean.
using CustomRv = std::function<double(double u, int j, std::int64_t s, std::int64_t p)>;

struct RandomFieldSpec {
  std::int64_t K = 8;
  double kappa = 0.25;
  /// |Θ|; a nonpositive value selects the default (log log K)^amplitude_exponent.
  double amplitude = 0;
  double amplitude_exponent = 0.25;
  PhaseKind phases = PhaseKind::unit;
  cplx constant_phase = 1.0;
  RvKind rv = RvKind::bernoulli;
  CustomRv custom_rv;
  std::uint64_t seed = 0;
  /// Seed for the phases when they should not change with `seed` (Monte Carlo trials).
  std::optional<std::uint64_t> phase_seed;

  double resolved_amplitude() const;
  void validate() const;
};

/// Random initial datum on the partition (amplitude over |ξ|², random signs and phases,
/// divergence-free, Hermitian), evaluated lazily on the subblock lattice.
///
/// Components 1 and 2 on W_{s,p} are r^j_{s,p} Θ^j_{s,p} / |c|² with c the subblock
/// center; component 3 is -(c_1 v¹ + c_2 v²)/c_3; the reflected subblock carries the
/// complex conjugate; everything else is zero. Draws come from counter-based streams
/// keyed by (seed, j, s, p), so any value can be computed in any order.
class RandomField final : public CellField {
 public:
  RandomField(std::shared_ptr<const Partition> partition, RandomFieldSpec spec);

  std::int64_t cells_per_unit() const override { return partition_->K(); }
  CVec3 value(Cell c) const override;
  bool may_be_nonzero(Cell lo, Cell hi) const override;
  /// Locates once per block-aligned run of cells instead of once per cell.
  void fill_box(Cell lo, Cell n, CVec3* out) const override;

  /// Value on upper subblock (s, p).
  CVec3 upper_value(std::int64_t s, std::int64_t p) const;
  /// Writes the K² upper values of block s in subblock order.
  void fill_block(std::int64_t s, CVec3* out) const;

  double random_variable(int j, std::int64_t s, std::int64_t p) const;
  cplx theta(int j, std::int64_t s, std::int64_t p) const;

  const Partition& partition() const { return *partition_; }
  std::shared_ptr<const Partition> partition_ptr() const { return partition_; }
  const RandomFieldSpec& spec() const { return spec_; }
  double amplitude() const { return amplitude_; }

 private:
  CVec3 compute(Cell upper_cell, std::int64_t s, std::int64_t p) const;
  CVec3 fast_value(Cell upper_cell, std::int64_t s, std::int64_t p) const;

  std::shared_ptr<const Partition> partition_;
  RandomFieldSpec spec_;
  double amplitude_;
  std::uint64_t rv_key_, phase_key_;
};

struct FieldNorms {
  double pm2 = 0;     ///< max over support and components of |c|² |v^j|
  double l2 = 0;      ///< (Σ |v|² vol)^{1/2} over both halves
  double h_half = 0;  ///< (Σ |c| |v|² vol)^{1/2} over both halves
};

FieldNorms norms(const RandomField& field);

/// CSV rows (s, p, mirror, re/im of the three components); upper then mirror per subblock.
void write_field_csv(std::ostream& os, const RandomField& field);

}  // namespace pmns
