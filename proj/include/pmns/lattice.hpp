#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "pmns/types.hpp"

namespace pmns {

struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
};

/// Axis-aligned half-open box [lo, hi).
struct Box {
  Vec3 lo, hi;
  double volume() const { return (hi.x - lo.x) * (hi.y - lo.y) * (hi.z - lo.z); }
  bool contains(Vec3 p) const {
    return p.x >= lo.x && p.x < hi.x && p.y >= lo.y && p.y < hi.y && p.z >= lo.z && p.z < hi.z;
  }
};

/// Where a subblock-lattice cell sits in the partition.
struct SubblockRef {
  std::int64_t s = 0;  ///< block index (upper-half enumeration)
  std::int64_t p = 0;  ///< subblock index within the block
  bool mirror = false; ///< true for the reflected copy -W_{s,p}
};

/// Block/subblock tiling of the snapped region R_{1,2} ∩ H_κ ∩ {ξ3 ≥ 0}, plus
/// its reflection through the origin.
///
/// With K = m³, blocks are cubes of side 1/m and subblocks cubes of side 1/K,
/// so every block holds exactly K² subblocks. κ is rounded up to a multiple of
/// 1/m so blocks tile the region exactly; the number of upper blocks is
/// K · vol(region), not K. All geometry lives on the integer subblock lattice
/// (cell i covers [i/K, (i+1)/K) per axis); the reflection of cell i is cell -i-1.
class Partition {
 public:
  static Partition build(std::int64_t K, double kappa);

  std::int64_t K() const { return K_; }
  std::int64_t m() const { return m_; }
  /// Subblocks along one side of a block (m²).
  std::int64_t block_side_cells() const { return m_ * m_; }
  double kappa_requested() const { return kappa_requested_; }
  Rational kappa() const { return {kz0_, m_}; }
  /// Lowest upper-half cell z index (κ·K).
  std::int64_t z_floor_cells() const { return kz0_ * m_ * m_; }

  std::int64_t block_count() const { return static_cast<std::int64_t>(blocks_.size()); }
  std::int64_t subblocks_per_block() const { return K_ * K_; }
  std::int64_t subblock_count() const { return block_count() * subblocks_per_block(); }

  /// Block-lattice coordinates of upper block s (block covers [b/m, (b+1)/m)).
  Cell block_coord(std::int64_t s) const { return blocks_.at(static_cast<std::size_t>(s)); }
  std::optional<std::int64_t> block_index(Cell block_coord) const;

  Box block(std::int64_t s) const;
  Box mirror_block(std::int64_t s) const;
  Box subblock(std::int64_t s, std::int64_t p) const;
  Box mirror_subblock(std::int64_t s, std::int64_t p) const;

  /// Lattice cell of subblock (s, p); the mirror copy is `.mirrored()`.
  Cell subblock_cell(std::int64_t s, std::int64_t p) const;

  bool in_upper(Cell c) const;
  bool in_support(Cell c) const { return in_upper(c) || in_upper(c.mirrored()); }
  std::optional<SubblockRef> locate(Cell c) const;
  /// Subblock containing a point; the mirror copy contains -W as a point set.
  std::optional<SubblockRef> locate(Vec3 xi) const;

  Cell cell_of(Vec3 xi) const;
  Vec3 center(Cell c) const;
  double cell_side() const { return 1.0 / static_cast<double>(K_); }
  double cell_volume() const { return std::pow(cell_side(), 3); }

  /// Volume of the snapped upper region.
  double region_volume() const;

 private:
  std::int64_t K_ = 0, m_ = 0, kz0_ = 0;
  double kappa_requested_ = 0;
  std::vector<Cell> blocks_;
  std::vector<std::int32_t> block_table_;  // dense over the upper block box, -1 = none

  std::int64_t table_offset(Cell b) const;
};

/// Integer cube root if K is a perfect cube.
std::optional<std::int64_t> exact_cube_root(std::int64_t K);

struct Omega {
  double omega = 0;
  int J = 0;
};

/// ω = 2^-J with (1/2)K^{-1/8} ≤ ω < K^{-1/8}, J ≥ 1.
Omega omega_of(double K);

/// Fraction of the dyadic shell R_{2^j ω, 2^{j+1} ω} occupied by `indicator`,
/// by midpoint quadrature with `resolution`³ points over the outer box
/// (resolution must be a multiple of 4 so the inner box is grid-aligned).
double dyadic_density(const std::function<bool(Vec3)>& indicator, const Omega& omega, int j,
                      int resolution = 32);

enum class FrequencyClass { lL, hL, M, lH, hH, B };

std::string to_string(FrequencyClass c);

/// Radius classes K^{-1/8} ≤ 1 ≤ 2 ≤ log log K (Euclidean |ξ|, half-open);
/// membership in the bad set wins.
FrequencyClass classify(Vec3 xi, const std::function<bool(Vec3)>& bad, double K);

}  // namespace pmns
