#include "pmns/lattice.hpp"

#include <cmath>
#include <sstream>

namespace pmns {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

}  // namespace

std::optional<std::int64_t> exact_cube_root(std::int64_t K) {
  if (K < 1) return std::nullopt;
  auto m = static_cast<std::int64_t>(std::llround(std::cbrt(static_cast<double>(K))));
  for (std::int64_t c = std::max<std::int64_t>(1, m - 1); c <= m + 1; ++c) {
    if (c * c * c == K) return c;
  }
  return std::nullopt;
}

Partition Partition::build(std::int64_t K, double kappa) {
  if (K < 1) throw ValidationError("K must be a positive perfect cube (got " + std::to_string(K) + ")");
  auto m = exact_cube_root(K);
  if (!m) {
    auto lo = static_cast<std::int64_t>(std::floor(std::cbrt(static_cast<double>(K))));
    while ((lo + 1) * (lo + 1) * (lo + 1) <= K) ++lo;
    while (lo * lo * lo > K) --lo;
    std::ostringstream msg;
    msg << "K must be a perfect cube; " << K << " is not (nearest cubes: ";
    if (lo >= 1) msg << lo * lo * lo << " and ";
    msg << (lo + 1) * (lo + 1) * (lo + 1) << ")";
    throw ValidationError(msg.str());
  }
  if (!(kappa > 0.0) || !(kappa < 1.0)) {
    throw ValidationError("kappa must lie in (0, 1) (got " + std::to_string(kappa) + ")");
  }
  if (*m > 1000) throw ValidationError("K too large for an explicit partition");

  Partition P;
  P.K_ = K;
  P.m_ = *m;
  P.kappa_requested_ = kappa;
  // Round κ up to a multiple of 1/m; the tiny guard keeps exact multiples put.
  P.kz0_ = static_cast<std::int64_t>(std::ceil(kappa * static_cast<double>(*m) - 1e-9));
  if (P.kz0_ < 1) P.kz0_ = 1;

  const std::int64_t mm = P.m_;
  const std::int64_t nx = 4 * mm, nz = 2 * mm - P.kz0_;
  P.block_table_.assign(static_cast<std::size_t>(nx * nx * nz), -1);
  for (std::int64_t bz = P.kz0_; bz < 2 * mm; ++bz) {
    for (std::int64_t by = -2 * mm; by < 2 * mm; ++by) {
      for (std::int64_t bx = -2 * mm; bx < 2 * mm; ++bx) {
        bool inner = bx >= -mm && bx < mm && by >= -mm && by < mm && bz < mm;
        if (inner) continue;
        Cell b{bx, by, bz};
        P.block_table_[static_cast<std::size_t>(P.table_offset(b))] =
            static_cast<std::int32_t>(P.blocks_.size());
        P.blocks_.push_back(b);
      }
    }
  }
  return P;
}

std::int64_t Partition::table_offset(Cell b) const {
  const std::int64_t nx = 4 * m_;
  return ((b.z - kz0_) * nx + (b.y + 2 * m_)) * nx + (b.x + 2 * m_);
}

std::optional<std::int64_t> Partition::block_index(Cell b) const {
  if (b.x < -2 * m_ || b.x >= 2 * m_ || b.y < -2 * m_ || b.y >= 2 * m_ || b.z < kz0_ ||
      b.z >= 2 * m_) {
    return std::nullopt;
  }
  auto idx = block_table_[static_cast<std::size_t>(table_offset(b))];
  if (idx < 0) return std::nullopt;
  return idx;
}

Box Partition::block(std::int64_t s) const {
  Cell b = block_coord(s);
  const double h = 1.0 / static_cast<double>(m_);
  Vec3 lo{b.x * h, b.y * h, b.z * h};
  return {lo, lo + Vec3{h, h, h}};
}

Box Partition::mirror_block(std::int64_t s) const {
  Box B = block(s);
  return {-B.hi, -B.lo};
}

Cell Partition::subblock_cell(std::int64_t s, std::int64_t p) const {
  if (p < 0 || p >= subblocks_per_block()) throw ValidationError("subblock index out of range");
  const std::int64_t side = block_side_cells();
  Cell b = block_coord(s);
  std::int64_t lx = p % side, ly = (p / side) % side, lz = p / (side * side);
  return {b.x * side + lx, b.y * side + ly, b.z * side + lz};
}

Box Partition::subblock(std::int64_t s, std::int64_t p) const {
  Cell c = subblock_cell(s, p);
  const double h = cell_side();
  Vec3 lo{c.x * h, c.y * h, c.z * h};
  return {lo, lo + Vec3{h, h, h}};
}

Box Partition::mirror_subblock(std::int64_t s, std::int64_t p) const {
  Box B = subblock(s, p);
  return {-B.hi, -B.lo};
}

bool Partition::in_upper(Cell c) const {
  const std::int64_t two = 2 * K_;
  if (c.x < -two || c.x >= two || c.y < -two || c.y >= two) return false;
  if (c.z < z_floor_cells() || c.z >= two) return false;
  bool inner = c.x >= -K_ && c.x < K_ && c.y >= -K_ && c.y < K_ && c.z < K_;
  return !inner;
}

std::optional<SubblockRef> Partition::locate(Cell c) const {
  bool mirror = false;
  if (!in_upper(c)) {
    c = c.mirrored();
    if (!in_upper(c)) return std::nullopt;
    mirror = true;
  }
  const std::int64_t side = block_side_cells();
  Cell b{floor_div(c.x, side), floor_div(c.y, side), floor_div(c.z, side)};
  auto s = block_index(b);
  if (!s) return std::nullopt;
  std::int64_t lx = c.x - b.x * side, ly = c.y - b.y * side, lz = c.z - b.z * side;
  return SubblockRef{*s, (lz * side + ly) * side + lx, mirror};
}

std::optional<SubblockRef> Partition::locate(Vec3 xi) const { return locate(cell_of(xi)); }

Cell Partition::cell_of(Vec3 xi) const {
  const double k = static_cast<double>(K_);
  return {static_cast<std::int64_t>(std::floor(xi.x * k)),
          static_cast<std::int64_t>(std::floor(xi.y * k)),
          static_cast<std::int64_t>(std::floor(xi.z * k))};
}

Vec3 Partition::center(Cell c) const {
  const double h = cell_side();
  return {(c.x + 0.5) * h, (c.y + 0.5) * h, (c.z + 0.5) * h};
}

double Partition::region_volume() const {
  return static_cast<double>(block_count()) / static_cast<double>(K_);
}

Omega omega_of(double K) {
  if (!(K >= 1.0) || !std::isfinite(K)) {
    throw ValidationError("omega requires K >= 1 (got " + std::to_string(K) + ")");
  }
  // 2^-J < K^{-1/8} <= 2^{1-J}  <=>  J = floor(log2(K)/8) + 1.
  double l = std::log2(K) / 8.0;
  double fl = std::floor(l);
  // log2 of an exact power of two is exact, but guard values a hair below an integer.
  if (std::abs(l - std::round(l)) < 1e-12) fl = std::round(l);
  int J = static_cast<int>(fl) + 1;
  return {std::ldexp(1.0, -J), J};
}

double dyadic_density(const std::function<bool(Vec3)>& indicator, const Omega& omega, int j,
                      int resolution) {
  if (j < 0 || j > omega.J + 3) {
    throw ValidationError("dyadic shell index j=" + std::to_string(j) + " outside 0.." +
                          std::to_string(omega.J + 3));
  }
  if (resolution < 4 || resolution % 4 != 0) {
    throw ValidationError("density resolution must be a positive multiple of 4");
  }
  const double lo = std::ldexp(omega.omega, j);
  const double hi = 2 * lo;
  const double step = 2 * hi / resolution;
  const int n = resolution;
  long long hits = 0;
#pragma omp parallel for reduction(+ : hits) schedule(static)
  for (int iz = 0; iz < n; ++iz) {
    for (int iy = 0; iy < n; ++iy) {
      for (int ix = 0; ix < n; ++ix) {
        Vec3 p{-hi + (ix + 0.5) * step, -hi + (iy + 0.5) * step, -hi + (iz + 0.5) * step};
        if (in_box(p, lo)) continue;
        if (indicator(p)) ++hits;
      }
    }
  }
  const long long total = static_cast<long long>(n) * n * n - static_cast<long long>(n / 2) * (n / 2) * (n / 2);
  return static_cast<double>(hits) / static_cast<double>(total);
}

std::string to_string(FrequencyClass c) {
  switch (c) {
    case FrequencyClass::lL: return "lL";
    case FrequencyClass::hL: return "hL";
    case FrequencyClass::M: return "M";
    case FrequencyClass::lH: return "lH";
    case FrequencyClass::hH: return "hH";
    case FrequencyClass::B: return "B";
  }
  return "?";
}

FrequencyClass classify(Vec3 xi, const std::function<bool(Vec3)>& bad, double K) {
  if (bad && bad(xi)) return FrequencyClass::B;
  const double r = norm(xi);
  if (r < std::pow(K, -1.0 / 8.0)) return FrequencyClass::lL;
  if (r < 1.0) return FrequencyClass::hL;
  if (r < 2.0) return FrequencyClass::M;
  if (r < loglog(K)) return FrequencyClass::lH;
  return FrequencyClass::hH;
}

}  // namespace pmns
