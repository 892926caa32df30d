#include "pmns/initdata.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>

#include "pmns/nonlinear.hpp"
#include "pmns/rng.hpp"
#include "pmns/stats.hpp"

namespace pmns {

CVec3 CellField::value_at(Vec3 xi) const {
  const double n = static_cast<double>(cells_per_unit());
  return value({static_cast<std::int64_t>(std::floor(xi.x * n)),
                static_cast<std::int64_t>(std::floor(xi.y * n)),
                static_cast<std::int64_t>(std::floor(xi.z * n))});
}

void CellField::fill_box(Cell lo, Cell n, CVec3* out) const {
  std::size_t i = 0;
  for (std::int64_t z = 0; z < n.z; ++z)
    for (std::int64_t y = 0; y < n.y; ++y)
      for (std::int64_t x = 0; x < n.x; ++x) out[i++] = value({lo.x + x, lo.y + y, lo.z + z});
}

Vec3 CellField::cell_center(Cell c) const {
  const double h = 1.0 / static_cast<double>(cells_per_unit());
  return {(c.x + 0.5) * h, (c.y + 0.5) * h, (c.z + 0.5) * h};
}

std::string to_string(RvKind k) {
  switch (k) {
    case RvKind::bernoulli: return "bernoulli";
    case RvKind::uniform: return "uniform";
    case RvKind::custom: return "custom";
  }
  return "?";
}

RvKind rv_kind_from_string(const std::string& s) {
  if (s == "bernoulli") return RvKind::bernoulli;
  if (s == "uniform") return RvKind::uniform;
  if (s == "custom") return RvKind::custom;
  throw ValidationError("unknown rv_kind '" + s + "' (expected bernoulli or uniform)");
}

std::string to_string(PhaseKind k) {
  switch (k) {
    case PhaseKind::unit: return "unit";
    case PhaseKind::constant: return "constant";
    case PhaseKind::random: return "random";
  }
  return "?";
}

PhaseKind phase_kind_from_string(const std::string& s) {
  if (s == "unit") return PhaseKind::unit;
  if (s == "constant") return PhaseKind::constant;
  if (s == "random") return PhaseKind::random;
  throw ValidationError("unknown theta_phases '" + s + "' (expected unit, constant, random)");
}

double RandomFieldSpec::resolved_amplitude() const {
  if (amplitude > 0) return amplitude;
  double ll = loglog(static_cast<double>(K));
  if (!(ll > 0)) {
    throw ValidationError("default amplitude (log log K)^e needs log log K > 0; K=" +
                          std::to_string(K) + " requires an explicit amplitude");
  }
  return std::pow(ll, amplitude_exponent);
}

void RandomFieldSpec::validate() const {
  if (!std::isfinite(amplitude)) throw ValidationError("amplitude must be finite");
  if (rv == RvKind::custom && !custom_rv) throw ValidationError("rv_kind=custom needs a function");
  if (phases == PhaseKind::constant && std::abs(std::abs(constant_phase) - 1.0) > 1e-12) {
    throw ValidationError("constant theta phase must have modulus 1");
  }
  (void)resolved_amplitude();
}

RandomField::RandomField(std::shared_ptr<const Partition> partition, RandomFieldSpec spec)
    : partition_(std::move(partition)), spec_(std::move(spec)) {
  if (!partition_) throw ValidationError("random field needs a partition");
  if (partition_->K() != spec_.K) throw ValidationError("partition K does not match field K");
  spec_.validate();
  amplitude_ = spec_.resolved_amplitude();
  rv_key_ = rng::derive(spec_.seed, rng::kSigns);
  phase_key_ = rng::derive(spec_.phase_seed.value_or(spec_.seed), rng::kPhases);
}

double RandomField::random_variable(int j, std::int64_t s, std::int64_t p) const {
  const std::uint64_t ctr =
      (static_cast<std::uint64_t>(s) * static_cast<std::uint64_t>(partition_->subblocks_per_block()) +
       static_cast<std::uint64_t>(p)) * 2u + static_cast<std::uint64_t>(j);
  switch (spec_.rv) {
    case RvKind::bernoulli: return rng::sign(rv_key_, ctr);
    case RvKind::uniform: return 2.0 * rng::unit(rv_key_, ctr) - 1.0;
    case RvKind::custom: {
      double v = spec_.custom_rv(rng::unit(rv_key_, ctr), j, s, p);
      if (!(v >= -1.0 && v <= 1.0)) throw ValidationError("custom random variable left [-1, 1]");
      return v;
    }
  }
  return 0.0;
}

cplx RandomField::theta(int j, std::int64_t s, std::int64_t p) const {
  switch (spec_.phases) {
    case PhaseKind::unit: return amplitude_;
    case PhaseKind::constant: return amplitude_ * spec_.constant_phase;
    case PhaseKind::random: {
      const std::uint64_t ctr =
          (static_cast<std::uint64_t>(s) * static_cast<std::uint64_t>(partition_->subblocks_per_block()) +
           static_cast<std::uint64_t>(p)) * 2u + static_cast<std::uint64_t>(j);
      return std::polar(amplitude_, 2.0 * std::numbers::pi * rng::unit(phase_key_, ctr));
    }
  }
  return 0.0;
}

// compute() with the kind switches resolved inline; used by the bulk fills.
inline CVec3 RandomField::fast_value(Cell c, std::int64_t s, std::int64_t p) const {
  const double h = 1.0 / static_cast<double>(partition_->K());
  const Vec3 x{(c.x + 0.5) * h, (c.y + 0.5) * h, (c.z + 0.5) * h};
  const double inv = 1.0 / norm2(x);
  const std::uint64_t ctr =
      (static_cast<std::uint64_t>(s) * static_cast<std::uint64_t>(partition_->subblocks_per_block()) +
       static_cast<std::uint64_t>(p)) * 2u;
  double r[2];
  cplx th[2];
  for (int j = 0; j < 2; ++j) {
    r[j] = spec_.rv == RvKind::bernoulli ? rng::sign(rv_key_, ctr + j) : 2.0 * rng::unit(rv_key_, ctr + j) - 1.0;
    if (spec_.phases == PhaseKind::random) {
      th[j] = std::polar(amplitude_, 2.0 * std::numbers::pi * rng::unit(phase_key_, ctr + j));
    } else {
      th[j] = spec_.phases == PhaseKind::unit ? cplx(amplitude_) : amplitude_ * spec_.constant_phase;
    }
  }
  CVec3 v;
  v[0] = r[0] * th[0] * inv;
  v[1] = r[1] * th[1] * inv;
  v[2] = -(x.x * v[0] + x.y * v[1]) / x.z;
  return v;
}

CVec3 RandomField::compute(Cell upper_cell, std::int64_t s, std::int64_t p) const {
  Vec3 c = partition_->center(upper_cell);
  const double inv = 1.0 / norm2(c);
  CVec3 v;
  v[0] = random_variable(0, s, p) * theta(0, s, p) * inv;
  v[1] = random_variable(1, s, p) * theta(1, s, p) * inv;
  v[2] = -(c.x * v[0] + c.y * v[1]) / c.z;
  return v;
}

CVec3 RandomField::value(Cell c) const {
  auto ref = partition_->locate(c);
  if (!ref) return {};
  if (!ref->mirror) return compute(c, ref->s, ref->p);
  return conj(compute(c.mirrored(), ref->s, ref->p));
}

bool RandomField::may_be_nonzero(Cell lo, Cell hi) const {
  return box_meets_support(*partition_, 1, lo, hi);
}

void RandomField::fill_box(Cell lo, Cell n, CVec3* out) const {
  // Region boundaries are multiples of the block side, so each block-aligned run of a row
  // lies in one block (or its mirror) or entirely off the support.
  const std::int64_t side = partition_->block_side_cells();
  std::size_t i = 0;
  for (std::int64_t z = lo.z; z < lo.z + n.z; ++z)
    for (std::int64_t y = lo.y; y < lo.y + n.y; ++y) {
      const std::int64_t end = lo.x + n.x;
      for (std::int64_t x = lo.x; x < end;) {
        const std::int64_t q = x >= 0 ? x / side : -((-x - 1) / side) - 1;
        const std::int64_t run_end = std::min(end, (q + 1) * side);
        const auto ref = partition_->locate(Cell{x, y, z});
        if (!ref) {
          for (; x < run_end; ++x) out[i++] = CVec3{};
          continue;
        }
        Cell uc = ref->mirror ? Cell{x, y, z}.mirrored() : Cell{x, y, z};
        std::int64_t p = ref->p;
        const std::int64_t step = ref->mirror ? -1 : 1;
        const bool fast = spec_.rv != RvKind::custom;
        for (; x < run_end; ++x, uc.x += step, p += step) {
          const CVec3 v = fast ? fast_value(uc, ref->s, p) : compute(uc, ref->s, p);
          out[i++] = ref->mirror ? conj(v) : v;
        }
      }
    }
}

CVec3 RandomField::upper_value(std::int64_t s, std::int64_t p) const {
  return compute(partition_->subblock_cell(s, p), s, p);
}

void RandomField::fill_block(std::int64_t s, CVec3* out) const {
  const std::int64_t side = partition_->block_side_cells();
  const Cell b = partition_->block_coord(s);
  if (spec_.rv == RvKind::custom) {
    std::int64_t p = 0;
    for (std::int64_t lz = 0; lz < side; ++lz)
      for (std::int64_t ly = 0; ly < side; ++ly)
        for (std::int64_t lx = 0; lx < side; ++lx, ++p)
          out[p] = compute({b.x * side + lx, b.y * side + ly, b.z * side + lz}, s, p);
    return;
  }
  std::int64_t p = 0;
  for (std::int64_t lz = 0; lz < side; ++lz)
    for (std::int64_t ly = 0; ly < side; ++ly)
      for (std::int64_t lx = 0; lx < side; ++lx, ++p)
        out[p] = fast_value({b.x * side + lx, b.y * side + ly, b.z * side + lz}, s, p);
}

FieldNorms norms(const RandomField& field) {
  const Partition& P = field.partition();
  const std::int64_t nb = P.block_count(), ns = P.subblocks_per_block();
  std::vector<double> pm(static_cast<std::size_t>(nb)), l2(pm.size()), hh(pm.size());
#pragma omp parallel
  {
    std::vector<CVec3> buf(static_cast<std::size_t>(ns));
#pragma omp for schedule(static)
    for (std::int64_t s = 0; s < nb; ++s) {
      field.fill_block(s, buf.data());
      double mx = 0;
      KahanSum a, b;
      for (std::int64_t p = 0; p < ns; ++p) {
        const CVec3& v = buf[static_cast<std::size_t>(p)];
        Vec3 c = P.center(P.subblock_cell(s, p));
        double r2 = norm2(c);
        mx = std::max(mx, r2 * max_abs(v));
        double e = std::norm(v[0]) + std::norm(v[1]) + std::norm(v[2]);
        a.add(e);
        b.add(std::sqrt(r2) * e);
      }
      pm[static_cast<std::size_t>(s)] = mx;
      l2[static_cast<std::size_t>(s)] = a.value();
      hh[static_cast<std::size_t>(s)] = b.value();
    }
  }
  FieldNorms out;
  KahanSum a, b;
  for (std::size_t s = 0; s < pm.size(); ++s) {
    out.pm2 = std::max(out.pm2, pm[s]);
    a.add(l2[s]);
    b.add(hh[s]);
  }
  // Mirror half carries the same moduli.
  const double vol = P.cell_volume();
  out.l2 = std::sqrt(2.0 * a.value() * vol);
  out.h_half = std::sqrt(2.0 * b.value() * vol);
  return out;
}

void write_field_csv(std::ostream& os, const RandomField& field) {
  const Partition& P = field.partition();
  os << "# schema=field/1\n";
  os << "s,p,mirror,re1,im1,re2,im2,re3,im3\n";
  char line[320];
  std::vector<CVec3> buf(static_cast<std::size_t>(P.subblocks_per_block()));
  for (std::int64_t s = 0; s < P.block_count(); ++s) {
    field.fill_block(s, buf.data());
    for (std::int64_t p = 0; p < P.subblocks_per_block(); ++p) {
      for (int mirror = 0; mirror < 2; ++mirror) {
        CVec3 v = mirror ? conj(buf[static_cast<std::size_t>(p)]) : buf[static_cast<std::size_t>(p)];
        std::snprintf(line, sizeof line, "%lld,%lld,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                      static_cast<long long>(s), static_cast<long long>(p), mirror, v[0].real(),
                      v[0].imag(), v[1].real(), v[1].imag(), v[2].real(), v[2].imag());
        os << line;
      }
    }
  }
}

}  // namespace pmns
