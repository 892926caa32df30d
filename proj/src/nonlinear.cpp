#include "pmns/nonlinear.hpp"

#include <boost/random/sobol.hpp>
#include <cmath>
#include <limits>

#include "pmns/rng.hpp"

namespace pmns {

SubblockField::SubblockField(const RandomField& field) : partition_(field.partition_ptr()) {
  const std::int64_t nb = partition_->block_count(), ns = partition_->subblocks_per_block();
  upper_.resize(static_cast<std::size_t>(nb * ns));
#pragma omp parallel for schedule(static)
  for (std::int64_t s = 0; s < nb; ++s) field.fill_block(s, upper_.data() + s * ns);
}

CVec3 SubblockField::value(Cell c) const {
  auto ref = partition_->locate(c);
  if (!ref) return {};
  const CVec3& v = upper_[static_cast<std::size_t>(ref->s * partition_->subblocks_per_block() + ref->p)];
  return ref->mirror ? conj(v) : v;
}

namespace {

// Does [lo, hi) meet the upper region, all in cells of 1/(K r)?
bool box_meets_upper(const Partition& P, std::int64_t r, Cell lo, Cell hi) {
  const std::int64_t K = P.K() * r;
  const std::int64_t ol[3] = {-2 * K, -2 * K, P.z_floor_cells() * r};
  const std::int64_t oh[3] = {2 * K, 2 * K, 2 * K};
  std::int64_t il[3], ih[3];
  for (int a = 0; a < 3; ++a) {
    il[a] = std::max(lo[a], ol[a]);
    ih[a] = std::min(hi[a], oh[a]);
    if (il[a] >= ih[a]) return false;
  }
  // Entirely inside the excluded inner box?
  bool inside_hole = il[0] >= -K && ih[0] <= K && il[1] >= -K && ih[1] <= K && ih[2] <= K;
  return !inside_hole;
}

}  // namespace

bool box_meets_support(const Partition& P, std::int64_t refine, Cell lo, Cell hi) {
  if (box_meets_upper(P, refine, lo, hi)) return true;
  // Reflection of [lo, hi) in cell indices is [-hi, -lo) shifted by the -i-1 rule.
  Cell mlo{-hi.x, -hi.y, -hi.z}, mhi{-lo.x, -lo.y, -lo.z};
  return box_meets_upper(P, refine, mlo, mhi);
}

BlockIntegralVector block_integrals(const CellField& field, Vec3 xi, const Partition& P,
                                    const BilinearSymbol& M, const BlockIntegralOptions& opt) {
  const std::int64_t n_unit = field.cells_per_unit();
  if (n_unit % P.K() != 0) {
    throw ValidationError("field lattice does not refine the partition; project it onto a "
                          "lattice with spacing dividing 1/K first");
  }
  const std::int64_t r = n_unit / P.K();
  const std::int64_t S = P.block_side_cells() * r;
  const double h = 1.0 / static_cast<double>(n_unit);
  const double vol = h * h * h;

  BlockIntegralVector out;
  out.xi = xi;
  std::vector<std::int64_t> ids = opt.blocks;
  if (ids.empty()) {
    ids.resize(static_cast<std::size_t>(P.block_count()));
    for (std::int64_t s = 0; s < P.block_count(); ++s) ids[static_cast<std::size_t>(s)] = s;
  }
  for (int mir = 0; mir < (opt.upper_only ? 1 : 2); ++mir) {
    for (auto s : ids) {
      out.block_ids.push_back(s);
      out.mirror.push_back(mir == 1);
    }
  }
  const std::size_t E = out.block_ids.size();
  for (auto& v : out.per_block) v.assign(E, 0.0);
  if (M.is_zero()) return out;

  // Partner of cell i: cells nvec - i + c, c ∈ {0,1}³, overlap weight Π (c ? f : 1 - f).
  std::int64_t nvec[3];
  double w[3][2];
  for (int a = 0; a < 3; ++a) {
    double u = xi[a] * static_cast<double>(n_unit);
    double fl = std::floor(u);
    double f = u - fl;
    nvec[a] = static_cast<std::int64_t>(fl) - 1;
    w[a][0] = 1.0 - f;
    w[a][1] = f;
  }
  const SymbolTensor T = M.tensor(xi);
  const std::size_t S1 = static_cast<std::size_t>(S + 1), Ss = static_cast<std::size_t>(S);

#pragma omp parallel
  {
    std::vector<CVec3> Wbox(S1 * S1 * S1), Vbox(Ss * Ss * Ss);
    std::vector<CVec3> gx(S1 * S1 * Ss), gy(S1 * Ss * Ss);
#pragma omp for schedule(dynamic, 1)
    for (std::size_t e = 0; e < E; ++e) {
      const Cell b = P.block_coord(out.block_ids[e]);
      Cell lo{b.x * S, b.y * S, b.z * S};
      if (out.mirror[e]) lo = {-lo.x - S, -lo.y - S, -lo.z - S};
      const Cell plo{nvec[0] - lo.x - (S - 1), nvec[1] - lo.y - (S - 1), nvec[2] - lo.z - (S - 1)};
      const Cell phi{plo.x + S + 1, plo.y + S + 1, plo.z + S + 1};
      if (!field.may_be_nonzero(plo, phi) || !field.may_be_nonzero(lo, {lo.x + S, lo.y + S, lo.z + S})) {
        continue;
      }
      field.fill_box(plo, {S + 1, S + 1, S + 1}, Wbox.data());
      if (opt.restrict_to_R12) {
        std::size_t i = 0;
        for (std::int64_t z = 0; z < S + 1; ++z)
          for (std::int64_t y = 0; y < S + 1; ++y)
            for (std::int64_t x = 0; x < S + 1; ++x, ++i) {
              Vec3 c = field.cell_center({plo.x + x, plo.y + y, plo.z + z});
              if (!in_annulus(c, 1.0, 2.0)) Wbox[i] = {};
            }
      }
      field.fill_box(lo, {S, S, S}, Vbox.data());

      std::array<cplx, 3> acc{};
      if (opt.reduced == nullptr) {
        // Separable trilinear combination: g(a) = Σ_c w_c W[S-1-a+c].
        for (std::size_t z = 0; z < S1; ++z)
          for (std::size_t y = 0; y < S1; ++y)
            for (std::size_t x = 0; x < Ss; ++x) {
              const CVec3& p0 = Wbox[(z * S1 + y) * S1 + x];
              const CVec3& p1 = Wbox[(z * S1 + y) * S1 + x + 1];
              CVec3& g = gx[(z * S1 + y) * Ss + x];
              for (int c = 0; c < 3; ++c) g[c] = w[0][0] * p0[c] + w[0][1] * p1[c];
            }
        for (std::size_t z = 0; z < S1; ++z)
          for (std::size_t y = 0; y < Ss; ++y)
            for (std::size_t x = 0; x < Ss; ++x) {
              const CVec3& p0 = gx[(z * S1 + y) * Ss + x];
              const CVec3& p1 = gx[(z * S1 + y + 1) * Ss + x];
              CVec3& g = gy[(z * Ss + y) * Ss + x];
              for (int c = 0; c < 3; ++c) g[c] = w[1][0] * p0[c] + w[1][1] * p1[c];
            }
        cplx C[3][3] = {};
        for (std::size_t az = 0; az < Ss; ++az)
          for (std::size_t ay = 0; ay < Ss; ++ay)
            for (std::size_t ax = 0; ax < Ss; ++ax) {
              const CVec3& v = Vbox[(az * Ss + ay) * Ss + ax];
              if (v[0] == 0.0 && v[1] == 0.0 && v[2] == 0.0) continue;
              const std::size_t bz = Ss - 1 - az, by = Ss - 1 - ay, bx = Ss - 1 - ax;
              const CVec3& p0 = gy[(bz * Ss + by) * Ss + bx];
              const CVec3& p1 = gy[((bz + 1) * Ss + by) * Ss + bx];
              CVec3 g;
              for (int c = 0; c < 3; ++c) g[c] = w[2][0] * p0[c] + w[2][1] * p1[c];
              for (int k = 0; k < 3; ++k)
                for (int j = 0; j < 3; ++j) C[k][j] += v[k] * g[j];
            }
        for (int l = 0; l < 3; ++l)
          for (int k = 0; k < 3; ++k)
            for (int j = 0; j < 3; ++j) acc[l] += T[tensor_index(k, j, l)] * C[k][j];
      } else {
        // Pairwise evaluation with the reduced symbol at the two cell centers.
        for (std::int64_t az = 0; az < S; ++az)
          for (std::int64_t ay = 0; ay < S; ++ay)
            for (std::int64_t ax = 0; ax < S; ++ax) {
              const CVec3& v = Vbox[static_cast<std::size_t>((az * S + ay) * S + ax)];
              if (v[0] == 0.0 && v[1] == 0.0 && v[2] == 0.0) continue;
              const Vec3 qc = field.cell_center({lo.x + ax, lo.y + ay, lo.z + az});
              for (int cz = 0; cz < 2; ++cz)
                for (int cy = 0; cy < 2; ++cy)
                  for (int cx = 0; cx < 2; ++cx) {
                    const double wt = w[0][cx] * w[1][cy] * w[2][cz];
                    if (wt == 0.0) continue;
                    const std::int64_t iz = S - 1 - az + cz, iy = S - 1 - ay + cy, ix = S - 1 - ax + cx;
                    const CVec3& g = Wbox[static_cast<std::size_t>((iz * (S + 1) + iy) * (S + 1) + ix)];
                    if (g[0] == 0.0 && g[1] == 0.0 && g[2] == 0.0) continue;
                    const Vec3 pc = field.cell_center({plo.x + ix, plo.y + iy, plo.z + iz});
                    for (int l = 0; l < 3; ++l)
                      for (int k = 0; k < 2; ++k)
                        for (int j = 0; j < 2; ++j)
                          acc[l] += opt.reduced->from_tensor(T, k, j, l, qc, pc) * v[k] * g[j] * wt;
                  }
            }
      }
      for (int l = 0; l < 3; ++l) out.per_block[static_cast<std::size_t>(l)][e] = acc[l] * vol;
    }
  }

  for (int l = 0; l < 3; ++l) {
    double s = 0;
    cplx total = 0;
    for (const auto& v : out.per_block[static_cast<std::size_t>(l)]) {
      s += std::abs(v);
      total += v;
    }
    out.blockwise_abs_sum[static_cast<std::size_t>(l)] = s;
    if (std::abs(total) > s * (1 + 1e-12) + 1e-300) {
      throw std::logic_error("blockwise abs sum below the magnitude of the total");
    }
  }
  return out;
}

std::vector<Vec3> make_probes(double lo, double hi, std::size_t count, std::uint64_t seed) {
  if (count == 0) throw ValidationError("probe set must not be empty");
  if (!(hi > lo) || !(lo >= 0)) throw ValidationError("probe annulus needs 0 <= lo < hi");
  boost::random::sobol gen(3);
  rng::Stream st(rng::derive(seed, rng::kProbes));
  const double shift[3] = {st.uniform(), st.uniform(), st.uniform()};
  const double scale = 1.0 / (static_cast<double>(gen.max()) + 1.0);
  std::vector<Vec3> out;
  out.reserve(count);
  while (out.size() < count) {
    Vec3 p;
    for (int a = 0; a < 3; ++a) {
      double u = static_cast<double>(gen()) * scale + shift[a];
      if (u >= 1.0) u -= 1.0;
      p[a] = -hi + 2 * hi * u;
    }
    if (!in_box(p, lo)) out.push_back(p);
  }
  return out;
}

BadSet::BadSet(std::vector<Vec3> probes, std::vector<bool> flagged, double omega)
    : probes_(std::move(probes)), flagged_(std::move(flagged)), omega_(omega) {
  if (probes_.size() != flagged_.size()) throw ValidationError("probe/flag size mismatch");
  for (bool f : flagged_) any_ = any_ || f;
}

bool BadSet::empty() const { return !any_; }

bool BadSet::contains(Vec3 xi) const {
  if (!any_ || !in_annulus(xi, omega_, 8.0)) return false;
  double best = std::numeric_limits<double>::infinity();
  bool flag = false;
  for (std::size_t i = 0; i < probes_.size(); ++i) {
    double d = norm2(probes_[i] - xi);
    if (d < best) {
      best = d;
      flag = flagged_[i];
    }
  }
  return flag;
}

std::vector<double> probe_magnitudes(const CellField& field, const Partition& P,
                                     const BilinearSymbol& M, const std::vector<Vec3>& probes,
                                     const BlockIntegralOptions& opt) {
  std::vector<double> mag(probes.size());
  for (std::size_t i = 0; i < probes.size(); ++i) {
    mag[i] = block_integrals(field, probes[i], P, M, opt).max_abs_sum();
  }
  return mag;
}

BadSetReport bad_set(const CellField& field, const Partition& P, const BilinearSymbol& M,
                     double threshold, const std::vector<Vec3>& probes, const Omega& omega,
                     const BlockIntegralOptions& opt, int quadrature_resolution) {
  if (probes.empty()) throw ValidationError("bad_set needs a nonempty probe set");
  if (!(threshold > 0)) throw ValidationError("bad_set threshold must be positive");
  BadSetReport rep;
  rep.threshold = threshold;
  rep.magnitude = probe_magnitudes(field, P, M, probes, opt);
  rep.flagged.resize(probes.size());
  long bad = 0;
  const int shells = omega.J + 4;
  rep.shell_density.assign(static_cast<std::size_t>(shells), 0.0);
  rep.shell_probe_count.assign(static_cast<std::size_t>(shells), 0);
  std::vector<long> shell_bad(static_cast<std::size_t>(shells), 0);
  for (std::size_t i = 0; i < probes.size(); ++i) {
    bool f = rep.magnitude[i] >= threshold;
    rep.flagged[i] = f;
    bad += f;
    for (int j = 0; j < shells; ++j) {
      double lo = std::ldexp(omega.omega, j);
      if (in_annulus(probes[i], lo, 2 * lo)) {
        ++rep.shell_probe_count[static_cast<std::size_t>(j)];
        shell_bad[static_cast<std::size_t>(j)] += f;
        break;
      }
    }
  }
  rep.aggregate_density = static_cast<double>(bad) / static_cast<double>(probes.size());
  for (int j = 0; j < shells; ++j) {
    auto n = rep.shell_probe_count[static_cast<std::size_t>(j)];
    rep.shell_density[static_cast<std::size_t>(j)] =
        n > 0 ? static_cast<double>(shell_bad[static_cast<std::size_t>(j)]) / static_cast<double>(n)
              : std::numeric_limits<double>::quiet_NaN();
  }
  rep.set = BadSet(probes, rep.flagged, omega.omega);
  if (quadrature_resolution > 0) {
    auto member = [&rep](Vec3 x) { return rep.set.contains(x); };
    for (int j = 0; j < shells; ++j) {
      rep.shell_quadrature.push_back(dyadic_density(member, omega, j, quadrature_resolution));
    }
  }
  return rep;
}

}  // namespace pmns
