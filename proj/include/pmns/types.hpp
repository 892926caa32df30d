#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace pmns {

using cplx = std::complex<double>;

/// Real 3-vector (frequency coordinates).
struct Vec3 {
  double x = 0, y = 0, z = 0;

  double operator[](int a) const { return a == 0 ? x : (a == 1 ? y : z); }
  double& operator[](int a) { return a == 0 ? x : (a == 1 ? y : z); }

  friend Vec3 operator+(Vec3 a, Vec3 b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(Vec3 a, Vec3 b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator-(Vec3 a) { return {-a.x, -a.y, -a.z}; }
  friend Vec3 operator*(double s, Vec3 a) { return {s * a.x, s * a.y, s * a.z}; }
};

inline double dot(Vec3 a, Vec3 b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm2(Vec3 a) { return dot(a, a); }
inline double norm(Vec3 a) { return std::sqrt(norm2(a)); }
inline double norm_inf(Vec3 a) {
  return std::max({std::abs(a.x), std::abs(a.y), std::abs(a.z)});
}

/// Complex 3-vector: the value of a spectral field at one frequency.
using CVec3 = std::array<cplx, 3>;

inline CVec3 conj(const CVec3& v) { return {std::conj(v[0]), std::conj(v[1]), std::conj(v[2])}; }
inline cplx dot(Vec3 a, const CVec3& v) { return a.x * v[0] + a.y * v[1] + a.z * v[2]; }
inline double norm(const CVec3& v) {
  return std::sqrt(std::norm(v[0]) + std::norm(v[1]) + std::norm(v[2]));
}
inline double max_abs(const CVec3& v) {
  return std::max({std::abs(v[0]), std::abs(v[1]), std::abs(v[2])});
}

/// Integer lattice coordinates of a cell [i*h, (i+1)*h) per axis.
struct Cell {
  std::int64_t x = 0, y = 0, z = 0;

  std::int64_t operator[](int a) const { return a == 0 ? x : (a == 1 ? y : z); }
  friend bool operator==(const Cell&, const Cell&) = default;
  /// The reflected cell -W, which as a half-open cell has index -i-1.
  Cell mirrored() const { return {-x - 1, -y - 1, -z - 1}; }
};

/// Half-open sup-norm annulus R_{lo,hi} = [-hi,hi)^3 \ [-lo,lo)^3.
inline bool in_box(Vec3 p, double half) {
  return p.x >= -half && p.x < half && p.y >= -half && p.y < half && p.z >= -half &&
         p.z < half;
}
inline bool in_annulus(Vec3 p, double lo, double hi) {
  return in_box(p, hi) && !in_box(p, lo);
}
inline double annulus_volume(double lo, double hi) {
  return std::pow(2 * hi, 3) - std::pow(2 * lo, 3);
}

/// Rejected inputs (bad parameters, out-of-domain evaluations).
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// log(log(K)); K is passed as log(K) so astronomically large K stay representable.
inline double loglog_from_log(double logK) {
  if (!(logK > 1.0)) {
    throw ValidationError("log log K requires K > e (got log K = " + std::to_string(logK) + ")");
  }
  return std::log(logK);
}
inline double loglog(double K) { return loglog_from_log(std::log(K)); }

}  // namespace pmns
