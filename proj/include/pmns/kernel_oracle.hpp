#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

#include "pmns/types.hpp"

namespace pmns {

using Region = std::function<bool(Vec3)>;

struct KernelEstimate {
  double value = 0;
  double std_error = 0;
  long samples = 0;
};

/// Stratified Monte Carlo estimate of ∫_G |q|⁻²|ξ-q|⁻² dq for G inside the cube
/// [-half_side, half_side]³. Balls around q = 0 and q = ξ are sampled with a radial density
/// that cancels the singular factor; the rest of the cube is sampled uniformly.
KernelEstimate kernel_integral(const Region& G, double half_side, Vec3 xi, long samples,
                               std::uint64_t seed);

/// ∫_{r_lo ≤ |q| < r_hi} |q|⁻²|ξ-q|⁻² dq with |ξ| = xi_norm, by one-dimensional quadrature of
/// the spherical average (r_hi may be +inf).
double radial_kernel_integral(double r_lo, double r_hi, double xi_norm);

/// A subset of R_{ω,outer} built from equal-volume cells of the dyadic shells
/// [2^j ω, 2^{j+1} ω) (the last shell clipped at `outer`). Each shell keeps the
/// floor(σ · cells) cells of lowest hash rank, so every shell density is at most σ and sets
/// with the same seed are nested in σ.
class ShellCellSet {
 public:
  ShellCellSet(double omega, double outer, double sigma, std::uint64_t seed, int radial = 4,
               int polar = 8, int azimuthal = 16);
  bool contains(Vec3 q) const;
  int shells() const { return static_cast<int>(selected_.size()); }
  double shell_density(int j) const;
  double sigma() const { return sigma_; }

 private:
  double omega_, outer_, sigma_;
  int nr_, nc_, nphi_;
  std::vector<std::vector<char>> selected_;
};

/// The ball of the given radius about `center`, intersected with R_{ω,outer}.
Region concentrated_ball(Vec3 center, double radius, double omega, double outer);
/// Radius of a ball about ξ: σ^{1/3} times the smallest of |ξ|/2, the distance from ξ to the
/// boundary of R_{ω,outer}, and the radius whose ball has the volume of the dyadic shell below
/// the one holding ξ. Every shell density stays below σ and the balls shrink homothetically.
double concentrated_radius(Vec3 xi, double omega, double outer, double sigma);

struct LemmaRow {
  int lemma = 0;          ///< 1: density lemma, 2: low-low lemma, 3: far lemma
  double K = 0;
  int instance = 0;
  std::string variant;    ///< "cells", "ball", "sphere"
  double sigma = 1;
  Vec3 xi;
  double integral = 0, std_error = 0;
  double bound = 0;       ///< the bound without its constant
  double ratio = 0, ratio_stderr = 0;
};

struct SigmaCheck {
  double K = 0;
  int instance = 0;
  std::string variant;
  std::vector<double> sigma, ratio, ratio_stderr;
  bool ok = true;  ///< ratio does not grow as σ shrinks, within 2 combined standard errors
};

struct KernelReport {
  std::vector<double> ladder;
  std::vector<LemmaRow> rows;
  /// [lemma][ladder index]: sup over instances of the ratio
  std::vector<std::vector<double>> sup_ratio;
  double spread[3] = {0, 0, 0};  ///< max/min over the ladder of the sup ratio
  bool stable[3] = {false, false, false};
  std::vector<SigmaCheck> sigma_checks;
  bool sigma_direction_ok = true;
};

struct KernelConfig {
  std::vector<double> ladder = {27, 64, 125};
  int instances = 8;
  long samples = 200000;
  std::uint64_t seed = 1;
  std::vector<double> sigmas = {1, 1.0 / 8, 1.0 / 64};
  double stability_factor = 2;
};

void validate_config(const KernelConfig& cfg);
/// Empirical constants of the three kernel bounds over the ladder.
KernelReport check_lemmas(const KernelConfig& cfg);

/// CSV of (lemma, K, instance, variant, sigma, xi, integral, stderr, bound, ratio, ratio_stderr).
void write_kernel_csv(std::ostream& os, const KernelReport& rep);

}  // namespace pmns
