#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>

#include "pmns/lattice.hpp"
#include "pmns/types.hpp"

namespace pmns {

enum class SymbolKind { zero, toy, navier_stokes, custom };

std::string to_string(SymbolKind k);
SymbolKind symbol_kind_from_string(const std::string& s);

/// Component indices are 0-based here (k, j, l ∈ {0, 1, 2}).
using SymbolEvaluator = std::function<cplx(int k, int j, int l, Vec3 xi)>;

/// All 27 entries M_kjl(ξ), stored at [(l * 3 + k) * 3 + j].
using SymbolTensor = std::array<cplx, 27>;
inline int tensor_index(int k, int j, int l) { return (l * 3 + k) * 3 + j; }

/// Bilinear symbol M_kjl(ξ) of a generalized Navier-Stokes system (|M_kjl(ξ)| ≤ |ξ|).
class BilinearSymbol {
 public:
  static BilinearSymbol zero();
  /// |ξ| on the (1,1,1) entry, zero elsewhere.
  static BilinearSymbol toy();
  /// Leray-projected advection: M_kjl(ξ) = -i ξ_k (δ_jl - ξ_j ξ_l / |ξ|²), M(0) = 0.
  static BilinearSymbol navier_stokes();
  /// User evaluator; verified against |M| ≤ |ξ| on `verify_samples` points of R_{1/64, 8}.
  static BilinearSymbol custom(SymbolEvaluator eval, std::string name = "custom",
                               long verify_samples = 10000, std::uint64_t seed = 1);
  static BilinearSymbol make(const std::string& kind);

  SymbolKind kind() const { return kind_; }
  const std::string& name() const { return name_; }
  bool is_zero() const { return kind_ == SymbolKind::zero; }

  cplx operator()(int k, int j, int l, Vec3 xi) const;
  SymbolTensor tensor(Vec3 xi) const;

 private:
  SymbolKind kind_ = SymbolKind::zero;
  std::string name_ = "zero";
  SymbolEvaluator custom_;
};

struct SymbolBoundCheck {
  long samples = 0;
  long violations = 0;
  double max_ratio = 0;  ///< max over samples of max_kjl |M_kjl(ξ)| / |ξ|
};

/// Samples ξ uniformly in R_{lo,hi} and counts violations of |M_kjl(ξ)| ≤ |ξ|.
SymbolBoundCheck check_symbol_bound(const BilinearSymbol& M, double lo, double hi, long samples,
                                    std::uint64_t seed);

/// Symbol after eliminating the third component with the divergence-free relation.
///
/// On the support the third component is v³(x) = a_1(x) v¹(x) + a_2(x) v²(x) with
/// a_k(x) = -x_k / x_3, where x is the representative point (subblock center) of the
/// factor's argument. The reduced entry therefore depends on the two argument
/// representatives q (first factor, index k) and p (second factor, index j):
///   M̃_kjl = M_kjl + a_k(q) M_3jl + a_j(p) M_k3l + a_k(q) a_j(p) M_33l.
class ReducedSymbol {
 public:
  /// Estimates C_κ as 1.1 × the sampled sup over ξ ∈ R_{ω,8}, q, p ∈ R_{1,2} ∩ H_κ.
  static ReducedSymbol reduce(const BilinearSymbol& M, double kappa, const Omega& omega,
                              long samples = 20000, std::uint64_t seed = 7);

  const BilinearSymbol& base() const { return base_; }
  double kappa() const { return kappa_; }
  double bound_constant() const { return C_; }

  /// k, j ∈ {0, 1}; throws ValidationError if |q_3| or |p_3| is below κ.
  cplx operator()(int k, int j, int l, Vec3 xi, Vec3 q, Vec3 p) const;
  /// Same, reusing a precomputed full tensor at ξ.
  cplx from_tensor(const SymbolTensor& T, int k, int j, int l, Vec3 q, Vec3 p) const;

 private:
  BilinearSymbol base_;
  double kappa_ = 0;
  double C_ = 0;
};

}  // namespace pmns
