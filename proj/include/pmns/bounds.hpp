#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <vector>

namespace pmns {

/// Nonnegative real stored as its natural logarithm (zero is -inf).
class LogNum {
 public:
  LogNum() = default;
  static LogNum from_log(double l) {
    LogNum r;
    r.l_ = l;
    return r;
  }
  static LogNum from_value(double x);
  static LogNum zero() { return {}; }
  static LogNum one() { return from_log(0.0); }

  double log() const { return l_; }
  double value() const { return std::exp(l_); }
  bool is_zero() const { return l_ == -std::numeric_limits<double>::infinity(); }

  friend LogNum operator+(LogNum a, LogNum b);
  friend LogNum operator*(LogNum a, LogNum b) {
    return a.is_zero() || b.is_zero() ? LogNum{} : from_log(a.l_ + b.l_);
  }
  friend LogNum operator/(LogNum a, LogNum b) { return a.is_zero() ? LogNum{} : from_log(a.l_ - b.l_); }
  LogNum& operator+=(LogNum b) { return *this = *this + b; }
  LogNum& operator*=(LogNum b) { return *this = *this * b; }
  LogNum pow(double p) const { return is_zero() ? (p == 0 ? one() : *this) : from_log(p * l_); }
  friend bool operator<(LogNum a, LogNum b) { return a.l_ < b.l_; }
  friend bool operator<=(LogNum a, LogNum b) { return a.l_ <= b.l_; }
  friend bool operator==(LogNum a, LogNum b) { return a.l_ == b.l_; }

 private:
  double l_ = -std::numeric_limits<double>::infinity();
};

/// log(bound) - log(value): positive when value < bound, +inf when value is zero.
double log_slack(LogNum value, LogNum bound);

struct BoundParams {
  double log_K = std::log(1e12);  ///< natural log of K (K itself may overflow a double)
  double M = 1;
  double rho = 1e-3;
  double lambda = 1;
  /// log θ; unset selects θ = K^{-1/12}, the largest value allowed by σ ≤ K^{-1/4}.
  std::optional<double> log_theta;

  double loglogK() const { return std::log(log_K); }
  LogNum K() const { return LogNum::from_log(log_K); }
  /// K^{p}
  LogNum K_pow(double p) const { return LogNum::from_log(p * log_K); }
  LogNum theta() const { return LogNum::from_log(log_theta ? *log_theta : -log_K / 12); }
  void validate() const;
};

struct BoundState {
  int n = 0;
  LogNum a, b, c, A, B, E;
};

/// A₀ = B₀ = M(log log K)^{1/4}, E₀ = K^{-1/4} (0 when M = 0), a₀ = b₀ = c₀ = 0.
BoundState initial_state(const BoundParams& p);

/// X_n and Y_n of the E recurrence.
LogNum recurrence_X(const BoundState& s, const BoundParams& p);
LogNum recurrence_Y(const BoundState& s, const BoundParams& p);

/// Trap quantities that justify holding c and A at their ceilings:
/// c_trap = λ[b² + bc + (b + c/loglogK)(A + θB + a) + c²] against 1/(2K^{1/17}),
/// A_trap = E + X against K^{-1/16}.
struct TrapCheck {
  LogNum c_value, c_bound, A_value, A_bound;
  bool c_ok() const { return c_value <= c_bound; }
  bool A_ok() const { return A_value <= A_bound; }
};
TrapCheck trap_check(const BoundState& s, const BoundParams& p);

/// One step of the recurrences: a, b, B, E by their displayed updates, c and A held at
/// K^{-1/17} and 2M(log log K)^{1/4}.
BoundState advance(const BoundState& s, const BoundParams& p);

/// Ceilings of the uniform estimates at step n ≥ 1.
struct UniformCeilings {
  LogNum a, b, c, A, B, E;
};
UniformCeilings uniform_ceilings(int n, const BoundParams& p);

inline constexpr const char* kUniformNames[6] = {"a", "b", "c", "A", "B", "E"};

struct SlackRow {
  BoundState state;
  UniformCeilings ceiling;
  /// log slacks for a, b, c, A, B, E; c and A use their trap conditions.
  double slack[6] = {0, 0, 0, 0, 0, 0};
  TrapCheck traps;
};

struct UniformReport {
  BoundParams params;
  bool holds = true;
  int first_violation_n = -1;
  std::string first_violation;  ///< name among kUniformNames, empty if none
  double min_slack[6];
  std::vector<SlackRow> rows;   ///< n = 1..floor(1/ρ) (only if keep_rows)
};

/// Runs the recurrences while nρ ≤ 1 and checks the six uniform estimates at every n ≥ 1.
UniformReport verify_uniform(const BoundParams& p, bool keep_rows = true);

struct ThresholdResult {
  double lambda = 1;
  bool found = false;
  double log10_K = std::numeric_limits<double>::quiet_NaN();  ///< smallest ladder K that passes
  std::vector<UniformReport> reports;                         ///< per ladder entry (rows dropped)
};

/// Smallest K (given as log10 K) in the ladder for which verify_uniform holds.
ThresholdResult uniform_threshold(BoundParams base, const std::vector<double>& log10_ladder);

/// Threshold K as a function of λ: one ThresholdResult per λ (parallel over the grid).
std::vector<ThresholdResult> lambda_frontier(const BoundParams& base,
                                             const std::vector<double>& lambdas,
                                             const std::vector<double>& log10_ladder);

/// log10 K ∈ {6, 9, ..., 60}
std::vector<double> default_log10_ladder();

/// Low-frequency refinement: a_{n,i} for the dyadic shells R_{ω/2^{i+1}, ω/2^i}.
struct FineBoundState {
  int n = 0;
  std::vector<LogNum> a;  ///< a_{n,i}, i = 0..depth-1
  LogNum V;               ///< V_n used for the last update
  double max_ratio = 0;   ///< sup over steps and i of a_{n,i} / ((ω/2^i)²(log log K)^{1/4})
};

FineBoundState initial_fine(int depth);
/// V_n: the bracket of the a-recurrence times λ.
LogNum fine_V(const BoundState& s, const BoundParams& p);
/// a_{n+1,i} = a_{n,i} + V_n (ω/2^i)² (log log K)^{1/4} n ρ, with n = state.n.
FineBoundState advance_fine(const FineBoundState& fine, const BoundState& state,
                            const BoundParams& p, double omega);

struct LongtermResult {
  double epsilon = 0;
  bool found = false;
  double log10_K = std::numeric_limits<double>::quiet_NaN();
  double value_at_K = std::numeric_limits<double>::quiet_NaN();  ///< expression at the found K
  double min_value = std::numeric_limits<double>::infinity();     ///< smallest over the ladder
  double nonlinear_bound = std::numeric_limits<double>::quiet_NaN();  ///< ε² + 200(loglogK)^{11/2}θ
  std::vector<std::pair<double, double>> curve;  ///< (log10 K, expression) per ladder entry
};

/// 2(log log K)^{1/4} exp(-(log log K)^{1/4}) + K^{-1/16}
double longterm_expression(double log_K);
LongtermResult longterm_threshold(double epsilon, const std::vector<double>& log10_ladder);

}  // namespace pmns
