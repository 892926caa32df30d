#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

namespace pmns {

/// Neumaier compensated summation.
class KahanSum {
 public:
  void add(double x) {
    double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x)) {
      comp_ += (sum_ - t) + x;
    } else {
      comp_ += (x - t) + sum_;
    }
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0, comp_ = 0;
};

struct Interval {
  double lo = 0, hi = 0;
};

/// Wilson score interval for `successes` out of `n` at normal quantile z (1.96 ≈ 95%).
Interval wilson_interval(long successes, long n, double z = 1.959963984540054);

struct LineFit {
  double slope = 0, intercept = 0;
  double slope_se = 0;
  Interval slope_ci;  ///< 95% Student-t interval (degenerate for two points)
  std::size_t n = 0;
};

/// Ordinary least squares y = intercept + slope · x.
LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y);

/// Running mean / variance (Welford), unbiased variance.
class RunningStats {
 public:
  void add(double x);
  std::size_t count() const { return n_; }
  double mean() const { return mean_; }
  double variance() const { return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0; }

 private:
  std::size_t n_ = 0;
  double mean_ = 0, m2_ = 0;
};

double median(std::vector<double> v);

}  // namespace pmns
