#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

namespace brw::stats {

/// Welford accumulator for mean and standard error.
class RunningStats {
 public:
  void add(double x) noexcept {
    ++n_;
    const double d = x - mean_;
    mean_ += d / static_cast<double>(n_);
    m2_ += d * (x - mean_);
  }

  void merge(const RunningStats& o) noexcept;

  std::uint64_t count() const noexcept { return n_; }
  double mean() const noexcept { return mean_; }
  double variance() const noexcept {
    return n_ > 1 ? m2_ / static_cast<double>(n_ - 1) : 0.0;
  }
  double stderr_mean() const noexcept {
    return n_ > 0 ? std::sqrt(variance() / static_cast<double>(n_)) : 0.0;
  }

 private:
  std::uint64_t n_ = 0;
  double mean_ = 0.0;
  double m2_ = 0.0;
};

double normal_cdf(double z) noexcept;

/// Upper tail of the Kolmogorov distribution, P(K > x).
double kolmogorov_q(double x) noexcept;

struct KsResult {
  double statistic = 0.0;  // sup |F1 - F2|
  double p_value = 1.0;
};

/// Two-sample Kolmogorov-Smirnov test (asymptotic p-value with Stephens'
/// small-sample correction). Ties are handled exactly in the statistic; the
/// resulting test is conservative for discrete data.
KsResult ks_two_sample(std::vector<double> a, std::vector<double> b);

/// Wilson score interval for a binomial proportion.
struct Interval {
  double lo = 0.0;
  double hi = 1.0;
};
Interval wilson_interval(std::uint64_t successes, std::uint64_t trials, double z = 1.959963984540054);

/// One-sided pooled two-proportion z statistic for H1: p2 > p1.
/// Returns the p-value.
double two_proportion_greater_p(std::uint64_t x1, std::uint64_t n1, std::uint64_t x2,
                                std::uint64_t n2) noexcept;

/// Cochran-Armitage test for an increasing trend in proportions across
/// ordered groups with the given scores. Returns the one-sided p-value for
/// H1: proportions increase with the score.
double cochran_armitage_increasing_p(std::span<const std::uint64_t> successes,
                                     std::span<const std::uint64_t> trials,
                                     std::span<const double> scores);

/// Ordinary least-squares slope of y on x.
double ols_slope(std::span<const double> x, std::span<const double> y);

}  // namespace brw::stats
