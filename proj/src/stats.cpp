#include "brw/stats.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

namespace brw::stats {

void RunningStats::merge(const RunningStats& o) noexcept {
  if (o.n_ == 0) return;
  if (n_ == 0) {
    *this = o;
    return;
  }
  const double n1 = static_cast<double>(n_);
  const double n2 = static_cast<double>(o.n_);
  const double d = o.mean_ - mean_;
  const double n = n1 + n2;
  mean_ += d * n2 / n;
  m2_ += o.m2_ + d * d * n1 * n2 / n;
  n_ += o.n_;
}

double normal_cdf(double z) noexcept { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

double kolmogorov_q(double x) noexcept {
  if (x <= 0.0) return 1.0;
  if (x < 0.2) return 1.0;
  // Q(x) = 2 sum_{k>=1} (-1)^{k-1} exp(-2 k^2 x^2)
  double sum = 0.0;
  for (int k = 1; k <= 200; ++k) {
    const double term = std::exp(-2.0 * k * k * x * x);
    sum += (k % 2 == 1) ? term : -term;
    if (term < 1e-17) break;
  }
  return std::clamp(2.0 * sum, 0.0, 1.0);
}

KsResult ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = na * nb / (na + nb);
  const double sq = std::sqrt(ne);
  return {d, kolmogorov_q((sq + 0.12 + 0.11 / sq) * d)};
}

Interval wilson_interval(std::uint64_t successes, std::uint64_t trials, double z) {
  if (trials == 0) return {0.0, 1.0};
  const double n = static_cast<double>(trials);
  const double p = static_cast<double>(successes) / n;
  const double z2 = z * z;
  const double centre = (p + z2 / (2 * n)) / (1 + z2 / n);
  const double half = z * std::sqrt(p * (1 - p) / n + z2 / (4 * n * n)) / (1 + z2 / n);
  return {std::max(0.0, centre - half), std::min(1.0, centre + half)};
}

double two_proportion_greater_p(std::uint64_t x1, std::uint64_t n1, std::uint64_t x2,
                                std::uint64_t n2) noexcept {
  if (n1 == 0 || n2 == 0) return 1.0;
  const double p1 = static_cast<double>(x1) / static_cast<double>(n1);
  const double p2 = static_cast<double>(x2) / static_cast<double>(n2);
  const double pooled = static_cast<double>(x1 + x2) / static_cast<double>(n1 + n2);
  const double var = pooled * (1 - pooled) * (1.0 / static_cast<double>(n1) + 1.0 / static_cast<double>(n2));
  if (var <= 0.0) return p2 > p1 ? 0.0 : 1.0;
  return 1.0 - normal_cdf((p2 - p1) / std::sqrt(var));
}

double cochran_armitage_increasing_p(std::span<const std::uint64_t> successes,
                                     std::span<const std::uint64_t> trials,
                                     std::span<const double> scores) {
  const std::size_t k = successes.size();
  if (trials.size() != k || scores.size() != k || k < 2)
    throw std::invalid_argument("cochran_armitage: mismatched group sizes");
  double n = 0.0, r = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    n += static_cast<double>(trials[i]);
    r += static_cast<double>(successes[i]);
  }
  if (n == 0.0) return 1.0;
  const double pbar = r / n;
  double t = 0.0, s1 = 0.0, s2 = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double ni = static_cast<double>(trials[i]);
    t += scores[i] * (static_cast<double>(successes[i]) - ni * pbar);
    s1 += ni * scores[i] * scores[i];
    s2 += ni * scores[i];
  }
  const double var = pbar * (1 - pbar) * (s1 - s2 * s2 / n);
  if (var <= 0.0) return t > 0 ? 0.0 : 1.0;
  return 1.0 - normal_cdf(t / std::sqrt(var));
}

double ols_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("ols_slope: need >= 2 points");
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  return sxy / sxx;
}

}  // namespace brw::stats
