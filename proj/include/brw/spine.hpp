#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "brw/law.hpp"
#include "brw/rng.hpp"
#include "brw/stats.hpp"

namespace brw {

/// Step law of the tilted walk: P(dS = v) = E[#children with displacement v] e^{-v}.
struct TiltedStepLaw {
  std::vector<double> support;
  std::vector<double> probabilities;

  double total_mass() const;
  double mean() const;
  double second_moment() const;
  /// E[e^{t dS}].
  double mgf(double t) const;
  double sample(Rng& rng) const;

 private:
  friend TiltedStepLaw tilted_law(const DisplacementLaw& law);
  std::vector<double> cumulative_;
};

/// Throws DomainError when the law is not calibrated (the tilt would not be a
/// probability distribution).
TiltedStepLaw tilted_law(const DisplacementLaw& law);

/// One path S_0 = 0, S_1, ..., S_k with its record statistics.
struct SpinePath {
  std::vector<double> S;

  std::size_t length() const { return S.size() - 1; }
  /// max_{1<=i<=k} S_i (k >= 1).
  double running_max(std::size_t k) const;
  /// min_{1<=i<=k} S_i (k >= 1).
  double running_min(std::size_t k) const;
  /// max_{1<=i<=k} (running_max(i) - S_i).
  double record_drop(std::size_t k) const;
  /// Strict ascending ladder epochs H_0 = 0 < H_1 < ... within the path.
  std::vector<std::size_t> ladder_times() const;
  /// First i >= 1 with running_max(i) - S_i > lambda.
  std::optional<std::size_t> tau(double lambda) const;
  /// First i >= 0 with S_i < -lambda.
  std::optional<std::size_t> sigma_neg(double lambda) const;
};

SpinePath sample_spine(const TiltedStepLaw& law, std::size_t k, Rng& rng);

struct SpineSummary {
  std::size_t k = 0;
  std::uint64_t trials = 0;
  stats::RunningStats running_max;
  stats::RunningStats running_min;
  stats::RunningStats record_drop;
  stats::RunningStats ladder_count;  // number of H_i in ]0, k]
  std::uint64_t first_ladder_within = 0;  // #paths with H_1 <= k
  std::uint64_t max_positive = 0;  // #paths with running_max(k) > 0
};

SpineSummary spine_statistics(const TiltedStepLaw& law, std::size_t k, std::uint64_t trials,
                              std::uint64_t seed, unsigned jobs = 1);

struct PersistenceCurve {
  std::vector<std::size_t> ks;
  std::vector<double> probability;  // P(min_{1<=i<=k} S_i >= -alpha)
  std::vector<double> stderr_;
  double slope = 0.0;  // log-log OLS slope
};

/// P(running_min(k) >= -alpha) on a grid of k, from one batch of paths that
/// stop as soon as they fall below -alpha.
PersistenceCurve persistence_curve(const TiltedStepLaw& law, std::span<const std::size_t> ks, double alpha,
                                   std::uint64_t trials, std::uint64_t seed, unsigned jobs = 1);

// ---------------------------------------------------------------------------
// Built-in path functionals g(v_1, ..., v_n, lambda).

enum class Functional {
  One,             // 1
  ExpLast,         // e^{-v_n}
  MinLambda,       // 1{min v_i >= -1} min(lambda, 5)
  DropExpCapped,   // 1{max_i (vbar_i - v_i) <= 2} e^{-v_n} min(1 + lambda, 5)
  Lambda,          // lambda (unbounded unless the family has bounded lambda)
};

std::string_view functional_name(Functional g);
Functional parse_functional(std::string_view name);
std::vector<Functional> all_functionals();
double evaluate(Functional g, std::span<const double> path, double lambda);
/// False when g is unbounded for this family (e.g. Lambda with Poisson offspring).
bool admissible(Functional g, const DisplacementLaw& law);

struct ManyToOneResult {
  Functional g = Functional::One;
  std::uint32_t n = 0;
  stats::RunningStats lhs;
  stats::RunningStats rhs;
  double z() const;
  bool pass(double sigmas = 4.0) const { return std::abs(z()) <= sigmas; }
};

/// Two-sided Monte Carlo: lhs averages sum_{|x|=n} g(path(x), Lambda(x)) over
/// fresh trees; rhs averages e^{S_n} g(S, Lambda') with Lambda' from an
/// independent one-generation sample (inner_samples draws averaged).
/// All requested functionals are evaluated on the same samples.
/// Throws DomainError for n outside [1, 6] or an inadmissible functional.
std::vector<ManyToOneResult> many_to_one_check(const DisplacementLaw& law, std::uint32_t n,
                                               std::span<const Functional> gs, std::uint64_t samples,
                                               std::uint64_t seed, unsigned jobs = 1,
                                               std::uint32_t inner_samples = 1);

struct StoppedSumEstimate {
  double lambda = 0.0;
  double b = 0.0;
  stats::RunningStats sum;
  std::uint64_t truncated = 0;  // paths that hit the length cap
  double truncation_fraction() const {
    return sum.count() ? static_cast<double>(truncated) / static_cast<double>(sum.count()) : 0.0;
  }
};

inline constexpr std::uint64_t kDefaultPathCap = 1'000'000;

/// E[sum_{l=0}^{tau_lambda - 1} e^{-b(lambda - (Sbar_l - S_l))}], with
/// Sbar_0 - S_0 = 0. Requires 0 < b < certified delta and lambda > 0.
StoppedSumEstimate stopped_drop_sum(const DisplacementLaw& law, double b, double lambda, std::uint64_t trials,
                                    std::uint64_t seed, unsigned jobs = 1,
                                    std::uint64_t path_cap = kDefaultPathCap);

/// E[sum_{l < H_1} e^{-b S_l} 1{sigma_{-lambda} > l}], the first-ladder
/// excursion quantity bounded by (C / lambda) e^{b lambda}.
StoppedSumEstimate first_ladder_sum(const DisplacementLaw& law, double b, double lambda, std::uint64_t trials,
                                    std::uint64_t seed, unsigned jobs = 1,
                                    std::uint64_t path_cap = kDefaultPathCap);

struct LambdaTail {
  double delta1 = 1.0;
  stats::RunningStats moment;  // (1 + sum e^{-V})^{1 + delta1}
  std::vector<double> grid;
  std::vector<double> tail;  // P(1 + sum e^{-V} > lambda)
  std::vector<double> scaled_tail;  // tail * lambda^{1 + delta1}
  /// Exact E[(1 + sum e^{-V})^2] when delta1 == 1, else NaN.
  double analytic_moment = 0.0;
  /// 1 + max sum e^{-V}; +inf for unbounded families.
  double cutoff = 0.0;
};

LambdaTail lambda_tail_check(const DisplacementLaw& law, std::uint64_t trials, std::uint64_t seed,
                             double delta1 = 1.0, std::span<const double> grid = {}, unsigned jobs = 1);

}  // namespace brw
