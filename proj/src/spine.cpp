#include "brw/spine.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "brw/error.hpp"
#include "brw/parallel.hpp"

namespace brw {

namespace {

constexpr std::size_t kChunk = 8192;

stats::RunningStats merge_all(const std::vector<stats::RunningStats>& parts) {
  stats::RunningStats out;
  for (const auto& p : parts) out.merge(p);
  return out;
}

}  // namespace

double TiltedStepLaw::total_mass() const {
  double s = 0.0;
  for (double p : probabilities) s += p;
  return s;
}

double TiltedStepLaw::mean() const {
  double s = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) s += probabilities[i] * support[i];
  return s;
}

double TiltedStepLaw::second_moment() const {
  double s = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) s += probabilities[i] * support[i] * support[i];
  return s;
}

double TiltedStepLaw::mgf(double t) const {
  double s = 0.0;
  for (std::size_t i = 0; i < support.size(); ++i) s += probabilities[i] * std::exp(t * support[i]);
  return s;
}

double TiltedStepLaw::sample(Rng& rng) const {
  const double u = rng.uniform();
  for (std::size_t i = 0; i + 1 < support.size(); ++i)
    if (u < cumulative_[i]) return support[i];
  return support.back();
}

TiltedStepLaw tilted_law(const DisplacementLaw& law) {
  if (!law.is_calibrated()) throw DomainError("tilted law: displacement law is not calibrated");
  TiltedStepLaw t;
  const double m = law.mean_offspring();
  for (const auto& a : law.atoms()) {
    t.support.push_back(a.value);
    t.probabilities.push_back(m * a.prob * std::exp(-a.value));
  }
  const double total = t.total_mass();
  double c = 0.0;
  for (double p : t.probabilities) t.cumulative_.push_back(c += p / total);
  return t;
}

// ---------------------------------------------------------------------------

double SpinePath::running_max(std::size_t k) const {
  if (k < 1 || k >= S.size()) throw DomainError("running_max: k out of range");
  return *std::max_element(S.begin() + 1, S.begin() + static_cast<std::ptrdiff_t>(k) + 1);
}

double SpinePath::running_min(std::size_t k) const {
  if (k < 1 || k >= S.size()) throw DomainError("running_min: k out of range");
  return *std::min_element(S.begin() + 1, S.begin() + static_cast<std::ptrdiff_t>(k) + 1);
}

double SpinePath::record_drop(std::size_t k) const {
  if (k < 1 || k >= S.size()) throw DomainError("record_drop: k out of range");
  double top = S[1], best = 0.0;
  for (std::size_t i = 1; i <= k; ++i) {
    top = std::max(top, S[i]);
    best = std::max(best, top - S[i]);
  }
  return best;
}

std::vector<std::size_t> SpinePath::ladder_times() const {
  std::vector<std::size_t> h{0};
  double record = S[0];
  for (std::size_t i = 1; i < S.size(); ++i)
    if (S[i] > record) {
      record = S[i];
      h.push_back(i);
    }
  return h;
}

std::optional<std::size_t> SpinePath::tau(double lambda) const {
  if (S.size() < 2) return std::nullopt;
  double top = S[1];
  for (std::size_t i = 1; i < S.size(); ++i) {
    top = std::max(top, S[i]);
    if (top - S[i] > lambda) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> SpinePath::sigma_neg(double lambda) const {
  for (std::size_t i = 0; i < S.size(); ++i)
    if (S[i] < -lambda) return i;
  return std::nullopt;
}

SpinePath sample_spine(const TiltedStepLaw& law, std::size_t k, Rng& rng) {
  SpinePath p;
  p.S.resize(k + 1);
  p.S[0] = 0.0;
  for (std::size_t i = 1; i <= k; ++i) p.S[i] = p.S[i - 1] + law.sample(rng);
  return p;
}

SpineSummary spine_statistics(const TiltedStepLaw& law, std::size_t k, std::uint64_t trials, std::uint64_t seed,
                              unsigned jobs) {
  if (k < 1) throw DomainError("spine_statistics: k must be >= 1");
  const std::size_t chunks = (trials + kChunk - 1) / kChunk;
  std::vector<SpineSummary> parts(chunks);
  for_chunks(trials, kChunk, jobs, [&](std::size_t c, std::size_t begin, std::size_t end) {
    Rng rng(derive_seed(seed, c, "spine-stats"));
    SpineSummary& s = parts[c];
    for (std::size_t t = begin; t < end; ++t) {
      const SpinePath p = sample_spine(law, k, rng);
      const double top = p.running_max(k);
      s.running_max.add(top);
      s.running_min.add(p.running_min(k));
      s.record_drop.add(p.record_drop(k));
      const auto h = p.ladder_times();
      s.ladder_count.add(static_cast<double>(h.size() - 1));
      if (h.size() > 1) ++s.first_ladder_within;
      if (top > 0.0) ++s.max_positive;
    }
  });
  SpineSummary out;
  out.k = k;
  out.trials = trials;
  for (const auto& s : parts) {
    out.running_max.merge(s.running_max);
    out.running_min.merge(s.running_min);
    out.record_drop.merge(s.record_drop);
    out.ladder_count.merge(s.ladder_count);
    out.first_ladder_within += s.first_ladder_within;
    out.max_positive += s.max_positive;
  }
  return out;
}

PersistenceCurve persistence_curve(const TiltedStepLaw& law, std::span<const std::size_t> ks, double alpha,
                                   std::uint64_t trials, std::uint64_t seed, unsigned jobs) {
  if (ks.empty() || trials == 0) throw DomainError("persistence_curve: empty grid or no trials");
  const std::size_t kmax = *std::max_element(ks.begin(), ks.end());
  const std::size_t chunks = (trials + kChunk - 1) / kChunk;
  std::vector<std::vector<std::uint64_t>> counts(chunks, std::vector<std::uint64_t>(ks.size(), 0));
  for_chunks(trials, kChunk, jobs, [&](std::size_t c, std::size_t begin, std::size_t end) {
    Rng rng(derive_seed(seed, c, "persistence"));
    for (std::size_t t = begin; t < end; ++t) {
      // survived = number of steps i >= 1 with S_j >= -alpha for all j <= i
      double s = 0.0;
      std::size_t survived = 0;
      while (survived < kmax) {
        s += law.sample(rng);
        if (s < -alpha) break;
        ++survived;
      }
      for (std::size_t j = 0; j < ks.size(); ++j)
        if (survived >= ks[j]) ++counts[c][j];
    }
  });
  PersistenceCurve out;
  out.ks.assign(ks.begin(), ks.end());
  std::vector<double> lx, ly;
  const double n = static_cast<double>(trials);
  for (std::size_t j = 0; j < ks.size(); ++j) {
    std::uint64_t total = 0;
    for (const auto& row : counts) total += row[j];
    const double p = static_cast<double>(total) / n;
    out.probability.push_back(p);
    out.stderr_.push_back(std::sqrt(p * (1.0 - p) / n));
    if (p > 0.0) {
      lx.push_back(std::log(static_cast<double>(ks[j])));
      ly.push_back(std::log(p));
    }
  }
  out.slope = lx.size() >= 2 ? stats::ols_slope(lx, ly) : std::numeric_limits<double>::quiet_NaN();
  return out;
}

// ---------------------------------------------------------------------------

std::string_view functional_name(Functional g) {
  switch (g) {
    case Functional::One: return "one";
    case Functional::ExpLast: return "exp_last";
    case Functional::MinLambda: return "min_lambda";
    case Functional::DropExpCapped: return "drop_exp_capped";
    case Functional::Lambda: return "lambda";
  }
  return "?";
}

Functional parse_functional(std::string_view name) {
  for (auto g : all_functionals())
    if (functional_name(g) == name) return g;
  throw ConfigError("unknown functional: " + std::string(name));
}

std::vector<Functional> all_functionals() {
  return {Functional::One, Functional::ExpLast, Functional::MinLambda, Functional::DropExpCapped,
          Functional::Lambda};
}

double evaluate(Functional g, std::span<const double> path, double lambda) {
  switch (g) {
    case Functional::One: return 1.0;
    case Functional::ExpLast: return std::exp(-path.back());
    case Functional::MinLambda: {
      const double lo = *std::min_element(path.begin(), path.end());
      return lo >= -1.0 ? std::min(lambda, 5.0) : 0.0;
    }
    case Functional::DropExpCapped: {
      double top = path.front(), drop = 0.0;
      for (double v : path) {
        top = std::max(top, v);
        drop = std::max(drop, top - v);
      }
      return drop <= 2.0 ? std::exp(-path.back()) * std::min(1.0 + lambda, 5.0) : 0.0;
    }
    case Functional::Lambda: return lambda;
  }
  return 0.0;
}

bool admissible(Functional g, const DisplacementLaw& law) {
  if (g == Functional::Lambda) return std::isfinite(law.max_lambda());
  return true;
}

double ManyToOneResult::z() const {
  const double se = std::hypot(lhs.stderr_mean(), rhs.stderr_mean());
  const double d = lhs.mean() - rhs.mean();
  if (se == 0.0) return d == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), d);
  return d / se;
}

namespace {

double generation_lambda(const DisplacementLaw& law, Rng& rng, std::vector<double>& scratch) {
  scratch.clear();
  law.sample_generation(rng, scratch);
  double s = 0.0;
  for (double a : scratch) s += std::exp(-a);
  return s;
}

// Adds sum_{|x|=n} g(path(x), Lambda(x)) for each g to acc.
void enumerate_generation(const DisplacementLaw& law, Rng& rng, std::uint32_t n, std::vector<double>& path,
                          std::span<const Functional> gs, std::vector<double>& acc, std::vector<double>& scratch) {
  const std::size_t d = path.size();
  if (d == n) {
    const double lambda = generation_lambda(law, rng, scratch);
    for (std::size_t j = 0; j < gs.size(); ++j) acc[j] += evaluate(gs[j], path, lambda);
    return;
  }
  std::vector<double> kids;
  law.sample_generation(rng, kids);
  const double base = d == 0 ? 0.0 : path.back();
  for (double a : kids) {
    path.push_back(base + a);
    enumerate_generation(law, rng, n, path, gs, acc, scratch);
    path.pop_back();
  }
}

}  // namespace

std::vector<ManyToOneResult> many_to_one_check(const DisplacementLaw& law, std::uint32_t n,
                                               std::span<const Functional> gs, std::uint64_t samples,
                                               std::uint64_t seed, unsigned jobs, std::uint32_t inner_samples) {
  if (n < 1 || n > 6) throw DomainError("many_to_one_check: n must lie in [1, 6]");
  if (inner_samples < 1) throw DomainError("many_to_one_check: inner_samples must be >= 1");
  for (auto g : gs)
    if (!admissible(g, law))
      throw DomainError("many_to_one_check: functional '" + std::string(functional_name(g)) +
                        "' is unbounded for this family");
  const TiltedStepLaw tilt = tilted_law(law);
  const std::size_t chunks = (samples + kChunk - 1) / kChunk;
  const std::size_t ng = gs.size();
  std::vector<std::vector<stats::RunningStats>> lhs(chunks, std::vector<stats::RunningStats>(ng));
  std::vector<std::vector<stats::RunningStats>> rhs(chunks, std::vector<stats::RunningStats>(ng));

  for_chunks(samples, kChunk, jobs, [&](std::size_t c, std::size_t begin, std::size_t end) {
    Rng tree_rng(derive_seed(seed, c, "many-to-one/tree"));
    Rng spine_rng(derive_seed(seed, c, "many-to-one/spine"));
    std::vector<double> path, scratch, acc(ng), s(n);
    for (std::size_t t = begin; t < end; ++t) {
      std::fill(acc.begin(), acc.end(), 0.0);
      path.clear();
      enumerate_generation(law, tree_rng, n, path, gs, acc, scratch);
      for (std::size_t j = 0; j < ng; ++j) lhs[c][j].add(acc[j]);

      double x = 0.0;
      for (std::uint32_t i = 0; i < n; ++i) s[i] = x += tilt.sample(spine_rng);
      std::fill(acc.begin(), acc.end(), 0.0);
      for (std::uint32_t r = 0; r < inner_samples; ++r) {
        const double lambda = generation_lambda(law, spine_rng, scratch);
        for (std::size_t j = 0; j < ng; ++j) acc[j] += evaluate(gs[j], s, lambda);
      }
      const double w = std::exp(x) / inner_samples;
      for (std::size_t j = 0; j < ng; ++j) rhs[c][j].add(w * acc[j]);
    }
  });

  std::vector<ManyToOneResult> out(ng);
  for (std::size_t j = 0; j < ng; ++j) {
    out[j].g = gs[j];
    out[j].n = n;
    for (std::size_t c = 0; c < chunks; ++c) {
      out[j].lhs.merge(lhs[c][j]);
      out[j].rhs.merge(rhs[c][j]);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

void check_b_lambda(const DisplacementLaw& law, double b, double lambda) {
  if (!(b > 0.0 && b < law.certified_delta()))
    throw DomainError("b must lie in (0, delta) for the configured integrability delta");
  if (!(lambda > 0.0)) throw DomainError("lambda must be positive");
}

}  // namespace

StoppedSumEstimate stopped_drop_sum(const DisplacementLaw& law, double b, double lambda, std::uint64_t trials,
                                    std::uint64_t seed, unsigned jobs, std::uint64_t path_cap) {
  check_b_lambda(law, b, lambda);
  const TiltedStepLaw tilt = tilted_law(law);
  const std::size_t chunks = (trials + kChunk - 1) / kChunk;
  std::vector<stats::RunningStats> parts(chunks);
  std::vector<std::uint64_t> cut(chunks, 0);
  for_chunks(trials, kChunk, jobs, [&](std::size_t c, std::size_t begin, std::size_t end) {
    Rng rng(derive_seed(seed, c, "stopped-drop"));
    for (std::size_t t = begin; t < end; ++t) {
      double sum = std::exp(-b * lambda);  // l = 0: no drop yet
      double s = 0.0, top = -std::numeric_limits<double>::infinity();
      std::uint64_t l = 1;
      for (; l <= path_cap; ++l) {
        s += tilt.sample(rng);
        top = std::max(top, s);
        const double drop = top - s;
        if (drop > lambda) break;
        sum += std::exp(-b * (lambda - drop));
      }
      if (l > path_cap) ++cut[c];
      parts[c].add(sum);
    }
  });
  StoppedSumEstimate out;
  out.lambda = lambda;
  out.b = b;
  out.sum = merge_all(parts);
  for (auto x : cut) out.truncated += x;
  return out;
}

StoppedSumEstimate first_ladder_sum(const DisplacementLaw& law, double b, double lambda, std::uint64_t trials,
                                    std::uint64_t seed, unsigned jobs, std::uint64_t path_cap) {
  check_b_lambda(law, b, lambda);
  const TiltedStepLaw tilt = tilted_law(law);
  const std::size_t chunks = (trials + kChunk - 1) / kChunk;
  std::vector<stats::RunningStats> parts(chunks);
  std::vector<std::uint64_t> cut(chunks, 0);
  for_chunks(trials, kChunk, jobs, [&](std::size_t c, std::size_t begin, std::size_t end) {
    Rng rng(derive_seed(seed, c, "first-ladder"));
    for (std::size_t t = begin; t < end; ++t) {
      double sum = 1.0;  // l = 0
      double s = 0.0;
      std::uint64_t l = 1;
      for (; l <= path_cap; ++l) {
        s += tilt.sample(rng);
        if (s > 0.0 || s < -lambda) break;  // ladder epoch, or killed
        sum += std::exp(-b * s);
      }
      if (l > path_cap) ++cut[c];
      parts[c].add(sum);
    }
  });
  StoppedSumEstimate out;
  out.lambda = lambda;
  out.b = b;
  out.sum = merge_all(parts);
  for (auto x : cut) out.truncated += x;
  return out;
}

// ---------------------------------------------------------------------------

LambdaTail lambda_tail_check(const DisplacementLaw& law, std::uint64_t trials, std::uint64_t seed, double delta1,
                             std::span<const double> grid, unsigned jobs) {
  if (!law.is_calibrated()) throw DomainError("lambda_tail_check: law is not calibrated");
  if (!(delta1 > 0.0)) throw DomainError("lambda_tail_check: delta1 must be positive");
  static constexpr std::array<double, 10> kGrid{1.5, 2, 3, 4, 6, 8, 12, 16, 24, 32};
  LambdaTail out;
  out.delta1 = delta1;
  if (grid.empty())
    out.grid.assign(kGrid.begin(), kGrid.end());
  else
    out.grid.assign(grid.begin(), grid.end());

  const std::size_t chunks = (trials + kChunk - 1) / kChunk;
  std::vector<stats::RunningStats> parts(chunks);
  std::vector<std::vector<std::uint64_t>> above(chunks, std::vector<std::uint64_t>(out.grid.size(), 0));
  for_chunks(trials, kChunk, jobs, [&](std::size_t c, std::size_t begin, std::size_t end) {
    Rng rng(derive_seed(seed, c, "lambda-tail"));
    std::vector<double> scratch;
    for (std::size_t t = begin; t < end; ++t) {
      const double x = 1.0 + generation_lambda(law, rng, scratch);
      parts[c].add(std::pow(x, 1.0 + delta1));
      for (std::size_t j = 0; j < out.grid.size(); ++j)
        if (x > out.grid[j]) ++above[c][j];
    }
  });
  out.moment = merge_all(parts);
  for (std::size_t j = 0; j < out.grid.size(); ++j) {
    std::uint64_t k = 0;
    for (const auto& row : above) k += row[j];
    const double f = trials ? static_cast<double>(k) / static_cast<double>(trials) : 0.0;
    out.tail.push_back(f);
    out.scaled_tail.push_back(f * std::pow(out.grid[j], 1.0 + delta1));
  }
  out.analytic_moment = delta1 == 1.0 ? law.lambda_second_moment() : std::numeric_limits<double>::quiet_NaN();
  out.cutoff = 1.0 + law.max_lambda();
  return out;
}

}  // namespace brw
