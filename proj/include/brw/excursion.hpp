#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "brw/rng.hpp"
#include "brw/tree.hpp"

namespace brw {

/// Exact one-dimensional quantities for the path from the root to `target`.
///
///   a     = P(T_x < T_root^+)       = omega(root, ghost) / sum_expV
///   1 - p = P_x(T_root < T_x^+)     = e^{U(x)} / sum_expV
///
/// with sum_expV = sum_{z in ]root, x]} e^{V(z)}. Everything is carried in
/// log form so deep vertices do not overflow.
struct PathStats {
  VertexId target = kNoVertex;
  double log_sum_expV = 0.0;
  double sum_expV = 0.0;  // may be +inf for very deep vertices
  double expU = 0.0;
  double w_root_ghost = 0.0;
  double a = 0.0;
  double p = 0.0;
  double one_minus_p = 0.0;

  /// a / (1 - p) = e^{-(U(x) - U(root))}.
  double mean() const { return a / one_minus_p; }
};

/// Requires x != root; expands the root and x if needed.
PathStats path_stats(MarkedTree& tree, VertexId x);

/// Law of the number of visits to a vertex during one excursion from the
/// root: P(xi = 0) = 1 - a, P(xi >= k) = a p^{k-1} for k >= 1.
struct ExcursionLaw {
  double a = 0.0;
  double p = 0.0;

  ExcursionLaw() = default;
  ExcursionLaw(double a, double p);
  static ExcursionLaw from(const PathStats& s) { return {s.a, s.p}; }

  double pmf(std::uint64_t k) const;
  /// P(xi >= k).
  double tail(std::uint64_t k) const;
  double mean() const { return a / (1.0 - p); }
};

/// One draw of xi.
std::uint64_t sample_excursion(const ExcursionLaw& law, Rng& rng);

/// sum_{i=1}^m xi_i via K ~ Binomial(m, a) positive excursions, each
/// contributing a geometric count with success probability 1 - p.
std::uint64_t sample_total_local_time(const ExcursionLaw& law, std::uint64_t m, Rng& rng);

struct SumTailBound {
  double bound = 0.0;
  bool precondition_ok = false;
};

/// 6 n a exp(-(1-p) eps n / 8), valid as a bound on
/// P(sum_{i<=n} xi_i >= ceil(eps n)) when 1 - p > 8a/eps.
SumTailBound sum_tail_bound(double a, double p, double eps, std::uint64_t n);

/// Probability that the walk started at `source`, after at least one step,
/// enters `target` before `taboo`. Solved by first-step analysis on the
/// finite prefix of the tree (dense LU). Unexpanded vertices reflect to
/// their parent; kGhost may appear in either set.
/// Throws DomainError if the system is singular or the prefix is too large.
double oracle_hitting(const MarkedTree& prefix, VertexId source, std::span<const VertexId> target,
                      std::span<const VertexId> taboo);

/// Largest prefix (vertices plus ghost) the dense oracle accepts.
inline constexpr std::size_t kOracleMaxStates = 1024;

/// CSV: vertex,depth,U,a,p,mean (labels are Ulam-Harris addresses).
void write_excursion_table(MarkedTree& tree, std::span<const VertexId> vertices, std::ostream& out,
                           std::string_view config_hash = "none");

}  // namespace brw
