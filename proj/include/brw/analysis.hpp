#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "brw/law.hpp"
#include "brw/stats.hpp"
#include "brw/tree.hpp"
#include "brw/walk.hpp"

namespace brw {

// ---------------------------------------------------------------------------
// Derivative martingale

struct DinfOptions {
  std::uint32_t depth = 30;
  std::uint32_t window = 5;
  /// Subtrees rooted at vertices with V above this level are not explored;
  /// their additive mass sum e^{-V} is reported instead. Use +inf for the
  /// exact value (the full generation grows like m^depth).
  double prune_level = 18.0;
};

struct DinfEstimate {
  double value = 0.0;  // D_depth (restricted to unpruned vertices)
  std::vector<double> trajectory;  // D_0 .. D_depth
  /// max |D_k - D_depth| / |D_depth| over the last `window` generations.
  double max_relative_change = std::numeric_limits<double>::infinity();
  bool survived = false;
  bool pre_asymptotic = false;  // depth < window, or depth == 0
  double pruned_mass = 0.0;
  std::uint64_t pruned_vertices = 0;
};

/// Throws ExtinctError when generation `depth` is empty.
DinfEstimate estimate_Dinf(MarkedTree& tree, const DinfOptions& options = {});

/// Exact sigma^2 of a calibrated law; throws DomainError if it is not in (0, inf).
double sigma2(const DisplacementLaw& law);

// ---------------------------------------------------------------------------
// Minimizers of U

struct UminOptions {
  double lambda_cap = std::exp(3.0) - 1.0;
  double v_margin = 0.5;
  double tie_tolerance = 1e-12;
};

struct UminResult {
  std::vector<VertexId> minimizers;  // sorted by Ulam-Harris address
  double min_value = std::numeric_limits<double>::infinity();
  double frontier_bound = std::numeric_limits<double>::infinity();
  double lambda_cap = 0.0;
  bool certified = false;
  std::uint64_t evaluated = 0;  // vertices whose U was computed
};

/// Best-first search by increasing V. Stops (certified) once the smallest
/// frontier V exceeds min U + log(1 + lambda_cap) + v_margin. An exhausted
/// arena yields the best-so-far answer with certified = false.
UminResult find_umin(MarkedTree& tree, const UminOptions& options = {});

struct RankedVertex {
  VertexId id = kNoVertex;
  double U = 0.0;
};

/// The k vertices of smallest U found by the same best-first search (ties
/// broken by address), ascending in U. `include_root` = false skips the root.
std::vector<RankedVertex> lowest_u_vertices(MarkedTree& tree, std::size_t k, bool include_root = true,
                                            const UminOptions& options = {});

// ---------------------------------------------------------------------------
// Environments conditioned on survival

struct EnvironmentOptions {
  std::uint32_t survival_depth = 30;
  std::uint32_t max_attempts = 1000;
  std::size_t arena_cap = kDefaultArenaCap;
};

/// Samples environments with seeds derive_seed(seed, attempt, tag) until one
/// survives to the configured depth. Returns the tree; `attempts` receives
/// the number of rejected environments. Throws ExtinctError after max_attempts.
MarkedTree surviving_environment(const DisplacementLaw& law, std::uint64_t seed, std::string_view tag,
                                 const EnvironmentOptions& options, std::uint32_t* attempts = nullptr);

// ---------------------------------------------------------------------------
// Excursion-normalized local times

struct ExcursionTally {
  VertexId vertex = kNoVertex;
  std::string label;
  double U = 0.0;
  double expected = 0.0;  // e^{-(U(x) - U(root))}
  stats::RunningStats per_excursion;  // L during one excursion
  double z() const;
  bool pass(double sigmas = 4.0) const { return std::abs(z()) <= sigmas; }
};

/// Runs the walk through m excursions from the root and records, for each
/// target, the number of visits in each excursion.
std::vector<ExcursionTally> excursion_local_times(MarkedTree& tree, std::span<const VertexId> targets,
                                                  std::uint64_t m, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Local-time limit report

struct LocalTimeOptions {
  std::vector<std::uint64_t> n_grid{10'000, 100'000, 1'000'000};
  std::size_t vertex_budget = 5;
  std::uint32_t replicas = 10;
  std::uint64_t excursions = 100'000;
  DinfOptions dinf{};
  EnvironmentOptions env{};
  UminOptions umin{};
  unsigned jobs = 1;
};

struct LocalTimeRow {
  std::uint64_t n = 0;
  VertexId vertex = kNoVertex;
  std::string label;
  double U = 0.0;
  double measured_median = 0.0;  // median over replicas of L_n(x) log n / n
  double measured_mean = 0.0;
  double predicted = 0.0;  // sigma^2 / (4 D) e^{-U(x)}
  double ratio = 0.0;  // measured_median / predicted
};

struct LocalTimeReport {
  std::uint64_t environment_seed = 0;
  std::uint32_t rejected_environments = 0;
  double dinf = 0.0;
  double dinf_relative_change = 0.0;
  double sigma2 = 0.0;
  std::vector<LocalTimeRow> rows;  // sorted by n, then U
  std::vector<ExcursionTally> excursion;  // sorted by U
  std::vector<std::uint64_t> favorite_hits;  // per n: replicas with favorites within U_min
  std::uint32_t replicas = 0;
  bool umin_certified = false;
  /// Per vertex budget entry: does the median ratio move toward 1 as n grows?
  std::vector<bool> ratio_trend;
};

LocalTimeReport local_time_report(const DisplacementLaw& law, std::uint64_t seed, const LocalTimeOptions& options);

// ---------------------------------------------------------------------------
// Favorite-site concentration

struct FavoriteOptions {
  std::vector<std::uint64_t> n_grid{1'000, 1'000'000};
  std::uint32_t replicas = 200;
  double gamma = 1.5;  // barrier tracked along the way, horizon n
  EnvironmentOptions env{};
  UminOptions umin{};
  unsigned jobs = 1;
};

struct FavoriteRow {
  std::uint64_t n = 0;
  std::uint32_t replicas = 0;
  std::uint32_t excluded = 0;  // uncertified U_min
  std::uint32_t hits = 0;  // favorites within U_min
  std::uint32_t audit_failures = 0;
  stats::Interval ci{};
  double frequency() const { return replicas > excluded ? double(hits) / double(replicas - excluded) : 0.0; }
};

struct FavoriteReplica {
  std::uint64_t n = 0;
  std::uint32_t replica = 0;
  std::uint64_t seed = 0;
  bool certified = false;
  bool within_umin = false;
  bool audit_ok = false;
  WalkSummary walk{};
  bool barrier_hit = false;
};

struct FavoriteReport {
  std::vector<FavoriteRow> rows;
  std::vector<FavoriteReplica> replicas;  // sorted by (n, replica)
  /// One-sided p-value for frequency(last n) > frequency(first n).
  double increase_p = 1.0;
};

/// Independent (environment, walk) replicas for each n.
FavoriteReport favorite_frequency(const DisplacementLaw& law, std::uint64_t seed, const FavoriteOptions& options);

// ---------------------------------------------------------------------------
// Vertices far from the root, and barrier hits

struct FarVertexOptions {
  std::vector<double> eps_grid{0.3};
  std::vector<std::uint64_t> n_grid{10'000, 100'000, 1'000'000};
  std::uint32_t replicas = 100;
  double gamma = 1.5;
  EnvironmentOptions env{};
  unsigned jobs = 1;
};

struct FarVertexRow {
  double eps = 0.0;
  std::uint64_t n = 0;
  std::uint32_t replicas = 0;
  std::uint32_t events = 0;  // max_{U(x) >= log(8/eps^2)} L_n(x) >= eps n / log n
  std::uint32_t barrier_hits = 0;  // walk touched the first-crossing line by n
  double mean_far_max = 0.0;  // mean of the scaled far maximum
};

struct FarVertexReport {
  std::vector<FarVertexRow> rows;  // sorted by (eps, n)
  /// Per eps: one-sided trend p-value for an increase in the event frequency.
  std::vector<double> event_increase_p;
  /// One-sided trend p-value for an increase in the barrier-hit frequency.
  double barrier_increase_p = 1.0;
};

/// Threshold log(8 / eps^2) on U.
double far_threshold(double eps);
/// max of L_n(x) over visited x with U(x) >= threshold; 0 if there is none.
std::uint64_t far_vertex_max(MarkedTree& tree, const Walk& walk, double threshold);

FarVertexReport far_vertex_diagnostic(const DisplacementLaw& law, std::uint64_t seed,
                                      const FarVertexOptions& options);

// ---------------------------------------------------------------------------
// Sum of e^{-U} below the barrier line

struct BarrierSumOptions {
  /// Vertices with V above this level are not explored; their e^{-V} is
  /// reported as pruned mass.
  double v_cutoff = 12.0;
  std::uint32_t max_depth = 400;
};

struct BarrierSum {
  double value = 0.0;  // (1 / log n) sum e^{-U(x)}
  std::uint64_t vertices = 0;
  std::uint64_t pruned_vertices = 0;
  double pruned_mass = 0.0;
  bool partial = false;  // the arena ran out
};

/// Depth-first enumeration of {x : no vertex of ]root, x[ crosses the
/// barrier}. Requires gamma < 2.
BarrierSum barrier_sum(MarkedTree& tree, std::uint64_t n, double gamma, const BarrierSumOptions& options = {});

}  // namespace brw
