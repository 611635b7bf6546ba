#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "brw/error.hpp"
#include "brw/rng.hpp"
#include "brw/tree.hpp"

namespace brw {

/// Barrier line at level horizon / (log horizon)^gamma.
struct BarrierConfig {
  double gamma = 1.5;
  std::uint64_t horizon = 2;

  BarrierConfig() = default;
  BarrierConfig(double gamma, std::uint64_t horizon);

  /// log of horizon / (log horizon)^gamma.
  double log_threshold() const;
};

/// True iff sum_{z in ]root, x]} e^{V(z) - V(x)} exceeds the barrier level.
/// The root never crosses (the sum is empty).
bool barrier_crossed(const MarkedTree& tree, VertexId x, const BarrierConfig& cfg);

/// True iff no vertex of ]root, x[ crosses, i.e. x lies on or below the
/// first-crossing line.
bool below_barrier(const MarkedTree& tree, VertexId x, const BarrierConfig& cfg);

struct WalkOptions {
  /// Visits after which a vertex gets an alias table.
  std::uint64_t alias_threshold = 64;
};

struct WalkSummary {
  std::uint64_t steps = 0;
  std::uint64_t root_local_time = 0;
  std::uint64_t max_count = 0;
  std::size_t favorites = 0;
  std::uint32_t max_depth = 0;
};

/// Thrown when the arena runs out mid-run; carries the statistics so far.
class WalkInterrupted : public ResourceError {
 public:
  WalkInterrupted(const std::string& what, WalkSummary partial)
      : ResourceError(what), partial_(partial) {}
  const WalkSummary& partial() const noexcept { return partial_; }

 private:
  WalkSummary partial_;
};

/// Quenched biased walk on a marked tree, started at the root. Local times
/// count visits at times 1..n; visits to the ghost are counted separately.
class Walk {
 public:
  explicit Walk(std::uint64_t seed, WalkOptions options = {});

  /// One transition; expands the current vertex on demand.
  VertexId step(MarkedTree& tree);
  /// Exactly n_steps transitions (n_steps >= 1).
  void run(MarkedTree& tree, std::uint64_t n_steps);
  /// Runs until the m-th return to the root (m >= 1).
  void run_until_returns(MarkedTree& tree, std::uint64_t m);

  /// Records the first time the walk stands on a crossing vertex.
  /// Returns the index used by barrier_hit / barrier_hit_time.
  std::size_t track_barrier(const BarrierConfig& cfg);
  bool barrier_hit(std::size_t index = 0) const { return barrier_time_.at(index) != 0; }
  std::uint64_t barrier_hit_time(std::size_t index = 0) const { return barrier_time_.at(index); }

  VertexId position() const noexcept { return position_; }
  std::uint64_t steps() const noexcept { return steps_; }
  std::uint64_t local_time(VertexId x) const noexcept {
    return x < local_time_.size() ? local_time_[x] : 0;
  }
  std::uint64_t ghost_visits() const noexcept { return ghost_visits_; }
  std::uint64_t max_count() const noexcept { return max_count_; }
  const std::vector<VertexId>& favorites() const noexcept { return favorites_; }
  const std::vector<std::uint64_t>& root_returns() const noexcept { return root_returns_; }
  std::uint32_t max_depth() const noexcept { return max_depth_; }
  /// Vertices with positive local time, in order of first visit.
  const std::vector<VertexId>& visited() const noexcept { return visited_; }

  WalkSummary summary() const;

 private:
  VertexId sample_next(MarkedTree& tree, VertexId x);
  void build_alias(const MarkedTree& tree, VertexId x);
  void record_arrival(const MarkedTree& tree, VertexId y);

  struct AliasTable {
    std::uint32_t offset = 0;  // into alias_prob_/alias_index_
    std::uint32_t size = 0;
  };

  WalkOptions options_;
  Rng rng_;
  VertexId position_;
  std::uint64_t steps_ = 0;
  std::vector<std::uint64_t> local_time_;
  std::uint64_t ghost_visits_ = 0;
  std::uint64_t max_count_ = 0;
  std::vector<VertexId> favorites_;
  std::vector<std::uint64_t> root_returns_;
  std::uint32_t max_depth_ = 0;
  std::vector<VertexId> visited_;

  std::vector<BarrierConfig> barriers_;
  std::vector<double> barrier_log_threshold_;
  std::vector<std::uint64_t> barrier_time_;

  std::vector<std::uint32_t> alias_slot_;  // 0 = none, else table index + 1
  std::vector<AliasTable> alias_tables_;
  std::vector<double> alias_prob_;
  std::vector<std::uint32_t> alias_index_;
};

/// Full rescan of the local-time table: the exact argmax set, sorted.
std::vector<VertexId> rescan_favorites(const Walk& walk);
/// True iff the maintained favorite set equals the rescanned argmax set.
bool favorites_consistent(const Walk& walk);

}  // namespace brw
