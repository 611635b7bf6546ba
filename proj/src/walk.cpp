#include "brw/walk.hpp"

#include <algorithm>
#include <cmath>

namespace brw {

BarrierConfig::BarrierConfig(double g, std::uint64_t n) : gamma(g), horizon(n) {
  if (n < 2) throw DomainError("barrier horizon must be >= 2");
}

double BarrierConfig::log_threshold() const {
  const double ln = std::log(static_cast<double>(horizon));
  return ln - gamma * std::log(ln);
}

bool barrier_crossed(const MarkedTree& tree, VertexId x, const BarrierConfig& cfg) {
  if (x == tree.root()) return false;
  const auto& r = tree[x];
  return r.log_cum_expV - r.V > cfg.log_threshold();
}

bool below_barrier(const MarkedTree& tree, VertexId x, const BarrierConfig& cfg) {
  if (x == tree.root()) return true;
  for (VertexId y = tree[x].parent; y != tree.root(); y = tree[y].parent)
    if (barrier_crossed(tree, y, cfg)) return false;
  return true;
}

// ---------------------------------------------------------------------------

Walk::Walk(std::uint64_t seed, WalkOptions options)
    : options_(options), rng_(seed), position_(0) {}

std::size_t Walk::track_barrier(const BarrierConfig& cfg) {
  barriers_.push_back(cfg);
  barrier_log_threshold_.push_back(cfg.log_threshold());
  barrier_time_.push_back(0);
  return barriers_.size() - 1;
}

VertexId Walk::step(MarkedTree& tree) {
  const VertexId next = position_ == kGhost ? tree.root() : sample_next(tree, position_);
  ++steps_;
  if (next == kGhost)
    ++ghost_visits_;
  else
    record_arrival(tree, next);
  position_ = next;
  return next;
}

VertexId Walk::sample_next(MarkedTree& tree, VertexId x) {
  tree.ensure_expanded(x);
  const VertexRecord& r = tree[x];
  if (x == tree.root() && r.num_children == 0)
    throw ExtinctError("environment is extinct at the root (no children)");
  const VertexId up = x == tree.root() ? kGhost : r.parent;
  if (r.num_children == 0) return up;

  std::uint32_t slot = x < alias_slot_.size() ? alias_slot_[x] : 0;
  if (slot == 0 && local_time(x) >= options_.alias_threshold) {
    build_alias(tree, x);
    slot = alias_slot_[x];
  }
  if (slot != 0) {
    const AliasTable& t = alias_tables_[slot - 1];
    const double u = rng_.uniform() * t.size;
    auto i = static_cast<std::uint32_t>(u);
    if (i >= t.size) i = t.size - 1;
    if (u - i >= alias_prob_[t.offset + i]) i = alias_index_[t.offset + i];
    return i == 0 ? up : r.first_child + (i - 1);
  }

  double u = rng_.uniform();
  if (u < r.w_parent) return up;
  u -= r.w_parent;
  const VertexId last = r.first_child + r.num_children - 1;
  for (VertexId c = r.first_child; c < last; ++c) {
    const double w = tree[c].w_in;
    if (u < w) return c;
    u -= w;
  }
  return last;
}

void Walk::build_alias(const MarkedTree& tree, VertexId x) {
  const VertexRecord& r = tree[x];
  const std::uint32_t n = r.num_children + 1;
  std::vector<double> scaled(n);
  scaled[0] = r.w_parent * n;
  for (std::uint32_t i = 0; i < r.num_children; ++i) scaled[i + 1] = tree[r.first_child + i].w_in * n;

  AliasTable t{static_cast<std::uint32_t>(alias_prob_.size()), n};
  alias_prob_.resize(alias_prob_.size() + n, 1.0);
  alias_index_.resize(alias_index_.size() + n);
  for (std::uint32_t i = 0; i < n; ++i) alias_index_[t.offset + i] = i;

  std::vector<std::uint32_t> small, large;
  for (std::uint32_t i = 0; i < n; ++i) (scaled[i] < 1.0 ? small : large).push_back(i);
  while (!small.empty() && !large.empty()) {
    const auto s = small.back();
    small.pop_back();
    const auto l = large.back();
    alias_prob_[t.offset + s] = scaled[s];
    alias_index_[t.offset + s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  // Leftovers are 1 up to rounding.
  for (auto i : large) alias_prob_[t.offset + i] = 1.0;
  for (auto i : small) alias_prob_[t.offset + i] = 1.0;

  if (x >= alias_slot_.size()) alias_slot_.resize(std::max<std::size_t>(x + 1, 2 * alias_slot_.size()), 0);
  alias_tables_.push_back(t);
  alias_slot_[x] = static_cast<std::uint32_t>(alias_tables_.size());
}

void Walk::record_arrival(const MarkedTree& tree, VertexId y) {
  if (y >= local_time_.size())
    local_time_.resize(std::max<std::size_t>({y + 1, 2 * local_time_.size(), 1024}), 0);
  const std::uint64_t c = ++local_time_[y];
  if (c > max_count_) {
    max_count_ = c;
    favorites_.assign(1, y);
  } else if (c == max_count_) {
    favorites_.push_back(y);
  }
  if (y == tree.root()) root_returns_.push_back(steps_);
  const VertexRecord& r = tree[y];
  max_depth_ = std::max(max_depth_, r.depth);
  if (c == 1) {
    visited_.push_back(y);
    if (y != tree.root()) {
      const double ratio = r.log_cum_expV - r.V;
      for (std::size_t i = 0; i < barriers_.size(); ++i)
        if (barrier_time_[i] == 0 && ratio > barrier_log_threshold_[i]) barrier_time_[i] = steps_;
    }
  }
}

void Walk::run(MarkedTree& tree, std::uint64_t n_steps) {
  if (n_steps == 0) throw DomainError("run: n_steps must be >= 1");
  try {
    for (std::uint64_t i = 0; i < n_steps; ++i) step(tree);
  } catch (const ExtinctError&) {
    throw;
  } catch (const ResourceError& e) {
    throw WalkInterrupted(e.what(), summary());
  }
}

void Walk::run_until_returns(MarkedTree& tree, std::uint64_t m) {
  if (m == 0) throw DomainError("run_until_returns: m must be >= 1");
  try {
    while (root_returns_.size() < m) step(tree);
  } catch (const ExtinctError&) {
    throw;
  } catch (const ResourceError& e) {
    throw WalkInterrupted(e.what(), summary());
  }
}

WalkSummary Walk::summary() const {
  return {steps_, root_returns_.size(), max_count_, favorites_.size(), max_depth_};
}

std::vector<VertexId> rescan_favorites(const Walk& walk) {
  std::uint64_t best = 0;
  for (VertexId v : walk.visited()) best = std::max(best, walk.local_time(v));
  std::vector<VertexId> out;
  if (best == 0) return out;
  for (VertexId v : walk.visited())
    if (walk.local_time(v) == best) out.push_back(v);
  std::sort(out.begin(), out.end());
  return out;
}

bool favorites_consistent(const Walk& walk) {
  auto maintained = walk.favorites();
  std::sort(maintained.begin(), maintained.end());
  const auto scanned = rescan_favorites(walk);
  const std::uint64_t best = scanned.empty() ? 0 : walk.local_time(scanned.front());
  return maintained == scanned && best == walk.max_count();
}

}  // namespace brw
