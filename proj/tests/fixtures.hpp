#pragma once

// Helpers shared by the unit tests: hand-built trees and brute-force
// recomputations that do not go through the library's incremental fields.

#include <cmath>
#include <vector>

#include "brw/rng.hpp"
#include "brw/tree.hpp"

namespace brw::testing {

/// Marks every unexpanded vertex as a leaf so the fixture is a closed finite tree.
inline void close_leaves(MarkedTree& t) {
  for (VertexId v = 0; v < t.size(); ++v)
    if (!t[v].expanded) t.expand_with(v, {});
}

/// Random finite tree: each vertex at depth < max_depth gets 0..max_children
/// children with displacements uniform on [lo, hi]. Along `spine_len` the
/// first child always exists, so the tree contains a path of that length.
inline MarkedTree random_fixture(std::uint64_t seed, std::uint32_t max_depth, std::uint32_t max_children,
                                 double lo, double hi, std::uint32_t spine_len = 0) {
  MarkedTree t = MarkedTree::fixture();
  Rng rng(seed);
  std::vector<VertexId> stack{t.root()};
  std::vector<bool> on_spine{true};
  while (!stack.empty()) {
    const VertexId v = stack.back();
    stack.pop_back();
    const bool spine = on_spine.back();
    on_spine.pop_back();
    if (t[v].depth >= max_depth) continue;
    std::uint32_t k = static_cast<std::uint32_t>(rng() % (max_children + 1));
    if (spine && t[v].depth < spine_len) k = std::max<std::uint32_t>(k, 1);
    if (k == 0) continue;
    std::vector<double> d(k);
    for (auto& x : d) x = lo + (hi - lo) * rng.uniform();
    const auto kids = t.expand_with(v, d);
    for (std::uint32_t i = 0; i < k; ++i) {
      stack.push_back(kids[i]);
      on_spine.push_back(spine && i == 0);
    }
  }
  close_leaves(t);
  return t;
}

/// Path from the root (exclusive) to x (inclusive).
inline std::vector<VertexId> path_to(const MarkedTree& t, VertexId x) {
  std::vector<VertexId> p;
  for (VertexId v = x; v != t.root(); v = t[v].parent) p.push_back(v);
  return {p.rbegin(), p.rend()};
}

/// sum_{z in ]root, x]} e^{V(z)}, recomputed directly.
inline double brute_sum_expV(const MarkedTree& t, VertexId x) {
  double s = 0.0;
  for (VertexId z : path_to(t, x)) s += std::exp(t[z].V);
  return s;
}

/// e^{-U(x)} = e^{-V(x)} (1 + sum over children of e^{-(V(y) - V(x))}).
inline double brute_exp_minus_U(const MarkedTree& t, VertexId x) {
  double lam = 0.0;
  for (VertexId y : t[x].children()) lam += std::exp(-(t[y].V - t[x].V));
  return std::exp(-t[x].V) * (1.0 + lam);
}

}  // namespace brw::testing
