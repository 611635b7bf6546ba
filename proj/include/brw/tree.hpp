#pragma once

#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "brw/law.hpp"
#include "brw/rng.hpp"

namespace brw {

using VertexId = std::uint32_t;

inline constexpr VertexId kNoVertex = std::numeric_limits<VertexId>::max();
/// The parent of the root. Not a vertex of the tree.
inline constexpr VertexId kGhost = kNoVertex - 1;
inline constexpr std::size_t kDefaultArenaCap = std::size_t{1} << 26;

/// Contiguous run of sibling ids.
struct ChildRange {
  VertexId first = kNoVertex;
  std::uint32_t count = 0;

  struct iterator {
    VertexId id;
    VertexId operator*() const { return id; }
    iterator& operator++() {
      ++id;
      return *this;
    }
    bool operator==(const iterator&) const = default;
  };
  iterator begin() const { return {first}; }
  iterator end() const { return {first + count}; }
  std::uint32_t size() const { return count; }
  bool empty() const { return count == 0; }
  VertexId operator[](std::uint32_t i) const { return first + i; }
};

/// One vertex of the marked tree. Fields that depend on the vertex's own
/// children (U, Lambda, w_parent) are NaN until the vertex is expanded.
struct VertexRecord {
  VertexId parent = kNoVertex;
  std::uint32_t depth = 0;
  VertexId first_child = kNoVertex;
  std::uint32_t num_children = 0;
  std::uint32_t sibling_index = 0;
  bool expanded = false;
  std::uint64_t key = 0;
  double V = 0.0;
  double U = std::numeric_limits<double>::quiet_NaN();
  double Lambda = std::numeric_limits<double>::quiet_NaN();
  /// omega(x, parent(x)); for the root, omega(root, ghost).
  double w_parent = std::numeric_limits<double>::quiet_NaN();
  /// omega(parent(x), x); NaN for the root.
  double w_in = std::numeric_limits<double>::quiet_NaN();
  /// log of sum_{z in ]root, x]} e^{V(z)}; -inf at the root (empty sum).
  double log_cum_expV = -std::numeric_limits<double>::infinity();

  ChildRange children() const { return {first_child, num_children}; }
  double cum_expV() const { return std::exp(log_cum_expV); }
};

/// Lazily expanded Galton-Watson tree with i.i.d. environment. Vertices are
/// stored in a dense arena; children of a vertex occupy a contiguous run.
///
/// The offspring of a vertex are drawn from a generator keyed by the tree seed
/// and the vertex's address (its path of sibling indices), so the realized
/// environment does not depend on the order in which vertices are expanded.
/// Two trees with the same law and seed describe the same environment even if
/// their arena ids differ.
class MarkedTree {
 public:
  MarkedTree(DisplacementLaw law, std::uint64_t seed, std::size_t arena_cap = kDefaultArenaCap);

  /// A tree with no law: vertices are grown with expand_with only.
  static MarkedTree fixture(std::size_t arena_cap = kDefaultArenaCap);

  VertexId root() const noexcept { return 0; }
  std::size_t size() const noexcept { return arena_.size(); }
  std::size_t arena_cap() const noexcept { return cap_; }
  std::uint64_t seed() const noexcept { return seed_; }
  bool has_law() const noexcept { return law_.has_value(); }
  const DisplacementLaw& law() const;

  const VertexRecord& operator[](VertexId id) const { return arena_[id]; }
  bool contains(VertexId id) const noexcept { return id < arena_.size(); }

  /// Samples the children of `id` if not already done; idempotent.
  /// Throws ResourceError when the arena cap would be exceeded.
  ChildRange expand(VertexId id);
  /// Expands `id` with the given displacements (fixtures, snapshot import).
  /// Throws if `id` is already expanded.
  ChildRange expand_with(VertexId id, std::span<const double> displacements);
  void ensure_expanded(VertexId id) {
    if (!arena_[id].expanded) expand(id);
  }

  /// Ulam-Harris address of a vertex (sibling indices from the root).
  std::vector<std::uint32_t> address(VertexId id) const;
  /// "root" or e.g. "0.1.0".
  std::string label(VertexId id) const;
  /// Walks (and expands) along an address. Returns kNoVertex if the address
  /// leaves the tree.
  VertexId locate(std::span<const std::uint32_t> address);
  VertexId locate(const std::string& label);

  /// Root has no children: the walk has nowhere to go but the ghost.
  bool root_extinct();

 private:
  MarkedTree(std::optional<DisplacementLaw> law, std::uint64_t seed, std::size_t cap);
  ChildRange attach(VertexId id, std::span<const double> displacements);

  std::optional<DisplacementLaw> law_;
  std::uint64_t seed_ = 0;
  std::size_t cap_ = kDefaultArenaCap;
  std::vector<VertexRecord> arena_;
  std::vector<double> scratch_;
};

/// All vertices of generation n, expanding as needed (in arena order).
std::vector<VertexId> generation(MarkedTree& tree, std::uint32_t n);

/// D_n = sum_{|x|=n} V(x) e^{-V(x)}; 0 for an extinct generation.
double derivative_martingale(MarkedTree& tree, std::uint32_t n);

/// D_{n+1} for a fresh, independent resampling of generation n+1 below the
/// realized generation n. The tree itself is not modified.
double resampled_next_derivative(MarkedTree& tree, std::uint32_t n, Rng& rng);

/// True iff generation `depth` is non-empty (depth-first, stops at the first
/// vertex found).
bool survives_to(MarkedTree& tree, std::uint32_t depth);

/// Line-oriented snapshot: one vertex per line,
/// "id,parent,depth,V,U,Lambda,w_parent" (parent -1 for the root; NaN for
/// fields of unexpanded vertices).
void write_snapshot(const MarkedTree& tree, std::ostream& out);
/// Rebuilds a fixture tree from a snapshot, checking that the stored U,
/// Lambda and w_parent agree with the values implied by the potentials.
MarkedTree read_snapshot(std::istream& in);

}  // namespace brw
