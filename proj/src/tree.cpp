#include "brw/tree.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include "brw/error.hpp"

namespace brw {

namespace {

constexpr std::uint64_t kRootKey = 0x5DEECE66DULL;

std::uint64_t child_key(std::uint64_t parent_key, std::uint32_t index) {
  return mix64(parent_key ^ mix64(0xA24BAED4963EE407ULL + index));
}

double log_add_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a > b ? a + std::log1p(std::exp(b - a)) : b + std::log1p(std::exp(a - b));
}

}  // namespace

MarkedTree::MarkedTree(DisplacementLaw law, std::uint64_t seed, std::size_t arena_cap)
    : MarkedTree(std::optional<DisplacementLaw>(std::move(law)), seed, arena_cap) {}

MarkedTree::MarkedTree(std::optional<DisplacementLaw> law, std::uint64_t seed, std::size_t cap)
    : law_(std::move(law)), seed_(seed), cap_(std::max<std::size_t>(cap, 1)) {
  VertexRecord root;
  root.key = kRootKey;
  arena_.push_back(root);
}

MarkedTree MarkedTree::fixture(std::size_t arena_cap) {
  return MarkedTree(std::nullopt, 0, arena_cap);
}

const DisplacementLaw& MarkedTree::law() const {
  if (!law_) throw DomainError("fixture tree has no displacement law");
  return *law_;
}

ChildRange MarkedTree::expand(VertexId id) {
  if (arena_[id].expanded) return arena_[id].children();
  if (!law_) throw DomainError("cannot sample children of vertex " + label(id) + " in a fixture tree");
  Rng rng(derive_seed(seed_, arena_[id].key, "expand"));
  scratch_.clear();
  law_->sample_generation(rng, scratch_);
  return attach(id, scratch_);
}

ChildRange MarkedTree::expand_with(VertexId id, std::span<const double> displacements) {
  if (!contains(id)) throw DomainError("expand_with: no such vertex");
  if (arena_[id].expanded) throw DomainError("expand_with: vertex " + label(id) + " already expanded");
  std::vector<double> copy(displacements.begin(), displacements.end());
  return attach(id, copy);
}

ChildRange MarkedTree::attach(VertexId id, std::span<const double> disp) {
  const std::size_t n = disp.size();
  if (arena_.size() + n > cap_) {
    throw ResourceError("arena cap of " + std::to_string(cap_) + " vertices exceeded while expanding " +
                        label(id));
  }
  double lambda = 0.0;
  for (double a : disp) lambda += std::exp(-a);
  const double w_parent = 1.0 / (1.0 + lambda);

  VertexRecord& x = arena_[id];
  x.expanded = true;
  x.Lambda = lambda;
  x.w_parent = w_parent;
  x.U = x.V - std::log1p(lambda);
  x.first_child = static_cast<VertexId>(arena_.size());
  x.num_children = static_cast<std::uint32_t>(n);

  const VertexRecord parent = x;  // arena may reallocate below
  for (std::uint32_t i = 0; i < n; ++i) {
    VertexRecord c;
    c.parent = id;
    c.depth = parent.depth + 1;
    c.sibling_index = i;
    c.key = child_key(parent.key, i);
    c.V = parent.V + disp[i];
    c.w_in = std::exp(-disp[i]) * w_parent;
    c.log_cum_expV = log_add_exp(parent.log_cum_expV, c.V);
    arena_.push_back(c);
  }
  return arena_[id].children();
}

std::vector<std::uint32_t> MarkedTree::address(VertexId id) const {
  std::vector<std::uint32_t> path;
  for (VertexId v = id; v != root(); v = arena_[v].parent) path.push_back(arena_[v].sibling_index);
  std::reverse(path.begin(), path.end());
  return path;
}

std::string MarkedTree::label(VertexId id) const {
  if (id == kGhost) return "ghost";
  if (!contains(id)) return "?";
  if (id == root()) return "root";
  std::string s;
  for (auto i : address(id)) {
    if (!s.empty()) s += '.';
    s += std::to_string(i);
  }
  return s;
}

VertexId MarkedTree::locate(std::span<const std::uint32_t> addr) {
  VertexId v = root();
  for (auto i : addr) {
    const auto kids = expand(v);
    if (i >= kids.size()) return kNoVertex;
    v = kids[i];
  }
  return v;
}

VertexId MarkedTree::locate(const std::string& lbl) {
  if (lbl == "root") return root();
  std::vector<std::uint32_t> addr;
  std::size_t pos = 0;
  while (pos <= lbl.size()) {
    const auto dot = lbl.find('.', pos);
    const auto end = dot == std::string::npos ? lbl.size() : dot;
    std::uint32_t value = 0;
    const auto [ptr, ec] = std::from_chars(lbl.data() + pos, lbl.data() + end, value);
    if (ec != std::errc{} || ptr != lbl.data() + end) throw DomainError("bad vertex label '" + lbl + "'");
    addr.push_back(value);
    if (dot == std::string::npos) break;
    pos = dot + 1;
  }
  return locate(addr);
}

bool MarkedTree::root_extinct() {
  ensure_expanded(root());
  return arena_[root()].num_children == 0;
}

// ---------------------------------------------------------------------------

std::vector<VertexId> generation(MarkedTree& tree, std::uint32_t n) {
  std::vector<VertexId> cur{tree.root()};
  std::vector<VertexId> next;
  for (std::uint32_t d = 0; d < n && !cur.empty(); ++d) {
    next.clear();
    for (VertexId v : cur)
      for (VertexId c : tree.expand(v)) next.push_back(c);
    cur.swap(next);
  }
  return cur;
}

double derivative_martingale(MarkedTree& tree, std::uint32_t n) {
  double d = 0.0;
  for (VertexId v : generation(tree, n)) d += tree[v].V * std::exp(-tree[v].V);
  return d;
}

double resampled_next_derivative(MarkedTree& tree, std::uint32_t n, Rng& rng) {
  const auto& law = tree.law();
  std::vector<double> disp;
  double d = 0.0;
  for (VertexId v : generation(tree, n)) {
    disp.clear();
    law.sample_generation(rng, disp);
    const double base = tree[v].V;
    for (double a : disp) d += (base + a) * std::exp(-(base + a));
  }
  return d;
}

bool survives_to(MarkedTree& tree, std::uint32_t depth) {
  std::vector<VertexId> stack{tree.root()};
  while (!stack.empty()) {
    const VertexId v = stack.back();
    stack.pop_back();
    if (tree[v].depth == depth) return true;
    const auto kids = tree.expand(v);
    for (std::uint32_t i = kids.size(); i-- > 0;) stack.push_back(kids[i]);
  }
  return false;
}

// ---------------------------------------------------------------------------

namespace {

void put(std::ostream& out, double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  out << buf;
}

double parse_double(const std::string& s) {
  if (s == "nan" || s == "NaN" || s == "-nan") return std::numeric_limits<double>::quiet_NaN();
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw ConfigError("snapshot: bad number '" + s + "'");
    return v;
  } catch (const std::logic_error&) {
    throw ConfigError("snapshot: bad number '" + s + "'");
  }
}

bool close(double a, double b) {
  if (std::isnan(a) || std::isnan(b)) return std::isnan(a) && std::isnan(b);
  return std::abs(a - b) <= 1e-12 * std::max(1.0, std::abs(b));
}

}  // namespace

void write_snapshot(const MarkedTree& tree, std::ostream& out) {
  out << "# brw-tree-snapshot/1 vertices=" << tree.size() << '\n';
  out << "id,parent,depth,V,U,Lambda,w_parent\n";
  for (VertexId id = 0; id < tree.size(); ++id) {
    const auto& r = tree[id];
    out << id << ',' << (id == tree.root() ? std::string("-1") : std::to_string(r.parent)) << ',' << r.depth
        << ',';
    put(out, r.V);
    out << ',';
    put(out, r.U);
    out << ',';
    put(out, r.Lambda);
    out << ',';
    put(out, r.w_parent);
    out << '\n';
  }
}

MarkedTree read_snapshot(std::istream& in) {
  struct Row {
    long long id, parent;
    std::uint32_t depth;
    double V, U, Lambda, w_parent;
  };
  std::vector<Row> rows;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header_seen) {
      if (line != "id,parent,depth,V,U,Lambda,w_parent") throw ConfigError("snapshot: unexpected header '" + line + "'");
      header_seen = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 7) throw ConfigError("snapshot: expected 7 fields in '" + line + "'");
    try {
      rows.push_back({std::stoll(f[0]), std::stoll(f[1]), static_cast<std::uint32_t>(std::stoul(f[2])),
                      parse_double(f[3]), parse_double(f[4]), parse_double(f[5]), parse_double(f[6])});
    } catch (const std::logic_error&) {
      throw ConfigError("snapshot: bad integer field in '" + line + "'");
    }
  }
  if (rows.empty()) throw ConfigError("snapshot: no vertices");
  if (rows[0].parent != -1) throw ConfigError("snapshot: first row must be the root");

  std::map<long long, std::size_t> row_of;
  std::map<long long, std::vector<std::size_t>> kids;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (!row_of.emplace(rows[i].id, i).second) throw ConfigError("snapshot: duplicate id");
    if (i > 0) kids[rows[i].parent].push_back(i);
  }

  // Replay expansions in the order their children were allocated.
  std::vector<std::size_t> expanded;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (!std::isnan(rows[i].w_parent)) expanded.push_back(i);
  auto first_child_id = [&](std::size_t i) {
    auto it = kids.find(rows[i].id);
    return it == kids.end() ? rows[i].id : rows[it->second.front()].id;
  };
  std::stable_sort(expanded.begin(), expanded.end(),
                   [&](std::size_t a, std::size_t b) { return first_child_id(a) < first_child_id(b); });

  MarkedTree tree = MarkedTree::fixture(std::max<std::size_t>(kDefaultArenaCap, rows.size()));
  std::map<long long, VertexId> new_id{{rows[0].id, tree.root()}};
  for (std::size_t i : expanded) {
    auto it = new_id.find(rows[i].id);
    if (it == new_id.end()) throw ConfigError("snapshot: vertex expanded before its parent");
    std::vector<double> disp;
    std::vector<std::size_t> children;
    if (auto k = kids.find(rows[i].id); k != kids.end()) children = k->second;
    for (std::size_t c : children) disp.push_back(rows[c].V - rows[i].V);
    const auto range = tree.expand_with(it->second, disp);
    for (std::uint32_t j = 0; j < children.size(); ++j) new_id[rows[children[j]].id] = range[j];
  }
  if (new_id.size() != rows.size()) throw ConfigError("snapshot: children listed under an unexpanded vertex");
  for (const auto& r : rows) {
    const auto& v = tree[new_id.at(r.id)];
    if (v.depth != r.depth || !close(v.V, r.V) || !close(v.U, r.U) || !close(v.Lambda, r.Lambda) ||
        !close(v.w_parent, r.w_parent))
      throw ConfigError("snapshot: stored fields of vertex " + std::to_string(r.id) +
                        " disagree with the potential");
  }
  return tree;
}

}  // namespace brw
