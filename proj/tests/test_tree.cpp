#include <cmath>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"

#include "brw/error.hpp"
#include "brw/stats.hpp"
#include "brw/tree.hpp"

using namespace brw;
using namespace brw::testing;

namespace {

// Every stored field of an expanded vertex against a direct recomputation.
void check_invariants(const MarkedTree& t, VertexId x) {
  const auto& r = t[x];
  CAPTURE(t.label(x));
  if (x != t.root()) {
    CHECK(std::exp(r.log_cum_expV) == doctest::Approx(brute_sum_expV(t, x)).epsilon(1e-12));
    CHECK(r.depth == t[r.parent].depth + 1);
  }
  if (!r.expanded) return;
  double lam = 0.0;
  for (VertexId y : r.children()) lam += std::exp(-(t[y].V - r.V));
  CHECK(r.Lambda == doctest::Approx(lam).epsilon(1e-12));
  CHECK(r.w_parent == doctest::Approx(1.0 / (1.0 + lam)).epsilon(1e-12));
  CHECK(std::exp(-r.U) == doctest::Approx(brute_exp_minus_U(t, x)).epsilon(1e-12));
  double total = r.w_parent;
  for (VertexId y : r.children()) {
    CHECK(t[y].parent == x);
    CHECK(t[y].w_in == doctest::Approx(std::exp(-(t[y].V - r.V)) * r.w_parent).epsilon(1e-12));
    total += t[y].w_in;
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
}

}  // namespace

TEST_CASE("fixture displacements {-0.3, +0.9}: weights match the closed form") {
  MarkedTree t = MarkedTree::fixture();
  const double d[] = {-0.3, 0.9};
  const auto kids = t.expand_with(t.root(), d);
  const double denom = 1.0 + std::exp(0.3) + std::exp(-0.9);
  CHECK(t[t.root()].w_parent == doctest::Approx(1.0 / denom).epsilon(1e-12));
  CHECK(t[kids[0]].w_in == doctest::Approx(std::exp(0.3) / denom).epsilon(1e-12));
  CHECK(t[kids[1]].w_in == doctest::Approx(std::exp(-0.9) / denom).epsilon(1e-12));
  CHECK(t[kids[0]].V == doctest::Approx(-0.3));
  // e^{-U(root)} = 1 + Lambda(root)
  CHECK(std::exp(-t[t.root()].U) == doctest::Approx(1.0 + t[t.root()].Lambda).epsilon(1e-12));
  close_leaves(t);
  for (VertexId v = 0; v < t.size(); ++v) check_invariants(t, v);
}

TEST_CASE("a childless vertex has Lambda = 0 and U = V") {
  MarkedTree t = MarkedTree::fixture();
  const double d[] = {0.7};
  const auto kids = t.expand_with(t.root(), d);
  t.expand_with(kids[0], {});
  CHECK(t[kids[0]].Lambda == 0.0);
  CHECK(t[kids[0]].U == t[kids[0]].V);
  CHECK(t[kids[0]].w_parent == 1.0);
}

TEST_CASE("record invariants hold on sampled trees of every family") {
  for (const char* name : {"f1", "f2", "f3"}) {
    MarkedTree t(preset_law(name), 99);
    generation(t, 6);
    for (VertexId v = 0; v < t.size(); ++v) check_invariants(t, v);
  }
  MarkedTree f = random_fixture(5, 8, 3, -2.0, 3.0);
  for (VertexId v = 0; v < f.size(); ++v) check_invariants(f, v);
}

TEST_CASE("environment does not depend on expansion order") {
  const auto law = preset_law("f3");
  MarkedTree a(law, 4242), b(law, 4242);
  generation(a, 5);
  // b: expand a few deep addresses first, then breadth-first.
  for (VertexId v : generation(a, 5)) {
    const auto addr = a.address(v);
    const VertexId w = b.locate(addr);
    REQUIRE(w != kNoVertex);
    CHECK(b[w].V == a[v].V);
  }
  generation(b, 5);
  for (VertexId v : generation(a, 4)) {
    const VertexId w = b.locate(a.label(v));
    CHECK(b[w].U == a[v].U);
    CHECK(b[w].w_parent == a[v].w_parent);
  }
  MarkedTree c(law, 4243);
  generation(c, 3);
  bool differs = c.size() != a.size();
  for (VertexId v = 1; !differs && v < c.size(); ++v) differs = c[v].V != a[v].V;
  CHECK(differs);
}

TEST_CASE("labels and addresses") {
  MarkedTree t(preset_law("f1"), 1);
  CHECK(t.label(t.root()) == "root");
  CHECK(t.locate("root") == t.root());
  const VertexId v = t.locate("1.0.1");
  REQUIRE(v != kNoVertex);
  CHECK(t.label(v) == "1.0.1");
  CHECK(t[v].depth == 3);
  CHECK(t.locate("5") == kNoVertex);  // binary tree: no sixth child
}

TEST_CASE("snapshot round trip") {
  MarkedTree t = random_fixture(11, 6, 3, -1.0, 2.0);
  std::ostringstream out;
  write_snapshot(t, out);
  std::istringstream in(out.str());
  MarkedTree back = read_snapshot(in);
  REQUIRE(back.size() == t.size());
  for (VertexId v = 0; v < t.size(); ++v) {
    const VertexId w = back.locate(t.address(v));
    CHECK(back[w].V == doctest::Approx(t[v].V).epsilon(1e-12));
    CHECK(back[w].U == doctest::Approx(t[v].U).epsilon(1e-12));
  }
  std::istringstream bad("id,parent,depth,V,U,Lambda,w_parent\n0,-1,0,0,0,0,0.5\n");
  CHECK_THROWS_AS(read_snapshot(bad), ConfigError);
}

TEST_CASE("arena cap is enforced explicitly") {
  MarkedTree t(preset_law("f1"), 3, 20);
  CHECK_THROWS_AS(generation(t, 6), ResourceError);
  MarkedTree f = MarkedTree::fixture();
  CHECK_THROWS_AS(f.expand(f.root()), DomainError);
}

TEST_CASE("derivative martingale: trivial generation and exact sums") {
  MarkedTree t(preset_law("f1"), 8);
  CHECK(derivative_martingale(t, 0) == 0.0);
  double direct = 0.0;
  for (VertexId v : generation(t, 4)) direct += t[v].V * std::exp(-t[v].V);
  CHECK(derivative_martingale(t, 4) == doctest::Approx(direct).epsilon(1e-12));
}

TEST_CASE("D_n has mean zero over independent trees") {
  const auto law = preset_law("f2");
  stats::RunningStats s;
  for (std::uint64_t i = 0; i < 20'000; ++i) {
    MarkedTree t(law, derive_seed(77, i, "test/dn"));
    s.add(derivative_martingale(t, 4));
  }
  CHECK(std::abs(s.mean()) <= 4.0 * s.stderr_mean());
}

TEST_CASE("resampled D_{n+1} averages to D_n on a fixed tree") {
  std::uint64_t seed = 31;
  for (;; ++seed) {
    MarkedTree probe(preset_law("f3"), seed);
    if (survives_to(probe, 4)) break;
  }
  MarkedTree t(preset_law("f3"), seed);
  const double dn = derivative_martingale(t, 4);
  Rng rng(5);
  stats::RunningStats s;
  for (int i = 0; i < 10'000; ++i) s.add(resampled_next_derivative(t, 4, rng));
  CHECK(std::abs(s.mean() - dn) <= 4.0 * s.stderr_mean());
}

TEST_CASE("survival: trivial depths and the binary family") {
  MarkedTree t(preset_law("f1"), 2);
  CHECK(survives_to(t, 0));
  for (std::uint32_t d : {1u, 5u, 40u}) CHECK(survives_to(t, d));
}

TEST_CASE("Poisson survival frequency matches the generating-function iteration") {
  const auto law = preset_law("f3");
  const double mu = law.offspring().mean;
  double s = 0.0;  // P(Z_k = 0), iterated k = 30 times
  for (int k = 0; k < 30; ++k) s = std::exp(mu * (s - 1.0));
  const double expected = 1.0 - s;
  const int trials = 5000;
  int alive = 0;
  for (int i = 0; i < trials; ++i) {
    MarkedTree t(law, derive_seed(123, i, "test/survival"));
    alive += survives_to(t, 30);
  }
  const double freq = double(alive) / trials;
  const double se = std::sqrt(expected * (1 - expected) / trials);
  CHECK(std::abs(freq - expected) <= 3.0 * se);
}
