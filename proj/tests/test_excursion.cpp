#include <cmath>

#include "doctest.h"
#include "fixtures.hpp"

#include "brw/error.hpp"
#include "brw/excursion.hpp"
#include "brw/stats.hpp"
#include "brw/walk.hpp"

using namespace brw;
using namespace brw::testing;

TEST_CASE("path_stats: root is rejected, generation one reduces to the edge weight") {
  MarkedTree t(preset_law("f1"), 3);
  CHECK_THROWS_AS(path_stats(t, t.root()), DomainError);
  t.ensure_expanded(t.root());
  for (VertexId y : t[t.root()].children()) {
    const auto s = path_stats(t, y);
    CHECK(s.a == doctest::Approx(t[y].w_in).epsilon(1e-12));
  }
}

TEST_CASE("path_stats identities: a * sum = w(root, ghost), (1 - p) * sum = e^U") {
  MarkedTree t(preset_law("f3"), 8);
  generation(t, 5);
  const double w0 = t[t.root()].w_parent;
  const std::size_t n = t.size();  // path_stats expands targets; do not chase new vertices
  for (VertexId v = 1; v < n; ++v) {
    const auto s = path_stats(t, v);
    const double sum = brute_sum_expV(t, v);
    CHECK(s.a * sum == doctest::Approx(w0).epsilon(1e-12));
    CHECK(s.one_minus_p * sum == doctest::Approx(std::exp(t[v].U)).epsilon(1e-12));
    CHECK(s.mean() == doctest::Approx(std::exp(-(t[v].U - t[t.root()].U))).epsilon(1e-12));
  }
}

TEST_CASE("oracle: adjacent target with two states returns the transition weight") {
  MarkedTree t = MarkedTree::fixture();
  const double d[] = {0.4};
  const VertexId x = t.expand_with(t.root(), d)[0];
  t.expand_with(x, {});
  const VertexId target[] = {x};
  const VertexId taboo[] = {kGhost};
  CHECK(oracle_hitting(t, t.root(), target, taboo) == doctest::Approx(t[x].w_in).epsilon(1e-14));
}

TEST_CASE("oracle: three-state chain against the hand-solved birth-death formula") {
  // ghost - root - x1 - x2 (leaf). h(root) = P_root(hit x2 before the ghost).
  MarkedTree t = MarkedTree::fixture();
  const double d1[] = {-0.5}, d2[] = {0.8};
  const VertexId x1 = t.expand_with(t.root(), d1)[0];
  const VertexId x2 = t.expand_with(x1, d2)[0];
  t.expand_with(x2, {});
  // Weights by hand from the displacements.
  const double r = std::exp(0.5) / (1.0 + std::exp(0.5));  // root -> x1
  const double up = 1.0 / (1.0 + std::exp(-0.8));  // x1 -> root
  const double c = 1.0 - up;  // x1 -> x2
  // h(root) = r h(x1), h(x1) = up h(root) + c.
  const double h_root = r * c / (1.0 - r * up);
  const VertexId target[] = {x2};
  const VertexId taboo[] = {kGhost};
  CHECK(oracle_hitting(t, t.root(), target, taboo) == doctest::Approx(h_root).epsilon(1e-13));
  // From x1 back to the root before x2: exactly the upward weight.
  const VertexId root_only[] = {t.root()};
  CHECK(oracle_hitting(t, x1, root_only, target) == doctest::Approx(up).epsilon(1e-13));
}

TEST_CASE("oracle agrees with the closed form on 100 random fixtures") {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    MarkedTree t = random_fixture(seed, 1 + seed % 12, 2, -1.5, 1.5, 1 + seed % 12);
    VertexId x = t.root();
    while (t[x].num_children) x = t[x].first_child;  // deepest first-child path
    REQUIRE(x != t.root());
    const auto s = path_stats(t, x);
    const VertexId xs[] = {x};
    const VertexId root[] = {t.root()};
    CHECK(oracle_hitting(t, t.root(), xs, root) == doctest::Approx(s.a).epsilon(1e-10));
    CHECK(oracle_hitting(t, x, root, xs) == doctest::Approx(s.one_minus_p).epsilon(1e-10));
  }
}

TEST_CASE("oracle input errors") {
  MarkedTree t = random_fixture(1, 3, 2, -1, 1, 3);
  const VertexId root[] = {t.root()};
  CHECK_THROWS_AS(oracle_hitting(t, t.root(), {}, root), DomainError);
  CHECK_THROWS_AS(oracle_hitting(t, t.root(), root, root), DomainError);
  MarkedTree big(preset_law("f1"), 1);
  generation(big, 10);
  CHECK_THROWS_AS(oracle_hitting(big, big.root(), root, {}), DomainError);
}

TEST_CASE("excursion law: pmf, tail and degenerate cases") {
  const ExcursionLaw law(0.2, 0.6);
  double mass = 0.0;
  for (std::uint64_t k = 0; k < 200; ++k) mass += law.pmf(k);
  CHECK(mass == doctest::Approx(1.0).epsilon(1e-12));
  for (std::uint64_t k = 1; k < 10; ++k) CHECK(law.tail(k) == doctest::Approx(0.2 * std::pow(0.6, k - 1)));
  CHECK(law.mean() == doctest::Approx(0.5));
  const ExcursionLaw none(0.0, 0.3);
  Rng rng(1);
  for (int i = 0; i < 1000; ++i) CHECK(sample_excursion(none, rng) == 0);
  CHECK(sample_total_local_time(none, 1000, rng) == 0);
  CHECK_THROWS_AS(ExcursionLaw(1.2, 0.1), DomainError);
  CHECK_THROWS_AS(ExcursionLaw(0.2, 1.0), DomainError);
}

TEST_CASE("single excursion tail a p^{k-1} at a = 0.2, p = 0.6") {
  const ExcursionLaw law(0.2, 0.6);
  Rng rng(2024);
  const int n = 1'000'000;
  std::vector<std::uint64_t> ge(12, 0);
  for (int i = 0; i < n; ++i) {
    const auto x = sample_excursion(law, rng);
    for (std::uint64_t k = 1; k <= std::min<std::uint64_t>(x, 11); ++k) ++ge[k];
  }
  for (std::uint64_t k = 1; k <= 10; ++k) {
    const double p = 0.2 * std::pow(0.6, double(k - 1));
    CHECK(std::abs(double(ge[k]) / n - p) <= 4.0 * std::sqrt(p * (1 - p) / n));
  }
}

TEST_CASE("summed sampler matches the m-fold convolution of the pmf") {
  const ExcursionLaw law(0.3, 0.5);
  const std::uint64_t m = 4;
  const std::size_t K = 60;
  std::vector<double> single(K), conv(K, 0.0);
  for (std::size_t k = 0; k < K; ++k) single[k] = law.pmf(k);
  conv[0] = 1.0;
  for (std::uint64_t i = 0; i < m; ++i) {
    std::vector<double> next(K, 0.0);
    for (std::size_t a = 0; a < K; ++a)
      for (std::size_t b = 0; a + b < K; ++b) next[a + b] += conv[a] * single[b];
    conv = next;
  }
  Rng rng(7);
  const int n = 500'000;
  std::vector<std::uint64_t> counts(K, 0);
  for (int i = 0; i < n; ++i) {
    const auto s = sample_total_local_time(law, m, rng);
    if (s < K) ++counts[s];
  }
  for (std::size_t k = 0; k < 12; ++k) {
    CAPTURE(k);
    CHECK(std::abs(double(counts[k]) / n - conv[k]) <= 4.0 * std::sqrt(conv[k] * (1 - conv[k]) / n));
  }
}

TEST_CASE("fast sampler and step simulation agree in distribution on a fixture vertex") {
  MarkedTree t(preset_law("f1"), 15);
  const VertexId x = t.locate("0.1");
  const auto law = ExcursionLaw::from(path_stats(t, x));
  const std::uint64_t m = 20;
  const int reps = 3000;
  std::vector<double> stepped, fast;
  Walk w(16);
  Rng rng(17);
  for (int r = 0; r < reps; ++r) {
    const std::uint64_t before = w.local_time(x);
    w.run_until_returns(t, (r + 1) * m);
    stepped.push_back(double(w.local_time(x) - before));
    fast.push_back(double(sample_total_local_time(law, m, rng)));
  }
  CHECK(stats::ks_two_sample(stepped, fast).p_value > 0.01);
}

TEST_CASE("tail bound: values, precondition boundary and domain") {
  const auto zero = sum_tail_bound(0.0, 0.5, 0.5, 100);
  CHECK(zero.bound == 0.0);
  CHECK(zero.precondition_ok);
  // 1 - p = 8a / eps exactly: 0.25 = 8 * (1/64) / 0.5
  CHECK_FALSE(sum_tail_bound(1.0 / 64, 0.75, 0.5, 100).precondition_ok);
  CHECK(sum_tail_bound(1.0 / 64, 0.7, 0.5, 100).precondition_ok);
  const auto b = sum_tail_bound(0.01, 0.3, 0.5, 200);
  CHECK(b.bound == doctest::Approx(6 * 200 * 0.01 * std::exp(-0.7 * 0.5 * 200 / 8)).epsilon(1e-14));
  CHECK_THROWS_AS(sum_tail_bound(0.01, 0.0, 0.5, 10), DomainError);
  CHECK_THROWS_AS(sum_tail_bound(0.01, 0.3, 1.0, 10), DomainError);
  CHECK_THROWS_AS(sum_tail_bound(0.01, 0.3, 0.5, 0), DomainError);
}
