// Acceptance suite: one PASS/FAIL line per criterion, each with the
// tolerance and time budget it is held to. Exit status is 0 iff every line
// passes.

#include <chrono>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.hpp"

#include "brw/analysis.hpp"
#include "brw/cli.hpp"
#include "brw/excursion.hpp"
#include "brw/parallel.hpp"
#include "brw/spine.hpp"
#include "brw/stats.hpp"

using namespace brw;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kSeed = 20240601;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  std::string name;
  double budget_seconds;
  std::function<Outcome()> run;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

unsigned jobs() { return default_jobs(); }

// ---------------------------------------------------------------------------

Outcome calibration() {
  Outcome o{true, ""};
  for (const char* name : {"f1", "f2", "f3"}) {
    const auto law = preset_law(name);
    const bool ok = std::abs(law.mass_residual()) <= 1e-10 && std::abs(law.drift_residual()) <= 1e-10 &&
                    law.sigma2() > 0.0;
    o.pass = o.pass && ok;
    o.detail += fmt("%s: mass %.1e drift %.1e sigma2 %.4f; ", name, law.mass_residual(), law.drift_residual(),
                    law.sigma2());
  }
  return o;
}

Outcome exact_formula_oracle() {
  std::size_t checked = 0;
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const std::uint32_t depth = 1 + seed % 12;
    MarkedTree t = testing::random_fixture(derive_seed(kSeed, seed, "acceptance/oracle"), depth, 2, -1.5, 1.5, depth);
    // Deepest vertex of the forced path, plus every vertex of depth <= 3.
    std::vector<VertexId> targets;
    VertexId x = t.root();
    while (t[x].num_children) x = t[x].first_child;
    targets.push_back(x);
    for (VertexId v = 1; v < t.size(); ++v)
      if (t[v].depth <= 3 && v != x) targets.push_back(v);
    const VertexId root[] = {t.root()};
    for (VertexId v : targets) {
      const auto s = path_stats(t, v);
      const VertexId xs[] = {v};
      worst = std::max(worst, std::abs(oracle_hitting(t, t.root(), xs, root) - s.a));
      worst = std::max(worst, std::abs(oracle_hitting(t, v, root, xs) - s.one_minus_p));
      ++checked;
    }
  }
  return {worst <= 1e-10, fmt("100 fixtures, %zu vertices, max |closed form - linear solve| = %.2e (tol 1e-10)",
                              checked, worst)};
}

std::vector<VertexId> five_lowest(MarkedTree& env) {
  std::vector<VertexId> out;
  for (const auto& r : lowest_u_vertices(env, 5, false)) out.push_back(r.id);
  return out;
}

Outcome excursion_law_ks() {
  const auto law = preset_law("f1");
  MarkedTree env = surviving_environment(law, kSeed, "acceptance/ks-env", {});
  const auto targets = five_lowest(env);
  const std::uint64_t m = 1000;
  const int reps = 10'000;
  std::vector<std::vector<double>> stepped(targets.size()), fast(targets.size());
  Walk walk(derive_seed(kSeed, 0, "acceptance/ks-walk"));
  std::vector<std::uint64_t> before(targets.size(), 0);
  for (int r = 0; r < reps; ++r) {
    walk.run_until_returns(env, (r + 1) * m);
    for (std::size_t j = 0; j < targets.size(); ++j) {
      const auto now = walk.local_time(targets[j]);
      stepped[j].push_back(double(now - before[j]));
      before[j] = now;
    }
  }
  double min_p = 1.0;
  for (std::size_t j = 0; j < targets.size(); ++j) {
    const auto xl = ExcursionLaw::from(path_stats(env, targets[j]));
    Rng rng(derive_seed(kSeed, j, "acceptance/ks-fast"));
    for (int r = 0; r < reps; ++r) fast[j].push_back(double(sample_total_local_time(xl, m, rng)));
    min_p = std::min(min_p, stats::ks_two_sample(stepped[j], fast[j]).p_value);
  }
  return {min_p > 0.01 && targets.size() >= 5,
          fmt("%zu vertices, m = 1000, 10^4 replicas per side, min KS p = %.3f (level 0.01)", targets.size(), min_p)};
}

Outcome excursion_expectation() {
  const auto law = preset_law("f1");
  MarkedTree env = surviving_environment(law, kSeed, "acceptance/tally-env", {});
  const auto targets = five_lowest(env);
  const auto tallies = excursion_local_times(env, targets, 100'000, derive_seed(kSeed, 0, "acceptance/tally"));
  std::size_t ok = 0;
  double worst = 0.0;
  for (const auto& t : tallies) {
    ok += t.pass();
    worst = std::max(worst, std::abs(t.z()));
  }
  return {ok == 5, fmt("%zu/5 lowest-U vertices within 4 SE of e^{-(U(x)-U(root))} over 10^5 excursions, max |z| = %.2f",
                       ok, worst)};
}

Outcome tail_bound_grid() {
  const double as[] = {0.001, 0.01}, ps[] = {0.3, 0.6, 0.9}, epss[] = {0.25, 0.5};
  const std::uint64_t ns[] = {50, 200};
  struct Point {
    double a, p, eps;
    std::uint64_t n;
  };
  std::vector<Point> grid;
  for (double a : as)
    for (double p : ps)
      for (double e : epss)
        for (auto n : ns)
          if (sum_tail_bound(a, p, e, n).precondition_ok) grid.push_back({a, p, e, n});
  const std::uint64_t reps = 1'000'000;
  std::vector<std::uint64_t> hits(grid.size(), 0);
  parallel_for(grid.size(), jobs(), [&](unsigned, std::size_t i) {
    const auto& g = grid[i];
    const ExcursionLaw law(g.a, g.p);
    const auto level = static_cast<std::uint64_t>(std::ceil(g.eps * double(g.n) - 1e-9));
    Rng rng(derive_seed(kSeed, i, "acceptance/tail"));
    std::uint64_t h = 0;
    for (std::uint64_t r = 0; r < reps; ++r) h += sample_total_local_time(law, g.n, rng) >= level;
    hits[i] = h;
  });
  std::size_t ok = 0;
  double worst_margin = -1e300;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const double ph = double(hits[i]) / double(reps);
    const double se = std::sqrt(ph * (1 - ph) / double(reps));
    const double bound = sum_tail_bound(grid[i].a, grid[i].p, grid[i].eps, grid[i].n).bound;
    ok += ph <= bound + 4.0 * se;
    worst_margin = std::max(worst_margin, ph - bound - 4.0 * se);
  }
  return {ok == grid.size() && !grid.empty(),
          fmt("%zu/%zu grid points with estimate <= bound + 4 SE (10^6 replicas each), max excess %.3g", ok,
              grid.size(), worst_margin)};
}

Outcome many_to_one() {
  std::size_t ok = 0, total = 0;
  double worst = 0.0;
  bool trivial = true;
  for (const char* name : {"f1", "f2"}) {
    const auto law = preset_law(name);
    std::vector<Functional> gs;
    for (auto g : all_functionals())
      if (admissible(g, law)) gs.push_back(g);
    for (std::uint32_t n : {1u, 2u, 3u}) {
      const auto rs = many_to_one_check(law, n, gs, 1'000'000, derive_seed(kSeed, n, std::string("acceptance/m2o/") + name),
                                        jobs());
      for (const auto& r : rs) {
        ok += r.pass();
        ++total;
        worst = std::max(worst, std::abs(r.z()));
        if (n == 1 && r.g == Functional::One) {
          trivial = trivial && std::abs(r.rhs.mean() - law.mean_offspring()) <= 4 * r.rhs.stderr_mean();
          if (law.offspring().kind == OffspringLaw::Kind::Fixed) trivial = trivial && r.lhs.mean() == law.mean_offspring();
        }
        if (n == 1 && r.g == Functional::ExpLast)
          trivial = trivial && std::abs(r.rhs.mean() - 1.0) <= 1e-12 && std::abs(r.lhs.mean() - 1.0) <= 4 * r.lhs.stderr_mean();
      }
    }
  }
  return {ok == total && trivial,
          fmt("f1, f2: %zu/%zu (g, n) pairs within 4 combined SE at 10^6 samples, max |z| = %.2f; trivial cases %s", ok,
              total, worst, trivial ? "exact" : "MISMATCH")};
}

Outcome martingale() {
  const auto law = preset_law("f1");
  const std::size_t trees = 100'000;
  std::vector<double> d5(trees);
  parallel_for(trees, jobs(), [&](unsigned, std::size_t i) {
    MarkedTree t(law, derive_seed(kSeed, i, "acceptance/d5"));
    d5[i] = derivative_martingale(t, 5);
  });
  stats::RunningStats s;
  for (double x : d5) s.add(x);
  const double z0 = s.mean() / s.stderr_mean();

  MarkedTree fixed(law, derive_seed(kSeed, 0, "acceptance/resample-tree"));
  const double dn = derivative_martingale(fixed, 5);
  Rng rng(derive_seed(kSeed, 0, "acceptance/resample"));
  stats::RunningStats r;
  for (int i = 0; i < 10'000; ++i) r.add(resampled_next_derivative(fixed, 5, rng));
  const double z1 = (r.mean() - dn) / r.stderr_mean();
  return {std::abs(z0) <= 4 && std::abs(z1) <= 4,
          fmt("mean D_5 over 10^5 trees = %.4f (z = %.2f); resampled D_6 vs D_5 = %.4f vs %.4f (z = %.2f)", s.mean(),
              z0, r.mean(), dn, z1)};
}

Outcome favorite_concentration() {
  FavoriteOptions o;
  o.n_grid = {1'000, 1'000'000};
  // The criterion asks for at least 200. A gap of ~0.08 between frequencies
  // near 0.85 needs ~450 per group for 80% power at the 1% level.
  o.replicas = 1000;
  o.jobs = jobs();
  const auto rep = favorite_frequency(preset_law("f1"), kSeed, o);
  std::uint32_t bad = 0;
  for (const auto& r : rep.rows) bad += r.audit_failures;
  const auto& lo = rep.rows.front();
  const auto& hi = rep.rows.back();
  return {rep.increase_p < 0.01 && bad == 0,
          fmt("frequency %.3f (n=10^3) -> %.3f (n=10^6), %u+%u excluded, one-sided p = %.2g (level 0.01); audit "
              "failures %u",
              lo.frequency(), hi.frequency(), lo.excluded, hi.excluded, rep.increase_p, bad)};
}

Outcome far_vertex_and_barrier() {
  FarVertexOptions o;
  o.eps_grid = {0.3};
  o.n_grid = {10'000, 100'000, 1'000'000};
  o.replicas = 200;
  o.gamma = 1.5;
  o.jobs = jobs();
  const auto rep = far_vertex_diagnostic(preset_law("f1"), kSeed, o);
  std::string freqs, bars;
  for (const auto& r : rep.rows) {
    freqs += fmt("%.3f ", double(r.events) / r.replicas);
    bars += fmt("%.3f ", double(r.barrier_hits) / r.replicas);
  }
  const double pe = rep.event_increase_p.front();
  return {pe >= 0.05 && rep.barrier_increase_p >= 0.05,
          fmt("far-vertex event freq [%s] increase p = %.3g; barrier-hit freq [%s] increase p = %.3g (both must be "
              ">= 0.05)",
              freqs.c_str(), pe, bars.c_str(), rep.barrier_increase_p)};
}

Outcome spine_scaling() {
  const auto law = preset_law("f1");
  const auto tilt = tilted_law(law);
  const std::size_t ks[] = {100, 215, 464, 1000, 2154, 4642, 10000};
  const auto pc = persistence_curve(tilt, ks, 1.0, 1'000'000, derive_seed(kSeed, 0, "acceptance/persistence"), jobs());
  const bool slope_ok = std::abs(pc.slope + 0.5) <= 0.1;

  std::vector<StoppedSumEstimate> est;
  std::string values;
  const double lambdas[] = {5, 10, 20, 40};
  for (std::size_t i = 0; i < 4; ++i) {
    est.push_back(stopped_drop_sum(law, 0.05, lambdas[i], 20'000, derive_seed(kSeed, i, "acceptance/drop"), jobs()));
    values += fmt("%.1f ", est.back().sum.mean());
  }
  const double z = (est.back().sum.mean() - est.front().sum.mean()) /
                   std::hypot(est.back().sum.stderr_mean(), est.front().sum.stderr_mean());
  const bool flat = z < 1.6448536269514722;
  return {slope_ok && flat,
          fmt("persistence slope %.4f (target -0.5 +- 0.1) %s; stopped drop sum at lambda 5,10,20,40 = [%s] growth "
              "z = %.1f (no-growth needs z < 1.645) %s",
              pc.slope, slope_ok ? "ok" : "FAIL", values.c_str(), z, flat ? "ok" : "FAIL")};
}

int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "brw");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism() {
  const fs::path base = fs::temp_directory_path() / "brw-acceptance-determinism";
  fs::remove_all(base);
  fs::create_directories(base);
  const fs::path cfg = base / "small.json";
  std::ofstream(cfg) << R"({
    "replicas": 8, "m_grid": [2000], "eps_grid": [0.3, 0.5], "survival_depth": 15, "dinf_depth": 14,
    "spine_samples": 20000, "persistence_k": [10, 100], "persistence_trials": 20000,
    "drop_lambda": [2, 4], "drop_trials": 2000
  })";
  const std::vector<std::pair<std::string, std::string>> runs{
      {"calibrate", ""},   {"simulate", "5000"},   {"excursions", ""},   {"spine-check", ""}, {"umin", ""},
      {"theorem21", "1000,5000"}, {"corollary22", "100,5000"}, {"prop23", "1000,5000"}, {"barrier", "1000,10000"},
      {"report-data", "1000,4000"},
  };
  std::size_t files = 0;
  std::vector<std::string> mismatched;
  for (const auto& [sub, grid] : runs) {
    int codes[3];
    const char* variants[3] = {"1", "4", "4"};
    for (int v = 0; v < 3; ++v) {
      std::vector<std::string> args{sub, "--config", cfg.string(), "--jobs", variants[v], "--out",
                                    (base / (sub + std::to_string(v))).string()};
      if (!grid.empty()) {
        args.push_back("--n");
        args.push_back(grid);
      }
      codes[v] = cli(args);
    }
    bool same = codes[0] == codes[1] && codes[1] == codes[2];
    for (const auto& entry : fs::directory_iterator(base / (sub + "0"))) {
      const auto name = entry.path().filename();
      const auto ref = slurp(entry.path());
      same = same && ref == slurp(base / (sub + "1") / name) && ref == slurp(base / (sub + "2") / name);
      ++files;
    }
    if (!same) mismatched.push_back(sub);
  }
  std::string which;
  for (const auto& m : mismatched) which += m + " ";
  return {mismatched.empty(),
          fmt("10 subcommands x {jobs 1, jobs 4, jobs 4 again}: %zu files compared, %s", files,
              mismatched.empty() ? "all byte-identical" : ("differences in: " + which).c_str())};
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {"calibration", 1, calibration},
      {"exact-formula oracle", 10, exact_formula_oracle},
      {"excursion-law equivalence (KS)", 300, excursion_law_ks},
      {"excursion exact expectation", 300, excursion_expectation},
      {"sum tail bound", 600, tail_bound_grid},
      {"many-to-one two-sided agreement", 600, many_to_one},
      {"derivative martingale checks", 120, martingale},
      {"favorite-site concentration trend", 1800, favorite_concentration},
      {"far-vertex and barrier trends", 1800, far_vertex_and_barrier},
      {"spine scaling", 600, spine_scaling},
      {"determinism", 1800, determinism},
  };
  std::printf("brw acceptance suite (%u worker threads)\n", jobs());
  std::size_t passed = 0;
  for (const auto& c : criteria) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = secs <= c.budget_seconds;
    const bool pass = o.pass && in_time;
    passed += pass;
    std::printf("%s  %-36s %8.2fs / %5.0fs%s  %s\n", pass ? "PASS" : "FAIL", c.name.c_str(), secs, c.budget_seconds,
                in_time ? "" : " OVER", o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", passed, criteria.size());
  return passed == criteria.size() ? 0 : 1;
}
