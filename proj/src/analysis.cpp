#include "brw/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <set>
#include <unordered_set>

#include "brw/error.hpp"
#include "brw/parallel.hpp"

namespace brw {

// ---------------------------------------------------------------------------

DinfEstimate estimate_Dinf(MarkedTree& tree, const DinfOptions& options) {
  DinfEstimate out;
  std::vector<VertexId> cur{tree.root()}, next;
  for (std::uint32_t d = 0;; ++d) {
    double D = 0.0;
    for (VertexId v : cur) D += tree[v].V * std::exp(-tree[v].V);
    out.trajectory.push_back(D);
    if (d == options.depth) break;
    next.clear();
    for (VertexId v : cur) {
      if (tree[v].V > options.prune_level) {
        out.pruned_mass += std::exp(-tree[v].V);
        ++out.pruned_vertices;
        continue;
      }
      for (VertexId c : tree.expand(v)) next.push_back(c);
    }
    cur.swap(next);
    if (cur.empty() && out.pruned_vertices == 0)
      throw ExtinctError("environment extinct before generation " + std::to_string(options.depth));
  }
  out.survived = !cur.empty();
  out.value = out.trajectory.back();
  out.pre_asymptotic = options.depth == 0 || options.depth < options.window;
  if (!out.pre_asymptotic && out.value != 0.0) {
    double worst = 0.0;
    for (std::uint32_t k = options.depth - options.window; k < options.depth; ++k)
      worst = std::max(worst, std::abs(out.trajectory[k] - out.value) / std::abs(out.value));
    out.max_relative_change = worst;
  }
  return out;
}

double sigma2(const DisplacementLaw& law) {
  const double s = law.sigma2();
  if (!(s > 0.0 && std::isfinite(s))) throw DomainError("sigma^2 must lie in (0, inf) for simulation use");
  return s;
}

// ---------------------------------------------------------------------------

namespace {

struct Frontier {
  double V;
  VertexId id;
  bool operator>(const Frontier& o) const { return V != o.V ? V > o.V : id > o.id; }
};

struct SearchResult {
  std::vector<RankedVertex> evaluated;
  double frontier_bound = std::numeric_limits<double>::infinity();
  bool exhausted_arena = false;
};

// Best-first by V; stops once the frontier lies beyond the k-th best U plus
// the certification gap.
SearchResult best_first(MarkedTree& tree, std::size_t k, bool include_root, const UminOptions& opt) {
  if (!(opt.lambda_cap > 0.0)) throw DomainError("lambda_cap must be positive");
  const double gap = std::log1p(opt.lambda_cap) + opt.v_margin;
  SearchResult out;
  std::priority_queue<Frontier, std::vector<Frontier>, std::greater<>> heap;
  std::multiset<double> best;  // the k smallest U so far
  heap.push({tree[tree.root()].V, tree.root()});
  try {
    while (!heap.empty()) {
      const Frontier f = heap.top();
      const double kth = best.size() < k ? std::numeric_limits<double>::infinity() : *best.rbegin();
      if (f.V > kth + gap) break;
      heap.pop();
      const ChildRange kids = tree.expand(f.id);
      const double U = tree[f.id].U;
      if (include_root || f.id != tree.root()) {
        out.evaluated.push_back({f.id, U});
        best.insert(U);
        if (best.size() > k) best.erase(std::prev(best.end()));
      }
      for (VertexId c : kids) heap.push({tree[c].V, c});
    }
  } catch (const ResourceError&) {
    out.exhausted_arena = true;
  }
  if (!heap.empty()) out.frontier_bound = heap.top().V;
  return out;
}

bool address_less(const MarkedTree& tree, VertexId a, VertexId b) { return tree.address(a) < tree.address(b); }

}  // namespace

UminResult find_umin(MarkedTree& tree, const UminOptions& options) {
  const SearchResult s = best_first(tree, 1, true, options);
  UminResult out;
  out.lambda_cap = options.lambda_cap;
  out.frontier_bound = s.frontier_bound;
  out.evaluated = s.evaluated.size();
  for (const auto& r : s.evaluated) out.min_value = std::min(out.min_value, r.U);
  for (const auto& r : s.evaluated)
    if (r.U <= out.min_value + options.tie_tolerance) out.minimizers.push_back(r.id);
  std::sort(out.minimizers.begin(), out.minimizers.end(),
            [&](VertexId a, VertexId b) { return address_less(tree, a, b); });
  out.certified = !s.exhausted_arena && out.frontier_bound - std::log1p(options.lambda_cap) > out.min_value;
  return out;
}

std::vector<RankedVertex> lowest_u_vertices(MarkedTree& tree, std::size_t k, bool include_root,
                                            const UminOptions& options) {
  if (k == 0) return {};
  SearchResult s = best_first(tree, k, include_root, options);
  std::sort(s.evaluated.begin(), s.evaluated.end(), [&](const RankedVertex& a, const RankedVertex& b) {
    if (a.U != b.U) return a.U < b.U;
    return address_less(tree, a.id, b.id);
  });
  if (s.evaluated.size() > k) s.evaluated.resize(k);
  return s.evaluated;
}

// ---------------------------------------------------------------------------

MarkedTree surviving_environment(const DisplacementLaw& law, std::uint64_t seed, std::string_view tag,
                                 const EnvironmentOptions& options, std::uint32_t* attempts) {
  for (std::uint32_t i = 0; i < options.max_attempts; ++i) {
    MarkedTree tree(law, derive_seed(seed, i, tag), options.arena_cap);
    if (survives_to(tree, options.survival_depth)) {
      if (attempts) *attempts = i;
      return tree;
    }
  }
  throw ExtinctError("no surviving environment in " + std::to_string(options.max_attempts) + " attempts");
}

// ---------------------------------------------------------------------------

double ExcursionTally::z() const {
  const double se = per_excursion.stderr_mean();
  const double d = per_excursion.mean() - expected;
  if (se == 0.0) return d == 0.0 ? 0.0 : std::copysign(std::numeric_limits<double>::infinity(), d);
  return d / se;
}

std::vector<ExcursionTally> excursion_local_times(MarkedTree& tree, std::span<const VertexId> targets,
                                                  std::uint64_t m, std::uint64_t seed) {
  if (m == 0) throw DomainError("excursion_local_times: m must be >= 1");
  tree.ensure_expanded(tree.root());
  const double U0 = tree[tree.root()].U;
  std::vector<ExcursionTally> out(targets.size());
  for (std::size_t j = 0; j < targets.size(); ++j) {
    tree.ensure_expanded(targets[j]);
    out[j].vertex = targets[j];
    out[j].label = tree.label(targets[j]);
    out[j].U = tree[targets[j]].U;
    out[j].expected = std::exp(-(out[j].U - U0));
  }
  std::vector<std::uint64_t> counts(targets.size(), 0);
  Walk walk(seed);
  for (std::uint64_t done = 0; done < m;) {
    const VertexId x = walk.step(tree);
    for (std::size_t j = 0; j < targets.size(); ++j)
      if (targets[j] == x) ++counts[j];
    if (x == tree.root()) {
      for (std::size_t j = 0; j < targets.size(); ++j) {
        out[j].per_excursion.add(static_cast<double>(counts[j]));
        counts[j] = 0;
      }
      ++done;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

namespace {

double median(std::vector<double> v) {
  if (v.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

std::string grid_tag(std::string_view base, std::uint64_t n) { return std::string(base) + "/" + std::to_string(n); }

bool favorites_within(const Walk& walk, const std::vector<VertexId>& minimizers) {
  if (walk.favorites().empty()) return false;
  for (VertexId f : walk.favorites())
    if (std::find(minimizers.begin(), minimizers.end(), f) == minimizers.end()) return false;
  return true;
}

}  // namespace

LocalTimeReport local_time_report(const DisplacementLaw& law, std::uint64_t seed, const LocalTimeOptions& opt) {
  LocalTimeReport rep;
  rep.sigma2 = sigma2(law);
  rep.replicas = opt.replicas;
  MarkedTree env = surviving_environment(law, seed, "local-time/env", opt.env, &rep.rejected_environments);
  rep.environment_seed = env.seed();
  {
    MarkedTree copy(law, env.seed(), opt.env.arena_cap);
    const DinfEstimate d = estimate_Dinf(copy, opt.dinf);
    rep.dinf = d.value;
    rep.dinf_relative_change = d.max_relative_change;
  }
  if (!(rep.dinf > 0.0)) throw DomainError("derivative martingale estimate is not positive; resample");

  const UminResult umin = find_umin(env, opt.umin);
  rep.umin_certified = umin.certified;
  std::vector<std::vector<std::uint32_t>> umin_addr;
  for (VertexId v : umin.minimizers) umin_addr.push_back(env.address(v));

  const auto ranked = lowest_u_vertices(env, opt.vertex_budget, true, opt.umin);
  std::vector<VertexId> targets;
  std::vector<std::vector<std::uint32_t>> target_addr;
  for (const auto& r : ranked) {
    targets.push_back(r.id);
    target_addr.push_back(env.address(r.id));
  }
  rep.excursion = excursion_local_times(env, targets, opt.excursions, derive_seed(seed, 0, "local-time/excursion"));

  // Raw time-n statistics: one tree copy per replica (same environment).
  const std::size_t nn = opt.n_grid.size(), nr = opt.replicas;
  std::vector<std::vector<double>> scaled(nn * nr);
  std::vector<char> fav(nn * nr, 0);
  parallel_for(nn * nr, opt.jobs, [&](unsigned, std::size_t task) {
    const std::size_t i = task / nr, r = task % nr;
    const std::uint64_t n = opt.n_grid[i];
    MarkedTree tree(law, env.seed(), opt.env.arena_cap);
    Walk walk(derive_seed(seed, r, grid_tag("local-time/walk", n)));
    walk.run(tree, n);
    const double scale = std::log(static_cast<double>(n)) / static_cast<double>(n);
    std::vector<double> row;
    for (const auto& a : target_addr) row.push_back(static_cast<double>(walk.local_time(tree.locate(a))) * scale);
    scaled[task] = std::move(row);
    std::vector<VertexId> mins;
    for (const auto& a : umin_addr) mins.push_back(tree.locate(a));
    fav[task] = favorites_within(walk, mins);
  });

  const double pref = rep.sigma2 / (4.0 * rep.dinf);
  rep.favorite_hits.assign(nn, 0);
  std::vector<std::vector<double>> ratios(targets.size());
  for (std::size_t i = 0; i < nn; ++i) {
    for (std::size_t r = 0; r < nr; ++r) rep.favorite_hits[i] += fav[i * nr + r];
    for (std::size_t j = 0; j < targets.size(); ++j) {
      std::vector<double> vals;
      double sum = 0.0;
      for (std::size_t r = 0; r < nr; ++r) {
        vals.push_back(scaled[i * nr + r][j]);
        sum += vals.back();
      }
      LocalTimeRow row;
      row.n = opt.n_grid[i];
      row.vertex = targets[j];
      row.label = env.label(targets[j]);
      row.U = ranked[j].U;
      row.measured_median = median(vals);
      row.measured_mean = nr ? sum / static_cast<double>(nr) : 0.0;
      row.predicted = pref * std::exp(-row.U);
      row.ratio = row.measured_median / row.predicted;
      ratios[j].push_back(row.ratio);
      rep.rows.push_back(std::move(row));
    }
  }
  for (const auto& r : ratios)
    rep.ratio_trend.push_back(r.size() >= 2 && std::abs(r.back() - 1.0) < std::abs(r.front() - 1.0));
  return rep;
}

// ---------------------------------------------------------------------------

FavoriteReport favorite_frequency(const DisplacementLaw& law, std::uint64_t seed, const FavoriteOptions& opt) {
  if (opt.n_grid.empty()) throw DomainError("favorite_frequency: empty n grid");
  const std::size_t nn = opt.n_grid.size(), nr = opt.replicas;
  FavoriteReport rep;
  rep.replicas.resize(nn * nr);
  parallel_for(nn * nr, opt.jobs, [&](unsigned, std::size_t task) {
    const std::size_t i = task / nr;
    const auto r = static_cast<std::uint32_t>(task % nr);
    const std::uint64_t n = opt.n_grid[i];
    FavoriteReplica& out = rep.replicas[task];
    out.n = n;
    out.replica = r;
    out.seed = derive_seed(seed, r, grid_tag("favorites", n));
    MarkedTree tree = surviving_environment(law, out.seed, "env", opt.env);
    const UminResult umin = find_umin(tree, opt.umin);
    out.certified = umin.certified;
    Walk walk(derive_seed(out.seed, 0, "walk"));
    const auto barrier = walk.track_barrier(BarrierConfig(opt.gamma, std::max<std::uint64_t>(n, 2)));
    // Audit the favorite set at a few checkpoints on the way to n.
    out.audit_ok = true;
    for (std::uint64_t t : {n / 1000, n / 100, n / 10, n}) {
      if (t <= walk.steps()) continue;
      walk.run(tree, t - walk.steps());
      out.audit_ok = out.audit_ok && favorites_consistent(walk);
    }
    out.within_umin = favorites_within(walk, umin.minimizers);
    out.walk = walk.summary();
    out.barrier_hit = walk.barrier_hit(barrier);
  });

  for (std::size_t i = 0; i < nn; ++i) {
    FavoriteRow row;
    row.n = opt.n_grid[i];
    row.replicas = static_cast<std::uint32_t>(nr);
    for (std::size_t r = 0; r < nr; ++r) {
      const auto& x = rep.replicas[i * nr + r];
      if (!x.audit_ok) ++row.audit_failures;
      if (!x.certified)
        ++row.excluded;
      else if (x.within_umin)
        ++row.hits;
    }
    row.ci = stats::wilson_interval(row.hits, row.replicas - row.excluded);
    rep.rows.push_back(row);
  }
  const auto& a = rep.rows.front();
  const auto& b = rep.rows.back();
  rep.increase_p = stats::two_proportion_greater_p(a.hits, a.replicas - a.excluded, b.hits, b.replicas - b.excluded);
  return rep;
}

// ---------------------------------------------------------------------------

double far_threshold(double eps) {
  if (!(eps > 0.0)) throw DomainError("eps must be positive");
  return std::log(8.0 / (eps * eps));
}

std::uint64_t far_vertex_max(MarkedTree& tree, const Walk& walk, double threshold) {
  std::uint64_t best = 0;
  for (VertexId v : walk.visited()) {
    tree.ensure_expanded(v);
    if (tree[v].U >= threshold) best = std::max(best, walk.local_time(v));
  }
  return best;
}

FarVertexReport far_vertex_diagnostic(const DisplacementLaw& law, std::uint64_t seed, const FarVertexOptions& opt) {
  for (double e : opt.eps_grid)
    if (!(e > 0.0 && e < 1.0)) throw DomainError("eps values must lie in (0, 1)");
  if (opt.n_grid.size() < 2) throw DomainError("far_vertex_diagnostic: need at least two n values");
  const std::size_t nn = opt.n_grid.size(), nr = opt.replicas, ne = opt.eps_grid.size();

  struct Replica {
    std::vector<char> event;
    std::vector<double> scaled;
    bool barrier = false;
  };
  std::vector<Replica> reps(nn * nr);
  parallel_for(nn * nr, opt.jobs, [&](unsigned, std::size_t task) {
    const std::size_t i = task / nr, r = task % nr;
    const std::uint64_t n = opt.n_grid[i];
    const std::uint64_t s = derive_seed(seed, r, grid_tag("far", n));
    MarkedTree tree = surviving_environment(law, s, "env", opt.env);
    Walk walk(derive_seed(s, 0, "walk"));
    const auto b = walk.track_barrier(BarrierConfig(opt.gamma, n));
    walk.run(tree, n);
    const double logn = std::log(static_cast<double>(n));
    Replica& out = reps[task];
    out.barrier = walk.barrier_hit(b);
    for (double e : opt.eps_grid) {
      const double mx = static_cast<double>(far_vertex_max(tree, walk, far_threshold(e)));
      out.event.push_back(mx >= e * static_cast<double>(n) / logn);
      out.scaled.push_back(mx * logn / static_cast<double>(n));
    }
  });

  FarVertexReport rep;
  std::vector<double> scores;
  for (auto n : opt.n_grid) scores.push_back(std::log10(static_cast<double>(n)));
  std::vector<std::uint64_t> trials(nn, nr), hits(nn, 0);
  for (std::size_t e = 0; e < ne; ++e) {
    std::vector<std::uint64_t> ev(nn, 0);
    for (std::size_t i = 0; i < nn; ++i) {
      FarVertexRow row;
      row.eps = opt.eps_grid[e];
      row.n = opt.n_grid[i];
      row.replicas = static_cast<std::uint32_t>(nr);
      double sum = 0.0;
      for (std::size_t r = 0; r < nr; ++r) {
        const auto& x = reps[i * nr + r];
        row.events += x.event[e];
        row.barrier_hits += x.barrier;
        sum += x.scaled[e];
      }
      row.mean_far_max = nr ? sum / static_cast<double>(nr) : 0.0;
      ev[i] = row.events;
      hits[i] = row.barrier_hits;
      rep.rows.push_back(row);
    }
    rep.event_increase_p.push_back(stats::cochran_armitage_increasing_p(ev, trials, scores));
  }
  rep.barrier_increase_p = stats::cochran_armitage_increasing_p(hits, trials, scores);
  return rep;
}

// ---------------------------------------------------------------------------

BarrierSum barrier_sum(MarkedTree& tree, std::uint64_t n, double gamma, const BarrierSumOptions& opt) {
  if (!(gamma < 2.0)) throw DomainError("barrier_sum: gamma must be < 2");
  const BarrierConfig cfg(gamma, n);
  BarrierSum out;
  double sum = 0.0;
  std::vector<VertexId> stack{tree.root()};
  try {
    while (!stack.empty()) {
      const VertexId x = stack.back();
      stack.pop_back();
      const ChildRange kids = tree.expand(x);
      sum += std::exp(-tree[x].U);
      ++out.vertices;
      if (x != tree.root() && barrier_crossed(tree, x, cfg)) continue;
      for (std::uint32_t i = kids.size(); i-- > 0;) {
        const VertexId c = kids[i];
        if (tree[c].V > opt.v_cutoff || tree[c].depth > opt.max_depth) {
          ++out.pruned_vertices;
          out.pruned_mass += std::exp(-tree[c].V);
        } else {
          stack.push_back(c);
        }
      }
    }
  } catch (const ResourceError&) {
    out.partial = true;
  }
  out.value = sum / std::log(static_cast<double>(n));
  return out;
}

}  // namespace brw
