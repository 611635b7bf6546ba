#include "brw/excursion.hpp"

#include <cmath>
#include <random>

#include <Eigen/Dense>

#include "brw/csv.hpp"
#include "brw/error.hpp"

namespace brw {

PathStats path_stats(MarkedTree& tree, VertexId x) {
  if (x == tree.root()) throw DomainError("path_stats: x must differ from the root");
  if (!tree.contains(x)) throw DomainError("path_stats: unknown vertex");
  tree.ensure_expanded(tree.root());
  tree.ensure_expanded(x);
  const VertexRecord& r = tree[x];
  PathStats s;
  s.target = x;
  s.log_sum_expV = r.log_cum_expV;
  s.sum_expV = std::exp(r.log_cum_expV);
  s.expU = std::exp(r.U);
  s.w_root_ghost = tree[tree.root()].w_parent;
  s.a = std::exp(std::log(s.w_root_ghost) - r.log_cum_expV);
  const double log_1mp = r.U - r.log_cum_expV;
  s.one_minus_p = std::exp(log_1mp);
  s.p = -std::expm1(log_1mp);
  return s;
}

ExcursionLaw::ExcursionLaw(double a_, double p_) : a(a_), p(p_) {
  if (!(a >= 0.0 && a <= 1.0)) throw DomainError("excursion law: a must lie in [0, 1]");
  if (!(p >= 0.0 && p < 1.0)) throw DomainError("excursion law: p must lie in [0, 1)");
}

double ExcursionLaw::pmf(std::uint64_t k) const {
  if (k == 0) return 1.0 - a;
  return a * std::pow(p, static_cast<double>(k - 1)) * (1.0 - p);
}

double ExcursionLaw::tail(std::uint64_t k) const {
  if (k == 0) return 1.0;
  return a * std::pow(p, static_cast<double>(k - 1));
}

std::uint64_t sample_excursion(const ExcursionLaw& law, Rng& rng) {
  if (!(rng.uniform() < law.a)) return 0;
  if (law.p == 0.0) return 1;
  std::geometric_distribution<std::uint64_t> g(1.0 - law.p);
  return 1 + g(rng);
}

std::uint64_t sample_total_local_time(const ExcursionLaw& law, std::uint64_t m, Rng& rng) {
  if (m == 0 || law.a == 0.0) return 0;
  std::binomial_distribution<std::uint64_t> bin(m, law.a);
  const std::uint64_t k = bin(rng);
  if (k == 0 || law.p == 0.0) return k;
  std::negative_binomial_distribution<std::uint64_t> nb(k, 1.0 - law.p);
  return k + nb(rng);
}

SumTailBound sum_tail_bound(double a, double p, double eps, std::uint64_t n) {
  if (!(a >= 0.0 && a < 1.0)) throw DomainError("tail bound: a must lie in [0, 1)");
  if (!(p > 0.0 && p < 1.0)) throw DomainError("tail bound: p must lie in (0, 1)");
  if (!(eps > 0.0 && eps < 1.0)) throw DomainError("tail bound: eps must lie in (0, 1)");
  if (n == 0) throw DomainError("tail bound: n must be >= 1");
  const double nn = static_cast<double>(n);
  SumTailBound b;
  b.precondition_ok = (1.0 - p) > 8.0 * a / eps;
  b.bound = 6.0 * nn * a * std::exp(-(1.0 - p) * eps * nn / 8.0);
  return b;
}

double oracle_hitting(const MarkedTree& prefix, VertexId source, std::span<const VertexId> target,
                      std::span<const VertexId> taboo) {
  const std::size_t nv = prefix.size();
  const std::size_t ns = nv + 1;  // last state is the ghost
  if (ns > kOracleMaxStates) throw DomainError("oracle: prefix too large for the dense solver");
  if (target.empty()) throw DomainError("oracle: empty target set");
  auto state = [&](VertexId v) -> std::size_t {
    if (v == kGhost) return nv;
    if (v >= nv) throw DomainError("oracle: vertex outside the prefix");
    return v;
  };

  // 0 = free, 1 = target, 2 = taboo
  std::vector<int> kind(ns, 0);
  for (VertexId v : target) kind[state(v)] = 1;
  for (VertexId v : taboo) {
    const std::size_t s = state(v);
    if (kind[s] == 1) throw DomainError("oracle: target and taboo overlap");
    kind[s] = 2;
  }

  // Row s of the transition matrix as (state, probability) pairs.
  auto transitions = [&](std::size_t s, auto&& emit) {
    if (s == nv) {
      emit(std::size_t{0}, 1.0);
      return;
    }
    const VertexRecord& r = prefix[static_cast<VertexId>(s)];
    const std::size_t up = s == 0 ? nv : r.parent;
    if (!r.expanded) {
      emit(up, 1.0);
      return;
    }
    emit(up, r.w_parent);
    for (VertexId c : r.children()) emit(static_cast<std::size_t>(c), prefix[c].w_in);
  };

  std::vector<std::size_t> index(ns, ns);
  std::size_t nf = 0;
  for (std::size_t s = 0; s < ns; ++s)
    if (kind[s] == 0) index[s] = nf++;

  Eigen::VectorXd h = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nf));
  if (nf > 0) {
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(nf), static_cast<Eigen::Index>(nf));
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nf));
    for (std::size_t s = 0; s < ns; ++s) {
      if (kind[s] != 0) continue;
      const auto i = static_cast<Eigen::Index>(index[s]);
      transitions(s, [&](std::size_t y, double w) {
        if (kind[y] == 0)
          A(i, static_cast<Eigen::Index>(index[y])) -= w;
        else if (kind[y] == 1)
          rhs(i) += w;
      });
    }
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible()) throw DomainError("oracle: singular system (target set unreachable)");
    h = lu.solve(rhs);
  }

  double out = 0.0;
  transitions(state(source), [&](std::size_t y, double w) {
    if (kind[y] == 1)
      out += w;
    else if (kind[y] == 0)
      out += w * h(static_cast<Eigen::Index>(index[y]));
  });
  return out;
}

void write_excursion_table(MarkedTree& tree, std::span<const VertexId> vertices, std::ostream& out,
                           std::string_view config_hash) {
  CsvWriter csv(out, "excursion", 1, config_hash, {"vertex", "depth", "U", "a", "p", "mean"});
  for (VertexId v : vertices) {
    const PathStats s = path_stats(tree, v);
    csv << tree.label(v) << tree[v].depth << tree[v].U << s.a << s.p << s.mean();
    csv.end_row();
  }
}

}  // namespace brw
