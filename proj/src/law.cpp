#include "brw/law.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include <boost/math/tools/toms748_solve.hpp>

#include "brw/error.hpp"

namespace brw {

namespace {

constexpr double kResidualTol = 1e-10;

double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

std::string describe(std::span<const double> v) {
  std::ostringstream os;
  os.precision(17);
  os << '[';
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v[i];
  os << ']';
  return os.str();
}

// Two solved atoms u < v with probabilities q_u, q_v and an optional fixed
// atom c with probability q_c. With x_i = e^{-a_i} the equations read
//   sum q_i x_i = 1/m,   sum q_i x_i log x_i = 0.
// Eliminating beta = e^{-v} through the first leaves h(alpha) = 0 with
// h' = q_u log(alpha/beta) > 0 on the bracket alpha > beta.
std::vector<Atom> solve_atoms(double mean, double q_u, double q_c, double c,
                              std::span<const double> params) {
  const double q_v = 1.0 - q_u - q_c;
  const double kappa = std::exp(-c);
  const double rest = 1.0 / mean - q_c * kappa;
  if (!(rest > 0.0))
    throw CalibrationError("calibration: fixed atom already carries all the mass (params=" +
                           describe(params) + ")");
  const double lo = rest / (q_u + q_v);  // alpha == beta
  const double hi = rest / q_u;          // beta == 0
  auto beta_of = [&](double alpha) { return std::max(0.0, (rest - q_u * alpha) / q_v); };
  auto h = [&](double alpha) {
    return xlogx(alpha) * q_u + q_c * xlogx(kappa) + q_v * xlogx(beta_of(alpha));
  };
  const double h_lo = h(lo);
  const double h_hi = h(hi);
  if (!(h_lo < 0.0 && h_hi > 0.0)) {
    std::ostringstream os;
    os.precision(17);
    os << "calibration: no root in range for params=" << describe(params)
       << "; bracket alpha=e^{-u} in [" << lo << ", " << hi << "] has residual signs h(lo)=" << h_lo
       << ", h(hi)=" << h_hi << " (need h(lo) < 0 < h(hi))";
    throw CalibrationError(os.str());
  }
  std::uintmax_t iters = 200;
  const auto [a, b] = boost::math::tools::toms748_solve(
      h, lo, hi, h_lo, h_hi, boost::math::tools::eps_tolerance<double>(std::numeric_limits<double>::digits - 1),
      iters);
  double alpha = 0.5 * (a + b);
  if (std::abs(h(a)) < std::abs(h(alpha))) alpha = a;
  if (std::abs(h(b)) < std::abs(h(alpha))) alpha = b;
  const double beta = beta_of(alpha);
  std::vector<Atom> atoms;
  atoms.push_back({-std::log(alpha), q_u});
  if (q_c > 0.0) atoms.push_back({c, q_c});
  atoms.push_back({-std::log(beta), q_v});
  return atoms;
}

void require(bool ok, const std::string& what, std::span<const double> params) {
  if (!ok) throw CalibrationError("calibration: " + what + " (params=" + describe(params) + ")");
}

}  // namespace

std::string_view family_name(Family f) {
  switch (f) {
    case Family::Degenerate: return "degenerate";
    case Family::Binary: return "f1";
    case Family::Geometric: return "f2";
    case Family::Poisson: return "f3";
  }
  return "?";
}

Family parse_family(std::string_view name) {
  if (name == "degenerate") return Family::Degenerate;
  if (name == "f1") return Family::Binary;
  if (name == "f2") return Family::Geometric;
  if (name == "f3") return Family::Poisson;
  throw ConfigError("unknown family '" + std::string(name) + "' (expected degenerate, f1, f2, f3)");
}

// ---------------------------------------------------------------------------

std::uint32_t OffspringLaw::sample(Rng& rng) const {
  switch (kind) {
    case Kind::Fixed: return static_cast<std::uint32_t>(mean);
    case Kind::Geometric: {
      std::geometric_distribution<std::uint32_t> d(1.0 / (1.0 + mean));
      return d(rng);
    }
    case Kind::Poisson: {
      std::poisson_distribution<std::uint32_t> d(mean);
      return d(rng);
    }
  }
  return 0;
}

double OffspringLaw::probability(std::uint32_t k) const {
  switch (kind) {
    case Kind::Fixed: return static_cast<double>(k) == mean ? 1.0 : 0.0;
    case Kind::Geometric: {
      const double theta = mean / (1.0 + mean);
      return (1.0 - theta) * std::pow(theta, static_cast<double>(k));
    }
    case Kind::Poisson:
      return std::exp(-mean + k * std::log(mean) - std::lgamma(k + 1.0));
  }
  return 0.0;
}

double OffspringLaw::moment(double s) const {
  if (kind == Kind::Fixed) return std::pow(mean, s);
  double sum = 0.0;
  for (std::uint32_t k = 1; k < 100000; ++k) {
    const double term = probability(k) * std::pow(static_cast<double>(k), s);
    sum += term;
    if (k > 10 * mean + 50 && term < 1e-18 * sum) break;
  }
  return sum;
}

double OffspringLaw::factorial_moment2() const {
  switch (kind) {
    case Kind::Fixed: return mean * (mean - 1.0);
    case Kind::Geometric: return 2.0 * mean * mean;
    case Kind::Poisson: return mean * mean;
  }
  return 0.0;
}

std::uint32_t OffspringLaw::max_count() const {
  return kind == Kind::Fixed ? static_cast<std::uint32_t>(mean) : 0;
}

bool IntegrabilityCertificate::finite() const {
  return std::isfinite(tilted_exponential) && std::isfinite(positive_exponential) &&
         std::isfinite(offspring_moment);
}

// ---------------------------------------------------------------------------

DisplacementLaw::DisplacementLaw(Family family, std::vector<double> free_params,
                                 OffspringLaw offspring, std::vector<Atom> atoms)
    : family_(family), params_(std::move(free_params)), offspring_(offspring), atoms_(std::move(atoms)) {
  double c = 0.0;
  for (const auto& a : atoms_) {
    c += a.prob;
    cumulative_.push_back(c);
  }
}

double DisplacementLaw::mass_residual() const {
  return first_generation_sum([](double v) { return std::exp(-v); }) - 1.0;
}

double DisplacementLaw::drift_residual() const {
  return first_generation_sum([](double v) { return v * std::exp(-v); });
}

double DisplacementLaw::sigma2() const {
  return first_generation_sum([](double v) { return v * v * std::exp(-v); });
}

bool DisplacementLaw::is_calibrated(double tol) const {
  return std::abs(mass_residual()) <= tol && std::abs(drift_residual()) <= tol;
}

IntegrabilityCertificate DisplacementLaw::certify(double delta) const {
  IntegrabilityCertificate c;
  c.delta = delta;
  c.tilted_exponential = first_generation_sum([&](double v) { return std::exp(-(1.0 + delta) * v); });
  c.positive_exponential = first_generation_sum([&](double v) { return std::exp(delta * v); });
  c.offspring_moment = offspring_.moment(1.0 + delta);
  return c;
}

double DisplacementLaw::lambda_second_moment() const {
  double mu1 = 0.0, mu2 = 0.0;
  for (const auto& a : atoms_) {
    mu1 += a.prob * std::exp(-a.value);
    mu2 += a.prob * std::exp(-2.0 * a.value);
  }
  const double m = offspring_.mean;
  return 1.0 + 2.0 * m * mu1 + m * mu2 + offspring_.factorial_moment2() * mu1 * mu1;
}

double DisplacementLaw::max_lambda() const {
  const auto n = offspring_.max_count();
  if (n == 0 && offspring_.kind != OffspringLaw::Kind::Fixed) return std::numeric_limits<double>::infinity();
  double best = 0.0;
  for (const auto& a : atoms_) best = std::max(best, std::exp(-a.value));
  return n * best;
}

double DisplacementLaw::sample_displacement(Rng& rng) const {
  const double u = rng.uniform();
  for (std::size_t i = 0; i + 1 < atoms_.size(); ++i)
    if (u < cumulative_[i]) return atoms_[i].value;
  return atoms_.back().value;
}

void DisplacementLaw::sample_generation(Rng& rng, std::vector<double>& out) const {
  const auto n = offspring_.sample(rng);
  for (std::uint32_t i = 0; i < n; ++i) out.push_back(sample_displacement(rng));
}

// ---------------------------------------------------------------------------

std::vector<double> default_params(Family family) {
  switch (family) {
    case Family::Degenerate: return {};
    case Family::Binary: return {0.25};
    case Family::Geometric: return {2.0, 0.25};
    case Family::Poisson: return {2.0, 0.2, 0.3, 0.5};
  }
  return {};
}

DisplacementLaw calibrate_law(Family family, std::span<const double> p) {
  std::vector<double> params(p.begin(), p.end());
  std::vector<Atom> atoms;
  OffspringLaw offspring;
  switch (family) {
    case Family::Degenerate:
      require(p.empty(), "degenerate family takes no parameters", p);
      offspring = {OffspringLaw::Kind::Fixed, 1.0};
      atoms = {{0.0, 1.0}};
      break;
    case Family::Binary:
      require(p.size() == 1, "f1 expects [q]", p);
      require(p[0] > 0.0 && p[0] < 1.0, "q must lie in (0, 1)", p);
      offspring = {OffspringLaw::Kind::Fixed, 2.0};
      atoms = solve_atoms(2.0, p[0], 0.0, 0.0, p);
      break;
    case Family::Geometric:
      require(p.size() == 2, "f2 expects [mean, q]", p);
      require(p[0] > 1.0 && std::isfinite(p[0]), "mean offspring must exceed 1", p);
      require(p[1] > 0.0 && p[1] < 1.0, "q must lie in (0, 1)", p);
      offspring = {OffspringLaw::Kind::Geometric, p[0]};
      atoms = solve_atoms(p[0], p[1], 0.0, 0.0, p);
      break;
    case Family::Poisson:
      require(p.size() == 4, "f3 expects [mean, q_u, q_c, c]", p);
      require(p[0] > 1.0 && std::isfinite(p[0]), "mean offspring must exceed 1", p);
      require(p[1] > 0.0 && p[2] >= 0.0 && p[1] + p[2] < 1.0, "need q_u > 0, q_c >= 0, q_u + q_c < 1", p);
      require(std::isfinite(p[3]), "middle atom must be finite", p);
      offspring = {OffspringLaw::Kind::Poisson, p[0]};
      atoms = solve_atoms(p[0], p[1], p[2], p[3], p);
      break;
  }
  DisplacementLaw law(family, std::move(params), offspring, std::move(atoms));
  if (!law.certify(law.certified_delta()).finite())
    throw CalibrationError("calibration: integrability condition fails for params=" + describe(p));
  if (!law.is_calibrated(kResidualTol)) {
    std::ostringstream os;
    os.precision(17);
    os << "calibration: residuals above tolerance (mass=" << law.mass_residual()
       << ", drift=" << law.drift_residual() << ") for params=" << describe(p);
    throw CalibrationError(os.str());
  }
  return law;
}

std::vector<std::string> preset_names() { return {"degenerate", "f1", "f2", "f3"}; }

DisplacementLaw preset_law(std::string_view name) {
  const Family f = parse_family(name);
  const auto params = default_params(f);
  return calibrate_law(f, params);
}

nlohmann::json law_document(const DisplacementLaw& law) {
  using nlohmann::json;
  json atoms = json::array();
  for (const auto& a : law.atoms()) atoms.push_back({{"value", a.value}, {"prob", a.prob}});
  const auto cert = law.certify(law.certified_delta());
  const char* kind = law.offspring().kind == OffspringLaw::Kind::Fixed       ? "fixed"
                     : law.offspring().kind == OffspringLaw::Kind::Geometric ? "geometric"
                                                                             : "poisson";
  return json{
      {"family", std::string(family_name(law.family()))},
      {"params", law.params()},
      {"atoms", atoms},
      {"offspring", {{"kind", kind}, {"mean", law.offspring().mean}}},
      {"residuals", {{"mass", law.mass_residual()}, {"drift", law.drift_residual()}}},
      {"sigma2", law.sigma2()},
      {"mean_offspring", law.mean_offspring()},
      {"supercritical", law.supercritical()},
      {"delta_certificate",
       {{"delta", cert.delta},
        {"tilted_exponential", cert.tilted_exponential},
        {"positive_exponential", cert.positive_exponential},
        {"offspring_moment", cert.offspring_moment},
        {"finite", cert.finite()}}},
  };
}

DisplacementLaw law_from_document(const nlohmann::json& doc) {
  try {
    const auto family = parse_family(doc.at("family").get<std::string>());
    const auto params = doc.contains("params") ? doc.at("params").get<std::vector<double>>() : default_params(family);
    return calibrate_law(family, params);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("law document: ") + e.what());
  }
}

}  // namespace brw
