#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "brw/rng.hpp"

namespace brw {

/// Built-in parametric families for the one-generation point process.
enum class Family {
  Degenerate,  // N = 1, A = 0: satisfies the moment equations trivially
  Binary,      // "f1": N = 2, i.i.d. two-point displacements
  Geometric,   // "f2": geometric offspring, i.i.d. two-point displacements
  Poisson,     // "f3": Poisson offspring, i.i.d. three-point displacements
};

std::string_view family_name(Family f);
Family parse_family(std::string_view name);

struct OffspringLaw {
  enum class Kind { Fixed, Geometric, Poisson };
  Kind kind = Kind::Fixed;
  double mean = 1.0;  // for Fixed this is the (integer) count

  std::uint32_t sample(Rng& rng) const;
  double probability(std::uint32_t k) const;
  /// E[N^s] by direct summation of the mass function.
  double moment(double s) const;
  /// E[N(N-1)].
  double factorial_moment2() const;
  /// Largest possible count, or 0 if unbounded.
  std::uint32_t max_count() const;
};

struct Atom {
  double value = 0.0;
  double prob = 0.0;
};

/// The three expectations of the integrability condition at a given delta.
struct IntegrabilityCertificate {
  double delta = 0.0;
  double tilted_exponential = 0.0;  // E sum e^{-(1+delta)V}
  double positive_exponential = 0.0;  // E sum e^{delta V}
  double offspring_moment = 0.0;  // E N^{1+delta}
  bool finite() const;
};

/// Law of the first generation: offspring count N and i.i.d. displacements A
/// (independent of N). V of a child is V(parent) + A.
class DisplacementLaw {
 public:
  DisplacementLaw() = default;
  DisplacementLaw(Family family, std::vector<double> free_params, OffspringLaw offspring,
                  std::vector<Atom> atoms);

  Family family() const { return family_; }
  const std::vector<double>& params() const { return params_; }
  const OffspringLaw& offspring() const { return offspring_; }
  const std::vector<Atom>& atoms() const { return atoms_; }

  double mean_offspring() const { return offspring_.mean; }
  bool supercritical() const { return offspring_.mean > 1.0; }

  /// E[sum_{|x|=1} f(V(x))] as an exact finite sum.
  template <typename F>
  double first_generation_sum(F&& f) const {
    double s = 0.0;
    for (const auto& a : atoms_) s += a.prob * f(a.value);
    return offspring_.mean * s;
  }

  /// E[sum e^{-V}] - 1.
  double mass_residual() const;
  /// E[sum V e^{-V}].
  double drift_residual() const;
  /// E[sum V^2 e^{-V}].
  double sigma2() const;
  bool is_calibrated(double tol = 1e-10) const;

  IntegrabilityCertificate certify(double delta) const;
  /// The delta this law is certified with (every built-in family admits 1).
  double certified_delta() const { return certificate_delta_; }

  /// E[(1 + sum e^{-V})^2], closed form from the first two moments.
  double lambda_second_moment() const;
  /// Largest value of sum_{|x|=1} e^{-V(x)}, or +inf if unbounded.
  double max_lambda() const;

  double sample_displacement(Rng& rng) const;
  /// Appends the displacements of one generation (count and values) to `out`.
  void sample_generation(Rng& rng, std::vector<double>& out) const;

 private:
  Family family_ = Family::Degenerate;
  std::vector<double> params_;
  OffspringLaw offspring_;
  std::vector<Atom> atoms_;
  std::vector<double> cumulative_;
  double certificate_delta_ = 1.0;
};

/// Solves the boundary-case equations for the family's two free atoms.
/// Free parameters:
///   degenerate: none
///   f1: [q]                 P(A = u) = q, N = 2
///   f2: [mean, q]           geometric offspring with the given mean
///   f3: [mean, q_u, q_c, c] Poisson offspring, atoms {u, c, v}
/// Throws CalibrationError when the bracket has no sign change.
DisplacementLaw calibrate_law(Family family, std::span<const double> free_params);

/// Shipped presets: "degenerate", "f1", "f2", "f3".
DisplacementLaw preset_law(std::string_view name);
std::vector<std::string> preset_names();

/// Default free parameters of a family.
std::vector<double> default_params(Family family);

/// Structured document: family, params, atoms, residuals, sigma2,
/// mean_offspring, delta_certificate.
nlohmann::json law_document(const DisplacementLaw& law);
DisplacementLaw law_from_document(const nlohmann::json& doc);

}  // namespace brw
