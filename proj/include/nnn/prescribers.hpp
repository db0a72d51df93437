#pragma once

// Prescribed curvature functions K: the named corpus, exact spectral pairs,
// and the analytic screens (positivity, zonal criterion, Kazdan-Warner).

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "nnn/conformal_net.hpp"
#include "nnn/harmonics.hpp"
#include "nnn/sphere_geometry.hpp"

namespace nnn {

enum class RealisabilityStatus { KnownRealisable, KnownUnrealisable, Unknown };

const char* to_string(RealisabilityStatus s);

/// A scalar field on the sphere available both as plain doubles and on tape.
struct SphereField {
  std::function<double(const UnitPoint&)> value;
  AmbientField var;

  double operator()(const UnitPoint& pt) const { return value(pt); }
};

/// Builds a SphereField from one generic callable f(x, y, z) that accepts
/// doubles and ad::Var alike.
template <class F>
SphereField make_field(F f) {
  return {[f](const UnitPoint& pt) { return static_cast<double>(f(pt.x, pt.y, pt.z)); },
          [f](const ad::Var& x, const ad::Var& y, const ad::Var& z) { return ad::Var(f(x, y, z)); }};
}

SphereField constant_field(double c);

struct SpectralPairSpec {
  std::map<HarmonicIndex, double> coeffs;

  /// Throws std::invalid_argument on an l = 0 entry or invalid index.
  void validate() const;
};

struct Prescriber {
  std::string name;
  std::string formula;
  RealisabilityStatus status = RealisabilityStatus::Unknown;
  SphereField K;
  std::optional<SphereField> u_true;
  std::optional<SpectralPairSpec> spectral;
  HarmonicConvention convention = HarmonicConvention::Orthonormal;

  double operator()(const UnitPoint& pt) const { return K.value(pt); }

  /// Tangential gradient of K with respect to the round metric. Uses the taped
  /// form when available, else central differences with h = 1e-5 along two
  /// tangent directions.
  std::array<double, 3> grad_K(const UnitPoint& pt) const;
};

/// Residual 1 - Delta u - K e^{2u} at pt, evaluated in the hemisphere chart.
double pde_residual(const SphereField& u, const SphereField& K, const UnitPoint& pt);

/// u = sum c/(l(l+1)) Y, K = e^{-2u} (1 + sum c Y). Runs the residual check at
/// 1000 quadrature nodes and throws ResidualCheckFailed above 1e-9.
Prescriber spectral_pair(const SpectralPairSpec& spec, HarmonicConvention convention, std::string name = "spectral_pair");

/// Every entry of the named corpus, in table order.
const std::vector<Prescriber>& registry();
/// Accepts corpus names, their aliases, and sh_<l>_<m> for any l <= 12.
/// Throws UnknownPrescriber.
Prescriber registry_lookup(const std::string& name,
                           HarmonicConvention sh_convention = HarmonicConvention::Orthonormal);

struct PositivityResult {
  bool positive = false;
  UnitPoint witness;
  double max_value = 0.0;
};

/// Probabilistic screen: samples n points and reports the largest K.
PositivityResult positivity_check(const Prescriber& K, std::size_t n_samples, std::uint64_t seed = 0);

enum class ZonalVerdict { Solvable, Unsolvable, Degenerate };

const char* to_string(ZonalVerdict v);

/// Sign-change test for K'(theta) on a uniform grid over [0, pi].
ZonalVerdict zonal_solvability(const std::function<double(double)>& k_theta, int grid_n);

enum class Axis { X, Y, Z };

/// Integral of <grad K, grad F> e^{2u} dA with F the chosen coordinate.
double kazdan_warner_integral(const Prescriber& K, const std::function<double(const UnitPoint&)>& u, Axis axis,
                              const QuadratureRule& rule);

}  // namespace nnn
