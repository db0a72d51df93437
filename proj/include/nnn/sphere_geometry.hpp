#pragma once

// Geometry of the round unit sphere: the two stereographic charts, uniform
// sampling, and quadrature of scalar fields.

#include <array>
#include <cstdint>
#include <functional>
#include <numbers>
#include <vector>

namespace nnn {

struct UnitPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 1.0;

  UnitPoint operator-() const { return {-x, -y, -z}; }
  double norm() const;
};

struct SphericalAngles {
  double theta = 0.0;  // polar angle in [0, pi]
  double phi = 0.0;    // azimuth in [0, 2 pi)
};

/// North covers the upper hemisphere and projects from the south pole; South
/// covers the lower hemisphere and projects from the north pole.
enum class PatchId { North, South };

const char* to_string(PatchId patch);

struct PatchCoords {
  PatchId patch = PatchId::North;
  double p = 0.0;
  double q = 0.0;
  double r_sq = 0.0;
};

struct QuadratureRule {
  enum class Kind { MonteCarlo, GaussLegendre };

  Kind kind = Kind::GaussLegendre;
  int n_nodes = 64;  // Gauss-Legendre: nodes in cos(theta); 2 * n_nodes are used in phi
  std::uint64_t seed = 0;

  static QuadratureRule gauss_legendre(int n_theta) { return {Kind::GaussLegendre, n_theta, 0}; }
  static QuadratureRule monte_carlo(int n_samples, std::uint64_t seed) {
    return {Kind::MonteCarlo, n_samples, seed};
  }
  /// 64 x 128 tensor rule used by all post-hoc diagnostics.
  static QuadratureRule diagnostics_default() { return gauss_legendre(64); }
};

struct SamplePoint {
  UnitPoint point;
  PatchId patch = PatchId::North;
};

/// A quadrature node on the sphere; weights of a rule sum to 4 pi.
struct QuadratureNode {
  UnitPoint point;
  double weight = 0.0;
};

/// Gauss-Legendre nodes and weights on [-1, 1].
struct GaussLegendreRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kFourPi = 4.0 * std::numbers::pi;
/// Exclusion radius around the pole a chart cannot represent.
inline constexpr double kPoleEpsilon = 1e-9;

UnitPoint angles_to_cartesian(const SphericalAngles& a);
SphericalAngles cartesian_to_angles(const UnitPoint& pt);

/// Throws ProjectionSingular when pt lies within kPoleEpsilon of the chart's
/// excluded pole.
PatchCoords stereographic_project(const UnitPoint& pt, PatchId patch);
UnitPoint stereographic_unproject(const PatchCoords& c);

/// Inverse chart map written generically so it can run on differentiable
/// scalars as well as doubles.
template <class T>
std::array<T, 3> unproject(PatchId patch, const T& p, const T& q) {
  const T r_sq = p * p + q * q;
  const T denom = r_sq + 1.0;
  const T x = (2.0 * p) / denom;
  const T y = (2.0 * q) / denom;
  T z = (1.0 - r_sq) / denom;
  if (patch == PatchId::South) z = -z;
  return {x, y, z};
}

/// lambda(r^2) = 4 / (1 + r^2)^2, the conformal factor of the round metric in
/// either chart.
double round_conformal_factor(double r_sq);

template <class T>
T round_conformal_factor_t(const T& r_sq) {
  const T d = r_sq + 1.0;
  return 4.0 / (d * d);
}

PatchId hemisphere_patch(const UnitPoint& pt);

/// n points uniformly distributed on the sphere, each tagged with the chart it
/// is evaluated in. Each point picks a chart with probability 1/2 and is drawn
/// uniformly from that chart's disc of radius 1 + radial_offset; for offset 0
/// this is exactly a uniform sample split by hemisphere.
std::vector<SamplePoint> sample_uniform(std::size_t n, std::uint64_t seed, double radial_offset = 0.0);

GaussLegendreRule gauss_legendre(int n);

std::vector<QuadratureNode> quadrature_nodes(const QuadratureRule& rule);

/// Approximates the integral of f over the sphere with respect to the round area
/// element. Throws QuadratureDiverged if f is non-finite at any node.
double integrate_sphere(const std::function<double(const UnitPoint&)>& f, const QuadratureRule& rule);

}  // namespace nnn
