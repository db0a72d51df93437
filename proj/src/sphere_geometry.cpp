#include "nnn/sphere_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "nnn/errors.hpp"
#include "nnn/random.hpp"

namespace nnn {

double UnitPoint::norm() const { return std::sqrt(x * x + y * y + z * z); }

const char* to_string(PatchId patch) { return patch == PatchId::North ? "North" : "South"; }

UnitPoint angles_to_cartesian(const SphericalAngles& a) {
  const double st = std::sin(a.theta);
  return {st * std::cos(a.phi), st * std::sin(a.phi), std::cos(a.theta)};
}

SphericalAngles cartesian_to_angles(const UnitPoint& pt) {
  const double theta = std::acos(std::clamp(pt.z, -1.0, 1.0));
  double phi = std::atan2(pt.y, pt.x);
  if (phi < 0.0) phi += 2.0 * kPi;
  if (phi >= 2.0 * kPi) phi = 0.0;
  return {theta, phi};
}

PatchCoords stereographic_project(const UnitPoint& pt, PatchId patch) {
  const double denom = patch == PatchId::North ? 1.0 + pt.z : 1.0 - pt.z;
  if (denom <= kPoleEpsilon) {
    throw ProjectionSingular(std::string("point lies on the excluded pole of the ") + to_string(patch) +
                             " chart");
  }
  const double p = pt.x / denom;
  const double q = pt.y / denom;
  return {patch, p, q, p * p + q * q};
}

UnitPoint stereographic_unproject(const PatchCoords& c) {
  const auto xyz = unproject(c.patch, c.p, c.q);
  return {xyz[0], xyz[1], xyz[2]};
}

double round_conformal_factor(double r_sq) { return round_conformal_factor_t(r_sq); }

PatchId hemisphere_patch(const UnitPoint& pt) { return pt.z >= 0.0 ? PatchId::North : PatchId::South; }

std::vector<SamplePoint> sample_uniform(std::size_t n, std::uint64_t seed, double radial_offset) {
  // The North disc of radius R is the cap z >= (1 - R^2) / (1 + R^2).
  const double radius = 1.0 + std::max(radial_offset, 0.0);
  const double cap_floor = (1.0 - radius * radius) / (1.0 + radius * radius);

  std::vector<SamplePoint> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double u_patch = counter_uniform(seed, 0, i);
    const double u_height = counter_uniform(seed, 1, i);
    const double u_phi = counter_uniform(seed, 2, i);
    const PatchId patch = u_patch < 0.5 ? PatchId::North : PatchId::South;
    double z = cap_floor + (1.0 - cap_floor) * u_height;
    if (patch == PatchId::South) z = -z;
    const double phi = 2.0 * kPi * u_phi;
    const double s = std::sqrt(std::max(0.0, 1.0 - z * z));
    out[i] = {{s * std::cos(phi), s * std::sin(phi), z}, patch};
  }
  return out;
}

GaussLegendreRule gauss_legendre(int n) {
  GaussLegendreRule rule;
  rule.nodes.resize(static_cast<std::size_t>(n));
  rule.weights.resize(static_cast<std::size_t>(n));
  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0;
      double p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    // Recompute the derivative at the converged node.
    double p0 = 1.0;
    double p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    if (n == 1) p0 = 1.0;
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    const auto lo = static_cast<std::size_t>(i);
    const auto hi = static_cast<std::size_t>(n - 1 - i);
    rule.nodes[lo] = -x;
    rule.nodes[hi] = x;
    rule.weights[lo] = w;
    rule.weights[hi] = w;
  }
  if (n % 2 == 1) rule.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
  return rule;
}

std::vector<QuadratureNode> quadrature_nodes(const QuadratureRule& rule) {
  std::vector<QuadratureNode> out;
  if (rule.kind == QuadratureRule::Kind::GaussLegendre) {
    const auto gl = gauss_legendre(rule.n_nodes);
    const int n_phi = 2 * rule.n_nodes;
    const double dphi = 2.0 * kPi / n_phi;
    out.reserve(gl.nodes.size() * static_cast<std::size_t>(n_phi));
    for (std::size_t i = 0; i < gl.nodes.size(); ++i) {
      const double z = gl.nodes[i];
      const double s = std::sqrt(1.0 - z * z);
      for (int j = 0; j < n_phi; ++j) {
        const double phi = dphi * j;
        out.push_back({{s * std::cos(phi), s * std::sin(phi), z}, gl.weights[i] * dphi});
      }
    }
  } else {
    const auto samples = sample_uniform(static_cast<std::size_t>(rule.n_nodes), rule.seed);
    const double w = kFourPi / rule.n_nodes;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back({s.point, w});
  }
  return out;
}

double integrate_sphere(const std::function<double(const UnitPoint&)>& f, const QuadratureRule& rule) {
  double total = 0.0;
  for (const auto& node : quadrature_nodes(rule)) {
    const double v = f(node.point);
    if (!std::isfinite(v)) throw QuadratureDiverged("integrand is non-finite at a quadrature node");
    total += node.weight * v;
  }
  return total;
}

}  // namespace nnn
