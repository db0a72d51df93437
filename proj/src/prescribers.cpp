#include "nnn/prescribers.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <memory>
#include <regex>
#include <stdexcept>

#include "nnn/errors.hpp"

namespace nnn {

namespace fm {
using ad::cos;
using ad::cosh;
using ad::exp;
using ad::tanh;
using std::cos;
using std::cosh;
using std::exp;
using std::tanh;
}  // namespace fm

const char* to_string(RealisabilityStatus s) {
  switch (s) {
    case RealisabilityStatus::KnownRealisable:
      return "KnownRealisable";
    case RealisabilityStatus::KnownUnrealisable:
      return "KnownUnrealisable";
    case RealisabilityStatus::Unknown:
      break;
  }
  return "Unknown";
}

const char* to_string(ZonalVerdict v) {
  switch (v) {
    case ZonalVerdict::Solvable:
      return "Solvable";
    case ZonalVerdict::Unsolvable:
      return "Unsolvable";
    case ZonalVerdict::Degenerate:
      break;
  }
  return "Degenerate";
}

SphereField constant_field(double c) {
  return {[c](const UnitPoint&) { return c; },
          [c](const ad::Var&, const ad::Var&, const ad::Var&) { return ad::Var(c); }};
}

void SpectralPairSpec::validate() const {
  for (const auto& [idx, c] : coeffs) {
    if (!idx.valid()) throw std::invalid_argument("spectral pair: invalid harmonic index");
    if (idx.ell < 1) throw std::invalid_argument("spectral pair: l = 0 coefficients are not allowed");
    if (!std::isfinite(c)) throw std::invalid_argument("spectral pair: non-finite coefficient");
  }
}

std::array<double, 3> Prescriber::grad_K(const UnitPoint& pt) const {
  const std::array<double, 3> n{pt.x, pt.y, pt.z};
  std::array<double, 3> g{};
  if (K.var) {
    ad::Tape tape;
    const auto leaves = tape.variables(std::array<double, 3>{pt.x, pt.y, pt.z});
    g = {0.0, 0.0, 0.0};
    const auto grad = tape.gradient_values(K.var(leaves[0], leaves[1], leaves[2]), leaves);
    std::copy(grad.begin(), grad.end(), g.begin());
    const double dot = g[0] * n[0] + g[1] * n[1] + g[2] * n[2];
    for (int i = 0; i < 3; ++i) g[static_cast<std::size_t>(i)] -= dot * n[static_cast<std::size_t>(i)];
    return g;
  }
  // Orthonormal tangent frame (e1, e2) at pt, then directional differences along
  // great circles through pt.
  const std::array<double, 3> helper = std::abs(pt.z) < 0.9 ? std::array<double, 3>{0, 0, 1}
                                                             : std::array<double, 3>{1, 0, 0};
  const double hd = helper[0] * n[0] + helper[1] * n[1] + helper[2] * n[2];
  std::array<double, 3> e1{helper[0] - hd * n[0], helper[1] - hd * n[1], helper[2] - hd * n[2]};
  const double e1n = std::sqrt(e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]);
  for (auto& v : e1) v /= e1n;
  const std::array<double, 3> e2{n[1] * e1[2] - n[2] * e1[1], n[2] * e1[0] - n[0] * e1[2],
                                 n[0] * e1[1] - n[1] * e1[0]};
  constexpr double h = 1e-5;
  auto along = [&](const std::array<double, 3>& e, double t) {
    const double c = std::cos(t);
    const double s = std::sin(t);
    return UnitPoint{c * n[0] + s * e[0], c * n[1] + s * e[1], c * n[2] + s * e[2]};
  };
  const double d1 = (K.value(along(e1, h)) - K.value(along(e1, -h))) / (2.0 * h);
  const double d2 = (K.value(along(e2, h)) - K.value(along(e2, -h))) / (2.0 * h);
  for (std::size_t i = 0; i < 3; ++i) g[i] = d1 * e1[i] + d2 * e2[i];
  return g;
}

double pde_residual(const SphereField& u, const SphereField& K, const UnitPoint& pt) {
  const PatchId patch = hemisphere_patch(pt);
  const double lap = laplace_beltrami(u.var, stereographic_project(pt, patch));
  return 1.0 - lap - K.value(pt) * std::exp(2.0 * u.value(pt));
}

namespace {

struct SpectralTerms {
  std::vector<HarmonicIndex> idx;
  std::vector<double> c;
  HarmonicConvention conv;

  template <class T>
  T u(const T& x, const T& y, const T& z) const {
    T acc = T(0.0);
    for (std::size_t k = 0; k < idx.size(); ++k) {
      const double eig = idx[k].ell * (idx[k].ell + 1.0);
      acc = acc + (c[k] / eig) * real_harmonic_t(idx[k], x, y, z, conv);
    }
    return acc;
  }

  template <class T>
  T source(const T& x, const T& y, const T& z) const {
    T acc = T(1.0);
    for (std::size_t k = 0; k < idx.size(); ++k) acc = acc + c[k] * real_harmonic_t(idx[k], x, y, z, conv);
    return acc;
  }
};

std::string describe_spec(const SpectralPairSpec& spec) {
  std::string out;
  char buf[64];
  for (const auto& [idx, c] : spec.coeffs) {
    std::snprintf(buf, sizeof buf, "%sc_%d_%d=%.6g", out.empty() ? "" : ", ", idx.ell, idx.m, c);
    out += buf;
  }
  return out.empty() ? "1" : "spectral pair (" + out + ")";
}

}  // namespace

Prescriber spectral_pair(const SpectralPairSpec& spec, HarmonicConvention convention, std::string name) {
  spec.validate();
  auto terms = std::make_shared<SpectralTerms>();
  terms->conv = convention;
  for (const auto& [idx, c] : spec.coeffs) {
    terms->idx.push_back(idx);
    terms->c.push_back(c);
  }

  Prescriber out;
  out.name = std::move(name);
  out.formula = describe_spec(spec);
  out.status = RealisabilityStatus::KnownRealisable;
  out.spectral = spec;
  out.convention = convention;
  out.u_true = make_field([terms](const auto& x, const auto& y, const auto& z) { return terms->u(x, y, z); });
  out.K = make_field([terms](const auto& x, const auto& y, const auto& z) {
    return fm::exp(-2.0 * terms->u(x, y, z)) * terms->source(x, y, z);
  });

  double worst = 0.0;
  for (const auto& node : quadrature_nodes(QuadratureRule::gauss_legendre(23))) {
    worst = std::max(worst, std::abs(pde_residual(*out.u_true, out.K, node.point)));
  }
  if (!(worst < 1e-9)) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "spectral pair '%s': PDE residual %.3e exceeds 1e-9", out.name.c_str(), worst);
    throw ResidualCheckFailed(buf);
  }
  return out;
}

namespace {

using RS = RealisabilityStatus;

template <class F>
Prescriber analytic(std::string name, std::string formula, RS status, F f) {
  Prescriber p;
  p.name = std::move(name);
  p.formula = std::move(formula);
  p.status = status;
  p.K = make_field(f);
  return p;
}

RS harmonic_status(HarmonicIndex idx) {
  if (idx.ell == 1) return RS::KnownUnrealisable;
  if (idx.ell % 2 == 0) return RS::KnownRealisable;
  if (idx.m == 0) return RS::KnownRealisable;
  return RS::Unknown;
}

Prescriber harmonic_prescriber(HarmonicIndex idx, HarmonicConvention conv) {
  Prescriber p;
  p.name = "sh_" + std::to_string(idx.ell) + "_" + std::to_string(idx.m);
  p.formula = "Y_" + std::to_string(idx.ell) + "," + std::to_string(idx.m) + " (" + to_string(conv) + ")";
  p.status = harmonic_status(idx);
  p.convention = conv;
  p.K = make_field([idx, conv](const auto& x, const auto& y, const auto& z) {
    return real_harmonic_t(idx, x, y, z, conv);
  });
  return p;
}

SpectralPairSpec spec_of(std::initializer_list<std::pair<HarmonicIndex, double>> entries) {
  SpectralPairSpec s;
  for (const auto& [idx, c] : entries) s.coeffs[idx] = c;
  return s;
}

Prescriber named_pair(std::string name, const SpectralPairSpec& spec, std::string formula) {
  Prescriber p = spectral_pair(spec, HarmonicConvention::Unnormalised, std::move(name));
  p.formula = std::move(formula);
  return p;
}

std::vector<Prescriber> build_registry() {
  std::vector<Prescriber> r;
  for (const HarmonicIndex idx : {HarmonicIndex{2, 0}, HarmonicIndex{3, 0}, HarmonicIndex{1, 0}, HarmonicIndex{1, 1},
                                  HarmonicIndex{3, 1}, HarmonicIndex{3, 2}, HarmonicIndex{3, 3}}) {
    r.push_back(harmonic_prescriber(idx, HarmonicConvention::Orthonormal));
  }

  {
    Prescriber round = spectral_pair({}, HarmonicConvention::Unnormalised, "round");
    round.formula = "1";
    r.push_back(std::move(round));
  }

  r.push_back(named_pair("prop_a", spec_of({{{2, 0}, 1.0}}), "spectral pair c_2_0=1: 3z^2 exp((1 - 3z^2)/3)"));
  r.push_back(analytic("cosh_profile", "2 cosh(z)", RS::KnownRealisable,
                       [](const auto& x, const auto& y, const auto& z) {
                         (void)x;
                         (void)y;
                         return 2.0 * fm::cosh(z);
                       }));
  r.push_back(named_pair("prop_b", spec_of({{{1, 1}, 1.0 / 6.0}, {{2, 2}, 1.0 / 18.0}, {{3, 1}, 3.0 / 11.0}}),
                         "spectral pair c_1_1=1/6, c_2_2=1/18, c_3_1=3/11"));
  r.push_back(analytic("tanh_wave", "tanh(2z^2) + z^2 + 0.5", RS::KnownRealisable,
                       [](const auto& x, const auto& y, const auto& z) {
                         (void)x;
                         (void)y;
                         return fm::tanh(2.0 * (z * z)) + z * z + 0.5;
                       }));
  r.push_back(analytic("egg", "(1.5 + z)^2 (1.2 - z)", RS::KnownRealisable,
                       [](const auto& x, const auto& y, const auto& z) {
                         (void)x;
                         (void)y;
                         return (1.5 + z) * (1.5 + z) * (1.2 - z);
                       }));
  r.push_back(analytic("5cos3_1", "5z^3 - 3z + 1", RS::KnownRealisable,
                       [](const auto& x, const auto& y, const auto& z) {
                         (void)x;
                         (void)y;
                         return 5.0 * (z * z * z) - 3.0 * z + 1.0;
                       }));
  r.push_back(analytic("cos2_theta_plus_offset", "z^2 + 0.2", RS::KnownRealisable,
                       [](const auto& x, const auto& y, const auto& z) {
                         (void)x;
                         (void)y;
                         return z * z + 0.2;
                       }));
  r.push_back(named_pair("prop_c", spec_of({{{1, 1}, 2.0}, {{2, 2}, 6.0}, {{3, 1}, 12.0}}),
                         "spectral pair c_1_1=2, c_2_2=6, c_3_1=12"));
  // cos(3 theta) = 4z^3 - 3z
  r.push_back(analytic("sinusoidal", "1 + 0.5 cos(3 theta)", RS::KnownRealisable,
                       [](const auto& x, const auto& y, const auto& z) {
                         (void)x;
                         (void)y;
                         return 1.0 + 0.5 * (4.0 * (z * z * z) - 3.0 * z);
                       }));

  r.push_back(analytic("monotonic_exp", "exp(2z)", RS::KnownUnrealisable,
                       [](const auto& x, const auto& y, const auto& z) {
                         (void)x;
                         (void)y;
                         return fm::exp(2.0 * z);
                       }));
  r.push_back(analytic("nodal_crossing", "z^2 - 0.9", RS::KnownUnrealisable,
                       [](const auto& x, const auto& y, const auto& z) {
                         (void)x;
                         (void)y;
                         return z * z - 0.9;
                       }));
  r.push_back(analytic("two_plus_y", "2 + y", RS::KnownUnrealisable,
                       [](const auto& x, const auto& y, const auto& z) {
                         (void)x;
                         (void)z;
                         return 2.0 + y;
                       }));
  r.push_back(analytic("two_plus_x", "2 + x", RS::KnownUnrealisable,
                       [](const auto& x, const auto& y, const auto& z) {
                         (void)y;
                         (void)z;
                         return 2.0 + x;
                       }));
  r.push_back(analytic("z_plus_x_squared_over_4", "z + x^2/4", RS::KnownUnrealisable,
                       [](const auto& x, const auto& y, const auto& z) {
                         (void)y;
                         return z + 0.25 * (x * x);
                       }));
  r.push_back(analytic("z_plus_xy", "z + xy", RS::KnownUnrealisable,
                       [](const auto& x, const auto& y, const auto& z) { return z + x * y; }));
  r.push_back(analytic("negative_dip", "-1/(1 + z^2)", RS::KnownUnrealisable,
                       [](const auto& x, const auto& y, const auto& z) {
                         (void)x;
                         (void)y;
                         return -1.0 / (1.0 + z * z);
                       }));

  r.push_back(analytic("x2_minus_y2_plus_z", "x^2 - y^2 + z", RS::Unknown,
                       [](const auto& x, const auto& y, const auto& z) { return x * x - y * y + z; }));
  r.push_back(analytic("x2_plus_2yz_plus_3x2_plus_x_plus_y", "x^2 + 2y^2 + 3z^2 + x + y", RS::Unknown,
                       [](const auto& x, const auto& y, const auto& z) {
                         return x * x + 2.0 * (y * y) + 3.0 * (z * z) + x + y;
                       }));
  r.push_back(analytic("xz_plus_yz_plus_x", "x^2 + yz + x", RS::Unknown,
                       [](const auto& x, const auto& y, const auto& z) { return x * x + y * z + x; }));
  r.push_back(analytic("x2_plus_yz_plus_x_plus_1", "x^2 + yz + x + 1", RS::Unknown,
                       [](const auto& x, const auto& y, const auto& z) { return x * x + y * z + x + 1.0; }));
  r.push_back(analytic("xy_plus_x_plus_y", "xy + x + y", RS::Unknown,
                       [](const auto& x, const auto& y, const auto& z) {
                         (void)z;
                         return x * y + x + y;
                       }));
  r.push_back(analytic("yz_plus_xz_plus_z_minus_1", "y^2 + xz + z - 1", RS::Unknown,
                       [](const auto& x, const auto& y, const auto& z) { return y * y + x * z + z - 1.0; }));
  return r;
}

const std::map<std::string, std::string>& aliases() {
  static const std::map<std::string, std::string> table = {
      {"x2_plus_2y2_plus_3z2_plus_x_plus_y", "x2_plus_2yz_plus_3x2_plus_x_plus_y"},
      {"x2_plus_yz_plus_x", "xz_plus_yz_plus_x"},
      {"y2_plus_xz_plus_z_minus_1", "yz_plus_xz_plus_z_minus_1"},
  };
  return table;
}

}  // namespace

const std::vector<Prescriber>& registry() {
  static const std::vector<Prescriber> table = build_registry();
  return table;
}

Prescriber registry_lookup(const std::string& name, HarmonicConvention sh_convention) {
  static const std::regex sh_pattern(R"(sh_(\d+)_(-?\d+))");
  std::smatch match;
  if (std::regex_match(name, match, sh_pattern)) {
    const HarmonicIndex idx{std::stoi(match[1].str()), std::stoi(match[2].str())};
    if (!idx.valid() || idx.ell < 1 || idx.ell > kMaxHarmonicDegree) {
      throw UnknownPrescriber("no harmonic prescriber named '" + name + "'");
    }
    return harmonic_prescriber(idx, sh_convention);
  }
  std::string canonical = name;
  if (const auto it = aliases().find(name); it != aliases().end()) canonical = it->second;
  for (const auto& p : registry()) {
    if (p.name == canonical) return p;
  }
  throw UnknownPrescriber("no prescriber named '" + name + "'");
}

PositivityResult positivity_check(const Prescriber& K, std::size_t n_samples, std::uint64_t seed) {
  PositivityResult out;
  out.max_value = -std::numeric_limits<double>::infinity();
  for (const auto& s : sample_uniform(n_samples, seed)) {
    const double v = K(s.point);
    if (v > out.max_value) {
      out.max_value = v;
      out.witness = s.point;
    }
  }
  out.positive = out.max_value > 0.0;
  return out;
}

ZonalVerdict zonal_solvability(const std::function<double(double)>& k_theta, int grid_n) {
  if (grid_n < 64) throw std::invalid_argument("zonal_solvability: grid_n must be at least 64");
  const auto n = static_cast<std::size_t>(grid_n);
  const double h = kPi / static_cast<double>(grid_n - 1);
  std::vector<double> k(n);
  double k_scale = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    k[i] = k_theta(h * static_cast<double>(i));
    k_scale = std::max(k_scale, std::abs(k[i]));
  }
  const bool positive_somewhere = std::any_of(k.begin(), k.end(), [](double v) { return v > 0.0; });
  if (!positive_somewhere) return ZonalVerdict::Unsolvable;

  // Central differences at interior nodes; |K'| below the tolerance counts as zero.
  const double tol = 1e-8 * std::max(k_scale, 1.0);
  std::vector<int> sign(n, 0);
  std::vector<double> dk(n, 0.0);
  for (std::size_t i = 1; i + 1 < n; ++i) {
    dk[i] = (k[i + 1] - k[i - 1]) / (2.0 * h);
    sign[i] = std::abs(dk[i]) <= tol ? 0 : (dk[i] > 0.0 ? 1 : -1);
  }

  std::size_t zero_run = 0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    zero_run = sign[i] == 0 ? zero_run + 1 : 0;
    if (zero_run >= 3) return ZonalVerdict::Degenerate;
  }

  bool degenerate_crossing = false;
  std::size_t last = 0;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (sign[i] == 0) continue;
    if (last != 0 && sign[i] != sign[last]) {
      bool inside_positive = true;
      for (std::size_t j = last; j <= i; ++j) inside_positive = inside_positive && k[j] > 0.0;
      if (inside_positive) {
        const double curvature = std::abs(dk[i] - dk[last]) / (h * static_cast<double>(i - last));
        if (curvature > tol) return ZonalVerdict::Solvable;
        degenerate_crossing = true;
      }
    }
    last = i;
  }
  return degenerate_crossing ? ZonalVerdict::Degenerate : ZonalVerdict::Unsolvable;
}

double kazdan_warner_integral(const Prescriber& K, const std::function<double(const UnitPoint&)>& u, Axis axis,
                              const QuadratureRule& rule) {
  const auto component = static_cast<std::size_t>(axis);
  // grad F for F = coordinate is the tangential part of the axis vector, so
  // <grad K, grad F> is just the axis component of the tangential grad K.
  return integrate_sphere(
      [&](const UnitPoint& pt) { return K.grad_K(pt)[component] * std::exp(2.0 * u(pt)); }, rule);
}

}  // namespace nnn
