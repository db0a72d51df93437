#pragma once

// Real spherical harmonics written as polynomials in (x, y, z).
//
// Y_{l,m} is a positive multiple of Q_{l,|m|}(z) * T_m(x, y) where Q is the
// m-th derivative of the Legendre polynomial P_l and T_m is Re (x + iy)^m for
// m >= 0 or Im (x + iy)^|m| for m < 0. No Condon-Shortley phase is applied,
// so Y_{1,1} is proportional to +x and Y_{1,-1} to +y.
//
// Two normalisations are provided:
//   Orthonormal   integral of Y_{l,m} Y_{l',m'} over the sphere is a Kronecker delta.
//   Unnormalised  the primitive integer polynomial with positive leading
//                 coefficient, e.g. 3z^2 - 1, x(5z^2 - 1), x^2 - y^2.

#include <array>
#include <string>

#include "nnn/sphere_geometry.hpp"

namespace nnn {

enum class HarmonicConvention { Orthonormal, Unnormalised };

const char* to_string(HarmonicConvention c);
HarmonicConvention harmonic_convention_from_string(const std::string& s);

struct HarmonicIndex {
  int ell = 0;
  int m = 0;

  bool valid() const { return ell >= 0 && m >= -ell && m <= ell; }
  auto operator<=>(const HarmonicIndex&) const = default;
};

inline constexpr int kMaxHarmonicDegree = 12;

/// Precomputed polynomial data for one (l, m).
struct HarmonicPolynomial {
  std::array<double, kMaxHarmonicDegree + 1> z_coeffs{};  // primitive integer coefficients, by power
  int z_degree = 0;
  int trig_order = 0;  // |m|
  bool sine = false;   // m < 0
  double trig_content = 1.0;
  double orthonormal_scale = 1.0;  // Orthonormal = orthonormal_scale * Unnormalised
};

/// Throws std::invalid_argument for invalid indices or degree above
/// kMaxHarmonicDegree.
const HarmonicPolynomial& harmonic_polynomial(HarmonicIndex idx);

template <class T>
T evaluate_harmonic(const HarmonicPolynomial& poly, const T& x, const T& y, const T& z, HarmonicConvention conv) {
  T zpart = T(poly.z_coeffs[static_cast<std::size_t>(poly.z_degree)]);
  for (int k = poly.z_degree - 1; k >= 0; --k) zpart = zpart * z + poly.z_coeffs[static_cast<std::size_t>(k)];
  T re = T(1.0);
  T im = T(0.0);
  for (int k = 0; k < poly.trig_order; ++k) {
    const T next_re = re * x - im * y;
    const T next_im = re * y + im * x;
    re = next_re;
    im = next_im;
  }
  const T trig = poly.sine ? im : re;
  const double scale = (conv == HarmonicConvention::Orthonormal ? poly.orthonormal_scale : 1.0) / poly.trig_content;
  return (zpart * trig) * scale;
}

template <class T>
T real_harmonic_t(HarmonicIndex idx, const T& x, const T& y, const T& z,
                  HarmonicConvention conv = HarmonicConvention::Orthonormal) {
  return evaluate_harmonic(harmonic_polynomial(idx), x, y, z, conv);
}

double real_harmonic(HarmonicIndex idx, const UnitPoint& pt, HarmonicConvention conv = HarmonicConvention::Orthonormal);

/// All (l, m) with 1 <= l <= max_degree, ordered by l then m = -l..l.
std::vector<HarmonicIndex> harmonic_indices(int max_degree, int min_degree = 1);

}  // namespace nnn
