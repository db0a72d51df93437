#include "nnn/harmonics.hpp"

#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace nnn {

namespace {

std::int64_t binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  std::int64_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return r;
}

HarmonicPolynomial build(int ell, int m) {
  HarmonicPolynomial poly;
  const int am = std::abs(m);

  // 2^l P_l(z) = sum_k (-1)^k C(l,k) C(2l-2k,l) z^(l-2k), then differentiate |m| times.
  std::vector<std::int64_t> c(static_cast<std::size_t>(ell) + 1, 0);
  for (int k = 0; 2 * k <= ell; ++k) {
    const std::int64_t term = binomial(ell, k) * binomial(2 * ell - 2 * k, ell);
    c[static_cast<std::size_t>(ell - 2 * k)] = (k % 2 == 0) ? term : -term;
  }
  for (int d = 0; d < am; ++d) {
    for (std::size_t p = 0; p + 1 < c.size(); ++p) c[p] = c[p + 1] * static_cast<std::int64_t>(p + 1);
    c.back() = 0;
  }
  std::int64_t z_content = 0;
  for (auto v : c) z_content = std::gcd(z_content, v < 0 ? -v : v);
  poly.z_degree = ell - am;
  for (int p = 0; p <= poly.z_degree; ++p) {
    poly.z_coeffs[static_cast<std::size_t>(p)] =
        static_cast<double>(c[static_cast<std::size_t>(p)] / z_content);
  }

  // Content of Re/Im (x + iy)^|m| as an integer polynomial.
  std::int64_t trig_content = 0;
  if (am == 0) {
    trig_content = 1;
  } else {
    for (int k = (m < 0 ? 1 : 0); k <= am; k += 2) trig_content = std::gcd(trig_content, binomial(am, k));
  }
  poly.trig_order = am;
  poly.sine = m < 0;
  poly.trig_content = static_cast<double>(trig_content);

  // Orthonormal: N_lm * 2^-l * d^m(2^l P_l) * T_m, N_lm = sqrt((2l+1)/(4 pi) (l-m)!/(l+m)!),
  // times sqrt(2) for m != 0.
  double factorial_ratio = 1.0;
  for (int k = ell - am + 1; k <= ell + am; ++k) factorial_ratio /= k;
  double norm = std::sqrt((2.0 * ell + 1.0) / (4.0 * kPi) * factorial_ratio);
  if (am != 0) norm *= std::sqrt(2.0);
  poly.orthonormal_scale = norm * std::ldexp(1.0, -ell) * static_cast<double>(z_content) *
                           static_cast<double>(trig_content);
  return poly;
}

struct HarmonicTable {
  std::vector<HarmonicPolynomial> entries;
  HarmonicTable() {
    for (int l = 0; l <= kMaxHarmonicDegree; ++l) {
      for (int m = -l; m <= l; ++m) entries.push_back(build(l, m));
    }
  }
};

}  // namespace

const char* to_string(HarmonicConvention c) {
  return c == HarmonicConvention::Orthonormal ? "orthonormal" : "unnormalised";
}

HarmonicConvention harmonic_convention_from_string(const std::string& s) {
  if (s == "orthonormal" || s == "Orthonormal") return HarmonicConvention::Orthonormal;
  if (s == "unnormalised" || s == "Unnormalised" || s == "unnormalized") return HarmonicConvention::Unnormalised;
  throw std::invalid_argument("unknown harmonic convention '" + s + "'");
}

const HarmonicPolynomial& harmonic_polynomial(HarmonicIndex idx) {
  if (!idx.valid()) {
    throw std::invalid_argument("invalid harmonic index (" + std::to_string(idx.ell) + ", " +
                                std::to_string(idx.m) + ")");
  }
  if (idx.ell > kMaxHarmonicDegree) {
    throw std::invalid_argument("harmonic degree above " + std::to_string(kMaxHarmonicDegree));
  }
  static const HarmonicTable table;
  return table.entries[static_cast<std::size_t>(idx.ell * idx.ell + idx.ell + idx.m)];
}

double real_harmonic(HarmonicIndex idx, const UnitPoint& pt, HarmonicConvention conv) {
  return real_harmonic_t(idx, pt.x, pt.y, pt.z, conv);
}

std::vector<HarmonicIndex> harmonic_indices(int max_degree, int min_degree) {
  std::vector<HarmonicIndex> out;
  for (int l = min_degree; l <= max_degree; ++l) {
    for (int m = -l; m <= l; ++m) out.push_back({l, m});
  }
  return out;
}

}  // namespace nnn
