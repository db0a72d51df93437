#pragma once

// Truncated harmonic ansatz u~ = sum c/(l(l+1)) Y fitted to a trained network,
// and the curvature it induces through the spectral-pair identity.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "nnn/harmonics.hpp"
#include "nnn/prescribers.hpp"

namespace nnn {

struct ExpansionCoeffs {
  int L = 4;
  HarmonicConvention convention = HarmonicConvention::Orthonormal;
  std::vector<double> c;  // ordered by l = 1..L, then m = -l..l

  static ExpansionCoeffs zeros(int L, HarmonicConvention conv = HarmonicConvention::Orthonormal);
  static std::size_t size_for(int L) { return static_cast<std::size_t>((L + 1) * (L + 1) - 1); }
  static std::size_t index_of(HarmonicIndex idx) {
    return static_cast<std::size_t>(idx.ell * idx.ell - 1 + idx.ell + idx.m);
  }

  double at(HarmonicIndex idx) const { return c.at(index_of(idx)); }
  double& at(HarmonicIndex idx) { return c.at(index_of(idx)); }
  std::vector<HarmonicIndex> indices() const { return harmonic_indices(L); }
};

struct FitConfig {
  int epochs = 500;
  int patience = 50;
  int n_points = 20000;
  int batch_size = 0;  // 0 uses the full point set every step
  double l2_weight = 1e-6;
  double lr0 = 1e-2;
  std::uint64_t seed = 0;
  /// Fit against the curvature residual of a prescriber instead of a target u.
  bool direct_residual = false;

  void validate() const;
};

struct FitResult {
  ExpansionCoeffs coeffs;
  double fit_loss = 0.0;  // best objective reached (includes the L2 term)
  int epochs_run = 0;
  std::vector<double> loss_history;
};

/// The fixed sample set both fits draw from cfg.seed.
std::vector<SamplePoint> fit_points(const FitConfig& cfg);

double ansatz_u(const ExpansionCoeffs& coeffs, const UnitPoint& pt);

/// The ansatz as a field usable by the Laplacian and curvature routines.
SphereField ansatz_field(const ExpansionCoeffs& coeffs);

/// Minimises mean (u~ - target)^2 + l2 |c|^2 over cfg.n_points fixed samples
/// with Adam on a cosine schedule; keeps the best coefficients seen.
FitResult fit_expansion(const std::function<double(const UnitPoint&)>& target_u, const FitConfig& cfg, int L,
                        HarmonicConvention convention = HarmonicConvention::Orthonormal);

/// Fits coefficients directly to the normalised curvature residual of K.
FitResult fit_expansion_residual(const Prescriber& K, const FitConfig& cfg, int L,
                                 HarmonicConvention convention = HarmonicConvention::Orthonormal);

/// Sets entries below rel_tol * max|c| to zero. Throws AllZero for a zero input.
ExpansionCoeffs threshold_coeffs(const ExpansionCoeffs& coeffs, double rel_tol = 0.01);

/// R~ = 2 e^{-2u~} (1 + sum c Y).
double curvature_from_coeffs(const ExpansionCoeffs& coeffs, const UnitPoint& pt);

/// Mean of (R~ - 2K)^2 over n_test fresh uniform points.
double curvature_mse(const ExpansionCoeffs& coeffs, const Prescriber& K, std::size_t n_test = 2000,
                     std::uint64_t seed = 0);

/// {"c_l_m": value, ...} plus the given extra fields.
std::string coefficients_json(const ExpansionCoeffs& coeffs, double fit_loss, double curvature_mse);

}  // namespace nnn
