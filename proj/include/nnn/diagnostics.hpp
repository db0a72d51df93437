#pragma once

// Post-training checks: Gauss-Bonnet deviation, agreement with a known
// solution, realisability classification, and grid export for plotting.

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nnn/conformal_net.hpp"
#include "nnn/prescribers.hpp"
#include "nnn/sphere_geometry.hpp"

namespace nnn {

struct GaussBonnetResult {
  double integral = 0.0;            // integral of (R/2) e^{2u} dA
  double relative_deviation = 0.0;  // |integral - 4 pi| / 4 pi
};

/// Uses the network's own R_g at each node, evaluated in the hemisphere chart.
GaussBonnetResult gauss_bonnet_deviation(const NetworkParams& params,
                                         const QuadratureRule& rule = QuadratureRule::diagnostics_default());

/// Same check for an explicit conformal factor, e.g. an exact solution.
GaussBonnetResult gauss_bonnet_deviation(const SphereField& u,
                                         const QuadratureRule& rule = QuadratureRule::diagnostics_default());

struct EvalMetrics {
  double mae = 0.0;
  double bias = 0.0;             // mean(u_pred - u_true)
  std::optional<double> pcc;     // absent when either field is constant on the points
};

EvalMetrics eval_against_truth(std::span<const double> u_pred, std::span<const double> u_true);
EvalMetrics eval_against_truth(const std::function<double(const UnitPoint&)>& u_pred,
                               const std::function<double(const UnitPoint&)>& u_true,
                               std::span<const UnitPoint> points);

/// Pearson correlation. Throws ConstantField if either input has zero variance.
double pearson(std::span<const double> a, std::span<const double> b);

/// The fixed evaluation set: n uniform points from seed.
std::vector<UnitPoint> evaluation_points(std::size_t n, std::uint64_t seed);

enum class Classification { LikelyRealisable, LikelyUnrealisable, Inconclusive };

const char* to_string(Classification c);

struct ClassificationThresholds {
  double loss_lo = 0.0;
  double loss_hi = 0.0;
  double gb_max = 0.0;

  void validate() const;
};

Classification classify(double final_loss, double gb_dev, const ClassificationThresholds& t);

struct CalibrationRun {
  std::string prescriber;
  RealisabilityStatus status = RealisabilityStatus::Unknown;
  double final_loss = 0.0;
  double gb_dev = 0.0;
};

/// loss_lo = max over realisable prescribers of their min loss, loss_hi = min
/// over unrealisable prescribers of their min loss, gb_max = 10 x the worst
/// realisable Gauss-Bonnet deviation. Throws std::invalid_argument when either
/// group is missing or the band is empty.
ClassificationThresholds calibrate_thresholds(std::span<const CalibrationRun> runs);

void save_thresholds(const ClassificationThresholds& t, const std::filesystem::path& path);
ClassificationThresholds load_thresholds(const std::filesystem::path& path);

struct DiagnosticsReport {
  std::string prescriber_name;
  double final_loss = 0.0;
  double gb_relative_deviation = 0.0;
  double gb_integral = 0.0;
  std::optional<Classification> classification;
  std::optional<EvalMetrics> eval_metrics;
  std::uint64_t seed = 0;
  std::uint64_t eval_seed = 0;
  std::string config_hash;
};

std::string report_json(const DiagnosticsReport& r);

/// Final loss of params over n fresh uniform points with the prescriber's N.
double evaluation_loss(const NetworkParams& params, const Prescriber& K, std::size_t n, std::uint64_t seed,
                       const QuadratureRule& normalisation_rule = QuadratureRule::diagnostics_default());

/// Writes u.csv, g00.csv, r_pred.csv and r_target.csv into out_dir, each with
/// header theta,phi,value and n_theta * n_phi cell-centred rows.
void export_grids(const NetworkParams& params, const Prescriber& K, int n_theta, int n_phi,
                  const std::filesystem::path& out_dir);

}  // namespace nnn
