#include "nnn/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <json.hpp>
#include <sstream>
#include <stdexcept>

#include "nnn/batch_eval.hpp"
#include "nnn/errors.hpp"
#include "nnn/trainer.hpp"

namespace nnn {

namespace {

GaussBonnetResult finish(double integral) {
  return {integral, std::abs(integral - kFourPi) / kFourPi};
}

std::vector<SamplePoint> hemisphere_samples(const std::vector<UnitPoint>& pts) {
  std::vector<SamplePoint> out(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) out[i] = {pts[i], hemisphere_patch(pts[i])};
  return out;
}

}  // namespace

GaussBonnetResult gauss_bonnet_deviation(const NetworkParams& params, const QuadratureRule& rule) {
  const auto nodes = quadrature_nodes(rule);
  std::vector<SamplePoint> samples(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) samples[i] = {nodes[i].point, hemisphere_patch(nodes[i].point)};
  const CurvatureEval eval = evaluate_batch(params, samples);
  double total = 0.0;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const double v = 0.5 * eval.curvature[i] * std::exp(2.0 * eval.u[i]);
    if (!std::isfinite(v)) throw QuadratureDiverged("Gauss-Bonnet integrand is non-finite");
    total += nodes[i].weight * v;
  }
  return finish(total);
}

GaussBonnetResult gauss_bonnet_deviation(const SphereField& u, const QuadratureRule& rule) {
  const double total = integrate_sphere(
      [&](const UnitPoint& pt) {
        const double r = predicted_scalar_curvature(u.var, pt, hemisphere_patch(pt));
        return 0.5 * r * std::exp(2.0 * u.value(pt));
      },
      rule);
  return finish(total);
}

double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw std::invalid_argument("pearson: need two equal-length samples");
  const auto n = static_cast<double>(a.size());
  double ma = 0.0;
  double mb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0.0;
  double saa = 0.0;
  double sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double da = a[i] - ma;
    const double db = b[i] - mb;
    sab += da * db;
    saa += da * da;
    sbb += db * db;
  }
  if (saa <= 0.0 || sbb <= 0.0) throw ConstantField("correlation is undefined for a constant field");
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

EvalMetrics eval_against_truth(std::span<const double> u_pred, std::span<const double> u_true) {
  if (u_pred.size() != u_true.size() || u_pred.size() < 2) {
    throw std::invalid_argument("eval_against_truth: need at least two paired values");
  }
  EvalMetrics m;
  const auto n = static_cast<double>(u_pred.size());
  for (std::size_t i = 0; i < u_pred.size(); ++i) {
    const double d = u_pred[i] - u_true[i];
    m.mae += std::abs(d);
    m.bias += d;
  }
  m.mae /= n;
  m.bias /= n;
  try {
    m.pcc = pearson(u_pred, u_true);
  } catch (const ConstantField&) {
    m.pcc.reset();
  }
  return m;
}

EvalMetrics eval_against_truth(const std::function<double(const UnitPoint&)>& u_pred,
                               const std::function<double(const UnitPoint&)>& u_true,
                               std::span<const UnitPoint> points) {
  std::vector<double> a(points.size());
  std::vector<double> b(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    a[i] = u_pred(points[i]);
    b[i] = u_true(points[i]);
  }
  return eval_against_truth(a, b);
}

std::vector<UnitPoint> evaluation_points(std::size_t n, std::uint64_t seed) {
  std::vector<UnitPoint> out;
  out.reserve(n);
  for (const auto& s : sample_uniform(n, seed)) out.push_back(s.point);
  return out;
}

const char* to_string(Classification c) {
  switch (c) {
    case Classification::LikelyRealisable:
      return "LikelyRealisable";
    case Classification::LikelyUnrealisable:
      return "LikelyUnrealisable";
    case Classification::Inconclusive:
      break;
  }
  return "Inconclusive";
}

void ClassificationThresholds::validate() const {
  if (!(loss_lo > 0.0 && loss_hi > 0.0 && gb_max > 0.0)) {
    throw ValidationError("thresholds", "all thresholds must be positive");
  }
  if (!(loss_lo < loss_hi)) throw ValidationError("thresholds", "loss_lo must be below loss_hi");
}

Classification classify(double final_loss, double gb_dev, const ClassificationThresholds& t) {
  if (final_loss <= t.loss_lo && gb_dev <= t.gb_max) return Classification::LikelyRealisable;
  if (final_loss >= t.loss_hi || gb_dev >= 100.0 * t.gb_max) return Classification::LikelyUnrealisable;
  return Classification::Inconclusive;
}

ClassificationThresholds calibrate_thresholds(std::span<const CalibrationRun> runs) {
  std::map<std::string, double> min_loss;
  std::map<std::string, RealisabilityStatus> status;
  double worst_gb = 0.0;
  bool any_realisable = false;
  for (const auto& r : runs) {
    auto [it, inserted] = min_loss.emplace(r.prescriber, r.final_loss);
    if (!inserted) it->second = std::min(it->second, r.final_loss);
    status[r.prescriber] = r.status;
    if (r.status == RealisabilityStatus::KnownRealisable) {
      worst_gb = std::max(worst_gb, r.gb_dev);
      any_realisable = true;
    }
  }
  ClassificationThresholds t;
  bool any_unrealisable = false;
  t.loss_hi = std::numeric_limits<double>::infinity();
  for (const auto& [name, loss] : min_loss) {
    if (status[name] == RealisabilityStatus::KnownRealisable) t.loss_lo = std::max(t.loss_lo, loss);
    if (status[name] == RealisabilityStatus::KnownUnrealisable) {
      t.loss_hi = std::min(t.loss_hi, loss);
      any_unrealisable = true;
    }
  }
  if (!any_realisable || !any_unrealisable) {
    throw std::invalid_argument("calibration needs both known-realisable and known-unrealisable runs");
  }
  t.gb_max = 10.0 * worst_gb;
  if (!(t.loss_lo < t.loss_hi)) {
    throw std::invalid_argument("calibration band is empty: realisable and unrealisable losses overlap");
  }
  return t;
}

void save_thresholds(const ClassificationThresholds& t, const std::filesystem::path& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << nlohmann::json{{"loss_lo", t.loss_lo}, {"loss_hi", t.loss_hi}, {"gb_max", t.gb_max}}.dump(2) << '\n';
}

ClassificationThresholds load_thresholds(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot read " + path.string());
  ClassificationThresholds t;
  try {
    const auto j = nlohmann::json::parse(is);
    t.loss_lo = j.at("loss_lo").get<double>();
    t.loss_hi = j.at("loss_hi").get<double>();
    t.gb_max = j.at("gb_max").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("thresholds", path.string() + ": " + e.what());
  }
  t.validate();
  return t;
}

std::string report_json(const DiagnosticsReport& r) {
  nlohmann::json j = {{"prescriber_name", r.prescriber_name},
                      {"final_loss", r.final_loss},
                      {"gb_relative_deviation", r.gb_relative_deviation},
                      {"gb_integral", r.gb_integral},
                      {"classification", r.classification ? to_string(*r.classification) : "Uncalibrated"},
                      {"seed", r.seed},
                      {"eval_seed", r.eval_seed},
                      {"config_hash", r.config_hash}};
  if (r.eval_metrics) {
    nlohmann::json m = {{"mae", r.eval_metrics->mae}, {"bias", r.eval_metrics->bias}};
    m["pcc"] = r.eval_metrics->pcc ? nlohmann::json(*r.eval_metrics->pcc) : nlohmann::json(nullptr);
    j["eval_metrics"] = m;
  } else {
    j["eval_metrics"] = nullptr;
  }
  return j.dump(2);
}

double evaluation_loss(const NetworkParams& params, const Prescriber& K, std::size_t n, std::uint64_t seed,
                       const QuadratureRule& normalisation_rule) {
  const double N = compute_normalisation(K, normalisation_rule);
  const auto pts = sample_uniform(n, seed);
  std::vector<double> k(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) k[i] = K(pts[i].point);
  return batch_loss_value(params, pts, k, N);
}

void export_grids(const NetworkParams& params, const Prescriber& K, int n_theta, int n_phi,
                  const std::filesystem::path& out_dir) {
  if (n_theta < 2 || n_phi < 2) throw std::invalid_argument("export_grids: grid sizes must be at least 2");
  std::filesystem::create_directories(out_dir);
  std::vector<SphericalAngles> angles;
  std::vector<UnitPoint> pts;
  for (int i = 0; i < n_theta; ++i) {
    for (int j = 0; j < n_phi; ++j) {
      const SphericalAngles a{(i + 0.5) * kPi / n_theta, (j + 0.5) * 2.0 * kPi / n_phi};
      angles.push_back(a);
      pts.push_back(angles_to_cartesian(a));
    }
  }
  const CurvatureEval eval = evaluate_batch(params, hemisphere_samples(pts));

  auto write = [&](const char* name, auto&& value_at) {
    const auto path = out_dir / name;
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write " + path.string());
    os << "theta,phi,value\n";
    char buf[96];
    for (std::size_t k = 0; k < pts.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", angles[k].theta, angles[k].phi, value_at(k));
      os << buf;
    }
    if (!os) throw std::runtime_error("failed writing " + path.string());
  };
  write("u.csv", [&](std::size_t k) { return eval.u[k]; });
  write("g00.csv", [&](std::size_t k) {
    const double r_sq = (1.0 - pts[k].z) / (1.0 + pts[k].z);
    return std::exp(2.0 * eval.u[k]) * round_conformal_factor(r_sq);
  });
  write("r_pred.csv", [&](std::size_t k) { return eval.curvature[k]; });
  write("r_target.csv", [&](std::size_t k) { return 2.0 * K(pts[k]); });
}

}  // namespace nnn
