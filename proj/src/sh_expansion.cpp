#include "nnn/sh_expansion.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <json.hpp>
#include <limits>
#include <memory>
#include <numeric>
#include <random>

#include "nnn/errors.hpp"
#include "nnn/parallel.hpp"
#include "nnn/random.hpp"
#include "nnn/trainer.hpp"

namespace nnn {

ExpansionCoeffs ExpansionCoeffs::zeros(int L, HarmonicConvention conv) {
  if (L < 1 || L > kMaxHarmonicDegree) throw std::invalid_argument("expansion degree must lie in [1, 12]");
  ExpansionCoeffs out;
  out.L = L;
  out.convention = conv;
  out.c.assign(size_for(L), 0.0);
  return out;
}

void FitConfig::validate() const {
  if (epochs <= 0) throw ValidationError("epochs", "must be positive");
  if (patience <= 0 || patience > epochs) throw ValidationError("patience", "must lie in [1, epochs]");
  if (n_points <= 0) throw ValidationError("n_points", "must be positive");
  if (batch_size < 0 || batch_size > n_points) throw ValidationError("batch_size", "must lie in [0, n_points]");
  if (l2_weight < 0.0) throw ValidationError("l2_weight", "must be non-negative");
  if (!(lr0 > 0.0)) throw ValidationError("lr0", "must be positive");
}

namespace {

/// Row of basis values Y/(l(l+1)) and Y at pt.
void basis_row(const ExpansionCoeffs& coeffs, const UnitPoint& pt, double* phi, double* y) {
  std::size_t k = 0;
  for (int l = 1; l <= coeffs.L; ++l) {
    const double eig = l * (l + 1.0);
    for (int m = -l; m <= l; ++m, ++k) {
      const double v = real_harmonic({l, m}, pt, coeffs.convention);
      if (y != nullptr) y[k] = v;
      phi[k] = v / eig;
    }
  }
}

template <class T>
T ansatz_generic(const ExpansionCoeffs& coeffs, const T& x, const T& y, const T& z) {
  T acc = T(0.0);
  std::size_t k = 0;
  for (int l = 1; l <= coeffs.L; ++l) {
    const double eig = l * (l + 1.0);
    for (int m = -l; m <= l; ++m, ++k) {
      if (coeffs.c[k] == 0.0) continue;
      acc = acc + (coeffs.c[k] / eig) * real_harmonic_t(HarmonicIndex{l, m}, x, y, z, coeffs.convention);
    }
  }
  return acc;
}

struct AdamVec {
  Eigen::VectorXd m, v;
  std::int64_t t = 0;

  explicit AdamVec(Eigen::Index n) : m(Eigen::VectorXd::Zero(n)), v(Eigen::VectorXd::Zero(n)) {}

  void step(Eigen::VectorXd& x, const Eigen::VectorXd& g, double lr) {
    constexpr double b1 = 0.9;
    constexpr double b2 = 0.999;
    constexpr double eps = 1e-8;
    ++t;
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    const double c1 = 1.0 - std::pow(b1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(b2, static_cast<double>(t));
    x.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  }
};

/// Generic minibatch Adam driver with a cosine schedule and early stopping.
/// objective(rows, c, grad) returns the data term over the given rows and
/// writes its gradient; the L2 term is added here.
template <class Objective>
FitResult run_fit(ExpansionCoeffs init, const FitConfig& cfg, Objective&& objective) {
  cfg.validate();
  const auto n = static_cast<std::size_t>(cfg.n_points);
  const std::size_t batch = cfg.batch_size == 0 ? n : static_cast<std::size_t>(cfg.batch_size);
  const std::size_t steps_per_epoch = std::max<std::size_t>(1, n / batch);
  const double total_steps = static_cast<double>(steps_per_epoch) * cfg.epochs;

  Eigen::VectorXd c = Eigen::Map<const Eigen::VectorXd>(init.c.data(), static_cast<Eigen::Index>(init.c.size()));
  AdamVec adam(c.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<std::size_t> all = order;
  std::mt19937_64 rng(mix64(cfg.seed ^ 0x3c6ef372fe94f82bULL));

  auto full_loss = [&](const Eigen::VectorXd& x) {
    Eigen::VectorXd unused(x.size());
    return objective(std::span<const std::size_t>(all), x, unused) + cfg.l2_weight * x.squaredNorm();
  };

  FitResult result;
  result.coeffs = init;
  double best = full_loss(c);
  Eigen::VectorXd best_c = c;
  int since_best = 0;
  std::int64_t step = 0;
  Eigen::VectorXd grad(c.size());
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    if (batch < n) std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t b = 0; b < steps_per_epoch; ++b) {
      const std::span<const std::size_t> rows(order.data() + b * batch, batch);
      objective(rows, c, grad);
      grad += 2.0 * cfg.l2_weight * c;
      const double lr = cfg.lr0 * 0.5 * (1.0 + std::cos(kPi * static_cast<double>(step) / total_steps));
      adam.step(c, grad, lr);
      ++step;
    }
    const double loss = full_loss(c);
    result.loss_history.push_back(loss);
    result.epochs_run = epoch + 1;
    if (loss < best) {
      best = loss;
      best_c = c;
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
  }
  result.fit_loss = best;
  result.coeffs.c.assign(best_c.data(), best_c.data() + best_c.size());
  return result;
}

}  // namespace

std::vector<SamplePoint> fit_points(const FitConfig& cfg) {
  return sample_uniform(static_cast<std::size_t>(cfg.n_points), mix64(cfg.seed ^ 0x1f83d9abfb41bd6bULL));
}

double ansatz_u(const ExpansionCoeffs& coeffs, const UnitPoint& pt) {
  return ansatz_generic<double>(coeffs, pt.x, pt.y, pt.z);
}

SphereField ansatz_field(const ExpansionCoeffs& coeffs) {
  auto shared = std::make_shared<ExpansionCoeffs>(coeffs);
  return make_field([shared](const auto& x, const auto& y, const auto& z) {
    using T = std::decay_t<decltype(x)>;
    return ansatz_generic<T>(*shared, x, y, z);
  });
}

FitResult fit_expansion(const std::function<double(const UnitPoint&)>& target_u, const FitConfig& cfg, int L,
                        HarmonicConvention convention) {
  cfg.validate();
  ExpansionCoeffs init = ExpansionCoeffs::zeros(L, convention);
  const auto n = static_cast<std::size_t>(cfg.n_points);
  const auto p = static_cast<Eigen::Index>(init.c.size());
  const auto pts = fit_points(cfg);
  Eigen::MatrixXd phi(static_cast<Eigen::Index>(n), p);
  Eigen::VectorXd target(static_cast<Eigen::Index>(n));
  {
    std::vector<double> row(static_cast<std::size_t>(p));
    for (std::size_t i = 0; i < n; ++i) {
      basis_row(init, pts[i].point, row.data(), nullptr);
      phi.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(row.data(), p);
      target(static_cast<Eigen::Index>(i)) = target_u(pts[i].point);
    }
  }
  auto objective = [&](std::span<const std::size_t> rows, const Eigen::VectorXd& c, Eigen::VectorXd& grad) {
    grad.setZero();
    double sum = 0.0;
    for (const std::size_t r : rows) {
      const auto i = static_cast<Eigen::Index>(r);
      const double res = phi.row(i).dot(c) - target(i);
      sum += res * res;
      grad.noalias() += (2.0 * res) * phi.row(i).transpose();
    }
    const auto m = static_cast<double>(rows.size());
    grad /= m;
    return sum / m;
  };
  return run_fit(init, cfg, objective);
}

FitResult fit_expansion_residual(const Prescriber& K, const FitConfig& cfg, int L, HarmonicConvention convention) {
  cfg.validate();
  ExpansionCoeffs init = ExpansionCoeffs::zeros(L, convention);
  const auto n = static_cast<std::size_t>(cfg.n_points);
  const auto p = static_cast<Eigen::Index>(init.c.size());
  const auto pts = fit_points(cfg);
  Eigen::MatrixXd phi(static_cast<Eigen::Index>(n), p);
  Eigen::MatrixXd ymat(static_cast<Eigen::Index>(n), p);
  Eigen::VectorXd k2(static_cast<Eigen::Index>(n));
  {
    std::vector<double> row(static_cast<std::size_t>(p));
    std::vector<double> yrow(static_cast<std::size_t>(p));
    for (std::size_t i = 0; i < n; ++i) {
      basis_row(init, pts[i].point, row.data(), yrow.data());
      phi.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(row.data(), p);
      ymat.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(yrow.data(), p);
      k2(static_cast<Eigen::Index>(i)) = 2.0 * K(pts[i].point);
    }
  }
  const double N = compute_normalisation(K, QuadratureRule::diagnostics_default());
  auto objective = [&](std::span<const std::size_t> rows, const Eigen::VectorXd& c, Eigen::VectorXd& grad) {
    grad.setZero();
    double sum = 0.0;
    for (const std::size_t r : rows) {
      const auto i = static_cast<Eigen::Index>(r);
      const double u = phi.row(i).dot(c);
      const double e = std::exp(-2.0 * u);
      const double s = 1.0 + ymat.row(i).dot(c);
      const double R = 2.0 * e * s;
      const double res = R - k2(i);
      sum += res * res;
      // dR/dc = -2 R phi + 2 e Y
      grad.noalias() += (2.0 * res) * (-2.0 * R * phi.row(i) + 2.0 * e * ymat.row(i)).transpose();
    }
    const auto m = static_cast<double>(rows.size());
    grad /= m * N;
    return sum / (m * N);
  };
  return run_fit(init, cfg, objective);
}

ExpansionCoeffs threshold_coeffs(const ExpansionCoeffs& coeffs, double rel_tol) {
  double max_abs = 0.0;
  for (double v : coeffs.c) max_abs = std::max(max_abs, std::abs(v));
  if (max_abs == 0.0) throw AllZero("cannot threshold an all-zero coefficient set");
  ExpansionCoeffs out = coeffs;
  for (auto& v : out.c) {
    if (std::abs(v) < rel_tol * max_abs) v = 0.0;
  }
  return out;
}

double curvature_from_coeffs(const ExpansionCoeffs& coeffs, const UnitPoint& pt) {
  double u = 0.0;
  double s = 1.0;
  std::size_t k = 0;
  for (int l = 1; l <= coeffs.L; ++l) {
    const double eig = l * (l + 1.0);
    for (int m = -l; m <= l; ++m, ++k) {
      if (coeffs.c[k] == 0.0) continue;
      const double y = real_harmonic({l, m}, pt, coeffs.convention);
      u += coeffs.c[k] / eig * y;
      s += coeffs.c[k] * y;
    }
  }
  return 2.0 * std::exp(-2.0 * u) * s;
}

double curvature_mse(const ExpansionCoeffs& coeffs, const Prescriber& K, std::size_t n_test, std::uint64_t seed) {
  const auto pts = sample_uniform(n_test, mix64(seed ^ 0x6a09e667f3bcc909ULL));
  double sum = 0.0;
  for (const auto& s : pts) {
    const double d = curvature_from_coeffs(coeffs, s.point) - 2.0 * K(s.point);
    sum += d * d;
  }
  return sum / static_cast<double>(pts.size());
}

std::string coefficients_json(const ExpansionCoeffs& coeffs, double fit_loss, double curvature_mse_value) {
  nlohmann::json c = nlohmann::json::object();
  for (const auto& idx : coeffs.indices()) {
    c["c_" + std::to_string(idx.ell) + "_" + std::to_string(idx.m)] = coeffs.at(idx);
  }
  nlohmann::json j = {{"L", coeffs.L},
                      {"convention", to_string(coeffs.convention)},
                      {"coefficients", c},
                      {"fit_loss", fit_loss},
                      {"curvature_mse", curvature_mse_value}};
  return j.dump(2);
}

}  // namespace nnn
