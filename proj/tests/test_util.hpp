#pragma once

#include <cmath>
#include <random>

#include "nnn/conformal_net.hpp"
#include "nnn/sphere_geometry.hpp"

namespace testutil {

inline nnn::UnitPoint random_point(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double x = n(rng);
  const double y = n(rng);
  const double z = n(rng);
  const double r = std::sqrt(x * x + y * y + z * z);
  return {x / r, y / r, z / r};
}

/// Relative error with a floor so values near zero compare absolutely.
inline double rel_err(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// A small network whose output is far from zero, so derivatives are not trivial.
inline nnn::NetworkParams lively_network(nnn::NetworkConfig cfg, double out_scale = 1.0) {
  auto params = nnn::init_params(cfg);
  const auto& out = params.theta.block("out.W");
  std::mt19937_64 rng(cfg.seed + 77);
  std::normal_distribution<double> n(0.0, out_scale);
  for (double& w : params.theta.view(out)) w = n(rng);
  return params;
}

inline nnn::NetworkConfig tiny_config(std::uint64_t seed = 1) {
  nnn::NetworkConfig cfg;
  cfg.hidden_units = 3;
  cfg.n_layers = 2;
  cfg.n_rff = 2;
  cfg.seed = seed;
  return cfg;
}

}  // namespace testutil
