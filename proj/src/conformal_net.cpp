#include "nnn/conformal_net.hpp"

#include <memory>
#include <random>

#include "nnn/batch_eval.hpp"
#include "nnn/errors.hpp"

namespace nnn {

const char* to_string(Activation a) { return a == Activation::SiLU ? "silu" : "gelu"; }

Activation activation_from_string(const std::string& s) {
  if (s == "silu" || s == "SiLU" || s == "swish") return Activation::SiLU;
  if (s == "gelu" || s == "GELU") return Activation::GELU;
  throw ValidationError("activation", "expected silu or gelu, got '" + s + "'");
}

void NetworkConfig::validate() const {
  if (hidden_units <= 0) throw ValidationError("network.hidden_units", "must be positive");
  if (n_layers <= 0) throw ValidationError("network.n_layers", "must be positive");
  if (n_rff < 0) throw ValidationError("network.n_rff", "must be non-negative");
  if (!(rff_bandwidth > 0.0)) throw ValidationError("network.rff_bandwidth", "must be positive");
  if (!(output_init_std > 0.0)) throw ValidationError("network.output_init_std", "must be positive");
}

int network_input_width(const NetworkConfig& cfg) { return cfg.n_rff > 0 ? 2 * cfg.n_rff : 3; }

ad::ParameterVector make_parameter_layout(const NetworkConfig& cfg) {
  ad::ParameterVector pv;
  const auto width = static_cast<std::size_t>(cfg.hidden_units);
  pv.add_block("proj.W", width, static_cast<std::size_t>(network_input_width(cfg)));
  if (cfg.use_bias) pv.add_block("proj.b", width, 1);
  for (int l = 0; l < cfg.n_layers; ++l) {
    pv.add_block("layer" + std::to_string(l) + ".W", width, width);
    if (cfg.use_bias) pv.add_block("layer" + std::to_string(l) + ".b", width, 1);
  }
  pv.add_block("out.W", 1, width);
  pv.add_block("out.b", 1, 1);
  return pv;
}

NetworkParams init_params(const NetworkConfig& cfg) {
  cfg.validate();
  NetworkParams params;
  params.config = cfg;
  std::mt19937_64 rng(cfg.seed);

  const int m = cfg.n_rff;
  params.encoding.F.resize(m, 3);
  params.encoding.omega.resize(m);
  std::normal_distribution<double> freq(0.0, cfg.rff_bandwidth);
  std::uniform_real_distribution<double> phase(0.0, 2.0 * kPi);
  for (int k = 0; k < m; ++k) {
    for (int c = 0; c < 3; ++c) params.encoding.F(k, c) = freq(rng);
  }
  for (int k = 0; k < m; ++k) params.encoding.omega(k) = phase(rng);

  params.theta = make_parameter_layout(cfg);
  for (const auto& block : params.theta.manifest) {
    auto values = params.theta.view(block);
    if (block.name == "out.b") continue;
    if (block.name == "out.W") {
      std::normal_distribution<double> dist(0.0, cfg.output_init_std);
      for (auto& v : values) v = dist(rng);
    } else if (block.cols > 1) {
      const double limit = std::sqrt(6.0 / static_cast<double>(block.rows + block.cols));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (auto& v : values) v = dist(rng);
    }
  }
  return params;
}

Eigen::VectorXd rff_encode(const RffEncoding& enc, const UnitPoint& x) {
  const int m = enc.size();
  const double amp = std::sqrt(2.0 / m);
  const Eigen::Vector3d v(x.x, x.y, x.z);
  const Eigen::VectorXd arg = enc.F * v + enc.omega;
  Eigen::VectorXd out(2 * m);
  out.head(m) = amp * arg.array().cos();
  out.tail(m) = amp * arg.array().sin();
  return out;
}

ActivationJet activation_jet(Activation a, double x) {
  if (a == Activation::SiLU) {
    const double s = 1.0 / (1.0 + std::exp(-x));
    const double s1 = s * (1.0 - s);
    const double s2 = s1 * (1.0 - 2.0 * s);
    const double s3 = s2 * (1.0 - 2.0 * s) - 2.0 * s1 * s1;
    return {x * s, s + x * s1, 2.0 * s1 + x * s2, 3.0 * s2 + x * s3};
  }
  constexpr double k = 0.7978845608028654;
  constexpr double c = 0.044715;
  const double v = k * (x + c * x * x * x);
  const double v1 = k * (1.0 + 3.0 * c * x * x);
  const double v2 = 6.0 * k * c * x;
  const double v3 = 6.0 * k * c;
  const double t = std::tanh(v);
  const double sech2 = 1.0 - t * t;
  const double t1 = sech2 * v1;
  const double t2 = sech2 * (v2 - 2.0 * t * v1 * v1);
  const double t3 = sech2 * (v1 * v1 * v1 * (4.0 * t * t - 2.0 * sech2) - 6.0 * t * v1 * v2 + v3);
  return {0.5 * x * (1.0 + t), 0.5 * (1.0 + t) + 0.5 * x * t1, t1 + 0.5 * x * t2, 1.5 * t2 + 0.5 * x * t3};
}

double forward_u(const NetworkParams& params, const UnitPoint& x) {
  return forward_generic<double>(params, std::span<const double>(params.theta.values), x.x, x.y, x.z);
}

AmbientField network_field(const NetworkParams& params, std::span<const ad::Var> theta) {
  return [&params, theta](const ad::Var& x, const ad::Var& y, const ad::Var& z) {
    return forward_generic<ad::Var>(params, theta, x, y, z);
  };
}

AmbientField network_field(const NetworkParams& params) {
  auto theta = std::make_shared<std::vector<ad::Var>>(params.theta.values.begin(), params.theta.values.end());
  return [&params, theta](const ad::Var& x, const ad::Var& y, const ad::Var& z) {
    return forward_generic<ad::Var>(params, std::span<const ad::Var>(*theta), x, y, z);
  };
}

ad::Var laplace_beltrami(ad::Tape& tape, const AmbientField& field, PatchId patch, const ad::Var& p,
                         const ad::Var& q) {
  const auto xyz = unproject(patch, p, q);
  const ad::Var u = field(xyz[0], xyz[1], xyz[2]);
  const ad::Var coords[2] = {p, q};
  const auto du = tape.gradient(u, coords, true);

  // g0 = lambda I, so sqrt|g0| = lambda and g0^{ij} = delta_ij / lambda.
  const ad::Var sqrt_det = round_conformal_factor_t(p * p + q * q);
  const ad::Var inv_metric = 1.0 / sqrt_det;
  const ad::Var flux_p = sqrt_det * inv_metric * du[0];
  const ad::Var flux_q = sqrt_det * inv_metric * du[1];
  const ad::Var div = tape.gradient(flux_p, std::span<const ad::Var>(&coords[0], 1), true)[0] +
                      tape.gradient(flux_q, std::span<const ad::Var>(&coords[1], 1), true)[0];
  return div / sqrt_det;
}

double laplace_beltrami(const AmbientField& field, const PatchCoords& c) {
  ad::Tape tape;
  const ad::Var p = tape.variable(c.p);
  const ad::Var q = tape.variable(c.q);
  return laplace_beltrami(tape, field, c.patch, p, q).value();
}

double predicted_scalar_curvature(const AmbientField& field, const UnitPoint& pt, PatchId patch) {
  const PatchCoords c = stereographic_project(pt, patch);
  ad::Tape tape;
  const ad::Var p = tape.variable(c.p);
  const ad::Var q = tape.variable(c.q);
  const double lap = laplace_beltrami(tape, field, patch, p, q).value();
  const double u = field(pt.x, pt.y, pt.z).value();
  return std::exp(-2.0 * u) * (2.0 - 2.0 * lap);
}

double predicted_scalar_curvature(const NetworkParams& params, const UnitPoint& pt, PatchId patch) {
  stereographic_project(pt, patch);
  const SamplePoint sp{pt, patch};
  return evaluate_batch(params, std::span<const SamplePoint>(&sp, 1)).curvature[0];
}

}  // namespace nnn
