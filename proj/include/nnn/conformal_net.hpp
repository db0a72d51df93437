#pragma once

// Neural parametrisation of the conformal factor u on the sphere and the
// geometric quantities derived from it.
//
// Architecture: Cartesian input -> random Fourier features (optional) ->
// linear projection to hidden_units -> residual blocks of two dense layers
// with a skip connection -> linear scalar output.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nnn/autodiff.hpp"
#include "nnn/sphere_geometry.hpp"

namespace nnn {

enum class Activation { SiLU, GELU };

const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

struct NetworkConfig {
  int hidden_units = 64;
  int n_layers = 6;  // dense layers inside residual blocks, two per block
  Activation activation = Activation::SiLU;
  bool use_bias = true;
  int n_rff = 32;  // 0 feeds (x, y, z) directly
  double rff_bandwidth = 1.0;
  double output_init_std = 1e-3;
  std::uint64_t seed = 0;

  /// Throws ValidationError naming the first bad field.
  void validate() const;
  bool operator==(const NetworkConfig&) const = default;
};

struct RffEncoding {
  Eigen::MatrixXd F;      // n_rff x 3
  Eigen::VectorXd omega;  // n_rff

  int size() const { return static_cast<int>(omega.size()); }
};

struct NetworkParams {
  NetworkConfig config;
  RffEncoding encoding;
  ad::ParameterVector theta;
};

/// Flat layout: proj.W, proj.b, then layer<i>.W, layer<i>.b, then out.W,
/// out.b. Bias blocks other than out.b are omitted when use_bias is false.
/// Weight blocks are row-major with rows = fan-out.
ad::ParameterVector make_parameter_layout(const NetworkConfig& cfg);

int network_input_width(const NetworkConfig& cfg);

/// Hidden weights Glorot-uniform, hidden biases zero, output weights
/// N(0, output_init_std), output bias exactly zero. Deterministic per seed.
NetworkParams init_params(const NetworkConfig& cfg);

Eigen::VectorXd rff_encode(const RffEncoding& enc, const UnitPoint& x);

// Activations and their derivatives up to third order, used by the jet pass.
struct ActivationJet {
  double f, d1, d2, d3;
};
ActivationJet activation_jet(Activation a, double x);

template <class T>
T activate(Activation a, const T& x) {
  using std::tanh;
  using ad::tanh;
  if (a == Activation::SiLU) {
    using ad::sigmoid;
    return x * sigmoid(x);
  }
  constexpr double k = 0.7978845608028654;  // sqrt(2 / pi)
  return 0.5 * x * (1.0 + tanh(k * (x + 0.044715 * (x * x * x))));
}

/// Network output for any scalar type. theta must follow
/// make_parameter_layout(params.config); params.theta is ignored.
template <class T>
T forward_generic(const NetworkParams& params, std::span<const T> theta, const T& x, const T& y, const T& z) {
  using std::cos;
  using std::sin;
  using ad::cos;
  using ad::sin;
  const NetworkConfig& cfg = params.config;
  const int width = cfg.hidden_units;
  std::size_t pos = 0;
  auto take = [&](std::size_t n) {
    const std::size_t at = pos;
    pos += n;
    return at;
  };

  std::vector<T> input;
  if (cfg.n_rff > 0) {
    const int m = cfg.n_rff;
    const double amp = std::sqrt(2.0 / m);
    input.resize(static_cast<std::size_t>(2 * m));
    for (int k = 0; k < m; ++k) {
      const T arg = params.encoding.F(k, 0) * x + params.encoding.F(k, 1) * y + params.encoding.F(k, 2) * z +
                    params.encoding.omega(k);
      input[static_cast<std::size_t>(k)] = amp * cos(arg);
      input[static_cast<std::size_t>(k + m)] = amp * sin(arg);
    }
  } else {
    input = {x, y, z};
  }

  auto dense = [&](const std::vector<T>& in, int out_width, bool bias) {
    const std::size_t w0 = take(static_cast<std::size_t>(out_width) * in.size());
    const std::size_t b0 = bias ? take(static_cast<std::size_t>(out_width)) : 0;
    std::vector<T> out(static_cast<std::size_t>(out_width));
    for (int o = 0; o < out_width; ++o) {
      T acc = bias ? theta[b0 + static_cast<std::size_t>(o)] : T(0.0);
      for (std::size_t i = 0; i < in.size(); ++i) {
        acc = acc + theta[w0 + static_cast<std::size_t>(o) * in.size() + i] * in[i];
      }
      out[static_cast<std::size_t>(o)] = acc;
    }
    return out;
  };

  std::vector<T> h = dense(input, width, cfg.use_bias);
  int remaining = cfg.n_layers;
  while (remaining > 0) {
    const int depth = remaining >= 2 ? 2 : 1;
    std::vector<T> t = h;
    for (int d = 0; d < depth; ++d) {
      t = dense(t, width, cfg.use_bias);
      for (auto& v : t) v = activate(cfg.activation, v);
    }
    for (std::size_t i = 0; i < h.size(); ++i) h[i] = h[i] + t[i];
    remaining -= depth;
  }
  return dense(h, 1, true)[0];
}

/// u(x) with the stored parameters.
double forward_u(const NetworkParams& params, const UnitPoint& x);

/// A scalar field given in ambient coordinates, evaluable on tape.
using AmbientField = std::function<ad::Var(const ad::Var& x, const ad::Var& y, const ad::Var& z)>;

/// The network as an ambient field with the given (possibly taped) weights.
AmbientField network_field(const NetworkParams& params, std::span<const ad::Var> theta);
/// The network as an ambient field with its stored weights as constants.
AmbientField network_field(const NetworkParams& params);

/// Laplace-Beltrami operator of the round metric, Delta = div grad, evaluated
/// in chart coordinates (p, q) through the divergence form
/// |g|^{-1/2} d_i(|g|^{1/2} g^{ij} d_j u). p and q must live on tape; the
/// result stays differentiable in anything field depends on.
ad::Var laplace_beltrami(ad::Tape& tape, const AmbientField& field, PatchId patch, const ad::Var& p,
                         const ad::Var& q);

double laplace_beltrami(const AmbientField& field, const PatchCoords& c);

/// R_g = e^{-2u} (2 - 2 Delta u) for the metric e^{2u} g0.
double predicted_scalar_curvature(const AmbientField& field, const UnitPoint& pt, PatchId patch);
double predicted_scalar_curvature(const NetworkParams& params, const UnitPoint& pt, PatchId patch);

}  // namespace nnn
