#include "nnn/batch_eval.hpp"

#include <array>
#include <cmath>

#include "nnn/errors.hpp"
#include "nnn/parallel.hpp"

namespace nnn {

namespace {

using Mat = Eigen::MatrixXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Jet component order.
enum : int { V = 0, P = 1, Q = 2, PP = 3, QQ = 4 };
using Jet = std::array<Mat, 5>;

struct DenseCache {
  std::size_t w_offset = 0;
  std::size_t b_offset = 0;
  bool has_bias = false;
  int in = 0;
  int out = 0;
  Jet x;  // layer input
  Jet z;  // pre-activation (only for activated layers)
  Mat d1, d2, d3;
};

struct BlockCache {
  std::vector<DenseCache> layers;
};

struct ChunkForward {
  Jet input;
  DenseCache proj;
  std::vector<BlockCache> blocks;
  Jet h;  // final hidden jet
  Eigen::VectorXd u, u_pp, u_qq, lambda, curvature, laplacian;
};

Eigen::Map<const RowMat> weights(const ad::ParameterVector& theta, const DenseCache& d) {
  return {theta.values.data() + d.w_offset, d.out, d.in};
}

Jet linear_forward(const ad::ParameterVector& theta, DenseCache& d, const Jet& x) {
  const auto W = weights(theta, d);
  Jet z;
  for (int c = 0; c < 5; ++c) z[c] = x[c] * W.transpose();
  if (d.has_bias) {
    const Eigen::Map<const Eigen::RowVectorXd> b(theta.values.data() + d.b_offset, d.out);
    z[V].rowwise() += b;
  }
  return z;
}

Jet activation_forward(Activation act, DenseCache& d, const Jet& z) {
  const Eigen::Index rows = z[V].rows();
  const Eigen::Index cols = z[V].cols();
  d.d1.resize(rows, cols);
  d.d2.resize(rows, cols);
  d.d3.resize(rows, cols);
  Jet a;
  a[V].resize(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) {
      const ActivationJet jet = activation_jet(act, z[V](i, j));
      a[V](i, j) = jet.f;
      d.d1(i, j) = jet.d1;
      d.d2(i, j) = jet.d2;
      d.d3(i, j) = jet.d3;
    }
  }
  const auto d1 = d.d1.array();
  const auto d2 = d.d2.array();
  a[P] = (d1 * z[P].array()).matrix();
  a[Q] = (d1 * z[Q].array()).matrix();
  a[PP] = (d2 * z[P].array().square() + d1 * z[PP].array()).matrix();
  a[QQ] = (d2 * z[Q].array().square() + d1 * z[QQ].array()).matrix();
  d.z = z;
  return a;
}

/// Chart-coordinate jets of (x, y, z) for each point of the chunk.
Jet input_jets(std::span<const SamplePoint> pts, Eigen::VectorXd& lambda) {
  const auto n = static_cast<Eigen::Index>(pts.size());
  Jet j;
  for (auto& m : j) m.resize(n, 3);
  lambda.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& sp = pts[static_cast<std::size_t>(i)];
    const PatchCoords c = stereographic_project(sp.point, sp.patch);
    const double p = c.p;
    const double q = c.q;
    const double D = 1.0 + c.r_sq;
    const double D2 = D * D;
    const double D3 = D2 * D;
    const double s = sp.patch == PatchId::North ? 1.0 : -1.0;
    lambda(i) = round_conformal_factor(c.r_sq);
    // Values are taken from the sample itself so every route sees the same point.
    j[V](i, 0) = sp.point.x;
    j[V](i, 1) = sp.point.y;
    j[V](i, 2) = sp.point.z;
    j[P](i, 0) = 2.0 / D - 4.0 * p * p / D2;
    j[P](i, 1) = -4.0 * p * q / D2;
    j[P](i, 2) = s * (-4.0 * p / D2);
    j[Q](i, 0) = -4.0 * p * q / D2;
    j[Q](i, 1) = 2.0 / D - 4.0 * q * q / D2;
    j[Q](i, 2) = s * (-4.0 * q / D2);
    j[PP](i, 0) = -12.0 * p / D2 + 16.0 * p * p * p / D3;
    j[PP](i, 1) = -4.0 * q / D2 + 16.0 * p * p * q / D3;
    j[PP](i, 2) = s * (-4.0 / D2 + 16.0 * p * p / D3);
    j[QQ](i, 0) = -4.0 * p / D2 + 16.0 * p * q * q / D3;
    j[QQ](i, 1) = -12.0 * q / D2 + 16.0 * q * q * q / D3;
    j[QQ](i, 2) = s * (-4.0 / D2 + 16.0 * q * q / D3);
  }
  return j;
}

Jet encode_jets(const RffEncoding& enc, const Jet& xyz) {
  const int m = enc.size();
  const double amp = std::sqrt(2.0 / m);
  Jet e;
  for (int c = 0; c < 5; ++c) e[c] = xyz[c] * enc.F.transpose();
  e[V].rowwise() += enc.omega.transpose();
  const Eigen::ArrayXXd cs = e[V].array().cos();
  const Eigen::ArrayXXd sn = e[V].array().sin();
  const auto rows = e[V].rows();
  Jet out;
  for (auto& o : out) o.resize(rows, 2 * m);
  const auto ep = e[P].array();
  const auto eq = e[Q].array();
  out[V] << amp * cs.matrix(), amp * sn.matrix();
  out[P] << (-amp * sn * ep).matrix(), (amp * cs * ep).matrix();
  out[Q] << (-amp * sn * eq).matrix(), (amp * cs * eq).matrix();
  out[PP] << (-amp * (cs * ep.square() + sn * e[PP].array())).matrix(),
      (amp * (-sn * ep.square() + cs * e[PP].array())).matrix();
  out[QQ] << (-amp * (cs * eq.square() + sn * e[QQ].array())).matrix(),
      (amp * (-sn * eq.square() + cs * e[QQ].array())).matrix();
  return out;
}

/// Lays out the dense layers against the parameter manifest.
void bind_layers(const NetworkParams& params, ChunkForward& f) {
  const auto& cfg = params.config;
  const auto& theta = params.theta;
  auto bind = [&](DenseCache& d, const std::string& name, int in, int out) {
    d.in = in;
    d.out = out;
    d.w_offset = theta.block(name + ".W").offset;
    d.has_bias = cfg.use_bias;
    if (d.has_bias) d.b_offset = theta.block(name + ".b").offset;
  };
  bind(f.proj, "proj", network_input_width(cfg), cfg.hidden_units);
  int layer = 0;
  int remaining = cfg.n_layers;
  while (remaining > 0) {
    const int depth = remaining >= 2 ? 2 : 1;
    BlockCache block;
    block.layers.resize(static_cast<std::size_t>(depth));
    for (auto& d : block.layers) bind(d, "layer" + std::to_string(layer++), cfg.hidden_units, cfg.hidden_units);
    f.blocks.push_back(std::move(block));
    remaining -= depth;
  }
}

ChunkForward forward_chunk(const NetworkParams& params, std::span<const SamplePoint> pts) {
  const auto& cfg = params.config;
  ChunkForward f;
  bind_layers(params, f);
  const Jet xyz = input_jets(pts, f.lambda);
  f.input = cfg.n_rff > 0 ? encode_jets(params.encoding, xyz) : xyz;

  f.proj.x = f.input;
  Jet h = linear_forward(params.theta, f.proj, f.proj.x);
  for (auto& block : f.blocks) {
    Jet t = h;
    for (auto& d : block.layers) {
      d.x = t;
      t = activation_forward(cfg.activation, d, linear_forward(params.theta, d, d.x));
    }
    for (int c = 0; c < 5; ++c) h[c] += t[c];
  }
  f.h = h;

  const auto& theta = params.theta;
  const Eigen::Map<const Eigen::VectorXd> w(theta.values.data() + theta.block("out.W").offset, cfg.hidden_units);
  const double b = theta.values[theta.block("out.b").offset];
  f.u = (h[V] * w).array() + b;
  f.u_pp = h[PP] * w;
  f.u_qq = h[QQ] * w;
  f.laplacian = (f.u_pp + f.u_qq).array() / f.lambda.array();
  f.curvature = (-2.0 * f.u.array()).exp() * (2.0 - 2.0 * f.laplacian.array());
  return f;
}

void linear_backward(const ad::ParameterVector& theta, const DenseCache& d, const Jet& gz, std::vector<double>& grad,
                     Jet* gx) {
  Eigen::Map<RowMat> gW(grad.data() + d.w_offset, d.out, d.in);
  for (int c = 0; c < 5; ++c) gW.noalias() += gz[c].transpose() * d.x[c];
  if (d.has_bias) {
    Eigen::Map<Eigen::RowVectorXd> gb(grad.data() + d.b_offset, d.out);
    gb += gz[V].colwise().sum();
  }
  if (gx != nullptr) {
    const auto W = weights(theta, d);
    for (int c = 0; c < 5; ++c) (*gx)[c] = gz[c] * W;
  }
}

Jet activation_backward(const DenseCache& d, const Jet& ga) {
  const auto d1 = d.d1.array();
  const auto d2 = d.d2.array();
  const auto d3 = d.d3.array();
  const auto zp = d.z[P].array();
  const auto zq = d.z[Q].array();
  Jet gz;
  gz[V] = (ga[V].array() * d1 + ga[P].array() * d2 * zp + ga[Q].array() * d2 * zq +
           ga[PP].array() * (d3 * zp.square() + d2 * d.z[PP].array()) +
           ga[QQ].array() * (d3 * zq.square() + d2 * d.z[QQ].array()))
              .matrix();
  gz[P] = (ga[P].array() * d1 + 2.0 * ga[PP].array() * d2 * zp).matrix();
  gz[Q] = (ga[Q].array() * d1 + 2.0 * ga[QQ].array() * d2 * zq).matrix();
  gz[PP] = (ga[PP].array() * d1).matrix();
  gz[QQ] = (ga[QQ].array() * d1).matrix();
  return gz;
}

struct ChunkResult {
  double loss_sum = 0.0;
  std::vector<double> grad;
};

ChunkResult loss_chunk(const NetworkParams& params, std::span<const SamplePoint> pts, std::span<const double> k,
                       double normalisation, std::size_t batch_size, bool with_grad) {
  const ChunkForward f = forward_chunk(params, pts);
  const auto n = static_cast<Eigen::Index>(pts.size());
  const Eigen::Map<const Eigen::VectorXd> kv(k.data(), n);
  const Eigen::VectorXd residual = f.curvature - 2.0 * kv;
  ChunkResult out;
  out.loss_sum = residual.squaredNorm() / normalisation;
  if (!with_grad) return out;

  const auto& cfg = params.config;
  const auto& theta = params.theta;
  out.grad.assign(theta.values.size(), 0.0);

  const Eigen::ArrayXd dl_dr = 2.0 * residual.array() / (static_cast<double>(batch_size) * normalisation);
  const Eigen::ArrayXd g_u = dl_dr * (-2.0 * f.curvature.array());
  const Eigen::ArrayXd g_lap_part = dl_dr * (-2.0 * (-2.0 * f.u.array()).exp()) / f.lambda.array();

  const std::size_t w_off = theta.block("out.W").offset;
  const std::size_t b_off = theta.block("out.b").offset;
  const Eigen::Map<const Eigen::RowVectorXd> w(theta.values.data() + w_off, cfg.hidden_units);
  Eigen::Map<Eigen::RowVectorXd> gw(out.grad.data() + w_off, cfg.hidden_units);
  gw += g_u.matrix().transpose() * f.h[V];
  gw += g_lap_part.matrix().transpose() * (f.h[PP] + f.h[QQ]);
  out.grad[b_off] += g_u.sum();

  Jet gh;
  gh[V] = g_u.matrix() * w;
  gh[P] = Mat::Zero(n, cfg.hidden_units);
  gh[Q] = Mat::Zero(n, cfg.hidden_units);
  gh[PP] = g_lap_part.matrix() * w;
  gh[QQ] = gh[PP];

  for (auto block = f.blocks.rbegin(); block != f.blocks.rend(); ++block) {
    Jet ga = gh;  // skip connection passes gh through unchanged
    for (auto layer = block->layers.rbegin(); layer != block->layers.rend(); ++layer) {
      const Jet gz = activation_backward(*layer, ga);
      Jet gx;
      linear_backward(theta, *layer, gz, out.grad, &gx);
      ga = std::move(gx);
    }
    for (int c = 0; c < 5; ++c) gh[c] += ga[c];
  }
  linear_backward(theta, f.proj, gh, out.grad, nullptr);
  return out;
}

template <class Fn>
std::vector<ChunkResult> run_chunks(std::size_t n, Fn&& fn) {
  const std::size_t n_chunks = (n + kChunkSize - 1) / kChunkSize;
  std::vector<ChunkResult> results(n_chunks);
  parallel_for(n_chunks, [&](std::size_t c) {
    const std::size_t begin = c * kChunkSize;
    const std::size_t end = std::min(n, begin + kChunkSize);
    results[c] = fn(begin, end);
  });
  return results;
}

}  // namespace

CurvatureEval evaluate_batch(const NetworkParams& params, std::span<const SamplePoint> points) {
  CurvatureEval out;
  out.u.resize(points.size());
  out.laplacian.resize(points.size());
  out.curvature.resize(points.size());
  const std::size_t n_chunks = (points.size() + kChunkSize - 1) / kChunkSize;
  parallel_for(n_chunks, [&](std::size_t c) {
    const std::size_t begin = c * kChunkSize;
    const std::size_t end = std::min(points.size(), begin + kChunkSize);
    const ChunkForward f = forward_chunk(params, points.subspan(begin, end - begin));
    for (std::size_t i = begin; i < end; ++i) {
      const auto k = static_cast<Eigen::Index>(i - begin);
      out.u[i] = f.u(k);
      out.laplacian[i] = f.laplacian(k);
      out.curvature[i] = f.curvature(k);
    }
  });
  return out;
}

LossGradient loss_and_gradient(const NetworkParams& params, std::span<const SamplePoint> points,
                               std::span<const double> k_values, double normalisation) {
  if (points.empty()) throw std::invalid_argument("loss_and_gradient: empty batch");
  const auto results = run_chunks(points.size(), [&](std::size_t begin, std::size_t end) {
    return loss_chunk(params, points.subspan(begin, end - begin), k_values.subspan(begin, end - begin),
                      normalisation, points.size(), true);
  });
  LossGradient out;
  out.grad = params.theta.zeros_like();
  double loss_sum = 0.0;
  for (const auto& r : results) {
    loss_sum += r.loss_sum;
    for (std::size_t i = 0; i < r.grad.size(); ++i) out.grad.values[i] += r.grad[i];
  }
  out.loss = loss_sum / static_cast<double>(points.size());
  if (!std::isfinite(out.loss)) throw NonFiniteDerivative("residual loss is non-finite");
  for (double g : out.grad.values) {
    if (!std::isfinite(g)) throw NonFiniteDerivative("parameter gradient is non-finite");
  }
  return out;
}

double batch_loss_value(const NetworkParams& params, std::span<const SamplePoint> points,
                        std::span<const double> k_values, double normalisation) {
  if (points.empty()) throw std::invalid_argument("batch_loss_value: empty batch");
  const auto results = run_chunks(points.size(), [&](std::size_t begin, std::size_t end) {
    return loss_chunk(params, points.subspan(begin, end - begin), k_values.subspan(begin, end - begin),
                      normalisation, points.size(), false);
  });
  double loss_sum = 0.0;
  for (const auto& r : results) loss_sum += r.loss_sum;
  return loss_sum / static_cast<double>(points.size());
}

}  // namespace nnn
