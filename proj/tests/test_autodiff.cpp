#include <doctest.h>

#include <cmath>
#include <random>

#include "nnn/autodiff.hpp"
#include "nnn/batch_eval.hpp"
#include "nnn/conformal_net.hpp"
#include "nnn/errors.hpp"
#include "test_util.hpp"

using namespace nnn;
using ad::Var;
using testutil::rel_err;

namespace {

/// Network value at chart coordinates, with stored weights.
double u_at(const NetworkParams& params, PatchId patch, double p, double q) {
  const auto xyz = unproject(patch, p, q);
  return forward_u(params, {xyz[0], xyz[1], xyz[2]});
}

ad::ScalarFieldVar chart_field(const NetworkParams& params, PatchId patch) {
  const AmbientField f = network_field(params);
  return [f, patch](std::span<const Var> v) {
    const auto xyz = unproject(patch, v[0], v[1]);
    return f(xyz[0], xyz[1], xyz[2]);
  };
}

/// Loss of the Laplacian-containing objective recorded on a tape, so the
/// gradient comes from the generic nested route.
LossGradient tape_loss_gradient(const NetworkParams& params, std::span<const SamplePoint> pts,
                                std::span<const double> k, double N) {
  ad::Tape tape;
  const auto theta = tape.variables(params.theta.values);
  const AmbientField field = network_field(params, theta);
  Var loss(0.0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const PatchCoords c = stereographic_project(pts[i].point, pts[i].patch);
    const Var p = tape.variable(c.p);
    const Var q = tape.variable(c.q);
    const Var lap = laplace_beltrami(tape, field, c.patch, p, q);
    const auto xyz = unproject(c.patch, p, q);
    const Var u = field(xyz[0], xyz[1], xyz[2]);
    const Var R = ad::exp(-2.0 * u) * (2.0 - 2.0 * lap);
    const Var r = R - 2.0 * k[i];
    loss = loss + r * r;
  }
  loss = loss / (static_cast<double>(pts.size()) * N);
  return {loss.value(), ad::grad_params(loss, theta, params.theta)};
}

}  // namespace

TEST_CASE("elementary input gradients") {
  const std::vector<double> x{3.0};
  CHECK(ad::grad_input([](std::span<const Var> v) { return v[0] * v[0]; }, x)[0] == 6.0);
  const std::vector<double> pq{2.0, 5.0};
  const auto g = ad::grad_input([](std::span<const Var> v) { return v[0] * v[1]; }, pq);
  CHECK(g[0] == 5.0);
  CHECK(g[1] == 2.0);
}

TEST_CASE("elementary second derivatives") {
  const std::vector<double> x{0.3};
  CHECK(std::abs(ad::second_derivative([](std::span<const Var> v) { return ad::sin(v[0]); }, x, 0, 0) +
                 std::sin(0.3)) < 1e-15);
  const std::vector<double> pq{1.0, 2.0};
  auto f = [](std::span<const Var> v) { return v[0] * v[0] * v[1] * v[1] * v[1]; };
  CHECK(std::abs(ad::second_derivative(f, pq, 0, 1) - 24.0) < 1e-12);
  CHECK(std::abs(ad::second_derivative(f, pq, 1, 0) - 24.0) < 1e-12);
  CHECK(std::abs(ad::second_derivative(f, pq, 0, 0) - 16.0) < 1e-12);
  CHECK(std::abs(ad::second_derivative(f, pq, 1, 1) - 12.0) < 1e-12);
}

TEST_CASE("every primitive matches its analytic first and second derivative") {
  struct Case {
    std::function<Var(const Var&)> f;
    std::function<double(double)> d1;
    std::function<double(double)> d2;
    double x;
  };
  const double s = 1.0 / (1.0 + std::exp(-0.4));
  const std::vector<Case> cases{
      {[](const Var& v) { return ad::exp(v); }, [](double x) { return std::exp(x); },
       [](double x) { return std::exp(x); }, 0.7},
      {[](const Var& v) { return ad::log(v); }, [](double x) { return 1 / x; }, [](double x) { return -1 / (x * x); },
       1.3},
      {[](const Var& v) { return ad::sin(v); }, [](double x) { return std::cos(x); },
       [](double x) { return -std::sin(x); }, 0.9},
      {[](const Var& v) { return ad::cos(v); }, [](double x) { return -std::sin(x); },
       [](double x) { return -std::cos(x); }, 0.9},
      {[](const Var& v) { return ad::tanh(v); }, [](double x) { return 1 - std::tanh(x) * std::tanh(x); },
       [](double x) { return -2 * std::tanh(x) * (1 - std::tanh(x) * std::tanh(x)); }, 0.5},
      {[](const Var& v) { return ad::sigmoid(v); }, [s](double) { return s * (1 - s); },
       [s](double) { return s * (1 - s) * (1 - 2 * s); }, 0.4},
      {[](const Var& v) { return ad::pow(v, 2.5); }, [](double x) { return 2.5 * std::pow(x, 1.5); },
       [](double x) { return 3.75 * std::pow(x, 0.5); }, 1.7},
      {[](const Var& v) { return ad::sqrt(v); }, [](double x) { return 0.5 / std::sqrt(x); },
       [](double x) { return -0.25 * std::pow(x, -1.5); }, 2.0},
      {[](const Var& v) { return ad::cosh(v); }, [](double x) { return std::sinh(x); },
       [](double x) { return std::cosh(x); }, 0.6},
      {[](const Var& v) { return 1.0 / v; }, [](double x) { return -1 / (x * x); },
       [](double x) { return 2 / (x * x * x); }, 1.5},
  };
  for (const auto& c : cases) {
    const std::vector<double> x{c.x};
    auto f = [&](std::span<const Var> v) { return c.f(v[0]); };
    CHECK(rel_err(ad::grad_input(f, x)[0], c.d1(c.x)) < 1e-13);
    CHECK(rel_err(ad::second_derivative(f, x, 0, 0), c.d2(c.x)) < 1e-12);
  }
}

TEST_CASE("linearity and Clairaut symmetry") {
  const std::vector<double> x{0.4, -0.7, 1.1};
  auto f = [](std::span<const Var> v) { return ad::sin(v[0] * v[1]) + ad::exp(v[2] * v[0]); };
  auto g = [](std::span<const Var> v) { return ad::tanh(v[1] + v[2] * v[2]) * v[0]; };
  auto h = [&](std::span<const Var> v) { return 3.0 * f(v) - 2.0 * g(v); };
  const auto gf = ad::grad_input(f, x);
  const auto gg = ad::grad_input(g, x);
  const auto gh = ad::grad_input(h, x);
  for (std::size_t i = 0; i < 3; ++i) CHECK(std::abs(gh[i] - (3 * gf[i] - 2 * gg[i])) < 1e-14);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < i; ++j) {
      CHECK(std::abs(ad::second_derivative(h, x, i, j) - ad::second_derivative(h, x, j, i)) < 1e-10);
    }
  }
}

TEST_CASE("polynomial Hessians are exact through nesting") {
  const std::vector<double> x{1.5, -2.0};
  auto f = [](std::span<const Var> v) { return v[0] * v[0] * v[0] * v[1] + 4.0 * v[1] * v[1] * v[0]; };
  CHECK(std::abs(ad::second_derivative(f, x, 0, 0) - 6 * 1.5 * -2.0) < 1e-10);
  CHECK(std::abs(ad::second_derivative(f, x, 0, 1) - (3 * 1.5 * 1.5 + 8 * -2.0)) < 1e-10);
  CHECK(std::abs(ad::second_derivative(f, x, 1, 1) - 8 * 1.5) < 1e-10);
}

TEST_CASE("nested recording tracks depth and stays differentiable") {
  ad::Tape tape;
  const Var x = tape.variable(0.8);
  const Var y = ad::sin(x) * x;
  const std::vector<Var> wrt{x};
  const Var dy = tape.gradient(y, wrt, true)[0];
  CHECK(tape.max_nesting_depth() >= 1);
  CHECK(tape.nesting_depth() == 0);
  const Var d2y = tape.gradient(dy, wrt, true)[0];
  const double d3y = tape.gradient_values(d2y, wrt)[0];
  CHECK(std::abs(dy.value() - (std::cos(0.8) * 0.8 + std::sin(0.8))) < 1e-14);
  CHECK(std::abs(d2y.value() - (2 * std::cos(0.8) - 0.8 * std::sin(0.8))) < 1e-14);
  CHECK(std::abs(d3y - (-3 * std::sin(0.8) - 0.8 * std::cos(0.8))) < 1e-13);
}

TEST_CASE("non-finite derivatives are reported") {
  const std::vector<double> x{0.0};
  CHECK_THROWS_AS(ad::grad_input([](std::span<const Var> v) { return ad::sqrt(v[0]); }, x), NonFiniteDerivative);
}

TEST_CASE("parameter gradients of elementary losses") {
  ad::ParameterVector shape;
  shape.add_block("a", 2, 2);
  shape.add_block("b", 1, 3);
  shape.values = {0.5, -1.0, 2.0, 0.25, 3.0, -4.0, 1.5};
  ad::Tape tape;
  const auto theta = tape.variables(shape.values);
  Var loss(0.0);
  for (std::size_t i = 0; i < 4; ++i) loss = loss + theta[i] * theta[i];
  const auto g = ad::grad_params(loss, theta, shape);
  REQUIRE(g.same_shape(shape));
  for (std::size_t i = 0; i < 4; ++i) CHECK(g.values[i] == 2.0 * shape.values[i]);
  for (std::size_t i = 4; i < 7; ++i) CHECK(g.values[i] == 0.0);
}

TEST_CASE("parameter manifest round trips") {
  NetworkConfig cfg;
  const auto layout = make_parameter_layout(cfg);
  CHECK(layout.values.size() == layout.manifest_size());
  std::size_t off = 0;
  for (const auto& b : layout.manifest) {
    CHECK(b.offset == off);
    off += b.size();
  }
  CHECK(off == layout.values.size());
}

TEST_CASE("6-layer network input gradient matches central differences") {
  NetworkConfig cfg;
  cfg.seed = 3;
  const auto params = testutil::lively_network(cfg, 0.5);
  std::mt19937_64 rng(8);
  const double h = 1e-5;
  for (int i = 0; i < 20; ++i) {
    const UnitPoint pt = testutil::random_point(rng);
    const PatchCoords c = stereographic_project(pt, hemisphere_patch(pt));
    const std::vector<double> x{c.p, c.q};
    const auto g = ad::grad_input(chart_field(params, c.patch), x);
    const double fd_p = (u_at(params, c.patch, c.p + h, c.q) - u_at(params, c.patch, c.p - h, c.q)) / (2 * h);
    const double fd_q = (u_at(params, c.patch, c.p, c.q + h) - u_at(params, c.patch, c.p, c.q - h)) / (2 * h);
    CHECK(rel_err(g[0], fd_p, 1e-3) < 1e-5);
    CHECK(rel_err(g[1], fd_q, 1e-3) < 1e-5);
  }
}

TEST_CASE("6-layer network second derivatives match central differences") {
  NetworkConfig cfg;
  cfg.seed = 4;
  const auto params = testutil::lively_network(cfg, 0.5);
  std::mt19937_64 rng(9);
  const double h = 1e-4;
  for (int i = 0; i < 20; ++i) {
    const UnitPoint pt = testutil::random_point(rng);
    const PatchCoords c = stereographic_project(pt, hemisphere_patch(pt));
    const std::vector<double> x{c.p, c.q};
    const auto f = chart_field(params, c.patch);
    auto U = [&](double dp, double dq) { return u_at(params, c.patch, c.p + dp, c.q + dq); };
    const double fd_pp = (U(h, 0) - 2 * U(0, 0) + U(-h, 0)) / (h * h);
    const double fd_qq = (U(0, h) - 2 * U(0, 0) + U(0, -h)) / (h * h);
    const double fd_pq = (U(h, h) - U(h, -h) - U(-h, h) + U(-h, -h)) / (4 * h * h);
    CHECK(rel_err(ad::second_derivative(f, x, 0, 0), fd_pp, 1e-2) < 1e-4);
    CHECK(rel_err(ad::second_derivative(f, x, 1, 1), fd_qq, 1e-2) < 1e-4);
    CHECK(rel_err(ad::second_derivative(f, x, 0, 1), fd_pq, 1e-2) < 1e-4);
  }
}

TEST_CASE("Laplacian-loss parameter gradient: tape, jet pass and finite differences agree") {
  const NetworkConfig cfg = testutil::tiny_config(5);
  auto params = testutil::lively_network(cfg, 0.8);
  REQUIRE(params.theta.values.size() <= 50);
  const auto pts = sample_uniform(12, 21);
  std::vector<double> k(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) k[i] = 1.0 + 0.5 * pts[i].point.z;
  const double N = 3.0;

  const LossGradient jet = loss_and_gradient(params, pts, k, N);
  const LossGradient tape = tape_loss_gradient(params, pts, k, N);
  CHECK(rel_err(jet.loss, tape.loss) < 1e-12);
  const double h = 1e-6;
  for (std::size_t j = 0; j < params.theta.values.size(); ++j) {
    const double saved = params.theta.values[j];
    params.theta.values[j] = saved + h;
    const double lp = batch_loss_value(params, pts, k, N);
    params.theta.values[j] = saved - h;
    const double lm = batch_loss_value(params, pts, k, N);
    params.theta.values[j] = saved;
    const double fd = (lp - lm) / (2 * h);
    CHECK(rel_err(jet.grad.values[j], tape.grad.values[j], 1e-8) < 1e-9);
    CHECK(rel_err(jet.grad.values[j], fd, 1e-5) < 1e-4);
  }
}

TEST_CASE("batched evaluation matches the tape route for the default network") {
  for (Activation act : {Activation::SiLU, Activation::GELU}) {
    NetworkConfig cfg;
    cfg.activation = act;
    cfg.seed = 12;
    const auto params = testutil::lively_network(cfg, 0.3);
    const auto pts = sample_uniform(120, 4);
    const CurvatureEval eval = evaluate_batch(params, pts);
    const AmbientField f = network_field(params);
    for (std::size_t i = 0; i < pts.size(); i += 7) {
      const PatchCoords c = stereographic_project(pts[i].point, pts[i].patch);
      CHECK(rel_err(eval.u[i], forward_u(params, pts[i].point), 1e-8) < 1e-12);
      CHECK(rel_err(eval.laplacian[i], laplace_beltrami(f, c), 1e-8) < 1e-10);
      CHECK(rel_err(eval.curvature[i], predicted_scalar_curvature(f, pts[i].point, c.patch), 1e-8) < 1e-10);
    }
  }
}

TEST_CASE("default-network loss gradient matches the tape route") {
  NetworkConfig cfg;
  cfg.hidden_units = 16;
  cfg.n_rff = 8;
  cfg.n_layers = 3;
  cfg.seed = 2;
  const auto params = testutil::lively_network(cfg, 0.3);
  const auto pts = sample_uniform(60, 5);
  std::vector<double> k(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) k[i] = 2.0 + pts[i].point.x * pts[i].point.y;
  const LossGradient jet = loss_and_gradient(params, pts, k, 7.0);
  const LossGradient tape = tape_loss_gradient(params, pts, k, 7.0);
  CHECK(rel_err(jet.loss, tape.loss) < 1e-12);
  double worst = 0.0;
  double scale = 0.0;
  for (std::size_t j = 0; j < tape.grad.values.size(); ++j) {
    worst = std::max(worst, std::abs(jet.grad.values[j] - tape.grad.values[j]));
    scale = std::max(scale, std::abs(tape.grad.values[j]));
  }
  CHECK(worst <= 1e-10 * scale);
}
