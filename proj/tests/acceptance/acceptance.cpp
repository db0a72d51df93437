// Acceptance runner: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "nnn/autodiff.hpp"
#include "nnn/batch_eval.hpp"
#include "nnn/commands.hpp"
#include "nnn/conformal_net.hpp"
#include "nnn/diagnostics.hpp"
#include "nnn/embedding.hpp"
#include "nnn/harmonics.hpp"
#include "nnn/prescribers.hpp"
#include "nnn/sh_expansion.hpp"
#include "nnn/trainer.hpp"

using namespace nnn;
using ad::Var;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

UnitPoint random_point(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  const double x = n(rng);
  const double y = n(rng);
  const double z = n(rng);
  const double r = std::sqrt(x * x + y * y + z * z);
  return {x / r, y / r, z / r};
}

/// max |a - b| / max(max |b|, floor) over two equal-length vectors.
double vec_rel_err(const std::vector<double>& a, const std::vector<double>& b, double floor) {
  double diff = 0.0;
  double scale = floor;
  for (std::size_t i = 0; i < a.size(); ++i) {
    diff = std::max(diff, std::abs(a[i] - b[i]));
    scale = std::max(scale, std::abs(b[i]));
  }
  return diff / scale;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

TrainConfig reduced_config(std::uint64_t seed) {
  TrainConfig cfg;
  cfg.n_samples = 5000;
  cfg.epochs = 50;
  cfg.seed = seed;
  cfg.network.seed = seed;
  return cfg;
}

double mae_against(const NetworkParams& params, const std::function<double(const UnitPoint&)>& truth,
                   std::optional<double>* pcc = nullptr) {
  const auto pts = evaluation_points(2000, 2024);
  const EvalMetrics m = eval_against_truth([&](const UnitPoint& p) { return forward_u(params, p); }, truth, pts);
  if (pcc) *pcc = m.pcc;
  return m.mae;
}

Outcome quadrature_identities() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto rule = QuadratureRule::diagnostics_default();
  const double one = integrate_sphere([](const UnitPoint&) { return 1.0; }, rule);
  const double z = integrate_sphere([](const UnitPoint& p) { return p.z; }, rule);
  const double z2 = integrate_sphere([](const UnitPoint& p) { return p.z * p.z; }, rule);
  double worst = std::max({std::abs(one - kFourPi), std::abs(z), std::abs(z2 - kFourPi / 3)});
  const auto idx = harmonic_indices(4, 0);
  const auto nodes = quadrature_nodes(rule);
  std::vector<std::vector<double>> y(idx.size(), std::vector<double>(nodes.size()));
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t k = 0; k < nodes.size(); ++k) y[a][k] = real_harmonic(idx[a], nodes[k].point);
  }
  double gram = 0.0;
  for (std::size_t a = 0; a < idx.size(); ++a) {
    for (std::size_t b = a; b < idx.size(); ++b) {
      double g = 0.0;
      for (std::size_t k = 0; k < nodes.size(); ++k) g += nodes[k].weight * y[a][k] * y[b][k];
      gram = std::max(gram, std::abs(g - (a == b ? 1.0 : 0.0)));
    }
  }
  worst = std::max(worst, gram);
  const double t = seconds_since(t0);
  return {worst < 1e-8 && t < 10.0, fmt("max error %.2e", worst) + fmt(", %.1f s", t)};
}

Outcome autodiff_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(11);
  double worst_grad = 0.0;
  double worst_hess = 0.0;
  double worst_param = 0.0;
  std::size_t n_params = 0;
  for (int probe = 0; probe < 100; ++probe) {
    NetworkConfig cfg;
    cfg.hidden_units = 3;
    cfg.n_layers = 2;
    cfg.n_rff = 2;
    cfg.seed = static_cast<std::uint64_t>(probe);
    NetworkParams params = init_params(cfg);
    std::normal_distribution<double> n(0.0, 0.8);
    for (double& w : params.theta.view(params.theta.block("out.W"))) w = n(rng);
    n_params = std::max(n_params, params.theta.values.size());

    const UnitPoint pt = random_point(rng);
    const PatchCoords c = stereographic_project(pt, hemisphere_patch(pt));
    const AmbientField field = network_field(params);
    auto chart = [&](std::span<const Var> v) {
      const auto xyz = unproject(c.patch, v[0], v[1]);
      return field(xyz[0], xyz[1], xyz[2]);
    };
    auto U = [&](double dp, double dq) {
      const auto xyz = unproject(c.patch, c.p + dp, c.q + dq);
      return forward_u(params, {xyz[0], xyz[1], xyz[2]});
    };
    const std::vector<double> x{c.p, c.q};

    const double h1 = 1e-5;
    const auto g = ad::grad_input(chart, x);
    const std::vector<double> fd_g{(U(h1, 0) - U(-h1, 0)) / (2 * h1), (U(0, h1) - U(0, -h1)) / (2 * h1)};
    worst_grad = std::max(worst_grad, vec_rel_err({g[0], g[1]}, fd_g, 1e-3));

    const double h2 = 1e-4;
    const std::vector<double> hess{ad::second_derivative(chart, x, 0, 0), ad::second_derivative(chart, x, 1, 1),
                                   ad::second_derivative(chart, x, 0, 1)};
    const std::vector<double> fd_h{(U(h2, 0) - 2 * U(0, 0) + U(-h2, 0)) / (h2 * h2),
                                   (U(0, h2) - 2 * U(0, 0) + U(0, -h2)) / (h2 * h2),
                                   (U(h2, h2) - U(h2, -h2) - U(-h2, h2) + U(-h2, -h2)) / (4 * h2 * h2)};
    worst_hess = std::max(worst_hess, vec_rel_err(hess, fd_h, 1e-2));

    // Loss with the Laplacian inside, differentiated through the nested tape.
    const std::vector<SamplePoint> pts{{pt, c.patch}};
    const std::vector<double> k{1.0 + 0.5 * pt.z};
    ad::Tape tape;
    const auto theta = tape.variables(params.theta.values);
    const AmbientField taped = network_field(params, theta);
    const Var p = tape.variable(c.p);
    const Var q = tape.variable(c.q);
    const Var lap = laplace_beltrami(tape, taped, c.patch, p, q);
    const auto xyz = unproject(c.patch, p, q);
    const Var u = taped(xyz[0], xyz[1], xyz[2]);
    const Var r = ad::exp(-2.0 * u) * (2.0 - 2.0 * lap) - 2.0 * k[0];
    const Var loss = r * r / 3.0;
    const auto tape_grad = ad::grad_params(loss, theta, params.theta).values;
    const auto jet_grad = loss_and_gradient(params, pts, k, 3.0).grad.values;

    const double h3 = 1e-6;
    std::vector<double> fd(params.theta.values.size());
    for (std::size_t j = 0; j < fd.size(); ++j) {
      const double saved = params.theta.values[j];
      params.theta.values[j] = saved + h3;
      const double lp = batch_loss_value(params, pts, k, 3.0);
      params.theta.values[j] = saved - h3;
      const double lm = batch_loss_value(params, pts, k, 3.0);
      params.theta.values[j] = saved;
      fd[j] = (lp - lm) / (2 * h3);
    }
    worst_param = std::max({worst_param, vec_rel_err(tape_grad, fd, 1e-6), vec_rel_err(jet_grad, fd, 1e-6)});
  }
  const double worst = std::max({worst_grad, worst_hess, worst_param});
  const double t = seconds_since(t0);
  return {worst < 1e-4 && n_params <= 50 && t < 60.0,
          fmt("%g params", static_cast<double>(n_params)) + fmt(", grad %.1e", worst_grad) +
              fmt(", hessian %.1e", worst_hess) + fmt(", param grad %.1e", worst_param) + fmt(", %.1f s", t)};
}

Outcome spectral_residual() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto nodes = quadrature_nodes(QuadratureRule::gauss_legendre(71));
  double worst_res = 0.0;
  double worst_kw = 0.0;
  for (const char* name : {"prop_a", "prop_b", "prop_c"}) {
    const Prescriber K = registry_lookup(name);
    for (const auto& node : nodes) worst_res = std::max(worst_res, std::abs(pde_residual(*K.u_true, K.K, node.point)));
    for (Axis a : {Axis::X, Axis::Y, Axis::Z}) {
      worst_kw = std::max(worst_kw, std::abs(kazdan_warner_integral(K, K.u_true->value, a,
                                                                    QuadratureRule::diagnostics_default())));
    }
  }
  const double t = seconds_since(t0);
  return {nodes.size() >= 10000 && worst_res < 1e-9 && worst_kw < 1e-6 && t < 30.0,
          fmt("%g points", static_cast<double>(nodes.size())) + fmt(", residual %.1e", worst_res) +
              fmt(", Kazdan-Warner %.1e", worst_kw) + fmt(", %.1f s", t)};
}

Outcome round_sphere() {
  const auto t0 = std::chrono::steady_clock::now();
  const TrainResult r = train(reduced_config(0), registry_lookup("round"));
  const double loss = r.metrics.back().mean_loss;
  const double mae = mae_against(r.state.params, [](const UnitPoint&) { return 0.0; });
  const double t = seconds_since(t0);
  return {loss < 1e-6 && mae < 1e-3,
          fmt("loss %.2e", loss) + fmt(", MAE %.2e", mae) + fmt(", %.0f s", t)};
}

Outcome separation() {
  const auto t0 = std::chrono::steady_clock::now();
  struct Best {
    double loss = INFINITY;
    double gb = 0.0;
  };
  auto best_of = [](const char* name) {
    Best b;
    const Prescriber K = registry_lookup(name);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const TrainResult r = train(reduced_config(seed), K);
      const double loss = r.metrics.back().mean_loss;
      std::printf("  %s seed %llu: final loss %.3e\n", name, static_cast<unsigned long long>(seed), loss);
      if (loss < b.loss) {
        b.loss = loss;
        b.gb = gauss_bonnet_deviation(r.state.params).relative_deviation;
      }
    }
    return b;
  };
  const Best good = best_of("sh_2_0");
  const Best bad = best_of("sh_1_0");
  const double loss_ratio = bad.loss / good.loss;
  const double gb_ratio = bad.gb / std::max(good.gb, 1e-300);
  const double t = seconds_since(t0);
  return {loss_ratio >= 100.0 && gb_ratio >= 100.0,
          fmt("min loss sh_2_0 %.2e", good.loss) + fmt(" vs sh_1_0 %.2e", bad.loss) +
              fmt(" (x%.1f)", loss_ratio) + fmt(", Gauss-Bonnet %.2e", good.gb) + fmt(" vs %.2e", bad.gb) +
              fmt(" (x%.2g)", gb_ratio) + fmt(", %.0f s", t)};
}

Outcome spectral_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  const Prescriber K = registry_lookup("prop_a");
  const TrainResult r = train(reduced_config(0), K);
  std::optional<double> pcc;
  const double mae = mae_against(r.state.params, K.u_true->value, &pcc);
  const double t = seconds_since(t0);
  return {mae < 1e-3 && pcc && *pcc > 0.999,
          fmt("MAE %.2e", mae) + fmt(", PCC %.6f", pcc.value_or(NAN)) + fmt(", %.0f s", t)};
}

Outcome expansion_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  const Prescriber K = registry_lookup("prop_a");
  FitConfig cfg;
  cfg.l2_weight = 0.0;
  cfg.epochs = 2000;
  cfg.patience = 2000;
  const int L = 4;
  const FitResult fit = fit_expansion(K.u_true->value, cfg, L, K.convention);

  // Ridge-regularised normal equations over the same samples.
  const auto idx = harmonic_indices(L);
  const auto pts = fit_points(cfg);
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd A(n, static_cast<Eigen::Index>(idx.size()));
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const UnitPoint& p = pts[static_cast<std::size_t>(i)].point;
    for (std::size_t j = 0; j < idx.size(); ++j) {
      A(i, static_cast<Eigen::Index>(j)) = real_harmonic(idx[j], p, K.convention) / (idx[j].ell * (idx[j].ell + 1.0));
    }
    b(i) = K.u_true->value(p);
  }
  const Eigen::MatrixXd normal =
      A.transpose() * A / static_cast<double>(n) +
      cfg.l2_weight * Eigen::MatrixXd::Identity(A.cols(), A.cols());
  const Eigen::VectorXd oracle = normal.ldlt().solve(A.transpose() * b / static_cast<double>(n));

  double oracle_gap = 0.0;
  double others = 0.0;
  for (std::size_t j = 0; j < idx.size(); ++j) {
    oracle_gap = std::max(oracle_gap, std::abs(fit.coeffs.c[j] - oracle(static_cast<Eigen::Index>(j))));
    if (!(idx[j] == HarmonicIndex{2, 0})) others = std::max(others, std::abs(fit.coeffs.c[j]));
  }
  const double c20 = fit.coeffs.at({2, 0});
  const double mse = curvature_mse(threshold_coeffs(fit.coeffs), K, 2000, 2024);
  const double t = seconds_since(t0);
  return {std::abs(c20 - 1.0) < 0.01 && others < 0.01 && mse < 1e-9 && oracle_gap < 1e-6 && t < 300.0,
          fmt("c_2_0 %.6f", c20) + fmt(", max other %.1e", others) + fmt(", curvature MSE %.2e", mse) +
              fmt(", oracle gap %.1e", oracle_gap) + fmt(", %.1f s", t)};
}

Outcome gauss_bonnet_invariance() {
  const auto t0 = std::chrono::steady_clock::now();
  double worst = 0.0;
  std::mt19937_64 rng(8);
  for (std::uint64_t draw = 0; draw < 10; ++draw) {
    NetworkConfig cfg;
    cfg.seed = 100 + draw;
    NetworkParams params = init_params(cfg);
    std::normal_distribution<double> n(0.0, 0.3);
    for (double& w : params.theta.view(params.theta.block("out.W"))) w = n(rng);
    worst = std::max(worst, gauss_bonnet_deviation(params).relative_deviation);
  }
  const double t = seconds_since(t0);
  return {worst < 1e-3, fmt("max relative deviation %.2e", worst) + fmt(", %.1f s", t)};
}

Outcome embedding_suite() {
  const auto t0 = std::chrono::steady_clock::now();
  bool combinatorics = true;
  for (int s = 0; s <= 3; ++s) {
    const SphereMesh m = build_mesh(s);
    const long v = static_cast<long>(m.vertices.size());
    const long e = static_cast<long>(m.edges.size());
    const long f = static_cast<long>(m.faces.size());
    combinatorics = combinatorics && v == 10 * (1L << (2 * s)) + 2 && e == 30 * (1L << (2 * s)) &&
                    f == 20 * (1L << (2 * s)) && v - e + f == 2;
  }

  const SphereMesh m3 = build_mesh(3);
  const DistanceMatrix D0 = pairwise_distances([](const UnitPoint&) { return 0.0; }, m3);
  double scaling = 0.0;
  for (double c : {-0.5, 0.8}) {
    const DistanceMatrix Dc = pairwise_distances([c](const UnitPoint&) { return c; }, m3);
    scaling = std::max(scaling, (Dc - std::exp(c) * D0).cwiseAbs().maxCoeff() / (std::exp(c) * D0.maxCoeff()));
  }

  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd X(60, 3);
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < 3; ++j) X(i, j) = n(rng);
  }
  DistanceMatrix DX(X.rows(), X.rows());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    for (Eigen::Index j = 0; j < X.rows(); ++j) DX(i, j) = (X.row(i) - X.row(j)).norm();
  }
  MdsOptions exact;
  exact.max_iter = 5000;
  exact.tol = 0.0;
  const double rms = procrustes_rms(mds_embed(DX, exact).coords, X);

  const EmbeddingResult round = mds_embed(D0);
  const Eigen::RowVectorXd centre = round.coords.colwise().mean();
  const Eigen::VectorXd radii = (round.coords.rowwise() - centre).rowwise().norm();
  const double mean = radii.mean();
  const double spread = std::sqrt((radii.array() - mean).square().mean()) / mean;

  const double t = seconds_since(t0);
  return {combinatorics && scaling < 1e-12 && rms < 1e-6 && spread < 0.05 && t < 300.0,
          std::string(combinatorics ? "combinatorics exact" : "combinatorics WRONG") +
              fmt(", scaling %.1e", scaling) + fmt(", Procrustes %.1e", rms) + fmt(", radii std/mean %.4f", spread) +
              fmt(", %.1f s", t)};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

/// Every file under a, compared byte for byte with its twin under b.
bool same_tree(const fs::path& a, const fs::path& b, std::size_t& compared) {
  bool same = true;
  for (const auto& entry : fs::recursive_directory_iterator(a)) {
    if (!entry.is_regular_file() || entry.path().filename() == "timing.jsonl") continue;
    const fs::path twin = b / fs::relative(entry.path(), a);
    same = same && fs::exists(twin) && slurp(entry.path()) == slurp(twin);
    ++compared;
  }
  return same;
}

Outcome determinism() {
  const auto t0 = std::chrono::steady_clock::now();
  setenv("NNN_THREADS", "1", 1);
  const fs::path root = fs::temp_directory_path() / "nnn_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  const fs::path cfg = root / "run.yaml";
  std::ofstream(cfg) << "n_samples: 1000\nbatch_size: 100\nepochs: 3\neval_points: 500\n"
                        "grid_theta: 8\ngrid_phi: 16\nnetwork:\n  hidden_units: 16\n";
  std::ostringstream log;
  for (const char* tag : {"a", "b"}) {
    cli::RunManifest m;
    m.config = cfg;
    m.prescriber = "prop_a";
    m.seeds = {0, 1};
    m.out = root / tag / "train";
    cli::cmd_train(m, log);
    const fs::path ckpt = cli::run_directory(m.out, "prop_a", 1) / "checkpoint.bin";
    cli::RunManifest d;
    d.out = root / tag / "diagnose";
    cli::cmd_diagnose(ckpt, d, log);
    FitConfig fit;
    fit.n_points = 2000;
    fit.epochs = 50;
    cli::RunManifest f;
    f.out = root / tag / "fit";
    cli::cmd_fit_expansion(ckpt, 3, fit, f, log);
    cli::RunManifest e;
    e.out = root / tag / "embed";
    cli::cmd_embed(ckpt, 2, true, e, log);
  }
  std::size_t compared = 0;
  const bool same = same_tree(root / "a", root / "b", compared);
  const double t = seconds_since(t0);
  return {same && compared > 0, fmt("%g files identical", same ? static_cast<double>(compared) : 0.0) +
                                    fmt(", %.1f s", t)};
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"quadrature identities", quadrature_identities},
      {"autodiff oracle suite", autodiff_oracle},
      {"spectral-pair residual oracle", spectral_residual},
      {"round-sphere training", round_sphere},
      {"separation of sh_2_0 and sh_1_0", separation},
      {"spectral-pair recovery", spectral_recovery},
      {"expansion-fit oracle", expansion_oracle},
      {"Gauss-Bonnet invariance", gauss_bonnet_invariance},
      {"embedding suite", embedding_suite},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      o = criteria[i].run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::printf("criterion %zu: %s  %s (%s)\n", i + 1, o.pass ? "PASS" : "FAIL", criteria[i].name, o.detail.c_str());
    std::fflush(stdout);
    if (!o.pass) ++failed;
  }
  return failed == 0 ? 0 : 1;
}
