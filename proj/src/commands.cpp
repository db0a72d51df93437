#include "nnn/commands.hpp"

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <sstream>

#include "nnn/checkpoint.hpp"
#include "nnn/diagnostics.hpp"
#include "nnn/embedding.hpp"
#include "nnn/errors.hpp"
#include "nnn/prescribers.hpp"
#include "nnn/trainer.hpp"

namespace nnn::cli {

namespace fs = std::filesystem;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write " + path.string());
  os << text << '\n';
  if (!os) throw std::runtime_error("failed writing " + path.string());
}

/// Creates dir, refusing to reuse one that already holds files unless overwrite is set.
void prepare_directory(const fs::path& dir, bool overwrite) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    if (!overwrite) {
      throw OutputExists(dir.string() + " already contains artifacts; pass --overwrite to replace them");
    }
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

void prepare_file(const fs::path& path, bool overwrite) {
  if (fs::exists(path) && !overwrite) {
    throw OutputExists(path.string() + " already exists; pass --overwrite to replace it");
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

/// Run settings recovered from a checkpoint's metadata, with manifest overrides.
struct CheckpointContext {
  TrainState state;
  Prescriber K;
  RunConfig run;
};

CheckpointContext open_checkpoint(const fs::path& path, const RunManifest& m) {
  LoadedCheckpoint loaded = load_checkpoint(path);
  RunConfig run;
  nlohmann::json meta;
  try {
    meta = nlohmann::json::parse(loaded.metadata_json);
  } catch (const nlohmann::json::exception& e) {
    throw CorruptCheckpoint(path.string() + ": unreadable metadata: " + e.what());
  }
  if (meta.is_object()) {
    run.prescriber = meta.value("prescriber", std::string{});
    if (meta.contains("harmonic_convention")) {
      run.sh_convention = harmonic_convention_from_string(meta["harmonic_convention"].get<std::string>());
    }
    run.eval_points = meta.value("eval_points", run.eval_points);
    run.eval_seed = meta.value("eval_seed", run.eval_seed);
    run.grid_theta = meta.value("grid_theta", run.grid_theta);
    run.grid_phi = meta.value("grid_phi", run.grid_phi);
    run.train.seed = meta.value("seed", run.train.seed);
  }
  if (m.config) {
    const RunConfig file = load_run_config(*m.config);
    run.prescriber = file.prescriber;
    run.sh_convention = file.sh_convention;
    run.eval_points = file.eval_points;
    run.eval_seed = file.eval_seed;
    run.grid_theta = file.grid_theta;
    run.grid_phi = file.grid_phi;
  }
  if (m.prescriber) run.prescriber = *m.prescriber;
  if (run.prescriber.empty()) {
    throw ValidationError("prescriber", "checkpoint metadata names no prescriber; pass --prescriber");
  }
  run.train.network = loaded.state.params.config;
  return {std::move(loaded.state), registry_lookup(run.prescriber, run.sh_convention), run};
}

DiagnosticsReport build_report(const NetworkParams& params, const Prescriber& K, const RunConfig& run,
                               double final_loss, std::uint64_t seed, const RunManifest& m) {
  DiagnosticsReport r;
  r.prescriber_name = K.name;
  r.final_loss = final_loss;
  const GaussBonnetResult gb = gauss_bonnet_deviation(params);
  r.gb_integral = gb.integral;
  r.gb_relative_deviation = gb.relative_deviation;
  r.seed = seed;
  r.eval_seed = run.eval_seed;
  r.config_hash = config_hash(run);
  if (K.u_true) {
    const auto pts = evaluation_points(static_cast<std::size_t>(run.eval_points), run.eval_seed);
    r.eval_metrics = eval_against_truth([&](const UnitPoint& p) { return forward_u(params, p); }, K.u_true->value,
                                        pts);
  }
  if (m.thresholds) r.classification = classify(final_loss, gb.relative_deviation, load_thresholds(*m.thresholds));
  return r;
}

/// Trains one seed into dir and returns the final mean training loss.
double train_one(const RunConfig& run, const Prescriber& K, std::uint64_t seed, const fs::path& dir,
                 const RunManifest& m, std::ostream& log) {
  RunConfig seeded = run;
  seeded.train.seed = seed;
  seeded.train.network.seed = seed;
  seeded.seeds.clear();
  prepare_directory(dir, m.overwrite);
  write_text(dir / "config.json", nlohmann::json::parse(run_config_json(seeded)).dump(2));

  TrainOptions opts;
  opts.out_dir = dir;
  opts.checkpoint_metadata = run_config_json(seeded);
  log << K.name << " seed " << seed << ": training " << seeded.train.epochs << " epochs\n" << std::flush;
  const TrainResult res = train(seeded.train, K, opts);
  const double final_loss = res.metrics.back().mean_loss;

  const DiagnosticsReport report = build_report(res.state.params, K, seeded, final_loss, seed, m);
  write_text(dir / "report.json", report_json(report));
  export_grids(res.state.params, K, seeded.grid_theta, seeded.grid_phi, dir / "grids");
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s seed %llu: final loss %.3e, Gauss-Bonnet deviation %.3e\n", K.name.c_str(),
                static_cast<unsigned long long>(seed), final_loss, report.gb_relative_deviation);
  log << buf << std::flush;
  return final_loss;
}

std::vector<std::uint64_t> seeds_of(const RunConfig& run) {
  return run.seeds.empty() ? std::vector<std::uint64_t>{run.train.seed} : run.seeds;
}

}  // namespace

RunConfig resolve_config(const RunManifest& m) {
  RunConfig cfg;
  if (m.config) {
    if (!fs::exists(*m.config)) throw std::runtime_error("config file " + m.config->string() + " does not exist");
    cfg = load_run_config(*m.config);
  }
  if (m.prescriber) cfg.prescriber = *m.prescriber;
  if (!m.seeds.empty()) cfg.seeds = m.seeds;
  if (m.preset) apply_preset(cfg.train, *m.preset);
  if (cfg.prescriber.empty()) throw ValidationError("prescriber", "no prescriber given in config or flags");
  cfg.train.validate();
  return cfg;
}

fs::path run_directory(const fs::path& out, const std::string& prescriber, std::uint64_t seed) {
  return out / prescriber / ("seed_" + std::to_string(seed));
}

void cmd_list_prescribers(std::ostream& os) {
  const auto& reg = registry();
  std::size_t w_name = 4;
  std::size_t w_status = 6;
  for (const auto& p : reg) {
    w_name = std::max(w_name, p.name.size());
    w_status = std::max(w_status, std::string(to_string(p.status)).size());
  }
  auto row = [&](const std::string& a, const std::string& b, const std::string& c) {
    os << a << std::string(w_name - a.size() + 2, ' ') << b << std::string(w_status - b.size() + 2, ' ') << c
       << '\n';
  };
  row("name", "status", "formula");
  for (const auto& p : reg) row(p.name, to_string(p.status), p.formula);
}

void cmd_train(const RunManifest& m, std::ostream& log) {
  const RunConfig run = resolve_config(m);
  const Prescriber K = registry_lookup(run.prescriber, run.sh_convention);
  for (const std::uint64_t seed : seeds_of(run)) train_one(run, K, seed, run_directory(m.out, K.name, seed), m, log);
}

void cmd_diagnose(const fs::path& checkpoint, const RunManifest& m, std::ostream& log) {
  const CheckpointContext ctx = open_checkpoint(checkpoint, m);
  prepare_file(m.out / "report.json", m.overwrite);
  const NetworkParams& params = ctx.state.params;
  const double loss = evaluation_loss(params, ctx.K, static_cast<std::size_t>(ctx.run.eval_points), ctx.run.eval_seed,
                                      ctx.run.train.normalisation_rule);
  const DiagnosticsReport report = build_report(params, ctx.K, ctx.run, loss, ctx.run.train.seed, m);
  write_text(m.out / "report.json", report_json(report));
  export_grids(params, ctx.K, ctx.run.grid_theta, ctx.run.grid_phi, m.out / "grids");
  log << "wrote " << (m.out / "report.json").string() << '\n';
}

void cmd_fit_expansion(const fs::path& checkpoint, int L, const FitConfig& fit, const RunManifest& m,
                       std::ostream& log) {
  const CheckpointContext ctx = open_checkpoint(checkpoint, m);
  const fs::path out = m.out / "expansion.json";
  prepare_file(out, m.overwrite);
  const NetworkParams& params = ctx.state.params;
  const FitResult res =
      fit.direct_residual
          ? fit_expansion_residual(ctx.K, fit, L, ctx.run.sh_convention)
          : fit_expansion([&](const UnitPoint& p) { return forward_u(params, p); }, fit, L, ctx.run.sh_convention);
  const ExpansionCoeffs thresholded = threshold_coeffs(res.coeffs);
  const double mse = curvature_mse(thresholded, ctx.K, static_cast<std::size_t>(ctx.run.eval_points),
                                   ctx.run.eval_seed);
  write_text(out, coefficients_json(thresholded, res.fit_loss, mse));
  char buf[160];
  std::snprintf(buf, sizeof buf, "fit loss %.3e after %d epochs, curvature MSE %.3e\n", res.fit_loss, res.epochs_run,
                mse);
  log << buf;
}

void cmd_embed(const fs::path& checkpoint, int subdivisions, bool dump_distances, const RunManifest& m,
               std::ostream& log) {
  const CheckpointContext ctx = open_checkpoint(checkpoint, m);
  const fs::path obj = m.out / "embedding.obj";
  prepare_file(obj, m.overwrite);
  prepare_file(m.out / "embedding.json", m.overwrite);
  const SphereMesh mesh = build_mesh(subdivisions);
  const DistanceMatrix D = pairwise_distances(ctx.state.params, mesh);
  MdsOptions opts;
  opts.seed = ctx.run.train.seed;
  const EmbeddingResult res = mds_embed(D, opts);
  export_mesh(res, mesh, obj);
  if (dump_distances) export_distance_csv(D, m.out / "distances.csv");
  const nlohmann::json j = {{"vertices", mesh.vertices.size()},
                            {"faces", mesh.faces.size()},
                            {"subdivisions", subdivisions},
                            {"stress", res.stress},
                            {"iterations", res.iterations},
                            {"stress_history", res.stress_history}};
  write_text(m.out / "embedding.json", j.dump(2));
  char buf[128];
  std::snprintf(buf, sizeof buf, "embedded %zu vertices, stress %.4e after %d iterations\n", mesh.vertices.size(),
                res.stress, res.iterations);
  log << buf;
}

void cmd_calibrate(const RunManifest& m, std::ostream& log) {
  RunManifest base = m;
  if (!base.prescriber) base.prescriber = "sh_2_0";
  RunConfig run = resolve_config(base);
  if (m.seeds.empty() && run.seeds.empty()) run.seeds = {0, 1, 2, 3, 4};
  const fs::path out = m.out / "thresholds.json";
  prepare_file(out, m.overwrite);

  std::vector<CalibrationRun> runs;
  for (const char* name : {"sh_2_0", "sh_3_0", "sh_1_0", "sh_1_1"}) {
    RunConfig r = run;
    r.prescriber = name;
    const Prescriber K = registry_lookup(name, r.sh_convention);
    for (const std::uint64_t seed : seeds_of(r)) {
      const fs::path dir = run_directory(m.out / "calibration", name, seed);
      RunManifest no_thresholds = m;
      no_thresholds.thresholds.reset();
      const double loss = train_one(r, K, seed, dir, no_thresholds, log);
      const LoadedCheckpoint ck = load_checkpoint(dir / "checkpoint.bin");
      runs.push_back({name, K.status, loss, gauss_bonnet_deviation(ck.state.params).relative_deviation});
    }
  }
  const ClassificationThresholds t = calibrate_thresholds(runs);
  save_thresholds(t, out);
  char buf[160];
  std::snprintf(buf, sizeof buf, "thresholds: loss_lo %.3e, loss_hi %.3e, gb_max %.3e\n", t.loss_lo, t.loss_hi,
                t.gb_max);
  log << buf;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ValidationError*>(&e) || dynamic_cast<const UnknownPrescriber*>(&e) ||
      dynamic_cast<const DegeneratePrescriber*>(&e) || dynamic_cast<const std::invalid_argument*>(&e)) {
    return kExitValidation;
  }
  if (dynamic_cast<const TrainingDiverged*>(&e) || dynamic_cast<const NonFiniteDerivative*>(&e) ||
      dynamic_cast<const QuadratureDiverged*>(&e) || dynamic_cast<const ResidualCheckFailed*>(&e)) {
    return kExitDiverged;
  }
  if (dynamic_cast<const CorruptCheckpoint*>(&e) || dynamic_cast<const OutputExists*>(&e) ||
      dynamic_cast<const fs::filesystem_error*>(&e) || dynamic_cast<const std::runtime_error*>(&e)) {
    return kExitIo;
  }
  return 1;
}

}  // namespace nnn::cli
