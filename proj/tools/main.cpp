#include <CLI11.hpp>
#include <iostream>

#include "nnn/commands.hpp"

namespace {

using nnn::cli::RunManifest;

void add_common(CLI::App* cmd, RunManifest& m, bool with_seeds) {
  cmd->add_option("--config", m.config, "YAML run configuration");
  cmd->add_option("--prescriber", m.prescriber, "prescriber name (overrides the config)");
  if (with_seeds) cmd->add_option("--seed", m.seeds, "run seed; repeat for several runs");
  cmd->add_option("--out", m.out, "output directory")->capture_default_str();
  cmd->add_option("--preset", m.preset, "network preset")->check(CLI::IsMember({"rff32", "rff128"}));
  cmd->add_flag("--overwrite", m.overwrite, "replace existing artifacts");
  cmd->add_option("--thresholds", m.thresholds, "calibrated thresholds.json for classification");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Neural solver for the prescribed curvature problem on the 2-sphere"};
  app.require_subcommand(1);

  RunManifest m;
  std::filesystem::path checkpoint;
  int L = 4;
  int subdivisions = 3;
  bool dump_distances = false;
  nnn::FitConfig fit;

  app.add_subcommand("list-prescribers", "print the prescriber corpus");

  auto* train = app.add_subcommand("train", "train one network per seed");
  add_common(train, m, true);

  auto* diagnose = app.add_subcommand("diagnose", "report and grids for a checkpoint");
  add_common(diagnose, m, false);
  diagnose->add_option("--checkpoint", checkpoint, "checkpoint.bin")->required();

  auto* fitcmd = app.add_subcommand("fit-expansion", "fit the harmonic ansatz to a trained network");
  add_common(fitcmd, m, false);
  fitcmd->add_option("--checkpoint", checkpoint, "checkpoint.bin")->required();
  fitcmd->add_option("--L", L, "maximum harmonic degree")->capture_default_str()->check(CLI::Range(1, 12));
  fitcmd->add_option("--epochs", fit.epochs)->capture_default_str();
  fitcmd->add_option("--patience", fit.patience)->capture_default_str();
  fitcmd->add_option("--points", fit.n_points)->capture_default_str();
  fitcmd->add_option("--l2", fit.l2_weight)->capture_default_str();
  fitcmd->add_option("--lr", fit.lr0)->capture_default_str();
  fitcmd->add_option("--fit-seed", fit.seed)->capture_default_str();
  fitcmd->add_flag("--direct", fit.direct_residual, "fit coefficients to the curvature residual instead");

  auto* embed = app.add_subcommand("embed", "MDS embedding of the learnt metric");
  add_common(embed, m, false);
  embed->add_option("--checkpoint", checkpoint, "checkpoint.bin")->required();
  embed->add_option("--subdivisions", subdivisions, "icosphere subdivision level")
      ->capture_default_str()
      ->check(CLI::Range(0, 5));
  embed->add_flag("--dump-distances", dump_distances, "also write distances.csv");

  auto* calibrate = app.add_subcommand("calibrate", "derive classification thresholds from known cases");
  add_common(calibrate, m, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : nnn::cli::kExitValidation;
  }

  try {
    if (app.got_subcommand("list-prescribers")) {
      nnn::cli::cmd_list_prescribers(std::cout);
    } else if (train->parsed()) {
      nnn::cli::cmd_train(m, std::cerr);
    } else if (diagnose->parsed()) {
      nnn::cli::cmd_diagnose(checkpoint, m, std::cerr);
    } else if (fitcmd->parsed()) {
      nnn::cli::cmd_fit_expansion(checkpoint, L, fit, m, std::cerr);
    } else if (embed->parsed()) {
      nnn::cli::cmd_embed(checkpoint, subdivisions, dump_distances, m, std::cerr);
    } else if (calibrate->parsed()) {
      nnn::cli::cmd_calibrate(m, std::cerr);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return nnn::cli::exit_code_for(e);
  }
  return nnn::cli::kExitOk;
}
