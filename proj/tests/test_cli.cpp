#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "nnn/commands.hpp"
#include "nnn/errors.hpp"

using namespace nnn;
using namespace nnn::cli;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("nnn_cli_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_config(const fs::path& dir, const std::string& extra = "") {
  const fs::path p = dir / "run.yaml";
  std::ofstream os(p);
  os << "n_samples: 100\n"
        "batch_size: 50\n"
        "epochs: 2\n"
        "eval_points: 200\n"
        "grid_theta: 4\n"
        "grid_phi: 8\n"
        "network:\n"
        "  hidden_units: 8\n"
        "  n_layers: 2\n"
        "  n_rff: 4\n"
        "normalisation:\n"
        "  kind: gauss_legendre\n"
        "  n_nodes: 16\n"
     << extra;
  return p;
}

int run_binary(const std::string& args) {
  const std::string cmd = std::string(NNN_BINARY) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("list-prescribers prints one row per registry entry") {
  std::ostringstream os;
  cmd_list_prescribers(os);
  std::istringstream is(os.str());
  std::string line;
  std::getline(is, line);
  CHECK(line.rfind("name", 0) == 0);
  std::size_t rows = 0;
  bool saw_round = false;
  while (std::getline(is, line)) {
    ++rows;
    if (line.rfind("round ", 0) == 0) {
      saw_round = true;
      CHECK(line.find("KnownRealisable") != std::string::npos);
    }
    if (line.rfind("sh_1_0 ", 0) == 0) CHECK(line.find("KnownUnrealisable") != std::string::npos);
  }
  CHECK(rows == registry().size());
  CHECK(saw_round);
}

TEST_CASE("run directories are seed scoped") {
  CHECK(run_directory("runs", "prop_a", 3) == fs::path("runs") / "prop_a" / "seed_3");
}

TEST_CASE("train requires a prescriber") {
  const fs::path dir = scratch("noprescriber");
  RunManifest m;
  m.config = write_config(dir);
  m.out = dir / "out";
  std::ostringstream log;
  try {
    cmd_train(m, log);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "prescriber");
    CHECK(exit_code_for(e) == kExitValidation);
  }
}

TEST_CASE("train writes one report per seed and respects overwrite") {
  const fs::path dir = scratch("seeds");
  RunManifest m;
  m.config = write_config(dir);
  m.prescriber = "sh_2_0";
  m.seeds = {0, 1, 2};
  m.out = dir / "out";
  std::ostringstream log;
  cmd_train(m, log);
  for (std::uint64_t s : m.seeds) {
    const fs::path run = run_directory(m.out, "sh_2_0", s);
    CHECK(fs::exists(run / "report.json"));
    CHECK(fs::exists(run / "metrics.jsonl"));
    CHECK(fs::exists(run / "checkpoint.bin"));
    CHECK(fs::exists(run / "grids" / "u.csv"));
  }
  try {
    cmd_train(m, log);
    FAIL("expected OutputExists");
  } catch (const OutputExists& e) {
    CHECK(exit_code_for(e) == kExitIo);
  }
  m.overwrite = true;
  CHECK_NOTHROW(cmd_train(m, log));

  const fs::path ckpt = run_directory(m.out, "sh_2_0", 0) / "checkpoint.bin";
  RunManifest d;
  d.out = dir / "diag";
  cmd_diagnose(ckpt, d, log);
  CHECK(fs::exists(d.out / "report.json"));

  RunManifest e;
  e.out = dir / "embed";
  cmd_embed(ckpt, 1, true, e, log);
  CHECK(fs::exists(e.out / "embedding.obj"));
  CHECK(fs::exists(e.out / "distances.csv"));

  FitConfig fit;
  fit.n_points = 500;
  fit.epochs = 20;
  fit.patience = 5;
  RunManifest f;
  f.out = dir / "fit";
  cmd_fit_expansion(ckpt, 2, fit, f, log);
  CHECK(fs::exists(f.out / "expansion.json"));
}

TEST_CASE("exit codes of the executable") {
  const fs::path dir = scratch("exit");
  const fs::path cfg = write_config(dir);
  CHECK(run_binary("list-prescribers") == kExitOk);
  CHECK(run_binary("train --config " + cfg.string() + " --prescriber no_such_thing --out " + (dir / "a").string()) ==
        kExitValidation);
  CHECK(run_binary("train --config " + cfg.string() + " --out " + (dir / "b").string()) == kExitValidation);
  CHECK(run_binary("diagnose --checkpoint " + (dir / "missing.bin").string() + " --out " + (dir / "c").string()) ==
        kExitIo);
  CHECK(run_binary("bogus-command") == kExitValidation);
  CHECK(run_binary("train --config " + cfg.string() + " --prescriber sh_3_0 --out " + (dir / "d").string()) ==
        kExitOk);
  CHECK(run_binary("train --config " + cfg.string() + " --prescriber sh_3_0 --out " + (dir / "d").string()) ==
        kExitIo);
}

TEST_CASE("exit code mapping") {
  CHECK(exit_code_for(UnknownPrescriber("x")) == kExitValidation);
  CHECK(exit_code_for(TrainingDiverged("x")) == kExitDiverged);
  CHECK(exit_code_for(CorruptCheckpoint("x")) == kExitIo);
  CHECK(exit_code_for(std::logic_error("x")) == 1);
}
