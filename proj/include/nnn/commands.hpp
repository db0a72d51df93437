#pragma once

// Command implementations behind the nnn executable. Each returns normally on
// success and throws on failure; exit_code_for maps the exception to a code.

#include <cstdint>
#include <exception>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "nnn/run_config.hpp"
#include "nnn/sh_expansion.hpp"

namespace nnn::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitDiverged = 3;
inline constexpr int kExitIo = 4;

struct RunManifest {
  std::optional<std::filesystem::path> config;
  std::optional<std::string> prescriber;
  std::vector<std::uint64_t> seeds;
  std::filesystem::path out = "runs";
  std::optional<std::string> preset;
  bool overwrite = false;
  std::optional<std::filesystem::path> thresholds;
};

/// Config file (if any) with the manifest's flags applied on top.
RunConfig resolve_config(const RunManifest& m);

/// Seed-scoped output directory for one training run.
std::filesystem::path run_directory(const std::filesystem::path& out, const std::string& prescriber,
                                    std::uint64_t seed);

void cmd_list_prescribers(std::ostream& os);

/// Trains every seed into out/<prescriber>/seed_<n>/ and writes metrics,
/// checkpoint, report.json and grids/.
void cmd_train(const RunManifest& m, std::ostream& log);

/// Writes report.json and grids/ for a checkpoint into m.out.
void cmd_diagnose(const std::filesystem::path& checkpoint, const RunManifest& m, std::ostream& log);

/// Writes expansion.json into m.out.
void cmd_fit_expansion(const std::filesystem::path& checkpoint, int L, const FitConfig& fit, const RunManifest& m,
                       std::ostream& log);

/// Writes embedding.obj and embedding.json (and distances.csv on request) into m.out.
void cmd_embed(const std::filesystem::path& checkpoint, int subdivisions, bool dump_distances, const RunManifest& m,
               std::ostream& log);

/// Trains the known realisable and unrealisable harmonics for every seed and
/// writes thresholds.json into m.out.
void cmd_calibrate(const RunManifest& m, std::ostream& log);

int exit_code_for(const std::exception& e);

}  // namespace nnn::cli
