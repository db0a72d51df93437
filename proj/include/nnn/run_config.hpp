#pragma once

// YAML run configuration: a flat mirror of TrainConfig plus run-level fields.
//
//   prescriber: sh_2_0
//   seeds: [0, 1, 2]
//   epochs: 50
//   network:
//     hidden_units: 64
//     activation: silu
//   normalisation:
//     kind: gauss_legendre
//     n_nodes: 64

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "nnn/harmonics.hpp"
#include "nnn/trainer.hpp"

namespace nnn {

struct RunConfig {
  std::string prescriber;
  std::vector<std::uint64_t> seeds;  // empty means [train.seed]
  TrainConfig train;
  HarmonicConvention sh_convention = HarmonicConvention::Orthonormal;
  int eval_points = 2000;
  std::uint64_t eval_seed = 2024;
  int grid_theta = 64;
  int grid_phi = 128;
};

/// Throws ValidationError whose message carries the line number and field.
RunConfig parse_run_config(const std::string& yaml_text, const std::string& source = "<config>");
RunConfig load_run_config(const std::filesystem::path& path);

/// Named presets: rff32 and rff128 (Fourier feature count; other fields default).
void apply_preset(TrainConfig& cfg, const std::string& preset);

/// Canonical JSON rendering, used for checkpoint metadata and report hashes.
std::string run_config_json(const RunConfig& cfg);

/// FNV-1a hash of run_config_json, as 16 hex digits.
std::string config_hash(const RunConfig& cfg);

}  // namespace nnn
