#pragma once

// Versioned binary container for network parameters and optimiser state.
//
// Layout: 8-byte magic, u32 format version, u64 header length, JSON header
// (network config, parameter manifest, counters, caller metadata), then raw
// little-endian doubles: F, omega, theta, and Adam m and v when present.

#include <cstdint>
#include <filesystem>
#include <string>

#include "nnn/autodiff.hpp"
#include "nnn/conformal_net.hpp"

namespace nnn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

struct TrainState {
  NetworkParams params;
  ad::ParameterVector adam_m;
  ad::ParameterVector adam_v;
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
};

/// Fresh state: moments zeroed with the parameter manifest.
TrainState make_train_state(NetworkParams params);

void save_checkpoint(const TrainState& state, const std::filesystem::path& path, const std::string& metadata_json = "{}");

struct LoadedCheckpoint {
  TrainState state;
  std::string metadata_json;
};

/// Throws CorruptCheckpoint on a bad magic, version, truncated payload, or a
/// manifest that does not match the stored network config.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Same, and additionally requires the stored network config to equal expected.
LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const NetworkConfig& expected);

}  // namespace nnn
