#pragma once

// Physics-informed training of the conformal-factor network against the
// normalised curvature residual, with Adam and a decaying learning rate.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "nnn/checkpoint.hpp"
#include "nnn/conformal_net.hpp"
#include "nnn/prescribers.hpp"
#include "nnn/sphere_geometry.hpp"

namespace nnn {

enum class ScheduleKind { ExponentialDecay, CosineAnnealing };

const char* to_string(ScheduleKind k);
ScheduleKind schedule_kind_from_string(const std::string& s);

struct TrainConfig {
  int n_samples = 20000;
  int batch_size = 200;
  int epochs = 150;
  double lr0 = 1e-3;
  int decay_steps = 2000;
  double decay_rate = 0.5;
  bool staircase = false;
  ScheduleKind schedule_kind = ScheduleKind::ExponentialDecay;
  std::uint64_t seed = 0;
  NetworkConfig network;
  QuadratureRule normalisation_rule = QuadratureRule::diagnostics_default();
  double radial_offset = 0.0;
  bool resample_each_epoch = false;
  int checkpoint_every = 0;  // epochs between checkpoints; 0 writes only the final one

  /// Throws ValidationError naming the first bad field.
  void validate() const;
  std::int64_t steps_per_epoch() const { return n_samples / batch_size; }
  std::int64_t total_steps() const { return steps_per_epoch() * epochs; }
};

struct MetricsRecord {
  int epoch = 0;
  double mean_loss = 0.0;
  double lr = 0.0;
  double wall_seconds = 0.0;
  int nonfinite_batches = 0;
};

/// N = integral of (2K)^2 over the sphere. Throws DegeneratePrescriber below 1e-12.
double compute_normalisation(const Prescriber& K, const QuadratureRule& rule);

double lr_at(const TrainConfig& cfg, std::int64_t step);

struct AdamConstants {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// One bias-corrected Adam update in place; increments state.step.
void adam_step(TrainState& state, const ad::ParameterVector& grad, double lr, const AdamConstants& k = {});

struct TrainOptions {
  /// Directory for metrics.jsonl, timing.jsonl and checkpoints; empty disables files.
  std::filesystem::path out_dir;
  /// Continue from this state instead of initialising.
  std::optional<TrainState> resume;
  /// Stop after this many epochs in total (<= cfg.epochs); lets tests interrupt a run.
  std::optional<int> stop_after_epoch;
  /// Extra JSON stored in every checkpoint header.
  std::string checkpoint_metadata = "{}";
  std::function<void(const MetricsRecord&)> on_epoch;
};

struct TrainResult {
  TrainState state;
  std::vector<MetricsRecord> metrics;
  double normalisation = 0.0;
};

/// Runs the configured epochs. Non-finite batches are skipped and counted;
/// throws TrainingDiverged if every batch of an epoch is non-finite.
TrainResult train(const TrainConfig& cfg, const Prescriber& K, const TrainOptions& options = {});

/// The fixed training set for cfg: drawn once per run from the run seed.
std::vector<SamplePoint> training_points(const TrainConfig& cfg, int epoch);

}  // namespace nnn
