#include "nnn/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <json.hpp>
#include <numeric>
#include <random>

#include "nnn/batch_eval.hpp"
#include "nnn/errors.hpp"
#include "nnn/random.hpp"

namespace nnn {

const char* to_string(ScheduleKind k) { return k == ScheduleKind::ExponentialDecay ? "exponential" : "cosine"; }

ScheduleKind schedule_kind_from_string(const std::string& s) {
  if (s == "exponential" || s == "ExponentialDecay" || s == "exponential_decay") return ScheduleKind::ExponentialDecay;
  if (s == "cosine" || s == "CosineAnnealing" || s == "cosine_annealing") return ScheduleKind::CosineAnnealing;
  throw ValidationError("schedule_kind", "expected exponential or cosine, got '" + s + "'");
}

void TrainConfig::validate() const {
  if (n_samples <= 0) throw ValidationError("n_samples", "must be positive");
  if (batch_size <= 0) throw ValidationError("batch_size", "must be positive");
  if (batch_size > n_samples) throw ValidationError("batch_size", "must not exceed n_samples");
  if (epochs <= 0) throw ValidationError("epochs", "must be positive");
  if (!(lr0 > 0.0)) throw ValidationError("lr0", "must be positive");
  if (decay_steps <= 0) throw ValidationError("decay_steps", "must be positive");
  if (!(decay_rate > 0.0 && decay_rate <= 1.0)) throw ValidationError("decay_rate", "must lie in (0, 1]");
  if (normalisation_rule.n_nodes <= 0) throw ValidationError("normalisation.n_nodes", "must be positive");
  if (radial_offset < 0.0) throw ValidationError("radial_offset", "must be non-negative");
  if (checkpoint_every < 0) throw ValidationError("checkpoint_every", "must be non-negative");
  network.validate();
}

double compute_normalisation(const Prescriber& K, const QuadratureRule& rule) {
  const double n = integrate_sphere(
      [&](const UnitPoint& pt) {
        const double k = 2.0 * K(pt);
        return k * k;
      },
      rule);
  if (!(n >= 1e-12)) throw DegeneratePrescriber("prescriber '" + K.name + "' has vanishing L2 norm");
  return n;
}

double lr_at(const TrainConfig& cfg, std::int64_t step) {
  const auto s = static_cast<double>(std::max<std::int64_t>(step, 0));
  if (cfg.schedule_kind == ScheduleKind::CosineAnnealing) {
    const auto total = static_cast<double>(std::max<std::int64_t>(cfg.total_steps(), 1));
    return cfg.lr0 * 0.5 * (1.0 + std::cos(kPi * std::min(s, total) / total));
  }
  double exponent = s / cfg.decay_steps;
  if (cfg.staircase) exponent = std::floor(exponent);
  return cfg.lr0 * std::pow(cfg.decay_rate, exponent);
}

void adam_step(TrainState& state, const ad::ParameterVector& grad, double lr, const AdamConstants& k) {
  auto& theta = state.params.theta.values;
  auto& m = state.adam_m.values;
  auto& v = state.adam_v.values;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(k.beta1, t);
  const double c2 = 1.0 - std::pow(k.beta2, t);
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double g = grad.values[i];
    m[i] = k.beta1 * m[i] + (1.0 - k.beta1) * g;
    v[i] = k.beta2 * v[i] + (1.0 - k.beta2) * g * g;
    const double m_hat = m[i] / c1;
    const double v_hat = v[i] / c2;
    theta[i] -= lr * m_hat / (std::sqrt(v_hat) + k.eps);
  }
}

std::vector<SamplePoint> training_points(const TrainConfig& cfg, int epoch) {
  std::uint64_t seed = mix64(cfg.seed ^ 0x5a3d1e9b7c2f4a61ULL);
  if (cfg.resample_each_epoch) seed = mix64(seed + static_cast<std::uint64_t>(epoch));
  return sample_uniform(static_cast<std::size_t>(cfg.n_samples), seed, cfg.radial_offset);
}

namespace {

std::string metrics_line(const MetricsRecord& r) {
  nlohmann::json j = {{"epoch", r.epoch}, {"mean_loss", r.mean_loss}, {"lr", r.lr},
                      {"nonfinite_batches", r.nonfinite_batches}};
  return j.dump();
}

}  // namespace

TrainResult train(const TrainConfig& cfg, const Prescriber& K, const TrainOptions& options) {
  cfg.validate();
  TrainResult result;
  if (options.resume) {
    result.state = *options.resume;
    if (!(result.state.params.config == cfg.network)) {
      throw CorruptCheckpoint("resume state was produced with a different network config");
    }
    if (result.state.adam_m.values.empty()) {
      result.state.adam_m = result.state.params.theta.zeros_like();
      result.state.adam_v = result.state.params.theta.zeros_like();
    }
  } else {
    result.state = make_train_state(init_params(cfg.network));
  }
  TrainState& state = result.state;
  result.normalisation = compute_normalisation(K, cfg.normalisation_rule);
  const double N = result.normalisation;

  const bool write_files = !options.out_dir.empty();
  std::ofstream metrics_log;
  std::ofstream timing_log;
  if (write_files) {
    std::filesystem::create_directories(options.out_dir);
    const auto mode = options.resume ? std::ios::app : std::ios::trunc;
    metrics_log.open(options.out_dir / "metrics.jsonl", std::ios::out | mode);
    timing_log.open(options.out_dir / "timing.jsonl", std::ios::out | mode);
    if (!metrics_log || !timing_log) throw std::runtime_error("cannot open metrics log in " + options.out_dir.string());
  }

  const int last_epoch = std::min(cfg.epochs, options.stop_after_epoch.value_or(cfg.epochs));
  const auto steps = static_cast<std::size_t>(cfg.steps_per_epoch());
  const auto batch = static_cast<std::size_t>(cfg.batch_size);

  std::vector<SamplePoint> points;
  std::vector<double> k_values;
  int points_epoch = -1;
  auto load_points = [&](int epoch) {
    const int key = cfg.resample_each_epoch ? epoch : 0;
    if (key == points_epoch) return;
    points = training_points(cfg, epoch);
    k_values.resize(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) k_values[i] = K(points[i].point);
    points_epoch = key;
  };

  std::vector<std::size_t> order(static_cast<std::size_t>(cfg.n_samples));
  std::vector<SamplePoint> batch_points(batch);
  std::vector<double> batch_k(batch);

  for (int epoch = static_cast<int>(state.epoch); epoch < last_epoch; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    load_points(epoch);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(mix64(cfg.seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(epoch + 1)));
    std::shuffle(order.begin(), order.end(), shuffle_rng);

    double loss_sum = 0.0;
    int ok_batches = 0;
    int bad_batches = 0;
    double lr = lr_at(cfg, static_cast<std::int64_t>(state.step));
    for (std::size_t b = 0; b < steps; ++b) {
      for (std::size_t i = 0; i < batch; ++i) {
        const std::size_t idx = order[b * batch + i];
        batch_points[i] = points[idx];
        batch_k[i] = k_values[idx];
      }
      lr = lr_at(cfg, static_cast<std::int64_t>(state.step));
      try {
        const LossGradient lg = loss_and_gradient(state.params, batch_points, batch_k, N);
        adam_step(state, lg.grad, lr);
        loss_sum += lg.loss;
        ++ok_batches;
      } catch (const NonFiniteDerivative&) {
        ++bad_batches;
        state.step += 1;
      } catch (const ProjectionSingular&) {
        ++bad_batches;
        state.step += 1;
      }
    }
    if (ok_batches == 0) {
      throw TrainingDiverged("every batch of epoch " + std::to_string(epoch) + " produced a non-finite loss");
    }
    state.epoch = static_cast<std::uint64_t>(epoch + 1);

    MetricsRecord rec;
    rec.epoch = epoch;
    rec.mean_loss = loss_sum / ok_batches;
    rec.lr = lr;
    rec.nonfinite_batches = bad_batches;
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.metrics.push_back(rec);
    if (write_files) {
      metrics_log << metrics_line(rec) << '\n' << std::flush;
      timing_log << nlohmann::json{{"epoch", rec.epoch}, {"wall_seconds", rec.wall_seconds}}.dump() << '\n'
                 << std::flush;
      const bool cadence = cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0;
      if (cadence || epoch + 1 == last_epoch) {
        save_checkpoint(state, options.out_dir / "checkpoint.bin", options.checkpoint_metadata);
      }
    }
    if (options.on_epoch) options.on_epoch(rec);
  }
  return result;
}

}  // namespace nnn
