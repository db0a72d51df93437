#include "nnn/run_config.hpp"

#include <yaml-cpp/yaml.h>

#include <cstdio>
#include <fstream>
#include <json.hpp>
#include <set>
#include <sstream>

#include "nnn/errors.hpp"

namespace nnn {

namespace {

std::string where(const std::string& source, const YAML::Node& node) {
  const YAML::Mark mark = node.Mark();
  if (mark.is_null()) return source;
  return source + ":" + std::to_string(mark.line + 1);
}

template <class T>
T scalar(const YAML::Node& node, const std::string& field, const std::string& source) {
  if (!node.IsScalar()) throw ValidationError(field, where(source, node) + ": expected a scalar");
  try {
    return node.as<T>();
  } catch (const YAML::Exception&) {
    throw ValidationError(field, where(source, node) + ": cannot parse '" + node.Scalar() + "'");
  }
}

void check_keys(const YAML::Node& map, const std::set<std::string>& allowed, const std::string& prefix,
                const std::string& source) {
  if (!map.IsMap()) throw ValidationError(prefix, where(source, map) + ": expected a mapping");
  for (const auto& kv : map) {
    const auto key = kv.first.as<std::string>();
    if (!allowed.count(key)) {
      throw ValidationError(prefix.empty() ? key : prefix + "." + key, where(source, kv.first) + ": unknown field");
    }
  }
}

void parse_network(const YAML::Node& n, NetworkConfig& net, const std::string& source) {
  check_keys(n,
             {"hidden_units", "n_layers", "activation", "use_bias", "n_rff", "rff_bandwidth", "output_init_std",
              "seed"},
             "network", source);
  if (n["hidden_units"]) net.hidden_units = scalar<int>(n["hidden_units"], "network.hidden_units", source);
  if (n["n_layers"]) net.n_layers = scalar<int>(n["n_layers"], "network.n_layers", source);
  if (n["activation"]) {
    const auto s = scalar<std::string>(n["activation"], "network.activation", source);
    try {
      net.activation = activation_from_string(s);
    } catch (const ValidationError& e) {
      throw ValidationError("network.activation", where(source, n["activation"]) + ": " + e.what());
    }
  }
  if (n["use_bias"]) net.use_bias = scalar<bool>(n["use_bias"], "network.use_bias", source);
  if (n["n_rff"]) net.n_rff = scalar<int>(n["n_rff"], "network.n_rff", source);
  if (n["rff_bandwidth"]) net.rff_bandwidth = scalar<double>(n["rff_bandwidth"], "network.rff_bandwidth", source);
  if (n["output_init_std"]) {
    net.output_init_std = scalar<double>(n["output_init_std"], "network.output_init_std", source);
  }
  if (n["seed"]) net.seed = scalar<std::uint64_t>(n["seed"], "network.seed", source);
}

void parse_rule(const YAML::Node& n, QuadratureRule& rule, const std::string& source) {
  check_keys(n, {"kind", "n_nodes", "seed"}, "normalisation", source);
  if (n["kind"]) {
    const auto kind = scalar<std::string>(n["kind"], "normalisation.kind", source);
    if (kind == "gauss_legendre") {
      rule.kind = QuadratureRule::Kind::GaussLegendre;
    } else if (kind == "monte_carlo") {
      rule.kind = QuadratureRule::Kind::MonteCarlo;
    } else {
      throw ValidationError("normalisation.kind",
                            where(source, n["kind"]) + ": expected gauss_legendre or monte_carlo");
    }
  }
  if (n["n_nodes"]) rule.n_nodes = scalar<int>(n["n_nodes"], "normalisation.n_nodes", source);
  if (n["seed"]) rule.seed = scalar<std::uint64_t>(n["seed"], "normalisation.seed", source);
}

}  // namespace

RunConfig parse_run_config(const std::string& yaml_text, const std::string& source) {
  YAML::Node root;
  try {
    root = YAML::Load(yaml_text);
  } catch (const YAML::ParserException& e) {
    throw ValidationError("", source + ":" + std::to_string(e.mark.line + 1) + ": " + e.msg);
  }
  RunConfig cfg;
  if (root.IsNull()) return cfg;
  check_keys(root,
             {"prescriber", "seed", "seeds", "preset", "n_samples", "batch_size", "epochs", "lr0", "decay_steps",
              "decay_rate", "staircase", "schedule_kind", "network", "normalisation", "radial_offset",
              "resample_each_epoch", "checkpoint_every", "harmonic_convention", "eval_points", "eval_seed",
              "grid_theta", "grid_phi"},
             "", source);

  TrainConfig& t = cfg.train;
  if (root["preset"]) apply_preset(t, scalar<std::string>(root["preset"], "preset", source));
  if (root["prescriber"]) cfg.prescriber = scalar<std::string>(root["prescriber"], "prescriber", source);
  if (root["seed"]) t.seed = scalar<std::uint64_t>(root["seed"], "seed", source);
  if (root["seeds"]) {
    const auto node = root["seeds"];
    if (!node.IsSequence()) throw ValidationError("seeds", where(source, node) + ": expected a list");
    for (const auto& s : node) cfg.seeds.push_back(scalar<std::uint64_t>(s, "seeds", source));
  }
  if (root["n_samples"]) t.n_samples = scalar<int>(root["n_samples"], "n_samples", source);
  if (root["batch_size"]) t.batch_size = scalar<int>(root["batch_size"], "batch_size", source);
  if (root["epochs"]) t.epochs = scalar<int>(root["epochs"], "epochs", source);
  if (root["lr0"]) t.lr0 = scalar<double>(root["lr0"], "lr0", source);
  if (root["decay_steps"]) t.decay_steps = scalar<int>(root["decay_steps"], "decay_steps", source);
  if (root["decay_rate"]) t.decay_rate = scalar<double>(root["decay_rate"], "decay_rate", source);
  if (root["staircase"]) t.staircase = scalar<bool>(root["staircase"], "staircase", source);
  if (root["schedule_kind"]) {
    try {
      t.schedule_kind = schedule_kind_from_string(scalar<std::string>(root["schedule_kind"], "schedule_kind", source));
    } catch (const ValidationError& e) {
      throw ValidationError("schedule_kind", where(source, root["schedule_kind"]) + ": " + e.what());
    }
  }
  if (root["network"]) parse_network(root["network"], t.network, source);
  if (root["normalisation"]) parse_rule(root["normalisation"], t.normalisation_rule, source);
  if (root["radial_offset"]) t.radial_offset = scalar<double>(root["radial_offset"], "radial_offset", source);
  if (root["resample_each_epoch"]) {
    t.resample_each_epoch = scalar<bool>(root["resample_each_epoch"], "resample_each_epoch", source);
  }
  if (root["checkpoint_every"]) {
    t.checkpoint_every = scalar<int>(root["checkpoint_every"], "checkpoint_every", source);
  }
  if (root["harmonic_convention"]) {
    const auto s = scalar<std::string>(root["harmonic_convention"], "harmonic_convention", source);
    try {
      cfg.sh_convention = harmonic_convention_from_string(s);
    } catch (const std::invalid_argument& e) {
      throw ValidationError("harmonic_convention", where(source, root["harmonic_convention"]) + ": " + e.what());
    }
  }
  if (root["eval_points"]) cfg.eval_points = scalar<int>(root["eval_points"], "eval_points", source);
  if (root["eval_seed"]) cfg.eval_seed = scalar<std::uint64_t>(root["eval_seed"], "eval_seed", source);
  if (root["grid_theta"]) cfg.grid_theta = scalar<int>(root["grid_theta"], "grid_theta", source);
  if (root["grid_phi"]) cfg.grid_phi = scalar<int>(root["grid_phi"], "grid_phi", source);

  if (cfg.eval_points < 2) throw ValidationError("eval_points", source + ": must be at least 2");
  if (cfg.grid_theta < 2 || cfg.grid_phi < 2) throw ValidationError("grid_theta", source + ": grids need >= 2 cells");
  try {
    t.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(e.field(), source + ": " + e.what());
  }
  return cfg;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open config " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_run_config(ss.str(), path.string());
}

void apply_preset(TrainConfig& cfg, const std::string& preset) {
  if (preset == "rff32") {
    cfg.network.n_rff = 32;
  } else if (preset == "rff128") {
    cfg.network.n_rff = 128;
  } else {
    throw ValidationError("preset", "expected rff32 or rff128, got '" + preset + "'");
  }
}

std::string run_config_json(const RunConfig& cfg) {
  const TrainConfig& t = cfg.train;
  const NetworkConfig& n = t.network;
  nlohmann::json j = {
      {"prescriber", cfg.prescriber},
      {"seed", t.seed},
      {"n_samples", t.n_samples},
      {"batch_size", t.batch_size},
      {"epochs", t.epochs},
      {"lr0", t.lr0},
      {"decay_steps", t.decay_steps},
      {"decay_rate", t.decay_rate},
      {"staircase", t.staircase},
      {"schedule_kind", to_string(t.schedule_kind)},
      {"radial_offset", t.radial_offset},
      {"resample_each_epoch", t.resample_each_epoch},
      {"checkpoint_every", t.checkpoint_every},
      {"normalisation",
       {{"kind", t.normalisation_rule.kind == QuadratureRule::Kind::GaussLegendre ? "gauss_legendre" : "monte_carlo"},
        {"n_nodes", t.normalisation_rule.n_nodes},
        {"seed", t.normalisation_rule.seed}}},
      {"network",
       {{"hidden_units", n.hidden_units},
        {"n_layers", n.n_layers},
        {"activation", to_string(n.activation)},
        {"use_bias", n.use_bias},
        {"n_rff", n.n_rff},
        {"rff_bandwidth", n.rff_bandwidth},
        {"output_init_std", n.output_init_std},
        {"seed", n.seed}}},
      {"harmonic_convention", to_string(cfg.sh_convention)},
      {"eval_points", cfg.eval_points},
      {"eval_seed", cfg.eval_seed},
      {"grid_theta", cfg.grid_theta},
      {"grid_phi", cfg.grid_phi},
  };
  return j.dump();
}

std::string config_hash(const RunConfig& cfg) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char c : run_config_json(cfg)) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace nnn
