#include "nnn/checkpoint.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <json.hpp>

#include "nnn/errors.hpp"

namespace nnn {

namespace {

constexpr std::array<char, 8> kMagic = {'N', 'N', 'N', 'C', 'K', 'P', 'T', '\0'};

nlohmann::json config_to_json(const NetworkConfig& c) {
  return {{"hidden_units", c.hidden_units},   {"n_layers", c.n_layers},
          {"activation", to_string(c.activation)}, {"use_bias", c.use_bias},
          {"n_rff", c.n_rff},                  {"rff_bandwidth", c.rff_bandwidth},
          {"output_init_std", c.output_init_std}, {"seed", c.seed}};
}

NetworkConfig config_from_json(const nlohmann::json& j) {
  NetworkConfig c;
  c.hidden_units = j.at("hidden_units").get<int>();
  c.n_layers = j.at("n_layers").get<int>();
  c.activation = activation_from_string(j.at("activation").get<std::string>());
  c.use_bias = j.at("use_bias").get<bool>();
  c.n_rff = j.at("n_rff").get<int>();
  c.rff_bandwidth = j.at("rff_bandwidth").get<double>();
  c.output_init_std = j.at("output_init_std").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

template <class T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T read_pod(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw CorruptCheckpoint("checkpoint truncated");
  return v;
}

void write_doubles(std::ostream& os, const double* data, std::size_t n) {
  os.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

void read_doubles(std::istream& is, double* data, std::size_t n) {
  if (!is.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)))) {
    throw CorruptCheckpoint("checkpoint payload truncated");
  }
}

}  // namespace

TrainState make_train_state(NetworkParams params) {
  TrainState s;
  s.adam_m = params.theta.zeros_like();
  s.adam_v = params.theta.zeros_like();
  s.params = std::move(params);
  return s;
}

void save_checkpoint(const TrainState& state, const std::filesystem::path& path, const std::string& metadata_json) {
  const auto& p = state.params;
  nlohmann::json manifest = nlohmann::json::array();
  for (const auto& b : p.theta.manifest) manifest.push_back({b.name, b.rows, b.cols});
  const bool has_adam = !state.adam_m.values.empty();
  const nlohmann::json header = {{"network", config_to_json(p.config)},
                                 {"manifest", manifest},
                                 {"step", state.step},
                                 {"epoch", state.epoch},
                                 {"has_adam", has_adam},
                                 {"metadata", nlohmann::json::parse(metadata_json)}};
  const std::string text = header.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
    if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    os.write(kMagic.data(), kMagic.size());
    write_pod(os, kCheckpointVersion);
    write_pod(os, static_cast<std::uint64_t>(text.size()));
    os.write(text.data(), static_cast<std::streamsize>(text.size()));
    write_doubles(os, p.encoding.F.data(), static_cast<std::size_t>(p.encoding.F.size()));
    write_doubles(os, p.encoding.omega.data(), static_cast<std::size_t>(p.encoding.omega.size()));
    write_doubles(os, p.theta.values.data(), p.theta.values.size());
    if (has_adam) {
      write_doubles(os, state.adam_m.values.data(), state.adam_m.values.size());
      write_doubles(os, state.adam_v.values.data(), state.adam_v.values.size());
    }
    if (!os) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::array<char, 8> magic{};
  if (!is.read(magic.data(), magic.size()) || magic != kMagic) throw CorruptCheckpoint("not a checkpoint file");
  const auto version = read_pod<std::uint32_t>(is);
  if (version != kCheckpointVersion) {
    throw CorruptCheckpoint("unsupported checkpoint version " + std::to_string(version));
  }
  const auto header_len = read_pod<std::uint64_t>(is);
  if (header_len > (1U << 26)) throw CorruptCheckpoint("checkpoint header too large");
  std::string text(header_len, '\0');
  if (!is.read(text.data(), static_cast<std::streamsize>(header_len))) throw CorruptCheckpoint("header truncated");

  LoadedCheckpoint out;
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(text);
    out.state.params.config = config_from_json(header.at("network"));
    out.state.step = header.at("step").get<std::uint64_t>();
    out.state.epoch = header.at("epoch").get<std::uint64_t>();
    out.metadata_json = header.at("metadata").dump();
  } catch (const nlohmann::json::exception& e) {
    throw CorruptCheckpoint(std::string("malformed checkpoint header: ") + e.what());
  } catch (const ValidationError& e) {
    throw CorruptCheckpoint(std::string("malformed checkpoint header: ") + e.what());
  }

  auto& p = out.state.params;
  p.theta = make_parameter_layout(p.config);
  bool manifest_ok = false;
  try {
    const auto& stored = header.at("manifest");
    manifest_ok = stored.is_array() && stored.size() == p.theta.manifest.size();
    for (std::size_t i = 0; manifest_ok && i < stored.size(); ++i) {
      const auto& b = p.theta.manifest[i];
      manifest_ok = stored[i].at(0).get<std::string>() == b.name && stored[i].at(1).get<std::size_t>() == b.rows &&
                    stored[i].at(2).get<std::size_t>() == b.cols;
    }
  } catch (const nlohmann::json::exception& e) {
    throw CorruptCheckpoint(std::string("malformed parameter manifest: ") + e.what());
  }
  if (!manifest_ok) throw CorruptCheckpoint("parameter manifest does not match the stored network config");

  const int m = p.config.n_rff;
  p.encoding.F.resize(m, 3);
  p.encoding.omega.resize(m);
  read_doubles(is, p.encoding.F.data(), static_cast<std::size_t>(p.encoding.F.size()));
  read_doubles(is, p.encoding.omega.data(), static_cast<std::size_t>(m));
  read_doubles(is, p.theta.values.data(), p.theta.values.size());
  out.state.adam_m = p.theta.zeros_like();
  out.state.adam_v = p.theta.zeros_like();
  if (header.value("has_adam", false)) {
    read_doubles(is, out.state.adam_m.values.data(), out.state.adam_m.values.size());
    read_doubles(is, out.state.adam_v.values.data(), out.state.adam_v.values.size());
  }
  if (is.peek() != std::char_traits<char>::eof()) throw CorruptCheckpoint("trailing bytes after checkpoint payload");
  return out;
}

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path, const NetworkConfig& expected) {
  auto out = load_checkpoint(path);
  if (!(out.state.params.config == expected)) {
    throw CorruptCheckpoint("checkpoint network config differs from the requested config");
  }
  return out;
}

}  // namespace nnn
