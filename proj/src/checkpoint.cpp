#include "ohdqn/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <stdexcept>

namespace ohdqn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[8] = {'O', 'H', 'D', 'Q', 'N', 'C', 'K', '1'};
using nlohmann::json;

json arch_json(const ArchSpec& a) {
  const auto& t = a.trunk;
  return {{"frames", t.frames},           {"grid", t.grid},
          {"conv1_channels", t.conv1_channels}, {"conv2_channels", t.conv2_channels},
          {"kernel", t.kernel},           {"stride", t.stride},
          {"conv1_pad", t.conv1_pad},     {"conv2_pad", t.conv2_pad},
          {"head_count", a.head_count},   {"hidden_units", a.hidden_units},
          {"outputs", a.outputs}};
}

ArchSpec arch_from_json(const json& j) {
  ArchSpec a;
  auto& t = a.trunk;
  t.frames = j.at("frames");
  t.grid = j.at("grid");
  t.conv1_channels = j.at("conv1_channels");
  t.conv2_channels = j.at("conv2_channels");
  t.kernel = j.at("kernel");
  t.stride = j.at("stride");
  t.conv1_pad = j.at("conv1_pad");
  t.conv2_pad = j.at("conv2_pad");
  a.head_count = j.at("head_count");
  a.hidden_units = j.at("hidden_units");
  a.outputs = j.at("outputs");
  return a;
}

json network_json(const std::string& name, const NetworkParams& net) {
  json tensors = json::array();
  for (std::size_t i = 0; i < net.weights.tensors.size(); ++i) {
    tensors.push_back({{"name", tensor_name(i)}, {"shape", net.weights.tensors[i].shape()}});
  }
  return {{"name", name},
          {"arch", arch_json(net.arch)},
          {"version", net.version},
          {"adam_steps", net.adam.steps},
          {"tensors", tensors}};
}

void write_tensors(std::ofstream& out, const Parameters& p) {
  for (const auto& t : p.tensors) {
    out.write(reinterpret_cast<const char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
}

void read_tensors(std::ifstream& in, Parameters& p) {
  for (auto& t : p.tensors) {
    in.read(reinterpret_cast<char*>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) throw std::runtime_error("checkpoint truncated");
  }
}

NetworkParams network_from_json(const json& j) {
  NetworkParams net;
  net.arch = arch_from_json(j.at("arch"));
  net.weights = make_parameters(net.arch);
  net.adam.first_moment = zeros_like(net.weights);
  net.adam.second_moment = zeros_like(net.weights);
  net.adam.steps = j.at("adam_steps").get<std::vector<std::uint64_t>>();
  net.version = j.at("version");
  const auto& tensors = j.at("tensors");
  if (tensors.size() != net.weights.tensors.size() || net.adam.steps.size() != tensors.size()) {
    throw std::runtime_error("checkpoint manifest tensor count does not match its architecture");
  }
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    if (tensors[i].at("shape").get<std::vector<std::size_t>>() != net.weights.tensors[i].shape()) {
      throw std::runtime_error("checkpoint shape mismatch for " + tensor_name(i));
    }
  }
  return net;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ck) {
  json manifest;
  manifest["format"] = "ohdqn-checkpoint";
  manifest["config"] = to_config_text(ck.config);
  manifest["networks"] = json::array();
  std::vector<const NetworkParams*> nets = {&ck.online, &ck.target};
  manifest["networks"].push_back(network_json("online", ck.online));
  manifest["networks"].push_back(network_json("target", ck.target));
  if (ck.supervisor) {
    manifest["networks"].push_back(network_json("supervisor", *ck.supervisor));
    nets.push_back(&*ck.supervisor);
  }
  const std::string header = manifest.dump();

  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path.string());
  out.write(kMagic, sizeof(kMagic));
  const std::uint64_t len = header.size();
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (const auto* net : nets) {
    write_tensors(out, net->weights);
    write_tensors(out, net->adam.first_moment);
    write_tensors(out, net->adam.second_moment);
  }
  if (!out.flush()) throw std::runtime_error("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint " + path.string());
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error(path.string() + " is not an ohdqn checkpoint");
  }
  std::uint64_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || len > (1u << 26)) throw std::runtime_error("checkpoint manifest length is invalid");
  std::string header(len, '\0');
  in.read(header.data(), static_cast<std::streamsize>(len));
  if (!in) throw std::runtime_error("checkpoint truncated");

  Checkpoint ck;
  try {
    const json manifest = json::parse(header);
    ck.config = parse_config_text(manifest.at("config").get<std::string>());
    const auto& nets = manifest.at("networks");
    if (nets.size() < 2) throw std::runtime_error("checkpoint must contain online and target networks");
    ck.online = network_from_json(nets[0]);
    ck.target = network_from_json(nets[1]);
    if (nets.size() > 2) ck.supervisor = network_from_json(nets[2]);
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("malformed checkpoint manifest: ") + e.what());
  }
  std::vector<NetworkParams*> nets = {&ck.online, &ck.target};
  if (ck.supervisor) nets.push_back(&*ck.supervisor);
  for (auto* net : nets) {
    read_tensors(in, net->weights);
    read_tensors(in, net->adam.first_moment);
    read_tensors(in, net->adam.second_moment);
  }
  if (in.peek() != std::char_traits<char>::eof()) throw std::runtime_error("trailing bytes after checkpoint data");
  return ck;
}

}  // namespace ohdqn
