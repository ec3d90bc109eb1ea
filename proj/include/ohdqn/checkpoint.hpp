#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "ohdqn/config.hpp"
#include "ohdqn/network.hpp"

namespace ohdqn {

// Binary checkpoint: magic "OHDQNCK1", a little-endian u64 manifest length,
// a JSON manifest (run config, architectures, tensor names and shapes, Adam
// step counts), then every tensor as raw little-endian f64 in manifest order
// (weights, first moments, second moments per network).
struct Checkpoint {
  RunConfig config;
  NetworkParams online;
  NetworkParams target;
  std::optional<NetworkParams> supervisor;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
// Throws std::runtime_error on a malformed or truncated file.
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace ohdqn
