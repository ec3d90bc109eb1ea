#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <vector>

#include "ohdqn/agent.hpp"
#include "ohdqn/catch_env.hpp"
#include "ohdqn/config.hpp"
#include "ohdqn/network.hpp"
#include "ohdqn/supervisor.hpp"

namespace ohdqn {

struct PolicyInput {
  const catch_game::Observation& observation;
  std::size_t oracle_option;
};

using Policy = std::function<catch_game::Action(const PolicyInput&)>;

struct ValidationResult {
  double average_score = 0.0;
  std::uint64_t episodes = 0;
  double total_reward = 0.0;
  // Classifier routing against oracle labels on observations with a visible
  // ball; only tallied for multi-head agents with a supervisor.
  std::uint64_t routed = 0;
  std::uint64_t routed_correct = 0;

  double routing_accuracy() const;
};

// Plays `steps` environment steps (a positive multiple of the episode length)
// on a fresh environment seeded with `seed`, starting from episode 0.
// Throws std::invalid_argument for a bad step count.
ValidationResult validate(const Policy& policy, catch_game::TransferMode mode, std::uint64_t steps,
                          std::uint64_t seed, const catch_game::Intensities& colors = {});

// Greedy evaluation of an agent. Multi-head agents pick their head through
// `routing`; classifier routing needs `supervisor`.
ValidationResult validate(const Agent& agent, const NetworkParams* supervisor, catch_game::TransferMode mode,
                          std::uint64_t steps, RoutingSource routing, std::uint64_t seed,
                          const catch_game::Intensities& colors = {});

// Greedy evaluation from bare networks (the checkpoint path).
ValidationResult validate(const NetworkParams& policy_net, const NetworkParams* supervisor,
                          catch_game::TransferMode mode, std::uint64_t steps, RoutingSource routing,
                          std::uint64_t seed, const catch_game::Intensities& colors = {});

struct EpochRecord {
  std::uint64_t epoch = 0;
  double avg_score = 0.0;
  std::uint64_t episodes = 0;
  double wall_seconds = 0.0;
  double mean_loss = 0.0;
  // Option-head runs only; NaN otherwise.
  double routing_accuracy = std::numeric_limits<double>::quiet_NaN();
  double oracle_score = std::numeric_limits<double>::quiet_NaN();
  double classifier_score = std::numeric_limits<double>::quiet_NaN();
};

struct RunResult {
  std::vector<EpochRecord> records;
  NetworkParams online;
  NetworkParams target;
  std::optional<NetworkParams> supervisor;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

// Warmup of uniform-random steps, then `epochs` x (training steps +
// validation). Deterministic in (config, seed). Throws std::runtime_error if
// training diverges.
RunResult run(const RunConfig& config, const EpochCallback& on_epoch = {});

std::uint64_t validation_seed(std::uint64_t run_seed);

}  // namespace ohdqn
