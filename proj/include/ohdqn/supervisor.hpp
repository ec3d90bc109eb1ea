#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "ohdqn/catch_env.hpp"
#include "ohdqn/network.hpp"
#include "ohdqn/optim.hpp"
#include "ohdqn/random.hpp"
#include "ohdqn/replay.hpp"

namespace ohdqn {

// Option 0 is the white-ball subtask, option 1 the grey-ball subtask.
std::size_t oracle_option(catch_game::BallType ball);

struct LabeledObservation {
  catch_game::Observation observation;
  std::size_t option = 0;
};

using LabeledRef = std::reference_wrapper<const LabeledObservation>;

struct SupervisorConfig {
  std::size_t option_count = 2;
  std::size_t hidden_units = 32;
  std::size_t batch_size = 32;
  std::uint64_t train_period = 4;
  std::size_t label_capacity = 1000;
  OptimConfig optim;
};

// Catch trunk with one head whose outputs are option logits.
NetworkParams init_supervisor(const SupervisorConfig& config, std::uint64_t seed);

// Softmax distribution over options.
std::vector<double> classify(const NetworkParams& params, const catch_game::Observation& observation);

// Argmax option; ties to the lowest index.
std::size_t route(const NetworkParams& params, const catch_game::Observation& observation);
std::size_t route_from_distribution(std::span<const double> distribution);

// One cross-entropy step with clipping and Adam. Returns the batch loss
// measured before the update.
double train_supervisor_step(NetworkParams& params, std::span<const LabeledRef> batch, const OptimConfig& optim);

// Cross-entropy loss and gradients without applying them.
struct SupervisorLoss {
  double loss = 0.0;
  Gradients grads;
};
SupervisorLoss supervisor_loss(const NetworkParams& params, std::span<const LabeledRef> batch);

// Classifier plus its labelled ring buffer, trained from oracle labels in
// the agent's step loop.
class Supervisor {
 public:
  Supervisor(SupervisorConfig config, std::uint64_t seed);

  const SupervisorConfig& config() const { return config_; }
  NetworkParams& params() { return params_; }
  const NetworkParams& params() const { return params_; }
  const RingBuffer<LabeledObservation>& labels() const { return labels_; }
  std::uint64_t update_count() const { return updates_; }

  void record(const catch_game::Observation& observation, std::size_t option);

  // Trains once when `env_step` is a multiple of the train period and the
  // label buffer holds a full batch. Returns the loss when a step ran.
  std::optional<double> maybe_train(std::uint64_t env_step);

 private:
  SupervisorConfig config_;
  NetworkParams params_;
  RingBuffer<LabeledObservation> labels_;
  Rng rng_;
  std::uint64_t updates_ = 0;
};

}  // namespace ohdqn
