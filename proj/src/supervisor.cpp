#include "ohdqn/supervisor.hpp"

#include <cmath>
#include <stdexcept>

#include "ohdqn/agent.hpp"

namespace ohdqn {

namespace cg = catch_game;

std::size_t oracle_option(cg::BallType ball) { return ball == cg::BallType::White ? 0 : 1; }

NetworkParams init_supervisor(const SupervisorConfig& config, std::uint64_t seed) {
  if (config.option_count < 1) throw std::invalid_argument("supervisor needs at least one option");
  ArchSpec arch;
  arch.head_count = 1;
  arch.hidden_units = config.hidden_units;
  arch.outputs = config.option_count;
  return init_network(arch, seed);
}

std::vector<double> classify(const NetworkParams& params, const cg::Observation& observation) {
  const auto result = forward(params, observation_batch(std::span(&observation, 1)));
  const Tensor probs = softmax(result.q[0]);
  return {probs.values().begin(), probs.values().end()};
}

std::size_t route_from_distribution(std::span<const double> distribution) { return argmax(distribution); }

std::size_t route(const NetworkParams& params, const cg::Observation& observation) {
  return route_from_distribution(classify(params, observation));
}

SupervisorLoss supervisor_loss(const NetworkParams& params, std::span<const LabeledRef> batch) {
  if (batch.empty()) throw std::invalid_argument("supervisor batch is empty");
  Tensor input = make_batch(params.arch.trunk, batch.size());
  std::vector<std::size_t> labels;
  labels.reserve(batch.size());
  double* dst = input.data();
  for (const LabeledObservation& item : batch) {
    dst = std::copy(item.observation.pixels.begin(), item.observation.pixels.end(), dst);
    labels.push_back(item.option);
  }
  auto fwd = forward(params, std::move(input));
  auto xent = softmax_xent(fwd.q[0], labels);
  return {xent.loss, backward(params, fwd.cache, 0, xent.grad)};
}

double train_supervisor_step(NetworkParams& params, std::span<const LabeledRef> batch, const OptimConfig& optim) {
  SupervisorLoss step = supervisor_loss(params, batch);
  if (!std::isfinite(step.loss)) throw std::runtime_error("non-finite supervisor loss");
  clip_global_norm(step.grads, optim.max_grad_norm);
  adam_step(params, step.grads, optim);
  return step.loss;
}

Supervisor::Supervisor(SupervisorConfig config, std::uint64_t seed)
    : config_(std::move(config)),
      params_(init_supervisor(config_, seed)),
      labels_(config_.label_capacity),
      rng_(stream_seed(seed, 0x5a9e7)) {
  if (config_.batch_size == 0 || config_.train_period == 0) {
    throw std::invalid_argument("supervisor batch size and train period must be positive");
  }
}

void Supervisor::record(const cg::Observation& observation, std::size_t option) {
  if (option >= config_.option_count) throw std::out_of_range("supervisor label out of range");
  labels_.push({observation, option});
}

std::optional<double> Supervisor::maybe_train(std::uint64_t env_step) {
  if (env_step % config_.train_period != 0 || labels_.size() < config_.batch_size) return std::nullopt;
  const auto batch = labels_.sample(config_.batch_size, rng_);
  const double loss = train_supervisor_step(params_, batch, config_.optim);
  ++updates_;
  return loss;
}

}  // namespace ohdqn
