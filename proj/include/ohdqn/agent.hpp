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

struct EpsilonSchedule {
  double start = 1.0;
  double final_value = 0.01;
  std::uint64_t anneal_steps = 10000;
  std::uint64_t warmup_steps = 10000;
};

// 1.0 during warmup, then linear to final_value over anneal_steps.
double epsilon_at(const EpsilonSchedule& schedule, std::uint64_t env_step);

// Index of the largest value; ties go to the lowest index.
std::size_t argmax(std::span<const double> values);

// With probability epsilon a uniform action, otherwise argmax(q).
std::size_t select_action(std::span<const double> q, double epsilon, Rng& rng);

// Round-robin over heads, so every head gets the same number of updates.
std::size_t head_for_update(std::uint64_t update_count, std::size_t head_count);

// y = r for terminal transitions, else r + gamma * target_q[a*] with
// a* = argmax online_q. Both Q tables are B x A, evaluated at s'.
std::vector<double> double_dqn_targets(std::span<const double> rewards, const std::vector<bool>& terminals,
                                       const Tensor& online_next_q, const Tensor& target_next_q,
                                       double gamma);

using TransitionRef = std::reference_wrapper<const Transition>;

// Network form: evaluates both networks on the batch's next observations.
std::vector<double> double_dqn_targets(std::span<const TransitionRef> batch, const NetworkParams& online,
                                       const NetworkParams& target, double gamma, std::size_t head);

Tensor observation_batch(std::span<const TransitionRef> batch, bool next);
Tensor observation_batch(std::span<const catch_game::Observation> observations);

// Squared TD error on the taken actions, averaged over the batch.
struct QLoss {
  double loss = 0.0;
  Tensor grad;  // B x A; zero for actions not taken
};
QLoss q_loss(const Tensor& q, std::span<const TransitionRef> batch, std::span<const double> targets);

struct AgentConfig {
  AgentVariant variant;
  double gamma = 0.99;
  std::size_t batch_size = 32;
  std::uint64_t train_period = 4;
  std::uint64_t target_sync_period = 4;
  std::size_t replay_capacity = 10000;
  EpsilonSchedule epsilon;
  OptimConfig optim;
};

struct UpdateStats {
  std::size_t head = 0;
  double loss = 0.0;
  double grad_norm = 0.0;  // before clipping
};

class Agent {
 public:
  Agent(AgentConfig config, std::uint64_t seed);

  const AgentConfig& config() const { return config_; }
  std::size_t head_count() const { return online_.arch.head_count; }

  NetworkParams& online() { return online_; }
  const NetworkParams& online() const { return online_; }
  NetworkParams& target() { return target_; }
  const NetworkParams& target() const { return target_; }
  ReplayBuffer& buffer(std::size_t head) { return buffers_.at(head); }
  const ReplayBuffer& buffer(std::size_t head) const { return buffers_.at(head); }

  std::uint64_t env_steps() const { return env_steps_; }
  std::uint64_t update_count() const { return updates_; }
  std::uint64_t sync_count() const { return syncs_; }
  double epsilon() const { return epsilon_at(config_.epsilon, env_steps_); }

  std::vector<double> q_values(const catch_game::Observation& observation, std::size_t head) const;
  std::size_t greedy_action(const catch_game::Observation& observation, std::size_t head) const;
  // epsilon-greedy on one head; skips the network when exploring.
  std::size_t act(const catch_game::Observation& observation, std::size_t head, double epsilon);

  // Stores a transition in the replay buffer of `head`.
  void observe(Transition transition, std::size_t head);

  // Advances the environment step counter, trains on the scheduled head
  // when due and syncs the target network every target_sync_period steps.
  // Returns the update statistics when an update ran.
  std::optional<UpdateStats> end_step();

  // One double-DQN minibatch update of `head`. Throws std::length_error on
  // an underfilled buffer, std::runtime_error on a non-finite loss.
  UpdateStats train_update(std::size_t head);

  // Syncs when env_steps is a multiple of the sync period. Returns true on sync.
  bool maybe_sync_target();

  // Replaces the networks, e.g. after loading a checkpoint.
  void load_networks(NetworkParams online, NetworkParams target);

 private:
  AgentConfig config_;
  NetworkParams online_;
  NetworkParams target_;
  bool target_current_ = true;  // target weights bit-identical to online
  std::vector<ReplayBuffer> buffers_;
  Rng action_rng_;
  Rng replay_rng_;
  std::uint64_t env_steps_ = 0;
  std::uint64_t updates_ = 0;
  std::uint64_t syncs_ = 0;
};

}  // namespace ohdqn
