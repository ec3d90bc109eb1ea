#include "ohdqn/agent.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ohdqn {

namespace cg = catch_game;

namespace {

constexpr std::uint64_t kActionStream = 0xac710;
constexpr std::uint64_t kReplayStream = 0x4e91a;

// Shared by select_action and Agent::act so both consume the rng identically.
std::optional<std::size_t> exploratory_action(double epsilon, std::size_t actions, Rng& rng) {
  std::uniform_real_distribution<double> coin(0.0, 1.0);
  if (coin(rng) < epsilon) {
    std::uniform_int_distribution<std::size_t> pick(0, actions - 1);
    return pick(rng);
  }
  return std::nullopt;
}

}  // namespace

double epsilon_at(const EpsilonSchedule& schedule, std::uint64_t env_step) {
  if (env_step < schedule.warmup_steps) return schedule.start;
  const std::uint64_t since = env_step - schedule.warmup_steps;
  if (schedule.anneal_steps == 0 || since >= schedule.anneal_steps) return schedule.final_value;
  const double frac = static_cast<double>(since) / static_cast<double>(schedule.anneal_steps);
  return (1.0 - frac) * schedule.start + frac * schedule.final_value;
}

std::size_t argmax(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("argmax of an empty range");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::size_t select_action(std::span<const double> q, double epsilon, Rng& rng) {
  if (epsilon < 0.0 || epsilon > 1.0) throw std::invalid_argument("epsilon outside [0, 1]");
  if (auto a = exploratory_action(epsilon, q.size(), rng)) return *a;
  return argmax(q);
}

std::size_t head_for_update(std::uint64_t update_count, std::size_t head_count) {
  if (head_count < 1) throw std::invalid_argument("head_for_update: head count must be >= 1");
  return static_cast<std::size_t>(update_count % head_count);
}

std::vector<double> double_dqn_targets(std::span<const double> rewards, const std::vector<bool>& terminals,
                                       const Tensor& online_next_q, const Tensor& target_next_q,
                                       double gamma) {
  const std::size_t n = rewards.size();
  if (terminals.size() != n || online_next_q.rank() != 2 || online_next_q.dim(0) != n ||
      target_next_q.shape() != online_next_q.shape()) {
    throw std::invalid_argument("double_dqn_targets: inconsistent batch shapes");
  }
  const std::size_t actions = online_next_q.dim(1);
  std::vector<double> y(n);
  for (std::size_t b = 0; b < n; ++b) {
    if (terminals[b]) {
      y[b] = rewards[b];
      continue;
    }
    const std::size_t best = argmax({online_next_q.data() + b * actions, actions});
    y[b] = rewards[b] + gamma * target_next_q[b * actions + best];
  }
  return y;
}

Tensor observation_batch(std::span<const TransitionRef> batch, bool next) {
  Tensor out = make_batch(TrunkSpec{}, batch.size());
  double* dst = out.data();
  for (const Transition& t : batch) {
    const auto& px = next ? t.next_observation.pixels : t.observation.pixels;
    dst = std::copy(px.begin(), px.end(), dst);
  }
  return out;
}

Tensor observation_batch(std::span<const cg::Observation> observations) {
  Tensor out = make_batch(TrunkSpec{}, observations.size());
  double* dst = out.data();
  for (const auto& o : observations) dst = std::copy(o.pixels.begin(), o.pixels.end(), dst);
  return out;
}

namespace {

std::vector<double> targets_from_q(std::span<const TransitionRef> batch, const Tensor& online_next,
                                   const Tensor& target_next, double gamma) {
  std::vector<double> rewards;
  std::vector<bool> terminals;
  for (const Transition& t : batch) {
    rewards.push_back(t.reward);
    terminals.push_back(t.terminal);
  }
  return double_dqn_targets(rewards, terminals, online_next, target_next, gamma);
}

}  // namespace

std::vector<double> double_dqn_targets(std::span<const TransitionRef> batch, const NetworkParams& online,
                                       const NetworkParams& target, double gamma, std::size_t head) {
  if (batch.empty()) throw std::invalid_argument("double_dqn_targets: empty batch");
  Tensor next = observation_batch(batch, true);
  const Tensor online_next = forward(online, next).q.at(head);
  const Tensor target_next = forward(target, std::move(next)).q.at(head);
  return targets_from_q(batch, online_next, target_next, gamma);
}

QLoss q_loss(const Tensor& q, std::span<const TransitionRef> batch, std::span<const double> targets) {
  const std::size_t n = batch.size();
  if (q.rank() != 2 || q.dim(0) != n || targets.size() != n) {
    throw std::invalid_argument("q_loss: inconsistent batch shapes");
  }
  const std::size_t actions = q.dim(1);
  QLoss out{0.0, Tensor(q.shape())};
  for (std::size_t b = 0; b < n; ++b) {
    const std::size_t a = batch[b].get().action;
    const double diff = q[b * actions + a] - targets[b];
    out.loss += diff * diff;
    out.grad[b * actions + a] = 2.0 * diff / static_cast<double>(n);
  }
  out.loss /= static_cast<double>(n);
  return out;
}

Agent::Agent(AgentConfig config, std::uint64_t seed)
    : config_(std::move(config)),
      online_(init_network(config_.variant, seed)),
      target_(online_),
      action_rng_(stream_seed(seed, kActionStream)),
      replay_rng_(stream_seed(seed, kReplayStream)) {
  if (config_.gamma < 0.0 || config_.gamma > 1.0) throw std::invalid_argument("gamma outside [0, 1]");
  if (config_.batch_size == 0 || config_.train_period == 0 || config_.target_sync_period == 0) {
    throw std::invalid_argument("batch size and periods must be positive");
  }
  buffers_.assign(online_.arch.head_count, ReplayBuffer(config_.replay_capacity));
}

std::vector<double> Agent::q_values(const cg::Observation& observation, std::size_t head) const {
  const auto result = forward(online_, observation_batch(std::span(&observation, 1)));
  const Tensor& q = result.q.at(head);
  return {q.values().begin(), q.values().end()};
}

std::size_t Agent::greedy_action(const cg::Observation& observation, std::size_t head) const {
  return argmax(q_values(observation, head));
}

std::size_t Agent::act(const cg::Observation& observation, std::size_t head, double epsilon) {
  if (epsilon < 0.0 || epsilon > 1.0) throw std::invalid_argument("epsilon outside [0, 1]");
  if (auto a = exploratory_action(epsilon, online_.arch.outputs, action_rng_)) return *a;
  return greedy_action(observation, head);
}

void Agent::observe(Transition transition, std::size_t head) { buffers_.at(head).push(std::move(transition)); }

std::optional<UpdateStats> Agent::end_step() {
  ++env_steps_;
  std::optional<UpdateStats> stats;
  if (env_steps_ > config_.epsilon.warmup_steps && env_steps_ % config_.train_period == 0) {
    stats = train_update(head_for_update(updates_, head_count()));
  }
  maybe_sync_target();
  return stats;
}

UpdateStats Agent::train_update(std::size_t head) {
  const auto batch = buffers_.at(head).sample(config_.batch_size, replay_rng_);
  const std::span<const TransitionRef> refs(batch);

  Tensor next = observation_batch(refs, true);
  const Tensor online_next = forward(online_, next).q[head];
  // With the target freshly synced the two networks are bit-identical, so
  // the second forward pass would reproduce online_next exactly.
  const Tensor target_next = target_current_ ? online_next : forward(target_, std::move(next)).q[head];
  const auto targets = targets_from_q(refs, online_next, target_next, config_.gamma);

  auto fwd = forward(online_, observation_batch(refs, false));
  const QLoss loss = q_loss(fwd.q[head], refs, targets);
  if (!std::isfinite(loss.loss)) {
    std::ostringstream msg;
    msg << "non-finite Q loss at update " << updates_ << " (head " << head << ", env step " << env_steps_
        << ")";
    throw std::runtime_error(msg.str());
  }
  Gradients grads = backward(online_, fwd.cache, head, loss.grad);
  UpdateStats stats{head, loss.loss, clip_global_norm(grads, config_.optim.max_grad_norm)};
  adam_step(online_, grads, config_.optim);
  ++updates_;
  target_current_ = false;
  return stats;
}

bool Agent::maybe_sync_target() {
  if (env_steps_ == 0 || env_steps_ % config_.target_sync_period != 0) return false;
  sync_target(online_, target_);
  target_current_ = true;
  ++syncs_;
  return true;
}

void Agent::load_networks(NetworkParams online, NetworkParams target) {
  if (!(online.arch == online_.arch) || !(target.arch == online_.arch)) {
    throw std::invalid_argument("load_networks: architecture does not match the agent variant");
  }
  online_ = std::move(online);
  target_ = std::move(target);
  target_current_ = online_.weights == target_.weights;
}

}  // namespace ohdqn
