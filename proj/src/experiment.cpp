#include "ohdqn/experiment.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>

namespace ohdqn {

namespace cg = catch_game;

namespace {

constexpr std::uint64_t kTrainEnvStream = 0xe7a1;
constexpr std::uint64_t kValidationStream = 0x7a11d;
constexpr std::uint64_t kSupervisorStream = 0x5e9e;

// Greedy policy over a (possibly multi-head) Q-network; tallies classifier
// routing accuracy when a supervisor is supplied.
Policy greedy_policy(const NetworkParams& net, const NetworkParams* supervisor, RoutingSource routing,
                     ValidationResult& tally) {
  const std::size_t heads = net.arch.head_count;
  if (heads > 1 && routing == RoutingSource::Classifier && supervisor == nullptr) {
    throw std::invalid_argument("classifier routing requires a supervisor network");
  }
  return [&net, supervisor, routing, heads, &tally](const PolicyInput& in) {
    std::size_t head = 0;
    if (heads > 1) {
      std::optional<std::size_t> routed;
      if (supervisor != nullptr) {
        routed = route(*supervisor, in.observation);
        if (cg::locate_ball(in.observation)) {
          ++tally.routed;
          if (*routed == in.oracle_option) ++tally.routed_correct;
        }
      }
      head = routing == RoutingSource::Oracle ? in.oracle_option : *routed;
    }
    const auto result = forward(net, observation_batch(std::span(&in.observation, 1)));
    const Tensor& q = result.q.at(head);
    return static_cast<cg::Action>(argmax(q.values()));
  };
}

}  // namespace

double ValidationResult::routing_accuracy() const {
  if (routed == 0) return std::numeric_limits<double>::quiet_NaN();
  return static_cast<double>(routed_correct) / static_cast<double>(routed);
}

std::uint64_t validation_seed(std::uint64_t run_seed) { return stream_seed(run_seed, kValidationStream); }

ValidationResult validate(const Policy& policy, cg::TransferMode mode, std::uint64_t steps, std::uint64_t seed,
                          const cg::Intensities& colors) {
  if (steps == 0 || steps % cg::kEpisodeSteps != 0) {
    throw std::invalid_argument("validation steps must be a positive multiple of " +
                                std::to_string(cg::kEpisodeSteps));
  }
  ValidationResult out;
  cg::CatchEnv env(mode, seed, colors);
  const cg::Observation* obs = &env.reset();
  for (std::uint64_t t = 0; t < steps; ++t) {
    const std::size_t option = oracle_option(env.state().ball);
    const cg::StepResult r = env.step(policy({*obs, option}));
    out.total_reward += r.reward;
    if (r.terminal) {
      ++out.episodes;
      if (t + 1 < steps) obs = &env.reset();
    } else {
      obs = &env.observation();
    }
  }
  out.average_score = out.total_reward / static_cast<double>(out.episodes);
  return out;
}

ValidationResult validate(const NetworkParams& policy_net, const NetworkParams* supervisor, cg::TransferMode mode,
                          std::uint64_t steps, RoutingSource routing, std::uint64_t seed,
                          const cg::Intensities& colors) {
  ValidationResult tally;
  const Policy policy = greedy_policy(policy_net, supervisor, routing, tally);
  ValidationResult out = validate(policy, mode, steps, seed, colors);
  out.routed = tally.routed;
  out.routed_correct = tally.routed_correct;
  return out;
}

ValidationResult validate(const Agent& agent, const NetworkParams* supervisor, cg::TransferMode mode,
                          std::uint64_t steps, RoutingSource routing, std::uint64_t seed,
                          const cg::Intensities& colors) {
  return validate(agent.online(), supervisor, mode, steps, routing, seed, colors);
}

RunResult run(const RunConfig& config, const EpochCallback& on_epoch) {
  config.validate();
  const cg::Intensities colors = config.colors();
  Agent agent(config.agent_config(), config.seed);
  const bool multi_head = agent.head_count() > 1;
  std::optional<Supervisor> supervisor;
  if (multi_head) supervisor.emplace(config.supervisor_config(), stream_seed(config.seed, kSupervisorStream));

  cg::CatchEnv env(config.mode, stream_seed(config.seed, kTrainEnvStream), colors);
  cg::Observation obs = env.reset();

  RunResult result;
  const std::uint64_t total = config.warmup_steps + config.epochs * config.steps_per_epoch;
  auto epoch_start = std::chrono::steady_clock::now();
  double loss_sum = 0.0;
  std::uint64_t loss_count = 0;

  for (std::uint64_t t = 0; t < total; ++t) {
    const std::size_t option = oracle_option(env.state().ball);
    const std::size_t head = multi_head ? option : 0;
    const std::size_t action = agent.act(obs, head, agent.epsilon());
    const cg::StepResult r = env.step(static_cast<cg::Action>(action));

    Transition tr;
    tr.observation = obs;
    tr.action = static_cast<std::uint8_t>(action);
    tr.reward = static_cast<float>(r.reward);
    tr.next_observation = env.observation();
    tr.terminal = r.terminal;
    agent.observe(std::move(tr), head);
    if (supervisor) supervisor->record(obs, option);

    if (auto stats = agent.end_step()) {
      loss_sum += stats->loss;
      ++loss_count;
    }
    if (supervisor && agent.env_steps() > config.warmup_steps) supervisor->maybe_train(agent.env_steps());

    obs = r.terminal ? env.reset() : env.observation();

    if (agent.env_steps() <= config.warmup_steps) continue;
    const std::uint64_t trained = agent.env_steps() - config.warmup_steps;
    if (trained % config.steps_per_epoch != 0) continue;

    EpochRecord rec;
    rec.epoch = trained / config.steps_per_epoch;
    rec.mean_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
    const std::uint64_t vseed = validation_seed(config.seed);
    const NetworkParams* sup = supervisor ? &supervisor->params() : nullptr;
    const ValidationResult primary =
        validate(agent, sup, config.mode, config.validation_steps, config.routing, vseed, colors);
    rec.avg_score = primary.average_score;
    rec.episodes = primary.episodes;
    if (multi_head) {
      const RoutingSource other =
          config.routing == RoutingSource::Oracle ? RoutingSource::Classifier : RoutingSource::Oracle;
      const ValidationResult alt = validate(agent, sup, config.mode, config.validation_steps, other, vseed, colors);
      const ValidationResult& by_classifier = config.routing == RoutingSource::Classifier ? primary : alt;
      const ValidationResult& by_oracle = config.routing == RoutingSource::Oracle ? primary : alt;
      rec.routing_accuracy = by_classifier.routing_accuracy();
      rec.classifier_score = by_classifier.average_score;
      rec.oracle_score = by_oracle.average_score;
    }
    const auto now = std::chrono::steady_clock::now();
    rec.wall_seconds = std::chrono::duration<double>(now - epoch_start).count();
    epoch_start = now;
    loss_sum = 0.0;
    loss_count = 0;
    result.records.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }

  result.online = agent.online();
  result.target = agent.target();
  if (supervisor) result.supervisor = supervisor->params();
  return result;
}

}  // namespace ohdqn
