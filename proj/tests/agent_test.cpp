#include <gtest/gtest.h>

#include "ohdqn/agent.hpp"
#include "ohdqn/optim.hpp"
#include "test_support.hpp"

namespace {

using namespace ohdqn;
namespace cg = ohdqn::catch_game;

Tensor q_table(std::initializer_list<std::initializer_list<double>> rows) {
  Tensor t{rows.size(), 3};
  std::size_t i = 0;
  for (const auto& row : rows) {
    for (double v : row) t[i++] = v;
  }
  return t;
}

AgentConfig small_config(VariantKind kind, std::size_t capacity = 16) {
  AgentConfig config;
  config.variant = AgentVariant{kind, capacity};
  config.batch_size = 4;
  config.replay_capacity = 64;
  config.epsilon.warmup_steps = 0;
  return config;
}

Transition transition_from(const cg::Observation& obs, const cg::Observation& next, std::uint8_t action,
                           float reward, bool terminal) {
  Transition t;
  t.observation = obs;
  t.next_observation = next;
  t.action = action;
  t.reward = reward;
  t.terminal = terminal;
  return t;
}

void fill_buffers(Agent& agent, std::size_t per_head, std::uint64_t seed) {
  const auto obs = ohdqn::testing::played_observations(cg::TransferMode::Negative, per_head + 1, seed);
  for (std::size_t h = 0; h < agent.head_count(); ++h) {
    for (std::size_t i = 0; i < per_head; ++i) {
      agent.observe(transition_from(obs[i], obs[i + 1], static_cast<std::uint8_t>(i % 3),
                                    static_cast<float>(static_cast<int>(i % 3) - 1), i % 5 == 0),
                    h);
    }
  }
}

TEST(SelectAction, GreedyPicksArgmax) {
  Rng rng(0);
  const std::vector<double> q{0.1, 0.9, 0.2};
  EXPECT_EQ(select_action(q, 0.0, rng), 1u);
}

TEST(SelectAction, TiesBreakToLowestIndex) {
  Rng rng(0);
  const std::vector<double> q{0.5, 0.5, 0.1};
  EXPECT_EQ(select_action(q, 0.0, rng), 0u);
  const std::vector<double> all_equal{2.0, 2.0, 2.0};
  EXPECT_EQ(argmax(all_equal), 0u);
}

TEST(SelectAction, FullExplorationIsUniform) {
  Rng rng(99);
  const std::vector<double> q{0.0, 10.0, 0.0};
  std::vector<std::size_t> counts(3);
  const int draws = 30000;
  for (int i = 0; i < draws; ++i) ++counts[select_action(q, 1.0, rng)];
  for (auto c : counts) EXPECT_NEAR(static_cast<double>(c) / draws, 1.0 / 3.0, 0.02);
  EXPECT_GT(ohdqn::testing::chi_square_uniform_p(counts), 0.01);
}

TEST(SelectAction, RejectsEpsilonOutsideUnitInterval) {
  Rng rng(0);
  const std::vector<double> q{0.0, 1.0, 0.0};
  EXPECT_THROW(select_action(q, 1.5, rng), std::invalid_argument);
  EXPECT_THROW(select_action(q, -0.1, rng), std::invalid_argument);
}

TEST(SelectAction, ArgmaxInvariantUnderConstantShift) {
  Rng rng(5);
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> q{u(rng), u(rng), u(rng)};
    const double c = u(rng) * 100.0;
    std::vector<double> shifted{q[0] + c, q[1] + c, q[2] + c};
    EXPECT_EQ(argmax(q), argmax(shifted));
  }
}

TEST(EpsilonSchedule, KeyPoints) {
  EpsilonSchedule s;
  s.final_value = 0.05;
  EXPECT_EQ(epsilon_at(s, 0), 1.0);
  EXPECT_EQ(epsilon_at(s, 9999), 1.0);
  EXPECT_EQ(epsilon_at(s, 10000), 1.0);
  EXPECT_EQ(epsilon_at(s, 15000), (1.0 + 0.05) / 2.0);
  EXPECT_EQ(epsilon_at(s, 20000), 0.05);
  EXPECT_EQ(epsilon_at(s, 1000000), 0.05);
}

TEST(EpsilonSchedule, MonotoneAfterWarmup) {
  EpsilonSchedule s;
  double previous = 1.0;
  for (std::uint64_t t = 0; t < 25000; t += 7) {
    const double e = epsilon_at(s, t);
    EXPECT_LE(e, previous);
    EXPECT_GE(e, s.final_value);
    previous = e;
  }
}

TEST(DoubleDqnTargets, HandSetTables) {
  const std::vector<double> rewards{1.0};
  const std::vector<bool> terminals{false};
  const auto y = double_dqn_targets(rewards, terminals, q_table({{1, 3, 2}}), q_table({{5, 0, 7}}), 0.9);
  ASSERT_EQ(y.size(), 1u);
  EXPECT_EQ(y[0], 1.0);
}

TEST(DoubleDqnTargets, TerminalAndZeroDiscount) {
  const std::vector<double> rewards{1.0, -1.0, 0.0};
  const std::vector<bool> terminals{true, false, false};
  const auto online = q_table({{9, 9, 9}, {1, 2, 3}, {4, 0, 0}});
  const auto target = q_table({{8, 8, 8}, {10, 20, 30}, {-2, 0, 0}});
  const auto y = double_dqn_targets(rewards, terminals, online, target, 0.5);
  EXPECT_EQ(y[0], 1.0);
  EXPECT_EQ(y[1], -1.0 + 0.5 * 30.0);
  EXPECT_EQ(y[2], 0.0 + 0.5 * -2.0);
  const auto undiscounted = double_dqn_targets(rewards, terminals, online, target, 0.0);
  EXPECT_EQ(undiscounted, rewards);
}

TEST(DoubleDqnTargets, NetworkFormMatchesTableForm) {
  AgentConfig config = small_config(VariantKind::OptionHeads);
  Agent agent(config, 3);
  fill_buffers(agent, 8, 4);
  Rng rng(5);
  const auto batch = agent.buffer(1).sample(4, rng);
  const std::span<const TransitionRef> refs(batch);
  const auto y = double_dqn_targets(refs, agent.online(), agent.target(), 0.99, 1);
  const Tensor next = observation_batch(refs, true);
  std::vector<double> rewards;
  std::vector<bool> terminals;
  for (const auto& t : batch) {
    rewards.push_back(t.get().reward);
    terminals.push_back(t.get().terminal);
  }
  const auto expected = double_dqn_targets(rewards, terminals, forward(agent.online(), next).q[1],
                                           forward(agent.target(), next).q[1], 0.99);
  EXPECT_EQ(y, expected);
}

TEST(DoubleDqnTargets, RejectsInconsistentShapes) {
  const std::vector<double> rewards{1.0, 2.0};
  const std::vector<bool> terminals{false};
  EXPECT_THROW(double_dqn_targets(rewards, terminals, q_table({{1, 2, 3}}), q_table({{1, 2, 3}}), 0.9),
               std::invalid_argument);
}

TEST(QLoss, GradientTouchesOnlyTakenActions) {
  const auto obs = ohdqn::testing::played_observations(cg::TransferMode::Positive, 3, 1);
  std::vector<Transition> storage{transition_from(obs[0], obs[1], 2, 1.0f, false),
                                  transition_from(obs[1], obs[2], 0, 0.0f, false)};
  std::vector<TransitionRef> refs(storage.begin(), storage.end());
  const auto q = q_table({{0.5, 0.1, 0.2}, {0.3, 0.4, -0.6}});
  const std::vector<double> targets{1.0, 0.0};
  const auto loss = q_loss(q, refs, targets);
  EXPECT_NEAR(loss.loss, ((0.2 - 1.0) * (0.2 - 1.0) + 0.3 * 0.3) / 2.0, 1e-15);
  EXPECT_EQ(loss.grad[0], 0.0);
  EXPECT_EQ(loss.grad[1], 0.0);
  EXPECT_NEAR(loss.grad[2], 2.0 * (0.2 - 1.0) / 2.0, 1e-15);
  EXPECT_NEAR(loss.grad[3], 2.0 * 0.3 / 2.0, 1e-15);
  EXPECT_EQ(loss.grad[4], 0.0);
  EXPECT_EQ(loss.grad[5], 0.0);
}

TEST(QLoss, GradientMatchesFiniteDifferences) {
  const auto obs = ohdqn::testing::played_observations(cg::TransferMode::Positive, 5, 2);
  std::vector<Transition> storage;
  for (std::uint8_t i = 0; i < 4; ++i) storage.push_back(transition_from(obs[i], obs[i + 1], i % 3, 0.0f, false));
  std::vector<TransitionRef> refs(storage.begin(), storage.end());
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n;
  Tensor q{4, 3};
  for (auto& v : q.values()) v = n(rng);
  const std::vector<double> targets{0.3, -0.2, 1.1, 0.0};
  const auto loss = q_loss(q, refs, targets);
  for (std::size_t i = 0; i < q.size(); ++i) {
    Tensor up = q, down = q;
    up[i] += 1e-5;
    down[i] -= 1e-5;
    const double numeric = (q_loss(up, refs, targets).loss - q_loss(down, refs, targets).loss) / 2e-5;
    EXPECT_LT(ohdqn::testing::relative_error(loss.grad[i], numeric), 1e-4);
  }
}

TEST(HeadForUpdate, RoundRobin) {
  EXPECT_EQ(head_for_update(0, 2), 0u);
  EXPECT_EQ(head_for_update(1, 2), 1u);
  EXPECT_EQ(head_for_update(2, 2), 0u);
  EXPECT_EQ(head_for_update(3, 2), 1u);
  for (std::uint64_t c = 0; c < 10; ++c) EXPECT_EQ(head_for_update(c, 1), 0u);
  std::size_t per_head[2] = {0, 0};
  for (std::uint64_t c = 0; c < 10000; ++c) ++per_head[head_for_update(c, 2)];
  EXPECT_EQ(per_head[0], 5000u);
  EXPECT_EQ(per_head[1], 5000u);
  EXPECT_THROW(head_for_update(0, 0), std::invalid_argument);
}

TEST(TrainUpdate, ZeroErrorBatchLeavesParametersUnchanged) {
  AgentConfig config = small_config(VariantKind::Standard);
  config.gamma = 0.0;
  Agent agent(config, 1);
  // All-zero weights give Q = 0 everywhere, matching zero rewards.
  agent.online().weights = zeros_like(agent.online().weights);
  sync_target(agent.online(), agent.target());
  const auto obs = ohdqn::testing::played_observations(cg::TransferMode::Positive, 9, 1);
  for (std::size_t i = 0; i < 8; ++i) agent.observe(transition_from(obs[i], obs[i + 1], 1, 0.0f, false), 0);
  const auto before = agent.online().weights;
  const auto stats = agent.train_update(0);
  EXPECT_EQ(stats.loss, 0.0);
  EXPECT_EQ(stats.grad_norm, 0.0);
  EXPECT_EQ(agent.online().weights, before);
  EXPECT_EQ(agent.update_count(), 1u);
}

TEST(TrainUpdate, UnderfilledBufferThrows) {
  Agent agent(small_config(VariantKind::Standard), 1);
  EXPECT_THROW(agent.train_update(0), std::length_error);
}

TEST(TrainUpdate, InactiveHeadIsBitUnchanged) {
  Agent agent(small_config(VariantKind::OptionHeads), 2);
  fill_buffers(agent, 16, 3);
  for (std::size_t head : {0u, 1u, 0u}) {
    const auto before = agent.online().weights;
    agent.train_update(head);
    const std::size_t other = 1 - head;
    for (auto slot : {HeadSlot::HiddenWeight, HeadSlot::HiddenBias, HeadSlot::OutputWeight, HeadSlot::OutputBias}) {
      EXPECT_EQ(agent.online().weights.head(other, slot), before.head(other, slot));
    }
    EXPECT_FALSE(agent.online().weights.head(head, HeadSlot::OutputBias) == before.head(head, HeadSlot::OutputBias));
  }
}

TEST(TrainUpdate, FrozenBatchSquaredErrorDecreases) {
  AgentConfig config = small_config(VariantKind::Standard);
  config.gamma = 0.0;
  config.optim.learning_rate = 1e-4;
  Agent agent(config, 4);
  const auto obs = ohdqn::testing::played_observations(cg::TransferMode::Positive, 2, 4);
  const Transition t = transition_from(obs[0], obs[1], 2, 1.0f, true);
  for (int i = 0; i < 4; ++i) agent.observe(t, 0);
  double previous = std::numeric_limits<double>::infinity();
  for (int i = 0; i < 50; ++i) {
    const double loss = agent.train_update(0).loss;
    EXPECT_LE(loss, previous) << "update " << i;
    previous = loss;
  }
  const double q = agent.q_values(obs[0], 0)[2];
  EXPECT_LT((q - 1.0) * (q - 1.0), previous);
}

TEST(TargetSync, EveryFourEnvironmentSteps) {
  AgentConfig config = small_config(VariantKind::Standard);
  config.epsilon.warmup_steps = 1000;  // no training during this test
  Agent agent(config, 5);
  std::vector<std::uint64_t> synced_at;
  for (int step = 1; step <= 12; ++step) {
    const auto before = agent.sync_count();
    agent.end_step();
    if (agent.sync_count() != before) synced_at.push_back(agent.env_steps());
  }
  EXPECT_EQ(synced_at, (std::vector<std::uint64_t>{4, 8, 12}));
}

TEST(TargetSync, ConfigurablePeriods) {
  for (std::uint64_t tau : {4u, 32u, 128u}) {
    AgentConfig config = small_config(VariantKind::Standard);
    config.epsilon.warmup_steps = 1000;
    config.target_sync_period = tau;
    Agent agent(config, 6);
    for (int i = 0; i < 256; ++i) agent.end_step();
    EXPECT_EQ(agent.sync_count(), 256 / tau);
  }
}

TEST(TargetSync, TargetMatchesOnlineAfterSync) {
  AgentConfig config = small_config(VariantKind::Standard);
  config.target_sync_period = 8;
  Agent agent(config, 7);
  fill_buffers(agent, 16, 8);
  const auto probe = ohdqn::testing::played_observations(cg::TransferMode::Negative, 3, 9);
  const auto x = observation_batch(probe);
  for (int i = 0; i < 4; ++i) agent.end_step();  // one update at step 4, no sync yet
  EXPECT_EQ(agent.update_count(), 1u);
  EXPECT_NE(forward(agent.online(), x).q, forward(agent.target(), x).q);
  for (int i = 0; i < 4; ++i) agent.end_step();  // update at 8, then sync
  EXPECT_EQ(agent.sync_count(), 1u);
  EXPECT_EQ(forward(agent.online(), x).q, forward(agent.target(), x).q);
}

TEST(TrainSchedule, OneUpdatePerTrainPeriodAfterWarmup) {
  AgentConfig config = small_config(VariantKind::Standard);
  config.epsilon.warmup_steps = 8;
  Agent agent(config, 10);
  fill_buffers(agent, 16, 11);
  for (int i = 0; i < 8; ++i) EXPECT_FALSE(agent.end_step().has_value());
  int updates = 0;
  for (int i = 0; i < 40; ++i) updates += agent.end_step().has_value();
  EXPECT_EQ(updates, 10);
  EXPECT_EQ(agent.update_count(), 10u);
}

TEST(TrainSchedule, OptionHeadsMatchStandardUpdateCount) {
  Agent standard(small_config(VariantKind::Standard), 1);
  Agent heads(small_config(VariantKind::OptionHeads), 1);
  fill_buffers(standard, 16, 2);
  fill_buffers(heads, 16, 2);
  std::size_t per_head[2] = {0, 0};
  for (int i = 0; i < 400; ++i) {
    standard.end_step();
    if (auto s = heads.end_step()) ++per_head[s->head];
  }
  EXPECT_EQ(standard.update_count(), 100u);
  EXPECT_EQ(heads.update_count(), 100u);
  EXPECT_EQ(per_head[0], 50u);
  EXPECT_EQ(per_head[1], 50u);
}

TEST(Act, GreedyFollowsQValuesAndExplorationIsSeeded) {
  Agent a(small_config(VariantKind::OptionHeads), 3), b(small_config(VariantKind::OptionHeads), 3);
  const auto obs = ohdqn::testing::played_observations(cg::TransferMode::Negative, 1, 3)[0];
  for (std::size_t h = 0; h < 2; ++h) {
    EXPECT_EQ(a.act(obs, h, 0.0), argmax(a.q_values(obs, h)));
    EXPECT_EQ(a.greedy_action(obs, h), argmax(a.q_values(obs, h)));
    b.act(obs, h, 0.0);  // keeps the two exploration streams in step
  }
  for (int i = 0; i < 50; ++i) EXPECT_EQ(a.act(obs, 0, 0.5), b.act(obs, 0, 0.5));
}

TEST(Agent, RejectsInvalidConfig) {
  AgentConfig config = small_config(VariantKind::Standard);
  config.gamma = 1.5;
  EXPECT_THROW(Agent(config, 0), std::invalid_argument);
  config = small_config(VariantKind::Standard);
  config.train_period = 0;
  EXPECT_THROW(Agent(config, 0), std::invalid_argument);
}

}  // namespace
