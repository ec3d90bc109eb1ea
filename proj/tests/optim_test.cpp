#include <gtest/gtest.h>

#include <cmath>

#include "ohdqn/network.hpp"
#include "ohdqn/optim.hpp"
#include "test_support.hpp"

namespace {

using namespace ohdqn;

NetworkParams tiny_net(std::uint64_t seed = 0) {
  return init_network(ohdqn::testing::small_arch(2, 4), seed);
}

Gradients filled_grads(const NetworkParams& net, double value, std::size_t head = 0) {
  Gradients g{zeros_like(net.weights), head};
  for (std::size_t i = 0; i < g.values.tensors.size(); ++i) {
    if (g.is_active(i)) g.values.tensors[i].fill(value);
  }
  return g;
}

std::size_t active_count(const Gradients& g) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < g.values.tensors.size(); ++i) {
    if (g.is_active(i)) n += g.values.tensors[i].size();
  }
  return n;
}

TEST(ClipGlobalNorm, BelowThresholdUnchanged) {
  const auto net = tiny_net();
  auto g = filled_grads(net, 1.0);
  // Scale so the global norm is exactly 5.
  const double scale = 5.0 / std::sqrt(static_cast<double>(active_count(g)));
  for (auto& t : g.values.tensors) {
    for (auto& v : t.values()) v *= scale;
  }
  const auto before = g.values;
  EXPECT_NEAR(clip_global_norm(g, 10.0), 5.0, 1e-12);
  EXPECT_EQ(g.values, before);
}

TEST(ClipGlobalNorm, AboveThresholdScalesEveryEntry) {
  const auto net = tiny_net();
  auto g = filled_grads(net, 1.0);
  const double scale = 20.0 / std::sqrt(static_cast<double>(active_count(g)));
  for (auto& t : g.values.tensors) {
    for (auto& v : t.values()) v *= scale;
  }
  const auto before = g.values;
  EXPECT_NEAR(clip_global_norm(g, 10.0), 20.0, 1e-9);
  for (std::size_t t = 0; t < before.tensors.size(); ++t) {
    for (std::size_t i = 0; i < before.tensors[t].size(); ++i) {
      EXPECT_NEAR(g.values.tensors[t][i], before.tensors[t][i] / 2.0, 1e-15);
    }
  }
  EXPECT_LE(global_norm(g), 10.0 + 1e-12);
}

TEST(ClipGlobalNorm, ZeroGradientsStayZero) {
  const auto net = tiny_net();
  auto g = filled_grads(net, 0.0);
  EXPECT_EQ(clip_global_norm(g, 10.0), 0.0);
  EXPECT_EQ(global_norm(g), 0.0);
}

TEST(ClipGlobalNorm, NeverIncreasesNorm) {
  const auto net = tiny_net();
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    auto g = filled_grads(net, 0.0);
    std::normal_distribution<double> n(0.0, std::pow(10.0, trial % 5 - 2));
    for (auto& t : g.values.tensors) {
      for (auto& v : t.values()) v = n(rng);
    }
    const double before = global_norm(g);
    clip_global_norm(g, 10.0);
    EXPECT_LE(global_norm(g), std::min(before, 10.0) + 1e-12);
  }
}

TEST(ClipGlobalNorm, RejectsNonPositiveMaximum) {
  const auto net = tiny_net();
  auto g = filled_grads(net, 1.0);
  EXPECT_THROW(clip_global_norm(g, 0.0), std::invalid_argument);
}

TEST(AdamStep, FirstStepMovesByLearningRate) {
  auto net = tiny_net();
  const auto before = net.weights;
  const OptimConfig config;
  for (double g : {0.3, -2.0}) {
    auto copy = net;
    adam_step(copy, filled_grads(copy, g), config);
    // t = 1: m_hat = g, v_hat = g^2, so delta = -lr * g / (|g| + eps).
    const double expected = -config.learning_rate * g / (std::abs(g) + config.epsilon);
    const double delta = copy.weights.conv1_weight()[0] - before.conv1_weight()[0];
    EXPECT_NEAR(delta, expected, 1e-15);
    EXPECT_NEAR(std::abs(delta), config.learning_rate, 1e-10);
    EXPECT_EQ(copy.adam.steps[0], 1u);
  }
}

TEST(AdamStep, ZeroGradientLeavesParametersUnchanged) {
  auto net = tiny_net();
  const auto before = net.weights;
  adam_step(net, filled_grads(net, 0.0), OptimConfig{});
  EXPECT_EQ(net.weights, before);
}

TEST(AdamStep, InactiveHeadIsBitUnchanged) {
  auto net = tiny_net();
  const auto before = net;
  adam_step(net, filled_grads(net, 0.5, 1), OptimConfig{});
  for (std::size_t i = 0; i < net.weights.tensors.size(); ++i) {
    if (Parameters::owner_head(i) == 0) {
      EXPECT_EQ(net.weights.tensors[i], before.weights.tensors[i]) << tensor_name(i);
      EXPECT_EQ(net.adam.first_moment.tensors[i], before.adam.first_moment.tensors[i]);
      EXPECT_EQ(net.adam.steps[i], 0u);
    } else {
      EXPECT_EQ(net.adam.steps[i], 1u);
    }
  }
  EXPECT_GT(net.version, before.version);
}

TEST(AdamStep, QuadraticConvergesMonotonically) {
  // L = x^2 / 2 on every parameter of the network, starting from x = 1.
  auto net = tiny_net();
  for (auto& t : net.weights.tensors) t.fill(1.0);
  OptimConfig config;
  // Larger rates overshoot through zero under momentum.
  config.learning_rate = 0.005;
  double previous = 1.0;
  for (int step = 0; step < 1000; ++step) {
    Gradients g{net.weights, 0};
    for (std::size_t i = 0; i < g.values.tensors.size(); ++i) {
      if (!g.is_active(i)) g.values.tensors[i].fill(0.0);
    }
    adam_step(net, g, config);
    const double x = std::abs(net.weights.conv1_weight()[0]);
    EXPECT_LE(x, previous + 1e-15) << "step " << step;
    previous = x;
  }
  EXPECT_LT(previous, 0.01);
}

TEST(AdamStep, RejectsNonFiniteAndMismatchedGradients) {
  auto net = tiny_net();
  auto bad = filled_grads(net, 1.0);
  bad.values.conv2_bias()[0] = std::nan("");
  EXPECT_THROW(adam_step(net, bad, OptimConfig{}), std::invalid_argument);
  const auto other = init_network(ohdqn::testing::small_arch(1, 4), 0);
  EXPECT_THROW(adam_step(net, filled_grads(other, 1.0), OptimConfig{}), std::invalid_argument);
}

TEST(SyncTarget, CopiesWeightsAndKeepsAdamState) {
  auto online = tiny_net(1);
  auto target = tiny_net(2);
  adam_step(online, filled_grads(online, 0.1), OptimConfig{});
  const auto target_adam = target.adam;
  sync_target(online, target);
  EXPECT_EQ(target.weights, online.weights);
  EXPECT_EQ(target.adam, target_adam);

  const auto x = ohdqn::testing::random_input(online.arch.trunk, 3, 5);
  EXPECT_EQ(forward(online, x).q, forward(target, x).q);

  const auto once = target.weights;
  sync_target(online, target);
  EXPECT_EQ(target.weights, once);

  adam_step(online, filled_grads(online, 0.1), OptimConfig{});
  EXPECT_NE(forward(online, x).q, forward(target, x).q);
}

TEST(SyncTarget, RejectsTopologyMismatch) {
  const auto online = tiny_net();
  auto target = init_network(ohdqn::testing::small_arch(1, 4), 0);
  EXPECT_THROW(sync_target(online, target), std::invalid_argument);
}

TEST(SoftmaxXent, EqualLogitsGiveLn2) {
  Tensor logits{1, 2};
  const std::vector<std::size_t> labels{1};
  const auto r = softmax_xent(logits, labels);
  EXPECT_NEAR(r.loss, std::log(2.0), 1e-15);
  EXPECT_NEAR(r.grad[0], 0.5, 1e-15);
  EXPECT_NEAR(r.grad[1], -0.5, 1e-15);
}

TEST(SoftmaxXent, SaturatedCorrectClassHasTinyLoss) {
  Tensor logits{1, 2};
  logits[0] = 50.0;
  const std::vector<std::size_t> labels{0};
  EXPECT_LT(softmax_xent(logits, labels).loss, 1e-6);
  EXPECT_GE(softmax_xent(logits, labels).loss, 0.0);
}

TEST(SoftmaxXent, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> n(0.0, 2.0);
  for (int trial = 0; trial < 10; ++trial) {
    Tensor logits{4, 3};
    for (auto& v : logits.values()) v = n(rng);
    const std::vector<std::size_t> labels{0, 2, 1, 2};
    const auto r = softmax_xent(logits, labels);
    for (std::size_t i = 0; i < logits.size(); ++i) {
      Tensor up = logits, down = logits;
      up[i] += 1e-5;
      down[i] -= 1e-5;
      const double numeric = (softmax_xent(up, labels).loss - softmax_xent(down, labels).loss) / 2e-5;
      EXPECT_LT(ohdqn::testing::relative_error(r.grad[i], numeric), 1e-4);
    }
  }
}

TEST(SoftmaxXent, RejectsOutOfRangeLabel) {
  const std::vector<std::size_t> labels{2};
  EXPECT_THROW(softmax_xent(Tensor{1, 2}, labels), std::out_of_range);
}

TEST(Softmax, RowsSumToOneForExtremeLogits) {
  Tensor logits{2, 3};
  logits[0] = 1000.0;
  logits[1] = -1000.0;
  logits[3] = 1e-3;
  const auto p = softmax(logits);
  for (std::size_t b = 0; b < 2; ++b) {
    double sum = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
      EXPECT_GE(p[b * 3 + k], 0.0);
      sum += p[b * 3 + k];
    }
    EXPECT_NEAR(sum, 1.0, 1e-12);
  }
}

}  // namespace
