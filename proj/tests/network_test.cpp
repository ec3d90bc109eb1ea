#include <gtest/gtest.h>

#include "ohdqn/agent.hpp"
#include "ohdqn/network.hpp"
#include "ohdqn/optim.hpp"
#include "test_support.hpp"

namespace {

using namespace ohdqn;
using ohdqn::testing::max_gradient_error;
using ohdqn::testing::randomize;

AgentVariant variant(VariantKind kind, std::size_t capacity) { return AgentVariant{kind, capacity}; }

std::size_t hidden_layer_params(const NetworkParams& net) {
  std::size_t n = 0;
  for (std::size_t h = 0; h < net.arch.head_count; ++h) {
    n += net.weights.head(h, HeadSlot::HiddenWeight).size() + net.weights.head(h, HeadSlot::HiddenBias).size();
  }
  return n;
}

TEST(InitNetwork, SameSeedGivesIdenticalParameters) {
  const auto a = init_network(variant(VariantKind::Standard, 32), 7);
  const auto b = init_network(variant(VariantKind::Standard, 32), 7);
  EXPECT_EQ(a.weights, b.weights);
  const auto c = init_network(variant(VariantKind::Standard, 32), 8);
  EXPECT_FALSE(a.weights == c.weights);
}

TEST(InitNetwork, StandardHiddenWeightIs512ByCapacity) {
  const auto net = init_network(variant(VariantKind::Standard, 32), 0);
  EXPECT_EQ(net.weights.head(0, HeadSlot::HiddenWeight).shape(), (std::vector<std::size_t>{512, 32}));
  EXPECT_EQ(net.weights.head(0, HeadSlot::OutputWeight).shape(), (std::vector<std::size_t>{32, 3}));
}

TEST(InitNetwork, OptionHeadsSplitTheHiddenLayer) {
  const auto net = init_network(variant(VariantKind::OptionHeads, 32), 0);
  ASSERT_EQ(net.arch.head_count, 2u);
  for (std::size_t h = 0; h < 2; ++h) {
    EXPECT_EQ(net.weights.head(h, HeadSlot::HiddenWeight).shape(), (std::vector<std::size_t>{512, 16}));
  }
}

TEST(InitNetwork, HalfUsesHalfTheUnits) {
  const auto net = init_network(variant(VariantKind::Half, 64), 0);
  EXPECT_EQ(net.arch.head_count, 1u);
  EXPECT_EQ(net.arch.hidden_units, 32u);
}

TEST(InitNetwork, RejectsUnsupportedCapacityAndHeadCount) {
  EXPECT_THROW(init_network(variant(VariantKind::Standard, 48), 0), std::invalid_argument);
  AgentVariant no_heads{VariantKind::OptionHeads, 32, 0};
  EXPECT_THROW(init_network(no_heads, 0), std::invalid_argument);
}

TEST(InitNetwork, BiasesZeroAndWeightsWithinFanInBound) {
  const auto net = init_network(variant(VariantKind::Standard, 16), 3);
  for (double v : net.weights.conv1_bias().values()) EXPECT_EQ(v, 0.0);
  const double bound = std::sqrt(1.0 / 100.0);  // 4 frames x 5 x 5
  for (double v : net.weights.conv1_weight().values()) EXPECT_LE(std::abs(v), bound);
}

TEST(Parity, HiddenParameterCountsMatchAcrossVariants) {
  for (std::size_t capacity : {16u, 32u, 64u}) {
    const auto standard = init_network(variant(VariantKind::Standard, capacity), 0);
    const auto heads = init_network(variant(VariantKind::OptionHeads, capacity), 0);
    EXPECT_EQ(hidden_layer_params(standard), 512 * capacity + capacity);
    EXPECT_EQ(hidden_layer_params(heads), hidden_layer_params(standard));
    // The only total difference is the duplicated 3-unit output layer over halved width.
    const std::size_t standard_output = capacity * 3 + 3;
    const std::size_t heads_output = 2 * ((capacity / 2) * 3 + 3);
    EXPECT_EQ(heads.weights.parameter_count() - heads_output, standard.weights.parameter_count() - standard_output);
  }
}

TEST(Forward, LayerShapesForBatch32) {
  const auto net = init_network(variant(VariantKind::Standard, 32), 1);
  const auto x = ohdqn::testing::sparse_input(net.arch.trunk, 32, 2);
  const auto out = forward(net, x);
  EXPECT_EQ(out.cache.conv1.shape(), (std::vector<std::size_t>{32, 32, 11, 11}));
  EXPECT_EQ(out.cache.conv2.shape(), (std::vector<std::size_t>{32, 32, 4, 4}));
  EXPECT_EQ(out.cache.conv2.size() / 32, 512u);
  EXPECT_EQ(net.arch.trunk.flat_features(), 512u);
  ASSERT_EQ(out.q.size(), 1u);
  EXPECT_EQ(out.q[0].shape(), (std::vector<std::size_t>{32, 3}));
}

TEST(Forward, ZeroInputAndZeroParametersYieldOutputBiases) {
  auto net = init_network(variant(VariantKind::OptionHeads, 16), 1);
  net.weights = zeros_like(net.weights);
  net.weights.head(0, HeadSlot::OutputBias).values()[1] = 0.25;
  net.weights.head(1, HeadSlot::OutputBias).values()[2] = -0.5;
  const auto out = forward(net, Tensor{3, 4, 24, 24});
  for (std::size_t b = 0; b < 3; ++b) {
    EXPECT_EQ(out.q[0][b * 3 + 0], 0.0);
    EXPECT_EQ(out.q[0][b * 3 + 1], 0.25);
    EXPECT_EQ(out.q[1][b * 3 + 2], -0.5);
  }
}

TEST(Forward, TwoHeadsShareTrunkActivations) {
  const auto net = init_network(variant(VariantKind::OptionHeads, 32), 4);
  const auto x = ohdqn::testing::random_input(net.arch.trunk, 2, 5);
  const auto out = forward(net, x);
  EXPECT_EQ(out.q.size(), 2u);
  EXPECT_EQ(out.cache.hidden.size(), 2u);
  // Recomputing head 1 from the shared trunk activation reproduces its output.
  auto single = net;
  single.arch.head_count = 1;
  single.weights.tensors.erase(single.weights.tensors.begin() + 4, single.weights.tensors.begin() + 8);
  const auto head1 = forward(single, x);
  EXPECT_EQ(head1.cache.conv2, out.cache.conv2);
  EXPECT_EQ(head1.q[0], out.q[1]);
}

TEST(Forward, RejectsWrongShape) {
  const auto net = init_network(variant(VariantKind::Standard, 16), 0);
  EXPECT_THROW(forward(net, Tensor{2, 3, 24, 24}), std::invalid_argument);
  EXPECT_THROW(forward(net, Tensor{2, 4, 24}), std::invalid_argument);
}

TEST(Forward, BackendsAgree) {
  auto net = init_network(variant(VariantKind::OptionHeads, 32), 9);
  const auto x = ohdqn::testing::sparse_input(net.arch.trunk, 4, 10);
  const auto fast = forward(net, x, Backend::Parallel);
  const auto slow = forward(net, x, Backend::Reference);
  for (std::size_t h = 0; h < 2; ++h) {
    for (std::size_t i = 0; i < fast.q[h].size(); ++i) EXPECT_NEAR(fast.q[h][i], slow.q[h][i], 1e-12);
  }
}

TEST(Backward, ZeroOutputGradientGivesZeroGradients) {
  const auto net = init_network(variant(VariantKind::Standard, 16), 1);
  const auto fwd = forward(net, ohdqn::testing::random_input(net.arch.trunk, 2, 3));
  const auto grads = backward(net, fwd.cache, 0, Tensor{2, 3});
  for (const auto& t : grads.values.tensors) {
    for (double v : t.values()) EXPECT_EQ(v, 0.0);
  }
}

TEST(Backward, OnlyTheSelectedHeadReceivesGradient) {
  auto net = init_network(variant(VariantKind::OptionHeads, 32), 2);
  randomize(net, 3, 0.1);
  const auto fwd = forward(net, ohdqn::testing::random_input(net.arch.trunk, 4, 4));
  Tensor g({4, 3}, 1.0);
  const auto grads = backward(net, fwd.cache, 0, g);
  for (auto slot : {HeadSlot::HiddenWeight, HeadSlot::HiddenBias, HeadSlot::OutputWeight, HeadSlot::OutputBias}) {
    for (double v : grads.values.head(1, slot).values()) ASSERT_EQ(v, 0.0);
  }
  EXPECT_GT(grads.values.head(0, HeadSlot::OutputBias).squared_norm(), 0.0);
  EXPECT_GT(grads.values.conv1_weight().squared_norm(), 0.0);
}

TEST(Backward, StaleCacheAndBadHeadThrow) {
  auto net = init_network(variant(VariantKind::OptionHeads, 16), 2);
  const auto fwd = forward(net, Tensor{1, 4, 24, 24});
  EXPECT_THROW(backward(net, fwd.cache, 2, Tensor{1, 3}), std::out_of_range);
  EXPECT_THROW(backward(net, fwd.cache, 0, Tensor{2, 3}), std::invalid_argument);
  ++net.version;
  EXPECT_THROW(backward(net, fwd.cache, 0, Tensor{1, 3}), std::logic_error);
  const auto other = init_network(variant(VariantKind::Standard, 16), 2);
  EXPECT_THROW(backward(other, fwd.cache, 0, Tensor{1, 3}), std::logic_error);
}

// Squared error on the taken actions of head `head`: the Q-learning loss
// with targets held fixed.
double taken_action_loss(const NetworkParams& net, const Tensor& x, std::size_t head,
                         const std::vector<std::size_t>& actions, const std::vector<double>& targets,
                         Backend backend) {
  const auto q = forward(net, x, backend).q[head];
  double loss = 0.0;
  for (std::size_t b = 0; b < actions.size(); ++b) {
    const double d = q[b * 3 + actions[b]] - targets[b];
    loss += d * d;
  }
  return loss / static_cast<double>(actions.size());
}

class GradientCheck : public ::testing::TestWithParam<Backend> {};

}  // namespace

namespace ohdqn {
void PrintTo(Backend b, std::ostream* os) { *os << (b == Backend::Parallel ? "parallel" : "reference"); }
}  // namespace ohdqn

namespace {

TEST_P(GradientCheck, QLossThroughEachHeadMatchesFiniteDifferences) {
  const Backend backend = GetParam();
  for (std::uint64_t instance = 0; instance < 10; ++instance) {
    auto net = init_network(ohdqn::testing::small_arch(2, 5), instance);
    randomize(net, 100 + instance);
    const std::size_t batch = 3;
    const auto x = instance % 2 ? ohdqn::testing::sparse_input(net.arch.trunk, batch, instance, 0.05)
                                : ohdqn::testing::random_input(net.arch.trunk, batch, instance);
    std::mt19937_64 rng(instance);
    std::vector<std::size_t> actions(batch);
    std::vector<double> targets(batch);
    for (std::size_t b = 0; b < batch; ++b) {
      actions[b] = rng() % 3;
      targets[b] = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    }
    for (std::size_t head = 0; head < 2; ++head) {
      const auto fwd = forward(net, x, backend);
      Tensor grad_out{batch, 3};
      for (std::size_t b = 0; b < batch; ++b) {
        grad_out[b * 3 + actions[b]] = 2.0 * (fwd.q[head][b * 3 + actions[b]] - targets[b]) / batch;
      }
      const auto grads = backward(net, fwd.cache, head, grad_out, backend);
      const double err = max_gradient_error(net, grads.values, [&](const NetworkParams& p) {
        return taken_action_loss(p, x, head, actions, targets, backend);
      });
      EXPECT_LT(err, 1e-4) << "instance " << instance << " head " << head;
    }
  }
}

INSTANTIATE_TEST_SUITE_P(Backends, GradientCheck, ::testing::Values(Backend::Parallel, Backend::Reference),
                         [](const auto& info) {
                           return std::string(info.param == Backend::Parallel ? "Parallel" : "Reference");
                         });

TEST(GradientCheck, FullSizeNetworkSpotCheck) {
  auto net = init_network(variant(VariantKind::OptionHeads, 32), 11);
  randomize(net, 12, 0.05);
  const auto obs = ohdqn::testing::played_observations(catch_game::TransferMode::Negative, 4, 3);
  const auto x = observation_batch(obs);
  const std::vector<std::size_t> actions{0, 2, 1, 2};
  const std::vector<double> targets{0.5, -0.25, 1.0, 0.0};
  const auto fwd = forward(net, x);
  Tensor grad_out{4, 3};
  for (std::size_t b = 0; b < 4; ++b) {
    grad_out[b * 3 + actions[b]] = 2.0 * (fwd.q[1][b * 3 + actions[b]] - targets[b]) / 4.0;
  }
  const auto grads = backward(net, fwd.cache, 1, grad_out);
  const double err = max_gradient_error(
      net, grads.values,
      [&](const NetworkParams& p) { return taken_action_loss(p, x, 1, actions, targets, Backend::Parallel); },
      1e-5, 97);
  EXPECT_LT(err, 1e-4);
}

TEST(Determinism, ForwardBackwardAndAdamAreBitReproducible) {
  auto run = [] {
    auto net = init_network(variant(VariantKind::OptionHeads, 32), 21);
    const auto x = ohdqn::testing::sparse_input(net.arch.trunk, 8, 22);
    for (int i = 0; i < 3; ++i) {
      const auto fwd = forward(net, x);
      Tensor g({8, 3}, 0.1);
      auto grads = backward(net, fwd.cache, static_cast<std::size_t>(i % 2), g);
      clip_global_norm(grads, 10.0);
      adam_step(net, grads, OptimConfig{});
    }
    return net;
  };
  const auto a = run(), b = run();
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.adam, b.adam);
}

}  // namespace
