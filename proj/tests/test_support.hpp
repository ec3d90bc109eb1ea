#pragma once


#include <algorithm>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <functional>
#include <random>
#include <vector>

#include "ohdqn/catch_env.hpp"
#include "ohdqn/network.hpp"

namespace ohdqn::testing {

// Upper-tail p-value of Pearson's chi-square statistic against equal
// expected counts.
inline double chi_square_uniform_p(const std::vector<std::size_t>& counts) {
  double total = 0.0;
  for (auto c : counts) total += static_cast<double>(c);
  const double expected = total / static_cast<double>(counts.size());
  double stat = 0.0;
  for (auto c : counts) {
    const double d = static_cast<double>(c) - expected;
    stat += d * d / expected;
  }
  boost::math::chi_squared dist(static_cast<double>(counts.size() - 1));
  return boost::math::cdf(boost::math::complement(dist, stat));
}

// Small trunk for exhaustive finite-difference checks: 2x15x15 input,
// 3 then 4 channels (7x7 then 2x2), flat width 16.
inline ArchSpec small_arch(std::size_t heads, std::size_t hidden, std::size_t outputs = 3) {
  ArchSpec arch;
  arch.trunk.frames = 2;
  arch.trunk.grid = 15;
  arch.trunk.conv1_channels = 3;
  arch.trunk.conv2_channels = 4;
  arch.head_count = heads;
  arch.hidden_units = hidden;
  arch.outputs = outputs;
  arch.validate();
  return arch;
}

// Fills every tensor (biases included) with uniform values so that no ReLU
// pre-activation sits exactly on its kink.
inline void randomize(NetworkParams& params, std::uint64_t seed, double scale = 0.5) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-scale, scale);
  for (auto& t : params.weights.tensors) {
    for (auto& v : t.values()) v = u(rng);
  }
  ++params.version;
}

inline Tensor random_input(const TrunkSpec& trunk, std::size_t batch, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor x{batch, trunk.frames, trunk.grid, trunk.grid};
  for (auto& v : x.values()) v = u(rng);
  return x;
}

// Mostly-zero input in the style of Catch frames.
inline Tensor sparse_input(const TrunkSpec& trunk, std::size_t batch, std::uint64_t seed,
                           double density = 0.02) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor x{batch, trunk.frames, trunk.grid, trunk.grid};
  for (auto& v : x.values()) v = u(rng) < density ? (u(rng) < 0.5 ? 0.5 : 1.0) : 0.0;
  return x;
}

// Observations gathered from uniform-random play.
inline std::vector<catch_game::Observation> played_observations(catch_game::TransferMode mode, std::size_t n,
                                                                std::uint64_t seed) {
  catch_game::CatchEnv env(mode, seed);
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> action(0, 2);
  std::vector<catch_game::Observation> out;
  env.reset();
  while (out.size() < n) {
    if (env.state().terminal()) env.reset();
    env.step(static_cast<catch_game::Action>(action(rng)));
    out.push_back(env.observation());
  }
  return out;
}

inline double relative_error(double analytic, double numeric) {
  // Entries whose magnitude is at the level of finite-difference noise are
  // compared on an absolute scale of 1e-6.
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-6});
}

// Central differences of `loss` with respect to every parameter of
// `params`, compared against `analytic`. Returns the worst relative error.
// `stride` > 1 checks every stride-th entry of each tensor.
inline double max_gradient_error(NetworkParams& params, const Parameters& analytic,
                                 const std::function<double(const NetworkParams&)>& loss, double h = 1e-5,
                                 std::size_t stride = 1) {
  auto central = [&](double& value, double step) {
    const double saved = value;
    value = saved + step;
    ++params.version;
    const double up = loss(params);
    value = saved - step;
    ++params.version;
    const double down = loss(params);
    value = saved;
    ++params.version;
    return (up - down) / (2.0 * step);
  };
  double worst = 0.0;
  for (std::size_t t = 0; t < params.weights.tensors.size(); ++t) {
    auto values = params.weights.tensors[t].values();
    for (std::size_t i = 0; i < values.size(); i += stride) {
      const double exact = analytic.tensors[t][i];
      double err = relative_error(exact, central(values[i], h));
      // A step that straddles a ReLU kink measures an average of two slopes;
      // a tenfold smaller step no longer straddles it.
      if (err > 1e-6) err = std::min(err, relative_error(exact, central(values[i], h / 10.0)));
      if (err > worst) worst = err;
    }
  }
  return worst;
}

}  // namespace ohdqn::testing
