#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "ohdqn/network.hpp"

namespace ohdqn {

struct OptimConfig {
  double learning_rate = 2.5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double max_grad_norm = 10.0;
};

// L2 norm over every gradient tensor.
double global_norm(const Gradients& grads);

// Rescales all gradients by max_norm/norm when the global norm exceeds
// max_norm. Returns the norm before clipping.
double clip_global_norm(Gradients& grads, double max_norm);

// One bias-corrected Adam update. Tensors outside the gradient's active head
// keep their weights, moments and step counts. Throws std::invalid_argument
// on non-finite gradients or mismatched shapes.
void adam_step(NetworkParams& params, const Gradients& grads, const OptimConfig& config);

// Copies the online weights into the target; Adam state of the target is
// left alone. Throws std::invalid_argument on a topology mismatch.
void sync_target(const NetworkParams& online, NetworkParams& target);

struct SoftmaxXentResult {
  double loss = 0.0;  // mean over the batch
  Tensor grad;        // (softmax - onehot) / B
};

// Throws std::out_of_range for a label >= K.
SoftmaxXentResult softmax_xent(const Tensor& logits, std::span<const std::size_t> labels);

// Row-wise numerically stable softmax of a B x K tensor.
Tensor softmax(const Tensor& logits);

}  // namespace ohdqn
