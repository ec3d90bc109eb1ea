#include "ohdqn/optim.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace ohdqn {

double global_norm(const Gradients& grads) {
  double sum = 0.0;
  for (const auto& t : grads.values.tensors) sum += t.squared_norm();
  return std::sqrt(sum);
}

double clip_global_norm(Gradients& grads, double max_norm) {
  if (!(max_norm > 0.0)) throw std::invalid_argument("clip_global_norm: max norm must be positive");
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    for (auto& t : grads.values.tensors) {
      for (double& v : t.values()) v *= scale;
    }
  }
  return norm;
}

void adam_step(NetworkParams& params, const Gradients& grads, const OptimConfig& config) {
  auto& weights = params.weights.tensors;
  if (grads.values.tensors.size() != weights.size()) {
    throw std::invalid_argument("adam_step: gradient tensor count does not match parameters");
  }
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (grads.values.tensors[i].shape() != weights[i].shape()) {
      throw std::invalid_argument("adam_step: shape mismatch for " + tensor_name(i));
    }
    if (grads.is_active(i) && !grads.values.tensors[i].all_finite()) {
      throw std::invalid_argument("adam_step: non-finite gradient in " + tensor_name(i));
    }
  }
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!grads.is_active(i)) continue;
    const auto step = ++params.adam.steps[i];
    const double correction1 = 1.0 - std::pow(config.beta1, static_cast<double>(step));
    const double correction2 = 1.0 - std::pow(config.beta2, static_cast<double>(step));
    auto w = weights[i].values();
    auto m = params.adam.first_moment.tensors[i].values();
    auto v = params.adam.second_moment.tensors[i].values();
    auto g = grads.values.tensors[i].values();
    for (std::size_t j = 0; j < w.size(); ++j) {
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g[j];
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g[j] * g[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      w[j] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
  }
  ++params.version;
}

void sync_target(const NetworkParams& online, NetworkParams& target) {
  if (!(online.arch == target.arch)) throw std::invalid_argument("sync_target: topology mismatch");
  target.weights = online.weights;
  ++target.version;
}

Tensor softmax(const Tensor& logits) {
  if (logits.rank() != 2) throw std::invalid_argument("softmax: expected a B x K tensor");
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  Tensor out(logits.shape());
  for (std::size_t b = 0; b < n; ++b) {
    const double* row = logits.data() + b * k;
    double* dst = out.data() + b * k;
    const double peak = *std::max_element(row, row + k);
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) total += (dst[j] = std::exp(row[j] - peak));
    for (std::size_t j = 0; j < k; ++j) dst[j] /= total;
  }
  return out;
}

SoftmaxXentResult softmax_xent(const Tensor& logits, std::span<const std::size_t> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size() || labels.empty()) {
    throw std::invalid_argument("softmax_xent: logits must be B x K with B labels");
  }
  const std::size_t n = logits.dim(0), k = logits.dim(1);
  SoftmaxXentResult result;
  result.grad = softmax(logits);
  for (std::size_t b = 0; b < n; ++b) {
    if (labels[b] >= k) throw std::out_of_range("softmax_xent: label " + std::to_string(labels[b]));
    const double* row = logits.data() + b * k;
    const double peak = *std::max_element(row, row + k);
    double total = 0.0;
    for (std::size_t j = 0; j < k; ++j) total += std::exp(row[j] - peak);
    // -log softmax via log-sum-exp keeps saturated logits exact
    result.loss += std::log(total) + peak - row[labels[b]];
    result.grad[b * k + labels[b]] -= 1.0;
  }
  const double inv = 1.0 / static_cast<double>(n);
  result.loss *= inv;
  for (double& g : result.grad.values()) g *= inv;
  return result;
}

}  // namespace ohdqn
