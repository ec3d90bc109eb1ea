#include "ohdqn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

namespace ohdqn {

std::size_t element_count(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>());
}

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), values_(element_count(shape_), fill) {}

void Tensor::fill(double value) { std::fill(values_.begin(), values_.end(), value); }

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(),
                     [](double v) { return std::isfinite(v); });
}

double Tensor::squared_norm() const {
  double sum = 0.0;
  for (double v : values_) sum += v * v;
  return sum;
}

std::string Tensor::shape_string() const {
  std::string out;
  for (std::size_t i = 0; i < shape_.size(); ++i) {
    if (i) out += 'x';
    out += std::to_string(shape_[i]);
  }
  return out;
}

}  // namespace ohdqn
