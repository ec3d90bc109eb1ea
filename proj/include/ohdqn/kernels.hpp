#pragma once

// Layer kernels for the convolutional Q-network.
//
// Two implementations share one contract: `reference` is a direct
// transcription of the layer definitions as nested loops and is kept for
// testing; `parallel` is the production path (im2col + Eigen GEMM, OpenMP
// over the batch, and a scatter path for sparse inputs such as Catch frames).
//
// Layouts: activations are NCHW, convolution weights OIHW, dense weights
// [in][out]. Every kernel overwrites its outputs. Backward kernels accept an
// empty `grad_input` span to skip the input gradient.

#include <cstddef>
#include <span>

namespace ohdqn::kernels {

struct ConvGeometry {
  std::size_t batch = 1;
  std::size_t in_channels = 1;
  std::size_t in_height = 1;
  std::size_t in_width = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 1;
  std::size_t stride = 1;
  std::size_t pad = 0;

  std::size_t out_height() const { return (in_height + 2 * pad - kernel) / stride + 1; }
  std::size_t out_width() const { return (in_width + 2 * pad - kernel) / stride + 1; }
  std::size_t input_size() const { return batch * in_channels * in_height * in_width; }
  std::size_t output_size() const { return batch * out_channels * out_height() * out_width(); }
  std::size_t weight_size() const { return out_channels * in_channels * kernel * kernel; }

  // Throws std::invalid_argument if the kernel does not fit the padded input.
  void validate() const;
};

struct DenseGeometry {
  std::size_t batch = 1;
  std::size_t in_features = 1;
  std::size_t out_features = 1;
};

void relu_inplace(std::span<double> values);
// grad[i] = 0 wherever activation[i] <= 0.
void relu_mask(std::span<const double> activation, std::span<double> grad);

namespace reference {

void conv2d_forward(const ConvGeometry& g, std::span<const double> input,
                    std::span<const double> weight, std::span<const double> bias,
                    std::span<double> output);
void conv2d_backward(const ConvGeometry& g, std::span<const double> input,
                     std::span<const double> weight, std::span<const double> grad_output,
                     std::span<double> grad_input, std::span<double> grad_weight,
                     std::span<double> grad_bias);

void dense_forward(const DenseGeometry& g, std::span<const double> input,
                   std::span<const double> weight, std::span<const double> bias,
                   std::span<double> output);
void dense_backward(const DenseGeometry& g, std::span<const double> input,
                    std::span<const double> weight, std::span<const double> grad_output,
                    std::span<double> grad_input, std::span<double> grad_weight,
                    std::span<double> grad_bias);

}  // namespace reference

namespace parallel {

// Inputs whose nonzero fraction is below this use the scatter path.
inline constexpr double kSparseDensity = 0.1;

void conv2d_forward(const ConvGeometry& g, std::span<const double> input,
                    std::span<const double> weight, std::span<const double> bias,
                    std::span<double> output);
void conv2d_backward(const ConvGeometry& g, std::span<const double> input,
                     std::span<const double> weight, std::span<const double> grad_output,
                     std::span<double> grad_input, std::span<double> grad_weight,
                     std::span<double> grad_bias);

// Explicit paths, exposed for tests and benchmarks. The dispatching
// functions above pick between them by input density.
void conv2d_forward_gemm(const ConvGeometry& g, std::span<const double> input,
                         std::span<const double> weight, std::span<const double> bias,
                         std::span<double> output);
void conv2d_forward_sparse(const ConvGeometry& g, std::span<const double> input,
                           std::span<const double> weight, std::span<const double> bias,
                           std::span<double> output);
void conv2d_weight_grad_gemm(const ConvGeometry& g, std::span<const double> input,
                             std::span<const double> grad_output,
                             std::span<double> grad_weight);
void conv2d_weight_grad_sparse(const ConvGeometry& g, std::span<const double> input,
                               std::span<const double> grad_output,
                               std::span<double> grad_weight);

void dense_forward(const DenseGeometry& g, std::span<const double> input,
                   std::span<const double> weight, std::span<const double> bias,
                   std::span<double> output);
void dense_backward(const DenseGeometry& g, std::span<const double> input,
                    std::span<const double> weight, std::span<const double> grad_output,
                    std::span<double> grad_input, std::span<double> grad_weight,
                    std::span<double> grad_bias);

}  // namespace parallel

}  // namespace ohdqn::kernels
