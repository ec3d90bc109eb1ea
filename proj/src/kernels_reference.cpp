#include <algorithm>
#include <stdexcept>
#include <string>

#include "kernels_detail.hpp"
#include "ohdqn/kernels.hpp"

namespace ohdqn::kernels {

void ConvGeometry::validate() const {
  if (kernel == 0 || stride == 0) throw std::invalid_argument("conv: kernel and stride must be positive");
  if (in_height + 2 * pad < kernel || in_width + 2 * pad < kernel) {
    throw std::invalid_argument("conv: kernel " + std::to_string(kernel) +
                                " does not fit padded input " + std::to_string(in_height) + "x" +
                                std::to_string(in_width));
  }
}

void relu_inplace(std::span<double> values) {
  for (double& v : values) v = v > 0.0 ? v : 0.0;
}

void relu_mask(std::span<const double> activation, std::span<double> grad) {
  for (std::size_t i = 0; i < grad.size(); ++i) {
    if (activation[i] <= 0.0) grad[i] = 0.0;
  }
}

namespace reference {

using detail::check_size;

void conv2d_forward(const ConvGeometry& g, std::span<const double> input,
                    std::span<const double> weight, std::span<const double> bias,
                    std::span<double> output) {
  g.validate();
  check_size(input.size(), g.input_size(), "conv input");
  check_size(weight.size(), g.weight_size(), "conv weight");
  check_size(bias.size(), g.out_channels, "conv bias");
  check_size(output.size(), g.output_size(), "conv output");
  const std::size_t oh = g.out_height(), ow = g.out_width();
  const auto ih = static_cast<long>(g.in_height), iw = static_cast<long>(g.in_width);
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          double sum = bias[oc];
          for (std::size_t ic = 0; ic < g.in_channels; ++ic) {
            for (std::size_t kh = 0; kh < g.kernel; ++kh) {
              for (std::size_t kw = 0; kw < g.kernel; ++kw) {
                const long y = static_cast<long>(oy * g.stride + kh) - static_cast<long>(g.pad);
                const long x = static_cast<long>(ox * g.stride + kw) - static_cast<long>(g.pad);
                if (y < 0 || y >= ih || x < 0 || x >= iw) continue;
                sum += weight[((oc * g.in_channels + ic) * g.kernel + kh) * g.kernel + kw] *
                       input[((b * g.in_channels + ic) * g.in_height + y) * g.in_width + x];
              }
            }
          }
          output[((b * g.out_channels + oc) * oh + oy) * ow + ox] = sum;
        }
      }
    }
  }
}

void conv2d_backward(const ConvGeometry& g, std::span<const double> input,
                     std::span<const double> weight, std::span<const double> grad_output,
                     std::span<double> grad_input, std::span<double> grad_weight,
                     std::span<double> grad_bias) {
  g.validate();
  check_size(input.size(), g.input_size(), "conv input");
  check_size(weight.size(), g.weight_size(), "conv weight");
  check_size(grad_output.size(), g.output_size(), "conv grad_output");
  check_size(grad_weight.size(), g.weight_size(), "conv grad_weight");
  check_size(grad_bias.size(), g.out_channels, "conv grad_bias");
  const bool want_input = !grad_input.empty();
  if (want_input) check_size(grad_input.size(), g.input_size(), "conv grad_input");

  std::fill(grad_weight.begin(), grad_weight.end(), 0.0);
  std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
  std::fill(grad_input.begin(), grad_input.end(), 0.0);
  const std::size_t oh = g.out_height(), ow = g.out_width();
  const auto ih = static_cast<long>(g.in_height), iw = static_cast<long>(g.in_width);
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
      for (std::size_t oy = 0; oy < oh; ++oy) {
        for (std::size_t ox = 0; ox < ow; ++ox) {
          const double go = grad_output[((b * g.out_channels + oc) * oh + oy) * ow + ox];
          grad_bias[oc] += go;
          for (std::size_t ic = 0; ic < g.in_channels; ++ic) {
            for (std::size_t kh = 0; kh < g.kernel; ++kh) {
              for (std::size_t kw = 0; kw < g.kernel; ++kw) {
                const long y = static_cast<long>(oy * g.stride + kh) - static_cast<long>(g.pad);
                const long x = static_cast<long>(ox * g.stride + kw) - static_cast<long>(g.pad);
                if (y < 0 || y >= ih || x < 0 || x >= iw) continue;
                const std::size_t wi = ((oc * g.in_channels + ic) * g.kernel + kh) * g.kernel + kw;
                const std::size_t ii = ((b * g.in_channels + ic) * g.in_height + y) * g.in_width + x;
                grad_weight[wi] += go * input[ii];
                if (want_input) grad_input[ii] += go * weight[wi];
              }
            }
          }
        }
      }
    }
  }
}

void dense_forward(const DenseGeometry& g, std::span<const double> input,
                   std::span<const double> weight, std::span<const double> bias,
                   std::span<double> output) {
  check_size(input.size(), g.batch * g.in_features, "dense input");
  check_size(weight.size(), g.in_features * g.out_features, "dense weight");
  check_size(bias.size(), g.out_features, "dense bias");
  check_size(output.size(), g.batch * g.out_features, "dense output");
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t o = 0; o < g.out_features; ++o) {
      double sum = bias[o];
      for (std::size_t i = 0; i < g.in_features; ++i) {
        sum += input[b * g.in_features + i] * weight[i * g.out_features + o];
      }
      output[b * g.out_features + o] = sum;
    }
  }
}

void dense_backward(const DenseGeometry& g, std::span<const double> input,
                    std::span<const double> weight, std::span<const double> grad_output,
                    std::span<double> grad_input, std::span<double> grad_weight,
                    std::span<double> grad_bias) {
  check_size(input.size(), g.batch * g.in_features, "dense input");
  check_size(weight.size(), g.in_features * g.out_features, "dense weight");
  check_size(grad_output.size(), g.batch * g.out_features, "dense grad_output");
  check_size(grad_weight.size(), g.in_features * g.out_features, "dense grad_weight");
  check_size(grad_bias.size(), g.out_features, "dense grad_bias");
  const bool want_input = !grad_input.empty();
  if (want_input) check_size(grad_input.size(), g.batch * g.in_features, "dense grad_input");

  std::fill(grad_weight.begin(), grad_weight.end(), 0.0);
  std::fill(grad_bias.begin(), grad_bias.end(), 0.0);
  std::fill(grad_input.begin(), grad_input.end(), 0.0);
  for (std::size_t b = 0; b < g.batch; ++b) {
    for (std::size_t o = 0; o < g.out_features; ++o) {
      const double go = grad_output[b * g.out_features + o];
      grad_bias[o] += go;
      for (std::size_t i = 0; i < g.in_features; ++i) {
        grad_weight[i * g.out_features + o] += input[b * g.in_features + i] * go;
        if (want_input) grad_input[b * g.in_features + i] += weight[i * g.out_features + o] * go;
      }
    }
  }
}

}  // namespace reference
}  // namespace ohdqn::kernels
