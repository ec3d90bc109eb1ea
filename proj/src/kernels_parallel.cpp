#include <Eigen/Core>
#include <algorithm>
#include <cstdint>
#include <vector>

#include "kernels_detail.hpp"
#include "ohdqn/kernels.hpp"
#include "ohdqn/tensor.hpp"

namespace ohdqn::kernels::parallel {

using detail::check_size;

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;
using Index = Eigen::Index;
using ohdqn::AlignedBuffer;

// Scratch reused across calls on the calling thread.
struct Scratch {
  AlignedBuffer cols;
  AlignedBuffer grad_rows;
  AlignedBuffer grad_cols;
};

Scratch& scratch() {
  thread_local Scratch s;
  return s;
}

std::size_t patch_size(const ConvGeometry& g) { return g.in_channels * g.kernel * g.kernel; }
std::size_t positions(const ConvGeometry& g) { return g.out_height() * g.out_width(); }

// cols[(b, oy, ox)][(ic, kh, kw)]
void im2col(const ConvGeometry& g, std::span<const double> input, AlignedBuffer& cols) {
  const std::size_t oh = g.out_height(), ow = g.out_width(), k = g.kernel;
  const std::size_t patch = patch_size(g), pos = positions(g);
  cols.resize(g.batch * pos * patch);
  const auto ih = static_cast<long>(g.in_height), iw = static_cast<long>(g.in_width);
  const auto pad = static_cast<long>(g.pad);
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < static_cast<std::int64_t>(g.batch); ++b) {
    const double* in_b = input.data() + b * g.in_channels * g.in_height * g.in_width;
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        double* row = cols.data() + ((b * pos) + oy * ow + ox) * patch;
        const long y0 = static_cast<long>(oy * g.stride) - pad;
        const long x0 = static_cast<long>(ox * g.stride) - pad;
        for (std::size_t ic = 0; ic < g.in_channels; ++ic) {
          const double* plane = in_b + ic * g.in_height * g.in_width;
          for (std::size_t kh = 0; kh < k; ++kh) {
            const long y = y0 + static_cast<long>(kh);
            double* dst = row + (ic * k + kh) * k;
            if (y < 0 || y >= ih) {
              std::fill(dst, dst + k, 0.0);
              continue;
            }
            if (x0 >= 0 && x0 + static_cast<long>(k) <= iw) {
              std::copy_n(plane + y * iw + x0, k, dst);
              continue;
            }
            for (std::size_t kw = 0; kw < k; ++kw) {
              const long x = x0 + static_cast<long>(kw);
              dst[kw] = (x < 0 || x >= iw) ? 0.0 : plane[y * iw + x];
            }
          }
        }
      }
    }
  }
}

void col2im(const ConvGeometry& g, const AlignedBuffer& cols, std::span<double> grad_input) {
  const std::size_t oh = g.out_height(), ow = g.out_width(), k = g.kernel;
  const std::size_t patch = patch_size(g), pos = positions(g);
  const auto ih = static_cast<long>(g.in_height), iw = static_cast<long>(g.in_width);
  const auto pad = static_cast<long>(g.pad);
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < static_cast<std::int64_t>(g.batch); ++b) {
    double* in_b = grad_input.data() + b * g.in_channels * g.in_height * g.in_width;
    std::fill(in_b, in_b + g.in_channels * g.in_height * g.in_width, 0.0);
    for (std::size_t oy = 0; oy < oh; ++oy) {
      for (std::size_t ox = 0; ox < ow; ++ox) {
        const double* row = cols.data() + ((b * pos) + oy * ow + ox) * patch;
        const long y0 = static_cast<long>(oy * g.stride) - pad;
        const long x0 = static_cast<long>(ox * g.stride) - pad;
        for (std::size_t ic = 0; ic < g.in_channels; ++ic) {
          double* plane = in_b + ic * g.in_height * g.in_width;
          for (std::size_t kh = 0; kh < k; ++kh) {
            const long y = y0 + static_cast<long>(kh);
            if (y < 0 || y >= ih) continue;
            const double* src = row + (ic * k + kh) * k;
            if (x0 >= 0 && x0 + static_cast<long>(k) <= iw) {
              double* dst = plane + y * iw + x0;
              for (std::size_t kw = 0; kw < k; ++kw) dst[kw] += src[kw];
              continue;
            }
            for (std::size_t kw = 0; kw < k; ++kw) {
              const long x = x0 + static_cast<long>(kw);
              if (x >= 0 && x < iw) plane[y * iw + x] += src[kw];
            }
          }
        }
      }
    }
  }
}

// grad_rows[(b, p)][oc] = grad_output[b][oc][p]
void gather_output_grad(const ConvGeometry& g, std::span<const double> grad_output,
                        AlignedBuffer& grad_rows) {
  const std::size_t pos = positions(g), oc_n = g.out_channels;
  grad_rows.resize(g.batch * pos * oc_n);
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < static_cast<std::int64_t>(g.batch); ++b) {
    for (std::size_t oc = 0; oc < oc_n; ++oc) {
      const double* src = grad_output.data() + (b * oc_n + oc) * pos;
      for (std::size_t p = 0; p < pos; ++p) grad_rows[(b * pos + p) * oc_n + oc] = src[p];
    }
  }
}

struct Nonzero {
  std::uint32_t channel;
  std::uint32_t y;
  std::uint32_t x;
  double value;
};

std::vector<std::vector<Nonzero>> collect_nonzeros(const ConvGeometry& g,
                                                   std::span<const double> input) {
  std::vector<std::vector<Nonzero>> out(g.batch);
  const std::size_t plane = g.in_height * g.in_width;
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < static_cast<std::int64_t>(g.batch); ++b) {
    const double* in_b = input.data() + b * g.in_channels * plane;
    for (std::size_t i = 0; i < g.in_channels * plane; ++i) {
      if (in_b[i] != 0.0) {
        const auto c = static_cast<std::uint32_t>(i / plane);
        const auto r = i % plane;
        out[b].push_back({c, static_cast<std::uint32_t>(r / g.in_width),
                          static_cast<std::uint32_t>(r % g.in_width), in_b[i]});
      }
    }
  }
  return out;
}

// Output positions along one axis whose receptive field covers input
// coordinate `coord`: [first, last] inclusive; empty when first > last.
struct Span1d {
  long first;
  long last;
};

Span1d covering(long coord, long pad, long kernel, long stride, long out_extent) {
  const long hi = coord + pad;  // oy * stride <= hi
  const long lo = hi - (kernel - 1);  // oy * stride >= lo
  long first = lo <= 0 ? 0 : (lo + stride - 1) / stride;
  long last = std::min(out_extent - 1, hi / stride);
  return {first, last};
}

double density(std::span<const double> input) {
  if (input.empty()) return 0.0;
  const auto nz = std::count_if(input.begin(), input.end(), [](double v) { return v != 0.0; });
  return static_cast<double>(nz) / static_cast<double>(input.size());
}

void check_conv(const ConvGeometry& g, std::span<const double> input, std::span<const double> weight) {
  g.validate();
  check_size(input.size(), g.input_size(), "conv input");
  check_size(weight.size(), g.weight_size(), "conv weight");
}

}  // namespace

void conv2d_forward_gemm(const ConvGeometry& g, std::span<const double> input,
                         std::span<const double> weight, std::span<const double> bias,
                         std::span<double> output) {
  check_conv(g, input, weight);
  check_size(bias.size(), g.out_channels, "conv bias");
  check_size(output.size(), g.output_size(), "conv output");
  auto& s = scratch();
  im2col(g, input, s.cols);
  const auto rows = static_cast<Index>(g.batch * positions(g));
  const auto patch = static_cast<Index>(patch_size(g));
  const auto oc_n = static_cast<Index>(g.out_channels);
  s.grad_rows.resize(static_cast<std::size_t>(rows * oc_n));
  MutMap z(s.grad_rows.data(), rows, oc_n);
  z.noalias() = ConstMap(s.cols.data(), rows, patch) * ConstMap(weight.data(), oc_n, patch).transpose();

  const std::size_t pos = positions(g);
  const double* zp = s.grad_rows.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < static_cast<std::int64_t>(g.batch); ++b) {
    for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
      double* dst = output.data() + (b * g.out_channels + oc) * pos;
      for (std::size_t p = 0; p < pos; ++p) dst[p] = zp[(b * pos + p) * g.out_channels + oc] + bias[oc];
    }
  }
}

void conv2d_forward_sparse(const ConvGeometry& g, std::span<const double> input,
                           std::span<const double> weight, std::span<const double> bias,
                           std::span<double> output) {
  check_conv(g, input, weight);
  check_size(bias.size(), g.out_channels, "conv bias");
  check_size(output.size(), g.output_size(), "conv output");
  const auto nonzeros = collect_nonzeros(g, input);
  const long oh = static_cast<long>(g.out_height()), ow = static_cast<long>(g.out_width());
  const long k = static_cast<long>(g.kernel), stride = static_cast<long>(g.stride);
  const long pad = static_cast<long>(g.pad);
  const std::size_t pos = positions(g), oc_n = g.out_channels, patch = patch_size(g);

  // Accumulate in [position][channel] against [patch][channel] weights so the
  // innermost loop runs over contiguous channels.
  AlignedBuffer weight_t(patch * oc_n);
  MutMap(weight_t.data(), static_cast<Index>(patch), static_cast<Index>(oc_n)) =
      ConstMap(weight.data(), static_cast<Index>(oc_n), static_cast<Index>(patch)).transpose();

#pragma omp parallel
  {
    AlignedBuffer acc(pos * oc_n);
#pragma omp for schedule(static)
    for (std::int64_t b = 0; b < static_cast<std::int64_t>(g.batch); ++b) {
      for (std::size_t p = 0; p < pos; ++p) std::copy(bias.begin(), bias.end(), acc.begin() + p * oc_n);
      for (const Nonzero& nz : nonzeros[b]) {
        const Span1d rows = covering(nz.y, pad, k, stride, oh);
        const Span1d cols = covering(nz.x, pad, k, stride, ow);
        for (long oy = rows.first; oy <= rows.last; ++oy) {
          const long kh = static_cast<long>(nz.y) + pad - oy * stride;
          for (long ox = cols.first; ox <= cols.last; ++ox) {
            const long kw = static_cast<long>(nz.x) + pad - ox * stride;
            const double* w = weight_t.data() + ((nz.channel * g.kernel + kh) * g.kernel + kw) * oc_n;
            double* dst = acc.data() + (oy * ow + ox) * oc_n;
            for (std::size_t oc = 0; oc < oc_n; ++oc) dst[oc] += w[oc] * nz.value;
          }
        }
      }
      MutMap(output.data() + b * oc_n * pos, static_cast<Index>(oc_n), static_cast<Index>(pos)) =
          ConstMap(acc.data(), static_cast<Index>(pos), static_cast<Index>(oc_n)).transpose();
    }
  }
}

void conv2d_weight_grad_gemm(const ConvGeometry& g, std::span<const double> input,
                             std::span<const double> grad_output, std::span<double> grad_weight) {
  g.validate();
  check_size(input.size(), g.input_size(), "conv input");
  check_size(grad_output.size(), g.output_size(), "conv grad_output");
  check_size(grad_weight.size(), g.weight_size(), "conv grad_weight");
  auto& s = scratch();
  im2col(g, input, s.cols);
  gather_output_grad(g, grad_output, s.grad_rows);
  const auto rows = static_cast<Index>(g.batch * positions(g));
  const auto patch = static_cast<Index>(patch_size(g));
  const auto oc_n = static_cast<Index>(g.out_channels);
  MutMap(grad_weight.data(), oc_n, patch).noalias() =
      ConstMap(s.grad_rows.data(), rows, oc_n).transpose() * ConstMap(s.cols.data(), rows, patch);
}

void conv2d_weight_grad_sparse(const ConvGeometry& g, std::span<const double> input,
                               std::span<const double> grad_output, std::span<double> grad_weight) {
  g.validate();
  check_size(input.size(), g.input_size(), "conv input");
  check_size(grad_output.size(), g.output_size(), "conv grad_output");
  check_size(grad_weight.size(), g.weight_size(), "conv grad_weight");
  const auto nonzeros = collect_nonzeros(g, input);
  const long oh = static_cast<long>(g.out_height()), ow = static_cast<long>(g.out_width());
  const long k = static_cast<long>(g.kernel), stride = static_cast<long>(g.stride);
  const long pad = static_cast<long>(g.pad);
  const std::size_t pos = positions(g), oc_n = g.out_channels, patch = patch_size(g);
  const std::size_t channel_patch = g.kernel * g.kernel;
  auto& s = scratch();
  gather_output_grad(g, grad_output, s.grad_rows);
  s.grad_cols.assign(patch * oc_n, 0.0);
  double* grad_t = s.grad_cols.data();
  const double* rows_p = s.grad_rows.data();

  // Each thread owns whole input channels, i.e. disjoint rows of the
  // transposed gradient, and walks the batch in order, so the summation order
  // does not depend on the thread count.
#pragma omp parallel for schedule(static)
  for (std::int64_t ic = 0; ic < static_cast<std::int64_t>(g.in_channels); ++ic) {
    for (std::size_t b = 0; b < g.batch; ++b) {
      for (const Nonzero& nz : nonzeros[b]) {
        if (nz.channel != static_cast<std::uint32_t>(ic)) continue;
        const Span1d rows = covering(nz.y, pad, k, stride, oh);
        const Span1d cols = covering(nz.x, pad, k, stride, ow);
        for (long oy = rows.first; oy <= rows.last; ++oy) {
          const long kh = static_cast<long>(nz.y) + pad - oy * stride;
          for (long ox = cols.first; ox <= cols.last; ++ox) {
            const long kw = static_cast<long>(nz.x) + pad - ox * stride;
            double* dst = grad_t + (ic * channel_patch + kh * g.kernel + kw) * oc_n;
            const double* src = rows_p + (b * pos + oy * ow + ox) * oc_n;
            for (std::size_t oc = 0; oc < oc_n; ++oc) dst[oc] += src[oc] * nz.value;
          }
        }
      }
    }
  }
  MutMap(grad_weight.data(), static_cast<Index>(oc_n), static_cast<Index>(patch)) =
      ConstMap(grad_t, static_cast<Index>(patch), static_cast<Index>(oc_n)).transpose();
}

void conv2d_forward(const ConvGeometry& g, std::span<const double> input,
                    std::span<const double> weight, std::span<const double> bias,
                    std::span<double> output) {
  if (density(input) < kSparseDensity) {
    conv2d_forward_sparse(g, input, weight, bias, output);
  } else {
    conv2d_forward_gemm(g, input, weight, bias, output);
  }
}

void conv2d_backward(const ConvGeometry& g, std::span<const double> input,
                     std::span<const double> weight, std::span<const double> grad_output,
                     std::span<double> grad_input, std::span<double> grad_weight,
                     std::span<double> grad_bias) {
  check_conv(g, input, weight);
  check_size(grad_output.size(), g.output_size(), "conv grad_output");
  check_size(grad_bias.size(), g.out_channels, "conv grad_bias");
  const bool want_input = !grad_input.empty();
  if (want_input) check_size(grad_input.size(), g.input_size(), "conv grad_input");

  const std::size_t pos = positions(g);
  for (std::size_t oc = 0; oc < g.out_channels; ++oc) {
    double sum = 0.0;
    for (std::size_t b = 0; b < g.batch; ++b) {
      const double* go = grad_output.data() + (b * g.out_channels + oc) * pos;
      for (std::size_t p = 0; p < pos; ++p) sum += go[p];
    }
    grad_bias[oc] = sum;
  }

  if (density(input) < kSparseDensity) {
    conv2d_weight_grad_sparse(g, input, grad_output, grad_weight);
  } else {
    conv2d_weight_grad_gemm(g, input, grad_output, grad_weight);
  }
  if (!want_input) return;

  auto& s = scratch();
  gather_output_grad(g, grad_output, s.grad_rows);
  const auto rows = static_cast<Index>(g.batch * pos);
  const auto patch = static_cast<Index>(patch_size(g));
  const auto oc_n = static_cast<Index>(g.out_channels);
  s.grad_cols.resize(static_cast<std::size_t>(rows * patch));
  MutMap(s.grad_cols.data(), rows, patch).noalias() =
      ConstMap(s.grad_rows.data(), rows, oc_n) * ConstMap(weight.data(), oc_n, patch);
  col2im(g, s.grad_cols, grad_input);
}

void dense_forward(const DenseGeometry& g, std::span<const double> input,
                   std::span<const double> weight, std::span<const double> bias,
                   std::span<double> output) {
  check_size(input.size(), g.batch * g.in_features, "dense input");
  check_size(weight.size(), g.in_features * g.out_features, "dense weight");
  check_size(bias.size(), g.out_features, "dense bias");
  check_size(output.size(), g.batch * g.out_features, "dense output");
  const auto n = static_cast<Index>(g.batch), in = static_cast<Index>(g.in_features),
             out = static_cast<Index>(g.out_features);
  MutMap y(output.data(), n, out);
  y.noalias() = ConstMap(input.data(), n, in) * ConstMap(weight.data(), in, out);
  y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bias.data(), out);
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
  const auto n = static_cast<Index>(g.batch), in = static_cast<Index>(g.in_features),
             out = static_cast<Index>(g.out_features);
  ConstMap dy(grad_output.data(), n, out);
  MutMap(grad_weight.data(), in, out).noalias() = ConstMap(input.data(), n, in).transpose() * dy;
  Eigen::Map<Eigen::RowVectorXd>(grad_bias.data(), out) = dy.colwise().sum();
  if (!grad_input.empty()) {
    check_size(grad_input.size(), g.batch * g.in_features, "dense grad_input");
    MutMap(grad_input.data(), n, in).noalias() = dy * ConstMap(weight.data(), in, out).transpose();
  }
}

}  // namespace ohdqn::kernels::parallel
