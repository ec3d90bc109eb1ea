#include "ohdqn/network.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

namespace ohdqn {

namespace k = kernels;

k::ConvGeometry TrunkSpec::conv1(std::size_t batch) const {
  return {batch, frames, grid, grid, conv1_channels, kernel, stride, conv1_pad};
}

k::ConvGeometry TrunkSpec::conv2(std::size_t batch) const {
  const auto g1 = conv1(batch);
  return {batch, conv1_channels, g1.out_height(), g1.out_width(), conv2_channels, kernel, stride, conv2_pad};
}

std::size_t TrunkSpec::flat_features() const {
  const auto g2 = conv2(1);
  return conv2_channels * g2.out_height() * g2.out_width();
}

void ArchSpec::validate() const {
  if (head_count < 1) throw std::invalid_argument("network needs at least one head");
  if (hidden_units < 1 || outputs < 1) throw std::invalid_argument("head layers must be non-empty");
  if (trunk.frames < 1 || trunk.conv1_channels < 1 || trunk.conv2_channels < 1) {
    throw std::invalid_argument("trunk layers must be non-empty");
  }
  trunk.conv1(1).validate();
  trunk.conv2(1).validate();
}

ArchSpec AgentVariant::arch(std::size_t outputs) const {
  if (capacity != 16 && capacity != 32 && capacity != 64) {
    throw std::invalid_argument("unsupported capacity " + std::to_string(capacity) +
                                " (expected 16, 32 or 64)");
  }
  ArchSpec spec;
  spec.outputs = outputs;
  switch (kind) {
    case VariantKind::Standard:
      spec.head_count = 1;
      spec.hidden_units = capacity;
      break;
    case VariantKind::Half:
      spec.head_count = 1;
      spec.hidden_units = capacity / 2;
      break;
    case VariantKind::OptionHeads:
      if (head_count < 1) throw std::invalid_argument("option-heads variant needs at least one head");
      if (capacity % head_count != 0) {
        throw std::invalid_argument("capacity must divide evenly across option heads");
      }
      spec.head_count = head_count;
      spec.hidden_units = capacity / head_count;
      break;
  }
  return spec;
}

std::string to_string(VariantKind kind) {
  switch (kind) {
    case VariantKind::Standard: return "standard";
    case VariantKind::Half: return "half";
    case VariantKind::OptionHeads: return "option-heads";
  }
  return "?";
}

VariantKind parse_variant_kind(const std::string& text) {
  if (text == "standard") return VariantKind::Standard;
  if (text == "half") return VariantKind::Half;
  if (text == "option-heads" || text == "option_heads") return VariantKind::OptionHeads;
  throw std::invalid_argument("unknown variant '" + text + "'");
}

std::size_t Parameters::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

bool Parameters::all_finite() const {
  for (const auto& t : tensors) {
    if (!t.all_finite()) return false;
  }
  return true;
}

std::string tensor_name(std::size_t index) {
  static const char* trunk[] = {"conv1.weight", "conv1.bias", "conv2.weight", "conv2.bias"};
  static const char* head[] = {"hidden.weight", "hidden.bias", "output.weight", "output.bias"};
  if (index < Parameters::kTrunkTensors) return trunk[index];
  const std::size_t rel = index - Parameters::kTrunkTensors;
  return "head" + std::to_string(rel / Parameters::kTensorsPerHead) + "." +
         head[rel % Parameters::kTensorsPerHead];
}

Parameters zeros_like(const Parameters& params) {
  Parameters out;
  out.tensors.reserve(params.tensors.size());
  for (const auto& t : params.tensors) out.tensors.emplace_back(t.shape());
  return out;
}

Parameters make_parameters(const ArchSpec& arch) {
  arch.validate();
  const auto& t = arch.trunk;
  Parameters p;
  p.tensors.emplace_back(Tensor{t.conv1_channels, t.frames, t.kernel, t.kernel});
  p.tensors.emplace_back(Tensor{t.conv1_channels});
  p.tensors.emplace_back(Tensor{t.conv2_channels, t.conv1_channels, t.kernel, t.kernel});
  p.tensors.emplace_back(Tensor{t.conv2_channels});
  for (std::size_t h = 0; h < arch.head_count; ++h) {
    p.tensors.emplace_back(Tensor{t.flat_features(), arch.hidden_units});
    p.tensors.emplace_back(Tensor{arch.hidden_units});
    p.tensors.emplace_back(Tensor{arch.hidden_units, arch.outputs});
    p.tensors.emplace_back(Tensor{arch.outputs});
  }
  return p;
}

NetworkParams init_network(const AgentVariant& variant, std::uint64_t seed) {
  return init_network(variant.arch(), seed);
}

NetworkParams init_network(const ArchSpec& arch, std::uint64_t seed) {
  NetworkParams net;
  net.arch = arch;
  net.weights = make_parameters(arch);
  std::mt19937_64 rng(seed);
  const auto& t = arch.trunk;
  auto fill_uniform = [&rng](Tensor& w, std::size_t fan_in) {
    const double bound = std::sqrt(1.0 / static_cast<double>(fan_in));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : w.values()) v = dist(rng);
  };
  fill_uniform(net.weights.conv1_weight(), t.frames * t.kernel * t.kernel);
  fill_uniform(net.weights.conv2_weight(), t.conv1_channels * t.kernel * t.kernel);
  for (std::size_t h = 0; h < arch.head_count; ++h) {
    fill_uniform(net.weights.head(h, HeadSlot::HiddenWeight), t.flat_features());
    fill_uniform(net.weights.head(h, HeadSlot::OutputWeight), arch.hidden_units);
  }
  net.adam.first_moment = zeros_like(net.weights);
  net.adam.second_moment = zeros_like(net.weights);
  net.adam.steps.assign(net.weights.tensors.size(), 0);
  return net;
}

Tensor make_batch(const TrunkSpec& trunk, std::size_t batch) {
  return Tensor{batch, trunk.frames, trunk.grid, trunk.grid};
}

namespace {

void conv_forward(Backend backend, const k::ConvGeometry& g, const Tensor& in, const Tensor& w,
                  const Tensor& b, Tensor& out) {
  if (backend == Backend::Reference) {
    k::reference::conv2d_forward(g, in.values(), w.values(), b.values(), out.values());
  } else {
    k::parallel::conv2d_forward(g, in.values(), w.values(), b.values(), out.values());
  }
}

void conv_backward(Backend backend, const k::ConvGeometry& g, const Tensor& in, const Tensor& w,
                   const Tensor& grad_out, std::span<double> grad_in, Tensor& grad_w, Tensor& grad_b) {
  if (backend == Backend::Reference) {
    k::reference::conv2d_backward(g, in.values(), w.values(), grad_out.values(), grad_in,
                                  grad_w.values(), grad_b.values());
  } else {
    k::parallel::conv2d_backward(g, in.values(), w.values(), grad_out.values(), grad_in,
                                 grad_w.values(), grad_b.values());
  }
}

void dense_forward(Backend backend, const k::DenseGeometry& g, std::span<const double> in,
                   const Tensor& w, const Tensor& b, Tensor& out) {
  if (backend == Backend::Reference) {
    k::reference::dense_forward(g, in, w.values(), b.values(), out.values());
  } else {
    k::parallel::dense_forward(g, in, w.values(), b.values(), out.values());
  }
}

void dense_backward(Backend backend, const k::DenseGeometry& g, std::span<const double> in,
                    const Tensor& w, const Tensor& grad_out, std::span<double> grad_in, Tensor& grad_w,
                    Tensor& grad_b) {
  if (backend == Backend::Reference) {
    k::reference::dense_backward(g, in, w.values(), grad_out.values(), grad_in, grad_w.values(),
                                 grad_b.values());
  } else {
    k::parallel::dense_backward(g, in, w.values(), grad_out.values(), grad_in, grad_w.values(),
                                grad_b.values());
  }
}

}  // namespace

ForwardResult forward(const NetworkParams& params, Tensor batch, Backend backend) {
  const ArchSpec& arch = params.arch;
  const TrunkSpec& t = arch.trunk;
  if (batch.rank() != 4 || batch.dim(1) != t.frames || batch.dim(2) != t.grid || batch.dim(3) != t.grid ||
      batch.dim(0) == 0) {
    throw std::invalid_argument("forward: expected batch of shape Bx" + std::to_string(t.frames) + "x" +
                                std::to_string(t.grid) + "x" + std::to_string(t.grid) + ", got " +
                                batch.shape_string());
  }
  const std::size_t n = batch.dim(0);
  const auto g1 = t.conv1(n);
  const auto g2 = t.conv2(n);

  ForwardResult result;
  ForwardCache& c = result.cache;
  c.version = params.version;
  c.arch = arch;
  c.batch = n;
  c.input = std::move(batch);
  c.conv1 = Tensor{n, g1.out_channels, g1.out_height(), g1.out_width()};
  conv_forward(backend, g1, c.input, params.weights.conv1_weight(), params.weights.conv1_bias(), c.conv1);
  k::relu_inplace(c.conv1.values());
  c.conv2 = Tensor{n, g2.out_channels, g2.out_height(), g2.out_width()};
  conv_forward(backend, g2, c.conv1, params.weights.conv2_weight(), params.weights.conv2_bias(), c.conv2);
  k::relu_inplace(c.conv2.values());

  const std::size_t flat = t.flat_features();
  for (std::size_t h = 0; h < arch.head_count; ++h) {
    Tensor hidden{n, arch.hidden_units};
    dense_forward(backend, {n, flat, arch.hidden_units}, c.conv2.values(),
                  params.weights.head(h, HeadSlot::HiddenWeight), params.weights.head(h, HeadSlot::HiddenBias),
                  hidden);
    k::relu_inplace(hidden.values());
    Tensor q{n, arch.outputs};
    dense_forward(backend, {n, arch.hidden_units, arch.outputs}, hidden.values(),
                  params.weights.head(h, HeadSlot::OutputWeight), params.weights.head(h, HeadSlot::OutputBias), q);
    c.hidden.push_back(std::move(hidden));
    result.q.push_back(std::move(q));
  }
  return result;
}

Gradients backward(const NetworkParams& params, const ForwardCache& cache, std::size_t head,
                   const Tensor& grad_output, Backend backend) {
  const ArchSpec& arch = params.arch;
  if (cache.version != params.version || !(cache.arch == arch) || cache.hidden.size() != arch.head_count) {
    throw std::logic_error("backward: forward cache does not match the current parameters");
  }
  if (head >= arch.head_count) {
    throw std::out_of_range("backward: head " + std::to_string(head) + " out of range");
  }
  const std::size_t n = cache.batch;
  if (grad_output.rank() != 2 || grad_output.dim(0) != n || grad_output.dim(1) != arch.outputs) {
    throw std::invalid_argument("backward: output gradient has shape " + grad_output.shape_string());
  }
  const TrunkSpec& t = arch.trunk;
  const std::size_t flat = t.flat_features();

  Gradients grads{zeros_like(params.weights), head};
  Parameters& g = grads.values;

  Tensor d_hidden{n, arch.hidden_units};
  dense_backward(backend, {n, arch.hidden_units, arch.outputs}, cache.hidden[head].values(),
                 params.weights.head(head, HeadSlot::OutputWeight), grad_output, d_hidden.values(),
                 g.head(head, HeadSlot::OutputWeight), g.head(head, HeadSlot::OutputBias));
  k::relu_mask(cache.hidden[head].values(), d_hidden.values());

  Tensor d_flat{n, flat};
  dense_backward(backend, {n, flat, arch.hidden_units}, cache.conv2.values(),
                 params.weights.head(head, HeadSlot::HiddenWeight), d_hidden, d_flat.values(),
                 g.head(head, HeadSlot::HiddenWeight), g.head(head, HeadSlot::HiddenBias));
  k::relu_mask(cache.conv2.values(), d_flat.values());

  Tensor d_conv1(cache.conv1.shape());
  conv_backward(backend, t.conv2(n), cache.conv1, params.weights.conv2_weight(), d_flat, d_conv1.values(),
                g.conv2_weight(), g.conv2_bias());
  k::relu_mask(cache.conv1.values(), d_conv1.values());
  conv_backward(backend, t.conv1(n), cache.input, params.weights.conv1_weight(), d_conv1, {},
                g.conv1_weight(), g.conv1_bias());
  return grads;
}

}  // namespace ohdqn
