#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "ohdqn/kernels.hpp"
#include "ohdqn/tensor.hpp"

namespace ohdqn {

// Convolutional trunk shared by every head. Defaults are the 4x24x24 Catch
// network: two 32-filter 5x5 stride-2 convolutions, the first with 1-pixel
// zero padding.
struct TrunkSpec {
  std::size_t frames = 4;
  std::size_t grid = 24;
  std::size_t conv1_channels = 32;
  std::size_t conv2_channels = 32;
  std::size_t kernel = 5;
  std::size_t stride = 2;
  std::size_t conv1_pad = 1;
  std::size_t conv2_pad = 0;

  kernels::ConvGeometry conv1(std::size_t batch) const;
  kernels::ConvGeometry conv2(std::size_t batch) const;
  std::size_t input_size() const { return frames * grid * grid; }
  // Flattened conv2 activation width (512 for the default trunk).
  std::size_t flat_features() const;

  bool operator==(const TrunkSpec&) const = default;
};

struct ArchSpec {
  TrunkSpec trunk;
  std::size_t head_count = 1;
  std::size_t hidden_units = 32;  // per head
  std::size_t outputs = 3;        // per head

  // Throws std::invalid_argument on a degenerate topology.
  void validate() const;
  bool operator==(const ArchSpec&) const = default;
};

enum class VariantKind { Standard, Half, OptionHeads };

// Capacity is the hidden width of the standard network; the half network
// uses capacity/2 units and each option head capacity/head_count units.
struct AgentVariant {
  VariantKind kind = VariantKind::Standard;
  std::size_t capacity = 32;
  std::size_t head_count = 2;  // OptionHeads only

  std::size_t heads() const { return kind == VariantKind::OptionHeads ? head_count : 1; }
  ArchSpec arch(std::size_t outputs = 3) const;
  bool operator==(const AgentVariant&) const = default;
};

std::string to_string(VariantKind kind);
VariantKind parse_variant_kind(const std::string& text);

enum class HeadSlot : std::size_t { HiddenWeight = 0, HiddenBias = 1, OutputWeight = 2, OutputBias = 3 };

// Flat parameter list: conv1.weight, conv1.bias, conv2.weight, conv2.bias,
// then four tensors per head (hidden weight [flat][hidden], hidden bias,
// output weight [hidden][outputs], output bias).
struct Parameters {
  static constexpr std::size_t kTrunkTensors = 4;
  static constexpr std::size_t kTensorsPerHead = 4;

  std::vector<Tensor> tensors;

  std::size_t head_count() const { return (tensors.size() - kTrunkTensors) / kTensorsPerHead; }
  static std::size_t head_index(std::size_t head, HeadSlot slot) {
    return kTrunkTensors + head * kTensorsPerHead + static_cast<std::size_t>(slot);
  }
  // Head owning tensor `index`, or -1 for trunk tensors.
  static long owner_head(std::size_t index) {
    return index < kTrunkTensors ? -1 : static_cast<long>((index - kTrunkTensors) / kTensorsPerHead);
  }

  Tensor& conv1_weight() { return tensors[0]; }
  Tensor& conv1_bias() { return tensors[1]; }
  Tensor& conv2_weight() { return tensors[2]; }
  Tensor& conv2_bias() { return tensors[3]; }
  const Tensor& conv1_weight() const { return tensors[0]; }
  const Tensor& conv1_bias() const { return tensors[1]; }
  const Tensor& conv2_weight() const { return tensors[2]; }
  const Tensor& conv2_bias() const { return tensors[3]; }
  Tensor& head(std::size_t h, HeadSlot slot) { return tensors[head_index(h, slot)]; }
  const Tensor& head(std::size_t h, HeadSlot slot) const { return tensors[head_index(h, slot)]; }

  std::size_t parameter_count() const;
  bool all_finite() const;
  bool operator==(const Parameters&) const = default;
};

std::string tensor_name(std::size_t index);
Parameters zeros_like(const Parameters& params);
Parameters make_parameters(const ArchSpec& arch);

struct AdamState {
  Parameters first_moment;
  Parameters second_moment;
  std::vector<std::uint64_t> steps;  // per tensor
  bool operator==(const AdamState&) const = default;
};

// Online or target network: weights plus optimizer state. `version` is bumped
// whenever the weights change and guards forward caches against staleness.
struct NetworkParams {
  ArchSpec arch;
  Parameters weights;
  AdamState adam;
  std::uint64_t version = 0;
};

// Throws std::invalid_argument for capacities outside {16, 32, 64} or a
// head count below 1.
NetworkParams init_network(const AgentVariant& variant, std::uint64_t seed);
NetworkParams init_network(const ArchSpec& arch, std::uint64_t seed);

enum class Backend { Parallel, Reference };

struct ForwardCache {
  std::uint64_t version = 0;
  ArchSpec arch;
  std::size_t batch = 0;
  Tensor input;                // B x frames x grid x grid
  Tensor conv1;                // post-ReLU
  Tensor conv2;                // post-ReLU, doubles as the flattened B x flat input
  std::vector<Tensor> hidden;  // per head, post-ReLU
};

struct ForwardResult {
  std::vector<Tensor> q;  // per head, B x outputs
  ForwardCache cache;
};

// Throws std::invalid_argument on a batch shape mismatch.
ForwardResult forward(const NetworkParams& params, Tensor batch, Backend backend = Backend::Parallel);

// Gradients of the trunk and one head; every other head's tensors are zero.
struct Gradients {
  Parameters values;
  std::size_t head = 0;

  bool is_active(std::size_t index) const {
    const long owner = Parameters::owner_head(index);
    return owner < 0 || static_cast<std::size_t>(owner) == head;
  }
};

// Backpropagates `grad_output` (B x outputs) through head `head` and the trunk.
// Throws std::logic_error if `cache` was not produced by `params` at its
// current version, std::out_of_range for a bad head index.
Gradients backward(const NetworkParams& params, const ForwardCache& cache, std::size_t head,
                   const Tensor& grad_output, Backend backend = Backend::Parallel);

// Stacks single observations (each frames*grid*grid values) into a batch.
Tensor make_batch(const TrunkSpec& trunk, std::size_t batch);

}  // namespace ohdqn
