#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ohdqn/agent.hpp"
#include "ohdqn/catch_env.hpp"
#include "ohdqn/network.hpp"
#include "ohdqn/supervisor.hpp"

namespace ohdqn {

enum class RoutingSource { Oracle, Classifier };

std::string to_string(RoutingSource routing);
RoutingSource parse_routing(const std::string& text);

// One training run. Every field round-trips through the key = value text
// format and is embedded in each output file.
struct RunConfig {
  VariantKind variant = VariantKind::Standard;
  catch_game::TransferMode mode = catch_game::TransferMode::Positive;
  std::size_t capacity = 32;
  std::uint64_t seed = 0;
  std::uint64_t epochs = 30;
  std::uint64_t steps_per_epoch = 10000;
  std::uint64_t warmup_steps = 10000;
  std::uint64_t validation_steps = 6000;

  // Unset means the default for the variant and mode: 1.25e-4 for the
  // standard and half networks under negative transfer, 2.5e-4 otherwise.
  std::optional<double> learning_rate;
  double gamma = 0.99;
  std::size_t batch_size = 32;
  std::uint64_t train_period = 4;
  std::uint64_t target_sync_period = 4;
  std::size_t replay_capacity = 10000;
  double epsilon_start = 1.0;
  double epsilon_final = 0.01;
  std::uint64_t epsilon_anneal_steps = 10000;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  double max_grad_norm = 10.0;

  RoutingSource routing = RoutingSource::Classifier;
  std::size_t supervisor_hidden = 32;
  std::size_t supervisor_batch_size = 32;
  std::uint64_t supervisor_train_period = 4;
  std::size_t supervisor_capacity = 1000;
  double supervisor_learning_rate = 2.5e-4;

  double grey_intensity = 0.5;
  std::string output_dir = "runs";

  double effective_learning_rate() const;
  AgentVariant agent_variant() const;
  AgentConfig agent_config() const;
  SupervisorConfig supervisor_config() const;
  catch_game::Intensities colors() const;

  // Throws std::invalid_argument describing the first bad field.
  void validate() const;

  bool operator==(const RunConfig&) const = default;
};

// Keys in serialization order.
const std::vector<std::string>& config_keys();
std::string get_field(const RunConfig& config, const std::string& key);
// Throws std::invalid_argument for unknown keys or unparsable values.
void set_field(RunConfig& config, const std::string& key, const std::string& value);

std::string to_config_text(const RunConfig& config);
// Lines of `key = value`; blank lines and `#` comments are ignored.
RunConfig parse_config_text(const std::string& text, RunConfig base = {});
RunConfig load_config(const std::filesystem::path& path, RunConfig base = {});

// `# `-prefixed provenance block: code version followed by every field.
std::string provenance_header(const RunConfig& config);

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);
double parse_double(const std::string& text);

}  // namespace ohdqn
