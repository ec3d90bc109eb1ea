#include "ohdqn/config.hpp"

#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

#include "ohdqn/version.hpp"

namespace ohdqn {

namespace cg = catch_game;

std::string to_string(RoutingSource routing) {
  return routing == RoutingSource::Oracle ? "oracle" : "classifier";
}

RoutingSource parse_routing(const std::string& text) {
  if (text == "oracle") return RoutingSource::Oracle;
  if (text == "classifier") return RoutingSource::Classifier;
  throw std::invalid_argument("unknown routing source '" + text + "'");
}

std::string format_double(double value) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, r.ptr);
}

double parse_double(const std::string& text) {
  double value = 0.0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), value);
  if (r.ec != std::errc() || r.ptr != text.data() + text.size()) {
    throw std::invalid_argument("not a number: '" + text + "'");
  }
  return value;
}

namespace {

std::uint64_t parse_uint(const std::string& text) {
  std::uint64_t value = 0;
  const auto r = std::from_chars(text.data(), text.data() + text.size(), value);
  if (r.ec != std::errc() || r.ptr != text.data() + text.size()) {
    throw std::invalid_argument("not a non-negative integer: '" + text + "'");
  }
  return value;
}

struct Field {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
};

template <typename T>
Field uint_field(T RunConfig::*member) {
  return {[member](const RunConfig& c) { return std::to_string(c.*member); },
          [member](RunConfig& c, const std::string& v) { c.*member = static_cast<T>(parse_uint(v)); }};
}

Field double_field(double RunConfig::*member) {
  return {[member](const RunConfig& c) { return format_double(c.*member); },
          [member](RunConfig& c, const std::string& v) { c.*member = parse_double(v); }};
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> table = {
      {"variant",
       {[](const RunConfig& c) { return to_string(c.variant); },
        [](RunConfig& c, const std::string& v) { c.variant = parse_variant_kind(v); }}},
      {"mode",
       {[](const RunConfig& c) { return cg::to_string(c.mode); },
        [](RunConfig& c, const std::string& v) { c.mode = cg::parse_transfer_mode(v); }}},
      {"capacity", uint_field(&RunConfig::capacity)},
      {"seed", uint_field(&RunConfig::seed)},
      {"epochs", uint_field(&RunConfig::epochs)},
      {"steps_per_epoch", uint_field(&RunConfig::steps_per_epoch)},
      {"warmup_steps", uint_field(&RunConfig::warmup_steps)},
      {"validation_steps", uint_field(&RunConfig::validation_steps)},
      {"learning_rate",
       {[](const RunConfig& c) { return c.learning_rate ? format_double(*c.learning_rate) : "auto"; },
        [](RunConfig& c, const std::string& v) {
          if (v == "auto") {
            c.learning_rate.reset();
          } else {
            c.learning_rate = parse_double(v);
          }
        }}},
      {"gamma", double_field(&RunConfig::gamma)},
      {"batch_size", uint_field(&RunConfig::batch_size)},
      {"train_period", uint_field(&RunConfig::train_period)},
      {"target_sync_period", uint_field(&RunConfig::target_sync_period)},
      {"replay_capacity", uint_field(&RunConfig::replay_capacity)},
      {"epsilon_start", double_field(&RunConfig::epsilon_start)},
      {"epsilon_final", double_field(&RunConfig::epsilon_final)},
      {"epsilon_anneal_steps", uint_field(&RunConfig::epsilon_anneal_steps)},
      {"adam_beta1", double_field(&RunConfig::adam_beta1)},
      {"adam_beta2", double_field(&RunConfig::adam_beta2)},
      {"adam_epsilon", double_field(&RunConfig::adam_epsilon)},
      {"max_grad_norm", double_field(&RunConfig::max_grad_norm)},
      {"routing",
       {[](const RunConfig& c) { return to_string(c.routing); },
        [](RunConfig& c, const std::string& v) { c.routing = parse_routing(v); }}},
      {"supervisor_hidden", uint_field(&RunConfig::supervisor_hidden)},
      {"supervisor_batch_size", uint_field(&RunConfig::supervisor_batch_size)},
      {"supervisor_train_period", uint_field(&RunConfig::supervisor_train_period)},
      {"supervisor_capacity", uint_field(&RunConfig::supervisor_capacity)},
      {"supervisor_learning_rate", double_field(&RunConfig::supervisor_learning_rate)},
      {"grey_intensity", double_field(&RunConfig::grey_intensity)},
      {"output_dir",
       {[](const RunConfig& c) { return c.output_dir; },
        [](RunConfig& c, const std::string& v) { c.output_dir = v; }}},
  };
  return table;
}

const Field& field(const std::string& key) {
  for (const auto& [name, f] : fields()) {
    if (name == key) return f;
  }
  throw std::invalid_argument("unknown config key '" + key + "'");
}

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

double RunConfig::effective_learning_rate() const {
  if (learning_rate) return *learning_rate;
  const bool single_head = variant == VariantKind::Standard || variant == VariantKind::Half;
  return (single_head && mode == cg::TransferMode::Negative) ? 1.25e-4 : 2.5e-4;
}

AgentVariant RunConfig::agent_variant() const { return {variant, capacity, 2}; }

AgentConfig RunConfig::agent_config() const {
  AgentConfig a;
  a.variant = agent_variant();
  a.gamma = gamma;
  a.batch_size = batch_size;
  a.train_period = train_period;
  a.target_sync_period = target_sync_period;
  a.replay_capacity = replay_capacity;
  a.epsilon = {epsilon_start, epsilon_final, epsilon_anneal_steps, warmup_steps};
  a.optim = {effective_learning_rate(), adam_beta1, adam_beta2, adam_epsilon, max_grad_norm};
  return a;
}

SupervisorConfig RunConfig::supervisor_config() const {
  SupervisorConfig s;
  s.option_count = agent_variant().heads();
  s.hidden_units = supervisor_hidden;
  s.batch_size = supervisor_batch_size;
  s.train_period = supervisor_train_period;
  s.label_capacity = supervisor_capacity;
  s.optim = {supervisor_learning_rate, adam_beta1, adam_beta2, adam_epsilon, max_grad_norm};
  return s;
}

cg::Intensities RunConfig::colors() const {
  cg::Intensities c;
  c.grey = static_cast<float>(grey_intensity);
  return c;
}

void RunConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("invalid config: " + msg); };
  agent_variant().arch();  // capacity check
  if (steps_per_epoch == 0) fail("steps_per_epoch must be positive");
  if (validation_steps == 0 || validation_steps % cg::kEpisodeSteps != 0) {
    fail("validation_steps must be a positive multiple of " + std::to_string(cg::kEpisodeSteps));
  }
  if (effective_learning_rate() <= 0.0) fail("learning_rate must be positive");
  if (gamma < 0.0 || gamma > 1.0) fail("gamma must lie in [0, 1]");
  if (batch_size == 0 || train_period == 0 || target_sync_period == 0) fail("batch and periods must be positive");
  if (replay_capacity < batch_size) fail("replay_capacity must hold a batch");
  if (epsilon_final < 0.0 || epsilon_final > 1.0 || epsilon_start < 0.0 || epsilon_start > 1.0) {
    fail("epsilon values must lie in [0, 1]");
  }
  if (max_grad_norm <= 0.0) fail("max_grad_norm must be positive");
  if (supervisor_batch_size == 0 || supervisor_train_period == 0 || supervisor_capacity < supervisor_batch_size) {
    fail("supervisor batch, period and capacity are inconsistent");
  }
  if (grey_intensity <= 0.0 || grey_intensity >= 1.0) fail("grey_intensity must lie in (0, 1)");
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> k;
    for (const auto& [name, f] : fields()) k.push_back(name);
    return k;
  }();
  return keys;
}

std::string get_field(const RunConfig& config, const std::string& key) { return field(key).get(config); }

void set_field(RunConfig& config, const std::string& key, const std::string& value) {
  try {
    field(key).set(config, value);
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument("config key '" + key + "': " + e.what());
  }
}

std::string to_config_text(const RunConfig& config) {
  std::string out;
  for (const auto& [name, f] : fields()) out += name + " = " + f.get(config) + "\n";
  return out;
}

RunConfig parse_config_text(const std::string& text, RunConfig base) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key = value");
    }
    set_field(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return base;
}

RunConfig load_config(const std::filesystem::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read config file " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), std::move(base));
}

std::string provenance_header(const RunConfig& config) {
  std::string out = std::string("# ohdqn ") + kVersion + " (" + kGitDescribe + ")\n";
  for (const auto& [name, f] : fields()) {
    // Where results land does not affect them; leaving it out keeps reruns
    // into different directories byte-identical.
    if (name == "output_dir") continue;
    out += "# " + name + " = " + f.get(config) + "\n";
  }
  return out;
}

}  // namespace ohdqn
