// Command-line front end: train, sweep, evaluate, oracle-check, plot and
// dump-episode.

#include <CLI11.hpp>
#include <cstdio>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include "ohdqn/catch_env.hpp"
#include "ohdqn/checkpoint.hpp"
#include "ohdqn/config.hpp"
#include "ohdqn/experiment.hpp"
#include "ohdqn/results.hpp"
#include "ohdqn/sweep.hpp"
#include "ohdqn/version.hpp"

namespace {

namespace cg = ohdqn::catch_game;
namespace fs = std::filesystem;

// Every RunConfig key as a --key flag; values applied over an optional
// --config file.
struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;

  void attach(CLI::App* app) {
    app->add_option("--config", config_file, "key = value config file")->check(CLI::ExistingFile);
    for (const auto& key : ohdqn::config_keys()) {
      app->add_option("--" + key, values[key], "override '" + key + "'");
    }
  }

  ohdqn::RunConfig resolve() const {
    ohdqn::RunConfig config;
    if (!config_file.empty()) config = ohdqn::load_config(config_file);
    for (const auto& key : ohdqn::config_keys()) {
      const auto it = values.find(key);
      if (it != values.end() && !it->second.empty()) ohdqn::set_field(config, key, it->second);
    }
    config.validate();
    return config;
  }
};

void print_epoch(const ohdqn::EpochRecord& r) {
  std::printf("epoch %3llu  score %+.4f  episodes %llu  loss %.5f", static_cast<unsigned long long>(r.epoch),
              r.avg_score, static_cast<unsigned long long>(r.episodes), r.mean_loss);
  if (!std::isnan(r.routing_accuracy)) {
    std::printf("  routing %.4f  oracle %+.4f  classifier %+.4f", r.routing_accuracy, r.oracle_score,
                r.classifier_score);
  }
  std::printf("  (%.1fs)\n", r.wall_seconds);
  std::fflush(stdout);
}

int cmd_train(const ConfigFlags& flags) {
  const ohdqn::RunConfig config = flags.resolve();
  std::cout << "training " << ohdqn::to_string(config.variant) << " / " << cg::to_string(config.mode)
            << " / capacity " << config.capacity << " / seed " << config.seed << " -> " << config.output_dir
            << "\n";
  const auto result = ohdqn::run(config, print_epoch);
  ohdqn::write_run_outputs(config.output_dir, config, result);
  return 0;
}

int cmd_sweep(const ConfigFlags& flags, const std::string& grid_file, const std::string& root, int jobs) {
  const ohdqn::RunConfig base = flags.resolve();
  const ohdqn::SweepGrid grid = grid_file.empty() ? ohdqn::SweepGrid{} : ohdqn::parse_grid_text(ohdqn::read_text(grid_file));
  ohdqn::SweepOptions options;
  options.root = root;
  options.jobs = jobs;
  options.log = [](const std::string& line) { std::cout << line << std::endl; };
  std::cout << ohdqn::expand_grid(base, grid).size() << " cells under " << root << "\n";
  const auto outcomes = ohdqn::sweep(base, grid, options);
  int failed = 0, skipped = 0;
  for (const auto& o : outcomes) {
    failed += o.status == ohdqn::CellStatus::Failed;
    skipped += o.status == ohdqn::CellStatus::Skipped;
  }
  for (const auto& path : ohdqn::summarize_sweep(root, outcomes, grid)) std::cout << "wrote " << path.string() << "\n";
  std::cout << outcomes.size() << " cells: " << skipped << " skipped, " << failed << " failed\n";
  return failed ? 1 : 0;
}

int cmd_evaluate(const std::string& path, const std::string& routing_text, std::uint64_t steps,
                 std::uint64_t seed_override, bool has_seed) {
  const ohdqn::Checkpoint ck = ohdqn::load_checkpoint(path);
  const auto routing = routing_text.empty() ? ck.config.routing : ohdqn::parse_routing(routing_text);
  const std::uint64_t seed = has_seed ? seed_override : ohdqn::validation_seed(ck.config.seed);
  const auto result = ohdqn::validate(ck.online, ck.supervisor ? &*ck.supervisor : nullptr, ck.config.mode, steps,
                                      routing, seed, ck.config.colors());
  std::printf("avg_score %.6f over %llu episodes (%s routing)\n", result.average_score,
              static_cast<unsigned long long>(result.episodes), ohdqn::to_string(routing).c_str());
  if (result.routed) std::printf("routing_accuracy %.6f\n", result.routing_accuracy());
  return 0;
}

int cmd_oracle_check() {
  bool ok = true;
  for (auto mode : {cg::TransferMode::Positive, cg::TransferMode::Negative}) {
    const double optimal = cg::optimal_episode_score(mode);
    const auto scripted = ohdqn::validate(
        [mode](const ohdqn::PolicyInput& in) { return cg::scripted_action(in.observation, mode); }, mode, 6000, 0);
    std::printf("%-8s optimal %.6f  scripted policy %.6f over %llu episodes\n", cg::to_string(mode).c_str(),
                optimal, scripted.average_score, static_cast<unsigned long long>(scripted.episodes));
    ok = ok && scripted.average_score == optimal;
  }
  return ok ? 0 : 1;
}

int cmd_plot(const std::vector<std::string>& inputs, const std::string& output, const std::string& title) {
  std::vector<ohdqn::NamedCurve> curves;
  for (const auto& spec : inputs) {
    const auto eq = spec.find('=');
    const std::string label = eq == std::string::npos ? fs::path(spec).stem().string() : spec.substr(0, eq);
    const std::string file = eq == std::string::npos ? spec : spec.substr(eq + 1);
    curves.push_back({label, ohdqn::parse_curve_csv(ohdqn::read_text(file))});
  }
  const std::string prov = std::string("# ohdqn ") + ohdqn::kVersion + " (" + ohdqn::kGitDescribe + ")\n";
  ohdqn::write_text(output, ohdqn::render_svg(curves, title, prov));
  std::cout << "wrote " << output << "\n";
  return 0;
}

int cmd_dump_episode(const std::string& mode_text, std::uint64_t episode, std::uint64_t seed,
                     const std::string& policy, const std::string& out_dir) {
  const auto mode = cg::parse_transfer_mode(mode_text);
  cg::CatchEnv env(mode, seed);
  for (std::uint64_t i = 0; i < episode; ++i) env.reset();
  const cg::Observation* obs = &env.reset();
  ohdqn::Rng rng(seed);
  std::uniform_int_distribution<int> random_action(0, 2);
  fs::create_directories(out_dir);
  char name[32];
  double reward = 0.0;
  for (int t = 0;; ++t) {
    std::snprintf(name, sizeof(name), "frame_%02d.pgm", t);
    cg::write_pgm(cg::render(env.state()), fs::path(out_dir) / name);
    if (env.state().terminal()) break;
    const cg::Action a =
        policy == "random" ? static_cast<cg::Action>(random_action(rng)) : cg::scripted_action(*obs, mode);
    reward += env.step(a).reward;
    obs = &env.observation();
  }
  std::cout << cg::to_string(env.state().ball) << " ball, reward " << reward << ", frames in " << out_dir << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Option-head DQN experiments on two-subtask Catch"};
  app.set_version_flag("--version", std::string(ohdqn::kVersion) + " (" + ohdqn::kGitDescribe + ")");
  app.require_subcommand(1);

  ConfigFlags train_flags;
  auto* train = app.add_subcommand("train", "Train one run and write its outputs");
  train_flags.attach(train);

  ConfigFlags sweep_flags;
  std::string grid_file, sweep_root = "sweep";
  int jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "Run the cross product of a parameter grid");
  sweep_flags.attach(sweep);
  sweep->add_option("--grid", grid_file, "grid file: key = v1, v2, ...")->check(CLI::ExistingFile);
  sweep->add_option("--root", sweep_root, "results root directory");
  sweep->add_option("--jobs", jobs, "cells run concurrently")->check(CLI::PositiveNumber);

  std::string checkpoint, routing;
  std::uint64_t eval_steps = 6000, eval_seed = 0;
  auto* evaluate = app.add_subcommand("evaluate", "Score a checkpoint with the greedy policy");
  evaluate->add_option("checkpoint", checkpoint, "checkpoint.bin")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--routing", routing, "oracle or classifier (default: from the run config)");
  evaluate->add_option("--steps", eval_steps, "evaluation steps (multiple of 24)");
  auto* seed_opt = evaluate->add_option("--seed", eval_seed, "evaluation environment seed");

  app.add_subcommand("oracle-check", "Print brute-force optimal scores and check the scripted policy");

  std::vector<std::string> inputs;
  std::string plot_out = "curves.svg", title = "average score per episode";
  auto* plot = app.add_subcommand("plot", "Render CSV learning curves to SVG");
  plot->add_option("inputs", inputs, "[label=]file.csv (scores or aggregate)")->required();
  plot->add_option("-o,--output", plot_out, "SVG path");
  plot->add_option("--title", title, "plot title");

  std::string dump_mode = "negative", dump_policy = "scripted", dump_dir = "episode";
  std::uint64_t dump_episode = 0, dump_seed = 0;
  auto* dump = app.add_subcommand("dump-episode", "Write one episode as PGM frames");
  dump->add_option("--mode", dump_mode, "positive or negative");
  dump->add_option("--episode", dump_episode, "episode index (even: white ball, odd: grey)");
  dump->add_option("--seed", dump_seed, "environment seed");
  dump->add_option("--policy", dump_policy, "scripted or random")->check(CLI::IsMember({"scripted", "random"}));
  dump->add_option("-o,--output", dump_dir, "output directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train->parsed()) return cmd_train(train_flags);
    if (sweep->parsed()) return cmd_sweep(sweep_flags, grid_file, sweep_root, jobs);
    if (evaluate->parsed()) return cmd_evaluate(checkpoint, routing, eval_steps, eval_seed, seed_opt->count() > 0);
    if (app.got_subcommand("oracle-check")) return cmd_oracle_check();
    if (plot->parsed()) return cmd_plot(inputs, plot_out, title);
    if (dump->parsed()) return cmd_dump_episode(dump_mode, dump_episode, dump_seed, dump_policy, dump_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
