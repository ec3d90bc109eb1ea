#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "ohdqn/config.hpp"
#include "ohdqn/experiment.hpp"

namespace ohdqn {

struct SweepAxis {
  std::string key;
  std::vector<std::string> values;
};

// Axes in declaration order; the last axis varies fastest.
using SweepGrid = std::vector<SweepAxis>;

// Lines of `key = v1, v2, ...`; `#` starts a comment. Unknown keys throw
// std::invalid_argument.
SweepGrid parse_grid_text(const std::string& text);

// Cross product of the grid applied on top of `base`. An empty grid yields
// the base config alone.
std::vector<RunConfig> expand_grid(const RunConfig& base, const SweepGrid& grid);

// Directory name for one cell, e.g. "learning_rate=0.000125__seed=3".
std::string cell_name(const RunConfig& config, const SweepGrid& grid);

enum class CellStatus { Completed, Skipped, Failed };

struct CellOutcome {
  RunConfig config;
  std::filesystem::path dir;
  CellStatus status = CellStatus::Completed;
  std::string error;
};

struct SweepOptions {
  std::filesystem::path root = "sweep";
  int jobs = 1;
  std::function<void(const std::string&)> log;
};

using Runner = std::function<RunResult(const RunConfig&)>;

// Runs every cell not already completed under `root` (a completed cell holds
// a DONE marker and a config matching the cell). Failures are recorded in a
// FAILED file inside the cell and do not stop the sweep. Independent cells
// run concurrently when jobs > 1.
std::vector<CellOutcome> sweep(const RunConfig& base, const SweepGrid& grid, const SweepOptions& options,
                               const Runner& runner = {});

bool cell_complete(const std::filesystem::path& dir, const RunConfig& config);

// Epoch records reloaded from a finished cell's details.csv.
std::vector<EpochRecord> load_records(const std::filesystem::path& dir);

// Aggregates seeds of otherwise identical configurations: writes
// summary/<group>/<variant>.csv and one SVG per group with a curve per
// variant. Returns the written files.
std::vector<std::filesystem::path> summarize_sweep(const std::filesystem::path& root,
                                                   const std::vector<CellOutcome>& outcomes,
                                                   const SweepGrid& grid);

}  // namespace ohdqn
