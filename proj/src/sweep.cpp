#include "ohdqn/sweep.hpp"

#include <map>
#include <sstream>
#include <stdexcept>

#include "ohdqn/results.hpp"

namespace ohdqn {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string strip_output_dir(RunConfig c) {
  c.output_dir.clear();
  return to_config_text(c);
}

}  // namespace

SweepGrid parse_grid_text(const std::string& text) {
  SweepGrid grid;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw std::invalid_argument("grid line '" + line + "': expected key = values");
    SweepAxis axis{trim(line.substr(0, eq)), {}};
    std::istringstream values(line.substr(eq + 1));
    std::string v;
    while (std::getline(values, v, ',')) {
      v = trim(v);
      if (!v.empty()) axis.values.push_back(v);
    }
    RunConfig probe;
    for (const auto& value : axis.values) set_field(probe, axis.key, value);
    if (axis.values.empty()) throw std::invalid_argument("grid axis '" + axis.key + "' has no values");
    grid.push_back(std::move(axis));
  }
  return grid;
}

std::vector<RunConfig> expand_grid(const RunConfig& base, const SweepGrid& grid) {
  std::vector<RunConfig> cells = {base};
  for (const auto& axis : grid) {
    std::vector<RunConfig> next;
    for (const auto& cell : cells) {
      for (const auto& value : axis.values) {
        RunConfig c = cell;
        set_field(c, axis.key, value);
        next.push_back(std::move(c));
      }
    }
    cells = std::move(next);
  }
  return cells;
}

std::string cell_name(const RunConfig& config, const SweepGrid& grid) {
  if (grid.empty()) return "base";
  std::string name;
  for (const auto& axis : grid) {
    if (!name.empty()) name += "__";
    name += axis.key + "=" + get_field(config, axis.key);
  }
  return name;
}

bool cell_complete(const std::filesystem::path& dir, const RunConfig& config) {
  if (!std::filesystem::exists(dir / "DONE") || !std::filesystem::exists(dir / "config.txt")) return false;
  try {
    return strip_output_dir(parse_config_text(read_text(dir / "config.txt"))) == strip_output_dir(config);
  } catch (const std::exception&) {
    return false;
  }
}

std::vector<EpochRecord> load_records(const std::filesystem::path& dir) {
  std::istringstream in(read_text(dir / "details.csv"));
  std::string line;
  std::vector<EpochRecord> records;
  bool header = false;
  auto cell = [](const std::string& s) {
    return s == "nan" ? std::numeric_limits<double>::quiet_NaN() : parse_double(s);
  };
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      header = true;
      continue;
    }
    std::vector<std::string> f;
    std::istringstream cs(line);
    std::string c;
    while (std::getline(cs, c, ',')) f.push_back(c);
    if (f.size() != 7) throw std::runtime_error("malformed details row in " + dir.string());
    EpochRecord r;
    r.epoch = std::stoull(f[0]);
    r.avg_score = cell(f[1]);
    r.episodes = std::stoull(f[2]);
    r.mean_loss = cell(f[3]);
    r.routing_accuracy = cell(f[4]);
    r.oracle_score = cell(f[5]);
    r.classifier_score = cell(f[6]);
    records.push_back(r);
  }
  return records;
}

std::vector<CellOutcome> sweep(const RunConfig& base, const SweepGrid& grid, const SweepOptions& options,
                               const Runner& runner) {
  const auto configs = expand_grid(base, grid);
  std::vector<CellOutcome> outcomes(configs.size());
  for (std::size_t i = 0; i < configs.size(); ++i) {
    outcomes[i].dir = options.root / cell_name(configs[i], grid);
    outcomes[i].config = configs[i];
    outcomes[i].config.output_dir = outcomes[i].dir.string();
    outcomes[i].config.validate();
  }
  const Runner run_cell = runner ? runner : [](const RunConfig& c) { return run(c); };

#pragma omp parallel for schedule(dynamic) num_threads(options.jobs > 0 ? options.jobs : 1)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(outcomes.size()); ++i) {
    CellOutcome& cell = outcomes[i];
    if (cell_complete(cell.dir, cell.config)) {
      cell.status = CellStatus::Skipped;
      continue;
    }
    try {
      std::filesystem::remove(cell.dir / "FAILED");
      const RunResult result = run_cell(cell.config);
      write_run_outputs(cell.dir, cell.config, result);
      write_text(cell.dir / "DONE", "");
      cell.status = CellStatus::Completed;
    } catch (const std::exception& e) {
      cell.status = CellStatus::Failed;
      cell.error = e.what();
      try {
        write_text(cell.dir / "FAILED", cell.error + "\n");
      } catch (const std::exception&) {
      }
    }
#pragma omp critical(sweep_log)
    if (options.log) {
      options.log(cell.dir.filename().string() + ": " +
                  (cell.status == CellStatus::Failed ? "failed: " + cell.error : "done"));
    }
  }
  return outcomes;
}

std::vector<std::filesystem::path> summarize_sweep(const std::filesystem::path& root,
                                                   const std::vector<CellOutcome>& outcomes,
                                                   const SweepGrid& grid) {
  // group name -> variant -> runs
  std::map<std::string, std::map<std::string, std::vector<std::vector<EpochRecord>>>> groups;
  std::map<std::string, RunConfig> group_config;
  SweepGrid group_axes;
  for (const auto& axis : grid) {
    if (axis.key != "seed" && axis.key != "variant") group_axes.push_back(axis);
  }
  for (const auto& cell : outcomes) {
    if (cell.status == CellStatus::Failed) continue;
    const std::string group = cell_name(cell.config, group_axes);
    groups[group][to_string(cell.config.variant)].push_back(load_records(cell.dir));
    group_config.emplace(group, cell.config);
  }
  std::vector<std::filesystem::path> written;
  for (const auto& [group, variants] : groups) {
    const auto dir = root / "summary" / group;
    RunConfig prov_config = group_config.at(group);
    std::vector<NamedCurve> curves;
    for (const auto& [variant, runs] : variants) {
      if (runs.size() < 2) continue;
      prov_config.variant = parse_variant_kind(variant);
      const AggregateCurve curve = aggregate(runs);
      const auto path = dir / (variant + ".csv");
      write_text(path, aggregate_csv(curve, provenance_header(prov_config)));
      written.push_back(path);
      curves.push_back({variant, curve});
    }
    if (!curves.empty()) {
      const auto path = dir / "curves.svg";
      write_text(path, render_svg(curves, group, provenance_header(group_config.at(group))));
      written.push_back(path);
    }
  }
  return written;
}

}  // namespace ohdqn
