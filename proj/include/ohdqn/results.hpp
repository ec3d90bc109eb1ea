#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ohdqn/config.hpp"
#include "ohdqn/experiment.hpp"

namespace ohdqn {

// Per-epoch sample mean and sample standard deviation across seeds.
struct AggregateCurve {
  std::vector<std::uint64_t> epochs;
  std::vector<double> mean;
  std::vector<double> stddev;
  bool operator==(const AggregateCurve&) const = default;
};

// Needs at least two runs with matching epoch sequences; throws
// std::invalid_argument otherwise.
AggregateCurve aggregate(const std::vector<std::vector<EpochRecord>>& runs);

// Per-run score table: epoch,avg_score.
struct ScoreRow {
  std::uint64_t epoch = 0;
  double avg_score = 0.0;
  bool operator==(const ScoreRow&) const = default;
};

std::vector<ScoreRow> score_rows(const std::vector<EpochRecord>& records);

// CSV writers emit `# ` provenance comment lines, then a header row, then data.
std::string scores_csv(const std::vector<ScoreRow>& rows, const std::string& provenance);
std::string details_csv(const std::vector<EpochRecord>& records, const std::string& provenance);
std::string aggregate_csv(const AggregateCurve& curve, const std::string& provenance);

// Parsers skip comment lines and check the header. Throw std::runtime_error
// on malformed input.
std::vector<ScoreRow> parse_scores_csv(const std::string& text);
AggregateCurve parse_aggregate_csv(const std::string& text);
// Accepts either table; a score table becomes a zero-width band.
AggregateCurve parse_curve_csv(const std::string& text);

struct NamedCurve {
  std::string label;
  AggregateCurve curve;
};

// Learning-curve plot: one mean <path> per curve over a translucent
// +/- one standard deviation band.
std::string render_svg(const std::vector<NamedCurve>& curves, const std::string& title,
                       const std::string& provenance);

std::string read_text(const std::filesystem::path& path);
// Writes via a temporary file and rename.
void write_text(const std::filesystem::path& path, const std::string& text);

// scores.csv, details.csv, config.txt and checkpoint.bin under `dir`.
void write_run_outputs(const std::filesystem::path& dir, const RunConfig& config, const RunResult& result);

}  // namespace ohdqn
