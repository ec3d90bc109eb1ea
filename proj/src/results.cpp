#include "ohdqn/results.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "ohdqn/checkpoint.hpp"

namespace ohdqn {

AggregateCurve aggregate(const std::vector<std::vector<EpochRecord>>& runs) {
  if (runs.size() < 2) throw std::invalid_argument("aggregate needs at least two runs");
  const std::size_t epochs = runs.front().size();
  for (const auto& r : runs) {
    if (r.size() != epochs) throw std::invalid_argument("aggregate: runs have different epoch counts");
    for (std::size_t e = 0; e < epochs; ++e) {
      if (r[e].epoch != runs.front()[e].epoch) throw std::invalid_argument("aggregate: epoch indices differ");
    }
  }
  AggregateCurve out;
  const double n = static_cast<double>(runs.size());
  for (std::size_t e = 0; e < epochs; ++e) {
    // Summing sorted values makes the result independent of seed order.
    std::vector<double> scores;
    for (const auto& r : runs) scores.push_back(r[e].avg_score);
    std::sort(scores.begin(), scores.end());
    double sum = 0.0;
    for (double s : scores) sum += s;
    const double mean = sum / n;
    double ss = 0.0;
    for (double s : scores) ss += (s - mean) * (s - mean);
    out.epochs.push_back(runs.front()[e].epoch);
    out.mean.push_back(mean);
    out.stddev.push_back(std::sqrt(ss / (n - 1.0)));
  }
  return out;
}

std::vector<ScoreRow> score_rows(const std::vector<EpochRecord>& records) {
  std::vector<ScoreRow> rows;
  for (const auto& r : records) rows.push_back({r.epoch, r.avg_score});
  return rows;
}

namespace {

std::string fmt(double v) { return std::isnan(v) ? "nan" : format_double(v); }

std::vector<std::vector<std::string>> parse_table(const std::string& text, const std::string& header) {
  std::istringstream in(text);
  std::string line;
  bool seen_header = false;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    if (!seen_header) {
      if (line != header) throw std::runtime_error("unexpected CSV header '" + line + "', wanted '" + header + "'");
      seen_header = true;
      continue;
    }
    std::vector<std::string> cells;
    std::istringstream cs(line);
    std::string cell;
    while (std::getline(cs, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  if (!seen_header) throw std::runtime_error("CSV has no header row");
  return rows;
}

std::uint64_t parse_epoch(const std::string& s) {
  try {
    return static_cast<std::uint64_t>(std::stoull(s));
  } catch (const std::exception&) {
    throw std::runtime_error("bad epoch value '" + s + "'");
  }
}

double parse_cell(const std::string& s) {
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  try {
    return parse_double(s);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(e.what());
  }
}

constexpr const char* kScoresHeader = "epoch,avg_score";
constexpr const char* kAggregateHeader = "epoch,mean,std";

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

}  // namespace

std::string scores_csv(const std::vector<ScoreRow>& rows, const std::string& provenance) {
  std::string out = provenance + kScoresHeader + "\n";
  for (const auto& r : rows) out += std::to_string(r.epoch) + "," + fmt(r.avg_score) + "\n";
  return out;
}

std::string details_csv(const std::vector<EpochRecord>& records, const std::string& provenance) {
  std::string out = provenance + "epoch,avg_score,episodes,mean_loss,routing_accuracy,oracle_score,classifier_score\n";
  for (const auto& r : records) {
    out += std::to_string(r.epoch) + "," + fmt(r.avg_score) + "," + std::to_string(r.episodes) + "," +
           fmt(r.mean_loss) + "," + fmt(r.routing_accuracy) + "," + fmt(r.oracle_score) + "," +
           fmt(r.classifier_score) + "\n";
  }
  return out;
}

std::string aggregate_csv(const AggregateCurve& curve, const std::string& provenance) {
  std::string out = provenance + kAggregateHeader + "\n";
  for (std::size_t i = 0; i < curve.epochs.size(); ++i) {
    out += std::to_string(curve.epochs[i]) + "," + fmt(curve.mean[i]) + "," + fmt(curve.stddev[i]) + "\n";
  }
  return out;
}

std::vector<ScoreRow> parse_scores_csv(const std::string& text) {
  std::vector<ScoreRow> rows;
  for (const auto& cells : parse_table(text, kScoresHeader)) {
    if (cells.size() != 2) throw std::runtime_error("score row must have 2 columns");
    rows.push_back({parse_epoch(cells[0]), parse_cell(cells[1])});
  }
  return rows;
}

AggregateCurve parse_aggregate_csv(const std::string& text) {
  AggregateCurve curve;
  for (const auto& cells : parse_table(text, kAggregateHeader)) {
    if (cells.size() != 3) throw std::runtime_error("aggregate row must have 3 columns");
    curve.epochs.push_back(parse_epoch(cells[0]));
    curve.mean.push_back(parse_cell(cells[1]));
    curve.stddev.push_back(parse_cell(cells[2]));
  }
  return curve;
}

AggregateCurve parse_curve_csv(const std::string& text) {
  if (text.find(std::string(kAggregateHeader) + "\n") != std::string::npos) return parse_aggregate_csv(text);
  AggregateCurve curve;
  for (const auto& row : parse_scores_csv(text)) {
    curve.epochs.push_back(row.epoch);
    curve.mean.push_back(row.avg_score);
    curve.stddev.push_back(0.0);
  }
  return curve;
}

std::string render_svg(const std::vector<NamedCurve>& curves, const std::string& title,
                       const std::string& provenance) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};
  constexpr double width = 800, height = 480, left = 70, right = 170, top = 40, bottom = 50;
  double x_max = 1, y_min = 0, y_max = 1;
  for (const auto& c : curves) {
    for (std::size_t i = 0; i < c.curve.epochs.size(); ++i) {
      x_max = std::max(x_max, static_cast<double>(c.curve.epochs[i]));
      y_min = std::min(y_min, c.curve.mean[i] - c.curve.stddev[i]);
      y_max = std::max(y_max, c.curve.mean[i] + c.curve.stddev[i]);
    }
  }
  y_min = std::floor(y_min * 4.0) / 4.0;
  y_max = std::ceil(y_max * 4.0) / 4.0;
  const double plot_w = width - left - right, plot_h = height - top - bottom;
  auto sx = [&](double epoch) { return left + (epoch / x_max) * plot_w; };
  auto sy = [&](double score) { return top + (y_max - score) / (y_max - y_min) * plot_h; };
  auto num = [](double v) {
    std::ostringstream s;
    s.precision(6);
    s << v;
    return s.str();
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
  svg << "<desc>" << xml_escape(provenance) << "</desc>\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << left << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\">" << xml_escape(title)
      << "</text>\n";
  // axes and grid
  svg << "<line x1=\"" << left << "\" y1=\"" << top + plot_h << "\" x2=\"" << left + plot_w << "\" y2=\""
      << top + plot_h << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + plot_h
      << "\" stroke=\"black\"/>\n";
  for (double y = y_min; y <= y_max + 1e-9; y += 0.25) {
    svg << "<line x1=\"" << left << "\" y1=\"" << num(sy(y)) << "\" x2=\"" << left + plot_w << "\" y2=\""
        << num(sy(y)) << "\" stroke=\"#dddddd\"/>\n";
    svg << "<text x=\"" << left - 8 << "\" y=\"" << num(sy(y) + 4)
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << num(y) << "</text>\n";
  }
  const double x_step = std::max(1.0, std::ceil(x_max / 10.0));
  for (double x = 0; x <= x_max + 1e-9; x += x_step) {
    svg << "<text x=\"" << num(sx(x)) << "\" y=\"" << top + plot_h + 16
        << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << num(x) << "</text>\n";
  }
  svg << "<text x=\"" << left + plot_w / 2 << "\" y=\"" << height - 12
      << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">epoch</text>\n";
  svg << "<text x=\"16\" y=\"" << top + plot_h / 2 << "\" font-family=\"sans-serif\" font-size=\"12\""
      << " transform=\"rotate(-90 16 " << top + plot_h / 2 << ")\" text-anchor=\"middle\">average score per episode</text>\n";

  for (std::size_t ci = 0; ci < curves.size(); ++ci) {
    const auto& c = curves[ci].curve;
    const char* color = palette[ci % std::size(palette)];
    if (c.epochs.empty()) continue;
    svg << "<polygon fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\" points=\"";
    for (std::size_t i = 0; i < c.epochs.size(); ++i) {
      svg << num(sx(c.epochs[i])) << ',' << num(sy(c.mean[i] + c.stddev[i])) << ' ';
    }
    for (std::size_t i = c.epochs.size(); i-- > 0;) {
      svg << num(sx(c.epochs[i])) << ',' << num(sy(c.mean[i] - c.stddev[i])) << ' ';
    }
    svg << "\"/>\n";
    svg << "<path fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" d=\"";
    for (std::size_t i = 0; i < c.epochs.size(); ++i) {
      svg << (i ? " L " : "M ") << num(sx(c.epochs[i])) << ' ' << num(sy(c.mean[i]));
    }
    svg << "\"/>\n";
    const double ly = top + 14 + 20.0 * static_cast<double>(ci);
    svg << "<rect x=\"" << width - right + 15 << "\" y=\"" << ly - 9 << "\" width=\"14\" height=\"10\" fill=\""
        << color << "\"/>\n";
    svg << "<text x=\"" << width - right + 35 << "\" y=\"" << ly
        << "\" font-family=\"sans-serif\" font-size=\"12\">" << xml_escape(curves[ci].label) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out << text;
    if (!out.flush()) throw std::runtime_error("failed writing " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_run_outputs(const std::filesystem::path& dir, const RunConfig& config, const RunResult& result) {
  std::filesystem::create_directories(dir);
  const std::string prov = provenance_header(config);
  write_text(dir / "scores.csv", scores_csv(score_rows(result.records), prov));
  write_text(dir / "details.csv", details_csv(result.records, prov));
  write_text(dir / "config.txt", prov + to_config_text(config));
  save_checkpoint(dir / "checkpoint.bin", {config, result.online, result.target, result.supervisor});
}

}  // namespace ohdqn
