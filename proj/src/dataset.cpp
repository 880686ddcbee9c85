#include "hitlbo/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "hitlbo/error.hpp"

namespace hitlbo::dataset {

namespace {

enum Column {
  kId, kEnergy, kPulses, kLength, kMicro, kDuty, kVoltage, kScore,
  kDispMean, kDispStd, kLeakMean, kLeakStd, kNumColumns
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  cells.push_back(trim(cur));
  return cells;
}

bool missing(const std::string& cell) { return cell.empty() || cell == "-"; }

std::string where(std::size_t line, const std::string& column) {
  return "line " + std::to_string(line) + ", column '" + column + "'";
}

double number(const std::string& cell, std::size_t line, const std::string& column) {
  double v = 0.0;
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  if (!cell.empty() && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, v);
  if (cell.empty() || ec != std::errc() || ptr != last || !std::isfinite(v)) {
    throw ParseError(where(line, column) + ": '" + cell + "' is not a number");
  }
  return v;
}

std::optional<campaign::Measurement> measurement(const std::vector<std::string>& cells,
                                                 const std::vector<std::string>& names,
                                                 int mean_col, int std_col, std::size_t line) {
  const auto& m = cells[mean_col];
  const auto& s = cells[std_col];
  if (missing(m)) {
    if (!missing(s)) throw ParseError(where(line, names[mean_col]) + ": std given without a mean");
    return std::nullopt;
  }
  if (missing(s) && (m.find("+-") != std::string::npos || m.find("\xC2\xB1") != std::string::npos)) {
    try {
      return campaign::parse_measurement(m);
    } catch (const ParseError& e) {
      throw ParseError(where(line, names[mean_col]) + ": " + e.what());
    }
  }
  campaign::Measurement out;
  out.mean = number(m, line, names[mean_col]);
  out.std = missing(s) ? 0.0 : number(s, line, names[std_col]);
  if (out.std < 0.0) throw ParseError(where(line, names[std_col]) + ": std must be non-negative");
  return out;
}

std::string format(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  return out + "\"";
}

}  // namespace

const std::vector<std::string>& required_columns() {
  static const std::vector<std::string> cols = {
      "condition_id", "radiant_energy_J_cm2", "pulse_count", "pulse_length_ms",
      "micropulse_count", "duty_cycle_pct", "pulse_voltage_V", "conversion_score",
      "dispersion_mean", "dispersion_std", "leakage_mean", "leakage_std"};
  return cols;
}

std::vector<campaign::Observation> parse_dataset(std::istream& in, const ParameterSpace& space) {
  const auto& names = required_columns();
  std::vector<campaign::Observation> rows;
  std::string line;
  std::size_t line_no = 0;
  std::vector<int> index_of(kNumColumns, -1);
  int round_index = -1;
  std::size_t width = 0;
  bool have_header = false;

  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (trim(line).empty()) continue;
    auto cells = split_csv(line);
    if (!have_header) {
      for (std::size_t c = 0; c < cells.size(); ++c) {
        const auto it = std::find(names.begin(), names.end(), cells[c]);
        if (it != names.end()) {
          auto& slot = index_of[it - names.begin()];
          if (slot >= 0) throw ParseError("header repeats column '" + cells[c] + "'");
          slot = static_cast<int>(c);
        } else if (cells[c] == kRoundColumn) {
          if (round_index >= 0) throw ParseError("header repeats column 'round'");
          round_index = static_cast<int>(c);
        } else {
          throw ParseError("line " + std::to_string(line_no) + ": unknown column '" + cells[c] + "'");
        }
      }
      for (int c = 0; c < kNumColumns; ++c) {
        if (index_of[c] < 0) throw ParseError("header is missing column '" + names[c] + "'");
      }
      width = cells.size();
      have_header = true;
      continue;
    }
    if (cells.size() != width) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " + std::to_string(width) +
                       " cells, found " + std::to_string(cells.size()));
    }
    std::vector<std::string> v(kNumColumns);
    for (int c = 0; c < kNumColumns; ++c) v[c] = cells[index_of[c]];

    campaign::Observation o;
    o.id = v[kId];
    if (missing(o.id)) throw ParseError(where(line_no, names[kId]) + ": condition id is required");
    for (std::size_t p = 0; p < kNumParams; ++p) {
      const auto& name = names[kEnergy + p];
      if (missing(v[kEnergy + p])) throw ParseError(where(line_no, name) + ": value is required");
      o.condition.values[p] = number(v[kEnergy + p], line_no, name);
      const auto& spec = space.params[p];
      if (o.condition.values[p] < spec.min - 1e-9 || o.condition.values[p] > spec.max + 1e-9) {
        throw ParseError(where(line_no, name) + ": " + v[kEnergy + p] + " is outside [" +
                         format(spec.min) + ", " + format(spec.max) + "]");
      }
    }
    if (!missing(v[kVoltage])) o.pulse_voltage = number(v[kVoltage], line_no, names[kVoltage]);
    if (!missing(v[kScore])) {
      const double s = number(v[kScore], line_no, names[kScore]);
      if (s < -1.0 - 1e-9 || s > 1.0 + 1e-9) {
        throw ParseError(where(line_no, names[kScore]) + ": score must lie in [-1, 1]");
      }
      o.label = hitl::value_to_nearest_label(s);
    }
    o.dispersion = measurement(v, names, kDispMean, kDispStd, line_no);
    o.leakage = measurement(v, names, kLeakMean, kLeakStd, line_no);
    if (round_index >= 0) o.round_tag = cells[round_index];
    try {
      o.validate();
    } catch (const InvariantError& e) {
      throw InvariantError("line " + std::to_string(line_no) + ": " + e.what());
    }
    rows.push_back(std::move(o));
  }
  return rows;
}

std::vector<campaign::Observation> read_dataset(const std::string& path, const ParameterSpace& space) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open dataset '" + path + "'");
  return parse_dataset(in, space);
}

IngestSummary ingest(campaign::CampaignState& state, std::vector<campaign::Observation> rows,
                     const IngestOptions& options) {
  if (!state.rounds.empty() && state.rounds.back().status != campaign::RoundStatus::Complete) {
    throw StateError("round " + std::to_string(state.rounds.back().index) +
                     " is not complete; finish it before ingesting more data");
  }
  if (!options.round_tags.empty()) {
    std::erase_if(rows, [&](const campaign::Observation& o) {
      return std::find(options.round_tags.begin(), options.round_tags.end(), o.round_tag) ==
             options.round_tags.end();
    });
  }
  campaign::CampaignState next = state;
  IngestSummary summary;
  std::vector<std::string> tags;
  for (const auto& o : rows) {
    if (std::find(tags.begin(), tags.end(), o.round_tag) == tags.end()) tags.push_back(o.round_tag);
  }
  for (const auto& tag : tags) {
    campaign::RoundRecord r;
    r.index = next.rounds.size();
    r.strategy = r.index == 0 ? campaign::RoundStrategy::Lhs
                 : next.config.strategy == acq::Strategy::EhviGreedy
                     ? campaign::RoundStrategy::EhviGreedy
                     : campaign::RoundStrategy::ParetoUcb;
    r.hitl_enabled = r.index != 0 && next.config.hitl;
    r.tag = tag;
    r.ingested = true;
    for (auto& o : rows) {
      if (o.round_tag != tag) continue;
      if (next.has_observation(o.id)) {
        throw InvariantError("condition id '" + o.id + "' is already in the campaign");
      }
      o.round = r.index;
      r.suggested.push_back(o.id);
      summary.functional += o.functional() ? 1 : 0;
      next.observations.push_back(o);
    }
    summary.rounds.push_back(r.index);
    next.rounds.push_back(std::move(r));
  }
  summary.observations = rows.size();
  campaign::refresh_statuses(next);
  next.validate();
  state = std::move(next);
  return summary;
}

std::string to_csv(const std::vector<campaign::Observation>& observations) {
  std::ostringstream out;
  out << kRoundColumn;
  for (const auto& c : required_columns()) out << ',' << c;
  out << '\n';
  auto opt = [](const std::optional<double>& v) { return v ? format(*v) : std::string("-"); };
  for (const auto& o : observations) {
    out << quote(o.round_tag.empty() ? std::to_string(o.round) : o.round_tag) << ',' << quote(o.id);
    for (double v : o.condition.values) out << ',' << format(v);
    out << ',' << opt(o.pulse_voltage) << ','
        << (o.label ? format(hitl::score_to_value(*o.label)) : std::string("-"));
    for (const auto& m : {o.dispersion, o.leakage}) {
      out << ',' << (m ? format(m->mean) : "-") << ',' << (m ? format(m->std) : "-");
    }
    out << '\n';
  }
  return out.str();
}

}  // namespace hitlbo::dataset
