#include "signbench/mcda.hpp"

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <json.hpp>
#include <sstream>

#include "signbench/error.hpp"

namespace signbench::mcda {

void CriteriaRecord::validate() const {
  if (!(std::isfinite(efficiency) && efficiency > 0.0)) {
    throw ConfigError(fmt::format("{}: efficiency must be positive, got {}", name, efficiency));
  }
  if (!(accuracy >= 0.0 && accuracy <= 1.0)) {
    throw ConfigError(fmt::format("{}: accuracy {} outside [0, 1]", name, accuracy));
  }
  if (!(generalizability >= 0.0 && generalizability <= 1.0)) {
    throw ConfigError(fmt::format("{}: generalizability {} outside [0, 1]", name, generalizability));
  }
}

Weights Weights::normalized() const {
  if (!(efficiency >= 0.0 && accuracy >= 0.0 && generalizability >= 0.0)) {
    throw ConfigError("criterion weights must be non-negative");
  }
  const double total = efficiency + accuracy + generalizability;
  if (!(total > 0.0) || !std::isfinite(total)) throw ConfigError("criterion weights must have a positive sum");
  return {efficiency / total, accuracy / total, generalizability / total};
}

std::vector<double> normalize_minmax(std::span<const double> values) {
  if (values.empty()) throw ConfigError("cannot normalize an empty column");
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  const double min = *lo, max = *hi;
  std::vector<double> out(values.size(), 1.0);
  if (max == min) return out;
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = (values[i] - min) / (max - min);
  return out;
}

std::vector<double> normalize_ratio(std::span<const double> values) {
  if (values.empty()) throw ConfigError("cannot normalize an empty column");
  const double max = *std::max_element(values.begin(), values.end());
  if (!(max > 0.0)) throw ConfigError("ratio normalization needs a positive maximum");
  std::vector<double> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) out[i] = values[i] / max;
  return out;
}

namespace {

std::vector<double> all_scores(std::span<const CriteriaRecord> cohort, const Weights& weights) {
  if (cohort.empty()) throw ConfigError("MCDA cohort is empty");
  const Weights w = weights.normalized();
  std::vector<double> eff, acc, gen;
  for (const auto& r : cohort) {
    r.validate();
    eff.push_back(r.efficiency);
    acc.push_back(r.accuracy);
    gen.push_back(r.generalizability);
  }
  const auto ne = normalize_minmax(eff);
  const auto na = normalize_ratio(acc);
  const auto ng = normalize_minmax(gen);
  std::vector<double> scores(cohort.size());
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    scores[i] = w.efficiency * ne[i] + w.accuracy * na[i] + w.generalizability * ng[i];
  }
  return scores;
}

}  // namespace

double overall_score(std::size_t index, std::span<const CriteriaRecord> cohort, const Weights& weights) {
  if (index >= cohort.size()) throw ConfigError("record is not part of the cohort");
  return all_scores(cohort, weights)[index];
}

RankedResult rank(std::span<const CriteriaRecord> cohort, const Weights& weights) {
  const auto scores = all_scores(cohort, weights);
  RankedResult result;
  for (std::size_t i = 0; i < cohort.size(); ++i) result.entries.push_back({cohort[i].name, scores[i]});
  std::stable_sort(result.entries.begin(), result.entries.end(), [](const auto& a, const auto& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.name < b.name;
  });
  return result;
}

std::string RankedResult::report() const {
  std::string out;
  for (std::size_t i = 0; i < entries.size(); ++i) {
    out += fmt::format("{}. {}: Overall_Score = {:.4f}\n", i + 1, entries[i].name, entries[i].score);
  }
  return out;
}

namespace {

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream is(line);
  while (std::getline(is, cell, ',')) cells.push_back(trim(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

double parse_number(const std::string& cell, std::size_t line_no) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size()) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw DataError(fmt::format("line {}: '{}' is not a number", line_no, cell));
  }
}

}  // namespace

std::vector<CriteriaRecord> read_criteria_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  std::vector<CriteriaRecord> out;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (!header_seen) {
      if (cells != std::vector<std::string>{"name", "efficiency", "accuracy", "generalizability"}) {
        throw DataError("criteria CSV header must be: name,efficiency,accuracy,generalizability");
      }
      header_seen = true;
      continue;
    }
    if (cells.size() != 4) throw DataError(fmt::format("line {}: expected 4 columns, got {}", line_no, cells.size()));
    CriteriaRecord r{cells[0], parse_number(cells[1], line_no), parse_number(cells[2], line_no),
                     parse_number(cells[3], line_no)};
    try {
      r.validate();
    } catch (const ConfigError& e) {
      throw DataError(fmt::format("line {}: {}", line_no, e.what()));
    }
    out.push_back(std::move(r));
  }
  if (!header_seen) throw DataError("criteria CSV is empty");
  return out;
}

std::string write_criteria_csv(std::span<const CriteriaRecord> records) {
  std::string out = "name,efficiency,accuracy,generalizability\n";
  for (const auto& r : records) out += fmt::format("{},{},{},{}\n", r.name, r.efficiency, r.accuracy, r.generalizability);
  return out;
}

std::string ranking_to_json(const RankedResult& result, const Weights& weights) {
  const Weights w = weights.normalized();
  nlohmann::json doc;
  doc["weights"] = {{"efficiency", w.efficiency}, {"accuracy", w.accuracy}, {"generalizability", w.generalizability}};
  nlohmann::json ranking = nlohmann::json::array();
  for (std::size_t i = 0; i < result.entries.size(); ++i) {
    ranking.push_back({{"rank", i + 1}, {"name", result.entries[i].name}, {"overall_score", result.entries[i].score}});
  }
  doc["ranking"] = std::move(ranking);
  return doc.dump(2) + "\n";
}

}  // namespace signbench::mcda
