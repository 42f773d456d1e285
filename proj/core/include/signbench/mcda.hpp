#pragma once

#include <span>
#include <string>
#include <vector>

namespace signbench::mcda {

/// One alternative. All criteria are higher-is-better; efficiency is
/// typically 1 / training seconds.
struct CriteriaRecord {
  std::string name;
  double efficiency = 0.0;
  double accuracy = 0.0;
  double generalizability = 0.0;

  /// Throws ConfigError unless efficiency > 0 and accuracy, generalizability
  /// lie in [0, 1].
  void validate() const;
};

/// Non-negative criterion weights; normalized to sum 1 before use.
struct Weights {
  double efficiency = 1.0 / 3.0;
  double accuracy = 1.0 / 3.0;
  double generalizability = 1.0 / 3.0;

  Weights normalized() const;
};

/// (v - min) / (max - min); every value maps to 1.0 when max == min.
std::vector<double> normalize_minmax(std::span<const double> values);

/// v / max; throws ConfigError unless max > 0.
std::vector<double> normalize_ratio(std::span<const double> values);

/// Weighted sum of min-max efficiency, ratio accuracy, and min-max
/// generalizability of cohort[index], normalized against the whole cohort.
double overall_score(std::size_t index, std::span<const CriteriaRecord> cohort, const Weights& weights = {});

struct RankedEntry {
  std::string name;
  double score = 0.0;
};

/// Entries ordered by descending score, ties by ascending name.
struct RankedResult {
  std::vector<RankedEntry> entries;

  /// "1. name: Overall_Score = 0.6667" lines, one per entry.
  std::string report() const;
};

RankedResult rank(std::span<const CriteriaRecord> cohort, const Weights& weights = {});

/// Reads `name,efficiency,accuracy,generalizability` CSV (header required).
std::vector<CriteriaRecord> read_criteria_csv(const std::string& text);
std::string write_criteria_csv(std::span<const CriteriaRecord> records);

std::string ranking_to_json(const RankedResult& result, const Weights& weights);

}  // namespace signbench::mcda
