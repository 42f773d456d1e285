#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "signbench/dataset.hpp"
#include "signbench/network.hpp"

namespace signbench {

/// How experiments 4-6 use the shape-trained network on sign data.
enum class TransferMode {
  direct,   ///< evaluate the shape-trained weights as-is
  finetune  ///< freeze conv layers, retrain the dense head on sign train data
};

std::string_view to_string(TransferMode mode);
TransferMode parse_transfer_mode(std::string_view name);

struct ExperimentConfig {
  int id = 1;
  std::uint64_t seed = 1;
  int epochs = 30;
  double learning_rate = 0.01;
  int batch_size = 32;
  PreprocessConfig preprocess;
  AugmentOptions augment;
  TransferMode transfer = TransferMode::direct;
  /// Epochs of head retraining in finetune mode; 0 means `epochs`.
  int finetune_epochs = 0;
  /// Re-sample the overlay of each attacked training image every epoch
  /// (kind and which images are attacked stay fixed).
  bool redraw_train_attacks = true;

  void validate() const;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double train_acc = 0.0;
  double val_acc = 0.0;
  /// Cumulative wall-clock milliseconds since training started.
  double wall_ms = 0.0;

  friend bool operator==(const EpochRecord&, const EpochRecord&) = default;
};

using ConfusionMatrix = std::array<std::array<int, kNumClasses>, kNumClasses>;

struct SplitCounts {
  std::size_t train = 0, validation = 0, test = 0;
  std::size_t train_adversarial = 0, validation_adversarial = 0, test_adversarial = 0;

  friend bool operator==(const SplitCounts&, const SplitCounts&) = default;
};

struct ExperimentResult {
  ExperimentConfig config;
  /// False when training diverged; `diagnostic` says why and `curve` holds
  /// the epochs completed before the abort.
  bool completed = true;
  std::string diagnostic;
  std::vector<EpochRecord> curve;
  std::vector<EpochRecord> finetune_curve;
  SplitCounts counts;

  /// Accuracy on the experiment's own test split.
  double test_accuracy = 0.0;
  /// Rows: true class; columns: predicted class.
  ConfusionMatrix confusion{};
  /// Test split with every attack removed.
  double clean_test_accuracy = 0.0;
  /// Test split with each image attacked once by every kind (parameters
  /// fixed per seed).
  double adversarial_test_accuracy = 0.0;

  /// Total training wall-clock seconds (higher is worse).
  double efficiency_raw = 0.0;
  double generalizability = 0.0;
  std::optional<double> control_similarity;

  NetworkParams params;
};

/// Trains the fixed network on the experiment's train split, validates every
/// epoch on the full validation split, and tests once at the end.
/// Dataset problems throw; divergence returns completed == false.
ExperimentResult run_experiment(const ExperimentConfig& config, const DatasetManifest& signs,
                                const DatasetManifest* shapes);

/// 1 - mean over the last `window` epochs of
/// |val_loss - train_loss| / max(val_loss, train_loss, 1e-9), clamped to [0, 1].
double compute_generalizability(std::span<const EpochRecord> curve, std::size_t window = 5);

/// RMS difference of validation losses over the common prefix of two curves.
double compute_control_similarity(std::span<const EpochRecord> curve, std::span<const EpochRecord> control);

/// Writes curve.csv, result.json and curve.svg into `dir` (created if needed).
void export_result(const ExperimentResult& result, const std::filesystem::path& dir);

std::string curve_csv(std::span<const EpochRecord> curve);
std::string curve_svg(std::span<const EpochRecord> curve, const std::string& title);
std::string result_to_json(const ExperimentResult& result);
/// Parses result.json (everything except params).
ExperimentResult result_from_json(const std::string& text);

}  // namespace signbench
