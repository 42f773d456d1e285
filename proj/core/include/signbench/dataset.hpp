#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "signbench/attacks.hpp"
#include "signbench/geometry.hpp"
#include "signbench/image.hpp"
#include "signbench/labels.hpp"
#include "signbench/rng.hpp"

namespace signbench {

/// One annotated image on disk. The image itself is decoded lazily.
struct SampleRecord {
  std::string source_id;
  /// Relative to the manifest root.
  std::filesystem::path image;
  ClassLabel label;
  std::optional<PixelRect> bbox;
  int width = 0;
  int height = 0;

  friend bool operator==(const SampleRecord&, const SampleRecord&) = default;
};

struct DatasetManifest {
  LabelDomain domain = LabelDomain::signs;
  std::filesystem::path root;
  std::vector<SampleRecord> samples;

  std::vector<int> class_indices() const;
};

struct IngestIssue {
  std::string file;
  std::string message;
};

struct IngestResult {
  DatasetManifest manifest;
  /// One entry per rejected file.
  std::vector<IngestIssue> errors;
  /// Unknown class names and extra objects beyond the first known one.
  std::vector<IngestIssue> warnings;
};

/// Reads `dir/annotations/*.xml` (Pascal VOC style: filename,
/// size{width,height}, object{name, bndbox{xmin,ymin,xmax,ymax}}) and checks
/// each against `dir/images/<filename>`. Boxes are half-open pixel
/// rectangles. The first object with a known class labels the sample.
/// Per-file problems are collected in `errors`; a missing directory throws
/// DataError.
IngestResult load_annotations(const std::filesystem::path& dir);

/// Writes one VOC-style annotation file with a single object.
void write_annotation(const std::filesystem::path& path, const std::string& filename, int width, int height,
                      std::string_view class_name, const PixelRect& box);

struct SplitAssignment {
  std::uint64_t seed = 0;
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;

  friend bool operator==(const SplitAssignment&, const SplitAssignment&) = default;
};

/// Sizes of a 70/20/10 split of n items: floor(0.7n), floor(0.2n), remainder.
struct SplitSizes {
  std::size_t train, validation, test;
};
SplitSizes split_sizes(std::size_t n);

/// Stratified, seeded 70/20/10 split over per-sample class indices. Global
/// sizes follow split_sizes(n); each class receives its floor share and the
/// leftover train/validation slots go to the classes with the largest
/// fractional remainders. Within every class the order is a seeded shuffle.
/// Throws ConfigError for fewer than 10 samples.
SplitAssignment split_by_class(std::span<const int> classes, std::uint64_t seed);
SplitAssignment split_dataset(const DatasetManifest& manifest, std::uint64_t seed);

struct AugmentOptions {
  std::vector<AttackKind> kinds{AttackKind::tape, AttackKind::graffiti, AttackKind::illumination};
  double coverage_min = 0.25;
  double coverage_max = 0.45;
  double intensity_min = 0.3;
  double intensity_max = 0.9;

  void validate() const;
};

struct AugmentedItem {
  std::size_t sample = 0;
  std::optional<AttackSpec> attack;

  friend bool operator==(const AugmentedItem&, const AugmentedItem&) = default;
};

/// Marks floor(n/2) seeded-chosen items of a split as adversarial, assigning
/// attack kinds round-robin in selection order. The result keeps the order of
/// `split`. Attack regions are left unset (resolved to the sample's box when
/// the image is materialised). Throws ConfigError for an empty split.
std::vector<AugmentedItem> augment_half(std::span<const std::size_t> split, const AugmentOptions& options,
                                        SplitMix64& rng);

/// Reference to a manifest sample plus what to do with it.
struct SampleRef {
  LabelDomain source = LabelDomain::signs;
  std::size_t index = 0;
  /// Training target in sign-class indices (shape labels are mapped).
  int target = 0;
  std::optional<AttackSpec> attack;

  friend bool operator==(const SampleRef&, const SampleRef&) = default;
};

struct ExperimentSplits {
  std::vector<SampleRef> train;
  std::vector<SampleRef> validation;
  std::vector<SampleRef> test;
};

/// Train/validation/test composition for experiments 1-6:
///   1: clean signs everywhere
///   2: clean sign train; half-adversarial sign validation and test
///   3: half-adversarial sign train, validation, and test
///   4: clean shape train/validation; clean sign test
///   5: clean shape train/validation; half-adversarial sign test
///   6: half-adversarial shape train/validation; half-adversarial sign test
/// Throws ConfigError for an unknown id, DataError when a required manifest
/// is missing or of the wrong domain.
ExperimentSplits build_experiment_dataset(int experiment_id, const DatasetManifest& signs,
                                          const DatasetManifest* shapes, std::uint64_t seed,
                                          const AugmentOptions& options = {});

struct SynthOptions {
  LabelDomain kind = LabelDomain::signs;
  int per_class = 50;
  std::uint64_t seed = 0;
  int image_size = 64;
};

/// Renders per_class images for each of the four classes of `kind` into
/// `out_dir/images` with annotations in `out_dir/annotations`, and returns
/// the manifest (identical to what load_annotations reads back).
DatasetManifest synth_generate(const std::filesystem::path& out_dir, const SynthOptions& options);

/// Manifest JSON (format "signbench-manifest/1"), optionally with a split.
std::string manifest_to_json(const DatasetManifest& manifest, const SplitAssignment* split = nullptr);
DatasetManifest manifest_from_json(const std::string& text, SplitAssignment* split = nullptr);

/// A decoded, preprocessed sample ready for the network.
struct LoadedImage {
  Tensor image;
  /// Box scaled into target_size coordinates, if annotated.
  std::optional<PixelRect> bbox;
};

LoadedImage load_sample(const DatasetManifest& manifest, std::size_t index, const PreprocessConfig& config);

/// Applies the sample's attack (if any) inside its scaled box; falls back to
/// the whole image when there is no box or the box is too small.
Tensor materialize(const LoadedImage& loaded, const std::optional<AttackSpec>& attack);

}  // namespace signbench
