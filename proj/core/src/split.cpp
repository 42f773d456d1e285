#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <numeric>

#include "signbench/dataset.hpp"
#include "signbench/error.hpp"

namespace signbench {

SplitSizes split_sizes(std::size_t n) {
  const std::size_t train = 7 * n / 10;
  const std::size_t validation = 2 * n / 10;
  return {train, validation, n - train - validation};
}

namespace {

// Hands out `leftover` extra slots, one per class per round, to the classes
// with the largest remainder (ties to the lower class index).
void distribute(std::vector<std::size_t>& share, const std::vector<std::size_t>& remainder,
                const std::vector<std::size_t>& room, std::size_t leftover) {
  std::vector<std::size_t> order(share.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return remainder[a] > remainder[b]; });
  std::vector<std::size_t> extra(share.size(), 0);
  while (leftover > 0) {
    bool progressed = false;
    for (auto c : order) {
      if (leftover == 0) break;
      if (extra[c] < room[c]) {
        ++share[c];
        ++extra[c];
        --leftover;
        progressed = true;
      }
    }
    if (!progressed) break;
  }
}

}  // namespace

SplitAssignment split_by_class(std::span<const int> classes, std::uint64_t seed) {
  const std::size_t n = classes.size();
  if (n < 10) throw ConfigError(fmt::format("need at least 10 samples to split, got {}", n));

  int max_class = 0;
  for (int c : classes) {
    if (c < 0) throw ConfigError("negative class index");
    max_class = std::max(max_class, c);
  }
  const auto k = static_cast<std::size_t>(max_class) + 1;
  std::vector<std::vector<std::size_t>> members(k);
  for (std::size_t i = 0; i < n; ++i) members[static_cast<std::size_t>(classes[i])].push_back(i);

  std::vector<std::size_t> train(k), val(k), train_rem(k), val_rem(k), room(k);
  for (std::size_t c = 0; c < k; ++c) {
    const std::size_t m = members[c].size();
    train[c] = 7 * m / 10;
    train_rem[c] = 7 * m % 10;
    val[c] = 2 * m / 10;
    val_rem[c] = 2 * m % 10;
  }
  const SplitSizes target = split_sizes(n);
  for (std::size_t c = 0; c < k; ++c) room[c] = members[c].size() - train[c] - val[c];
  distribute(train, train_rem, room, target.train - std::accumulate(train.begin(), train.end(), std::size_t{0}));
  for (std::size_t c = 0; c < k; ++c) room[c] = members[c].size() - train[c] - val[c];
  distribute(val, val_rem, room, target.validation - std::accumulate(val.begin(), val.end(), std::size_t{0}));

  SplitAssignment split;
  split.seed = seed;
  SplitMix64 rng(seed);
  for (std::size_t c = 0; c < k; ++c) {
    SplitMix64 class_rng = rng.split();
    auto& m = members[c];
    shuffle(std::span<std::size_t>(m), class_rng);
    const auto cut1 = static_cast<std::ptrdiff_t>(train[c]);
    const auto cut2 = static_cast<std::ptrdiff_t>(train[c] + val[c]);
    split.train.insert(split.train.end(), m.begin(), m.begin() + cut1);
    split.validation.insert(split.validation.end(), m.begin() + cut1, m.begin() + cut2);
    split.test.insert(split.test.end(), m.begin() + cut2, m.end());
  }
  std::sort(split.train.begin(), split.train.end());
  std::sort(split.validation.begin(), split.validation.end());
  std::sort(split.test.begin(), split.test.end());
  return split;
}

SplitAssignment split_dataset(const DatasetManifest& manifest, std::uint64_t seed) {
  const auto classes = manifest.class_indices();
  return split_by_class(classes, seed);
}

void AugmentOptions::validate() const {
  if (!(coverage_min >= 0.0 && coverage_min <= coverage_max && coverage_max <= 0.5)) {
    throw ConfigError(fmt::format("augment coverage range [{}, {}] must lie in [0, 0.5]", coverage_min, coverage_max));
  }
  if (!(intensity_min >= 0.0 && intensity_min <= intensity_max && intensity_max <= 1.0)) {
    throw ConfigError(
        fmt::format("augment intensity range [{}, {}] must lie in [0, 1]", intensity_min, intensity_max));
  }
}

std::vector<AugmentedItem> augment_half(std::span<const std::size_t> split, const AugmentOptions& options,
                                        SplitMix64& rng) {
  if (split.empty()) throw ConfigError("cannot augment an empty split");
  options.validate();
  std::vector<AugmentedItem> out;
  out.reserve(split.size());
  for (auto idx : split) out.push_back({idx, std::nullopt});
  if (options.kinds.empty()) return out;

  std::vector<std::size_t> positions(split.size());
  std::iota(positions.begin(), positions.end(), 0);
  shuffle(std::span<std::size_t>(positions), rng);
  const std::size_t half = split.size() / 2;
  for (std::size_t j = 0; j < half; ++j) {
    AttackSpec spec;
    spec.kind = options.kinds[j % options.kinds.size()];
    spec.seed = rng.next();
    spec.coverage = rng.uniform(options.coverage_min, options.coverage_max);
    spec.intensity = rng.uniform(options.intensity_min, options.intensity_max);
    out[positions[j]].attack = spec;
  }
  return out;
}

namespace {

enum Stream : std::uint64_t {
  kSignSplit = 1,
  kShapeSplit = 2,
  kSignTrain = 10,
  kSignValidation = 11,
  kSignTest = 12,
  kShapeTrain = 13,
  kShapeValidation = 14,
};

std::vector<SampleRef> make_refs(const DatasetManifest& manifest, std::span<const std::size_t> indices,
                                 bool adversarial, const AugmentOptions& options, std::uint64_t stream_seed) {
  std::vector<SampleRef> refs;
  refs.reserve(indices.size());
  if (adversarial) {
    SplitMix64 rng(stream_seed);
    for (auto& item : augment_half(indices, options, rng)) {
      const auto& s = manifest.samples[item.sample];
      refs.push_back({manifest.domain, item.sample, to_sign(s.label).index, item.attack});
    }
  } else {
    for (auto idx : indices) {
      refs.push_back({manifest.domain, idx, to_sign(manifest.samples[idx].label).index, std::nullopt});
    }
  }
  return refs;
}

}  // namespace

ExperimentSplits build_experiment_dataset(int experiment_id, const DatasetManifest& signs,
                                          const DatasetManifest* shapes, std::uint64_t seed,
                                          const AugmentOptions& options) {
  if (experiment_id < 1 || experiment_id > 6) {
    throw ConfigError(fmt::format("unknown experiment id {} (expected 1-6)", experiment_id));
  }
  if (signs.domain != LabelDomain::signs) throw DataError("experiment sign dataset holds shape labels");
  if (signs.samples.empty()) throw DataError("sign dataset is empty");

  const SplitAssignment sign_split = split_dataset(signs, derive_seed(seed, kSignSplit));
  const bool adv_sign_test = experiment_id == 2 || experiment_id == 3 || experiment_id == 5 || experiment_id == 6;
  ExperimentSplits out;
  out.test = make_refs(signs, sign_split.test, adv_sign_test, options, derive_seed(seed, kSignTest));

  if (experiment_id <= 3) {
    out.train = make_refs(signs, sign_split.train, experiment_id == 3, options, derive_seed(seed, kSignTrain));
    out.validation =
        make_refs(signs, sign_split.validation, experiment_id >= 2, options, derive_seed(seed, kSignValidation));
    return out;
  }

  if (shapes == nullptr) throw DataError(fmt::format("experiment {} requires a shapes dataset", experiment_id));
  if (shapes->domain != LabelDomain::shapes) throw DataError("shapes dataset holds sign labels");
  if (shapes->samples.empty()) throw DataError("shapes dataset is empty");
  const SplitAssignment shape_split = split_dataset(*shapes, derive_seed(seed, kShapeSplit));
  const bool adv_shapes = experiment_id == 6;
  out.train = make_refs(*shapes, shape_split.train, adv_shapes, options, derive_seed(seed, kShapeTrain));
  out.validation =
      make_refs(*shapes, shape_split.validation, adv_shapes, options, derive_seed(seed, kShapeValidation));
  return out;
}

LoadedImage load_sample(const DatasetManifest& manifest, std::size_t index, const PreprocessConfig& config) {
  if (index >= manifest.samples.size()) throw DataError(fmt::format("sample index {} out of range", index));
  const SampleRecord& rec = manifest.samples[index];
  const RawImage raw = read_png(manifest.root / rec.image);
  LoadedImage out{preprocess(raw, config), std::nullopt};
  if (rec.bbox) {
    const double sx = static_cast<double>(config.target_size) / raw.width;
    const double sy = static_cast<double>(config.target_size) / raw.height;
    PixelRect box{static_cast<int>(std::floor(rec.bbox->x0 * sx)), static_cast<int>(std::floor(rec.bbox->y0 * sy)),
                  static_cast<int>(std::ceil(rec.bbox->x1 * sx)), static_cast<int>(std::ceil(rec.bbox->y1 * sy))};
    box.x0 = std::clamp(box.x0, 0, config.target_size);
    box.y0 = std::clamp(box.y0, 0, config.target_size);
    box.x1 = std::clamp(box.x1, 0, config.target_size);
    box.y1 = std::clamp(box.y1, 0, config.target_size);
    if (box.area() > 0) out.bbox = box;
  }
  return out;
}

Tensor materialize(const LoadedImage& loaded, const std::optional<AttackSpec>& attack) {
  if (!attack) return loaded.image;
  AttackSpec spec = *attack;
  if (loaded.bbox && loaded.bbox->area() >= 16) {
    spec.region = loaded.bbox;
  } else {
    spec.region.reset();
  }
  return apply_attack(loaded.image, spec).image;
}

}  // namespace signbench
