#include "signbench/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fmt/format.h>
#include <map>

#include "signbench/error.hpp"
#include "signbench/layers.hpp"

namespace signbench {

std::string_view to_string(TransferMode mode) { return mode == TransferMode::direct ? "direct" : "finetune"; }

TransferMode parse_transfer_mode(std::string_view name) {
  if (name == "direct") return TransferMode::direct;
  if (name == "finetune") return TransferMode::finetune;
  throw ConfigError(fmt::format("unknown transfer mode '{}' (expected direct or finetune)", name));
}

void ExperimentConfig::validate() const {
  if (id < 1 || id > 6) throw ConfigError(fmt::format("experiment id {} outside 1-6", id));
  if (epochs < 1) throw ConfigError("epochs must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (batch_size < 1) throw ConfigError("batch size must be at least 1");
  if (finetune_epochs < 0) throw ConfigError("finetune epochs must be non-negative");
  preprocess.validate();
  augment.validate();
}

namespace {

enum Stream : std::uint64_t {
  kInit = 100,
  kEpoch = 200,
  kProbe = 300,
  kFinetune = 400,
};

struct Example {
  Tensor image;
  int target;
  std::optional<AttackSpec> attack;
  const LoadedImage* source;
};

class ImageCache {
 public:
  ImageCache(const DatasetManifest& signs, const DatasetManifest* shapes, const PreprocessConfig& config)
      : signs_(signs), shapes_(shapes), config_(config) {}

  const LoadedImage& get(LabelDomain domain, std::size_t index) {
    const auto key = std::make_pair(domain, index);
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      const DatasetManifest& m = domain == LabelDomain::signs ? signs_ : *shapes_;
      it = cache_.emplace(key, load_sample(m, index, config_)).first;
    }
    return it->second;
  }

 private:
  const DatasetManifest& signs_;
  const DatasetManifest* shapes_;
  PreprocessConfig config_;
  std::map<std::pair<LabelDomain, std::size_t>, LoadedImage> cache_;
};

std::vector<Example> materialize_all(ImageCache& cache, std::span<const SampleRef> refs) {
  std::vector<Example> out;
  out.reserve(refs.size());
  for (const auto& ref : refs) {
    const LoadedImage& loaded = cache.get(ref.source, ref.index);
    out.push_back({materialize(loaded, ref.attack), ref.target, ref.attack, &loaded});
  }
  return out;
}

Tensor stack(std::span<const Example> examples, std::span<const std::size_t> order, std::size_t begin,
             std::size_t end, std::vector<int>& labels, SplitMix64* rotate_rng, double rotate_range) {
  const Shape& one = examples[order[begin]].image.shape();
  const std::size_t per = examples[order[begin]].image.size();
  Tensor batch({end - begin, one[0], one[1], one[2]});
  labels.clear();
  for (std::size_t i = begin; i < end; ++i) {
    const Example& ex = examples[order[i]];
    const Tensor img = rotate_rng ? random_rotation(ex.image, *rotate_rng, rotate_range) : ex.image;
    std::copy(img.data().begin(), img.data().end(), batch.data().begin() + static_cast<std::ptrdiff_t>((i - begin) * per));
    labels.push_back(ex.target);
  }
  return batch;
}

int argmax_row(const Tensor& logits, std::size_t row) {
  const std::size_t classes = logits.dim(1);
  int best = 0;
  for (std::size_t c = 1; c < classes; ++c) {
    if (logits[row * classes + c] > logits[row * classes + static_cast<std::size_t>(best)]) best = static_cast<int>(c);
  }
  return best;
}

struct Evaluation {
  double loss = 0.0;
  double accuracy = 0.0;
  ConfusionMatrix confusion{};
};

Evaluation evaluate(const NetworkSpec& spec, const NetworkParams& params, std::span<const Example> examples,
                    int batch_size) {
  Evaluation ev;
  if (examples.empty()) return ev;
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<int> labels;
  double loss_sum = 0.0;
  std::size_t correct = 0;
  for (std::size_t b = 0; b < examples.size(); b += static_cast<std::size_t>(batch_size)) {
    const std::size_t e = std::min(examples.size(), b + static_cast<std::size_t>(batch_size));
    const Tensor batch = stack(examples, order, b, e, labels, nullptr, 0.0);
    const Tensor logits = forward(spec, params, batch);
    loss_sum += softmax_cross_entropy(logits, labels).loss * static_cast<double>(e - b);
    for (std::size_t i = 0; i < e - b; ++i) {
      const int pred = argmax_row(logits, i);
      ++ev.confusion[static_cast<std::size_t>(labels[i])][static_cast<std::size_t>(pred)];
      if (pred == labels[i]) ++correct;
    }
  }
  ev.loss = loss_sum / static_cast<double>(examples.size());
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(examples.size());
  return ev;
}

struct FitOutcome {
  std::vector<EpochRecord> curve;
  double seconds = 0.0;
  bool completed = true;
  std::string diagnostic;
};

// Re-draws geometry, coverage and intensity of every attacked training
// example, keeping its kind, so each epoch sees fresh overlays.
void redraw_attacks(std::span<Example> train, const AugmentOptions& options, SplitMix64& rng) {
  for (auto& ex : train) {
    if (!ex.attack) continue;
    ex.attack->seed = rng.next();
    ex.attack->coverage = rng.uniform(options.coverage_min, options.coverage_max);
    ex.attack->intensity = rng.uniform(options.intensity_min, options.intensity_max);
    ex.image = materialize(*ex.source, ex.attack);
  }
}

FitOutcome fit(const NetworkSpec& spec, NetworkParams& params, std::span<Example> train,
               std::span<const Example> validation, const ExperimentConfig& config, int epochs,
               std::uint64_t stream, std::size_t first_trainable) {
  using Clock = std::chrono::steady_clock;
  FitOutcome out;
  const auto start = Clock::now();
  std::vector<std::size_t> order(train.size());
  std::vector<int> labels;
  const auto batch = static_cast<std::size_t>(config.batch_size);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    SplitMix64 rng(derive_seed(config.seed, stream + static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    shuffle(std::span<std::size_t>(order), rng);
    if (config.redraw_train_attacks && epoch > 0) redraw_attacks(train, config.augment, rng);
    SplitMix64* rotate_rng = config.preprocess.rotate_train ? &rng : nullptr;

    double loss_sum = 0.0;
    std::size_t correct = 0;
    try {
      for (std::size_t b = 0; b < train.size(); b += batch) {
        const std::size_t e = std::min(train.size(), b + batch);
        const Tensor x = stack(train, order, b, e, labels, rotate_rng, config.preprocess.rotation_range_deg);
        LossAndGrads step = loss_and_gradients(spec, params, x, labels);
        if (!std::isfinite(step.loss)) throw NumericError("non-finite training loss");
        sgd_step(params, step.grads, config.learning_rate, first_trainable);
        loss_sum += step.loss * static_cast<double>(e - b);
        for (std::size_t i = 0; i < e - b; ++i) {
          if (argmax_row(step.logits, i) == labels[i]) ++correct;
        }
      }
      const Evaluation val = evaluate(spec, params, validation, config.batch_size);
      if (!std::isfinite(val.loss)) throw NumericError("non-finite validation loss");
      EpochRecord rec;
      rec.epoch = epoch + 1;
      rec.train_loss = loss_sum / static_cast<double>(train.size());
      rec.train_acc = static_cast<double>(correct) / static_cast<double>(train.size());
      rec.val_loss = val.loss;
      rec.val_acc = val.accuracy;
      rec.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
      out.curve.push_back(rec);
    } catch (const NumericError& e) {
      out.completed = false;
      out.diagnostic = fmt::format("training diverged in epoch {}: {}", epoch + 1, e.what());
      break;
    }
  }
  out.seconds = std::max(std::chrono::duration<double>(Clock::now() - start).count(), 1e-9);
  return out;
}

std::size_t count_adversarial(std::span<const SampleRef> refs) {
  return static_cast<std::size_t>(std::count_if(refs.begin(), refs.end(), [](const auto& r) { return r.attack.has_value(); }));
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const DatasetManifest& signs,
                                const DatasetManifest* shapes) {
  config.validate();
  ExperimentResult result;
  result.config = config;

  const ExperimentSplits splits = build_experiment_dataset(config.id, signs, shapes, config.seed, config.augment);
  if (splits.train.empty() || splits.validation.empty() || splits.test.empty()) {
    throw DataError(fmt::format("experiment {} has an empty split", config.id));
  }
  result.counts = {splits.train.size(),       splits.validation.size(),
                   splits.test.size(),        count_adversarial(splits.train),
                   count_adversarial(splits.validation), count_adversarial(splits.test)};

  ImageCache cache(signs, shapes, config.preprocess);
  auto train = materialize_all(cache, splits.train);
  const auto validation = materialize_all(cache, splits.validation);
  const auto test = materialize_all(cache, splits.test);

  NetworkSpec spec;
  spec.height = spec.width = static_cast<std::size_t>(config.preprocess.target_size);
  result.params = init_params(spec, derive_seed(config.seed, kInit));

  FitOutcome main_fit = fit(spec, result.params, train, validation, config, config.epochs, kEpoch, 0);
  result.curve = std::move(main_fit.curve);
  result.completed = main_fit.completed;
  result.diagnostic = std::move(main_fit.diagnostic);
  result.efficiency_raw = main_fit.seconds;

  if (result.completed && config.transfer == TransferMode::finetune && config.id >= 4) {
    // Head retraining uses the sign train split of the matching sign-only
    // experiment: clean for 4 and 5, half-adversarial for 6.
    const ExperimentSplits sign_splits =
        build_experiment_dataset(config.id == 6 ? 3 : 1, signs, nullptr, config.seed, config.augment);
    auto sign_train = materialize_all(cache, sign_splits.train);
    const auto sign_val = materialize_all(cache, sign_splits.validation);
    const int epochs = config.finetune_epochs > 0 ? config.finetune_epochs : config.epochs;
    FitOutcome head = fit(spec, result.params, sign_train, sign_val, config, epochs, kFinetune,
                          NetworkParams::kConvTensors);
    result.finetune_curve = std::move(head.curve);
    result.efficiency_raw += head.seconds;
    if (!head.completed) {
      result.completed = false;
      result.diagnostic = "finetune: " + head.diagnostic;
    }
  }

  if (!result.curve.empty()) result.generalizability = compute_generalizability(result.curve);
  if (!result.completed) return result;

  const Evaluation ev = evaluate(spec, result.params, test, config.batch_size);
  result.test_accuracy = ev.accuracy;
  result.confusion = ev.confusion;

  std::vector<SampleRef> clean_refs = splits.test;
  for (auto& r : clean_refs) r.attack.reset();
  result.clean_test_accuracy = evaluate(spec, result.params, materialize_all(cache, clean_refs), config.batch_size).accuracy;

  // Every test image under every attack kind, parameters fixed per seed.
  std::vector<SampleRef> attacked_refs;
  if (config.augment.kinds.empty()) {
    attacked_refs = clean_refs;
  } else {
    SplitMix64 rng(derive_seed(config.seed, kProbe));
    for (const auto& ref : clean_refs) {
      for (const AttackKind kind : config.augment.kinds) {
        AttackSpec spec_i;
        spec_i.kind = kind;
        spec_i.seed = rng.next();
        spec_i.coverage = rng.uniform(config.augment.coverage_min, config.augment.coverage_max);
        spec_i.intensity = rng.uniform(config.augment.intensity_min, config.augment.intensity_max);
        attacked_refs.push_back(ref);
        attacked_refs.back().attack = spec_i;
      }
    }
  }
  result.adversarial_test_accuracy =
      evaluate(spec, result.params, materialize_all(cache, attacked_refs), config.batch_size).accuracy;
  return result;
}

double compute_generalizability(std::span<const EpochRecord> curve, std::size_t window) {
  if (curve.empty()) throw ConfigError("generalizability needs a non-empty learning curve");
  if (window == 0) throw ConfigError("generalizability window must be positive");
  const std::size_t k = std::min(window, curve.size());
  double gap = 0.0;
  for (std::size_t i = curve.size() - k; i < curve.size(); ++i) {
    const auto& r = curve[i];
    gap += std::abs(r.val_loss - r.train_loss) / std::max({r.val_loss, r.train_loss, 1e-9});
  }
  return std::clamp(1.0 - gap / static_cast<double>(k), 0.0, 1.0);
}

double compute_control_similarity(std::span<const EpochRecord> curve, std::span<const EpochRecord> control) {
  const std::size_t n = std::min(curve.size(), control.size());
  if (n == 0) throw ConfigError("control similarity needs two non-empty curves");
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = curve[i].val_loss - control[i].val_loss;
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(n));
}

}  // namespace signbench
