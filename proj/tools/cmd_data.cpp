#include <fmt/format.h>

#include "cli.hpp"
#include "signbench/attacks.hpp"
#include "signbench/error.hpp"

namespace signbench::cli {

using nlohmann::json;

namespace {

struct DatagenOptions {
  std::string kind = "signs";
  int per_class = 50;
  std::uint64_t seed = 0;
  int size = 64;
  fs::path out;
};

void run_datagen(const CLI::App& cmd, const DatagenOptions& o, const Globals& g) {
  SynthOptions synth{parse_domain(o.kind), o.per_class, o.seed, o.size};
  if (synth.per_class < 1) throw ConfigError("--per-class must be at least 1");
  const fs::path out = fs::absolute(o.out);
  RunManifest run(cmd, g.argv);
  run.add_seed("data", o.seed);
  const DatasetManifest manifest = synth_generate(out, synth);
  write_text(out / "dataset.json", manifest_to_json(manifest));
  run.add_output(out / "images");
  run.add_output(out / "annotations");
  run.add_output(out / "dataset.json");
  run.set("samples", manifest.samples.size());
  run.write(out);
  if (!g.quiet) fmt::print("{} samples written to {}\n", manifest.samples.size(), out.string());
}

struct IngestOptions {
  fs::path data;
  std::vector<fs::path> merge;
  std::optional<std::uint64_t> split_seed;
  bool strict = false;
  fs::path out;
};

// Appends the samples of `extra` to `base`, rewriting image paths relative to
// base.root and prefixing source ids with the batch directory name.
void merge_into(DatasetManifest& base, const DatasetManifest& extra, const std::string& prefix) {
  if (extra.domain != base.domain) throw DataError("cannot merge datasets of different domains");
  for (SampleRecord s : extra.samples) {
    s.image = fs::relative(fs::absolute(extra.root / s.image), fs::absolute(base.root));
    s.source_id = prefix + "/" + s.source_id;
    base.samples.push_back(std::move(s));
  }
}

void run_ingest(const CLI::App& cmd, const IngestOptions& o, const Globals& g) {
  RunManifest run(cmd, g.argv);
  IngestResult ingest = load_annotations(o.data);
  std::size_t rejected = ingest.errors.size();
  for (const auto& e : ingest.errors) fmt::print(stderr, "rejected {}: {}\n", e.file, e.message);
  if (!g.quiet) {
    for (const auto& w : ingest.warnings) fmt::print(stderr, "warning {}: {}\n", w.file, w.message);
  }
  DatasetManifest manifest = std::move(ingest.manifest);
  manifest.root = fs::absolute(manifest.root);
  // Human-labelled retrain batches only enter a dataset through this
  // explicit merge step.
  for (const auto& batch : o.merge) {
    IngestResult extra = load_annotations(batch);
    for (const auto& e : extra.errors) fmt::print(stderr, "rejected {}: {}\n", e.file, e.message);
    rejected += extra.errors.size();
    merge_into(manifest, extra.manifest, fs::absolute(batch).filename().string());
    run.add_output(fs::absolute(batch));
  }
  if (manifest.samples.empty()) throw DataError("no usable samples found");
  if (o.strict && rejected > 0) throw DataError(fmt::format("{} file(s) rejected in strict mode", rejected));

  const fs::path out = fs::absolute(o.out);
  std::optional<SplitAssignment> split;
  if (o.split_seed) {
    split = split_dataset(manifest, *o.split_seed);
    run.add_seed("split", *o.split_seed);
  }
  write_text(out / "dataset.json", manifest_to_json(manifest, split ? &*split : nullptr));
  run.add_output(out / "dataset.json");
  run.set("samples", manifest.samples.size());
  run.set("rejected", rejected);
  run.write(out);
  if (!g.quiet) {
    fmt::print("{} samples ({} rejected, {} warnings) -> {}\n", manifest.samples.size(), rejected,
               ingest.warnings.size(), (out / "dataset.json").string());
  }
}

struct AttackOptions {
  fs::path data;
  fs::path image;
  std::vector<std::string> kinds{"tape", "graffiti", "illumination"};
  double coverage = 0.3;
  double intensity = 0.6;
  std::uint64_t seed = 0;
  int size = 64;
  fs::path out;
};

json report_json(const AttackReport& r) {
  json params = json::object();
  for (const auto& [k, v] : r.params_drawn) params[k] = v;
  return {{"pixels_altered", r.pixels_altered}, {"achieved_coverage", r.achieved_coverage}, {"params_drawn", params}};
}

void run_attack(const CLI::App& cmd, const AttackOptions& o, const Globals& g) {
  if (o.data.empty() == o.image.empty()) throw ConfigError("give exactly one of --data or --image");
  std::vector<AttackKind> kinds;
  for (const auto& k : o.kinds) kinds.push_back(parse_attack_kind(k));
  PreprocessConfig pre;
  pre.target_size = o.size;
  pre.validate();

  // (source id, loaded image) pairs to attack
  std::vector<std::pair<std::string, LoadedImage>> inputs;
  if (!o.image.empty()) {
    inputs.emplace_back(o.image.stem().string(), LoadedImage{preprocess(read_png(o.image), pre), std::nullopt});
  } else {
    const DatasetManifest manifest = load_dataset(o.data, !g.quiet);
    for (std::size_t i = 0; i < manifest.samples.size(); ++i) {
      inputs.emplace_back(manifest.samples[i].source_id, load_sample(manifest, i, pre));
    }
  }

  const fs::path out = fs::absolute(o.out);
  fs::create_directories(out / "images");
  RunManifest run(cmd, g.argv);
  run.add_seed("attack", o.seed);
  SplitMix64 rng(o.seed);
  json records = json::array();
  for (const auto& [id, loaded] : inputs) {
    for (AttackKind kind : kinds) {
      AttackSpec spec;
      spec.kind = kind;
      spec.seed = rng.next();
      spec.coverage = o.coverage;
      spec.intensity = o.intensity;
      const int s = static_cast<int>(loaded.image.dim(1));
      spec.region = loaded.bbox && loaded.bbox->area() >= 16 ? *loaded.bbox : PixelRect{0, 0, s, s};
      const AttackOutput result = apply_attack(loaded.image, spec);
      const std::string name = fmt::format("{}_{}.png", id, to_string(kind));
      write_png(to_raw(result.image), out / "images" / name);
      records.push_back({{"source_id", id},
                         {"image", "images/" + name},
                         {"kind", std::string(to_string(kind))},
                         {"seed", spec.seed},
                         {"coverage", spec.coverage},
                         {"intensity", spec.intensity},
                         {"region", {spec.region->x0, spec.region->y0, spec.region->x1, spec.region->y1}},
                         {"report", report_json(result.report)}});
    }
  }
  write_text(out / "attacks.json", json{{"format", "signbench-attacks/1"}, {"attacks", records}}.dump(2) + "\n");
  run.add_output(out / "images");
  run.add_output(out / "attacks.json");
  run.write(out);
  if (!g.quiet) fmt::print("{} attacked images -> {}\n", records.size(), out.string());
}

}  // namespace

void add_data_commands(CLI::App& app, Globals& globals) {
  {
    auto opts = std::make_shared<DatagenOptions>();
    CLI::App* cmd = app.add_subcommand("datagen", "Render a synthetic signs or shapes dataset");
    cmd->add_option("--kind", opts->kind, "signs or shapes")->check(CLI::IsMember({"signs", "shapes"}));
    cmd->add_option("--per-class", opts->per_class, "Images per class")->check(CLI::PositiveNumber);
    cmd->add_option("--seed", opts->seed, "Generator seed")->envname("SIGNBENCH_SEED");
    cmd->add_option("--size", opts->size, "Image side in pixels")->check(CLI::Range(16, 4096));
    cmd->add_option("--out", opts->out, "Output directory")->required();
    cmd->callback([cmd, opts, &globals] { run_datagen(*cmd, *opts, globals); });
  }
  {
    auto opts = std::make_shared<IngestOptions>();
    CLI::App* cmd = app.add_subcommand("ingest", "Validate an annotated dataset and write its manifest");
    cmd->add_option("--data", opts->data, "Dataset directory (annotations/ + images/)")->required();
    cmd->add_option("--merge", opts->merge, "Exported retrain batch to merge in (repeatable)");
    cmd->add_option("--split-seed", opts->split_seed, "Also record a 70/20/10 split with this seed");
    cmd->add_flag("--strict", opts->strict, "Fail (exit 2) if any file is rejected");
    cmd->add_option("--out", opts->out, "Output directory")->required();
    cmd->callback([cmd, opts, &globals] { run_ingest(*cmd, *opts, globals); });
  }
  {
    auto opts = std::make_shared<AttackOptions>();
    CLI::App* cmd = app.add_subcommand("attack", "Apply physical overlay attacks to images");
    cmd->add_option("--data", opts->data, "Dataset directory or dataset JSON");
    cmd->add_option("--image", opts->image, "Single PNG (attacked over the whole frame)");
    cmd->add_option("--kind", opts->kinds, "Attack kinds")
        ->check(CLI::IsMember({"tape", "graffiti", "illumination"}))
        ->delimiter(',');
    cmd->add_option("--coverage", opts->coverage, "Target fraction of region pixels")->check(CLI::Range(0.0, 0.5));
    cmd->add_option("--intensity", opts->intensity, "Illumination peak")->check(CLI::Range(0.0, 1.0));
    cmd->add_option("--seed", opts->seed, "Attack seed")->envname("SIGNBENCH_SEED");
    cmd->add_option("--size", opts->size, "Preprocessed image side");
    cmd->add_option("--out", opts->out, "Output directory")->required();
    cmd->callback([cmd, opts, &globals] { run_attack(*cmd, *opts, globals); });
  }
}

}  // namespace signbench::cli
