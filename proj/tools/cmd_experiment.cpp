#include <algorithm>
#include <atomic>
#include <fmt/format.h>
#include <map>
#include <mutex>
#include <thread>

#include "cli.hpp"
#include "signbench/error.hpp"
#include "signbench/experiment.hpp"
#include "signbench/mcda.hpp"

namespace signbench::cli {

using nlohmann::json;

namespace {

struct CommonOptions {
  fs::path data;
  fs::path shapes;
  fs::path out = "runs";
  int epochs = 30;
  double lr = ExperimentConfig{}.learning_rate;
  int batch = 32;
  int size = 64;
  std::string transfer = "direct";
  int finetune_epochs = 0;
  bool no_rotate = false;
  bool no_redraw = false;
  double coverage_min = AugmentOptions{}.coverage_min;
  double coverage_max = AugmentOptions{}.coverage_max;
  int per_class = 50;
  std::uint64_t data_seed = 7;
};

struct RunOptions {
  int id = 1;
  std::uint64_t seed = 1;
};

struct AllOptions {
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::vector<int> ids{1, 2, 3, 4, 5, 6};
  int jobs = 1;
  std::string generalizability = "gap";
};

void add_common(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--data", o.data, "Sign dataset directory or JSON (default: synthetic)");
  cmd->add_option("--shapes", o.shapes, "Shape dataset directory or JSON (default: synthetic)");
  cmd->add_option("--out", o.out, "Runs directory");
  cmd->add_option("--epochs", o.epochs)->check(CLI::PositiveNumber);
  cmd->add_option("--lr", o.lr, "SGD learning rate");
  cmd->add_option("--batch", o.batch)->check(CLI::PositiveNumber);
  cmd->add_option("--size", o.size, "Input side (multiple of 8)");
  cmd->add_option("--transfer", o.transfer, "Experiments 4-6: direct or finetune")
      ->check(CLI::IsMember({"direct", "finetune"}));
  cmd->add_option("--finetune-epochs", o.finetune_epochs, "Head retraining epochs (0 = --epochs)");
  cmd->add_flag("--no-rotate", o.no_rotate, "Disable train-time rotation");
  cmd->add_flag("--no-redraw", o.no_redraw, "Keep each training attack fixed across epochs");
  cmd->add_option("--coverage-min", o.coverage_min)->check(CLI::Range(0.0, 0.5));
  cmd->add_option("--coverage-max", o.coverage_max)->check(CLI::Range(0.0, 0.5));
  cmd->add_option("--per-class", o.per_class, "Synthetic images per class")->check(CLI::PositiveNumber);
  cmd->add_option("--data-seed", o.data_seed, "Synthetic data seed");
}

ExperimentConfig make_config(const CommonOptions& o, int id, std::uint64_t seed) {
  ExperimentConfig c;
  c.id = id;
  c.seed = seed;
  c.epochs = o.epochs;
  c.learning_rate = o.lr;
  c.batch_size = o.batch;
  c.preprocess.target_size = o.size;
  c.preprocess.rotate_train = !o.no_rotate;
  c.transfer = parse_transfer_mode(o.transfer);
  c.finetune_epochs = o.finetune_epochs;
  c.redraw_train_attacks = !o.no_redraw;
  c.augment.coverage_min = o.coverage_min;
  c.augment.coverage_max = o.coverage_max;
  c.validate();
  return c;
}

struct Datasets {
  DatasetManifest signs;
  std::optional<DatasetManifest> shapes;
  json provenance;
};

Datasets resolve_datasets(const CommonOptions& o, bool need_shapes, bool verbose) {
  Datasets d;
  const fs::path out = fs::absolute(o.out);
  if (o.data.empty()) {
    d.signs = ensure_synthetic(out / "data" / "signs", {LabelDomain::signs, o.per_class, o.data_seed, o.size}, verbose);
    d.provenance["signs"] = {{"synthetic", true}, {"per_class", o.per_class}, {"seed", o.data_seed}};
  } else {
    d.signs = load_dataset(o.data, verbose);
    d.provenance["signs"] = {{"path", fs::absolute(o.data).string()}};
  }
  if (d.signs.domain != LabelDomain::signs) throw DataError("--data must hold a signs dataset");
  if (!need_shapes) return d;
  if (o.shapes.empty()) {
    if (!o.data.empty()) throw DataError("experiments 4-6 need --shapes when --data is given");
    d.shapes = ensure_synthetic(out / "data" / "shapes",
                                {LabelDomain::shapes, o.per_class, derive_seed(o.data_seed, 1), o.size}, verbose);
    d.provenance["shapes"] = {{"synthetic", true}, {"per_class", o.per_class}, {"seed", derive_seed(o.data_seed, 1)}};
  } else {
    d.shapes = load_dataset(o.shapes, verbose);
    d.provenance["shapes"] = {{"path", fs::absolute(o.shapes).string()}};
  }
  if (d.shapes->domain != LabelDomain::shapes) throw DataError("--shapes must hold a shapes dataset");
  return d;
}

fs::path run_dir(const CommonOptions& o, int id, std::uint64_t seed) {
  return fs::absolute(o.out) / fmt::format("{}-{}", id, seed);
}

void write_run(const ExperimentResult& r, const fs::path& dir, RunManifest run) {
  export_result(r, dir);
  save_checkpoint(r.params, dir / "checkpoint.bin");
  for (const char* f : {"curve.csv", "result.json", "curve.svg", "checkpoint.bin"}) run.add_output(dir / f);
  run.add_seed("experiment", r.config.seed);
  run.set("experiment_id", r.config.id);
  run.set("completed", r.completed);
  run.write(dir);
}

void log_result(const ExperimentResult& r, const Globals& g) {
  if (g.quiet) return;
  if (!r.completed) {
    fmt::print(stderr, "experiment {} seed {}: {}\n", r.config.id, r.config.seed, r.diagnostic);
    return;
  }
  fmt::print("experiment {} seed {}: test {:.3f} clean {:.3f} adversarial {:.3f} G {:.3f} ({:.1f} s)\n", r.config.id,
             r.config.seed, r.test_accuracy, r.clean_test_accuracy, r.adversarial_test_accuracy, r.generalizability,
             r.efficiency_raw);
}

void run_one(const CLI::App& cmd, const CommonOptions& o, const RunOptions& ro, const Globals& g) {
  const ExperimentConfig config = make_config(o, ro.id, ro.seed);
  const Datasets data = resolve_datasets(o, ro.id >= 4, !g.quiet);
  ExperimentResult r = run_experiment(config, data.signs, data.shapes ? &*data.shapes : nullptr);
  // Experiment 1 with the same seed is the control, when it has been run.
  const fs::path control = run_dir(o, 1, ro.seed) / "result.json";
  if (ro.id != 1 && r.completed && fs::exists(control)) {
    r.control_similarity = compute_control_similarity(r.curve, result_from_json(read_text(control)).curve);
  }
  RunManifest run(cmd, g.argv);
  run.set("datasets", data.provenance);
  write_run(r, run_dir(o, ro.id, ro.seed), std::move(run));
  log_result(r, g);
  if (!r.completed) throw NumericError(r.diagnostic);
}

void run_all(const CLI::App& cmd, const CommonOptions& o, const AllOptions& ao, const Globals& g) {
  if (ao.seeds.empty() || ao.ids.empty()) throw ConfigError("need at least one seed and one id");
  const bool need_shapes = std::any_of(ao.ids.begin(), ao.ids.end(), [](int id) { return id >= 4; });
  const bool by_control = ao.generalizability == "control";
  if (by_control && std::find(ao.ids.begin(), ao.ids.end(), 1) == ao.ids.end()) {
    throw ConfigError("--generalizability control needs experiment 1 in --ids");
  }
  std::vector<ExperimentConfig> configs;
  for (std::uint64_t seed : ao.seeds) {
    for (int id : ao.ids) configs.push_back(make_config(o, id, seed));
  }
  const Datasets data = resolve_datasets(o, need_shapes, !g.quiet);
  const DatasetManifest* shapes = data.shapes ? &*data.shapes : nullptr;

  std::vector<ExperimentResult> results(configs.size());
  std::vector<std::exception_ptr> errors(configs.size());
  std::atomic<std::size_t> next{0};
  std::mutex log_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        results[i] = run_experiment(configs[i], data.signs, shapes);
        std::lock_guard lock(log_mutex);
        log_result(results[i], g);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const int jobs = std::clamp(ao.jobs, 1, static_cast<int>(configs.size()));
  std::vector<std::thread> pool;
  for (int j = 1; j < jobs; ++j) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  // control similarity against experiment 1 of the same seed
  std::map<std::uint64_t, const ExperimentResult*> controls;
  for (const auto& r : results) {
    if (r.config.id == 1 && r.completed) controls[r.config.seed] = &r;
  }
  for (auto& r : results) {
    auto it = controls.find(r.config.seed);
    if (r.config.id != 1 && r.completed && it != controls.end()) {
      r.control_similarity = compute_control_similarity(r.curve, it->second->curve);
    }
  }

  std::vector<std::string> failed;
  for (const auto& r : results) {
    RunManifest run(cmd, g.argv);
    run.set("datasets", data.provenance);
    write_run(r, run_dir(o, r.config.id, r.config.seed), std::move(run));
    if (!r.completed) failed.push_back(fmt::format("{}-{}", r.config.id, r.config.seed));
  }

  // Seed-averaged MCDA input, one row per experiment id.
  std::vector<mcda::CriteriaRecord> rows;
  for (int id : ao.ids) {
    mcda::CriteriaRecord rec;
    rec.name = fmt::format("experiment_{}", id);
    int n = 0;
    for (const auto& r : results) {
      if (r.config.id != id || !r.completed) continue;
      rec.efficiency += 1.0 / r.efficiency_raw;
      rec.accuracy += r.test_accuracy;
      if (by_control) {
        // RMSE to the control curve mapped into (0, 1]; the control scores 1
        rec.generalizability += 1.0 / (1.0 + r.control_similarity.value_or(0.0));
      } else {
        rec.generalizability += r.generalizability;
      }
      ++n;
    }
    if (n == 0) continue;
    rec.efficiency /= n;
    rec.accuracy /= n;
    rec.generalizability /= n;
    rows.push_back(rec);
  }
  const fs::path out = fs::absolute(o.out);
  RunManifest run(cmd, g.argv);
  for (std::uint64_t s : ao.seeds) run.add_seed(fmt::format("experiment_{}", s), s);
  run.set("datasets", data.provenance);
  if (!rows.empty()) {
    write_text(out / "metrics.csv", mcda::write_criteria_csv(rows));
    run.add_output(out / "metrics.csv");
  }
  for (const auto& r : results) run.add_output(run_dir(o, r.config.id, r.config.seed));
  run.set("failed_runs", failed);
  run.write(out);
  if (!g.quiet) fmt::print("{} runs, metrics -> {}\n", results.size(), (out / "metrics.csv").string());
  if (!failed.empty()) throw NumericError(fmt::format("{} run(s) diverged: {}", failed.size(), fmt::join(failed, ", ")));
}

}  // namespace

void add_experiment_command(CLI::App& app, Globals& globals) {
  CLI::App* exp = app.add_subcommand("experiment", "Run experiments 1-6");
  exp->require_subcommand(1);
  {
    auto common = std::make_shared<CommonOptions>();
    auto opts = std::make_shared<RunOptions>();
    CLI::App* cmd = exp->add_subcommand("run", "Run one experiment");
    cmd->add_option("--id", opts->id, "Experiment id 1-6")->required()->check(CLI::Range(1, 6));
    cmd->add_option("--seed", opts->seed)->envname("SIGNBENCH_SEED");
    add_common(cmd, *common);
    cmd->callback([cmd, common, opts, &globals] { run_one(*cmd, *common, *opts, globals); });
  }
  {
    auto common = std::make_shared<CommonOptions>();
    auto opts = std::make_shared<AllOptions>();
    CLI::App* cmd = exp->add_subcommand("all", "Run the experiment matrix and write metrics.csv");
    cmd->add_option("--seeds", opts->seeds, "Comma-separated seeds")->delimiter(',')->envname("SIGNBENCH_SEED");
    cmd->add_option("--ids", opts->ids, "Experiment ids")->delimiter(',')->check(CLI::Range(1, 6));
    cmd->add_option("--jobs", opts->jobs, "Parallel runs")->check(CLI::PositiveNumber);
    cmd->add_option("--generalizability", opts->generalizability,
                    "metrics.csv generalizability: gap (train/val loss gap) or control (1 / (1 + RMSE to experiment 1))")
        ->check(CLI::IsMember({"gap", "control"}));
    add_common(cmd, *common);
    cmd->callback([cmd, common, opts, &globals] { run_all(*cmd, *common, *opts, globals); });
  }
}

}  // namespace signbench::cli
