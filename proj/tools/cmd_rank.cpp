#include <algorithm>
#include <fmt/format.h>
#include <map>

#include "cli.hpp"
#include "signbench/error.hpp"
#include "signbench/experiment.hpp"
#include "signbench/mcda.hpp"

namespace signbench::cli {

namespace {

struct RankOptions {
  fs::path in;
  double w_eff = 1.0 / 3.0;
  double w_acc = 1.0 / 3.0;
  double w_gen = 1.0 / 3.0;
  fs::path out;
};

void run_rank(const CLI::App& cmd, const RankOptions& o, const Globals& g) {
  const auto records = mcda::read_criteria_csv(read_text(o.in));
  const mcda::Weights weights{o.w_eff, o.w_acc, o.w_gen};
  const mcda::RankedResult ranked = mcda::rank(records, weights);
  const std::string report = ranked.report();
  if (!g.quiet || o.out.empty()) fmt::print("{}", report);
  if (o.out.empty()) return;
  const fs::path out = fs::absolute(o.out);
  RunManifest run(cmd, g.argv);
  write_text(out / "ranking.json", mcda::ranking_to_json(ranked, weights) + "\n");
  write_text(out / "ranking.txt", report);
  run.add_output(out / "ranking.json");
  run.add_output(out / "ranking.txt");
  run.write(out);
}

struct ReportOptions {
  fs::path runs = "runs";
  fs::path out;
};

void run_report(const CLI::App& cmd, const ReportOptions& o, const Globals& g) {
  const fs::path runs = fs::absolute(o.runs);
  if (!fs::is_directory(runs)) throw DataError("runs directory not found: " + runs.string());
  std::vector<std::pair<fs::path, ExperimentResult>> results;
  for (const auto& entry : fs::directory_iterator(runs)) {
    const fs::path file = entry.path() / "result.json";
    if (entry.is_directory() && fs::exists(file)) results.emplace_back(entry.path(), result_from_json(read_text(file)));
  }
  if (results.empty()) throw DataError("no result.json found under " + runs.string());
  std::sort(results.begin(), results.end(), [](const auto& a, const auto& b) {
    return std::tie(a.second.config.id, a.second.config.seed) < std::tie(b.second.config.id, b.second.config.seed);
  });

  const fs::path out = o.out.empty() ? runs : fs::absolute(o.out);
  std::string md = "# signbench report\n\n## Runs\n\n";
  md += "| id | seed | completed | test acc | clean acc | adversarial acc | generalizability | control RMSE | "
        "train s | curve |\n|---|---|---|---|---|---|---|---|---|---|\n";
  for (const auto& [dir, r] : results) {
    const std::string control = r.control_similarity ? fmt::format("{:.4f}", *r.control_similarity) : "-";
    md += fmt::format("| {} | {} | {} | {:.3f} | {:.3f} | {:.3f} | {:.3f} | {} | {:.1f} | [svg]({}) |\n", r.config.id,
                      r.config.seed, r.completed ? "yes" : "no", r.test_accuracy, r.clean_test_accuracy,
                      r.adversarial_test_accuracy, r.generalizability, control, r.efficiency_raw,
                      fs::relative(dir / "curve.svg", out).generic_string());
  }

  md += "\n## Seed means\n\n| id | runs | test acc | clean acc | adversarial acc | final/initial val loss |\n"
        "|---|---|---|---|---|---|\n";
  std::map<int, std::vector<const ExperimentResult*>> by_id;
  for (const auto& [dir, r] : results) {
    if (r.completed && !r.curve.empty()) by_id[r.config.id].push_back(&r);
  }
  for (const auto& [id, rs] : by_id) {
    double test = 0, clean = 0, adv = 0, ratio = 0;
    for (const auto* r : rs) {
      test += r->test_accuracy;
      clean += r->clean_test_accuracy;
      adv += r->adversarial_test_accuracy;
      ratio += r->curve.back().val_loss / r->curve.front().val_loss;
    }
    const double n = static_cast<double>(rs.size());
    md += fmt::format("| {} | {} | {:.3f} | {:.3f} | {:.3f} | {:.3f} |\n", id, rs.size(), test / n, clean / n, adv / n,
                      ratio / n);
  }

  const fs::path metrics = runs / "metrics.csv";
  if (fs::exists(metrics)) {
    md += "\n## Ranking (equal weights)\n\n";
    try {
      md += "```\n" + mcda::rank(mcda::read_criteria_csv(read_text(metrics))).report() + "```\n";
    } catch (const ConfigError& e) {
      md += fmt::format("Not ranked: {}.\n", e.what());
    }
  }

  RunManifest run(cmd, g.argv);
  write_text(out / "report.md", md);
  run.add_output(out / "report.md");
  if (out != runs) run.write(out);
  if (!g.quiet) fmt::print("report -> {}\n", (out / "report.md").string());
}

}  // namespace

void add_rank_commands(CLI::App& app, Globals& globals) {
  {
    auto opts = std::make_shared<RankOptions>();
    CLI::App* cmd = app.add_subcommand("rank", "Rank alternatives by weighted Overall_Score");
    cmd->add_option("--in", opts->in, "CSV: name,efficiency,accuracy,generalizability")->required();
    cmd->add_option("--w-eff", opts->w_eff, "Efficiency weight")->check(CLI::NonNegativeNumber);
    cmd->add_option("--w-acc", opts->w_acc, "Accuracy weight")->check(CLI::NonNegativeNumber);
    cmd->add_option("--w-gen", opts->w_gen, "Generalizability weight")->check(CLI::NonNegativeNumber);
    cmd->add_option("--out", opts->out, "Directory for ranking.json and ranking.txt");
    cmd->callback([cmd, opts, &globals] { run_rank(*cmd, *opts, globals); });
  }
  {
    auto opts = std::make_shared<ReportOptions>();
    CLI::App* cmd = app.add_subcommand("report", "Summarize a runs directory as Markdown");
    cmd->add_option("--runs", opts->runs, "Runs directory");
    cmd->add_option("--out", opts->out, "Output directory (default: the runs directory)");
    cmd->callback([cmd, opts, &globals] { run_report(*cmd, *opts, globals); });
  }
}

}  // namespace signbench::cli
