#include <algorithm>
#include <fmt/format.h>
#include <fstream>
#include <json.hpp>

#include "signbench/error.hpp"
#include "signbench/experiment.hpp"

namespace signbench {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kResultFormat = "signbench-result/1";

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

json curve_json(std::span<const EpochRecord> curve) {
  json arr = json::array();
  for (const auto& r : curve) {
    arr.push_back({{"epoch", r.epoch},
                   {"train_loss", r.train_loss},
                   {"val_loss", r.val_loss},
                   {"train_acc", r.train_acc},
                   {"val_acc", r.val_acc},
                   {"wall_ms", r.wall_ms}});
  }
  return arr;
}

std::vector<EpochRecord> curve_from(const json& arr) {
  std::vector<EpochRecord> out;
  for (const auto& r : arr) {
    out.push_back({r.at("epoch").get<int>(), r.at("train_loss").get<double>(), r.at("val_loss").get<double>(),
                   r.at("train_acc").get<double>(), r.at("val_acc").get<double>(), r.at("wall_ms").get<double>()});
  }
  return out;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::trunc | std::ios::binary);
  if (!os) throw StorageError("cannot write " + path.string());
  os << text;
  if (!os) throw StorageError("failed writing " + path.string());
}

}  // namespace

std::string curve_csv(std::span<const EpochRecord> curve) {
  std::string out = "epoch,train_loss,val_loss,train_acc,val_acc,wall_ms\n";
  for (const auto& r : curve) {
    out += fmt::format("{},{},{},{},{},{:.3f}\n", r.epoch, r.train_loss, r.val_loss, r.train_acc, r.val_acc, r.wall_ms);
  }
  return out;
}

std::string curve_svg(std::span<const EpochRecord> curve, const std::string& title) {
  constexpr double kWidth = 640, kHeight = 400, kLeft = 60, kRight = 20, kTop = 40, kBottom = 50;
  const double plot_w = kWidth - kLeft - kRight, plot_h = kHeight - kTop - kBottom;
  double y_max = 1e-9;
  for (const auto& r : curve) y_max = std::max({y_max, r.train_loss, r.val_loss});
  y_max *= 1.05;
  const double x_span = curve.size() > 1 ? static_cast<double>(curve.size() - 1) : 1.0;
  auto px = [&](std::size_t i) { return kLeft + plot_w * static_cast<double>(i) / x_span; };
  auto py = [&](double loss) { return kTop + plot_h * (1.0 - loss / y_max); };
  auto points = [&](bool validation) {
    std::string pts;
    for (std::size_t i = 0; i < curve.size(); ++i) {
      const double v = validation ? curve[i].val_loss : curve[i].train_loss;
      pts += fmt::format("{}{:.2f},{:.2f}", i ? " " : "", px(i), py(v));
    }
    return pts;
  };

  std::string svg = fmt::format(
      "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0}\" height=\"{1}\" viewBox=\"0 0 {0} {1}\">\n"
      "  <rect x=\"0\" y=\"0\" width=\"{0}\" height=\"{1}\" fill=\"white\"/>\n"
      "  <text x=\"{2}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{3}</text>\n",
      kWidth, kHeight, kWidth / 2, xml_escape(title));
  svg += fmt::format("  <line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n", kLeft, kTop,
                     kTop + plot_h);
  svg += fmt::format("  <line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n", kLeft, kTop + plot_h,
                     kLeft + plot_w);
  for (int t = 0; t <= 4; ++t) {
    const double v = y_max * t / 4.0;
    svg += fmt::format(
        "  <text x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{:.2f}</text>\n",
        kLeft - 6, py(v) + 4, v);
  }
  if (!curve.empty()) {
    svg += fmt::format(
        "  <text x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
        px(0), kTop + plot_h + 16, curve.front().epoch);
    svg += fmt::format(
        "  <text x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{}</text>\n",
        px(curve.size() - 1), kTop + plot_h + 16, curve.back().epoch);
  }
  svg += fmt::format(
      "  <text x=\"{:.1f}\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">epoch</text>\n",
      kLeft + plot_w / 2, kHeight - 12);
  svg += fmt::format(
      "  <text x=\"16\" y=\"{:.1f}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" "
      "transform=\"rotate(-90 16 {:.1f})\">loss</text>\n",
      kTop + plot_h / 2, kTop + plot_h / 2);
  svg += fmt::format("  <polyline fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\" points=\"{}\"/>\n", points(false));
  svg += fmt::format("  <polyline fill=\"none\" stroke=\"#ff7f0e\" stroke-width=\"2\" points=\"{}\"/>\n", points(true));
  const double lx = kLeft + plot_w - 150, ly = kTop + 10;
  svg += fmt::format("  <g font-family=\"sans-serif\" font-size=\"12\">\n"
                     "    <line x1=\"{0:.1f}\" y1=\"{1:.1f}\" x2=\"{2:.1f}\" y2=\"{1:.1f}\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n"
                     "    <text x=\"{3:.1f}\" y=\"{4:.1f}\">training loss</text>\n"
                     "    <line x1=\"{0:.1f}\" y1=\"{5:.1f}\" x2=\"{2:.1f}\" y2=\"{5:.1f}\" stroke=\"#ff7f0e\" stroke-width=\"2\"/>\n"
                     "    <text x=\"{3:.1f}\" y=\"{6:.1f}\">validation loss</text>\n"
                     "  </g>\n",
                     lx, ly, lx + 24, lx + 30, ly + 4, ly + 18, ly + 22);
  svg += "</svg>\n";
  return svg;
}

std::string result_to_json(const ExperimentResult& result) {
  const auto& c = result.config;
  json doc;
  doc["format"] = kResultFormat;
  doc["id"] = c.id;
  doc["seed"] = c.seed;
  doc["completed"] = result.completed;
  doc["diagnostic"] = result.diagnostic;
  doc["config"] = {{"epochs", c.epochs},
                   {"learning_rate", c.learning_rate},
                   {"batch_size", c.batch_size},
                   {"target_size", c.preprocess.target_size},
                   {"rotate_train", c.preprocess.rotate_train},
                   {"rotation_range_deg", c.preprocess.rotation_range_deg},
                   {"transfer", std::string(to_string(c.transfer))},
                   {"finetune_epochs", c.finetune_epochs},
                   {"redraw_train_attacks", c.redraw_train_attacks},
                   {"coverage_min", c.augment.coverage_min},
                   {"coverage_max", c.augment.coverage_max},
                   {"intensity_min", c.augment.intensity_min},
                   {"intensity_max", c.augment.intensity_max}};
  json kinds = json::array();
  for (auto k : c.augment.kinds) kinds.push_back(std::string(to_string(k)));
  doc["config"]["attack_kinds"] = kinds;
  doc["counts"] = {{"train", result.counts.train},
                   {"validation", result.counts.validation},
                   {"test", result.counts.test},
                   {"train_adversarial", result.counts.train_adversarial},
                   {"validation_adversarial", result.counts.validation_adversarial},
                   {"test_adversarial", result.counts.test_adversarial}};
  doc["test_accuracy"] = result.test_accuracy;
  doc["clean_test_accuracy"] = result.clean_test_accuracy;
  doc["adversarial_test_accuracy"] = result.adversarial_test_accuracy;
  doc["confusion"] = result.confusion;
  doc["efficiency_raw_seconds"] = result.efficiency_raw;
  doc["efficiency"] = result.efficiency_raw > 0 ? 1.0 / result.efficiency_raw : 0.0;
  doc["generalizability"] = result.generalizability;
  doc["control_similarity"] = result.control_similarity ? json(*result.control_similarity) : json(nullptr);
  doc["curve"] = curve_json(result.curve);
  doc["finetune_curve"] = curve_json(result.finetune_curve);
  return doc.dump(2) + "\n";
}

ExperimentResult result_from_json(const std::string& text) {
  try {
    const json doc = json::parse(text);
    if (doc.at("format").get<std::string>() != kResultFormat) throw DataError("unsupported result format");
    ExperimentResult r;
    auto& c = r.config;
    c.id = doc.at("id").get<int>();
    c.seed = doc.at("seed").get<std::uint64_t>();
    const auto& cfg = doc.at("config");
    c.epochs = cfg.at("epochs").get<int>();
    c.learning_rate = cfg.at("learning_rate").get<double>();
    c.batch_size = cfg.at("batch_size").get<int>();
    c.preprocess.target_size = cfg.at("target_size").get<int>();
    c.preprocess.rotate_train = cfg.at("rotate_train").get<bool>();
    c.preprocess.rotation_range_deg = cfg.at("rotation_range_deg").get<double>();
    c.transfer = parse_transfer_mode(cfg.at("transfer").get<std::string>());
    c.finetune_epochs = cfg.at("finetune_epochs").get<int>();
    c.redraw_train_attacks = cfg.value("redraw_train_attacks", true);
    c.augment.coverage_min = cfg.at("coverage_min").get<double>();
    c.augment.coverage_max = cfg.at("coverage_max").get<double>();
    c.augment.intensity_min = cfg.at("intensity_min").get<double>();
    c.augment.intensity_max = cfg.at("intensity_max").get<double>();
    c.augment.kinds.clear();
    for (const auto& k : cfg.at("attack_kinds")) c.augment.kinds.push_back(parse_attack_kind(k.get<std::string>()));
    r.completed = doc.at("completed").get<bool>();
    r.diagnostic = doc.at("diagnostic").get<std::string>();
    const auto& n = doc.at("counts");
    r.counts = {n.at("train").get<std::size_t>(),
                n.at("validation").get<std::size_t>(),
                n.at("test").get<std::size_t>(),
                n.at("train_adversarial").get<std::size_t>(),
                n.at("validation_adversarial").get<std::size_t>(),
                n.at("test_adversarial").get<std::size_t>()};
    r.test_accuracy = doc.at("test_accuracy").get<double>();
    r.clean_test_accuracy = doc.at("clean_test_accuracy").get<double>();
    r.adversarial_test_accuracy = doc.at("adversarial_test_accuracy").get<double>();
    r.confusion = doc.at("confusion").get<ConfusionMatrix>();
    r.efficiency_raw = doc.at("efficiency_raw_seconds").get<double>();
    r.generalizability = doc.at("generalizability").get<double>();
    if (!doc.at("control_similarity").is_null()) r.control_similarity = doc.at("control_similarity").get<double>();
    r.curve = curve_from(doc.at("curve"));
    r.finetune_curve = curve_from(doc.at("finetune_curve"));
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed result JSON: ") + e.what());
  }
}

void export_result(const ExperimentResult& result, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw StorageError("cannot create " + dir.string() + ": " + ec.message());
  write_file(dir / "curve.csv", curve_csv(result.curve));
  write_file(dir / "result.json", result_to_json(result));
  write_file(dir / "curve.svg",
             curve_svg(result.curve, fmt::format("Experiment {} (seed {}): training vs. validation loss",
                                                 result.config.id, result.config.seed)));
}

}  // namespace signbench
