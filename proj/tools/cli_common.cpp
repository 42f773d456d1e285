#include <ctime>
#include <fmt/format.h>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "signbench/error.hpp"

namespace signbench::cli {

using nlohmann::json;

namespace {

void flatten(const json& node, std::vector<std::string>& parents, std::vector<CLI::ConfigItem>& out) {
  for (const auto& [key, value] : node.items()) {
    if (value.is_object()) {
      parents.push_back(key);
      flatten(value, parents, out);
      parents.pop_back();
      continue;
    }
    CLI::ConfigItem item;
    item.parents = parents;
    item.name = key;
    auto scalar = [](const json& v) { return v.is_string() ? v.get<std::string>() : v.dump(); };
    if (value.is_array()) {
      for (const auto& v : value) item.inputs.push_back(scalar(v));
    } else if (!value.is_null()) {
      item.inputs.push_back(scalar(value));
    }
    out.push_back(std::move(item));
  }
}

json option_values(const CLI::App& app) {
  json out = json::object();
  for (const CLI::Option* opt : app.get_options()) {
    if (opt->get_configurable() == false || opt->get_lnames().empty()) continue;
    const std::string& name = opt->get_lnames().front();
    if (name == "help" || name == "config") continue;
    if (opt->count() > 0) {
      const auto& results = opt->results();
      out[name] = results.size() == 1 ? json(results.front()) : json(results);
    } else if (!opt->get_default_str().empty()) {
      out[name] = opt->get_default_str();
    }
  }
  for (const CLI::App* sub : app.get_subcommands()) out[sub->get_name()] = option_values(*sub);
  return out;
}

std::string command_path(const CLI::App& app) {
  std::string path;
  for (const CLI::App* cur = &app; cur && cur->get_parent(); cur = cur->get_parent()) {
    path = path.empty() ? cur->get_name() : cur->get_name() + " " + path;
  }
  return path;
}

}  // namespace

std::string JsonConfig::to_config(const CLI::App* app, bool, bool, std::string) const {
  return option_values(*app).dump(2);
}

std::vector<CLI::ConfigItem> JsonConfig::from_config(std::istream& input) const {
  json doc;
  try {
    doc = json::parse(input);
  } catch (const json::exception& e) {
    throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
  std::vector<CLI::ConfigItem> items;
  std::vector<std::string> parents;
  flatten(doc, parents, items);
  return items;
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}Z", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                     tm.tm_hour, tm.tm_min, tm.tm_sec);
}

RunManifest::RunManifest(const CLI::App& command, std::vector<std::string> argv)
    : command_(command_path(command)), argv_(std::move(argv)), config_(option_values(command)), started_at_(utc_now()) {}

void RunManifest::write(const fs::path& dir) const {
  json doc{{"format", "signbench-run/1"},
           {"tool", "signbench"},
           {"version", kVersion},
           {"command", command_},
           {"argv", argv_},
           {"config", config_},
           {"seeds", seeds_},
           {"started_at", started_at_},
           {"finished_at", utc_now()},
           {"outputs", outputs_}};
  for (const auto& [k, v] : extra_.items()) doc[k] = v;
  write_text(dir / "manifest.json", doc.dump(2) + "\n");
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  os << text;
  if (!os) throw StorageError("cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot read " + path.string());
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

DatasetManifest load_dataset(const fs::path& path, bool verbose) {
  if (fs::is_regular_file(path)) return manifest_from_json(read_text(path));
  if (!fs::is_directory(path)) throw DataError("dataset not found: " + path.string());
  IngestResult ingest = load_annotations(path);
  if (verbose) {
    for (const auto& e : ingest.errors) fmt::print(stderr, "rejected {}: {}\n", e.file, e.message);
  }
  if (ingest.manifest.samples.empty()) throw DataError("no usable samples in " + path.string());
  return std::move(ingest.manifest);
}

DatasetManifest ensure_synthetic(const fs::path& dir, const SynthOptions& options, bool verbose) {
  const json stamp{{"kind", std::string(to_string(options.kind))},
                   {"per_class", options.per_class},
                   {"seed", options.seed},
                   {"image_size", options.image_size}};
  const fs::path stamp_path = dir / "synth.json";
  if (fs::exists(stamp_path)) {
    try {
      if (json::parse(read_text(stamp_path)) == stamp) return manifest_from_json(read_text(dir / "dataset.json"));
    } catch (const std::exception&) {
      // stale or partial; regenerate below
    }
  }
  if (verbose) {
    fmt::print(stderr, "generating synthetic {} ({} per class, seed {}) in {}\n", to_string(options.kind),
               options.per_class, options.seed, dir.string());
  }
  DatasetManifest manifest = synth_generate(dir, options);
  write_text(dir / "dataset.json", manifest_to_json(manifest));
  write_text(stamp_path, stamp.dump(2) + "\n");
  return manifest;
}

}  // namespace signbench::cli
