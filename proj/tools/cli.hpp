#pragma once

#include <CLI11.hpp>
#include <chrono>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "signbench/dataset.hpp"

namespace signbench::cli {

namespace fs = std::filesystem;

inline constexpr const char* kVersion = "0.1.0";

/// Exit codes: 0 ok, 1 usage, 2 data, 3 runtime.
enum Exit : int { kOk = 0, kUsage = 1, kData = 2, kRuntime = 3 };

/// Reads nested JSON objects as CLI11 config sections, so
/// {"experiment": {"run": {"epochs": 5}}} sets `experiment run --epochs 5`.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override;
  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override;
};

/// Provenance record written as manifest.json into every output directory.
class RunManifest {
 public:
  RunManifest(const CLI::App& command, std::vector<std::string> argv);

  void add_seed(const std::string& name, std::uint64_t seed) { seeds_[name] = seed; }
  void add_output(const fs::path& path) { outputs_.push_back(path.string()); }
  void set(const std::string& key, nlohmann::json value) { extra_[key] = std::move(value); }
  void write(const fs::path& dir) const;

 private:
  std::string command_;
  std::vector<std::string> argv_;
  nlohmann::json config_;
  nlohmann::json seeds_ = nlohmann::json::object();
  nlohmann::json extra_ = nlohmann::json::object();
  std::vector<std::string> outputs_;
  std::string started_at_;
};

std::string utc_now();
void write_text(const fs::path& path, const std::string& text);
std::string read_text(const fs::path& path);

/// A dataset directory (annotations/ + images/) or a dataset JSON file.
DatasetManifest load_dataset(const fs::path& path, bool verbose);

/// Generates (or reuses, when the stamp matches) a synthetic dataset.
DatasetManifest ensure_synthetic(const fs::path& dir, const SynthOptions& options, bool verbose);

/// Parsed process arguments, shared by every command for its RunManifest.
struct Globals {
  std::vector<std::string> argv;
  bool quiet = false;
};

void add_data_commands(CLI::App& app, Globals& globals);
void add_experiment_command(CLI::App& app, Globals& globals);
void add_rank_commands(CLI::App& app, Globals& globals);
void add_serve_command(CLI::App& app, Globals& globals);

}  // namespace signbench::cli
