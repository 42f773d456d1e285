#include <fmt/format.h>

#include "cli.hpp"
#include "signbench/error.hpp"

int main(int argc, char** argv) {
  using namespace signbench;
  cli::Globals globals;
  globals.argv.assign(argv, argv + argc);

  CLI::App app{"signbench: road-sign robustness benchmark"};
  app.set_version_flag("--version", cli::kVersion);
  app.config_formatter(std::make_shared<cli::JsonConfig>());
  app.set_config("--config", "", "JSON config; flags override it");
  app.add_flag("-q,--quiet", globals.quiet, "Less output");
  app.option_defaults()->always_capture_default();
  app.require_subcommand(1);
  cli::add_data_commands(app, globals);
  cli::add_experiment_command(app, globals);
  cli::add_rank_commands(app, globals);
  cli::add_serve_command(app, globals);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kOk : cli::kUsage;
  } catch (const ConfigError& e) {
    fmt::print(stderr, "signbench: error: {}\n", e.what());
    return cli::kUsage;
  } catch (const DataError& e) {
    fmt::print(stderr, "signbench: data error: {}\n", e.what());
    return cli::kData;
  } catch (const NotFoundError& e) {
    fmt::print(stderr, "signbench: data error: {}\n", e.what());
    return cli::kData;
  } catch (const std::exception& e) {
    fmt::print(stderr, "signbench: failed: {}\n", e.what());
    return cli::kRuntime;
  }
  return cli::kOk;
}
