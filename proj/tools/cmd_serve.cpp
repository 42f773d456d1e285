#include <atomic>
#include <csignal>
#include <fmt/format.h>

#include "cli.hpp"
#include "signbench/error.hpp"
#include "signbench/hitl.hpp"
#include "signbench/network.hpp"

namespace signbench::cli {

namespace {

std::atomic<hitl::ReviewServer*> g_server{nullptr};

extern "C" void stop_server(int) {
  if (auto* s = g_server.load()) s->stop();
}

struct ServeOptions {
  fs::path store;
  std::string host = "127.0.0.1";
  int port = 8080;
  double threshold = 0.60;
  fs::path static_dir;
  std::string cors_origin = "*";
};

void run_serve(const ServeOptions& o, const Globals& g) {
  if (o.store.empty()) throw ConfigError("--store is required");
  hitl::ReviewStore store(o.store, {.threshold = o.threshold});
  hitl::ServerOptions options;
  options.cors_origin = o.cors_origin;
  options.static_dir = o.static_dir;
  hitl::ReviewServer server(store, options);
  int port = o.port;
  if (port == 0) {
    port = server.bind_to_any_port(o.host);
    if (port < 0) throw StorageError("cannot bind " + o.host);
  } else if (!server.bind(o.host, port)) {
    throw StorageError(fmt::format("cannot bind {}:{}", o.host, port));
  }
  g_server = &server;
  std::signal(SIGINT, stop_server);
  std::signal(SIGTERM, stop_server);
  if (!g.quiet) fmt::print("review API on http://{}:{}/api (store {})\n", o.host, port, o.store.string());
  std::fflush(stdout);
  server.listen_after_bind();
  g_server = nullptr;
}

struct EnqueueOptions {
  fs::path store;
  fs::path checkpoint;
  fs::path data;
  double threshold = 0.60;
  int size = 64;
};

void run_enqueue(const EnqueueOptions& o, const Globals& g) {
  NetworkParams params = load_checkpoint(o.checkpoint);
  NetworkSpec spec;
  spec.height = spec.width = static_cast<std::size_t>(o.size);
  check_params(spec, params);
  PreprocessConfig pre;
  pre.target_size = o.size;
  pre.validate();
  const DatasetManifest manifest = load_dataset(o.data, !g.quiet);
  hitl::ReviewStore store(o.store, {.threshold = o.threshold});
  std::size_t queued = 0;
  for (std::size_t i = 0; i < manifest.samples.size(); ++i) {
    const Tensor image = load_sample(manifest, i, pre).image;
    if (store.enqueue_low_confidence(predict(spec, params, image), image)) ++queued;
  }
  if (!g.quiet) fmt::print("{} of {} images queued for review\n", queued, manifest.samples.size());
}

void run_export(const fs::path& store_dir, const Globals& g) {
  hitl::ReviewStore store(store_dir);
  const hitl::RetrainBatch batch = store.export_retrain_batch();
  if (batch.items.empty()) {
    if (!g.quiet) fmt::print("nothing to export\n");
    return;
  }
  fmt::print("exported {} labels to {}\n", batch.items.size(), batch.directory.string());
}

}  // namespace

void add_serve_command(CLI::App& app, Globals& globals) {
  auto opts = std::make_shared<ServeOptions>();
  CLI::App* serve = app.add_subcommand("serve", "Serve the human review API (or manage its store)");
  serve->require_subcommand(0, 1);
  serve->add_option("--store", opts->store, "Review store directory");
  serve->add_option("--host", opts->host);
  serve->add_option("--port", opts->port, "0 picks a free port")->check(CLI::Range(0, 65535));
  serve->add_option("--threshold", opts->threshold)->check(CLI::Range(0.0, 1.0));
  serve->add_option("--static", opts->static_dir, "Directory served at / (review UI bundle)");
  serve->add_option("--cors-origin", opts->cors_origin);

  auto enq = std::make_shared<EnqueueOptions>();
  CLI::App* enqueue = serve->add_subcommand("enqueue", "Queue low-confidence predictions for review");
  enqueue->add_option("--store", enq->store)->required();
  enqueue->add_option("--checkpoint", enq->checkpoint)->required()->check(CLI::ExistingFile);
  enqueue->add_option("--data", enq->data, "Dataset directory or JSON")->required();
  enqueue->add_option("--threshold", enq->threshold)->check(CLI::Range(0.0, 1.0));
  enqueue->add_option("--size", enq->size);
  enqueue->callback([enq, &globals] { run_enqueue(*enq, globals); });

  auto export_store = std::make_shared<fs::path>();
  CLI::App* exp = serve->add_subcommand("export", "Export labeled items as a retrain batch");
  exp->add_option("--store", *export_store)->required();
  exp->callback([export_store, &globals] { run_export(*export_store, globals); });

  serve->callback([serve, opts, &globals] {
    if (serve->get_subcommands().empty()) run_serve(*opts, globals);
  });
}

}  // namespace signbench::cli
