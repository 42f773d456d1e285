#include <httplib.h>

#include <fmt/format.h>
#include <fstream>
#include <json.hpp>

#include "signbench/error.hpp"
#include "signbench/hitl.hpp"
#include "signbench/labels.hpp"

namespace signbench::hitl {

using nlohmann::json;

namespace {

void send_json(httplib::Response& res, int status, const std::string& body) {
  res.status = status;
  res.set_content(body, "application/json");
}

void send_error(httplib::Response& res, int status, const std::string& message) {
  send_json(res, status, json{{"error", message}}.dump());
}

/// Accepts either a class index or a class name.
int parse_label(const json& value) {
  if (value.is_number_integer()) {
    const auto label = value.get<long long>();
    if (label < 0 || label >= static_cast<long long>(kNumClasses)) {
      throw ConfigError(fmt::format("label {} out of range 0-3", label));
    }
    return static_cast<int>(label);
  }
  if (value.is_string()) {
    const auto label = parse_class_label(value.get<std::string>());
    if (!label || label->domain != LabelDomain::signs) {
      throw ConfigError("unknown sign label '" + value.get<std::string>() + "'");
    }
    return label->index;
  }
  throw ConfigError("label must be an integer or a sign name");
}

std::size_t parse_size(const httplib::Request& req, const char* key, std::size_t fallback) {
  if (!req.has_param(key)) return fallback;
  const std::string text = req.get_param_value(key);
  std::size_t pos = 0;
  unsigned long long value = 0;
  try {
    value = std::stoull(text, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != text.size() || text.front() == '-') {
    throw ConfigError(fmt::format("query parameter {}='{}' is not a non-negative integer", key, text));
  }
  return static_cast<std::size_t>(value);
}

// Runs a handler, mapping library exceptions to HTTP status codes.
template <typename F>
void guarded(httplib::Response& res, F&& body) {
  try {
    body();
  } catch (const json::exception& e) {
    send_error(res, 400, std::string("malformed JSON: ") + e.what());
  } catch (const ConfigError& e) {
    send_error(res, 400, e.what());
  } catch (const NotFoundError& e) {
    send_error(res, 404, e.what());
  } catch (const ConflictError& e) {
    send_error(res, 409, e.what());
  } catch (const std::exception& e) {
    send_error(res, 500, e.what());
  }
}

std::string item_list_json(const std::vector<ReviewItem>& items, std::size_t total, std::size_t offset,
                           std::size_t limit) {
  json arr = json::array();
  for (const auto& item : items) arr.push_back(json::parse(item_to_json(item)));
  return json{{"items", arr}, {"total", total}, {"offset", offset}, {"limit", limit}}.dump();
}

}  // namespace

struct ReviewServer::Impl {
  ReviewStore& store;
  ServerOptions options;
  httplib::Server server;

  Impl(ReviewStore& s, ServerOptions o) : store(s), options(std::move(o)) { routes(); }

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", options.cors_origin},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    server.Get("/api/health", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, 200, R"({"status":"ok"})");
    });

    server.Get("/api/stats", [this](const httplib::Request&, httplib::Response& res) {
      guarded(res, [&] { send_json(res, 200, stats_to_json(store.queue_stats())); });
    });

    server.Get("/api/queue", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        std::optional<ItemStatus> status = ItemStatus::pending;
        if (req.has_param("status")) {
          const auto name = req.get_param_value("status");
          if (name == "all") {
            status.reset();
          } else {
            status = parse_status(name);
          }
        }
        const std::size_t offset = parse_size(req, "offset", 0);
        const std::size_t limit = std::min(parse_size(req, "limit", options.default_page), options.max_page);
        std::size_t total = 0;
        const auto items = store.list(status, offset, limit, &total);
        send_json(res, 200, item_list_json(items, total, offset, limit));
      });
    });

    server.Get(R"(/api/items/([0-9A-Za-z]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto item = store.get(req.matches[1]);
        if (!item) throw NotFoundError("no review item " + std::string(req.matches[1]));
        send_json(res, 200, item_to_json(*item));
      });
    });

    server.Get(R"(/api/items/([0-9A-Za-z]+)/image)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const auto item = store.get(req.matches[1]);
        if (!item) throw NotFoundError("no review item " + std::string(req.matches[1]));
        std::ifstream is(store.image_path(*item), std::ios::binary);
        if (!is) throw NotFoundError("image missing for item " + item->id);
        std::string bytes((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
        res.status = 200;
        res.set_content(std::move(bytes), "image/png");
      });
    });

    server.Post("/api/labels", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const json body = json::parse(req.body);
        if (!body.is_object() || !body.contains("id") || !body.contains("label")) {
          throw ConfigError("body must contain id and label");
        }
        const auto id = body.at("id").get<std::string>();
        const int label = parse_label(body.at("label"));
        const bool attack = body.value("attack_suspected", false);
        send_json(res, 200, item_to_json(store.submit_label(id, label, attack)));
      });
    });

    server.Post("/api/skip", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const json body = json::parse(req.body);
        if (!body.is_object() || !body.contains("id")) throw ConfigError("body must contain id");
        send_json(res, 200, item_to_json(store.skip(body.at("id").get<std::string>())));
      });
    });

    if (!options.static_dir.empty()) server.set_mount_point("/", options.static_dir.string());
  }
};

ReviewServer::ReviewServer(ReviewStore& store, ServerOptions options)
    : impl_(std::make_unique<Impl>(store, std::move(options))) {}

ReviewServer::~ReviewServer() { stop(); }

int ReviewServer::bind_to_any_port(const std::string& host) { return impl_->server.bind_to_any_port(host); }
bool ReviewServer::bind(const std::string& host, int port) { return impl_->server.bind_to_port(host, port); }
bool ReviewServer::listen_after_bind() { return impl_->server.listen_after_bind(); }
void ReviewServer::stop() {
  if (impl_) impl_->server.stop();
}
bool ReviewServer::is_running() const { return impl_->server.is_running(); }
void ReviewServer::wait_until_ready() const { impl_->server.wait_until_ready(); }

}  // namespace signbench::hitl
