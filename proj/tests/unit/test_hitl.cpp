#include <doctest.h>

#include <httplib.h>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include "oracles.hpp"
#include "signbench/dataset.hpp"
#include "signbench/error.hpp"
#include "signbench/hitl.hpp"

using namespace signbench;
using namespace signbench::hitl;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path fresh_store(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "signbench-unit-hitl" / name;
  fs::remove_all(dir);
  return dir;
}

StoreOptions fast_options(std::uint64_t seed = 1) {
  StoreOptions o;
  o.id_seed = seed;
  o.durable = false;
  return o;
}

Tensor image(std::uint64_t seed) {
  SplitMix64 rng(seed);
  return oracle::random_tensor({3, 16, 16}, rng, 0.0, 1.0);
}

Prediction low(int label, double confidence) {
  Prediction p;
  p.label = label;
  p.confidence = confidence;
  return p;
}

std::vector<std::string> enqueue_n(ReviewStore& store, int n) {
  std::vector<std::string> ids;
  for (int i = 0; i < n; ++i) {
    const auto item = store.enqueue_low_confidence(low(i % 4, 0.3 + 0.04 * i), image(i));
    REQUIRE(item.has_value());
    ids.push_back(item->id);
  }
  return ids;
}

}  // namespace

TEST_CASE("ULIDs are 26 Crockford characters and strictly increasing") {
  UlidGenerator gen(5);
  const auto t = std::chrono::system_clock::time_point{} + std::chrono::milliseconds(1'700'000'000'000);
  std::string prev;
  for (int i = 0; i < 1000; ++i) {
    const std::string id = gen.next(i % 3 == 0 ? t + std::chrono::milliseconds(i) : t);
    REQUIRE(id.size() == 26);
    for (char c : id) REQUIRE(std::string_view("0123456789ABCDEFGHJKMNPQRSTVWXYZ").find(c) != std::string_view::npos);
    REQUIRE(id > prev);
    prev = id;
  }
  // time prefix: 1.7e12 ms encodes as 01HF...
  CHECK(UlidGenerator(1).next(t).substr(0, 4) == "01HF");
}

TEST_CASE("enqueue respects the confidence threshold") {
  ReviewStore store(fresh_store("threshold"), fast_options());
  CHECK_FALSE(store.enqueue_low_confidence(low(0, 0.6), image(1)).has_value());
  CHECK_FALSE(store.enqueue_low_confidence(low(0, 0.95), image(1)).has_value());
  const auto item = store.enqueue_low_confidence(low(2, 0.41), image(1));
  REQUIRE(item.has_value());
  CHECK(item->status == ItemStatus::pending);
  CHECK(item->predicted == 2);
  CHECK(fs::is_regular_file(store.image_path(*item)));
  CHECK(store.enqueue_low_confidence(low(0, 0.8), image(2), 0.9).has_value());
  CHECK(store.queue_stats().pending == 2);
}

TEST_CASE("label transitions happen exactly once") {
  ReviewStore store(fresh_store("transitions"), fast_options());
  const auto ids = enqueue_n(store, 3);
  const ReviewItem labeled = store.submit_label(ids[0], 3, true);
  CHECK(labeled.status == ItemStatus::labeled);
  CHECK(labeled.human_label == 3);
  CHECK(labeled.attack_suspected);
  CHECK(labeled.labeled_at.has_value());
  CHECK_THROWS_AS(store.submit_label(ids[0], 1, false), ConflictError);
  CHECK(store.get(ids[0])->human_label == 3);
  CHECK_THROWS_AS(store.skip(ids[0]), ConflictError);
  CHECK(store.skip(ids[1]).status == ItemStatus::skipped);
  CHECK_THROWS_AS(store.submit_label(ids[1], 0, false), ConflictError);
  CHECK_THROWS_AS(store.submit_label("01ZZZZZZZZZZZZZZZZZZZZZZZZ", 0, false), NotFoundError);
  CHECK_THROWS_AS(store.submit_label(ids[2], 4, false), ConfigError);
  CHECK_THROWS_AS(store.submit_label(ids[2], -1, false), ConfigError);
  CHECK(store.get(ids[2])->status == ItemStatus::pending);
  const QueueStats s = store.queue_stats();
  CHECK(s.pending == 1);
  CHECK(s.labeled == 1);
  CHECK(s.skipped == 1);
}

TEST_CASE("concurrent double submission yields one label") {
  ReviewStore store(fresh_store("race"), fast_options());
  const auto ids = enqueue_n(store, 1);
  std::atomic<int> ok{0}, conflict{0};
  std::vector<std::thread> threads;
  for (int t = 0; t < 8; ++t) {
    threads.emplace_back([&, t] {
      try {
        store.submit_label(ids[0], t % 4, false);
        ++ok;
      } catch (const ConflictError&) {
        ++conflict;
      }
    });
  }
  for (auto& th : threads) th.join();
  CHECK(ok == 1);
  CHECK(conflict == 7);
}

TEST_CASE("replaying the event log reconstructs identical state") {
  const fs::path dir = fresh_store("replay");
  std::vector<ReviewItem> before;
  {
    ReviewStore store(dir, fast_options(3));
    const auto ids = enqueue_n(store, 6);
    store.submit_label(ids[0], 1, false);
    store.submit_label(ids[2], 0, true);
    store.skip(ids[3]);
    store.export_retrain_batch();
    store.submit_label(ids[4], 2, false);
    before = store.snapshot();
  }
  CHECK(ReviewStore::replay(dir / "events.jsonl") == before);
  ReviewStore reopened(dir, fast_options(4));
  CHECK(reopened.snapshot() == before);
  const auto stats = reopened.queue_stats();
  CHECK(stats.exported == 2);
  CHECK(stats.labeled == 3);
}

TEST_CASE("replay randomized event sequences") {
  SplitMix64 rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    const fs::path dir = fresh_store("replay_rand");
    std::vector<ReviewItem> before;
    {
      ReviewStore store(dir, fast_options(trial + 1));
      std::vector<std::string> ids;
      for (int step = 0; step < 40; ++step) {
        const auto op = rng.below(5);
        try {
          if (op == 0 || ids.empty()) {
            ids.push_back(store.enqueue_low_confidence(low(0, rng.uniform(0, 0.59)), image(step))->id);
          } else if (op == 1 || op == 2) {
            store.submit_label(ids[rng.below(ids.size())], static_cast<int>(rng.below(4)), rng.below(2) == 1);
          } else if (op == 3) {
            store.skip(ids[rng.below(ids.size())]);
          } else {
            store.export_retrain_batch();
          }
        } catch (const ConflictError&) {
        }
      }
      before = store.snapshot();
    }
    REQUIRE(ReviewStore::replay(dir / "events.jsonl") == before);
  }
}

TEST_CASE("export happens at most once and ingests cleanly") {
  const fs::path dir = fresh_store("export");
  ReviewStore store(dir, fast_options());
  CHECK(store.export_retrain_batch().items.empty());
  const auto ids = enqueue_n(store, 7);
  for (int i = 0; i < 5; ++i) store.submit_label(ids[i], i % 4, i == 0);
  store.skip(ids[5]);
  const RetrainBatch batch = store.export_retrain_batch();
  CHECK(batch.items.size() == 5);
  CHECK_FALSE(batch.id.empty());
  CHECK(store.export_retrain_batch().items.empty());
  for (const auto& id : ids) {
    const auto item = store.get(id);
    CHECK(item->exported_in.has_value() == (item->status == ItemStatus::labeled));
  }

  const IngestResult ingested = load_annotations(batch.directory);
  CHECK(ingested.errors.empty());
  CHECK(ingested.warnings.empty());
  REQUIRE(ingested.manifest.samples.size() == 5);
  CHECK(ingested.manifest.domain == LabelDomain::signs);
  std::set<std::pair<std::string, int>> got, want;
  for (const auto& s : ingested.manifest.samples) got.insert({s.source_id, s.label.index});
  for (const auto& e : batch.items) want.insert({e.item_id, e.label});
  CHECK(got == want);
  const auto meta = json::parse(std::ifstream(batch.directory / "batch.json"));
  CHECK(meta["items"].size() == 5);
  CHECK(meta.contains("provenance"));

  store.submit_label(ids[6], 2, false);
  const RetrainBatch second = store.export_retrain_batch();
  REQUIRE(second.items.size() == 1);
  CHECK(second.items[0].item_id == ids[6]);
  CHECK(second.directory != batch.directory);
}

TEST_CASE("a second writer is refused") {
  const fs::path dir = fresh_store("lock");
  ReviewStore first(dir, fast_options());
  CHECK_THROWS_AS(ReviewStore(dir, fast_options()), StorageError);
}

TEST_CASE("a torn final line is dropped, a corrupt middle line is fatal") {
  const fs::path dir = fresh_store("torn");
  std::vector<ReviewItem> before;
  {
    ReviewStore store(dir, fast_options());
    const auto ids = enqueue_n(store, 2);
    store.submit_label(ids[0], 1, false);
    before = store.snapshot();
  }
  {
    std::ofstream os(dir / "events.jsonl", std::ios::app);
    os << R"({"type":"labeled","id":")";
  }
  {
    ReviewStore reopened(dir, fast_options());
    CHECK(reopened.snapshot() == before);
    reopened.skip(before[1].id);  // appends cleanly after truncation
  }
  CHECK(ReviewStore::replay(dir / "events.jsonl").at(1).status == ItemStatus::skipped);

  std::string text;
  {
    std::ifstream is(dir / "events.jsonl");
    text.assign(std::istreambuf_iterator<char>(is), {});
  }
  text.insert(text.find('\n') + 1, "garbage\n");
  std::ofstream(dir / "events.jsonl", std::ios::trunc) << text;
  CHECK_THROWS_AS(ReviewStore(dir, fast_options()), StorageError);
}

TEST_CASE("queue listing, paging and histogram") {
  ReviewStore store(fresh_store("list"), fast_options());
  const auto ids = enqueue_n(store, 5);  // confidences 0.30 .. 0.46
  store.submit_label(ids[1], 0, false);
  std::size_t total = 0;
  const auto pending = store.list(ItemStatus::pending, 1, 2, &total);
  CHECK(total == 4);
  REQUIRE(pending.size() == 2);
  CHECK(pending[0].id == ids[2]);
  CHECK(pending[1].id == ids[3]);
  CHECK(store.list(std::nullopt, 0, 100).size() == 5);
  const auto h = store.queue_stats().confidence_histogram;
  CHECK(h[3] == 3);  // 0.30, 0.34, 0.38
  CHECK(h[4] == 2);  // 0.42, 0.46
  CHECK(parse_status("skipped") == ItemStatus::skipped);
  CHECK_THROWS_AS(parse_status("done"), ConfigError);
}

TEST_CASE("HTTP API over loopback") {
  ReviewStore store(fresh_store("http"), fast_options());
  const auto ids = enqueue_n(store, 3);
  ServerOptions so;
  so.cors_origin = "http://localhost:5173";
  ReviewServer server(store, so);
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();
  httplib::Client cli("127.0.0.1", port);

  auto res = cli.Get("/api/health");
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(res->get_header_value("Access-Control-Allow-Origin") == "http://localhost:5173");

  res = cli.Get("/api/queue?limit=2");
  REQUIRE(res);
  CHECK(res->status == 200);
  auto body = json::parse(res->body);
  CHECK(body["total"] == 3);
  CHECK(body["items"].size() == 2);
  CHECK(body["items"][0]["id"] == ids[0]);
  CHECK(cli.Get("/api/queue?limit=abc")->status == 400);
  CHECK(cli.Get("/api/queue?status=bogus")->status == 400);

  res = cli.Get(("/api/items/" + ids[1]).c_str());
  CHECK(res->status == 200);
  CHECK(json::parse(res->body)["status"] == "pending");
  res = cli.Get(("/api/items/" + ids[1] + "/image").c_str());
  CHECK(res->status == 200);
  CHECK(res->get_header_value("Content-Type") == "image/png");
  CHECK(res->body.substr(1, 3) == "PNG");
  CHECK(cli.Get("/api/items/nope")->status == 404);

  const auto post = [&](const char* path, const json& j) { return cli.Post(path, j.dump(), "application/json"); };
  res = post("/api/labels", {{"id", ids[0]}, {"label", "crosswalk"}, {"attack_suspected", true}});
  REQUIRE(res);
  CHECK(res->status == 200);
  CHECK(json::parse(res->body)["human_label"] == "crosswalk");
  CHECK(post("/api/labels", {{"id", ids[0]}, {"label", 1}})->status == 409);
  CHECK(post("/api/labels", {{"id", "missing"}, {"label", 1}})->status == 404);
  CHECK(post("/api/labels", {{"id", ids[1]}, {"label", 9}})->status == 400);
  CHECK(post("/api/labels", {{"id", ids[1]}, {"label", "yield"}})->status == 400);
  CHECK(post("/api/labels", {{"label", 1}})->status == 400);
  CHECK(cli.Post("/api/labels", "{not json", "application/json")->status == 400);
  CHECK(post("/api/skip", {{"id", ids[2]}})->status == 200);
  CHECK(post("/api/skip", {{"id", ids[2]}})->status == 409);

  res = cli.Get("/api/stats");
  body = json::parse(res->body);
  CHECK(body["pending"] == 1);
  CHECK(body["labeled"] == 1);
  CHECK(body["skipped"] == 1);

  res = cli.Options("/api/labels");
  REQUIRE(res);
  CHECK(res->status == 204);
  CHECK_FALSE(res->get_header_value("Access-Control-Allow-Methods").empty());

  server.stop();
  th.join();
  CHECK(store.get(ids[0])->human_label == 2);
}
