#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <string_view>
#include <vector>

#include "signbench/network.hpp"
#include "signbench/rng.hpp"
#include "signbench/tensor.hpp"

namespace signbench::hitl {

enum class ItemStatus { pending, labeled, skipped };

std::string_view to_string(ItemStatus status);
/// Throws ConfigError for unknown names.
ItemStatus parse_status(std::string_view name);

/// A low-confidence prediction waiting for (or holding) a human label.
struct ReviewItem {
  std::string id;
  /// Relative to the store directory.
  std::string image;
  int predicted = 0;
  double confidence = 0.0;
  ItemStatus status = ItemStatus::pending;
  std::optional<int> human_label;
  bool attack_suspected = false;
  std::string created_at;
  std::optional<std::string> labeled_at;
  std::optional<std::string> exported_in;

  friend bool operator==(const ReviewItem&, const ReviewItem&) = default;
};

struct RetrainEntry {
  std::string item_id;
  /// Relative to the batch directory.
  std::string image;
  int label = 0;
};

/// Human labels quarantined for an explicit merge into training data. The
/// batch directory uses the images/ + annotations/ layout that
/// load_annotations() reads.
struct RetrainBatch {
  std::string id;
  std::string exported_at;
  std::string provenance;
  std::filesystem::path directory;
  std::vector<RetrainEntry> items;
};

struct QueueStats {
  std::size_t pending = 0;
  std::size_t labeled = 0;
  std::size_t skipped = 0;
  std::size_t exported = 0;
  /// Confidence histogram over [0, 1] in ten equal bins.
  std::array<std::size_t, 10> confidence_histogram{};

  std::size_t total() const noexcept { return pending + labeled + skipped; }
};

/// 26-character Crockford base32 ULID: 48-bit millisecond timestamp then 80
/// random bits. Strictly increasing within one generator.
class UlidGenerator {
 public:
  explicit UlidGenerator(std::uint64_t seed) : rng_(seed) {}
  std::string next(std::chrono::system_clock::time_point now);

 private:
  SplitMix64 rng_;
  std::uint64_t last_ms_ = 0;
  std::uint16_t rand_hi_ = 0;
  std::uint64_t rand_lo_ = 0;
};

struct StoreOptions {
  double threshold = 0.60;
  std::function<std::chrono::system_clock::time_point()> clock = [] { return std::chrono::system_clock::now(); };
  /// 0 draws a seed from std::random_device.
  std::uint64_t id_seed = 0;
  /// fsync the event log after every append.
  bool durable = true;
};

/// Event-sourced review queue.
///
/// Layout of the store directory:
///   events.jsonl   append-only log, one JSON event per line
///   images/        PNGs of queued items
///   exports/<id>/  retrain batches
///   store.lock     advisory lock (one writer process)
///
/// Events: enqueued {id,image,predicted,confidence,at},
/// labeled {id,label,attack_suspected,at}, skipped {id,at},
/// exported {batch,ids,path,at}. Every mutation appends its event (and
/// fsyncs) before it is acknowledged; opening the store replays the log.
class ReviewStore {
 public:
  explicit ReviewStore(std::filesystem::path directory, StoreOptions options = {});
  ~ReviewStore();
  ReviewStore(const ReviewStore&) = delete;
  ReviewStore& operator=(const ReviewStore&) = delete;

  const std::filesystem::path& directory() const noexcept { return directory_; }
  double threshold() const noexcept { return options_.threshold; }

  /// Queues the image when prediction.confidence < threshold.
  std::optional<ReviewItem> enqueue_low_confidence(const Prediction& prediction, const Tensor& image);
  std::optional<ReviewItem> enqueue_low_confidence(const Prediction& prediction, const Tensor& image,
                                                   double threshold);

  /// pending -> labeled. NotFoundError for unknown ids, ConflictError if the
  /// item is not pending, ConfigError for labels outside 0-3.
  ReviewItem submit_label(const std::string& id, int label, bool attack_suspected);
  /// pending -> skipped; skipped items are never exported.
  ReviewItem skip(const std::string& id);

  /// Exports every labeled item not exported before. An empty batch writes
  /// nothing and has an empty directory.
  RetrainBatch export_retrain_batch();

  QueueStats queue_stats() const;
  std::optional<ReviewItem> get(const std::string& id) const;
  /// Items in id (creation) order, optionally filtered by status.
  std::vector<ReviewItem> list(std::optional<ItemStatus> status, std::size_t offset, std::size_t limit,
                               std::size_t* total = nullptr) const;
  std::vector<ReviewItem> snapshot() const;
  std::filesystem::path image_path(const ReviewItem& item) const { return directory_ / item.image; }

  /// Rebuilds item state from an event log without opening a store.
  static std::vector<ReviewItem> replay(const std::filesystem::path& log_file);

 private:
  void append_event(const std::string& line);
  std::string now_iso() const;

  std::filesystem::path directory_;
  StoreOptions options_;
  int lock_fd_ = -1;
  int log_fd_ = -1;
  mutable std::shared_mutex mutex_;
  std::vector<ReviewItem> items_;  // sorted by id
  UlidGenerator ids_;
};

struct ServerOptions {
  /// Value of Access-Control-Allow-Origin.
  std::string cors_origin = "*";
  std::size_t default_page = 50;
  std::size_t max_page = 500;
  /// Optional directory of static files (e.g. the review UI) served at /.
  std::filesystem::path static_dir;
};

/// JSON API over a ReviewStore:
///   GET  /api/health
///   GET  /api/queue?status=pending&offset=0&limit=50
///   GET  /api/items/{id}
///   GET  /api/items/{id}/image
///   POST /api/labels   {"id","label","attack_suspected"}
///   POST /api/skip     {"id"}
///   GET  /api/stats
/// Errors: 400 bad request or label, 404 unknown id, 409 item not pending.
class ReviewServer {
 public:
  ReviewServer(ReviewStore& store, ServerOptions options = {});
  ~ReviewServer();
  ReviewServer(const ReviewServer&) = delete;
  ReviewServer& operator=(const ReviewServer&) = delete;

  /// Binds to an ephemeral port and returns it (or -1).
  int bind_to_any_port(const std::string& host);
  bool bind(const std::string& host, int port);
  /// Blocks serving requests until stop().
  bool listen_after_bind();
  void stop();
  bool is_running() const;
  void wait_until_ready() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

std::string item_to_json(const ReviewItem& item);
std::string stats_to_json(const QueueStats& stats);

}  // namespace signbench::hitl
