#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <ctime>
#include <fmt/format.h>
#include <fstream>
#include <json.hpp>
#include <mutex>
#include <random>

#include "signbench/dataset.hpp"
#include "signbench/error.hpp"
#include "signbench/hitl.hpp"
#include "signbench/image.hpp"
#include "signbench/labels.hpp"

namespace signbench::hitl {

using nlohmann::json;
namespace fs = std::filesystem;

std::string_view to_string(ItemStatus status) {
  switch (status) {
    case ItemStatus::pending: return "pending";
    case ItemStatus::labeled: return "labeled";
    case ItemStatus::skipped: return "skipped";
  }
  return "unknown";
}

ItemStatus parse_status(std::string_view name) {
  if (name == "pending") return ItemStatus::pending;
  if (name == "labeled") return ItemStatus::labeled;
  if (name == "skipped") return ItemStatus::skipped;
  throw ConfigError(fmt::format("unknown item status '{}'", name));
}

std::string UlidGenerator::next(std::chrono::system_clock::time_point now) {
  static constexpr char kAlphabet[] = "0123456789ABCDEFGHJKMNPQRSTVWXYZ";
  auto ms = static_cast<std::uint64_t>(
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count());
  ms &= (std::uint64_t{1} << 48) - 1;
  if (ms <= last_ms_ && (last_ms_ != 0 || rand_lo_ != 0 || rand_hi_ != 0)) {
    ms = last_ms_;
    if (++rand_lo_ == 0) ++rand_hi_;
  } else {
    rand_hi_ = static_cast<std::uint16_t>(rng_.next());
    rand_lo_ = rng_.next();
  }
  last_ms_ = ms;
  unsigned __int128 value = (static_cast<unsigned __int128>((ms << 16) | rand_hi_) << 64) | rand_lo_;
  std::string out(26, '0');
  for (int i = 25; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = kAlphabet[static_cast<unsigned>(value & 31u)];
    value >>= 5;
  }
  return out;
}

namespace {

std::string iso8601(std::chrono::system_clock::time_point t) {
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
  const std::time_t secs = static_cast<std::time_t>(ms / 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}.{:03d}Z", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                     tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms % 1000));
}

std::string sign_name(int index) { return std::string(ClassLabel{LabelDomain::signs, index}.name()); }

int sign_index(const std::string& name) {
  const auto label = parse_class_label(name);
  if (!label || label->domain != LabelDomain::signs) throw ConfigError("unknown sign label '" + name + "'");
  return label->index;
}

ReviewItem* find(std::vector<ReviewItem>& items, const std::string& id) {
  auto it = std::lower_bound(items.begin(), items.end(), id, [](const auto& item, const auto& key) { return item.id < key; });
  return it != items.end() && it->id == id ? &*it : nullptr;
}

void insert_sorted(std::vector<ReviewItem>& items, ReviewItem item) {
  auto it = std::lower_bound(items.begin(), items.end(), item.id, [](const auto& a, const auto& key) { return a.id < key; });
  if (it != items.end() && it->id == item.id) throw StorageError("duplicate review item id " + item.id);
  items.insert(it, std::move(item));
}

// Applies one event to the item list; throws StorageError on an illegal transition.
void apply_event(std::vector<ReviewItem>& items, const json& ev) {
  const auto type = ev.at("event").get<std::string>();
  if (type == "enqueued") {
    ReviewItem item;
    item.id = ev.at("id").get<std::string>();
    item.image = ev.at("image").get<std::string>();
    item.predicted = sign_index(ev.at("predicted").get<std::string>());
    item.confidence = ev.at("confidence").get<double>();
    item.created_at = ev.at("at").get<std::string>();
    insert_sorted(items, std::move(item));
    return;
  }
  if (type == "exported") {
    const auto batch = ev.at("batch").get<std::string>();
    for (const auto& id_json : ev.at("ids")) {
      const auto id = id_json.get<std::string>();
      ReviewItem* item = find(items, id);
      if (!item || item->status != ItemStatus::labeled || item->exported_in) {
        throw StorageError("export event references a non-exportable item " + id);
      }
      item->exported_in = batch;
    }
    return;
  }
  const auto id = ev.at("id").get<std::string>();
  ReviewItem* item = find(items, id);
  if (!item) throw StorageError("event for unknown item " + id);
  if (item->status != ItemStatus::pending) throw StorageError("repeated transition for item " + id);
  if (type == "labeled") {
    item->status = ItemStatus::labeled;
    item->human_label = sign_index(ev.at("label").get<std::string>());
    item->attack_suspected = ev.at("attack_suspected").get<bool>();
    item->labeled_at = ev.at("at").get<std::string>();
  } else if (type == "skipped") {
    item->status = ItemStatus::skipped;
    item->labeled_at = ev.at("at").get<std::string>();
  } else {
    throw StorageError("unknown event type " + type);
  }
}

std::uint64_t random_seed() {
  std::random_device rd;
  return (static_cast<std::uint64_t>(rd()) << 32) ^ rd();
}

}  // namespace

std::vector<ReviewItem> ReviewStore::replay(const fs::path& log_file) {
  std::vector<ReviewItem> items;
  std::ifstream is(log_file);
  if (!is) return items;
  std::vector<std::string> lines;
  for (std::string line; std::getline(is, line);) {
    if (!line.empty()) lines.push_back(std::move(line));
  }
  for (std::size_t i = 0; i < lines.size(); ++i) {
    json ev;
    try {
      ev = json::parse(lines[i]);
    } catch (const json::exception&) {
      // A torn final line is an unacknowledged write; anything earlier is corruption.
      if (i + 1 == lines.size()) break;
      throw StorageError(fmt::format("{}: corrupt event on line {}", log_file.string(), i + 1));
    }
    try {
      apply_event(items, ev);
    } catch (const json::exception& e) {
      throw StorageError(fmt::format("{}: bad event on line {}: {}", log_file.string(), i + 1, e.what()));
    } catch (const ConfigError& e) {
      throw StorageError(fmt::format("{}: bad event on line {}: {}", log_file.string(), i + 1, e.what()));
    }
  }
  return items;
}

ReviewStore::ReviewStore(fs::path directory, StoreOptions options)
    : directory_(std::move(directory)),
      options_(std::move(options)),
      ids_(options_.id_seed != 0 ? options_.id_seed : random_seed()) {
  if (!(options_.threshold >= 0.0 && options_.threshold <= 1.0)) {
    throw ConfigError(fmt::format("confidence threshold {} outside [0, 1]", options_.threshold));
  }
  std::error_code ec;
  fs::create_directories(directory_ / "images", ec);
  if (ec) throw StorageError("cannot create review store at " + directory_.string() + ": " + ec.message());

  const fs::path lock_path = directory_ / "store.lock";
  lock_fd_ = ::open(lock_path.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0644);
  if (lock_fd_ < 0) throw StorageError("cannot open " + lock_path.string() + ": " + std::strerror(errno));
  if (::flock(lock_fd_, LOCK_EX | LOCK_NB) != 0) {
    ::close(lock_fd_);
    throw StorageError("review store " + directory_.string() + " is locked by another writer");
  }

  const fs::path log_path = directory_ / "events.jsonl";
  try {
    items_ = replay(log_path);
  } catch (...) {
    ::close(lock_fd_);
    throw;
  }
  // Drop a torn trailing line so the next append starts on a fresh line.
  if (fs::exists(log_path)) {
    std::ifstream is(log_path, std::ios::binary);
    std::string content((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
    const auto last_newline = content.find_last_of('\n');
    const std::size_t keep = last_newline == std::string::npos ? 0 : last_newline + 1;
    if (keep != content.size()) fs::resize_file(log_path, keep);
  }
  log_fd_ = ::open(log_path.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0644);
  if (log_fd_ < 0) {
    ::close(lock_fd_);
    throw StorageError("cannot open " + log_path.string() + ": " + std::strerror(errno));
  }
}

ReviewStore::~ReviewStore() {
  if (log_fd_ >= 0) ::close(log_fd_);
  if (lock_fd_ >= 0) {
    ::flock(lock_fd_, LOCK_UN);
    ::close(lock_fd_);
  }
}

std::string ReviewStore::now_iso() const { return iso8601(options_.clock()); }

void ReviewStore::append_event(const std::string& line) {
  const std::string record = line + "\n";
  std::size_t written = 0;
  while (written < record.size()) {
    const auto n = ::write(log_fd_, record.data() + written, record.size() - written);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw StorageError(std::string("event log write failed: ") + std::strerror(errno));
    }
    written += static_cast<std::size_t>(n);
  }
  if (options_.durable && ::fsync(log_fd_) != 0) {
    throw StorageError(std::string("event log fsync failed: ") + std::strerror(errno));
  }
}

std::optional<ReviewItem> ReviewStore::enqueue_low_confidence(const Prediction& prediction, const Tensor& image) {
  return enqueue_low_confidence(prediction, image, options_.threshold);
}

std::optional<ReviewItem> ReviewStore::enqueue_low_confidence(const Prediction& prediction, const Tensor& image,
                                                              double threshold) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw ConfigError(fmt::format("confidence threshold {} outside [0, 1]", threshold));
  }
  if (prediction.label < 0 || prediction.label >= static_cast<int>(kNumClasses)) {
    throw ConfigError(fmt::format("predicted label {} out of range", prediction.label));
  }
  if (!(prediction.confidence < threshold)) return std::nullopt;

  std::unique_lock lock(mutex_);
  ReviewItem item;
  item.id = ids_.next(options_.clock());
  item.image = "images/" + item.id + ".png";
  item.predicted = prediction.label;
  item.confidence = prediction.confidence;
  item.created_at = now_iso();
  write_png(to_raw(image), directory_ / item.image);
  append_event(json{{"event", "enqueued"},
                    {"id", item.id},
                    {"image", item.image},
                    {"predicted", sign_name(item.predicted)},
                    {"confidence", item.confidence},
                    {"at", item.created_at}}
                   .dump());
  insert_sorted(items_, item);
  return item;
}

ReviewItem ReviewStore::submit_label(const std::string& id, int label, bool attack_suspected) {
  if (label < 0 || label >= static_cast<int>(kNumClasses)) {
    throw ConfigError(fmt::format("label {} out of range", label));
  }
  std::unique_lock lock(mutex_);
  ReviewItem* item = find(items_, id);
  if (!item) throw NotFoundError("no review item " + id);
  if (item->status != ItemStatus::pending) {
    throw ConflictError(fmt::format("item {} already {}", id, to_string(item->status)));
  }
  const std::string at = now_iso();
  append_event(json{{"event", "labeled"},
                    {"id", id},
                    {"label", sign_name(label)},
                    {"attack_suspected", attack_suspected},
                    {"at", at}}
                   .dump());
  item->status = ItemStatus::labeled;
  item->human_label = label;
  item->attack_suspected = attack_suspected;
  item->labeled_at = at;
  return *item;
}

ReviewItem ReviewStore::skip(const std::string& id) {
  std::unique_lock lock(mutex_);
  ReviewItem* item = find(items_, id);
  if (!item) throw NotFoundError("no review item " + id);
  if (item->status != ItemStatus::pending) {
    throw ConflictError(fmt::format("item {} already {}", id, to_string(item->status)));
  }
  const std::string at = now_iso();
  append_event(json{{"event", "skipped"}, {"id", id}, {"at", at}}.dump());
  item->status = ItemStatus::skipped;
  item->labeled_at = at;
  return *item;
}

RetrainBatch ReviewStore::export_retrain_batch() {
  std::unique_lock lock(mutex_);
  RetrainBatch batch;
  std::vector<ReviewItem*> ready;
  for (auto& item : items_) {
    if (item.status == ItemStatus::labeled && !item.exported_in) ready.push_back(&item);
  }
  if (ready.empty()) return batch;

  batch.id = ids_.next(options_.clock());
  batch.exported_at = now_iso();
  batch.provenance = fmt::format(
      "human labels from review store {}; quarantined until explicitly merged into training data",
      fs::absolute(directory_).string());
  batch.directory = directory_ / "exports" / batch.id;
  fs::create_directories(batch.directory / "images");
  fs::create_directories(batch.directory / "annotations");

  json ids = json::array();
  json entries = json::array();
  for (ReviewItem* item : ready) {
    const std::string filename = item->id + ".png";
    const fs::path dst = batch.directory / "images" / filename;
    fs::copy_file(image_path(*item), dst, fs::copy_options::overwrite_existing);
    const RawImage raw = read_png(dst);
    write_annotation(batch.directory / "annotations" / (item->id + ".xml"), filename, raw.width, raw.height,
                     sign_name(*item->human_label), PixelRect{0, 0, raw.width, raw.height});
    batch.items.push_back({item->id, "images/" + filename, *item->human_label});
    ids.push_back(item->id);
    entries.push_back({{"id", item->id},
                       {"image", "images/" + filename},
                       {"label", sign_name(*item->human_label)},
                       {"attack_suspected", item->attack_suspected},
                       {"predicted", sign_name(item->predicted)},
                       {"confidence", item->confidence}});
  }
  {
    std::ofstream os(batch.directory / "batch.json", std::ios::trunc);
    os << json{{"batch", batch.id}, {"exported_at", batch.exported_at}, {"provenance", batch.provenance}, {"items", entries}}
              .dump(2)
       << "\n";
    if (!os) throw StorageError("failed writing batch manifest in " + batch.directory.string());
  }
  // The exported event is the commit point: files written before it may be
  // orphaned by a crash but items are never marked exported twice.
  append_event(json{{"event", "exported"},
                    {"batch", batch.id},
                    {"ids", ids},
                    {"path", "exports/" + batch.id},
                    {"at", batch.exported_at}}
                   .dump());
  for (ReviewItem* item : ready) item->exported_in = batch.id;
  return batch;
}

QueueStats ReviewStore::queue_stats() const {
  std::shared_lock lock(mutex_);
  QueueStats stats;
  for (const auto& item : items_) {
    switch (item.status) {
      case ItemStatus::pending: ++stats.pending; break;
      case ItemStatus::labeled: ++stats.labeled; break;
      case ItemStatus::skipped: ++stats.skipped; break;
    }
    if (item.exported_in) ++stats.exported;
    const auto bin = std::min<std::size_t>(9, static_cast<std::size_t>(std::max(0.0, item.confidence) * 10.0));
    ++stats.confidence_histogram[bin];
  }
  return stats;
}

std::optional<ReviewItem> ReviewStore::get(const std::string& id) const {
  std::shared_lock lock(mutex_);
  auto it = std::lower_bound(items_.begin(), items_.end(), id, [](const auto& item, const auto& key) { return item.id < key; });
  if (it == items_.end() || it->id != id) return std::nullopt;
  return *it;
}

std::vector<ReviewItem> ReviewStore::list(std::optional<ItemStatus> status, std::size_t offset, std::size_t limit,
                                          std::size_t* total) const {
  std::shared_lock lock(mutex_);
  std::vector<ReviewItem> out;
  std::size_t matched = 0;
  for (const auto& item : items_) {
    if (status && item.status != *status) continue;
    if (matched >= offset && out.size() < limit) out.push_back(item);
    ++matched;
  }
  if (total) *total = matched;
  return out;
}

std::vector<ReviewItem> ReviewStore::snapshot() const {
  std::shared_lock lock(mutex_);
  return items_;
}

std::string item_to_json(const ReviewItem& item) {
  json doc{{"id", item.id},
           {"image", item.image},
           {"predicted", sign_name(item.predicted)},
           {"confidence", item.confidence},
           {"status", std::string(to_string(item.status))},
           {"attack_suspected", item.attack_suspected},
           {"created_at", item.created_at}};
  doc["human_label"] = item.human_label ? json(sign_name(*item.human_label)) : json(nullptr);
  doc["labeled_at"] = item.labeled_at ? json(*item.labeled_at) : json(nullptr);
  doc["exported_in"] = item.exported_in ? json(*item.exported_in) : json(nullptr);
  return doc.dump();
}

std::string stats_to_json(const QueueStats& stats) {
  return json{{"pending", stats.pending},
              {"labeled", stats.labeled},
              {"skipped", stats.skipped},
              {"exported", stats.exported},
              {"total", stats.total()},
              {"confidence_histogram", stats.confidence_histogram}}
      .dump();
}

}  // namespace signbench::hitl
