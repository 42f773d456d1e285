#include <fmt/format.h>
#include <json.hpp>

#include "signbench/dataset.hpp"
#include "signbench/error.hpp"

namespace signbench {

using nlohmann::json;

namespace {

constexpr const char* kManifestFormat = "signbench-manifest/1";

}  // namespace

std::string manifest_to_json(const DatasetManifest& manifest, const SplitAssignment* split) {
  json doc;
  doc["format"] = kManifestFormat;
  doc["domain"] = std::string(to_string(manifest.domain));
  doc["root"] = manifest.root.string();
  json samples = json::array();
  for (const auto& s : manifest.samples) {
    json item{{"source_id", s.source_id},
              {"image", s.image.generic_string()},
              {"label", std::string(s.label.name())},
              {"width", s.width},
              {"height", s.height}};
    if (s.bbox) item["bbox"] = {s.bbox->x0, s.bbox->y0, s.bbox->x1, s.bbox->y1};
    samples.push_back(std::move(item));
  }
  doc["samples"] = std::move(samples);
  if (split) {
    doc["split"] = {{"seed", split->seed},
                    {"train", split->train},
                    {"validation", split->validation},
                    {"test", split->test}};
  }
  return doc.dump(2) + "\n";
}

DatasetManifest manifest_from_json(const std::string& text, SplitAssignment* split) {
  try {
    const json doc = json::parse(text);
    if (doc.at("format").get<std::string>() != kManifestFormat) throw DataError("unsupported manifest format");
    DatasetManifest manifest;
    manifest.domain = parse_domain(doc.at("domain").get<std::string>());
    manifest.root = doc.at("root").get<std::string>();
    for (const auto& item : doc.at("samples")) {
      SampleRecord s;
      s.source_id = item.at("source_id").get<std::string>();
      s.image = item.at("image").get<std::string>();
      const auto name = item.at("label").get<std::string>();
      const auto label = parse_class_label(name);
      if (!label) throw DataError("unknown label in manifest: " + name);
      s.label = *label;
      s.width = item.at("width").get<int>();
      s.height = item.at("height").get<int>();
      if (item.contains("bbox")) {
        const auto& b = item.at("bbox");
        s.bbox = PixelRect{b.at(0).get<int>(), b.at(1).get<int>(), b.at(2).get<int>(), b.at(3).get<int>()};
      }
      manifest.samples.push_back(std::move(s));
    }
    if (split && doc.contains("split")) {
      const auto& sp = doc.at("split");
      split->seed = sp.at("seed").get<std::uint64_t>();
      split->train = sp.at("train").get<std::vector<std::size_t>>();
      split->validation = sp.at("validation").get<std::vector<std::size_t>>();
      split->test = sp.at("test").get<std::vector<std::size_t>>();
    }
    return manifest;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed manifest JSON: ") + e.what());
  }
}

}  // namespace signbench
