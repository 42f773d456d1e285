#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include <algorithm>
#include <cmath>
#include <fmt/format.h>
#include <fstream>
#include <set>

#include "signbench/dataset.hpp"
#include "signbench/error.hpp"

namespace signbench {

namespace fs = std::filesystem;
namespace pt = boost::property_tree;

namespace {

struct ParsedObject {
  std::string name;
  PixelRect box;
};

int read_int(const pt::ptree& node, const char* key) {
  // VOC files from some tools carry float coordinates ("12.0").
  const auto text = node.get<std::string>(key);
  std::size_t used = 0;
  const double v = std::stod(text, &used);
  if (used == 0) throw DataError(fmt::format("field {} is not a number", key));
  return static_cast<int>(std::lround(v));
}

}  // namespace

std::vector<int> DatasetManifest::class_indices() const {
  std::vector<int> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.label.index);
  return out;
}

IngestResult load_annotations(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("dataset directory not found: " + dir.string());
  IngestResult result;
  result.manifest.root = dir;
  const fs::path ann_dir = dir / "annotations";
  const fs::path img_dir = dir / "images";

  std::vector<fs::path> xml_files;
  if (fs::is_directory(ann_dir)) {
    for (const auto& entry : fs::directory_iterator(ann_dir)) {
      if (entry.is_regular_file() && entry.path().extension() == ".xml") xml_files.push_back(entry.path());
    }
  }
  std::sort(xml_files.begin(), xml_files.end());

  std::set<std::string> annotated_images;
  std::optional<LabelDomain> domain;
  for (const auto& xml : xml_files) {
    const std::string file = xml.filename().string();
    // a broken annotation already reports its image; don't flag it again as an orphan
    annotated_images.insert(xml.stem().string() + ".png");
    try {
      pt::ptree tree;
      pt::read_xml(xml.string(), tree);
      const pt::ptree& root = tree.get_child("annotation");
      const auto filename = root.get<std::string>("filename");
      annotated_images.insert(filename);
      const fs::path image_rel = fs::path("images") / filename;
      if (!fs::is_regular_file(dir / image_rel)) {
        result.errors.push_back({file, "image not found: " + image_rel.string()});
        continue;
      }
      int width = 0, height = 0;
      if (auto size = root.get_child_optional("size")) {
        width = read_int(*size, "width");
        height = read_int(*size, "height");
      } else {
        const RawImage raw = read_png(dir / image_rel);
        width = raw.width;
        height = raw.height;
      }
      if (width <= 0 || height <= 0) throw DataError("non-positive image size");

      std::optional<SampleRecord> sample;
      for (const auto& [key, node] : root) {
        if (key != "object") continue;
        const auto name = node.get<std::string>("name");
        const auto label = parse_class_label(name);
        if (!label) {
          result.warnings.push_back({file, "unknown class '" + name + "' skipped"});
          continue;
        }
        const pt::ptree& bb = node.get_child("bndbox");
        const PixelRect box{read_int(bb, "xmin"), read_int(bb, "ymin"), read_int(bb, "xmax"), read_int(bb, "ymax")};
        if (!box.within(width, height)) {
          throw DataError(fmt::format("bounding box ({},{})-({},{}) outside {}x{} image", box.x0, box.y0, box.x1,
                                      box.y1, width, height));
        }
        if (sample) {
          result.warnings.push_back({file, "extra object '" + name + "' ignored (first known object wins)"});
          continue;
        }
        sample = SampleRecord{xml.stem().string(), image_rel, *label, box, width, height};
      }
      if (!sample) {
        result.warnings.push_back({file, "no object of a known class"});
        continue;
      }
      if (!domain) domain = sample->label.domain;
      if (sample->label.domain != *domain) {
        result.errors.push_back({file, fmt::format("{} label '{}' in a {} dataset", to_string(sample->label.domain),
                                                   sample->label.name(), to_string(*domain))});
        continue;
      }
      result.manifest.samples.push_back(std::move(*sample));
    } catch (const pt::ptree_error& e) {
      result.errors.push_back({file, std::string("malformed annotation: ") + e.what()});
    } catch (const std::exception& e) {
      result.errors.push_back({file, e.what()});
    }
  }

  if (fs::is_directory(img_dir)) {
    std::vector<std::string> orphans;
    for (const auto& entry : fs::directory_iterator(img_dir)) {
      if (entry.path().extension() != ".png") continue;
      const auto name = entry.path().filename().string();
      if (!annotated_images.contains(name)) orphans.push_back(name);
    }
    std::sort(orphans.begin(), orphans.end());
    for (const auto& name : orphans) result.errors.push_back({name, "missing annotation"});
  }
  result.manifest.domain = domain.value_or(LabelDomain::signs);
  return result;
}

void write_annotation(const fs::path& path, const std::string& filename, int width, int height,
                      std::string_view class_name, const PixelRect& box) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw StorageError("cannot write annotation: " + path.string());
  os << "<annotation>\n"
     << "  <folder>images</folder>\n"
     << "  <filename>" << filename << "</filename>\n"
     << "  <size>\n"
     << "    <width>" << width << "</width>\n"
     << "    <height>" << height << "</height>\n"
     << "    <depth>3</depth>\n"
     << "  </size>\n"
     << "  <object>\n"
     << "    <name>" << class_name << "</name>\n"
     << "    <bndbox>\n"
     << "      <xmin>" << box.x0 << "</xmin>\n"
     << "      <ymin>" << box.y0 << "</ymin>\n"
     << "      <xmax>" << box.x1 << "</xmax>\n"
     << "      <ymax>" << box.y1 << "</ymax>\n"
     << "    </bndbox>\n"
     << "  </object>\n"
     << "</annotation>\n";
  if (!os) throw StorageError("failed writing annotation: " + path.string());
}

}  // namespace signbench
