#include "lowlight/coco_io.hpp"

#include <fstream>
#include <iterator>
#include <limits>
#include <map>
#include <set>

#include "lowlight/error.hpp"

namespace lowlight::eval {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json parse_json(std::string_view text, const std::string& what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError("malformed " + what + " JSON at byte " + std::to_string(e.byte) + ": " +
                         e.what(),
                     e.byte);
  }
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

RLEMask rle_from_json(const json& seg, std::size_t height, std::size_t width,
                      const std::string& where) {
  const auto& size = seg.at("size");
  RLEMask rle;
  rle.height = size.at(0).get<std::size_t>();
  rle.width = size.at(1).get<std::size_t>();
  if (rle.height != height || rle.width != width) {
    throw ValidationError(where + ": RLE size [" + std::to_string(rle.height) + "," +
                          std::to_string(rle.width) + "] does not match image " +
                          std::to_string(height) + "x" + std::to_string(width));
  }
  const auto& counts = seg.at("counts");
  if (!counts.is_array()) {
    throw ValidationError(where + ": only uncompressed (integer list) RLE counts are supported");
  }
  for (const auto& c : counts) {
    if (!c.is_number_integer() || c.get<std::int64_t>() < 0 ||
        c.get<std::int64_t>() > std::numeric_limits<std::uint32_t>::max()) {
      throw ValidationError(where + ": RLE counts must be non-negative 32-bit integers");
    }
    rle.counts.push_back(c.get<std::uint32_t>());
  }
  try {
    rle.validate();
  } catch (const ValidationError& e) {
    throw ValidationError(where + ": " + e.what());
  }
  return rle;
}

RLEMask segmentation_from_json(const json& seg, std::size_t height, std::size_t width,
                               const std::string& where) {
  if (seg.is_object()) return rle_from_json(seg, height, width, where);
  if (!seg.is_array()) throw ValidationError(where + ": segmentation must be a polygon list or RLE");
  std::vector<std::vector<double>> polys;
  for (const auto& p : seg) polys.push_back(p.get<std::vector<double>>());
  try {
    return rasterize_polygons(polys, height, width);
  } catch (const ValidationError& e) {
    throw ValidationError(where + ": " + e.what());
  }
}

}  // namespace

GroundTruth parse_annotations(std::string_view text) {
  const json doc = parse_json(text, "annotation");
  GroundTruth gt;
  try {
    if (!doc.is_object()) throw ValidationError("annotation file must be a JSON object");
    std::map<std::int64_t, std::size_t> image_index;
    for (const auto& im : doc.value("images", json::array())) {
      ImageInfo info;
      info.id = im.at("id").get<std::int64_t>();
      info.width = im.at("width").get<std::size_t>();
      info.height = im.at("height").get<std::size_t>();
      info.file_name = im.value("file_name", "");
      if (info.width == 0 || info.height == 0) {
        throw ValidationError("image " + std::to_string(info.id) + " has zero size");
      }
      if (!image_index.emplace(info.id, gt.images.size()).second) {
        throw ValidationError("duplicate image id " + std::to_string(info.id));
      }
      gt.images.push_back(std::move(info));
    }
    for (const auto& c : doc.value("categories", json::array())) {
      gt.categories.push_back({c.at("id").get<std::int64_t>(), c.value("name", "")});
    }
    for (const auto& a : doc.value("annotations", json::array())) {
      InstanceAnnotation ann;
      ann.id = a.value("id", static_cast<std::int64_t>(gt.annotations.size() + 1));
      ann.image_id = a.at("image_id").get<std::int64_t>();
      ann.category_id = a.at("category_id").get<std::int64_t>();
      const std::string where = "annotation " + std::to_string(ann.id);
      auto it = image_index.find(ann.image_id);
      if (it == image_index.end()) {
        throw ValidationError(where + " references unknown image " + std::to_string(ann.image_id));
      }
      const auto& img = gt.images[it->second];
      ann.mask = segmentation_from_json(a.at("segmentation"), img.height, img.width, where);
      ann.area = ann.mask.area();
      const auto& crowd = a.value("iscrowd", json(0));
      ann.iscrowd = crowd.is_boolean() ? crowd.get<bool>() : crowd.get<int>() != 0;
      gt.annotations.push_back(std::move(ann));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("annotation file: ") + e.what());
  }
  return gt;
}

GroundTruth load_annotations(const fs::path& path) { return parse_annotations(read_text(path)); }

std::vector<InstancePrediction> parse_predictions(std::string_view text) {
  const json doc = parse_json(text, "prediction");
  std::vector<InstancePrediction> preds;
  try {
    if (!doc.is_array()) throw ValidationError("prediction file must be a JSON array");
    for (const auto& p : doc) {
      InstancePrediction pred;
      pred.image_id = p.at("image_id").get<std::int64_t>();
      pred.category_id = p.at("category_id").get<std::int64_t>();
      pred.score = p.at("score").get<double>();
      const std::string where = "prediction " + std::to_string(preds.size());
      if (!(pred.score >= 0.0 && pred.score <= 1.0)) {
        throw ValidationError(where + ": score must lie in [0, 1]");
      }
      const auto& seg = p.at("segmentation");
      if (!seg.is_object()) throw ValidationError(where + ": segmentation must be RLE");
      const auto& size = seg.at("size");
      pred.mask = rle_from_json(seg, size.at(0).get<std::size_t>(), size.at(1).get<std::size_t>(),
                                where);
      preds.push_back(std::move(pred));
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("prediction file: ") + e.what());
  }
  return preds;
}

std::vector<InstancePrediction> load_predictions(const fs::path& path) {
  return parse_predictions(read_text(path));
}

json rle_to_json(const RLEMask& mask) {
  return {{"size", {mask.height, mask.width}}, {"counts", mask.counts}};
}

json annotations_to_json(const GroundTruth& gt) {
  json doc;
  doc["images"] = json::array();
  for (const auto& im : gt.images) {
    doc["images"].push_back(
        {{"id", im.id}, {"width", im.width}, {"height", im.height}, {"file_name", im.file_name}});
  }
  doc["annotations"] = json::array();
  for (const auto& a : gt.annotations) {
    doc["annotations"].push_back({{"id", a.id},
                                  {"image_id", a.image_id},
                                  {"category_id", a.category_id},
                                  {"segmentation", rle_to_json(a.mask)},
                                  {"area", a.area},
                                  {"iscrowd", a.iscrowd ? 1 : 0}});
  }
  doc["categories"] = json::array();
  for (const auto& c : gt.categories) doc["categories"].push_back({{"id", c.id}, {"name", c.name}});
  return doc;
}

json predictions_to_json(const std::vector<InstancePrediction>& preds) {
  json arr = json::array();
  for (const auto& p : preds) {
    arr.push_back({{"image_id", p.image_id},
                   {"category_id", p.category_id},
                   {"segmentation", rle_to_json(p.mask)},
                   {"score", p.score}});
  }
  return arr;
}

}  // namespace lowlight::eval
