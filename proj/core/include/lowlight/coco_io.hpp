#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "lowlight/rle.hpp"

namespace lowlight::eval {

struct ImageInfo {
  std::int64_t id = 0;
  std::size_t width = 0;
  std::size_t height = 0;
  std::string file_name;
};

struct Category {
  std::int64_t id = 0;
  std::string name;
};

struct InstanceAnnotation {
  std::int64_t id = 0;
  std::int64_t image_id = 0;
  std::int64_t category_id = 0;
  RLEMask mask;
  std::size_t area = 0;  // always mask.area()
  bool iscrowd = false;
};

struct InstancePrediction {
  std::int64_t image_id = 0;
  std::int64_t category_id = 0;
  RLEMask mask;
  double score = 0.0;
};

struct GroundTruth {
  std::vector<ImageInfo> images;
  std::vector<Category> categories;
  std::vector<InstanceAnnotation> annotations;
};

// COCO layout: {"images": [...], "annotations": [...], "categories": [...]}.
// Polygon segmentations are rasterized; RLE segmentations must use integer
// counts. The file's "area" field is replaced by the mask's pixel count.
// Throws ParseError (with byte offset) for malformed JSON and ValidationError
// for inconsistent content.
GroundTruth parse_annotations(std::string_view json_text);
GroundTruth load_annotations(const std::filesystem::path& path);

// JSON array of {image_id, category_id, segmentation (RLE), score}.
std::vector<InstancePrediction> parse_predictions(std::string_view json_text);
std::vector<InstancePrediction> load_predictions(const std::filesystem::path& path);

nlohmann::json rle_to_json(const RLEMask& mask);
nlohmann::json annotations_to_json(const GroundTruth& gt);
nlohmann::json predictions_to_json(const std::vector<InstancePrediction>& preds);

}  // namespace lowlight::eval
