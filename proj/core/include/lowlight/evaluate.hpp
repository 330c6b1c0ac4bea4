#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "lowlight/coco_io.hpp"

namespace lowlight::eval {

inline constexpr std::size_t kNumThresholds = 10;
inline constexpr std::size_t kNumRecallPoints = 101;
inline constexpr double kUndefined = -1.0;

// t_k = 0.50 + 0.05 k, computed as (50 + 5k) / 100 so 0.6 and friends are exact decimals.
double iou_threshold(std::size_t k);
double recall_point(std::size_t k);

enum class AreaRange { All, Small, Medium, Large };
inline constexpr std::array<AreaRange, 4> kAllAreas = {AreaRange::All, AreaRange::Small,
                                                      AreaRange::Medium, AreaRange::Large};
inline constexpr std::size_t kSmallMax = 32 * 32;
inline constexpr std::size_t kMediumMax = 96 * 96;
bool in_area_range(std::size_t area, AreaRange r);

struct Metrics {
  double ap = kUndefined;
  double ap50 = kUndefined;
  double ap75 = kUndefined;
  double ap_s = kUndefined;
  double ap_m = kUndefined;
  double ap_l = kUndefined;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

struct CategoryReport {
  std::int64_t category_id = 0;
  std::string name;
  std::size_t num_gt = 0;  // non-crowd ground truths
  std::size_t num_pred = 0;
  Metrics metrics;

  friend bool operator==(const CategoryReport&, const CategoryReport&) = default;
};

struct EvalReport {
  Metrics overall;
  std::vector<CategoryReport> per_category;  // ascending category id

  friend bool operator==(const EvalReport&, const EvalReport&) = default;
};

// Throws ValidationError when a prediction references an image absent from
// gt.images, or its mask size differs from that image.
EvalReport evaluate(const GroundTruth& gt, const std::vector<InstancePrediction>& preds);

// Images are taken to be those referenced by the annotations; mask sizes must
// agree per image.
EvalReport evaluate(const std::vector<InstanceAnnotation>& gts,
                    const std::vector<InstancePrediction>& preds);

nlohmann::json report_to_json(const EvalReport& report);
EvalReport report_from_json(const nlohmann::json& j);

}  // namespace lowlight::eval
