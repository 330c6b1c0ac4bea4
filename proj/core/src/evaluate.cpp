#include "lowlight/evaluate.hpp"

#include <algorithm>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "lowlight/error.hpp"
#include "lowlight/parallel.hpp"

namespace lowlight::eval {

double iou_threshold(std::size_t k) { return static_cast<double>(50 + 5 * k) / 100.0; }
double recall_point(std::size_t k) { return static_cast<double>(k) / 100.0; }

bool in_area_range(std::size_t area, AreaRange r) {
  switch (r) {
    case AreaRange::All:
      return true;
    case AreaRange::Small:
      return area < kSmallMax;
    case AreaRange::Medium:
      return area >= kSmallMax && area < kMediumMax;
    case AreaRange::Large:
      return area >= kMediumMax;
  }
  return false;
}

namespace {

constexpr std::size_t kAreas = kAllAreas.size();

// One (image, category) matching unit.
struct Unit {
  std::vector<std::size_t> gts;   // annotation indices
  std::vector<std::size_t> dets;  // prediction indices, sorted by (-score, index)
};

struct DetOutcome {
  bool matched = false;
  bool ignored = false;
};

struct UnitResult {
  // [area][threshold][det position within unit]
  std::array<std::array<std::vector<DetOutcome>, kNumThresholds>, kAreas> outcomes;
  std::array<std::size_t, kAreas> num_positive_gt{};
};

UnitResult match_unit(const Unit& u, const std::vector<InstanceAnnotation>& gts,
                      const std::vector<InstancePrediction>& preds) {
  const std::size_t nd = u.dets.size(), ng = u.gts.size();
  std::vector<double> iou(nd * ng, 0.0);
  for (std::size_t d = 0; d < nd; ++d) {
    const auto& dm = preds[u.dets[d]].mask;
    for (std::size_t g = 0; g < ng; ++g) {
      const auto& ann = gts[u.gts[g]];
      if (ann.iscrowd) {
        const std::size_t da = dm.area();
        iou[d * ng + g] =
            da == 0 ? 0.0
                    : static_cast<double>(intersection_area(dm, ann.mask)) / static_cast<double>(da);
      } else {
        iou[d * ng + g] = mask_iou(dm, ann.mask);
      }
    }
  }

  UnitResult res;
  for (std::size_t a = 0; a < kAreas; ++a) {
    std::vector<bool> gt_ignore(ng);
    for (std::size_t g = 0; g < ng; ++g) {
      const auto& ann = gts[u.gts[g]];
      gt_ignore[g] = ann.iscrowd || !in_area_range(ann.area, kAllAreas[a]);
      if (!gt_ignore[g]) ++res.num_positive_gt[a];
    }
    // Candidate order: non-ignored ground truths first, input order within each group.
    std::vector<std::size_t> order(ng);
    std::iota(order.begin(), order.end(), 0);
    std::stable_partition(order.begin(), order.end(), [&](std::size_t g) { return !gt_ignore[g]; });

    for (std::size_t t = 0; t < kNumThresholds; ++t) {
      const double thr = iou_threshold(t);
      std::vector<bool> gt_taken(ng, false);
      auto& out = res.outcomes[a][t];
      out.assign(nd, {});
      for (std::size_t d = 0; d < nd; ++d) {
        double best = -1.0;
        std::ptrdiff_t m = -1;
        for (std::size_t g : order) {
          if (gt_taken[g] && !gts[u.gts[g]].iscrowd) continue;
          // Once a regular ground truth is matched, ignored ones cannot take over.
          if (m >= 0 && !gt_ignore[static_cast<std::size_t>(m)] && gt_ignore[g]) break;
          const double v = iou[d * ng + g];
          if (v < thr || v <= best) continue;
          best = v;
          m = static_cast<std::ptrdiff_t>(g);
        }
        if (m >= 0) {
          gt_taken[static_cast<std::size_t>(m)] = true;
          out[d].matched = true;
          out[d].ignored = gt_ignore[static_cast<std::size_t>(m)];
        } else {
          out[d].ignored = !in_area_range(preds[u.dets[d]].mask.area(), kAllAreas[a]);
        }
      }
    }
  }
  return res;
}

struct ScoredDet {
  double score;
  std::size_t index;
  DetOutcome outcome;
};

// 101-point interpolated precision; dets must already be in rank order.
double interpolated_ap(const std::vector<ScoredDet>& dets, std::size_t num_positive) {
  std::vector<double> recall, precision;
  std::size_t tp = 0, fp = 0;
  for (const auto& d : dets) {
    if (d.outcome.ignored) continue;
    if (d.outcome.matched) {
      ++tp;
    } else {
      ++fp;
    }
    recall.push_back(static_cast<double>(tp) / static_cast<double>(num_positive));
    precision.push_back(static_cast<double>(tp) / static_cast<double>(tp + fp));
  }
  for (std::size_t i = precision.size(); i-- > 1;) {
    precision[i - 1] = std::max(precision[i - 1], precision[i]);
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < kNumRecallPoints; ++k) {
    const double r = recall_point(k);
    auto it = std::lower_bound(recall.begin(), recall.end(), r);
    if (it != recall.end()) sum += precision[static_cast<std::size_t>(it - recall.begin())];
  }
  return sum / static_cast<double>(kNumRecallPoints);
}

double mean_defined(const std::vector<double>& values) {
  double sum = 0.0;
  std::size_t n = 0;
  for (double v : values) {
    if (v == kUndefined) continue;
    sum += v;
    ++n;
  }
  return n == 0 ? kUndefined : sum / static_cast<double>(n);
}

struct ImageDims {
  std::size_t height;
  std::size_t width;
};

EvalReport evaluate_impl(const std::map<std::int64_t, ImageDims>& images,
                         const std::map<std::int64_t, std::string>& category_names,
                         const std::vector<InstanceAnnotation>& gts,
                         const std::vector<InstancePrediction>& preds) {
  std::set<std::int64_t> unknown;
  std::vector<std::size_t> bad_size;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const auto& p = preds[i];
    auto it = images.find(p.image_id);
    if (it == images.end()) {
      unknown.insert(p.image_id);
      continue;
    }
    if (p.mask.height != it->second.height || p.mask.width != it->second.width) {
      bad_size.push_back(i);
    }
    if (!(p.score >= 0.0 && p.score <= 1.0)) {
      throw ValidationError("prediction " + std::to_string(i) + " has score outside [0, 1]");
    }
    p.mask.validate();
  }
  if (!unknown.empty()) {
    std::ostringstream msg;
    msg << "predictions reference unknown image ids:";
    for (auto id : unknown) msg << ' ' << id;
    throw ValidationError(msg.str());
  }
  if (!bad_size.empty()) {
    std::ostringstream msg;
    msg << "prediction masks do not match their image size (indices:";
    for (auto i : bad_size) msg << ' ' << i;
    msg << ')';
    throw ValidationError(msg.str());
  }

  std::map<std::int64_t, std::string> categories = category_names;
  for (const auto& a : gts) categories.emplace(a.category_id, "");
  for (const auto& p : preds) categories.emplace(p.category_id, "");

  std::map<std::pair<std::int64_t, std::int64_t>, Unit> unit_map;  // (category, image)
  for (std::size_t i = 0; i < gts.size(); ++i) {
    unit_map[{gts[i].category_id, gts[i].image_id}].gts.push_back(i);
  }
  for (std::size_t i = 0; i < preds.size(); ++i) {
    unit_map[{preds[i].category_id, preds[i].image_id}].dets.push_back(i);
  }
  auto rank_less = [&](std::size_t a, std::size_t b) {
    if (preds[a].score != preds[b].score) return preds[a].score > preds[b].score;
    return a < b;
  };
  std::vector<std::pair<std::int64_t, Unit>> units;
  for (auto& [key, unit] : unit_map) {
    std::sort(unit.dets.begin(), unit.dets.end(), rank_less);
    units.emplace_back(key.first, std::move(unit));
  }

  std::vector<UnitResult> results(units.size());
  parallel_for(units.size(),
               [&](std::size_t i) { results[i] = match_unit(units[i].second, gts, preds); });

  EvalReport report;
  std::array<std::vector<double>, kAreas> cat_ap;
  std::vector<double> cat_ap50, cat_ap75;
  std::size_t u = 0;
  for (const auto& [cat_id, name] : categories) {
    CategoryReport cr;
    cr.category_id = cat_id;
    cr.name = name;
    for (const auto& a : gts) cr.num_gt += (a.category_id == cat_id && !a.iscrowd) ? 1 : 0;
    const std::size_t first = u;
    while (u < units.size() && units[u].first == cat_id) {
      cr.num_pred += units[u].second.dets.size();
      ++u;
    }
    std::array<std::array<double, kNumThresholds>, kAreas> ap_grid;
    for (std::size_t a = 0; a < kAreas; ++a) {
      std::size_t npos = 0;
      for (std::size_t k = first; k < u; ++k) npos += results[k].num_positive_gt[a];
      for (std::size_t t = 0; t < kNumThresholds; ++t) {
        if (npos == 0) {
          ap_grid[a][t] = kUndefined;
          continue;
        }
        std::vector<ScoredDet> dets;
        for (std::size_t k = first; k < u; ++k) {
          const auto& ud = units[k].second.dets;
          for (std::size_t d = 0; d < ud.size(); ++d) {
            dets.push_back({preds[ud[d]].score, ud[d], results[k].outcomes[a][t][d]});
          }
        }
        std::sort(dets.begin(), dets.end(), [](const ScoredDet& x, const ScoredDet& y) {
          if (x.score != y.score) return x.score > y.score;
          return x.index < y.index;
        });
        ap_grid[a][t] = interpolated_ap(dets, npos);
      }
    }
    auto over_thresholds = [&](std::size_t a) {
      return mean_defined({ap_grid[a].begin(), ap_grid[a].end()});
    };
    cr.metrics.ap = over_thresholds(0);
    cr.metrics.ap50 = ap_grid[0][0];
    cr.metrics.ap75 = ap_grid[0][5];
    cr.metrics.ap_s = over_thresholds(1);
    cr.metrics.ap_m = over_thresholds(2);
    cr.metrics.ap_l = over_thresholds(3);
    cat_ap[0].push_back(cr.metrics.ap);
    cat_ap[1].push_back(cr.metrics.ap_s);
    cat_ap[2].push_back(cr.metrics.ap_m);
    cat_ap[3].push_back(cr.metrics.ap_l);
    cat_ap50.push_back(cr.metrics.ap50);
    cat_ap75.push_back(cr.metrics.ap75);
    report.per_category.push_back(std::move(cr));
  }
  report.overall.ap = mean_defined(cat_ap[0]);
  report.overall.ap50 = mean_defined(cat_ap50);
  report.overall.ap75 = mean_defined(cat_ap75);
  report.overall.ap_s = mean_defined(cat_ap[1]);
  report.overall.ap_m = mean_defined(cat_ap[2]);
  report.overall.ap_l = mean_defined(cat_ap[3]);
  return report;
}

void check_annotation_sizes(const std::map<std::int64_t, ImageDims>& images,
                            const std::vector<InstanceAnnotation>& gts) {
  for (const auto& a : gts) {
    a.mask.validate();
    const auto& dims = images.at(a.image_id);
    if (a.mask.height != dims.height || a.mask.width != dims.width) {
      throw ValidationError("annotation " + std::to_string(a.id) +
                            " mask size does not match its image");
    }
    if (a.area != a.mask.area()) {
      throw ValidationError("annotation " + std::to_string(a.id) + " area " +
                            std::to_string(a.area) + " differs from mask pixel count " +
                            std::to_string(a.mask.area()));
    }
  }
}

}  // namespace

EvalReport evaluate(const GroundTruth& gt, const std::vector<InstancePrediction>& preds) {
  std::map<std::int64_t, ImageDims> images;
  for (const auto& im : gt.images) images[im.id] = {im.height, im.width};
  for (const auto& a : gt.annotations) {
    if (!images.count(a.image_id)) {
      throw ValidationError("annotation " + std::to_string(a.id) + " references unknown image " +
                            std::to_string(a.image_id));
    }
  }
  check_annotation_sizes(images, gt.annotations);
  std::map<std::int64_t, std::string> names;
  for (const auto& c : gt.categories) names[c.id] = c.name;
  return evaluate_impl(images, names, gt.annotations, preds);
}

EvalReport evaluate(const std::vector<InstanceAnnotation>& gts,
                    const std::vector<InstancePrediction>& preds) {
  std::map<std::int64_t, ImageDims> images;
  for (const auto& a : gts) {
    auto [it, fresh] = images.emplace(a.image_id, ImageDims{a.mask.height, a.mask.width});
    if (!fresh && (it->second.height != a.mask.height || it->second.width != a.mask.width)) {
      throw ValidationError("annotations on image " + std::to_string(a.image_id) +
                            " disagree on the image size");
    }
  }
  check_annotation_sizes(images, gts);
  return evaluate_impl(images, {}, gts, preds);
}

namespace {

nlohmann::json metrics_json(const Metrics& m) {
  return {{"AP", m.ap},     {"AP50", m.ap50}, {"AP75", m.ap75},
          {"AP_S", m.ap_s}, {"AP_M", m.ap_m}, {"AP_L", m.ap_l}};
}

Metrics metrics_from(const nlohmann::json& j) {
  Metrics m;
  m.ap = j.at("AP").get<double>();
  m.ap50 = j.at("AP50").get<double>();
  m.ap75 = j.at("AP75").get<double>();
  m.ap_s = j.at("AP_S").get<double>();
  m.ap_m = j.at("AP_M").get<double>();
  m.ap_l = j.at("AP_L").get<double>();
  return m;
}

}  // namespace

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json j = metrics_json(report.overall);
  j["per_category"] = nlohmann::json::array();
  for (const auto& c : report.per_category) {
    nlohmann::json row = metrics_json(c.metrics);
    row["category_id"] = c.category_id;
    row["name"] = c.name;
    row["num_gt"] = c.num_gt;
    row["num_pred"] = c.num_pred;
    j["per_category"].push_back(std::move(row));
  }
  return j;
}

EvalReport report_from_json(const nlohmann::json& j) {
  EvalReport r;
  try {
    r.overall = metrics_from(j);
    for (const auto& row : j.at("per_category")) {
      CategoryReport c;
      c.category_id = row.at("category_id").get<std::int64_t>();
      c.name = row.value("name", "");
      c.num_gt = row.value("num_gt", std::size_t{0});
      c.num_pred = row.value("num_pred", std::size_t{0});
      c.metrics = metrics_from(row);
      r.per_category.push_back(std::move(c));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("eval report: ") + e.what());
  }
  return r;
}

}  // namespace lowlight::eval
