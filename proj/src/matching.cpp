#include "detcal/matching.hpp"

#include <algorithm>
#include <sstream>

#include <json.hpp>

#include "detcal/kernels.hpp"
#include "detcal/parallel.hpp"

namespace detcal::matching {

void MatchConfig::validate() const {
  if (!(iou_threshold > 0.0 && iou_threshold <= 1.0)) {
    throw Error(ErrorKind::InvalidConfig, "matching IoU threshold must lie in (0,1]");
  }
}

namespace {

struct Candidate {
  double iou;
  double pred_score;  // max object probability, first tie break
  int gt;
  int pred;
};

bool candidate_before(const Candidate& a, const Candidate& b) {
  if (a.iou != b.iou) return a.iou > b.iou;
  if (a.pred_score != b.pred_score) return a.pred_score > b.pred_score;
  if (a.gt != b.gt) return a.gt < b.gt;
  return a.pred < b.pred;
}

std::vector<std::vector<double>> iou_table(const std::vector<GroundTruth>& gts,
                                           const std::vector<Detection>& dets) {
  std::vector<double> x1, y1, x2, y2;
  x1.reserve(dets.size());
  y1.reserve(dets.size());
  x2.reserve(dets.size());
  y2.reserve(dets.size());
  for (const auto& det : dets) {
    x1.push_back(det.box.x1);
    y1.push_back(det.box.y1);
    x2.push_back(det.box.x2);
    y2.push_back(det.box.y2);
  }
  std::vector<std::vector<double>> table(gts.size(), std::vector<double>(dets.size(), 0.0));
  for (std::size_t g = 0; g < gts.size(); ++g) {
    const BBox& b = gts[g].box;
    if (!dets.empty()) {
      kernels::iou_one_vs_many(b.x1, b.y1, b.x2, b.y2, x1.data(), y1.data(), x2.data(), y2.data(),
                               dets.size(), table[g].data());
    }
  }
  return table;
}

}  // namespace

MatchResult match_image(const std::vector<GroundTruth>& gts, const std::vector<Detection>& dets,
                        const MatchConfig& cfg) {
  cfg.validate();
  MatchResult result;
  const auto table = iou_table(gts, dets);
  std::vector<bool> gt_used(gts.size(), false);
  std::vector<bool> pred_used(dets.size(), false);

  if (cfg.mode == MatchMode::OneToOne) {
    std::vector<Candidate> candidates;
    for (std::size_t g = 0; g < gts.size(); ++g) {
      for (std::size_t p = 0; p < dets.size(); ++p) {
        if (table[g][p] >= cfg.iou_threshold) {
          candidates.push_back(
              {table[g][p], max_object_prob(dets[p].probs), int(g), int(p)});
        }
      }
    }
    std::sort(candidates.begin(), candidates.end(), candidate_before);
    for (const auto& c : candidates) {
      if (gt_used[c.gt] || pred_used[c.pred]) continue;
      gt_used[c.gt] = true;
      pred_used[c.pred] = true;
      result.matched_pairs.emplace_back(c.gt, c.pred);
    }
  } else {
    for (std::size_t p = 0; p < dets.size(); ++p) {
      int best_gt = -1;
      double best_iou = 0.0;
      for (std::size_t g = 0; g < gts.size(); ++g) {
        if (table[g][p] >= cfg.iou_threshold && table[g][p] > best_iou) {
          best_iou = table[g][p];
          best_gt = int(g);
        }
      }
      if (best_gt >= 0) {
        gt_used[best_gt] = true;
        pred_used[p] = true;
        result.matched_pairs.emplace_back(best_gt, int(p));
      }
    }
  }

  std::sort(result.matched_pairs.begin(), result.matched_pairs.end());
  for (std::size_t p = 0; p < dets.size(); ++p) {
    if (!pred_used[p]) result.unmatched_pred_indices.push_back(int(p));
  }
  for (std::size_t g = 0; g < gts.size(); ++g) {
    if (!gt_used[g]) result.unmatched_gt_indices.push_back(int(g));
  }
  return result;
}

namespace {

const std::vector<Detection>& detections_for(const ingest::PredictionDump& dump, ImageId id) {
  static const std::vector<Detection> kEmpty;
  auto it = dump.detections.find(id);
  return it == dump.detections.end() ? kEmpty : it->second;
}

void check_references(const ingest::Dataset& dataset, const ingest::PredictionDump& dump) {
  if (dump.num_classes != dataset.num_classes()) {
    throw Error(ErrorKind::DimensionMismatch,
                "prediction dump has K=" + std::to_string(dump.num_classes) + ", dataset has K=" +
                    std::to_string(dataset.num_classes()));
  }
  for (const auto& [id, dets] : dump.detections) {
    if (dataset.targets.find(id) == dataset.targets.end()) {
      throw Error(ErrorKind::InconsistentReference,
                  "predictions for unknown image " + std::to_string(id));
    }
  }
}

}  // namespace

EvaluationSet build_evaluation_set(const ingest::Dataset& dataset,
                                   const ingest::PredictionDump& dump, const MatchConfig& cfg) {
  cfg.validate();
  check_references(dataset, dump);

  std::vector<ImageId> ids;
  ids.reserve(dataset.images.size());
  for (const auto& img : dataset.images) ids.push_back(img.id);

  std::vector<std::vector<EvaluationRecord>> per_image(ids.size());
  parallel_for(ids.size(), [&](std::size_t i) {
    const auto& gts = dataset.targets.at(ids[i]);
    const auto& dets = detections_for(dump, ids[i]);
    const MatchResult match = match_image(gts, dets, cfg);
    auto& recs = per_image[i];
    recs.reserve(match.matched_pairs.size() + match.unmatched_pred_indices.size() +
                 match.unmatched_gt_indices.size());
    for (const auto& [g, p] : match.matched_pairs) {
      recs.push_back(matched_record(gts[g], dets[p]));
    }
    for (int p : match.unmatched_pred_indices) {
      recs.push_back(background_record_for_prediction(dets[p]));
    }
    for (int g : match.unmatched_gt_indices) {
      recs.push_back(missing_record_for_gt(gts[g], dataset.num_classes()));
    }
  });

  EvaluationSet set;
  set.num_classes = dataset.num_classes();
  for (auto& recs : per_image) {
    for (auto& rec : recs) set.records.push_back(std::move(rec));
  }
  return set;
}

std::string match_debug_json_lines(const ingest::Dataset& dataset,
                                   const ingest::PredictionDump& dump, const MatchConfig& cfg) {
  check_references(dataset, dump);
  std::ostringstream out;
  for (const auto& img : dataset.images) {
    const auto& gts = dataset.targets.at(img.id);
    const auto& dets = detections_for(dump, img.id);
    const MatchResult match = match_image(gts, dets, cfg);
    nlohmann::json line;
    line["image_id"] = img.id;
    line["matched"] = nlohmann::json::array();
    for (const auto& [g, p] : match.matched_pairs) line["matched"].push_back({g, p});
    line["unmatched_pred"] = match.unmatched_pred_indices;
    line["unmatched_gt"] = match.unmatched_gt_indices;
    out << line.dump() << "\n";
  }
  return out.str();
}

}  // namespace detcal::matching
