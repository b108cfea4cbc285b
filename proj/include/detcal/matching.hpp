#pragma once

#include <vector>

#include "detcal/ingest.hpp"
#include "detcal/types.hpp"

namespace detcal::matching {

enum class MatchMode { OneToOne, ManyToOne };

struct MatchConfig {
  double iou_threshold = 0.5;  // a pair matches when iou >= threshold
  MatchMode mode = MatchMode::OneToOne;

  void validate() const;
};

/// Per-image assignment outcome. The three collections partition all ground
/// truths and all predictions of the image.
struct MatchResult {
  std::vector<std::pair<int, int>> matched_pairs;  // (gt_index, pred_index)
  std::vector<int> unmatched_pred_indices;
  std::vector<int> unmatched_gt_indices;
};

/// OneToOne: greedy over candidate pairs sorted by IoU descending (ties:
/// higher max object probability of the prediction, lower gt index, lower
/// pred index). ManyToOne: every prediction joins its highest-IoU ground
/// truth above the threshold (ties: lower gt index).
MatchResult match_image(const std::vector<GroundTruth>& gts, const std::vector<Detection>& dets,
                        const MatchConfig& cfg);

/// Assembles the full evaluation set: one matched record per pair, one
/// background record per unmatched prediction, one missing record per
/// unmatched ground truth, concatenated in image id order.
EvaluationSet build_evaluation_set(const ingest::Dataset& dataset,
                                   const ingest::PredictionDump& dump, const MatchConfig& cfg);

/// One JSON object per image describing its MatchResult; diagnostic output.
std::string match_debug_json_lines(const ingest::Dataset& dataset,
                                   const ingest::PredictionDump& dump, const MatchConfig& cfg);

}  // namespace detcal::matching
