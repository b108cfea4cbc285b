#pragma once

#include <vector>

#include "detcal/ingest.hpp"
#include "detcal/types.hpp"

namespace detcal::postprocess {

/// Deploy-style filtering stages: score threshold, per-class NMS, top-k.
/// Disabled means the raw-output perspective (fixed-size set detectors).
struct PostProcessConfig {
  bool enabled = true;
  double score_threshold = 0.05;
  double nms_iou_threshold = 0.5;
  int top_k = 100;

  void validate() const;
};

/// Keeps detections whose maximum object-class probability reaches the
/// threshold; background mass never counts as a score. Order preserved.
std::vector<Detection> score_filter(const std::vector<Detection>& dets, double threshold);

/// Greedy per-class NMS. Class membership is argmax over the full vector;
/// background-argmax detections bypass suppression. Survivors are ordered by
/// descending class score then class index, background pass-throughs last in
/// input order.
std::vector<Detection> nms_per_class(const std::vector<Detection>& dets, double iou_threshold);

/// The k detections with the largest max-object-class probability, ties kept
/// in input order; output sorted by that score descending.
std::vector<Detection> top_k(const std::vector<Detection>& dets, int k);

/// score_filter -> nms_per_class -> top_k per image when enabled (tag
/// "postprocessed"), identity when disabled (tag "raw").
ingest::PredictionDump run_pipeline(const ingest::PredictionDump& dump,
                                    const PostProcessConfig& cfg);

}  // namespace detcal::postprocess
