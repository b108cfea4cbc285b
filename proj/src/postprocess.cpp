#include "detcal/postprocess.hpp"

#include <algorithm>
#include <numeric>

#include "detcal/kernels.hpp"
#include "detcal/parallel.hpp"

namespace detcal::postprocess {

void PostProcessConfig::validate() const {
  if (score_threshold < 0.0 || score_threshold > 1.0 || nms_iou_threshold < 0.0 ||
      nms_iou_threshold > 1.0) {
    throw Error(ErrorKind::InvalidConfig, "post-processing thresholds must lie in [0,1]");
  }
  if (top_k < 1) {
    throw Error(ErrorKind::InvalidConfig, "top_k must be >= 1");
  }
}

std::vector<Detection> score_filter(const std::vector<Detection>& dets, double threshold) {
  std::vector<Detection> kept;
  kept.reserve(dets.size());
  for (const auto& det : dets) {
    if (max_object_prob(det.probs) >= threshold) kept.push_back(det);
  }
  return kept;
}

namespace {

struct Soa {
  std::vector<double> x1, y1, x2, y2;
  void push(const BBox& b) {
    x1.push_back(b.x1);
    y1.push_back(b.y1);
    x2.push_back(b.x2);
    y2.push_back(b.y2);
  }
};

}  // namespace

std::vector<Detection> nms_per_class(const std::vector<Detection>& dets, double iou_threshold) {
  const int num_classes = dets.empty() ? 0 : dets.front().probs.num_classes();
  struct Ranked {
    std::size_t input_index;
    int cls;
    double score;
  };
  std::vector<Ranked> object_dets;
  std::vector<std::size_t> background_dets;
  for (std::size_t i = 0; i < dets.size(); ++i) {
    const int cls = argmax_class(dets[i].probs);
    if (cls == num_classes) {
      background_dets.push_back(i);
    } else {
      object_dets.push_back({i, cls, dets[i].probs[cls]});
    }
  }

  std::vector<Ranked> kept;
  for (int cls = 0; cls < num_classes; ++cls) {
    std::vector<Ranked> candidates;
    for (const auto& r : object_dets) {
      if (r.cls == cls) candidates.push_back(r);
    }
    std::stable_sort(candidates.begin(), candidates.end(),
                     [](const Ranked& a, const Ranked& b) { return a.score > b.score; });
    Soa kept_boxes;
    std::vector<double> ious;
    for (const auto& cand : candidates) {
      const BBox& box = dets[cand.input_index].box;
      bool suppressed = false;
      if (!kept_boxes.x1.empty()) {
        ious.resize(kept_boxes.x1.size());
        kernels::iou_one_vs_many(box.x1, box.y1, box.x2, box.y2, kept_boxes.x1.data(),
                                 kept_boxes.y1.data(), kept_boxes.x2.data(), kept_boxes.y2.data(),
                                 kept_boxes.x1.size(), ious.data());
        suppressed = std::any_of(ious.begin(), ious.end(),
                                 [&](double v) { return v >= iou_threshold; });
      }
      if (!suppressed) {
        kept.push_back(cand);
        kept_boxes.push(box);
      }
    }
  }
  std::stable_sort(kept.begin(), kept.end(), [](const Ranked& a, const Ranked& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.cls < b.cls;
  });

  std::vector<Detection> out;
  out.reserve(kept.size() + background_dets.size());
  for (const auto& r : kept) out.push_back(dets[r.input_index]);
  for (std::size_t i : background_dets) out.push_back(dets[i]);
  return out;
}

std::vector<Detection> top_k(const std::vector<Detection>& dets, int k) {
  if (k < 1) {
    throw Error(ErrorKind::InvalidConfig, "top_k must be >= 1");
  }
  if (dets.size() <= static_cast<std::size_t>(k)) return dets;
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return max_object_prob(dets[a].probs) > max_object_prob(dets[b].probs);
  });
  order.resize(static_cast<std::size_t>(k));
  std::vector<Detection> out;
  out.reserve(order.size());
  for (std::size_t i : order) out.push_back(dets[i]);
  return out;
}

ingest::PredictionDump run_pipeline(const ingest::PredictionDump& dump,
                                    const PostProcessConfig& cfg) {
  cfg.validate();
  if (!cfg.enabled) {
    ingest::PredictionDump out = dump;
    out.source_tag = "raw";
    return out;
  }
  std::vector<const std::vector<Detection>*> inputs;
  std::vector<ImageId> ids;
  for (const auto& [id, dets] : dump.detections) {
    ids.push_back(id);
    inputs.push_back(&dets);
  }
  std::vector<std::vector<Detection>> outputs(inputs.size());
  parallel_for(inputs.size(), [&](std::size_t i) {
    outputs[i] = top_k(nms_per_class(score_filter(*inputs[i], cfg.score_threshold),
                                     cfg.nms_iou_threshold),
                       cfg.top_k);
  });
  ingest::PredictionDump out;
  out.num_classes = dump.num_classes;
  out.source_tag = "postprocessed";
  out.boxes_clamped = dump.boxes_clamped;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out.detections[ids[i]] = std::move(outputs[i]);
  }
  return out;
}

}  // namespace detcal::postprocess
