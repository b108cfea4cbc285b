#pragma once

#include <map>
#include <string>
#include <vector>

#include "detcal/types.hpp"

namespace detcal::ingest {

struct ImageInfo {
  ImageId id = 0;
  int width = 0;
  int height = 0;
};

/// Ground-truth side of an evaluation run: images, per-image target sets and
/// the class name table. K = class_names.size() >= 2.
struct Dataset {
  std::vector<ImageInfo> images;  // sorted by id
  std::map<ImageId, std::vector<GroundTruth>> targets;  // one entry per image
  std::vector<std::string> class_names;
  std::map<std::int64_t, ClassIndex> category_remap;  // original COCO id -> dense index
  int boxes_clamped = 0;  // annotations nudged back into [0,1] beyond 1e-6

  int num_classes() const { return static_cast<int>(class_names.size()); }
  std::size_t annotation_count() const;
};

struct PredictionDump {
  std::map<ImageId, std::vector<Detection>> detections;
  int num_classes = 0;
  std::string source_tag = "raw";
  int boxes_clamped = 0;

  std::size_t detection_count() const;
};

enum class GtFormat { CocoJson, NativeJson };
enum class PredKind { FromFile, Probs, Logits };

Dataset parse_ground_truth(const std::string& text, GtFormat format);
PredictionDump parse_predictions(const std::string& text, int expected_classes,
                                 PredKind kind = PredKind::FromFile);

/// Native JSON emitters; parse(serialize(x)) reproduces x exactly.
std::string serialize_ground_truth(const Dataset& dataset);
std::string serialize_predictions(const PredictionDump& dump);

Dataset load_ground_truth(const std::string& path, GtFormat format);
PredictionDump load_predictions(const std::string& path, int expected_classes,
                                PredKind kind = PredKind::FromFile);

}  // namespace detcal::ingest
