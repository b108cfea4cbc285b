#include "detcal/ingest.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace detcal::ingest {

using nlohmann::json;

namespace {

json parse_json(const std::string& text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) {
    throw Error(ErrorKind::MalformedInput, "invalid JSON");
  }
  return doc;
}

const json& require(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end()) {
    throw Error(ErrorKind::MalformedInput, std::string("missing field '") + key + "'");
  }
  return *it;
}

// Clamps a normalized corner box into [0,1]^2. Boxes that do not touch the
// unit square at all are corrupt input.
BBox sanitize_box(double x1, double y1, double x2, double y2, int* clamp_counter) {
  if (!(std::isfinite(x1) && std::isfinite(y1) && std::isfinite(x2) && std::isfinite(y2))) {
    throw Error(ErrorKind::MalformedInput, "non-finite box coordinate");
  }
  if (x2 < x1 || y2 < y1) {
    throw Error(ErrorKind::MalformedInput, "box with negative extent");
  }
  if (x1 >= 1.0 || y1 >= 1.0 || x2 <= 0.0 || y2 <= 0.0) {
    throw Error(ErrorKind::OutOfRangeBox, "box lies fully outside the image");
  }
  const double overshoot = std::max({0.0 - x1, 0.0 - y1, x2 - 1.0, y2 - 1.0});
  if (overshoot > 1e-6 && clamp_counter != nullptr) ++(*clamp_counter);
  return BBox{std::clamp(x1, 0.0, 1.0), std::clamp(y1, 0.0, 1.0), std::clamp(x2, 0.0, 1.0),
              std::clamp(y2, 0.0, 1.0)};
}

BBox box_from_array(const json& arr, int* clamp_counter) {
  if (!arr.is_array() || arr.size() != 4) {
    throw Error(ErrorKind::MalformedInput, "bbox must be an array of 4 numbers");
  }
  return sanitize_box(arr[0].get<double>(), arr[1].get<double>(), arr[2].get<double>(),
                      arr[3].get<double>(), clamp_counter);
}

Dataset parse_native_gt(const json& doc) {
  Dataset ds;
  for (const auto& name : require(doc, "class_names")) {
    ds.class_names.push_back(name.get<std::string>());
  }
  if (ds.num_classes() < 2) {
    throw Error(ErrorKind::MalformedInput, "need at least 2 object classes");
  }
  std::set<ImageId> known;
  for (const auto& img : require(doc, "images")) {
    ImageInfo info{require(img, "id").get<ImageId>(), require(img, "width").get<int>(),
                   require(img, "height").get<int>()};
    if (!known.insert(info.id).second) {
      throw Error(ErrorKind::MalformedInput, "duplicate image id " + std::to_string(info.id));
    }
    ds.images.push_back(info);
    ds.targets[info.id];
  }
  std::sort(ds.images.begin(), ds.images.end(),
            [](const ImageInfo& a, const ImageInfo& b) { return a.id < b.id; });
  for (const auto& ann : require(doc, "annotations")) {
    GroundTruth gt;
    gt.image_id = require(ann, "image_id").get<ImageId>();
    gt.label = require(ann, "label").get<int>();
    if (known.count(gt.image_id) == 0) {
      throw Error(ErrorKind::InconsistentReference,
                  "annotation refers to unknown image " + std::to_string(gt.image_id));
    }
    if (gt.label < 0 || gt.label >= ds.num_classes()) {
      throw Error(ErrorKind::MalformedInput, "label out of range: " + std::to_string(gt.label));
    }
    gt.box = box_from_array(require(ann, "bbox"), &ds.boxes_clamped);
    ds.targets[gt.image_id].push_back(gt);
  }
  return ds;
}

Dataset parse_coco_gt(const json& doc) {
  Dataset ds;
  struct Dim { double w; double h; };
  std::map<ImageId, Dim> dims;
  for (const auto& img : require(doc, "images")) {
    ImageInfo info{require(img, "id").get<ImageId>(), require(img, "width").get<int>(),
                   require(img, "height").get<int>()};
    if (info.width <= 0 || info.height <= 0) {
      throw Error(ErrorKind::MalformedInput, "non-positive image dimensions");
    }
    if (!dims.emplace(info.id, Dim{double(info.width), double(info.height)}).second) {
      throw Error(ErrorKind::MalformedInput, "duplicate image id " + std::to_string(info.id));
    }
    ds.images.push_back(info);
    ds.targets[info.id];
  }
  std::sort(ds.images.begin(), ds.images.end(),
            [](const ImageInfo& a, const ImageInfo& b) { return a.id < b.id; });

  // Dense remap sorted by original category id, so class indices are stable
  // across runs regardless of file ordering.
  std::map<std::int64_t, std::string> cats;
  for (const auto& cat : require(doc, "categories")) {
    cats[require(cat, "id").get<std::int64_t>()] = require(cat, "name").get<std::string>();
  }
  for (const auto& [orig, name] : cats) {
    ds.category_remap[orig] = ds.num_classes();
    ds.class_names.push_back(name);
  }
  if (ds.num_classes() < 2) {
    throw Error(ErrorKind::MalformedInput, "need at least 2 object classes");
  }

  for (const auto& ann : require(doc, "annotations")) {
    GroundTruth gt;
    gt.image_id = require(ann, "image_id").get<ImageId>();
    auto dim = dims.find(gt.image_id);
    if (dim == dims.end()) {
      throw Error(ErrorKind::InconsistentReference,
                  "annotation refers to unknown image " + std::to_string(gt.image_id));
    }
    const std::int64_t cat = require(ann, "category_id").get<std::int64_t>();
    auto remap = ds.category_remap.find(cat);
    if (remap == ds.category_remap.end()) {
      throw Error(ErrorKind::InconsistentReference,
                  "annotation refers to unknown category " + std::to_string(cat));
    }
    gt.label = remap->second;
    const json& bbox = require(ann, "bbox");
    if (!bbox.is_array() || bbox.size() != 4) {
      throw Error(ErrorKind::MalformedInput, "bbox must be [x, y, w, h]");
    }
    const double x = bbox[0].get<double>();
    const double y = bbox[1].get<double>();
    const double w = bbox[2].get<double>();
    const double h = bbox[3].get<double>();
    if (w < 0.0 || h < 0.0) {
      throw Error(ErrorKind::MalformedInput, "negative box extent");
    }
    gt.box = sanitize_box(x / dim->second.w, y / dim->second.h, (x + w) / dim->second.w,
                          (y + h) / dim->second.h, &ds.boxes_clamped);
    ds.targets[gt.image_id].push_back(gt);
  }
  return ds;
}

}  // namespace

std::size_t Dataset::annotation_count() const {
  std::size_t n = 0;
  for (const auto& [id, gts] : targets) n += gts.size();
  return n;
}

std::size_t PredictionDump::detection_count() const {
  std::size_t n = 0;
  for (const auto& [id, dets] : detections) n += dets.size();
  return n;
}

Dataset parse_ground_truth(const std::string& text, GtFormat format) {
  try {
    const json doc = parse_json(text);
    return format == GtFormat::CocoJson ? parse_coco_gt(doc) : parse_native_gt(doc);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedInput, e.what());
  }
}

PredictionDump parse_predictions(const std::string& text, int expected_classes, PredKind kind) {
  try {
    const json doc = parse_json(text);
    PredictionDump dump;
    dump.num_classes = require(doc, "num_classes").get<int>();
    if (expected_classes > 0 && dump.num_classes != expected_classes) {
      throw Error(ErrorKind::DimensionMismatch,
                  "prediction dump declares K=" + std::to_string(dump.num_classes) +
                      ", expected K=" + std::to_string(expected_classes));
    }
    const std::string file_kind = require(doc, "kind").get<std::string>();
    if (file_kind != "probs" && file_kind != "logits") {
      throw Error(ErrorKind::MalformedInput, "kind must be 'probs' or 'logits'");
    }
    const bool logits = kind == PredKind::FromFile ? file_kind == "logits"
                                                   : kind == PredKind::Logits;
    if (doc.contains("source_tag")) dump.source_tag = doc["source_tag"].get<std::string>();
    const std::size_t want = static_cast<std::size_t>(dump.num_classes) + 1;
    for (const auto& rec : require(doc, "detections")) {
      Detection det;
      det.image_id = require(rec, "image_id").get<ImageId>();
      det.box = box_from_array(require(rec, "bbox"), &dump.boxes_clamped);
      const json& vec = require(rec, "vector");
      if (!vec.is_array() || vec.size() != want) {
        throw Error(ErrorKind::DimensionMismatch,
                    "vector length " + std::to_string(vec.size()) + ", expected " +
                        std::to_string(want));
      }
      std::vector<double> values;
      values.reserve(want);
      for (const auto& v : vec) values.push_back(v.get<double>());
      det.probs = logits ? ProbVector::softmax(values)
                         : ProbVector::validated(std::move(values), /*renormalize=*/true);
      dump.detections[det.image_id].push_back(std::move(det));
    }
    return dump;
  } catch (const json::exception& e) {
    throw Error(ErrorKind::MalformedInput, e.what());
  }
}

std::string serialize_ground_truth(const Dataset& dataset) {
  json doc;
  doc["class_names"] = dataset.class_names;
  doc["images"] = json::array();
  for (const auto& img : dataset.images) {
    doc["images"].push_back({{"id", img.id}, {"width", img.width}, {"height", img.height}});
  }
  doc["annotations"] = json::array();
  for (const auto& [id, gts] : dataset.targets) {
    for (const auto& gt : gts) {
      doc["annotations"].push_back(
          {{"image_id", gt.image_id},
           {"label", gt.label},
           {"bbox", {gt.box.x1, gt.box.y1, gt.box.x2, gt.box.y2}}});
    }
  }
  return doc.dump(2) + "\n";
}

std::string serialize_predictions(const PredictionDump& dump) {
  json doc;
  doc["num_classes"] = dump.num_classes;
  doc["kind"] = "probs";
  doc["source_tag"] = dump.source_tag;
  doc["detections"] = json::array();
  for (const auto& [id, dets] : dump.detections) {
    for (const auto& det : dets) {
      json vec = json::array();
      for (double v : det.probs.values()) vec.push_back(v);
      doc["detections"].push_back(
          {{"image_id", det.image_id},
           {"bbox", {det.box.x1, det.box.y1, det.box.x2, det.box.y2}},
           {"vector", std::move(vec)}});
    }
  }
  return doc.dump(2) + "\n";
}

namespace {
std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorKind::IoFailure, "cannot open " + path);
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}
}  // namespace

Dataset load_ground_truth(const std::string& path, GtFormat format) {
  return parse_ground_truth(read_file(path), format);
}

PredictionDump load_predictions(const std::string& path, int expected_classes, PredKind kind) {
  return parse_predictions(read_file(path), expected_classes, kind);
}

}  // namespace detcal::ingest
