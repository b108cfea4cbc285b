#include <doctest.h>

#include <cmath>

#include "detcal/ingest.hpp"
#include "detcal/synth.hpp"

using namespace detcal;
using namespace detcal::ingest;

namespace {

const char* kMinimalCoco = R"({
  "images": [{"id": 1, "width": 100, "height": 100}],
  "annotations": [{"id": 1, "image_id": 1, "category_id": 17, "bbox": [10, 10, 20, 20]}],
  "categories": [{"id": 17, "name": "cat"}, {"id": 18, "name": "dog"}]
})";

}  // namespace

TEST_SUITE("ingest") {

TEST_CASE("minimal COCO file converts to normalized corners and dense labels") {
  const Dataset ds = parse_ground_truth(kMinimalCoco, GtFormat::CocoJson);
  CHECK(ds.num_classes() == 2);
  CHECK(ds.class_names[0] == "cat");
  CHECK(ds.category_remap.at(17) == 0);
  CHECK(ds.category_remap.at(18) == 1);
  REQUIRE(ds.targets.at(1).size() == 1);
  const GroundTruth& gt = ds.targets.at(1)[0];
  CHECK(gt.label == 0);
  CHECK(gt.box.x1 == doctest::Approx(0.1));
  CHECK(gt.box.y1 == doctest::Approx(0.1));
  CHECK(gt.box.x2 == doctest::Approx(0.3));
  CHECK(gt.box.y2 == doctest::Approx(0.3));
}

TEST_CASE("images with zero annotations give empty target lists") {
  const char* text = R"({
    "images": [{"id": 5, "width": 10, "height": 10}],
    "annotations": [],
    "categories": [{"id": 1, "name": "a"}, {"id": 2, "name": "b"}]
  })";
  const Dataset ds = parse_ground_truth(text, GtFormat::CocoJson);
  CHECK(ds.targets.at(5).empty());
  CHECK(ds.annotation_count() == 0);
}

TEST_CASE("annotation for an unknown image is an InconsistentReference") {
  const char* text = R"({
    "images": [{"id": 1, "width": 10, "height": 10}],
    "annotations": [{"image_id": 2, "category_id": 1, "bbox": [1, 1, 2, 2]}],
    "categories": [{"id": 1, "name": "a"}, {"id": 2, "name": "b"}]
  })";
  try {
    parse_ground_truth(text, GtFormat::CocoJson);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::InconsistentReference);
  }
}

TEST_CASE("boxes crossing the border are clamped, fully outside rejected") {
  const char* clamped = R"({
    "images": [{"id": 1, "width": 100, "height": 100}],
    "annotations": [{"image_id": 1, "category_id": 1, "bbox": [90, 90, 20, 20]}],
    "categories": [{"id": 1, "name": "a"}, {"id": 2, "name": "b"}]
  })";
  const Dataset ds = parse_ground_truth(clamped, GtFormat::CocoJson);
  CHECK(ds.boxes_clamped == 1);
  CHECK(ds.targets.at(1)[0].box.x2 == 1.0);

  const char* outside = R"({
    "images": [{"id": 1, "width": 100, "height": 100}],
    "annotations": [{"image_id": 1, "category_id": 1, "bbox": [150, 150, 20, 20]}],
    "categories": [{"id": 1, "name": "a"}, {"id": 2, "name": "b"}]
  })";
  try {
    parse_ground_truth(outside, GtFormat::CocoJson);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::OutOfRangeBox);
  }
}

TEST_CASE("malformed JSON is rejected") {
  try {
    parse_ground_truth("{nope", GtFormat::NativeJson);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::MalformedInput);
  }
}

TEST_CASE("logit dumps run through a stabilized softmax") {
  const char* symmetric = R"({
    "num_classes": 2, "kind": "logits",
    "detections": [{"image_id": 0, "bbox": [0.1, 0.1, 0.2, 0.2], "vector": [0, 0, 0]}]
  })";
  const PredictionDump d1 = parse_predictions(symmetric, 2);
  const ProbVector& p1 = d1.detections.at(0)[0].probs;
  for (double v : p1.values()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  // softmax(ln 2, 0, 0) has denominator 2 + 1 + 1
  char ln2_buf[40];
  std::snprintf(ln2_buf, sizeof(ln2_buf), "%.17g", std::log(2.0));
  const std::string ln2 = ln2_buf;
  const std::string text = std::string(R"({"num_classes": 2, "kind": "logits", "detections":
    [{"image_id": 0, "bbox": [0.1, 0.1, 0.2, 0.2], "vector": [)") +
                           ln2 + R"(, 0, 0]}]})";
  const PredictionDump d2 = parse_predictions(text, 2);
  const ProbVector& p2 = d2.detections.at(0)[0].probs;
  CHECK(p2[0] == doctest::Approx(0.5).epsilon(1e-9));
  CHECK(p2[1] == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(p2[2] == doctest::Approx(0.25).epsilon(1e-9));
}

TEST_CASE("a vector missing the background entry is a DimensionMismatch") {
  const char* text = R"({
    "num_classes": 2, "kind": "probs",
    "detections": [{"image_id": 0, "bbox": [0.1, 0.1, 0.2, 0.2], "vector": [0.5, 0.5]}]
  })";
  try {
    parse_predictions(text, 2);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DimensionMismatch);
  }
}

TEST_CASE("declared K must match the expected K") {
  const char* text = R"({"num_classes": 3, "kind": "probs", "detections": []})";
  try {
    parse_predictions(text, 2);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DimensionMismatch);
  }
}

TEST_CASE("native serialization round-trips to identical bytes") {
  synth::SyntheticConfig cfg;
  cfg.seed = 99;
  cfg.num_images = 20;
  cfg.num_classes = 3;
  cfg.objects_min = 0;
  cfg.objects_max = 4;
  auto [ds, dump] = synth::generate(cfg);

  const std::string gt_text = serialize_ground_truth(ds);
  const Dataset ds2 = parse_ground_truth(gt_text, GtFormat::NativeJson);
  CHECK(serialize_ground_truth(ds2) == gt_text);
  CHECK(ds2.num_classes() == ds.num_classes());
  CHECK(ds2.annotation_count() == ds.annotation_count());

  const std::string pred_text = serialize_predictions(dump);
  const PredictionDump dump2 = parse_predictions(pred_text, 3);
  CHECK(serialize_predictions(dump2) == pred_text);
  CHECK(dump2.detection_count() == dump.detection_count());
}

}  // TEST_SUITE
