#include <doctest.h>

#include <set>

#include "oracles.hpp"
#include "detcal/postprocess.hpp"

using namespace detcal;
using namespace detcal::postprocess;

namespace {

Detection det(double p0, double p1, double p2, const BBox& box) {
  return Detection{0, ProbVector::validated({p0, p1, p2}, true), box};
}

std::vector<Detection> random_dets(synth::Rng& rng, int n, int num_classes) {
  std::vector<Detection> dets;
  for (int i = 0; i < n; ++i) {
    dets.push_back({0, oracle::random_probs(rng, num_classes), oracle::random_box(rng)});
  }
  return dets;
}

bool same_detection(const Detection& a, const Detection& b) {
  return a.probs == b.probs && a.box == b.box;
}

bool is_subset(const std::vector<Detection>& sub, const std::vector<Detection>& super) {
  std::vector<bool> used(super.size(), false);
  for (const auto& d : sub) {
    bool found = false;
    for (std::size_t i = 0; i < super.size(); ++i) {
      if (!used[i] && same_detection(d, super[i])) {
        used[i] = true;
        found = true;
        break;
      }
    }
    if (!found) return false;
  }
  return true;
}

}  // namespace

TEST_SUITE("postprocess") {

TEST_CASE("score filter thresholds on the object-class maximum") {
  const std::vector<Detection> dets{det(0.9, 0.05, 0.05, {0, 0, 0.2, 0.2}),
                                    det(0.04, 0.03, 0.93, {0.3, 0.3, 0.5, 0.5})};
  CHECK(score_filter(dets, 0.0).size() == 2);  // identity at threshold 0
  const auto kept = score_filter(dets, 0.05);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].probs[0] == doctest::Approx(0.9));
  CHECK(score_filter({}, 0.5).empty());
}

TEST_CASE("NMS suppresses same-class duplicates only") {
  // overlapping same-class pair: IoU((0,0,.2,.2),(0.02,0,.22,.2)) = 0.18/0.22 = 0.818
  const BBox a{0.0, 0.0, 0.2, 0.2};
  const BBox b{0.02, 0.0, 0.22, 0.2};
  const std::vector<Detection> duplicates{det(0.9, 0.05, 0.05, a), det(0.8, 0.15, 0.05, b)};
  const auto kept = nms_per_class(duplicates, 0.5);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].probs[0] == doctest::Approx(0.9));

  const std::vector<Detection> disjoint{det(0.9, 0.05, 0.05, {0, 0, 0.1, 0.1}),
                                        det(0.8, 0.15, 0.05, {0.5, 0.5, 0.7, 0.7})};
  CHECK(nms_per_class(disjoint, 0.5).size() == 2);

  // same boxes, different argmax classes: per-class NMS keeps both
  const std::vector<Detection> cross{det(0.9, 0.05, 0.05, a), det(0.1, 0.85, 0.05, b)};
  CHECK(nms_per_class(cross, 0.5).size() == 2);
}

TEST_CASE("top_k keeps the highest object-class maxima") {
  const std::vector<Detection> dets{det(0.9, 0.05, 0.05, {0, 0, 0.1, 0.1}),
                                    det(0.5, 0.25, 0.25, {0.2, 0.2, 0.3, 0.3}),
                                    det(0.7, 0.15, 0.15, {0.4, 0.4, 0.5, 0.5})};
  CHECK(top_k(dets, 5).size() == 3);  // no-op when k >= n
  const auto two = top_k(dets, 2);
  REQUIRE(two.size() == 2);
  CHECK(two[0].probs[0] == doctest::Approx(0.9));
  CHECK(two[1].probs[0] == doctest::Approx(0.7));
  CHECK(top_k(dets, 1).size() == 1);
}

TEST_CASE("pipeline fixture: sub-threshold and duplicate detections drop") {
  // five detections: one sub-threshold, two duplicates of survivors
  ingest::PredictionDump dump;
  dump.num_classes = 2;
  dump.detections[0] = {
      det(0.90, 0.05, 0.05, {0.00, 0.00, 0.20, 0.20}),  // keeper, class 0
      det(0.80, 0.15, 0.05, {0.02, 0.00, 0.22, 0.20}),  // duplicate of the first
      det(0.04, 0.02, 0.94, {0.40, 0.40, 0.60, 0.60}),  // sub-threshold
      det(0.10, 0.70, 0.20, {0.60, 0.60, 0.80, 0.80}),  // keeper, class 1
      det(0.05, 0.65, 0.30, {0.30, 0.70, 0.50, 0.90}),  // keeper, class 1, disjoint
  };
  PostProcessConfig cfg;
  const auto out = run_pipeline(dump, cfg);
  CHECK(out.source_tag == "postprocessed");
  CHECK(out.detections.at(0).size() == 3);

  PostProcessConfig off;
  off.enabled = false;
  const auto raw = run_pipeline(dump, off);
  CHECK(raw.source_tag == "raw");
  REQUIRE(raw.detections.at(0).size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(same_detection(raw.detections.at(0)[i], dump.detections.at(0)[i]));
  }

  const ingest::PredictionDump empty{{}, 2, "raw", 0};
  CHECK(run_pipeline(empty, cfg).detections.empty());
}

TEST_CASE("pipeline output is a subset and respects the top-k cap") {
  synth::Rng rng(31);
  for (int trial = 0; trial < 40; ++trial) {
    ingest::PredictionDump dump;
    dump.num_classes = 3;
    dump.detections[0] = random_dets(rng, rng.uniform_int(0, 40), 3);
    PostProcessConfig cfg;
    cfg.score_threshold = rng.uniform(0.0, 0.4);
    cfg.nms_iou_threshold = rng.uniform(0.2, 0.9);
    cfg.top_k = rng.uniform_int(1, 20);
    const auto out = run_pipeline(dump, cfg);
    const auto& in_dets = dump.detections.at(0);
    const auto it = out.detections.find(0);
    const std::size_t n_out = it == out.detections.end() ? 0 : it->second.size();
    CHECK(n_out <= std::min<std::size_t>(static_cast<std::size_t>(cfg.top_k), in_dets.size()));
    if (it != out.detections.end()) CHECK(is_subset(it->second, in_dets));
  }
}

TEST_CASE("NMS is idempotent") {
  synth::Rng rng(32);
  for (int trial = 0; trial < 40; ++trial) {
    const auto dets = random_dets(rng, rng.uniform_int(0, 30), 3);
    const double thr = rng.uniform(0.2, 0.9);
    const auto once = nms_per_class(dets, thr);
    const auto twice = nms_per_class(once, thr);
    REQUIRE(once.size() == twice.size());
    for (std::size_t i = 0; i < once.size(); ++i) {
      CHECK(same_detection(once[i], twice[i]));
    }
  }
}

TEST_CASE("raising the score threshold never increases the surviving count") {
  synth::Rng rng(33);
  for (int trial = 0; trial < 40; ++trial) {
    const auto dets = random_dets(rng, rng.uniform_int(0, 30), 3);
    std::size_t prev = dets.size();
    for (double thr = 0.0; thr <= 1.0; thr += 0.1) {
      const std::size_t n = score_filter(dets, thr).size();
      CHECK(n <= prev);
      prev = n;
    }
  }
}

}  // TEST_SUITE
