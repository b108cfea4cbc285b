#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "oracles.hpp"
#include "detcal/metrics.hpp"

using namespace detcal;
using namespace detcal::metrics;

namespace {

EvaluationRecord matched(int y, std::vector<double> probs) {
  const GroundTruth gt{0, y, BBox{0.1, 0.1, 0.3, 0.3}};
  const Detection det{0, ProbVector::validated(std::move(probs), true), BBox{0.1, 0.1, 0.3, 0.3}};
  return matched_record(gt, det);
}

EvaluationRecord unmatched(std::vector<double> probs) {
  const Detection det{0, ProbVector::validated(std::move(probs), true), BBox{0.5, 0.5, 0.7, 0.7}};
  return background_record_for_prediction(det);
}

EvaluationSet make_set(int num_classes, std::vector<EvaluationRecord> records) {
  EvaluationSet set;
  set.num_classes = num_classes;
  set.records = std::move(records);
  return set;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("bin convention: first bin closed at zero, others half-open left") {
  CHECK(bin_index(0.0, 10) == 0);
  CHECK(bin_index(0.05, 10) == 0);
  CHECK(bin_index(0.1, 10) == 0);
  CHECK(bin_index(0.1000001, 10) == 1);
  CHECK(bin_index(0.2, 10) == 1);
  CHECK(bin_index(0.75, 10) == 7);
  CHECK(bin_index(1.0, 10) == 9);
  CHECK(bin_index(0.5, 1) == 0);
}

TEST_CASE("nll worked examples") {
  const auto perfect = make_set(2, {matched(0, {1.0, 0.0, 0.0}), matched(1, {0.0, 1.0, 0.0})});
  CHECK(nll(perfect) == doctest::Approx(0.0).epsilon(1e-12));

  const auto two = make_set(2, {matched(0, {0.5, 0.25, 0.25}), matched(1, {0.1, 0.8, 0.1})});
  CHECK(nll(two) == doctest::Approx(0.458146).epsilon(1e-5));

  // p_hat[y] = 0 clamps at 1e-12
  const auto zero = make_set(2, {matched(0, {0.0, 1.0, 0.0})});
  CHECK(nll(zero) == doctest::Approx(-std::log(1e-12)).epsilon(1e-9));
  CHECK(nll(zero) == doctest::Approx(27.6310211).epsilon(1e-6));

  // a missing ground truth carries the one-hot background vector
  const GroundTruth gt{0, 0, BBox{0.1, 0.1, 0.3, 0.3}};
  const auto missing = make_set(2, {missing_record_for_gt(gt, 2)});
  CHECK(nll(missing) == doctest::Approx(27.6310211).epsilon(1e-6));
}

TEST_CASE("brier worked examples") {
  const auto perfect = make_set(2, {matched(0, {1.0, 0.0, 0.0})});
  CHECK(brier(perfect) == doctest::Approx(0.0).epsilon(1e-12));

  const auto single = make_set(2, {matched(0, {0.5, 0.25, 0.25})});
  CHECK(brier(single) == doctest::Approx(0.375).epsilon(1e-9));

  const auto two = make_set(2, {matched(0, {0.5, 0.25, 0.25}), matched(1, {0.1, 0.8, 0.1})});
  CHECK(brier(two) == doctest::Approx(0.2175).epsilon(1e-9));
}

TEST_CASE("top-label curve populates bins by the maximum probability") {
  const auto confident = make_set(2, {matched(0, {1.0, 0.0, 0.0}), matched(1, {0.0, 1.0, 0.0})});
  const auto curve = top_label_curve(confident, BinningConfig{});
  REQUIRE(curve.per_class.size() == 1);
  for (int b = 0; b < 9; ++b) CHECK(curve.per_class[0][b].count == 0);
  CHECK(curve.per_class[0][9].count == 2);
  CHECK(curve.per_class[0][9].mean_prob == doctest::Approx(1.0));
  CHECK(curve.per_class[0][9].accuracy == doctest::Approx(1.0));

  const auto four = make_set(2, {matched(0, {0.75, 0.15, 0.1}), matched(0, {0.75, 0.15, 0.1}),
                                 matched(0, {0.75, 0.15, 0.1}), matched(1, {0.75, 0.15, 0.1})});
  const auto c4 = top_label_curve(four, BinningConfig{});
  CHECK(c4.per_class[0][7].count == 4);
  CHECK(c4.per_class[0][7].mean_prob == doctest::Approx(0.75));
  CHECK(c4.per_class[0][7].accuracy == doctest::Approx(0.75));

  // missing ground truths land in the last bin as errors
  const GroundTruth gt{0, 0, BBox{0.1, 0.1, 0.3, 0.3}};
  const auto miss = make_set(2, {missing_record_for_gt(gt, 2)});
  const auto cm = top_label_curve(miss, BinningConfig{});
  CHECK(cm.per_class[0][9].count == 1);
  CHECK(cm.per_class[0][9].accuracy == doctest::Approx(0.0));
}

TEST_CASE("tce fixture: six records across two bins") {
  const auto set = make_set(
      2, {matched(0, {0.75, 0.15, 0.1}), matched(0, {0.75, 0.15, 0.1}),
          matched(0, {0.75, 0.15, 0.1}), matched(1, {0.75, 0.15, 0.1}),
          matched(0, {0.95, 0.04, 0.01}), matched(0, {0.95, 0.04, 0.01})});
  CHECK(tce(set, BinningConfig{}) == doctest::Approx(std::sqrt((2.0 / 6.0) * 0.0025)).epsilon(1e-9));
  CHECK(tce(set, BinningConfig{}) == doctest::Approx(0.0288675).epsilon(1e-5));
}

TEST_CASE("mce fixture from the per-class hand computation") {
  const auto set = make_set(2, {matched(0, {0.8, 0.1, 0.1}), unmatched({0.2, 0.1, 0.7})});
  CHECK(mce(set, BinningConfig{}) == doctest::Approx(std::sqrt(0.1)).epsilon(1e-9));
  CHECK(mce(set, BinningConfig{}) == doctest::Approx(0.31623).epsilon(1e-4));
  CHECK(mce(set, BinningConfig{}) == doctest::Approx(oracle::naive_mce(set, 10)).epsilon(1e-12));

  const auto perfect = make_set(2, {matched(0, {1.0, 0.0, 0.0}), matched(1, {0.0, 1.0, 0.0})});
  CHECK(mce(perfect, BinningConfig{}) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("marginal curve emits K+1 classes and a quartile band") {
  const auto set = make_set(2, {matched(0, {0.8, 0.1, 0.1}), unmatched({0.2, 0.1, 0.7})});
  const auto curve = marginal_curve(set, BinningConfig{});
  CHECK(curve.per_class.size() == 3);
  CHECK(curve.quartile_band.size() == 10);
  // class 0: one record in bin 7 (0.8), one in bin 1 (0.2)
  CHECK(curve.per_class[0][7].count == 1);
  CHECK(curve.per_class[0][7].accuracy == doctest::Approx(1.0));
  CHECK(curve.per_class[0][1].count == 1);
  CHECK(curve.per_class[0][1].accuracy == doctest::Approx(0.0));
  // class 1: both records in bin 0 at 0.1
  CHECK(curve.per_class[1][0].count == 2);
  CHECK(curve.per_class[1][0].mean_prob == doctest::Approx(0.1));
  // background: bin 0 and bin 6
  CHECK(curve.per_class[2][6].count == 1);
  CHECK(curve.per_class[2][6].accuracy == doctest::Approx(1.0));
  CHECK(curve.quartile_band[0].defined);
}

TEST_CASE("detection variants drop TNs and FNs and renormalize") {
  // all-background predictions leave nothing to evaluate
  const auto tn_only = make_set(2, {unmatched({0.1, 0.1, 0.8})});
  CHECK_THROWS_AS(detection_variants(tn_only, BinningConfig{}), Error);

  const auto perfect = make_set(2, {matched(0, {1.0, 0.0, 0.0}), matched(1, {0.0, 1.0, 0.0})});
  const auto det = detection_variants(perfect, BinningConfig{});
  CHECK(det.dtce == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(det.dmce == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(det.marginal.per_class.size() == 2);  // object classes only

  // mixed set: TP + FP kept, TN + FN dropped
  const GroundTruth gt{0, 0, BBox{0.1, 0.1, 0.3, 0.3}};
  const auto mixed = make_set(2, {matched(0, {0.7, 0.2, 0.1}),     // TP
                                  unmatched({0.6, 0.3, 0.1}),      // FP (argmax object)
                                  unmatched({0.1, 0.1, 0.8}),      // TN (argmax background)
                                  missing_record_for_gt(gt, 2)});  // FN
  const auto dv = detection_variants(mixed, BinningConfig{});
  CHECK(dv.dtce == doctest::Approx(oracle::naive_dtce(mixed, 10)).epsilon(1e-12));
  CHECK(dv.dmce == doctest::Approx(oracle::naive_dmce(mixed, 10)).epsilon(1e-12));
  CHECK(dv.top_label.per_class[0][6].count == 1);  // the TP at 0.7
  CHECK(dv.top_label.per_class[0][5].count == 1);  // the FP at 0.6
}

TEST_CASE("entropy worked examples") {
  CHECK(entropy(ProbVector::validated({1.0, 0.0, 0.0}, false)) == doctest::Approx(0.0));
  CHECK(entropy(ProbVector::validated({1.0 / 3, 1.0 / 3, 1.0 / 3}, true)) ==
        doctest::Approx(std::log(3.0)).epsilon(1e-9));
  CHECK(entropy(ProbVector::validated({0.5, 0.25, 0.25}, false)) ==
        doctest::Approx(1.03972).epsilon(1e-5));
}

TEST_CASE("entropy histogram spikes: uniform matched and one-hot missing") {
  EvaluationSet uniform = make_set(2, {matched(0, {1.0 / 3, 1.0 / 3, 1.0 / 3}),
                                       matched(1, {1.0 / 3, 1.0 / 3, 1.0 / 3})});
  const Histogram h1 = entropy_histogram(uniform, 20);
  CHECK(h1.total() == 2);
  // ln(entropy) = ln(ln 3) = 0.0940 sits at the top edge
  CHECK(h1.counts.back() == 2);
  CHECK(h1.hi == doctest::Approx(std::log(std::log(3.0))).epsilon(1e-9));

  const GroundTruth gt{0, 0, BBox{0.1, 0.1, 0.3, 0.3}};
  EvaluationSet missing = make_set(2, {missing_record_for_gt(gt, 2)});
  const Histogram h2 = entropy_histogram(missing, 20);
  CHECK(h2.counts.front() == 1);  // entropy 0 clamps to the floor

  // unmatched predictions are excluded
  EvaluationSet with_tn = uniform;
  with_tn.records.push_back(unmatched({0.2, 0.2, 0.6}));
  CHECK(entropy_histogram(with_tn, 20).total() == 2);

  const auto tn_only = make_set(2, {unmatched({0.2, 0.2, 0.6})});
  CHECK_THROWS_AS(entropy_histogram(tn_only, 20), Error);
}

TEST_CASE("ap50 worked examples") {
  ingest::Dataset ds;
  ds.class_names = {"a", "b"};
  ds.images.push_back({0, 10, 10});
  ds.targets[0] = {GroundTruth{0, 0, BBox{0.1, 0.1, 0.5, 0.5}}};

  ingest::PredictionDump tp_only;
  tp_only.num_classes = 2;
  tp_only.detections[0] = {{0, ProbVector::validated({0.9, 0.05, 0.05}, true),
                            BBox{0.1, 0.1, 0.5, 0.5}}};
  CHECK(ap50(ds, tp_only) == doctest::Approx(1.0));

  // TP ranked above an FP: interpolated area stays 1
  ingest::PredictionDump tp_first = tp_only;
  tp_first.detections[0].push_back(
      {0, ProbVector::validated({0.6, 0.2, 0.2}, true), BBox{0.6, 0.6, 0.9, 0.9}});
  CHECK(ap50(ds, tp_first) == doctest::Approx(1.0));

  // FP ranked above the TP: precision at full recall is 0.5
  ingest::PredictionDump fp_first;
  fp_first.num_classes = 2;
  fp_first.detections[0] = {{0, ProbVector::validated({0.9, 0.05, 0.05}, true),
                             BBox{0.6, 0.6, 0.9, 0.9}},
                            {0, ProbVector::validated({0.6, 0.2, 0.2}, true),
                             BBox{0.1, 0.1, 0.5, 0.5}}};
  CHECK(ap50(ds, fp_first) == doctest::Approx(0.5));

  ingest::Dataset empty = ds;
  empty.targets[0].clear();
  CHECK_THROWS_AS(ap50(empty, tp_only), Error);
}

TEST_CASE("every metric is exactly permutation invariant") {
  synth::Rng rng(51);
  for (int trial = 0; trial < 20; ++trial) {
    EvaluationSet set = oracle::random_evaluation_set(rng, 3, 200);
    const BinningConfig cfg;
    const double n0 = nll(set);
    const double b0 = brier(set);
    const double t0 = tce(set, cfg);
    const double m0 = mce(set, cfg);
    // shuffle records
    for (std::size_t i = set.records.size(); i > 1; --i) {
      std::swap(set.records[i - 1],
                set.records[static_cast<std::size_t>(rng.uniform_int(0, static_cast<int>(i) - 1))]);
    }
    CHECK(nll(set) == n0);
    CHECK(brier(set) == b0);
    CHECK(tce(set, cfg) == t0);
    CHECK(mce(set, cfg) == m0);
  }
}

TEST_CASE("metrics agree with the naive double-loop oracles") {
  synth::Rng rng(52);
  const BinningConfig cfg;
  for (int trial = 0; trial < 40; ++trial) {
    const int k = trial % 2 == 0 ? 2 : 5;
    const EvaluationSet set = oracle::random_evaluation_set(rng, k, 400);
    CHECK(nll(set) == doctest::Approx(oracle::naive_nll(set)).epsilon(1e-11));
    CHECK(brier(set) == doctest::Approx(oracle::naive_brier(set)).epsilon(1e-11));
    CHECK(tce(set, cfg) == doctest::Approx(oracle::naive_tce(set, 10)).epsilon(1e-11));
    CHECK(mce(set, cfg) == doctest::Approx(oracle::naive_mce(set, 10)).epsilon(1e-11));
  }
}

TEST_CASE("boundedness of errors and entropy") {
  synth::Rng rng(53);
  const BinningConfig cfg;
  for (int trial = 0; trial < 30; ++trial) {
    const EvaluationSet set = oracle::random_evaluation_set(rng, 3, 300);
    CHECK(tce(set, cfg) >= 0.0);
    CHECK(tce(set, cfg) <= 1.0);
    CHECK(mce(set, cfg) <= std::sqrt(4.0) + 1e-12);
    CHECK(brier(set) >= 0.0);
    CHECK(brier(set) <= 2.0 + 1e-12);
    for (const auto& rec : set.records) {
      CHECK(entropy(rec.probs) >= 0.0);
      CHECK(entropy(rec.probs) <= std::log(4.0) + 1e-12);
    }
  }
}

TEST_CASE("per-bin class averaging biases the error toward the diagonal") {
  // Classes 0 and 1 share bin (0.4, 0.5]: class 0 runs underconfident
  // (acc 0.58 vs prob 0.45), class 1 overconfident (acc 0.38 vs prob 0.48).
  // Averaging the two inside the bin cancels most of the mismatch.
  std::vector<EvaluationRecord> records;
  for (int i = 0; i < 50; ++i) {
    const std::vector<double> p{0.45, 0.48, 0.07};
    if (i < 29) {
      records.push_back(matched(0, p));
    } else if (i < 48) {
      records.push_back(matched(1, p));
    } else {
      records.push_back(unmatched(p));
    }
  }
  const auto set = make_set(2, records);
  const auto curve = marginal_curve(set, BinningConfig{});
  const double correct = mce(set, BinningConfig{});

  // forbidden aggregation: average counts/probs/accuracies across classes per bin
  double total = 0.0;
  for (int b = 0; b < 10; ++b) {
    double count = 0.0;
    double prob = 0.0;
    double acc = 0.0;
    for (const auto& cls : curve.per_class) {
      const auto& s = cls[static_cast<std::size_t>(b)];
      count += static_cast<double>(s.count);
      prob += static_cast<double>(s.count) * s.mean_prob;
      acc += static_cast<double>(s.count) * s.accuracy;
    }
    if (count == 0.0) continue;
    const double diff = acc / count - prob / count;
    total += (count / static_cast<double>(set.size())) * diff * diff;
  }
  const double averaged = std::sqrt(total);
  CHECK(averaged <= correct + 1e-12);
  CHECK(averaged < correct - 0.05);  // strict on this construction
}

TEST_CASE("empty evaluation sets are rejected") {
  const EvaluationSet empty = make_set(2, {});
  CHECK_THROWS_AS(nll(empty), Error);
  CHECK_THROWS_AS(brier(empty), Error);
  CHECK_THROWS_AS(tce(empty, BinningConfig{}), Error);
  CHECK_THROWS_AS(mce(empty, BinningConfig{}), Error);
}

TEST_CASE("compute_report degrades det variants and ap50 gracefully") {
  ingest::Dataset ds;
  ds.class_names = {"a", "b"};
  ds.images.push_back({0, 10, 10});
  ds.targets[0] = {};
  ingest::PredictionDump dump;
  dump.num_classes = 2;
  dump.detections[0] = {{0, ProbVector::validated({0.1, 0.1, 0.8}, true),
                         BBox{0.1, 0.1, 0.3, 0.3}}};
  const auto set = make_set(2, {unmatched({0.1, 0.1, 0.8})});
  const auto report = compute_report(ds, dump, set, BinningConfig{}, 16);
  CHECK(std::isnan(report.dtce));
  CHECK(std::isnan(report.dmce));
  CHECK(std::isnan(report.ap50));
  CHECK(report.entropy_hist.total() == 0);  // only a TN record
  CHECK(report.curves.size() == 4);
  CHECK(report.counts.unmatched_pred == 1);
}

TEST_CASE("curve and histogram CSV schemas") {
  const auto set = make_set(2, {matched(0, {0.8, 0.1, 0.1}), unmatched({0.2, 0.1, 0.7})});
  const auto report = compute_report(ingest::Dataset{}, ingest::PredictionDump{}, set,
                                     BinningConfig{}, 8);
  const std::string csv = curves_to_csv(report.curves);
  CHECK(csv.rfind("variant,class,bin,count,mean_prob,accuracy\n", 0) == 0);
  CHECK(csv.find("top_label,-1,") != std::string::npos);
  CHECK(csv.find("marginal,2,") != std::string::npos);
  const std::string hist = histogram_to_csv(report.entropy_hist);
  CHECK(hist.rfind("bin_left,bin_right,count\n", 0) == 0);
}

}  // TEST_SUITE
