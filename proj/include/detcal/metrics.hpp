#pragma once

#include <string>
#include <vector>

#include "detcal/ingest.hpp"
#include "detcal/types.hpp"

namespace detcal::metrics {

/// Equal-width probability bins: the first bin is [0, 1/M], every later bin
/// ((m-1)/M, m/M], so each probability lands in exactly one bin.
struct BinningConfig {
  int num_bins = 10;
  void validate() const;
};

int bin_index(double p, int num_bins);

struct BinStats {
  int bin_index = 0;
  long long count = 0;
  double mean_prob = 0.0;  // undefined when count == 0
  double accuracy = 0.0;   // undefined when count == 0

  bool defined() const { return count > 0; }
};

enum class CurveVariant { TopLabel, Marginal, DetTopLabel, DetMarginal };

const char* to_string(CurveVariant variant);

struct QuartileBand {
  bool defined = false;
  double q25 = 0.0;
  double q50 = 0.0;
  double q75 = 0.0;
};

/// Reliability-diagram data. Top-label variants carry a single pseudo-class;
/// marginal variants carry one row per class (background included, except for
/// the detection variant which drops it). The quartile band aggregates
/// accuracy across classes per bin and exists for marginal variants only.
struct CalibrationCurve {
  CurveVariant variant = CurveVariant::TopLabel;
  int num_bins = 0;
  std::vector<std::vector<BinStats>> per_class;
  std::vector<QuartileBand> quartile_band;
};

struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<long long> counts;

  long long total() const;
};

// Scoring rules and calibration errors over an evaluation set. All of them
// accumulate in a canonical record order, so any permutation of the same
// records produces bit-identical results.
double nll(const EvaluationSet& set);
double brier(const EvaluationSet& set);
CalibrationCurve top_label_curve(const EvaluationSet& set, const BinningConfig& cfg);
CalibrationCurve marginal_curve(const EvaluationSet& set, const BinningConfig& cfg);
double tce(const EvaluationSet& set, const BinningConfig& cfg);
double mce(const EvaluationSet& set, const BinningConfig& cfg);

/// Precision-based variants: only matched and unmatched predictions whose
/// argmax is an object class take part (TPs and FPs), correctness is
/// argmax agreement, and the marginal sum runs over object classes only.
struct DetectionVariants {
  double dtce = 0.0;
  double dmce = 0.0;
  CalibrationCurve top_label;
  CalibrationCurve marginal;
};
DetectionVariants detection_variants(const EvaluationSet& set, const BinningConfig& cfg);

double entropy(const ProbVector& p);

/// Histogram of ln(entropy) over matched and missing records, equal-width
/// bins spanning [ln 1e-12, ln ln(K+1)].
Histogram entropy_histogram(const EvaluationSet& set, int bins);

/// Average precision at IoU 0.5, all-point interpolation, averaged over
/// object classes that have at least one ground truth.
double ap50(const ingest::Dataset& dataset, const ingest::PredictionDump& dump);

struct RecordCounts {
  long long matched = 0;
  long long unmatched_pred = 0;
  long long missing_gt = 0;
};
RecordCounts count_kinds(const EvaluationSet& set);

/// Full run artifact. dtce/dmce and ap50 degrade to NaN when their inputs are
/// structurally empty (no TP/FP records, no annotations); the entropy
/// histogram degrades to zero counts.
struct MetricsReport {
  double nll = 0.0;
  double brier = 0.0;
  double tce = 0.0;
  double mce = 0.0;
  double dtce = 0.0;
  double dmce = 0.0;
  double ap50 = 0.0;
  std::vector<CalibrationCurve> curves;
  Histogram entropy_hist;
  RecordCounts counts;
  int num_classes = 0;
};

MetricsReport compute_report(const ingest::Dataset& dataset, const ingest::PredictionDump& dump,
                             const EvaluationSet& set, const BinningConfig& cfg,
                             int entropy_bins);

/// CSV emitters (schema: variant,class,bin,count,mean_prob,accuracy and
/// bin_left,bin_right,count). Top-label pseudo-class is written as -1.
std::string curves_to_csv(const std::vector<CalibrationCurve>& curves);
std::string histogram_to_csv(const Histogram& hist);

}  // namespace detcal::metrics
