#include "detcal/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include "detcal/kernels.hpp"

namespace detcal::metrics {

namespace {

constexpr double kLogClamp = 1e-12;

bool record_less(const EvaluationRecord& a, const EvaluationRecord& b) {
  if (a.kind != b.kind) return static_cast<int>(a.kind) < static_cast<int>(b.kind);
  if (a.y != b.y) return a.y < b.y;
  const auto& pa = a.probs;
  const auto& pb = b.probs;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i] != pb[i]) return pa[i] < pb[i];
  }
  const auto key = [](const BBox& box) { return std::tie(box.x1, box.y1, box.x2, box.y2); };
  if (key(a.gt_box) != key(b.gt_box)) return key(a.gt_box) < key(b.gt_box);
  return key(a.pred_box) < key(b.pred_box);
}

// Records flattened into dense arrays in canonical order. Every metric
// accumulates over this layout, which fixes the floating-point summation
// order independently of how the evaluation set was assembled.
struct FlatView {
  std::size_t n = 0;
  std::size_t width = 0;  // K+1
  int num_classes = 0;
  std::vector<double> probs;
  std::vector<ClassIndex> y;
  std::vector<RecordKind> kind;
  std::vector<double> max_p;
  std::vector<int> argmax;
};

FlatView flatten(const EvaluationSet& set) {
  if (set.empty()) {
    throw Error(ErrorKind::EmptyEvaluationSet, "no records to evaluate");
  }
  std::vector<std::size_t> order(set.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return record_less(set.records[a], set.records[b]);
  });

  FlatView view;
  view.n = set.size();
  view.num_classes = set.num_classes;
  view.width = static_cast<std::size_t>(set.num_classes) + 1;
  view.probs.resize(view.n * view.width);
  view.y.resize(view.n);
  view.kind.resize(view.n);
  for (std::size_t i = 0; i < view.n; ++i) {
    const EvaluationRecord& rec = set.records[order[i]];
    if (rec.probs.size() != view.width) {
      throw Error(ErrorKind::DimensionMismatch, "record with inconsistent class count");
    }
    std::copy(rec.probs.values().begin(), rec.probs.values().end(),
              view.probs.begin() + static_cast<std::ptrdiff_t>(i * view.width));
    view.y[i] = rec.y;
    view.kind[i] = rec.kind;
  }
  view.max_p.resize(view.n);
  view.argmax.resize(view.n);
  kernels::row_max_argmax(view.probs.data(), view.n, view.width, view.max_p.data(),
                          view.argmax.data());
  return view;
}

FlatView restrict_to_detections(const FlatView& view) {
  FlatView out;
  out.width = view.width;
  out.num_classes = view.num_classes;
  for (std::size_t i = 0; i < view.n; ++i) {
    if (view.kind[i] == RecordKind::MissingGroundTruth) continue;
    if (view.argmax[i] == view.num_classes) continue;
    out.probs.insert(out.probs.end(), view.probs.begin() + i * view.width,
                     view.probs.begin() + (i + 1) * view.width);
    out.y.push_back(view.y[i]);
    out.kind.push_back(view.kind[i]);
    out.max_p.push_back(view.max_p[i]);
    out.argmax.push_back(view.argmax[i]);
  }
  out.n = out.y.size();
  if (out.n == 0) {
    throw Error(ErrorKind::EmptyEvaluationSet,
                "no TP/FP records after the detection-variant restriction");
  }
  return out;
}

struct BinAccum {
  std::vector<long long> count;
  std::vector<long long> hits;
  std::vector<double> prob_sum;

  explicit BinAccum(int bins)
      : count(static_cast<std::size_t>(bins), 0),
        hits(static_cast<std::size_t>(bins), 0),
        prob_sum(static_cast<std::size_t>(bins), 0.0) {}

  void add(int bin, double prob, bool hit) {
    const auto b = static_cast<std::size_t>(bin);
    ++count[b];
    hits[b] += hit ? 1 : 0;
    prob_sum[b] += prob;
  }

  std::vector<BinStats> stats() const {
    std::vector<BinStats> out(count.size());
    for (std::size_t b = 0; b < count.size(); ++b) {
      out[b].bin_index = static_cast<int>(b);
      out[b].count = count[b];
      if (count[b] > 0) {
        out[b].mean_prob = prob_sum[b] / static_cast<double>(count[b]);
        out[b].accuracy = static_cast<double>(hits[b]) / static_cast<double>(count[b]);
      }
    }
    return out;
  }
};

double error_from_stats(const std::vector<std::vector<BinStats>>& per_class,
                        long long denominator) {
  double sum = 0.0;
  for (const auto& bins : per_class) {
    for (const auto& s : bins) {
      if (s.count == 0) continue;
      const double diff = s.accuracy - s.mean_prob;
      sum += (static_cast<double>(s.count) / static_cast<double>(denominator)) * diff * diff;
    }
  }
  return std::sqrt(sum);
}

std::vector<BinStats> top_label_stats(const FlatView& view, int bins) {
  BinAccum acc(bins);
  for (std::size_t i = 0; i < view.n; ++i) {
    acc.add(bin_index(view.max_p[i], bins), view.max_p[i], view.argmax[i] == view.y[i]);
  }
  return acc.stats();
}

std::vector<std::vector<BinStats>> marginal_stats(const FlatView& view, int bins,
                                                  int class_count) {
  std::vector<std::vector<BinStats>> out;
  out.reserve(static_cast<std::size_t>(class_count));
  for (int k = 0; k < class_count; ++k) {
    BinAccum acc(bins);
    for (std::size_t i = 0; i < view.n; ++i) {
      const double p = view.probs[i * view.width + static_cast<std::size_t>(k)];
      acc.add(bin_index(p, bins), p, view.y[i] == k);
    }
    out.push_back(acc.stats());
  }
  return out;
}

double quartile(std::vector<double>& sorted, double q) {
  const double h = (static_cast<double>(sorted.size()) - 1.0) * q;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - std::floor(h)) * (sorted[hi] - sorted[lo]);
}

std::vector<QuartileBand> quartile_band(const std::vector<std::vector<BinStats>>& per_class,
                                        int bins) {
  std::vector<QuartileBand> band(static_cast<std::size_t>(bins));
  for (int b = 0; b < bins; ++b) {
    std::vector<double> accs;
    for (const auto& cls : per_class) {
      if (cls[static_cast<std::size_t>(b)].count > 0) {
        accs.push_back(cls[static_cast<std::size_t>(b)].accuracy);
      }
    }
    if (accs.empty()) continue;
    std::sort(accs.begin(), accs.end());
    band[static_cast<std::size_t>(b)] =
        QuartileBand{true, quartile(accs, 0.25), quartile(accs, 0.5), quartile(accs, 0.75)};
  }
  return band;
}

double nll_impl(const FlatView& view) {
  double sum = 0.0;
  for (std::size_t i = 0; i < view.n; ++i) {
    const double p = view.probs[i * view.width + static_cast<std::size_t>(view.y[i])];
    sum -= std::log(std::max(p, kLogClamp));
  }
  return sum / static_cast<double>(view.n);
}

double brier_impl(const FlatView& view) {
  // ||onehot - p||^2 = sum(p^2) - 2 p_y + 1; the quadratic part runs through
  // the SIMD reduction over the whole flattened matrix.
  const double sq = kernels::sum_squares(view.probs);
  double adjust = 0.0;
  for (std::size_t i = 0; i < view.n; ++i) {
    adjust += 1.0 - 2.0 * view.probs[i * view.width + static_cast<std::size_t>(view.y[i])];
  }
  return (sq + adjust) / static_cast<double>(view.n);
}

}  // namespace

void BinningConfig::validate() const {
  if (num_bins < 1) {
    throw Error(ErrorKind::InvalidConfig, "num_bins must be >= 1");
  }
}

int bin_index(double p, int num_bins) {
  if (p <= 0.0) return 0;
  const int b = static_cast<int>(std::ceil(p * num_bins)) - 1;
  return std::clamp(b, 0, num_bins - 1);
}

const char* to_string(CurveVariant variant) {
  switch (variant) {
    case CurveVariant::TopLabel: return "top_label";
    case CurveVariant::Marginal: return "marginal";
    case CurveVariant::DetTopLabel: return "det_top_label";
    case CurveVariant::DetMarginal: return "det_marginal";
  }
  return "unknown";
}

long long Histogram::total() const {
  long long n = 0;
  for (long long c : counts) n += c;
  return n;
}

double nll(const EvaluationSet& set) { return nll_impl(flatten(set)); }

double brier(const EvaluationSet& set) { return brier_impl(flatten(set)); }

CalibrationCurve top_label_curve(const EvaluationSet& set, const BinningConfig& cfg) {
  cfg.validate();
  CalibrationCurve curve;
  curve.variant = CurveVariant::TopLabel;
  curve.num_bins = cfg.num_bins;
  curve.per_class.push_back(top_label_stats(flatten(set), cfg.num_bins));
  return curve;
}

CalibrationCurve marginal_curve(const EvaluationSet& set, const BinningConfig& cfg) {
  cfg.validate();
  const FlatView view = flatten(set);
  CalibrationCurve curve;
  curve.variant = CurveVariant::Marginal;
  curve.num_bins = cfg.num_bins;
  curve.per_class = marginal_stats(view, cfg.num_bins, view.num_classes + 1);
  curve.quartile_band = quartile_band(curve.per_class, cfg.num_bins);
  return curve;
}

double tce(const EvaluationSet& set, const BinningConfig& cfg) {
  cfg.validate();
  const FlatView view = flatten(set);
  return error_from_stats({top_label_stats(view, cfg.num_bins)},
                          static_cast<long long>(view.n));
}

double mce(const EvaluationSet& set, const BinningConfig& cfg) {
  cfg.validate();
  const FlatView view = flatten(set);
  return error_from_stats(marginal_stats(view, cfg.num_bins, view.num_classes + 1),
                          static_cast<long long>(view.n));
}

DetectionVariants detection_variants(const EvaluationSet& set, const BinningConfig& cfg) {
  cfg.validate();
  const FlatView view = restrict_to_detections(flatten(set));
  DetectionVariants out;
  out.top_label.variant = CurveVariant::DetTopLabel;
  out.top_label.num_bins = cfg.num_bins;
  out.top_label.per_class.push_back(top_label_stats(view, cfg.num_bins));
  out.marginal.variant = CurveVariant::DetMarginal;
  out.marginal.num_bins = cfg.num_bins;
  out.marginal.per_class = marginal_stats(view, cfg.num_bins, view.num_classes);
  out.marginal.quartile_band = quartile_band(out.marginal.per_class, cfg.num_bins);
  out.dtce = error_from_stats(out.top_label.per_class, static_cast<long long>(view.n));
  out.dmce = error_from_stats(out.marginal.per_class, static_cast<long long>(view.n));
  return out;
}

double entropy(const ProbVector& p) {
  double h = 0.0;
  for (double v : p.values()) {
    if (v > 0.0) h -= v * std::log(v);
  }
  return h;
}

Histogram entropy_histogram(const EvaluationSet& set, int bins) {
  if (bins < 1) {
    throw Error(ErrorKind::InvalidConfig, "entropy histogram needs >= 1 bins");
  }
  if (set.empty()) {
    throw Error(ErrorKind::EmptyEvaluationSet, "no records to evaluate");
  }
  Histogram hist;
  hist.lo = std::log(kLogClamp);
  hist.hi = std::log(std::log(static_cast<double>(set.num_classes) + 1.0));
  hist.counts.assign(static_cast<std::size_t>(bins), 0);
  long long used = 0;
  for (const auto& rec : set.records) {
    if (rec.kind == RecordKind::UnmatchedPrediction) continue;
    const double h = std::log(std::max(entropy(rec.probs), kLogClamp));
    const double t = (h - hist.lo) / (hist.hi - hist.lo);
    const int b = std::clamp(static_cast<int>(t * bins), 0, bins - 1);
    ++hist.counts[static_cast<std::size_t>(b)];
    ++used;
  }
  if (used == 0) {
    throw Error(ErrorKind::EmptyEvaluationSet,
                "no matched or missing records for the entropy histogram");
  }
  return hist;
}

namespace {

constexpr double kApIouThreshold = 0.5;

double average_precision(std::vector<std::pair<double, bool>>& scored, long long npos) {
  // scored: (score, is_tp) already sorted by rank
  std::vector<double> precision;
  std::vector<double> recall;
  precision.reserve(scored.size());
  recall.reserve(scored.size());
  long long tp = 0;
  long long seen = 0;
  for (const auto& [score, is_tp] : scored) {
    ++seen;
    if (is_tp) ++tp;
    precision.push_back(static_cast<double>(tp) / static_cast<double>(seen));
    recall.push_back(static_cast<double>(tp) / static_cast<double>(npos));
  }
  // All-point interpolation: running max of precision from the right, summed
  // over recall increments.
  double ap = 0.0;
  double max_prec = 0.0;
  for (std::size_t i = precision.size(); i-- > 0;) {
    max_prec = std::max(max_prec, precision[i]);
    const double r_prev = i == 0 ? 0.0 : recall[i - 1];
    ap += (recall[i] - r_prev) * max_prec;
  }
  return ap;
}

}  // namespace

double ap50(const ingest::Dataset& dataset, const ingest::PredictionDump& dump) {
  if (dataset.annotation_count() == 0) {
    throw Error(ErrorKind::NoGroundTruth, "dataset has no annotations");
  }
  const int num_classes = dataset.num_classes();

  struct Ranked {
    double score;
    ImageId image_id;
    int index_in_image;
  };

  double ap_sum = 0.0;
  int classes_with_gt = 0;
  for (int cls = 0; cls < num_classes; ++cls) {
    long long npos = 0;
    for (const auto& [id, gts] : dataset.targets) {
      for (const auto& gt : gts) {
        if (gt.label == cls) ++npos;
      }
    }
    if (npos == 0) continue;
    ++classes_with_gt;

    std::vector<Ranked> ranked;
    for (const auto& [id, dets] : dump.detections) {
      for (std::size_t i = 0; i < dets.size(); ++i) {
        if (argmax_class(dets[i].probs) == cls) {
          ranked.push_back({dets[i].probs[cls], id, static_cast<int>(i)});
        }
      }
    }
    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.image_id != b.image_id) return a.image_id < b.image_id;
      return a.index_in_image < b.index_in_image;
    });

    std::map<ImageId, std::vector<bool>> assigned;
    std::vector<std::pair<double, bool>> scored;
    scored.reserve(ranked.size());
    for (const auto& r : ranked) {
      const auto& gts = dataset.targets.at(r.image_id);
      auto& used = assigned[r.image_id];
      used.resize(gts.size(), false);
      const BBox& box = dump.detections.at(r.image_id)[static_cast<std::size_t>(r.index_in_image)].box;
      int best_gt = -1;
      double best_iou = 0.0;
      for (std::size_t g = 0; g < gts.size(); ++g) {
        if (gts[g].label != cls || used[g]) continue;
        const double v = iou(box, gts[g].box);
        if (v >= kApIouThreshold && v > best_iou) {
          best_iou = v;
          best_gt = static_cast<int>(g);
        }
      }
      if (best_gt >= 0) {
        used[static_cast<std::size_t>(best_gt)] = true;
        scored.emplace_back(r.score, true);
      } else {
        scored.emplace_back(r.score, false);
      }
    }
    ap_sum += average_precision(scored, npos);
  }
  return classes_with_gt > 0 ? ap_sum / classes_with_gt : 0.0;
}

RecordCounts count_kinds(const EvaluationSet& set) {
  RecordCounts counts;
  for (const auto& rec : set.records) {
    switch (rec.kind) {
      case RecordKind::Matched: ++counts.matched; break;
      case RecordKind::UnmatchedPrediction: ++counts.unmatched_pred; break;
      case RecordKind::MissingGroundTruth: ++counts.missing_gt; break;
    }
  }
  return counts;
}

MetricsReport compute_report(const ingest::Dataset& dataset, const ingest::PredictionDump& dump,
                             const EvaluationSet& set, const BinningConfig& cfg,
                             int entropy_bins) {
  cfg.validate();
  MetricsReport report;
  report.num_classes = set.num_classes;
  report.counts = count_kinds(set);

  const FlatView view = flatten(set);
  report.nll = nll_impl(view);
  report.brier = brier_impl(view);

  CalibrationCurve top;
  top.variant = CurveVariant::TopLabel;
  top.num_bins = cfg.num_bins;
  top.per_class.push_back(top_label_stats(view, cfg.num_bins));
  report.tce = error_from_stats(top.per_class, static_cast<long long>(view.n));

  CalibrationCurve marginal;
  marginal.variant = CurveVariant::Marginal;
  marginal.num_bins = cfg.num_bins;
  marginal.per_class = marginal_stats(view, cfg.num_bins, view.num_classes + 1);
  marginal.quartile_band = quartile_band(marginal.per_class, cfg.num_bins);
  report.mce = error_from_stats(marginal.per_class, static_cast<long long>(view.n));

  report.curves.push_back(std::move(top));
  report.curves.push_back(std::move(marginal));
  try {
    DetectionVariants det = detection_variants(set, cfg);
    report.dtce = det.dtce;
    report.dmce = det.dmce;
    report.curves.push_back(std::move(det.top_label));
    report.curves.push_back(std::move(det.marginal));
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::EmptyEvaluationSet) throw;
    report.dtce = std::numeric_limits<double>::quiet_NaN();
    report.dmce = std::numeric_limits<double>::quiet_NaN();
    CalibrationCurve det_top;
    det_top.variant = CurveVariant::DetTopLabel;
    det_top.num_bins = cfg.num_bins;
    det_top.per_class.emplace_back(static_cast<std::size_t>(cfg.num_bins), BinStats{});
    CalibrationCurve det_marginal;
    det_marginal.variant = CurveVariant::DetMarginal;
    det_marginal.num_bins = cfg.num_bins;
    det_marginal.per_class.assign(static_cast<std::size_t>(set.num_classes),
                                  std::vector<BinStats>(static_cast<std::size_t>(cfg.num_bins)));
    report.curves.push_back(std::move(det_top));
    report.curves.push_back(std::move(det_marginal));
  }
  for (auto& curve : report.curves) {
    for (auto& bins : curve.per_class) {
      for (std::size_t b = 0; b < bins.size(); ++b) bins[b].bin_index = static_cast<int>(b);
    }
  }

  try {
    report.entropy_hist = entropy_histogram(set, entropy_bins);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::EmptyEvaluationSet) throw;
    report.entropy_hist.lo = std::log(1e-12);
    report.entropy_hist.hi = std::log(std::log(static_cast<double>(set.num_classes) + 1.0));
    report.entropy_hist.counts.assign(static_cast<std::size_t>(entropy_bins), 0);
  }

  try {
    report.ap50 = ap50(dataset, dump);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NoGroundTruth) throw;
    report.ap50 = std::numeric_limits<double>::quiet_NaN();
  }
  return report;
}

namespace {
std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}
}  // namespace

std::string curves_to_csv(const std::vector<CalibrationCurve>& curves) {
  std::ostringstream out;
  out << "variant,class,bin,count,mean_prob,accuracy\n";
  for (const auto& curve : curves) {
    const bool top_label =
        curve.variant == CurveVariant::TopLabel || curve.variant == CurveVariant::DetTopLabel;
    for (std::size_t k = 0; k < curve.per_class.size(); ++k) {
      const int cls = top_label ? -1 : static_cast<int>(k);
      for (const auto& s : curve.per_class[k]) {
        out << to_string(curve.variant) << ',' << cls << ',' << s.bin_index << ',' << s.count
            << ',' << format_double(s.mean_prob) << ',' << format_double(s.accuracy) << '\n';
      }
    }
  }
  return out.str();
}

std::string histogram_to_csv(const Histogram& hist) {
  std::ostringstream out;
  out << "bin_left,bin_right,count\n";
  const double width = (hist.hi - hist.lo) / static_cast<double>(hist.counts.size());
  for (std::size_t b = 0; b < hist.counts.size(); ++b) {
    out << format_double(hist.lo + width * static_cast<double>(b)) << ','
        << format_double(hist.lo + width * static_cast<double>(b + 1)) << ',' << hist.counts[b]
        << '\n';
  }
  return out.str();
}

}  // namespace detcal::metrics
