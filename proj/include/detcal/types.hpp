#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "detcal/error.hpp"

namespace detcal {

/// Index into the (K+1)-class space: object classes occupy 0..K-1, index K is
/// the background class.
using ClassIndex = int;

using ImageId = std::int64_t;

inline bool is_background(ClassIndex label, int num_classes) { return label == num_classes; }

/// Axis-aligned box in normalized corner coordinates, 0 <= x1 <= x2 <= 1.
/// Degenerate (zero-area) boxes are legal.
struct BBox {
  double x1 = 0.0;
  double y1 = 0.0;
  double x2 = 0.0;
  double y2 = 0.0;

  double area() const { return (x2 - x1) * (y2 - y1); }
  bool valid() const {
    return 0.0 <= x1 && x1 <= x2 && x2 <= 1.0 && 0.0 <= y1 && y1 <= y2 && y2 <= 1.0;
  }

  /// Canonical placeholder box for records that carry no geometry.
  static BBox zero() { return BBox{0.0, 0.0, 0.0, 0.0}; }

  friend bool operator==(const BBox&, const BBox&) = default;
};

/// Intersection over union. Total: returns 0 when the union has zero area.
double iou(const BBox& a, const BBox& b);

/// Point on the (K+1)-simplex: K object classes plus background at index K.
/// Immutable after construction; every entry in [0,1], sum within 1e-6 of 1.
class ProbVector {
 public:
  ProbVector() = default;

  /// Validating constructor for parsed inputs. Rejects negative entries.
  /// With renormalize, inputs whose sum deviates from 1 by at most 1e-3 are
  /// rescaled; larger deviations are rejected either way.
  static ProbVector validated(std::vector<double> p, bool renormalize);

  /// Rescales any non-negative vector with positive sum onto the simplex.
  /// Used by internal transforms whose pre-normalization sums are arbitrary.
  static ProbVector normalized(std::vector<double> p);

  /// Numerically stabilized softmax over raw logits.
  static ProbVector softmax(std::span<const double> logits);

  /// One-hot mass on the background class; the missing-prediction vector.
  static ProbVector background_one_hot(int num_classes);

  static ProbVector one_hot(ClassIndex index, int size);

  double operator[](std::size_t i) const { return p_[i]; }
  std::size_t size() const { return p_.size(); }
  int num_classes() const { return static_cast<int>(p_.size()) - 1; }
  std::span<const double> values() const { return p_; }
  double background() const { return p_.back(); }

  friend bool operator==(const ProbVector&, const ProbVector&) = default;

 private:
  explicit ProbVector(std::vector<double> p) : p_(std::move(p)) {}
  std::vector<double> p_;
};

/// Annotated object: label is always an object class (< K).
struct GroundTruth {
  ImageId image_id = 0;
  ClassIndex label = 0;
  BBox box;
};

/// Detector output: a probability vector over K+1 classes plus its box.
struct Detection {
  ImageId image_id = 0;
  ProbVector probs;
  BBox box;
};

double max_object_prob(const ProbVector& p);
ClassIndex argmax_class(const ProbVector& p);  // ties break to the lowest index

enum class RecordKind { Matched, UnmatchedPrediction, MissingGroundTruth };

/// One evaluation quadruple (y, b, p_hat, b_hat). Matched records pair a
/// ground truth with a prediction; unmatched predictions carry the background
/// label and the zero box; missing ground truths carry the one-hot background
/// vector and the zero predicted box.
struct EvaluationRecord {
  RecordKind kind = RecordKind::Matched;
  ClassIndex y = 0;
  BBox gt_box;
  ProbVector probs;
  BBox pred_box;
};

EvaluationRecord matched_record(const GroundTruth& gt, const Detection& det);
EvaluationRecord background_record_for_prediction(const Detection& det);
EvaluationRecord missing_record_for_gt(const GroundTruth& gt, int num_classes);

struct EvaluationSet {
  std::vector<EvaluationRecord> records;
  int num_classes = 0;

  std::size_t size() const { return records.size(); }
  bool empty() const { return records.empty(); }
};

}  // namespace detcal
