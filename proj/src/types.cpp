#include "detcal/types.hpp"

#include <algorithm>
#include <cmath>

#include "detcal/kernels.hpp"

namespace detcal {

double iou(const BBox& a, const BBox& b) {
  return kernels::scalar::iou_single(a.x1, a.y1, a.x2, a.y2, b.x1, b.y1, b.x2, b.y2);
}

ProbVector ProbVector::validated(std::vector<double> p, bool renormalize) {
  if (p.size() < 3) {
    throw Error(ErrorKind::DimensionMismatch,
                "probability vector needs at least 3 entries (K >= 2 plus background)");
  }
  double sum = 0.0;
  for (double v : p) {
    if (v < 0.0 || !std::isfinite(v)) {
      throw Error(ErrorKind::InvalidProbability, "negative or non-finite probability entry");
    }
    sum += v;
  }
  const double tol = renormalize ? 1e-3 : 1e-6;
  if (std::abs(sum - 1.0) > tol) {
    throw Error(ErrorKind::InvalidProbability,
                "probability vector sum " + std::to_string(sum) + " outside tolerance");
  }
  // Rescale only genuine drift; vectors already summing to 1 within
  // accumulation noise pass through bit-identically (round-trip stability).
  if (renormalize && std::abs(sum - 1.0) > 1e-9) {
    for (double& v : p) v /= sum;
  }
  for (double& v : p) v = std::min(v, 1.0);
  return ProbVector(std::move(p));
}

ProbVector ProbVector::normalized(std::vector<double> p) {
  double sum = 0.0;
  for (double v : p) {
    if (v < 0.0 || !std::isfinite(v)) {
      throw Error(ErrorKind::InvalidProbability, "negative or non-finite entry in normalization");
    }
    sum += v;
  }
  if (sum <= 0.0) {
    throw Error(ErrorKind::InvalidProbability, "cannot normalize an all-zero vector");
  }
  for (double& v : p) v = std::min(v / sum, 1.0);
  return ProbVector(std::move(p));
}

ProbVector ProbVector::softmax(std::span<const double> logits) {
  std::vector<double> p(logits.begin(), logits.end());
  const double m = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (double& v : p) {
    v = std::exp(v - m);
    sum += v;
  }
  for (double& v : p) v /= sum;
  return ProbVector(std::move(p));
}

ProbVector ProbVector::background_one_hot(int num_classes) {
  return one_hot(num_classes, num_classes + 1);
}

ProbVector ProbVector::one_hot(ClassIndex index, int size) {
  std::vector<double> p(static_cast<std::size_t>(size), 0.0);
  p[static_cast<std::size_t>(index)] = 1.0;
  return ProbVector(std::move(p));
}

double max_object_prob(const ProbVector& p) {
  double best = 0.0;
  for (int k = 0; k < p.num_classes(); ++k) best = std::max(best, p[k]);
  return best;
}

ClassIndex argmax_class(const ProbVector& p) {
  int best = 0;
  for (std::size_t k = 1; k < p.size(); ++k) {
    if (p[k] > p[best]) best = static_cast<int>(k);
  }
  return best;
}

EvaluationRecord matched_record(const GroundTruth& gt, const Detection& det) {
  return EvaluationRecord{RecordKind::Matched, gt.label, gt.box, det.probs, det.box};
}

EvaluationRecord background_record_for_prediction(const Detection& det) {
  return EvaluationRecord{RecordKind::UnmatchedPrediction, det.probs.num_classes(), BBox::zero(),
                          det.probs, det.box};
}

EvaluationRecord missing_record_for_gt(const GroundTruth& gt, int num_classes) {
  return EvaluationRecord{RecordKind::MissingGroundTruth, gt.label, gt.box,
                          ProbVector::background_one_hot(num_classes), BBox::zero()};
}

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MalformedInput: return "MalformedInput";
    case ErrorKind::InconsistentReference: return "InconsistentReference";
    case ErrorKind::OutOfRangeBox: return "OutOfRangeBox";
    case ErrorKind::DimensionMismatch: return "DimensionMismatch";
    case ErrorKind::InvalidProbability: return "InvalidProbability";
    case ErrorKind::EmptyEvaluationSet: return "EmptyEvaluationSet";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::NoGroundTruth: return "NoGroundTruth";
    case ErrorKind::IoFailure: return "IoFailure";
  }
  return "Error";
}

}  // namespace detcal
