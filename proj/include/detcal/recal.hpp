#pragma once

#include <string>
#include <vector>

#include "detcal/metrics.hpp"
#include "detcal/types.hpp"

namespace detcal::recal {

enum class TransformKind { Identity, TemperatureScale, BackgroundWeight };

/// Post-hoc probability transform. TemperatureScale re-softmaxes log
/// probabilities at temperature tau; BackgroundWeight rescales the background
/// entry by w and renormalizes, leaving object-class ratios untouched.
struct RecalTransform {
  TransformKind kind = TransformKind::Identity;
  double param = 1.0;  // tau or w, strictly positive

  void validate() const;
  std::string label() const;
};

ProbVector apply(const RecalTransform& transform, const ProbVector& p);

struct SweepRow {
  std::string param_label;
  double param_value = 0.0;
  double nll = 0.0;
  double brier = 0.0;
  double tce = 0.0;
  double mce = 0.0;
  double dmce = 0.0;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // sorted by parameter value
  int argmin_nll = 0;
  int argmin_brier = 0;
  int argmin_tce = 0;
  int argmin_mce = 0;
  int argmin_dmce = 0;
};

/// Re-evaluates the set under every transform in the grid. skip_missing
/// leaves the one-hot placeholder vectors of missing ground truths untouched.
SweepResult sweep(const EvaluationSet& set, const std::vector<RecalTransform>& grid,
                  const metrics::BinningConfig& cfg, bool skip_missing = true);

std::string sweep_to_csv(const SweepResult& result);
std::string sweep_argmin_json(const SweepResult& result);

}  // namespace detcal::recal
