#pragma once

#include <string>
#include <vector>

#include "detcal/metrics.hpp"

namespace detcal::report {

/// One labeled evaluation run, as compared across distribution conditions
/// (e.g. "in-distribution" vs "shifted" vs "ood").
struct RunArtifact {
  std::string label;
  metrics::MetricsReport report;
};

/// Self-contained SVG reliability diagram: diagonal reference, one polyline
/// per class through populated bins, count bars on a secondary axis, and the
/// across-class quartile band for marginal variants. Byte-deterministic.
std::string render_calibration_svg(const metrics::CalibrationCurve& curve,
                                   const std::vector<std::string>& class_names);

/// Comparison table over runs; best value per metric column is flagged.
std::string render_comparison_csv(const std::vector<RunArtifact>& runs);
std::string render_comparison_markdown(const std::vector<RunArtifact>& runs);

/// Side-by-side entropy histograms, one panel per run.
std::string render_entropy_panels_svg(const std::vector<RunArtifact>& runs);

void write_file(const std::string& path, const std::string& content);

}  // namespace detcal::report
