#include "detcal/report.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "detcal/error.hpp"

namespace detcal::report {

namespace {

const char* kPalette[10] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                            "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string fmt(const char* format, double v) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), format, v);
  return buf;
}

std::string coord(double v) { return fmt("%.2f", v); }
std::string value4(double v) { return std::isnan(v) ? "n/a" : fmt("%.4f", v); }

// Plot area mapping for the calibration diagram.
constexpr double kPlotX = 60.0;
constexpr double kPlotY = 40.0;
constexpr double kPlotSize = 400.0;

double px(double p) { return kPlotX + kPlotSize * p; }
double py(double a) { return kPlotY + kPlotSize * (1.0 - a); }

void axes(std::ostringstream& svg, const std::string& title) {
  svg << "<rect x='0' y='0' width='660' height='520' fill='white'/>\n";
  svg << "<text x='" << coord(kPlotX) << "' y='24' font-family='sans-serif' font-size='15'>"
      << title << "</text>\n";
  svg << "<rect x='" << coord(kPlotX) << "' y='" << coord(kPlotY) << "' width='"
      << coord(kPlotSize) << "' height='" << coord(kPlotSize)
      << "' fill='none' stroke='#333333' stroke-width='1'/>\n";
  for (int t = 0; t <= 5; ++t) {
    const double v = t / 5.0;
    svg << "<text x='" << coord(px(v) - 10.0) << "' y='" << coord(kPlotY + kPlotSize + 18.0)
        << "' font-family='sans-serif' font-size='11'>" << fmt("%.1f", v) << "</text>\n";
    svg << "<text x='" << coord(kPlotX - 30.0) << "' y='" << coord(py(v) + 4.0)
        << "' font-family='sans-serif' font-size='11'>" << fmt("%.1f", v) << "</text>\n";
  }
  svg << "<text x='" << coord(kPlotX + kPlotSize / 2.0 - 40.0) << "' y='"
      << coord(kPlotY + kPlotSize + 40.0)
      << "' font-family='sans-serif' font-size='12'>mean probability</text>\n";
  svg << "<line x1='" << coord(px(0.0)) << "' y1='" << coord(py(0.0)) << "' x2='"
      << coord(px(1.0)) << "' y2='" << coord(py(1.0))
      << "' stroke='#000000' stroke-width='1' stroke-dasharray='5,4'/>\n";
}

}  // namespace

std::string render_calibration_svg(const metrics::CalibrationCurve& curve,
                                   const std::vector<std::string>& class_names) {
  const int bins = curve.num_bins;
  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='660' height='520' "
         "viewBox='0 0 660 520'>\n";
  axes(svg, std::string("calibration: ") + metrics::to_string(curve.variant));

  // Per-bin counts across classes, drawn as a strip at the plot base.
  std::vector<long long> totals(static_cast<std::size_t>(bins), 0);
  long long max_count = 0;
  for (const auto& cls : curve.per_class) {
    for (const auto& s : cls) {
      totals[static_cast<std::size_t>(s.bin_index)] += s.count;
    }
  }
  for (long long c : totals) max_count = std::max(max_count, c);
  if (max_count > 0) {
    for (int b = 0; b < bins; ++b) {
      const double h = 80.0 * static_cast<double>(totals[static_cast<std::size_t>(b)]) /
                       static_cast<double>(max_count);
      if (h <= 0.0) continue;
      const double w = kPlotSize / bins;
      svg << "<rect x='" << coord(kPlotX + w * b) << "' y='"
          << coord(kPlotY + kPlotSize - h) << "' width='" << coord(w) << "' height='"
          << coord(h) << "' fill='#cccccc' fill-opacity='0.5'/>\n";
    }
  }

  const bool marginal_variant = curve.variant == metrics::CurveVariant::Marginal ||
                                curve.variant == metrics::CurveVariant::DetMarginal;

  if (marginal_variant && !curve.quartile_band.empty()) {
    std::vector<std::pair<double, const metrics::QuartileBand*>> defined;
    for (int b = 0; b < bins; ++b) {
      const auto& q = curve.quartile_band[static_cast<std::size_t>(b)];
      if (q.defined) defined.emplace_back((b + 0.5) / bins, &q);
    }
    if (defined.size() >= 2) {
      std::ostringstream pts;
      for (const auto& [x, q] : defined) pts << coord(px(x)) << ',' << coord(py(q->q75)) << ' ';
      for (auto it = defined.rbegin(); it != defined.rend(); ++it) {
        pts << coord(px(it->first)) << ',' << coord(py(it->second->q25)) << ' ';
      }
      svg << "<polygon points='" << pts.str() << "' fill='#d62728' fill-opacity='0.15'/>\n";
      std::ostringstream med;
      for (const auto& [x, q] : defined) med << coord(px(x)) << ',' << coord(py(q->q50)) << ' ';
      svg << "<polyline points='" << med.str()
          << "' fill='none' stroke='#d62728' stroke-width='1' stroke-dasharray='2,3'/>\n";
    }
  }

  for (std::size_t k = 0; k < curve.per_class.size(); ++k) {
    const char* color = kPalette[k % 10];
    std::ostringstream pts;
    std::ostringstream data;
    int populated = 0;
    for (const auto& s : curve.per_class[k]) {
      if (!s.defined()) continue;
      pts << coord(px(s.mean_prob)) << ',' << coord(py(s.accuracy)) << ' ';
      data << '(' << fmt("%.6f", s.mean_prob) << ',' << fmt("%.6f", s.accuracy) << ") ";
      ++populated;
    }
    if (populated == 0) continue;
    svg << "<!-- points class=" << k << ": " << data.str() << "-->\n";
    if (populated >= 2) {
      svg << "<polyline points='" << pts.str() << "' fill='none' stroke='" << color
          << "' stroke-width='1.5'/>\n";
    }
    for (const auto& s : curve.per_class[k]) {
      if (!s.defined()) continue;
      svg << "<circle cx='" << coord(px(s.mean_prob)) << "' cy='" << coord(py(s.accuracy))
          << "' r='3' fill='" << color << "'/>\n";
    }
  }

  // Legend
  const bool top_label_variant = !marginal_variant;
  for (std::size_t k = 0; k < curve.per_class.size(); ++k) {
    std::string name;
    if (top_label_variant) {
      name = "top-label";
    } else if (k < class_names.size()) {
      name = class_names[k];
    } else {
      name = "background";
    }
    const double y = kPlotY + 10.0 + 18.0 * static_cast<double>(k);
    svg << "<rect x='" << coord(kPlotX + kPlotSize + 16.0) << "' y='" << coord(y)
        << "' width='12' height='12' fill='" << kPalette[k % 10] << "'/>\n";
    svg << "<text x='" << coord(kPlotX + kPlotSize + 34.0) << "' y='" << coord(y + 10.0)
        << "' font-family='sans-serif' font-size='12'>" << name << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

namespace {

struct Column {
  const char* name;
  bool higher_better;
  double (*get)(const metrics::MetricsReport&);
};

const Column kColumns[] = {
    {"ap50", true, [](const metrics::MetricsReport& r) { return r.ap50; }},
    {"nll", false, [](const metrics::MetricsReport& r) { return r.nll; }},
    {"brier", false, [](const metrics::MetricsReport& r) { return r.brier; }},
    {"tce", false, [](const metrics::MetricsReport& r) { return r.tce; }},
    {"mce", false, [](const metrics::MetricsReport& r) { return r.mce; }},
    {"dmce", false, [](const metrics::MetricsReport& r) { return r.dmce; }},
};

int best_row(const std::vector<RunArtifact>& runs, const Column& col) {
  int best = -1;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const double v = col.get(runs[i].report);
    if (std::isnan(v)) continue;
    if (best < 0) {
      best = static_cast<int>(i);
      continue;
    }
    const double b = col.get(runs[static_cast<std::size_t>(best)].report);
    if (col.higher_better ? v > b : v < b) best = static_cast<int>(i);
  }
  return best;
}

void check_runs(const std::vector<RunArtifact>& runs) {
  if (runs.empty()) {
    throw Error(ErrorKind::InvalidConfig, "comparison needs at least one run");
  }
  for (const auto& run : runs) {
    if (run.report.num_classes != runs.front().report.num_classes) {
      throw Error(ErrorKind::DimensionMismatch, "runs disagree on the number of classes");
    }
  }
}

}  // namespace

std::string render_comparison_csv(const std::vector<RunArtifact>& runs) {
  check_runs(runs);
  std::ostringstream out;
  out << "label";
  for (const auto& col : kColumns) out << ',' << col.name;
  out << '\n';
  for (const auto& run : runs) {
    out << run.label;
    for (const auto& col : kColumns) out << ',' << value4(col.get(run.report));
    out << '\n';
  }
  out << "best";
  for (const auto& col : kColumns) {
    const int b = best_row(runs, col);
    out << ',' << (b < 0 ? "n/a" : runs[static_cast<std::size_t>(b)].label);
  }
  out << '\n';
  return out.str();
}

std::string render_comparison_markdown(const std::vector<RunArtifact>& runs) {
  check_runs(runs);
  std::ostringstream out;
  out << "| label |";
  for (const auto& col : kColumns) {
    out << ' ' << col.name << (col.higher_better ? " (↑)" : " (↓)") << " |";
  }
  out << "\n|---|";
  for (std::size_t i = 0; i < std::size(kColumns); ++i) out << "---|";
  out << '\n';
  for (std::size_t i = 0; i < runs.size(); ++i) {
    out << "| " << runs[i].label << " |";
    for (const auto& col : kColumns) {
      const bool flag = best_row(runs, col) == static_cast<int>(i);
      const std::string v = value4(col.get(runs[i].report));
      out << ' ' << (flag ? "**" + v + "**" : v) << " |";
    }
    out << '\n';
  }
  return out.str();
}

std::string render_entropy_panels_svg(const std::vector<RunArtifact>& runs) {
  check_runs(runs);
  const double panel_w = 220.0;
  const double panel_h = 170.0;
  const double width = 20.0 + panel_w * static_cast<double>(runs.size());
  std::ostringstream svg;
  svg << "<svg xmlns='http://www.w3.org/2000/svg' width='" << coord(width)
      << "' height='220' viewBox='0 0 " << coord(width) << " 220'>\n";
  svg << "<rect x='0' y='0' width='" << coord(width) << "' height='220' fill='white'/>\n";
  for (std::size_t r = 0; r < runs.size(); ++r) {
    const auto& hist = runs[r].report.entropy_hist;
    const double x0 = 20.0 + panel_w * static_cast<double>(r);
    svg << "<text x='" << coord(x0) << "' y='20' font-family='sans-serif' font-size='13'>"
        << runs[r].label << "</text>\n";
    svg << "<rect x='" << coord(x0) << "' y='30' width='" << coord(panel_w - 30.0)
        << "' height='" << coord(panel_h - 30.0)
        << "' fill='none' stroke='#333333' stroke-width='1'/>\n";
    long long max_count = 1;
    for (long long c : hist.counts) max_count = std::max(max_count, c);
    const double bar_w = (panel_w - 30.0) / static_cast<double>(hist.counts.size());
    for (std::size_t b = 0; b < hist.counts.size(); ++b) {
      const double h = (panel_h - 32.0) * static_cast<double>(hist.counts[b]) /
                       static_cast<double>(max_count);
      if (h <= 0.0) continue;
      svg << "<rect x='" << coord(x0 + bar_w * static_cast<double>(b)) << "' y='"
          << coord(30.0 + (panel_h - 30.0) - h - 1.0) << "' width='" << coord(bar_w)
          << "' height='" << coord(h) << "' fill='" << kPalette[r % 10]
          << "' fill-opacity='0.7'/>\n";
    }
    svg << "<text x='" << coord(x0) << "' y='" << coord(panel_h + 20.0)
        << "' font-family='sans-serif' font-size='10'>" << fmt("%.1f", hist.lo) << "</text>\n";
    svg << "<text x='" << coord(x0 + panel_w - 60.0) << "' y='" << coord(panel_h + 20.0)
        << "' font-family='sans-serif' font-size='10'>" << fmt("%.1f", hist.hi) << "</text>\n";
    svg << "<text x='" << coord(x0 + 40.0) << "' y='" << coord(panel_h + 36.0)
        << "' font-family='sans-serif' font-size='10'>log entropy</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw Error(ErrorKind::IoFailure, "cannot open " + path + " for writing");
  }
  out << content;
  if (!out) {
    throw Error(ErrorKind::IoFailure, "failed writing " + path);
  }
}

}  // namespace detcal::report
