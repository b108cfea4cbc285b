#include "detcal/kernels.hpp"

#include <algorithm>

namespace detcal::kernels::scalar {

double sum_squares(std::span<const double> x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc;
}

void row_max_argmax(const double* m, std::size_t rows, std::size_t cols,
                    double* out_max, int* out_argmax) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = m + r * cols;
    double best = row[0];
    int best_i = 0;
    for (std::size_t c = 1; c < cols; ++c) {
      if (row[c] > best) {
        best = row[c];
        best_i = static_cast<int>(c);
      }
    }
    out_max[r] = best;
    out_argmax[r] = best_i;
  }
}

double iou_single(double ax1, double ay1, double ax2, double ay2,
                  double bx1, double by1, double bx2, double by2) {
  const double iw = std::max(0.0, std::min(ax2, bx2) - std::max(ax1, bx1));
  const double ih = std::max(0.0, std::min(ay2, by2) - std::max(ay1, by1));
  const double inter = iw * ih;
  const double uni = (ax2 - ax1) * (ay2 - ay1) + (bx2 - bx1) * (by2 - by1) - inter;
  return uni > 0.0 ? inter / uni : 0.0;
}

void iou_one_vs_many(double ax1, double ay1, double ax2, double ay2,
                     const double* x1, const double* y1, const double* x2, const double* y2,
                     std::size_t n, double* out) {
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = iou_single(ax1, ay1, ax2, ay2, x1[i], y1[i], x2[i], y2[i]);
  }
}

}  // namespace detcal::kernels::scalar
