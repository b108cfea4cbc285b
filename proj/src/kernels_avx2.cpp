#include "detcal/kernels.hpp"

#if defined(DETCAL_HAVE_AVX2_KERNELS)

#include <immintrin.h>

namespace detcal::kernels::avx2 {

double sum_squares(std::span<const double> x) {
  const double* p = x.data();
  const std::size_t n = x.size();
  std::size_t i = 0;
  __m256d acc = _mm256_setzero_pd();
  for (; i + 4 <= n; i += 4) {
    const __m256d v = _mm256_loadu_pd(p + i);
    acc = _mm256_add_pd(acc, _mm256_mul_pd(v, v));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, acc);
  double total = ((lanes[0] + lanes[1]) + lanes[2]) + lanes[3];
  for (; i < n; ++i) total += p[i] * p[i];
  return total;
}

void row_max_argmax(const double* m, std::size_t rows, std::size_t cols,
                    double* out_max, int* out_argmax) {
  if (cols < 8) {
    scalar::row_max_argmax(m, rows, cols, out_max, out_argmax);
    return;
  }
  const __m256d lane_offsets = _mm256_set_pd(3.0, 2.0, 1.0, 0.0);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = m + r * cols;
    __m256d vmax = _mm256_loadu_pd(row);
    __m256d vidx = lane_offsets;
    std::size_t c = 4;
    for (; c + 4 <= cols; c += 4) {
      const __m256d v = _mm256_loadu_pd(row + c);
      const __m256d idx =
          _mm256_add_pd(_mm256_set1_pd(static_cast<double>(c)), lane_offsets);
      // Strict greater-than keeps the earliest column within a lane.
      const __m256d gt = _mm256_cmp_pd(v, vmax, _CMP_GT_OQ);
      vmax = _mm256_blendv_pd(vmax, v, gt);
      vidx = _mm256_blendv_pd(vidx, idx, gt);
    }
    alignas(32) double vals[4];
    alignas(32) double idxs[4];
    _mm256_store_pd(vals, vmax);
    _mm256_store_pd(idxs, vidx);
    double best = vals[0];
    int best_i = static_cast<int>(idxs[0]);
    for (int l = 1; l < 4; ++l) {
      const int li = static_cast<int>(idxs[l]);
      if (vals[l] > best || (vals[l] == best && li < best_i)) {
        best = vals[l];
        best_i = li;
      }
    }
    // Tail columns all have larger indices, so strict comparison preserves
    // the lowest-index tie rule.
    for (; c < cols; ++c) {
      if (row[c] > best) {
        best = row[c];
        best_i = static_cast<int>(c);
      }
    }
    out_max[r] = best;
    out_argmax[r] = best_i;
  }
}

void iou_one_vs_many(double ax1, double ay1, double ax2, double ay2,
                     const double* x1, const double* y1, const double* x2, const double* y2,
                     std::size_t n, double* out) {
  const __m256d vax1 = _mm256_set1_pd(ax1);
  const __m256d vay1 = _mm256_set1_pd(ay1);
  const __m256d vax2 = _mm256_set1_pd(ax2);
  const __m256d vay2 = _mm256_set1_pd(ay2);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d area_a = _mm256_set1_pd((ax2 - ax1) * (ay2 - ay1));
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d bx1 = _mm256_loadu_pd(x1 + i);
    const __m256d by1 = _mm256_loadu_pd(y1 + i);
    const __m256d bx2 = _mm256_loadu_pd(x2 + i);
    const __m256d by2 = _mm256_loadu_pd(y2 + i);
    const __m256d iw = _mm256_max_pd(
        zero, _mm256_sub_pd(_mm256_min_pd(vax2, bx2), _mm256_max_pd(vax1, bx1)));
    const __m256d ih = _mm256_max_pd(
        zero, _mm256_sub_pd(_mm256_min_pd(vay2, by2), _mm256_max_pd(vay1, by1)));
    const __m256d inter = _mm256_mul_pd(iw, ih);
    const __m256d area_b =
        _mm256_mul_pd(_mm256_sub_pd(bx2, bx1), _mm256_sub_pd(by2, by1));
    const __m256d uni = _mm256_sub_pd(_mm256_add_pd(area_a, area_b), inter);
    const __m256d q = _mm256_div_pd(inter, uni);
    const __m256d pos = _mm256_cmp_pd(uni, zero, _CMP_GT_OQ);
    _mm256_storeu_pd(out + i, _mm256_blendv_pd(zero, q, pos));
  }
  for (; i < n; ++i) {
    out[i] = scalar::iou_single(ax1, ay1, ax2, ay2, x1[i], y1[i], x2[i], y2[i]);
  }
}

}  // namespace detcal::kernels::avx2

#endif  // DETCAL_HAVE_AVX2_KERNELS
