#pragma once

#include <cstddef>
#include <span>

namespace detcal::kernels {

// Low-level array kernels behind the geometry and metric hot loops. Each
// operation has a scalar reference implementation and an AVX2 variant; the
// dispatched entry points pick one at startup. DETCAL_SIMD=scalar|avx2|auto
// overrides the selection (avx2 falls back to scalar when unsupported).

enum class Backend { Scalar, Avx2 };

Backend active_backend();
const char* backend_name(Backend backend);
bool avx2_supported();

/// Sum of squares over a flat array.
double sum_squares(std::span<const double> x);

/// Per-row maximum and argmax of a dense rows x cols matrix; argmax ties
/// break to the lowest column index.
void row_max_argmax(const double* m, std::size_t rows, std::size_t cols,
                    double* out_max, int* out_argmax);

/// IoU of one box against n boxes stored as separate coordinate arrays.
void iou_one_vs_many(double ax1, double ay1, double ax2, double ay2,
                     const double* x1, const double* y1, const double* x2, const double* y2,
                     std::size_t n, double* out);

namespace scalar {
double sum_squares(std::span<const double> x);
void row_max_argmax(const double* m, std::size_t rows, std::size_t cols,
                    double* out_max, int* out_argmax);
void iou_one_vs_many(double ax1, double ay1, double ax2, double ay2,
                     const double* x1, const double* y1, const double* x2, const double* y2,
                     std::size_t n, double* out);
double iou_single(double ax1, double ay1, double ax2, double ay2,
                  double bx1, double by1, double bx2, double by2);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define DETCAL_HAVE_AVX2_KERNELS 1
namespace avx2 {
// Callable only when avx2_supported() is true.
double sum_squares(std::span<const double> x);
void row_max_argmax(const double* m, std::size_t rows, std::size_t cols,
                    double* out_max, int* out_argmax);
void iou_one_vs_many(double ax1, double ay1, double ax2, double ay2,
                     const double* x1, const double* y1, const double* x2, const double* y2,
                     std::size_t n, double* out);
}  // namespace avx2
#endif

}  // namespace detcal::kernels
