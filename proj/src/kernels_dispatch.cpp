#include "detcal/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace detcal::kernels {

const char* backend_name(Backend backend) {
  switch (backend) {
    case Backend::Scalar: return "scalar";
    case Backend::Avx2: return "avx2";
  }
  return "unknown";
}

bool avx2_supported() {
#if defined(DETCAL_HAVE_AVX2_KERNELS)
  return __builtin_cpu_supports("avx2") != 0;
#else
  return false;
#endif
}

namespace {

Backend select_backend() {
  const char* env = std::getenv("DETCAL_SIMD");
  if (env != nullptr) {
    if (std::strcmp(env, "scalar") == 0) return Backend::Scalar;
    if (std::strcmp(env, "avx2") == 0 && avx2_supported()) return Backend::Avx2;
    if (std::strcmp(env, "avx2") == 0) return Backend::Scalar;  // unsupported, fall back
  }
  return avx2_supported() ? Backend::Avx2 : Backend::Scalar;
}

}  // namespace

Backend active_backend() {
  static const Backend backend = select_backend();
  return backend;
}

double sum_squares(std::span<const double> x) {
#if defined(DETCAL_HAVE_AVX2_KERNELS)
  if (active_backend() == Backend::Avx2) return avx2::sum_squares(x);
#endif
  return scalar::sum_squares(x);
}

void row_max_argmax(const double* m, std::size_t rows, std::size_t cols,
                    double* out_max, int* out_argmax) {
#if defined(DETCAL_HAVE_AVX2_KERNELS)
  if (active_backend() == Backend::Avx2) {
    avx2::row_max_argmax(m, rows, cols, out_max, out_argmax);
    return;
  }
#endif
  scalar::row_max_argmax(m, rows, cols, out_max, out_argmax);
}

void iou_one_vs_many(double ax1, double ay1, double ax2, double ay2,
                     const double* x1, const double* y1, const double* x2, const double* y2,
                     std::size_t n, double* out) {
#if defined(DETCAL_HAVE_AVX2_KERNELS)
  if (active_backend() == Backend::Avx2) {
    avx2::iou_one_vs_many(ax1, ay1, ax2, ay2, x1, y1, x2, y2, n, out);
    return;
  }
#endif
  scalar::iou_one_vs_many(ax1, ay1, ax2, ay2, x1, y1, x2, y2, n, out);
}

}  // namespace detcal::kernels
