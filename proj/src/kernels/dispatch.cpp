#include <cstdlib>
#include <string>

#include "rfr/kernels/kernels.hpp"

namespace rfr::kernels {

namespace {

Backend pick_initial() {
  Backend b = cpu_supports(Backend::avx2) ? Backend::avx2 : Backend::scalar;
  if (const char* env = std::getenv("RFR_BACKEND")) {
    const std::string v = env;
    if (v == "scalar") {
      b = Backend::scalar;
    } else if (v == "avx2" && cpu_supports(Backend::avx2)) {
      b = Backend::avx2;
    }
  }
  return b;
}

Backend& backend_slot() {
  static Backend b = pick_initial();
  return b;
}

}  // namespace

bool cpu_supports(Backend b) {
  if (b == Backend::scalar) return true;
#ifdef RFR_HAVE_AVX2_TU
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Backend active_backend() { return backend_slot(); }

bool set_backend(Backend b) {
  if (!cpu_supports(b)) return false;
  backend_slot() = b;
  return true;
}

void vexp(const double* x, double* out, std::size_t n) {
#ifdef RFR_HAVE_AVX2_TU
  if (backend_slot() == Backend::avx2) {
    detail::vexp_avx2(x, out, n);
    return;
  }
#endif
  detail::vexp_scalar(x, out, n);
}

double dot(const double* a, const double* b, std::size_t n) {
#ifdef RFR_HAVE_AVX2_TU
  if (backend_slot() == Backend::avx2) return detail::dot_avx2(a, b, n);
#endif
  return detail::dot_scalar(a, b, n);
}

void axpy(double a, const double* x, double* y, std::size_t n) {
#ifdef RFR_HAVE_AVX2_TU
  if (backend_slot() == Backend::avx2) {
    detail::axpy_avx2(a, x, y, n);
    return;
  }
#endif
  detail::axpy_scalar(a, x, y, n);
}

double sum_sq_diff(const double* a, const double* b, std::size_t n) {
#ifdef RFR_HAVE_AVX2_TU
  if (backend_slot() == Backend::avx2) return detail::sum_sq_diff_avx2(a, b, n);
#endif
  return detail::sum_sq_diff_scalar(a, b, n);
}

}  // namespace rfr::kernels
