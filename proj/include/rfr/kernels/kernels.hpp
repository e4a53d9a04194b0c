#pragma once

#include <cstddef>

// Low-level numeric loops used by the estimator hot paths. Each operation has
// a scalar reference implementation and, on capable CPUs, an AVX2 variant
// selected once at startup. set_backend lets tests pin a backend; the
// RFR_BACKEND environment variable (scalar|avx2) does the same for the CLI.
namespace rfr::kernels {

enum class Backend { scalar, avx2 };

Backend active_backend();

// Returns false (and leaves the backend unchanged) if the CPU lacks support.
bool set_backend(Backend b);

bool cpu_supports(Backend b);

// out[i] = exp(x[i])
void vexp(const double* x, double* out, std::size_t n);

// sum_i a[i] * b[i]
double dot(const double* a, const double* b, std::size_t n);

// y[i] += a * x[i]
void axpy(double a, const double* x, double* y, std::size_t n);

// sum_i (a[i] - b[i])^2
double sum_sq_diff(const double* a, const double* b, std::size_t n);

namespace detail {
void vexp_scalar(const double* x, double* out, std::size_t n);
double dot_scalar(const double* a, const double* b, std::size_t n);
void axpy_scalar(double a, const double* x, double* y, std::size_t n);
double sum_sq_diff_scalar(const double* a, const double* b, std::size_t n);

void vexp_avx2(const double* x, double* out, std::size_t n);
double dot_avx2(const double* a, const double* b, std::size_t n);
void axpy_avx2(double a, const double* x, double* y, std::size_t n);
double sum_sq_diff_avx2(const double* a, const double* b, std::size_t n);
}  // namespace detail

}  // namespace rfr::kernels
