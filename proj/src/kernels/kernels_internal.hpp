#pragma once

#include <cstddef>

// Per-backend entry points behind the dispatch table in kernels_dispatch.cpp.

namespace boltzlab::kernels::scalar_impl {
void axpy(double a, const double* x, double* y, std::size_t n);
void scale(double a, double* x, std::size_t n);
double reduce_sum(const double* x, std::size_t n);
double reduce_sum_sq(const double* x, std::size_t n);
double reduce_max_abs(const double* x, std::size_t n);
void central_moments(const double* x, std::size_t n, double mu, double& m2, double& m4);
void wall_accel(const double* q, double* out, std::size_t n, double inv_halfwidth,
                double coeff, int exponent);
}  // namespace boltzlab::kernels::scalar_impl

#if defined(BOLTZLAB_HAVE_AVX2)
namespace boltzlab::kernels::avx2_impl {
void axpy(double a, const double* x, double* y, std::size_t n);
void scale(double a, double* x, std::size_t n);
double reduce_sum(const double* x, std::size_t n);
double reduce_sum_sq(const double* x, std::size_t n);
double reduce_max_abs(const double* x, std::size_t n);
void central_moments(const double* x, std::size_t n, double mu, double& m2, double& m4);
void wall_accel(const double* q, double* out, std::size_t n, double inv_halfwidth,
                double coeff, int exponent);
}  // namespace boltzlab::kernels::avx2_impl
#endif
