#include <cmath>

#include "kernels_internal.hpp"

namespace boltzlab::kernels::scalar_impl {

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = y[i] + a * x[i];
}

void scale(double a, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

double reduce_sum(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i];
  return s;
}

double reduce_sum_sq(const double* x, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += x[i] * x[i];
  return s;
}

double reduce_max_abs(const double* x, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = std::fabs(x[i]);
    if (a > m) m = a;
  }
  return m;
}

void central_moments(const double* x, std::size_t n, double mu, double& m2, double& m4) {
  double s2 = 0.0;
  double s4 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - mu;
    const double d2 = d * d;
    s2 += d2;
    s4 += d2 * d2;
  }
  m2 = s2;
  m4 = s4;
}

namespace {
inline double pow_int(double base, int e) {
  double result = 1.0;
  double b = base;
  while (e > 0) {
    if (e & 1) result *= b;
    b *= b;
    e >>= 1;
  }
  return result;
}
}  // namespace

void wall_accel(const double* q, double* out, std::size_t n, double inv_halfwidth,
                double coeff, int exponent) {
  for (std::size_t i = 0; i < n; ++i) {
    const double u = q[i] * inv_halfwidth;
    const double mag = pow_int(std::fabs(u), exponent);
    out[i] = (u < 0.0 ? coeff : -coeff) * mag;
  }
}

}  // namespace boltzlab::kernels::scalar_impl
