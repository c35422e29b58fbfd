#pragma once

#include <cstddef>
#include <string>

namespace boltzlab::kernels {

// Data-parallel inner loops used by the particle pushers and the moment /
// entropy diagnostics. Every kernel has a scalar reference implementation and
// an AVX2 variant; the active variant is selected once at startup from CPUID,
// overridable with BOLTZLAB_KERNELS=scalar|avx2 or force_backend() in tests.
//
// Elementwise kernels (axpy, scale, wall_accel) are bit-identical between
// backends: the AVX2 paths use plain mul/add, never FMA. Reductions reorder
// additions, so they agree only to roundoff; the equivalence suite pins both
// contracts.

enum class Backend { scalar, avx2 };

Backend active_backend();
bool backend_supported(Backend b);
// Throws std::invalid_argument if the requested backend is not supported on
// this machine. Intended for tests and benchmarks.
void force_backend(Backend b);
std::string backend_name(Backend b);

// y[i] += a * x[i]
void axpy(double a, const double* x, double* y, std::size_t n);

// x[i] *= a
void scale(double a, double* x, std::size_t n);

double reduce_sum(const double* x, std::size_t n);

double reduce_sum_sq(const double* x, std::size_t n);

double reduce_max_abs(const double* x, std::size_t n);

// m2 = sum (x-mu)^2, m4 = sum (x-mu)^4
void central_moments(const double* x, std::size_t n, double mu, double& m2, double& m4);

// Steep confining wall acceleration, one coordinate axis:
//   out[i] = -coeff * sign(q[i]) * (|q[i]| * inv_halfwidth)^k
// where k = exponent (wall_exponent - 1 for a power wall). Integer exponent,
// evaluated by square-and-multiply so both backends run the same mul chain.
void wall_accel(const double* q, double* out, std::size_t n, double inv_halfwidth,
                double coeff, int exponent);

}  // namespace boltzlab::kernels
