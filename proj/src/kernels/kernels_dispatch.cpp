#include "boltzlab/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <stdexcept>

#include "kernels_internal.hpp"

namespace boltzlab::kernels {

namespace {

struct Table {
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*scale)(double, double*, std::size_t);
  double (*reduce_sum)(const double*, std::size_t);
  double (*reduce_sum_sq)(const double*, std::size_t);
  double (*reduce_max_abs)(const double*, std::size_t);
  void (*central_moments)(const double*, std::size_t, double, double&, double&);
  void (*wall_accel)(const double*, double*, std::size_t, double, double, int);
};

constexpr Table kScalarTable = {
    scalar_impl::axpy,           scalar_impl::scale,
    scalar_impl::reduce_sum,     scalar_impl::reduce_sum_sq,
    scalar_impl::reduce_max_abs, scalar_impl::central_moments,
    scalar_impl::wall_accel,
};

#if defined(BOLTZLAB_HAVE_AVX2)
constexpr Table kAvx2Table = {
    avx2_impl::axpy,           avx2_impl::scale,
    avx2_impl::reduce_sum,     avx2_impl::reduce_sum_sq,
    avx2_impl::reduce_max_abs, avx2_impl::central_moments,
    avx2_impl::wall_accel,
};
#endif

bool cpu_has_avx2() {
#if defined(BOLTZLAB_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2");
#else
  return false;
#endif
}

Backend pick_default() {
  if (const char* env = std::getenv("BOLTZLAB_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
    if (std::strcmp(env, "avx2") == 0 && backend_supported(Backend::avx2)) return Backend::avx2;
  }
  return backend_supported(Backend::avx2) ? Backend::avx2 : Backend::scalar;
}

struct State {
  Backend backend;
  const Table* table;
  State() : backend(pick_default()), table(lookup(backend)) {}
  static const Table* lookup(Backend b) {
#if defined(BOLTZLAB_HAVE_AVX2)
    if (b == Backend::avx2) return &kAvx2Table;
#endif
    (void)b;
    return &kScalarTable;
  }
};

State& state() {
  static State s;
  return s;
}

}  // namespace

Backend active_backend() { return state().backend; }

bool backend_supported(Backend b) {
  switch (b) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
      return cpu_has_avx2();
  }
  return false;
}

void force_backend(Backend b) {
  if (!backend_supported(b)) {
    throw std::invalid_argument("kernel backend not supported on this machine: " +
                                backend_name(b));
  }
  state().backend = b;
  state().table = State::lookup(b);
}

std::string backend_name(Backend b) {
  switch (b) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
  }
  return "unknown";
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  state().table->axpy(a, x, y, n);
}

void scale(double a, double* x, std::size_t n) { state().table->scale(a, x, n); }

double reduce_sum(const double* x, std::size_t n) { return state().table->reduce_sum(x, n); }

double reduce_sum_sq(const double* x, std::size_t n) {
  return state().table->reduce_sum_sq(x, n);
}

double reduce_max_abs(const double* x, std::size_t n) {
  return state().table->reduce_max_abs(x, n);
}

void central_moments(const double* x, std::size_t n, double mu, double& m2, double& m4) {
  state().table->central_moments(x, n, mu, m2, m4);
}

void wall_accel(const double* q, double* out, std::size_t n, double inv_halfwidth,
                double coeff, int exponent) {
  state().table->wall_accel(q, out, n, inv_halfwidth, coeff, exponent);
}

}  // namespace boltzlab::kernels
