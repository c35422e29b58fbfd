#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "boltzlab/nbody.hpp"
#include "boltzlab/potentials.hpp"
#include "boltzlab/scattering.hpp"
#include "boltzlab/vec3.hpp"

namespace boltzlab {

// Axis variables for marginal histograms. Single-particle estimates use
// qx..pz; pair estimates use the relative separation plus both momenta.
enum class AxisVar { qx, qy, qz, px, py, pz, pr, r12, p1x, p1y, p1z, p2x, p2y, p2z };

const char* axis_var_name(AxisVar v);

struct Axis {
  AxisVar var;
  std::vector<double> edges;  // strictly increasing
};

Axis uniform_axis(AxisVar var, double lo, double hi, std::size_t bins);

// Binned estimate of f_1 or f_2 with the V^s normalization: the integral of
// `values` over the histogram support equals V^s exactly (out-of-range
// samples are counted and excluded from the normalization).
struct PhaseHistogram {
  std::vector<Axis> axes;
  std::vector<double> values;
  std::vector<std::uint64_t> counts;
  double normalization = 1.0;  // V^s
  std::uint64_t sample_count = 0;
  std::uint64_t out_of_range = 0;
  bool out_of_range_warning = false;  // > 1% of samples out of range

  std::size_t n_bins() const;
  double bin_volume(std::size_t flat) const;
  double integral() const;
  // piecewise-constant lookup; 0 outside the support
  double value_at(const double* coords) const;
  std::vector<double> bin_centers(std::size_t axis) const;
};

PhaseHistogram estimate_f1(const Ensemble& ens, const std::vector<Axis>& axes);
PhaseHistogram estimate_f2(const Ensemble& ens, const std::vector<Axis>& axes);

// Plug-in H = sum f ln f dV with 0 ln 0 = 0. Throws on negative bin values.
// The Miller-Madow occupancy term (m-1)/(2 n) is reported alongside as a bias
// note; it is not applied.
struct HEstimate {
  double h = 0.0;
  double entropy = 0.0;  // S = -H
  double stderr_ = 0.0;  // multinomial delta-method
  double miller_madow_bias = 0.0;
  std::uint64_t occupied_bins = 0;
};
HEstimate h_functional(const PhaseHistogram& f1);

struct TestFunction {
  std::string id;
  std::function<double(const Vec3&)> eval;
};

struct TestFunctionSet {
  std::vector<TestFunction> members;
  // {1, p2x, |p2|^2, gaussian bump at thermal momentum}
  static TestFunctionSet defaults(double mass, double temperature);
};

struct ChaosProbe {
  Vec3 p_center;
  double p_radius;
};

// 8-point stratified momentum probes at thermal magnitude, paired with the
// bulk spatial window.
std::vector<ChaosProbe> default_probes(double mass, double temperature);

struct ChaosOptions {
  double bulk_fraction = 0.7;        // |q|_inf <= fraction * L selects probe centers
  double pair_window_factor = 4.0;   // partner window R_w = factor * mu * cutoff
  std::size_t min_pairs = 100;
  std::size_t q2_offsets = 8;        // flow-correction nodes (delta, p1 pairs)
  std::uint64_t offset_seed = 2024;
  std::size_t momentum_bins = 16;   // f1-hat momentum grid (per axis)
  std::size_t space_bins = 6;       // f1-hat spatial grid (per axis)
  double momentum_span = 5.0;       // in units of sqrt(m T)
  double temperature_hint = 1.0;    // fixes the grid span (determinism across runs)
};

struct ChaosEntry {
  std::size_t probe = 0;
  std::string test_function;
  double estimate = 0.0;
  double stderr_ = 0.0;
  std::uint64_t pair_count = 0;
  bool defined = false;
};

struct ChaosReport {
  std::vector<ChaosEntry> entries;
  double delta_t = 0.0;
  double sup_abs = 0.0;         // over defined entries
  double median_abs = 0.0;      // over defined entries
  std::uint64_t total_pairs = 0;
};

// Weak-limit molecular-chaos residual: the empirical pair measure near each
// probe tested against phi(p2), minus the factorized reference built from
// estimate_f1 at t - delta_t evaluated at the backward-flow pullback of the
// probe pair configurations. delta_t = 0 degenerates to the plain
// factorization defect of the empirical measure.
ChaosReport chaos_residual(const Ensemble& at_t, const Ensemble& at_t_minus_dt,
                           double delta_t, const std::vector<ChaosProbe>& probes,
                           const TestFunctionSet& tests, const PotentialSpec& spec,
                           const ChaosOptions& opts);

struct BogolyubovOptions {
  std::size_t p_bins = 9;       // p1 nodes per axis
  double p_span = 4.0;          // in units of sqrt(m T)
  std::size_t q2_radial = 6;    // relative-offset quadrature
  std::size_t q2_angular = 14;  // directions on the sphere
  double temperature_hint = 1.0;
};

// The three comparable fields of the pre-Boltzmann (pullback-factorized)
// closed equation for f1, spatially homogeneous mode, evaluated as momentum
// densities (pdf convention) on a shared p1 node cube.
struct BogolyubovFields {
  std::size_t p_bins = 0;
  std::vector<double> p_nodes;        // per-axis node centers
  std::vector<double> dfdt_fd;        // finite-difference (g(t2) - g(t1)) / (t2 - t1)
  std::vector<double> collision_rhs;  // n * div_p1 of the pullback-factorized flux
  std::vector<double> boltzmann_rhs;  // filled by the caller (collision quadrature)
};

// g_early / g_late: momentum pdfs (V-convention dropped: spatially uniform
// bulk) estimated at the two snapshot times bracketing t; g_mid at t feeds
// the collision flux. A too-coarse grid for the finite difference
// (|g| change per snapshot gap above 50%) raises config_error.
BogolyubovFields bogolyubov_rhs(const PhaseHistogram& g_early, double t_early,
                                const PhaseHistogram& g_mid,
                                const PhaseHistogram& g_late, double t_late,
                                double n_density, double mu, double mass,
                                const PotentialSpec& spec, const PullbackTable& pullback,
                                const BogolyubovOptions& opts);

// L1 distance between two histograms on identical axes, normalized by the
// total mass of the first.
double l1_distance(const PhaseHistogram& a, const PhaseHistogram& b);

}  // namespace boltzlab
