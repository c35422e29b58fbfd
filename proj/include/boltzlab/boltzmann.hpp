#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "boltzlab/marginals.hpp"
#include "boltzlab/potentials.hpp"
#include "boltzlab/rng.hpp"
#include "boltzlab/scattering.hpp"
#include "boltzlab/vec3.hpp"

namespace boltzlab {

// Empirical measure for the homogeneous single-particle momentum density.
struct VelocityEnsemble {
  std::array<std::vector<double>, 3> p;
  double weight = 1.0;   // particles per sample
  double density = 1.0;  // mean concentration n

  std::size_t size() const { return p[0].size(); }
  void resize(std::size_t n) {
    for (auto& c : p) c.assign(n, 0.0);
  }
  Vec3 sample(std::size_t i) const { return {p[0][i], p[1][i], p[2][i]}; }
  void set_sample(std::size_t i, const Vec3& v) {
    p[0][i] = v.x;
    p[1][i] = v.y;
    p[2][i] = v.z;
  }
};

VelocityEnsemble maxwellian_ensemble(double n_density, const Vec3& u_mean, double temperature,
                                     std::size_t count, std::uint64_t seed, double mass);

struct Moments {
  double density = 0.0;
  Vec3 momentum_mean;
  double energy_density = 0.0;   // n <|p|^2> / 2m
  double excess_kurtosis = 0.0;  // (3/5) m4c / m2c^2 - 1, zero for a Maxwellian
  double fourth_moment = 0.0;    // <|p - <p>|^4>
  double second_moment = 0.0;    // <|p - <p>|^2>
};

Moments moments(const VelocityEnsemble& ve, double mass);

// Binary-collision kernels. sigma_g = sigma_tot(g) * g in microscopic
// rho^2 units; the effective event rate is n * mu^2 * sigma_g.
class CollisionKernel {
 public:
  enum class Kind { hard_sphere, inverse_power, pseudo_maxwell };

  static CollisionKernel hard_sphere(double diameter);
  static CollisionKernel inverse_power(const PotentialSpec& spec, double mass,
                                       double chi_min = 1e-3, double g_min = 0.05,
                                       double g_max = 40.0);
  // sigma_tot(g) * g = rate_lambda, isotropic scattering; admits the analytic
  // moment-equation oracle
  static CollisionKernel pseudo_maxwell(double rate_lambda);

  Kind kind() const { return kind_; }
  double sigma_g(double g) const;
  // deflection geometry + rotation for an accepted pair
  CollisionOutcome collide(const Vec3& p, const Vec3& p1, double mass, Rng& rng) const;
  // deterministic angular nodes for the quadrature: (chi(g), weight) pairs per
  // impact-parameter node; weights sum to sigma_tot(g)
  void quadrature_nodes(double g, std::size_t n_nodes, std::vector<double>& chi,
                        std::vector<double>& weight) const;
  const DeflectionTable* table() const { return table_.get(); }

 private:
  Kind kind_ = Kind::hard_sphere;
  double diameter_ = 1.0;
  double rate_lambda_ = 1.0;
  std::shared_ptr<const DeflectionTable> table_;
};

struct DsmcStats {
  std::uint64_t candidates = 0;
  std::uint64_t accepted = 0;
  int majorant_doublings = 0;
  double majorant = 0.0;
};

// One Bird-style majorant collision step. Majorant overflow doubles the
// majorant and transparently restarts the step (never a silent bias).
// Exactly conserves momentum and kinetic energy pairwise.
void dsmc_collision_step(VelocityEnsemble& ve, double dt, const CollisionKernel& kernel,
                         double mu, double mass, Rng& rng, DsmcStats& stats);

// Spatial transport for the inhomogeneous mode: kick-drift-kick under the
// external potential; collisions are applied per spatial cell by the caller
// (Strang splitting).
struct SpatialEnsemble {
  std::array<std::vector<double>, 3> q;
  std::array<std::vector<double>, 3> p;
  double weight = 1.0;
  double density_mean = 1.0;
  double box_halfwidth = 1.0;
  std::size_t size() const { return q[0].size(); }
};

void transport_step(SpatialEnsemble& se, double dt, const ExternalPotential& ext,
                    double mass);

// Uniform node-centered momentum cube.
struct DiscreteVelocityGrid {
  double p_max = 5.0;
  std::size_t n = 9;
  std::vector<double> f;  // pdf values at nodes, size n^3

  double spacing() const { return 2.0 * p_max / static_cast<double>(n); }
  double node(std::size_t i) const {
    return -p_max + (static_cast<double>(i) + 0.5) * spacing();
  }
  std::size_t index(std::size_t ix, std::size_t iy, std::size_t iz) const {
    return (ix * n + iy) * n + iz;
  }
  double mass() const;  // sum f h^3
  // fraction of mass in the outermost node shell; the quadrature refuses
  // grids whose tail mass exceeds 1e-6
  double boundary_mass_fraction() const;
};

// Fills a grid from Gaussian bin-mass integrals (erf), pdf convention.
DiscreteVelocityGrid maxwellian_grid(double p_max, std::size_t n, const Vec3& u_mean,
                                     double temperature, double mass);

struct QuadratureOptions {
  std::size_t n_rho = 8;  // impact-parameter nodes (or cos-chi nodes)
  std::size_t n_phi = 8;
};

// Deterministic conservative evaluation of the collision operator on the
// grid: every pair/angle event moves mass from the colliding nodes onto
// moment-exact quadratic stencils at the outgoing momenta, so the discrete
// collision invariants (1, p, |p|^2) are annihilated to rounding. Events
// whose outgoing stencils leave the grid are dropped whole (the operator is
// truncated to collision spheres contained in the cube).
std::vector<double> collision_integral_quadrature(const DiscreteVelocityGrid& grid,
                                                  const CollisionKernel& kernel,
                                                  double n_density, double mu, double mass,
                                                  const QuadratureOptions& opts = {});

struct HomogeneousRunConfig {
  VelocityEnsemble initial;
  CollisionKernel kernel = CollisionKernel::hard_sphere(1.0);
  double mu = 0.01;
  double mass = 1.0;
  double dt = 0.0;  // 0: 0.1 of the nominal mean free time
  double t_final = 1.0;
  std::vector<double> output_times;
  std::size_t h_bins = 64;
  double h_span = 0.0;  // 0: auto from the initial samples
  double volume = 1.0;  // V entering the reported H normalization
  std::uint64_t seed = 1;
};

struct KineticSample {
  double t = 0.0;
  double h = 0.0;
  double h_stderr = 0.0;
  double density = 0.0;
  Vec3 momentum_mean;
  double energy_density = 0.0;
  double excess_kurtosis = 0.0;
  double fourth_moment = 0.0;
};

struct KineticRunReport {
  std::vector<KineticSample> series;
  VelocityEnsemble final_state;
  double maxwell_h_reference = 0.0;  // matched-moment Maxwellian H on the same grid
  double mean_free_time = 0.0;       // 1 / (n mu^2 <sigma g>) at t = 0
  double dt = 0.0;
  DsmcStats stats;
  std::vector<Axis> h_axes;  // the fixed H histogram axes
};

// Alternates collision steps and logs H(t) on a fixed momentum histogram,
// moments and kurtosis. Deterministic per seed.
KineticRunReport run_homogeneous(const HomogeneousRunConfig& config);

// Plug-in histogram of a velocity ensemble on the given axes (px, py, pz),
// normalized to `volume` per the f1 convention.
PhaseHistogram velocity_histogram(const VelocityEnsemble& ve, const std::vector<Axis>& axes,
                                  double volume);

// Matched-moment Maxwellian H reference on the same axes via erf bin masses,
// restricted to the grid support (consistent with the plug-in estimate).
double maxwell_h_reference(const VelocityEnsemble& ve, const std::vector<Axis>& axes,
                           double volume, double mass);

// Nominal mean free time 1 / (n mu^2 <sigma g>) with <sigma g> averaged over
// a deterministic subsample of pairs.
double estimate_mean_free_time(const VelocityEnsemble& ve, const CollisionKernel& kernel,
                               double mu, double mass);

}  // namespace boltzlab
