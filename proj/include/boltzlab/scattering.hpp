#pragma once

#include <cstddef>
#include <iosfwd>
#include <utility>
#include <vector>

#include "boltzlab/potentials.hpp"
#include "boltzlab/vec3.hpp"

namespace boltzlab {

struct PhasePoint {
  Vec3 q;
  Vec3 p;
};

// Impact geometry of a binary collision: impact parameter rho (microscopic
// units, rho = r/mu), polar angle phi, and an orthonormal basis (e1, e2) of
// the plane perpendicular to the relative momentum.
struct CollisionGeometry {
  double rho = 0.0;
  double phi_angle = 0.0;
  Vec3 e1;
  Vec3 e2;
};

// Builds the perpendicular basis from the relative momentum p - p1.
// Throws std::invalid_argument when p == p1 (degenerate collision).
CollisionGeometry make_collision_geometry(const Vec3& p, const Vec3& p1, double rho,
                                          double phi);

struct CollisionOutcome {
  Vec3 p_out;
  Vec3 p1_out;
  double deflection = 0.0;
};

struct FlowOptions {
  double rel_tol = 1e-12;
  double abs_tol = 1e-14;
  std::size_t max_steps = 2000000;
};

// Relative two-body problem: r = q1 - q2 evolving under the reduced mass
// m_red = mass/2 in the pair potential Phi(|r|/mu). t may be negative
// (backward flow). Throws integration_error on step underflow.
std::pair<Vec3, Vec3> relative_flow(Vec3 r, Vec3 p_rel, double t, const PotentialSpec& spec,
                                    double mu, double mass, const FlowOptions& opts = {});

// Full two-particle Hamiltonian flow (kinetic + pair interaction, no external
// potential): center of mass drifts freely, relative motion integrated
// adaptively.
std::pair<PhasePoint, PhasePoint> two_body_flow(const PhasePoint& x1, const PhasePoint& x2,
                                                double t, const PotentialSpec& spec,
                                                double mu, double mass,
                                                const FlowOptions& opts = {});

// Classical deflection angle chi(rho, g) for relative speed g in the reduced
// one-body problem. Turning point by bisection + Newton, then a quadrature
// with the inverse-square-root endpoint singularity substituted away.
// Returns 0 for rho beyond the interaction range; pi at rho = 0.
double deflection_angle(double rho, double g, const PotentialSpec& spec, double mass);

// Deflections below this angle are treated as "no collision" by the momentum
// map (finite total cross-section for the samplers).
inline constexpr double kGrazingChi = 1e-6;

// Asymptotic collision map (p, p1, geometry) -> (p', p1'): rotates the
// relative momentum by chi(rho, g) in the plane selected by phi, preserving
// total momentum and kinetic energy exactly up to rounding. Equal masses.
CollisionOutcome post_collision_momenta(const Vec3& p, const Vec3& p1,
                                        const CollisionGeometry& geom,
                                        const PotentialSpec& spec, double mass);

// The bare rotation by a given deflection angle (no cross-section logic);
// shared by the samplers and the deterministic quadrature.
CollisionOutcome apply_deflection(const Vec3& p, const Vec3& p1,
                                  const CollisionGeometry& geom, double chi);

// Closed-form hard-sphere collision: chi = 2 acos(rho/diameter) for
// rho <= diameter, identity otherwise. Oracle for the steep-potential limit
// and a DSMC kernel.
CollisionOutcome hard_sphere_outcome(const Vec3& p, const Vec3& p1,
                                     const CollisionGeometry& geom, double diameter);

// Tabulated backward relative pullback: for a pair at separation r with
// relative momentum p_rel, the relative momentum after running the two-body
// flow backward for delta_t. By rotational invariance the map reduces to
// (|r|, |p_rel|, angle) -> in-plane components, tabulated once and
// interpolated trilinearly. Separations beyond the interaction range fall
// back to the exact free flight.
class PullbackTable {
 public:
  PullbackTable(const PotentialSpec& spec, double mu, double mass, double delta_t,
                std::size_t n_d = 16, std::size_t n_g = 24, std::size_t n_beta = 24,
                double g_max = 12.0);

  Vec3 pulled_back_relative(const Vec3& r, const Vec3& p_rel) const;
  double delta_t() const { return delta_t_; }

 private:
  PotentialSpec spec_;  // strong-collision queries fall back to direct flows
  double mu_, mass_, delta_t_;
  double range_;
  double g_min_, g_max_;
  std::size_t n_d_, n_g_, n_beta_;
  std::vector<double> par_;   // component along p_rel-hat
  std::vector<double> perp_;  // component along the in-plane normal
};

// Tabulated chi(rho, g) on an (rho/rho_max) x log(g) grid with bilinear
// interpolation, plus the grazing-cutoff impact parameter rho_max(g) solving
// chi = chi_min. Used by the inverse-power DSMC kernel.
class DeflectionTable {
 public:
  DeflectionTable(const PotentialSpec& spec, double mass, double chi_min, double g_min,
                  double g_max, std::size_t n_rho = 256, std::size_t n_g = 64);

  double chi(double rho, double g) const;
  double rho_max(double g) const;
  double chi_min() const { return chi_min_; }
  double g_min() const { return g_min_; }
  double g_max() const { return g_max_; }

  void dump_csv(std::ostream& os) const;  // columns: rho, g, chi

 private:
  double chi_min_;
  double g_min_, g_max_;
  std::size_t n_rho_, n_g_;
  std::vector<double> rho_max_;  // per g column
  std::vector<double> chi_;      // n_g x n_rho, row-major per column
};

}  // namespace boltzlab
