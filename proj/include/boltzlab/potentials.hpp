#pragma once

#include <string>
#include <utility>
#include <vector>

#include "boltzlab/vec3.hpp"

namespace boltzlab {

enum class PairKind { inverse_power, hard_sphere_limit };

// Repulsive pair potential, microscopic units. The inverse-power family
// C * r^-gamma is shifted and truncated at cutoff_radius so the energy is
// continuous:
//   value(r) = C r^-gamma - C rc^-gamma   for r < rc, else 0.
// hard_sphere_limit is analytic-only (no force evaluation); cutoff_radius
// doubles as the sphere diameter. It exists as a scattering oracle.
struct PotentialSpec {
  PairKind kind = PairKind::inverse_power;
  double gamma = 4.0;          // tail exponent, must be > 2
  double amplitude = 1.0;      // C, energy * length^gamma
  double cutoff_radius = 6.0;  // rc, microscopic units

  double value(double r) const;  // throws std::domain_error for r <= 0
  double force(double r) const;  // -dPhi/dr >= 0; throws for r <= 0

  // Validates the theorem hypotheses, throwing with every violation listed.
  static PotentialSpec checked(PairKind kind, double gamma, double amplitude,
                               double cutoff_radius);
};

enum class WellKind { none, harmonic, power_wall };

// External confining potential U on the region G.
//   none:       U = 0, G = R^3
//   harmonic:   U = k/2 |q|^2, G = R^3 (confining at infinity)
//   power_wall: U = E0 * sum_i (|q_i|/L)^k, k = wall_exponent (even);
//               flat interior, steep walls. G is taken as the box of
//               halfwidth 2L: beyond that U exceeds E0 * 2^k and no particle
//               with desk-scale energy can reach it.
struct ExternalPotential {
  WellKind kind = WellKind::power_wall;
  double stiffness = 1.0;        // k for harmonic
  int wall_exponent = 20;        // even integer >= 4
  double domain_halfwidth = 1.0; // L
  double wall_energy = 20.0;     // E0

  bool inside(const Vec3& q) const;
  double value(const Vec3& q) const;
  // Returns (U(q), grad U(q)); throws std::domain_error outside G.
  std::pair<double, Vec3> value_grad(const Vec3& q) const;
  Vec3 accel(const Vec3& q, double mass) const;  // -grad U / m, no G check

  static ExternalPotential checked(WellKind kind, double stiffness, int wall_exponent,
                                   double domain_halfwidth, double wall_energy);
};

struct ValidationCheck {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct ValidationReport {
  std::vector<ValidationCheck> checks;
  bool all_passed() const;
};

// Report-only check of the hypotheses on the pair potential: gamma > 2,
// monotone decrease on a log-spaced grid, repulsivity, and the tail limit
// r^gamma * Phi(r) -> C (evaluated on the untruncated power law; the shifted
// truncation alters the numerical tail by construction).
ValidationReport validate_spec(const PotentialSpec& spec);

}  // namespace boltzlab
