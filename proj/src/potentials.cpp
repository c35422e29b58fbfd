#include "boltzlab/potentials.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "boltzlab/errors.hpp"

namespace boltzlab {

namespace {
void require_positive_r(double r) {
  if (!(r > 0.0)) throw std::domain_error("pair potential: r must be > 0");
}
}  // namespace

double PotentialSpec::value(double r) const {
  require_positive_r(r);
  if (r >= cutoff_radius) return 0.0;
  if (kind == PairKind::hard_sphere_limit) {
    throw std::logic_error("hard_sphere_limit is analytic-only; no energy evaluation");
  }
  return amplitude * (std::pow(r, -gamma) - std::pow(cutoff_radius, -gamma));
}

double PotentialSpec::force(double r) const {
  require_positive_r(r);
  if (r >= cutoff_radius) return 0.0;
  if (kind == PairKind::hard_sphere_limit) {
    throw std::logic_error("hard_sphere_limit is analytic-only; no force evaluation");
  }
  return amplitude * gamma * std::pow(r, -gamma - 1.0);
}

PotentialSpec PotentialSpec::checked(PairKind kind, double gamma, double amplitude,
                                     double cutoff_radius) {
  std::vector<std::string> errs;
  if (!(gamma > 2.0))
    errs.push_back("potential.gamma = " + std::to_string(gamma) +
                   " violates the tail-exponent hypothesis gamma > 2");
  if (!(amplitude > 0.0))
    errs.push_back("potential.amplitude must be > 0 (repulsive, monotone family)");
  if (!(cutoff_radius > 0.0)) errs.push_back("potential.cutoff_radius must be > 0");
  if (!errs.empty()) throw config_error(std::move(errs));
  PotentialSpec s;
  s.kind = kind;
  s.gamma = gamma;
  s.amplitude = amplitude;
  s.cutoff_radius = cutoff_radius;
  return s;
}

bool ExternalPotential::inside(const Vec3& q) const {
  if (kind == WellKind::power_wall) {
    const double bound = 2.0 * domain_halfwidth;
    return std::fabs(q.x) < bound && std::fabs(q.y) < bound && std::fabs(q.z) < bound;
  }
  return true;
}

namespace {
inline double ipow(double b, int e) {
  double r = 1.0;
  while (e > 0) {
    if (e & 1) r *= b;
    b *= b;
    e >>= 1;
  }
  return r;
}
}  // namespace

double ExternalPotential::value(const Vec3& q) const {
  switch (kind) {
    case WellKind::none:
      return 0.0;
    case WellKind::harmonic:
      return 0.5 * stiffness * q.norm2();
    case WellKind::power_wall: {
      const double invL = 1.0 / domain_halfwidth;
      return wall_energy * (ipow(std::fabs(q.x) * invL, wall_exponent) +
                            ipow(std::fabs(q.y) * invL, wall_exponent) +
                            ipow(std::fabs(q.z) * invL, wall_exponent));
    }
  }
  return 0.0;
}

std::pair<double, Vec3> ExternalPotential::value_grad(const Vec3& q) const {
  if (!inside(q)) throw std::domain_error("external potential: q outside G");
  switch (kind) {
    case WellKind::none:
      return {0.0, Vec3{}};
    case WellKind::harmonic:
      return {0.5 * stiffness * q.norm2(), stiffness * q};
    case WellKind::power_wall: {
      const double invL = 1.0 / domain_halfwidth;
      const double c = wall_energy * wall_exponent * invL;
      auto axis = [&](double v) {
        const double u = v * invL;
        const double m = ipow(std::fabs(u), wall_exponent - 1);
        return (u < 0.0 ? -c : c) * m;
      };
      return {value(q), Vec3{axis(q.x), axis(q.y), axis(q.z)}};
    }
  }
  return {0.0, Vec3{}};
}

Vec3 ExternalPotential::accel(const Vec3& q, double mass) const {
  switch (kind) {
    case WellKind::none:
      return Vec3{};
    case WellKind::harmonic:
      return (-stiffness / mass) * q;
    case WellKind::power_wall: {
      const double invL = 1.0 / domain_halfwidth;
      const double c = wall_energy * wall_exponent * invL / mass;
      auto axis = [&](double v) {
        const double u = v * invL;
        const double m = ipow(std::fabs(u), wall_exponent - 1);
        return (u < 0.0 ? c : -c) * m;
      };
      return {axis(q.x), axis(q.y), axis(q.z)};
    }
  }
  return Vec3{};
}

ExternalPotential ExternalPotential::checked(WellKind kind, double stiffness,
                                             int wall_exponent, double domain_halfwidth,
                                             double wall_energy) {
  std::vector<std::string> errs;
  if (kind == WellKind::harmonic && !(stiffness > 0.0))
    errs.push_back("external.stiffness must be > 0 for a harmonic well");
  if (kind == WellKind::power_wall) {
    if (wall_exponent < 4 || wall_exponent % 2 != 0)
      errs.push_back("external.wall_exponent must be an even integer >= 4");
    if (!(wall_energy > 0.0)) errs.push_back("external.wall_energy must be > 0");
  }
  if (kind != WellKind::none && !(domain_halfwidth > 0.0))
    errs.push_back("external.domain_halfwidth must be > 0");
  if (!errs.empty()) throw config_error(std::move(errs));
  ExternalPotential e;
  e.kind = kind;
  e.stiffness = stiffness;
  e.wall_exponent = wall_exponent;
  e.domain_halfwidth = domain_halfwidth;
  e.wall_energy = wall_energy;
  return e;
}

bool ValidationReport::all_passed() const {
  for (const auto& c : checks)
    if (!c.passed) return false;
  return true;
}

ValidationReport validate_spec(const PotentialSpec& spec) {
  ValidationReport rep;

  {
    ValidationCheck c{"tail_exponent", spec.gamma > 2.0, ""};
    std::ostringstream os;
    os << "gamma = " << spec.gamma << (c.passed ? " > 2" : " <= 2");
    c.detail = os.str();
    rep.checks.push_back(c);
  }

  const bool repulsive = spec.amplitude > 0.0;
  rep.checks.push_back({"repulsive_amplitude", repulsive,
                        repulsive ? "C > 0" : "C <= 0: attractive family excluded"});

  // Monotone decrease on a log-spaced grid. Uses the analytic power law with
  // the given amplitude sign so an attractive spec fails here too.
  {
    bool monotone = true;
    if (spec.gamma > 0.0 && spec.cutoff_radius > 0.0) {
      const double lo = 0.01, hi = spec.cutoff_radius * 0.999;
      double prev = spec.amplitude * std::pow(lo, -spec.gamma);
      const int npts = 64;
      for (int i = 1; i <= npts && monotone; ++i) {
        const double r = lo * std::pow(hi / lo, static_cast<double>(i) / npts);
        const double v = spec.amplitude * std::pow(r, -spec.gamma);
        if (!(v < prev)) monotone = false;
        prev = v;
      }
    } else {
      monotone = false;
    }
    rep.checks.push_back({"monotone_decrease", monotone,
                          monotone ? "strictly decreasing on log grid [0.01, cutoff)"
                                   : "not strictly decreasing"});
  }

  {
    bool tail_ok = false;
    std::ostringstream os;
    if (spec.gamma > 0.0 && spec.cutoff_radius > 0.0) {
      const double r = 0.5 * spec.cutoff_radius;
      const double lim = std::pow(r, spec.gamma) * (spec.amplitude * std::pow(r, -spec.gamma));
      tail_ok = std::fabs(lim - spec.amplitude) <= 0.01 * std::fabs(spec.amplitude) &&
                spec.amplitude != 0.0;
      os << "r^gamma Phi(r) = " << lim << " vs C = " << spec.amplitude << " at r = cutoff/2";
    } else {
      os << "undefined for non-positive gamma or cutoff";
    }
    rep.checks.push_back({"tail_limit", tail_ok, os.str()});
  }

  return rep;
}

}  // namespace boltzlab
