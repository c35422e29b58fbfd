#include "boltzlab/scattering.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "boltzlab/errors.hpp"

namespace boltzlab {

namespace {
constexpr double kPi = 3.14159265358979323846264338327950288;
}

CollisionGeometry make_collision_geometry(const Vec3& p, const Vec3& p1, double rho,
                                          double phi) {
  const Vec3 g = p - p1;
  const double gn = g.norm();
  if (!(gn > 0.0)) throw std::invalid_argument("degenerate collision: p == p1");
  if (rho < 0.0) throw std::invalid_argument("impact parameter must be >= 0");
  const Vec3 n = g / gn;
  // any direction not parallel to n
  const Vec3 seed = std::fabs(n.x) < 0.9 ? Vec3{1.0, 0.0, 0.0} : Vec3{0.0, 1.0, 0.0};
  const Vec3 e1 = normalized(cross(n, seed));
  const Vec3 e2 = cross(n, e1);
  CollisionGeometry geom;
  geom.rho = rho;
  geom.phi_angle = phi;
  geom.e1 = e1;
  geom.e2 = e2;
  return geom;
}

// ---------------------------------------------------------------------------
// Adaptive relative-motion integrator (Cash-Karp 4(5) embedded pair).

namespace {

struct RelState {
  Vec3 r;
  Vec3 v;  // dr/dt
};

inline Vec3 rel_accel(const Vec3& r, const PotentialSpec& spec, double mu, double m_red) {
  const double d = r.norm();
  const double x = d / mu;
  if (x >= spec.cutoff_radius) return Vec3{};
  // force on the relative coordinate: repulsive, along +r
  const double f = spec.force(x) / (mu * m_red);
  return (f / d) * r;
}

// Cash-Karp tableau.
constexpr double kB21 = 1.0 / 5.0;
constexpr double kB31 = 3.0 / 40.0, kB32 = 9.0 / 40.0;
constexpr double kB41 = 3.0 / 10.0, kB42 = -9.0 / 10.0, kB43 = 6.0 / 5.0;
constexpr double kB51 = -11.0 / 54.0, kB52 = 5.0 / 2.0, kB53 = -70.0 / 27.0,
                 kB54 = 35.0 / 27.0;
constexpr double kB61 = 1631.0 / 55296.0, kB62 = 175.0 / 512.0, kB63 = 575.0 / 13824.0,
                 kB64 = 44275.0 / 110592.0, kB65 = 253.0 / 4096.0;
constexpr double kC1 = 37.0 / 378.0, kC3 = 250.0 / 621.0, kC4 = 125.0 / 594.0,
                 kC6 = 512.0 / 1771.0;
constexpr double kD1 = kC1 - 2825.0 / 27648.0, kD3 = kC3 - 18575.0 / 48384.0,
                 kD4 = kC4 - 13525.0 / 55296.0, kD5 = -277.0 / 14336.0,
                 kD6 = kC6 - 1.0 / 4.0;

struct StepResult {
  RelState y;
  double err;  // scaled error estimate
};

StepResult ck_step(const RelState& y, double h, const PotentialSpec& spec, double mu,
                   double m_red, double scale_r, double scale_v) {
  auto f = [&](const RelState& s) {
    return RelState{s.v, rel_accel(s.r, spec, mu, m_red)};
  };
  const RelState k1 = f(y);
  const RelState k2 = f({y.r + h * kB21 * k1.r, y.v + h * kB21 * k1.v});
  const RelState k3 = f({y.r + h * (kB31 * k1.r + kB32 * k2.r),
                         y.v + h * (kB31 * k1.v + kB32 * k2.v)});
  const RelState k4 = f({y.r + h * (kB41 * k1.r + kB42 * k2.r + kB43 * k3.r),
                         y.v + h * (kB41 * k1.v + kB42 * k2.v + kB43 * k3.v)});
  const RelState k5 =
      f({y.r + h * (kB51 * k1.r + kB52 * k2.r + kB53 * k3.r + kB54 * k4.r),
         y.v + h * (kB51 * k1.v + kB52 * k2.v + kB53 * k3.v + kB54 * k4.v)});
  const RelState k6 = f(
      {y.r + h * (kB61 * k1.r + kB62 * k2.r + kB63 * k3.r + kB64 * k4.r + kB65 * k5.r),
       y.v + h * (kB61 * k1.v + kB62 * k2.v + kB63 * k3.v + kB64 * k4.v + kB65 * k5.v)});

  StepResult out;
  out.y.r = y.r + h * (kC1 * k1.r + kC3 * k3.r + kC4 * k4.r + kC6 * k6.r);
  out.y.v = y.v + h * (kC1 * k1.v + kC3 * k3.v + kC4 * k4.v + kC6 * k6.v);
  const Vec3 er = h * (kD1 * k1.r + kD3 * k3.r + kD4 * k4.r + kD5 * k5.r + kD6 * k6.r);
  const Vec3 ev = h * (kD1 * k1.v + kD3 * k3.v + kD4 * k4.v + kD5 * k5.v + kD6 * k6.v);
  out.err = std::fmax(max_abs_component(er) / scale_r, max_abs_component(ev) / scale_v);
  return out;
}

}  // namespace

namespace {

// Time until the straight line r + w*s first reaches separation `range`
// within [0, horizon]; negative if it never does.
double free_entry_time(const Vec3& r, const Vec3& w, double range, double horizon) {
  const double w2 = w.norm2();
  if (!(w2 > 0.0)) return -1.0;
  const double b = dot(r, w);
  const double c = r.norm2() - range * range;
  const double disc = b * b - w2 * c;
  if (disc < 0.0) return -1.0;
  const double s = (-b - std::sqrt(disc)) / w2;
  if (s < 0.0 || s > horizon) return -1.0;
  return s;
}

}  // namespace

std::pair<Vec3, Vec3> relative_flow(Vec3 r, Vec3 p_rel, double t, const PotentialSpec& spec,
                                    double mu, double mass, const FlowOptions& opts) {
  if (!(r.norm2() > 0.0)) throw std::invalid_argument("two-body flow: coincident positions");
  const double m_red = 0.5 * mass;
  if (t == 0.0) return {r, p_rel};

  const double range = mu * spec.cutoff_radius;
  const double dir = t > 0.0 ? 1.0 : -1.0;
  const double t_end = std::fabs(t);

  RelState y{r, p_rel / m_red};
  double elapsed = 0.0;
  double closest = y.r.norm();
  double h = 0.0;
  std::size_t steps = 0;

  const double scale_r = std::fmax(y.r.norm(), range);
  const double scale_v = std::fmax(y.v.norm(), 1e-30);
  const double tol_r = scale_r * opts.rel_tol + opts.abs_tol;
  const double tol_v = scale_v * opts.rel_tol + opts.abs_tol;

  while (elapsed < t_end) {
    const Vec3 w = dir * y.v;  // actual velocity in integration direction
    if (y.r.norm() >= range) {
      // outside the interaction range: free flight, analytically, up to the
      // sphere entry point (or to the end of the interval)
      const double remaining = t_end - elapsed;
      // shrink slightly so the next adaptive phase starts just inside
      const double s_in = free_entry_time(y.r, w, range * (1.0 - 1e-12), remaining);
      if (s_in < 0.0) {
        y.r += remaining * w;
        elapsed = t_end;
        break;
      }
      y.r += s_in * w;
      elapsed += s_in;
      closest = std::fmin(closest, y.r.norm());
      if (elapsed >= t_end) break;
      h = 0.0;
      continue;
    }

    // inside the range: adaptive steps, capped so a step cannot jump across
    // the localized force region
    const double speed = std::fmax(y.v.norm(), 1e-30);
    const double h_cap = std::fmax(0.05 * range / speed, 1e-3 * range / scale_v);
    if (h <= 0.0) h = 0.2 * h_cap;
    h = std::fmin(std::fmin(h, h_cap), t_end - elapsed);

    if (++steps > opts.max_steps) {
      throw integration_error("two-body flow: step limit exceeded", closest);
    }
    const StepResult res = ck_step(y, dir * h, spec, mu, m_red, tol_r, tol_v);
    if (res.err <= 1.0) {
      y = res.y;
      elapsed += h;
      closest = std::fmin(closest, y.r.norm());
      const double grow = res.err > 1e-30 ? 0.9 * std::pow(res.err, -0.2) : 5.0;
      h *= std::fmin(5.0, grow);
    } else {
      h *= std::fmax(0.1, 0.9 * std::pow(res.err, -0.25));
      if (h < t_end * 1e-15 || h < 1e-300) {
        throw integration_error("two-body flow: step-size underflow near singular approach",
                                closest);
      }
    }
  }
  return {y.r, m_red * y.v};
}

std::pair<PhasePoint, PhasePoint> two_body_flow(const PhasePoint& x1, const PhasePoint& x2,
                                                double t, const PotentialSpec& spec,
                                                double mu, double mass,
                                                const FlowOptions& opts) {
  const Vec3 r = x1.q - x2.q;
  if (!(r.norm2() > 0.0)) throw std::invalid_argument("two-body flow: coincident positions");

  // Whole-interval free flight: exact q_i + p_i t / m on the inputs.
  {
    const double range = mu * spec.cutoff_radius;
    const Vec3 w = (1.0 / mass) * (x1.p - x2.p);
    const double w2 = w.norm2();
    double tc = w2 > 0.0 ? -dot(r, w) / w2 : 0.0;
    tc = std::clamp(tc, std::fmin(0.0, t), std::fmax(0.0, t));
    const double dmin = std::fmin(std::fmin(r.norm(), (r + tc * w).norm()),
                                  (r + t * w).norm());
    if (dmin >= range) {
      PhasePoint a{x1.q + (t / mass) * x1.p, x1.p};
      PhasePoint b{x2.q + (t / mass) * x2.p, x2.p};
      return {a, b};
    }
  }

  const Vec3 p_rel = 0.5 * (x1.p - x2.p);
  const Vec3 p_tot = x1.p + x2.p;
  const Vec3 q_cm = 0.5 * (x1.q + x2.q);

  auto [r_t, p_rel_t] = relative_flow(r, p_rel, t, spec, mu, mass, opts);

  const Vec3 q_cm_t = q_cm + (t / (2.0 * mass)) * p_tot;
  PhasePoint a{q_cm_t + 0.5 * r_t, 0.5 * p_tot + p_rel_t};
  PhasePoint b{q_cm_t - 0.5 * r_t, 0.5 * p_tot - p_rel_t};
  return {a, b};
}

// ---------------------------------------------------------------------------
// Deflection angle.

namespace {

// Gauss-Legendre 16-point nodes/weights on [-1, 1].
constexpr double kGlx[8] = {0.0950125098376374, 0.2816035507792589, 0.4580167776572274,
                            0.6178762444026438, 0.7554044083550030, 0.8656312023878318,
                            0.9445750230732326, 0.9894009349916499};
constexpr double kGlw[8] = {0.1894506104550685, 0.1826034150449236, 0.1691565193950025,
                            0.1495959888165767, 0.1246289712555339, 0.0951585116824928,
                            0.0622535239386479, 0.0271524594117541};

template <typename F>
double gl16(const F& f, double a, double b) {
  const double c = 0.5 * (a + b);
  const double hw = 0.5 * (b - a);
  double s = 0.0;
  for (int i = 0; i < 8; ++i) {
    s += kGlw[i] * (f(c + hw * kGlx[i]) + f(c - hw * kGlx[i]));
  }
  return hw * s;
}

template <typename F>
double integrate_adaptive(const F& f, double a, double b, double rel_tol) {
  double prev = gl16(f, a, b);
  for (int panels = 2; panels <= 256; panels *= 2) {
    double cur = 0.0;
    const double w = (b - a) / panels;
    for (int k = 0; k < panels; ++k) cur += gl16(f, a + k * w, a + (k + 1) * w);
    if (std::fabs(cur - prev) <= rel_tol * std::fmax(1.0, std::fabs(cur))) return cur;
    prev = cur;
  }
  return prev;
}

}  // namespace

double deflection_angle(double rho, double g, const PotentialSpec& spec, double mass) {
  if (rho < 0.0 || !(g > 0.0)) {
    throw std::invalid_argument("deflection_angle: need rho >= 0 and g > 0");
  }
  const double rc = spec.cutoff_radius;
  if (spec.kind == PairKind::hard_sphere_limit) {
    if (rho >= rc) return 0.0;
    return 2.0 * std::acos(rho / rc);
  }
  if (rho >= rc) return 0.0;
  if (rho == 0.0) return kPi;

  const double m_red = 0.5 * mass;
  const double energy = 0.5 * m_red * g * g;
  const double u_c = 1.0 / rc;

  auto effective = [&](double u) {
    return 1.0 - rho * rho * u * u - spec.value(1.0 / u) / energy;
  };
  auto effective_deriv = [&](double u) {
    return -2.0 * rho * rho * u - spec.force(1.0 / u) / (energy * u * u);
  };

  // Bracket the turning point: effective(u_c) > 0, and the centrifugal +
  // potential terms force a sign change below min(1/rho-ish, core).
  double lo = u_c;
  double hi = std::fmax(2.0 * u_c, 1.0 / rho);
  while (effective(hi) > 0.0) {
    hi *= 2.0;
    if (hi > 1e12) throw std::runtime_error("deflection_angle: turning point not found");
  }
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    (effective(mid) > 0.0 ? lo : hi) = mid;
    if ((hi - lo) <= 1e-15 * hi) break;
  }
  double u_max = 0.5 * (lo + hi);
  for (int it = 0; it < 6; ++it) {
    const double fv = effective(u_max);
    const double dv = effective_deriv(u_max);
    if (dv == 0.0) break;
    const double next = u_max - fv / dv;
    if (!(next > lo * 0.5) || !(next < hi * 2.0)) break;
    u_max = next;
  }

  const double slope = -effective_deriv(u_max);  // > 0 at the turning point
  const double width = u_max - u_c;
  if (!(width > 0.0)) return 0.0;  // grazing exactly at the cutoff seam

  // Substitution u = u_max - width * s^2 removes the 1/sqrt singularity.
  auto integrand = [&](double s) {
    const double u = u_max - width * s * s;
    double fv = effective(u);
    if (fv <= 0.0) fv = slope * (u_max - u);  // rounding guard near the endpoint
    return 2.0 * width * s / std::sqrt(fv);
  };
  const double integral = integrate_adaptive(integrand, 0.0, 1.0, 1e-11);

  double chi = kPi - 2.0 * std::asin(std::fmin(1.0, rho * u_c)) - 2.0 * rho * integral;
  if (chi < 0.0) chi = 0.0;
  if (chi > kPi) chi = kPi;
  return chi;
}

namespace {

CollisionOutcome rotate_relative(const Vec3& p, const Vec3& p1, const CollisionGeometry& geom,
                                 double chi) {
  CollisionOutcome out;
  if (chi < kGrazingChi) {
    out.p_out = p;
    out.p1_out = p1;
    out.deflection = 0.0;
    return out;
  }
  const Vec3 center = 0.5 * (p + p1);
  const Vec3 rel = 0.5 * (p - p1);
  const double rn = rel.norm();
  const Vec3 n = rel / rn;
  const Vec3 d = std::cos(geom.phi_angle) * geom.e1 + std::sin(geom.phi_angle) * geom.e2;
  Vec3 n_post = std::cos(chi) * n + std::sin(chi) * d;
  n_post = normalized(n_post);  // keeps |p'-p1'| = |p-p1| to rounding
  out.p_out = center + rn * n_post;
  out.p1_out = center - rn * n_post;
  out.deflection = chi;
  return out;
}

}  // namespace

CollisionOutcome post_collision_momenta(const Vec3& p, const Vec3& p1,
                                        const CollisionGeometry& geom,
                                        const PotentialSpec& spec, double mass) {
  const Vec3 g = p - p1;
  const double gn = g.norm();
  if (!(gn > 0.0)) throw std::invalid_argument("degenerate collision: p == p1");
  const double chi = deflection_angle(geom.rho, gn / mass, spec, mass);
  return rotate_relative(p, p1, geom, chi);
}

CollisionOutcome apply_deflection(const Vec3& p, const Vec3& p1,
                                  const CollisionGeometry& geom, double chi) {
  return rotate_relative(p, p1, geom, chi);
}

CollisionOutcome hard_sphere_outcome(const Vec3& p, const Vec3& p1,
                                     const CollisionGeometry& geom, double diameter) {
  const Vec3 g = p - p1;
  if (!(g.norm2() > 0.0)) throw std::invalid_argument("degenerate collision: p == p1");
  double chi = 0.0;
  if (geom.rho < diameter) chi = 2.0 * std::acos(geom.rho / diameter);
  return rotate_relative(p, p1, geom, chi);
}

// ---------------------------------------------------------------------------
// Pullback table.

namespace {

// cos(beta) grid clustered toward +-1 so the near-axis impact parameter
// b = d sin(beta) ~ d sqrt(2(1 - |cos beta|)) is uniformly resolved:
// u in [-1, 1] uniform, cb = u (2 - |u|).
inline double beta_node(std::size_t ib, std::size_t n_beta) {
  const double u = -1.0 + 2.0 * static_cast<double>(ib) / static_cast<double>(n_beta - 1);
  return u * (2.0 - std::fabs(u));
}

inline double beta_fraction(double cb, std::size_t n_beta) {
  // inverse of beta_node: u = sign(cb) (1 - sqrt(1 - |cb|))
  const double u = (cb < 0.0 ? -1.0 : 1.0) * (1.0 - std::sqrt(std::fmax(0.0, 1.0 - std::fabs(cb))));
  return (u + 1.0) * 0.5 * static_cast<double>(n_beta - 1);
}

}  // namespace

PullbackTable::PullbackTable(const PotentialSpec& spec, double mu, double mass,
                             double delta_t, std::size_t n_d, std::size_t n_g,
                             std::size_t n_beta, double g_max)
    : spec_(spec),
      mu_(mu),
      mass_(mass),
      delta_t_(delta_t),
      range_(mu * spec.cutoff_radius),
      g_min_(1e-3 * g_max),
      g_max_(g_max),
      n_d_(n_d),
      n_g_(n_g),
      n_beta_(n_beta) {
  par_.resize(n_d_ * n_g_ * n_beta_);
  perp_.resize(n_d_ * n_g_ * n_beta_);
  const double m_red = 0.5 * mass_;
  for (std::size_t id = 0; id < n_d_; ++id) {
    const double d = range_ * (static_cast<double>(id) + 0.5) / static_cast<double>(n_d_);
    for (std::size_t ig = 0; ig < n_g_; ++ig) {
      const double g = g_min_ * std::pow(g_max_ / g_min_,
                                         static_cast<double>(ig) /
                                             static_cast<double>(n_g_ - 1));
      const double pr = m_red * g;  // |p_rel| for relative speed g
      for (std::size_t ib = 0; ib < n_beta_; ++ib) {
        const double cb = beta_node(ib, n_beta_);
        const double sb = std::sqrt(std::fmax(0.0, 1.0 - cb * cb));
        const Vec3 r{0.0, 0.0, d};
        const Vec3 prel{pr * sb, 0.0, pr * cb};
        auto [r0, prel0] = relative_flow(r, prel, -delta_t_, spec, mu_, mass_);
        (void)r0;
        // express in the (p_rel-hat, in-plane normal) basis
        const Vec3 ph = (1.0 / pr) * prel;
        Vec3 er = r / d - cb * ph;
        const double ern = er.norm();
        if (ern > 1e-12) {
          er = er / ern;
        } else {
          er = Vec3{};
        }
        // stored as fractions of |p_rel| so magnitudes interpolate cleanly
        const std::size_t idx = (id * n_g_ + ig) * n_beta_ + ib;
        par_[idx] = dot(prel0, ph) / pr;
        perp_[idx] = ern > 1e-12 ? dot(prel0, er) / pr : 0.0;
      }
    }
  }
}

Vec3 PullbackTable::pulled_back_relative(const Vec3& r, const Vec3& p_rel) const {
  const double d = r.norm();
  const double pn = p_rel.norm();
  if (d >= range_ || !(pn > 0.0)) return p_rel;  // free flight keeps momenta

  const double g = std::clamp(2.0 * pn / mass_, g_min_, g_max_);

  const Vec3 ph = (1.0 / pn) * p_rel;
  const Vec3 rh = (1.0 / d) * r;
  double cb = std::clamp(dot(rh, ph), -1.0, 1.0);

  // The interpolation degrades where the backward flow runs into a hard
  // collision (receding pairs at small impact parameter, or configurations
  // deep inside the core). Those queries integrate directly.
  {
    const double b_impact = d / mu_ * std::sqrt(std::fmax(0.0, 1.0 - cb * cb));
    const bool strong = (cb > -0.2 && b_impact <= 2.0) || d / mu_ <= 1.5;
    if (strong) {
      return relative_flow(r, p_rel, -delta_t_, spec_, mu_, mass_).second;
    }
  }

  // fractional indices
  double fd = d / range_ * static_cast<double>(n_d_) - 0.5;
  fd = std::clamp(fd, 0.0, static_cast<double>(n_d_ - 1));
  double fg = std::log(g / g_min_) / std::log(g_max_ / g_min_) *
              static_cast<double>(n_g_ - 1);
  fg = std::clamp(fg, 0.0, static_cast<double>(n_g_ - 1));
  double fb = beta_fraction(cb, n_beta_);

  const std::size_t i0 = std::min(static_cast<std::size_t>(fd), n_d_ - 2);
  const std::size_t j0 = std::min(static_cast<std::size_t>(fg), n_g_ - 2);
  const std::size_t k0 = std::min(static_cast<std::size_t>(fb), n_beta_ - 2);
  const double wd = fd - static_cast<double>(i0);
  const double wg = fg - static_cast<double>(j0);
  const double wb = fb - static_cast<double>(k0);

  auto tri = [&](const std::vector<double>& tab) {
    double acc = 0.0;
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 2; ++c) {
          const double w = (a ? wd : 1 - wd) * (b ? wg : 1 - wg) * (c ? wb : 1 - wb);
          acc += w * tab[((i0 + a) * n_g_ + (j0 + b)) * n_beta_ + (k0 + c)];
        }
    return acc;
  };
  const double a_par = tri(par_);
  const double a_perp = tri(perp_);

  Vec3 er = rh - cb * ph;
  const double ern = er.norm();
  if (ern > 1e-12) {
    er = er / ern;
  } else {
    return (pn * a_par) * ph;  // colinear geometry: motion stays on the axis
  }
  return pn * (a_par * ph + a_perp * er);
}

// ---------------------------------------------------------------------------
// Deflection table.

DeflectionTable::DeflectionTable(const PotentialSpec& spec, double mass, double chi_min,
                                 double g_min, double g_max, std::size_t n_rho,
                                 std::size_t n_g)
    : chi_min_(chi_min), g_min_(g_min), g_max_(g_max), n_rho_(n_rho), n_g_(n_g) {
  if (!(g_min > 0.0) || !(g_max > g_min)) {
    throw std::invalid_argument("DeflectionTable: need 0 < g_min < g_max");
  }
  rho_max_.resize(n_g_);
  chi_.resize(n_g_ * n_rho_);
  const double rc = spec.cutoff_radius;
  for (std::size_t jg = 0; jg < n_g_; ++jg) {
    const double lg = static_cast<double>(jg) / static_cast<double>(n_g_ - 1);
    const double g = g_min_ * std::pow(g_max_ / g_min_, lg);
    // chi is monotone decreasing in rho for the repulsive family; find the
    // grazing-cutoff impact parameter.
    double lo = 0.0, hi = rc;
    if (deflection_angle(rc * (1.0 - 1e-12), g, spec, mass) >= chi_min_) {
      rho_max_[jg] = rc;
    } else {
      for (int it = 0; it < 60; ++it) {
        const double mid = 0.5 * (lo + hi);
        (deflection_angle(mid, g, spec, mass) >= chi_min_ ? lo : hi) = mid;
      }
      rho_max_[jg] = 0.5 * (lo + hi);
    }
    for (std::size_t jr = 0; jr < n_rho_; ++jr) {
      const double frac = static_cast<double>(jr) / static_cast<double>(n_rho_ - 1);
      chi_[jg * n_rho_ + jr] = deflection_angle(frac * rho_max_[jg], g, spec, mass);
    }
  }
}

double DeflectionTable::rho_max(double g) const {
  const double gc = std::clamp(g, g_min_, g_max_);
  const double pos = std::log(gc / g_min_) / std::log(g_max_ / g_min_) *
                     static_cast<double>(n_g_ - 1);
  const std::size_t j = std::min(static_cast<std::size_t>(pos), n_g_ - 2);
  const double w = pos - static_cast<double>(j);
  return (1.0 - w) * rho_max_[j] + w * rho_max_[j + 1];
}

double DeflectionTable::chi(double rho, double g) const {
  const double gc = std::clamp(g, g_min_, g_max_);
  const double pos = std::log(gc / g_min_) / std::log(g_max_ / g_min_) *
                     static_cast<double>(n_g_ - 1);
  const std::size_t j = std::min(static_cast<std::size_t>(pos), n_g_ - 2);
  const double wg = pos - static_cast<double>(j);

  auto column = [&](std::size_t jg) {
    const double rmax = rho_max_[jg];
    if (rho >= rmax) return 0.0;
    const double rpos = rho / rmax * static_cast<double>(n_rho_ - 1);
    const std::size_t i = std::min(static_cast<std::size_t>(rpos), n_rho_ - 2);
    const double wr = rpos - static_cast<double>(i);
    return (1.0 - wr) * chi_[jg * n_rho_ + i] + wr * chi_[jg * n_rho_ + i + 1];
  };
  return (1.0 - wg) * column(j) + wg * column(j + 1);
}

void DeflectionTable::dump_csv(std::ostream& os) const {
  os << "rho,g,chi\n";
  for (std::size_t jg = 0; jg < n_g_; ++jg) {
    const double lg = static_cast<double>(jg) / static_cast<double>(n_g_ - 1);
    const double g = g_min_ * std::pow(g_max_ / g_min_, lg);
    for (std::size_t jr = 0; jr < n_rho_; ++jr) {
      const double frac = static_cast<double>(jr) / static_cast<double>(n_rho_ - 1);
      os << frac * rho_max_[jg] << ',' << g << ',' << chi_[jg * n_rho_ + jr] << '\n';
    }
  }
}

}  // namespace boltzlab
