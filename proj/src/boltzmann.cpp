#include "boltzlab/boltzmann.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "boltzlab/errors.hpp"
#include "boltzlab/kernels.hpp"

namespace boltzlab {

namespace {
constexpr double kPi = 3.14159265358979323846264338327950288;
constexpr double kTwoPi = 2.0 * kPi;
}  // namespace

VelocityEnsemble maxwellian_ensemble(double n_density, const Vec3& u_mean, double temperature,
                                     std::size_t count, std::uint64_t seed, double mass) {
  if (!(temperature > 0.0)) throw std::invalid_argument("maxwellian_ensemble: T must be > 0");
  VelocityEnsemble ve;
  ve.resize(count);
  ve.density = n_density;
  Rng rng(seed);
  const double sigma = std::sqrt(mass * temperature);
  for (std::size_t i = 0; i < count; ++i) {
    ve.set_sample(i, u_mean + sigma * rng.normal3());
  }
  return ve;
}

Moments moments(const VelocityEnsemble& ve, double mass) {
  Moments m;
  const std::size_t n = ve.size();
  if (n == 0) throw std::invalid_argument("moments: empty ensemble");
  m.density = ve.density;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int a = 0; a < 3; ++a) {
    const double s = kernels::reduce_sum(ve.p[a].data(), n);
    (a == 0 ? m.momentum_mean.x : a == 1 ? m.momentum_mean.y : m.momentum_mean.z) =
        s * inv_n;
  }
  double sumsq = 0.0;
  for (int a = 0; a < 3; ++a) sumsq += kernels::reduce_sum_sq(ve.p[a].data(), n);
  m.energy_density = ve.density * 0.5 * sumsq * inv_n / mass;

  double m2 = 0.0, m4 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3 d = ve.sample(i) - m.momentum_mean;
    const double d2 = d.norm2();
    m2 += d2;
    m4 += d2 * d2;
  }
  m2 *= inv_n;
  m4 *= inv_n;
  m.second_moment = m2;
  m.fourth_moment = m4;
  m.excess_kurtosis = m2 > 0.0 ? 0.6 * m4 / (m2 * m2) - 1.0 : 0.0;
  return m;
}

// ---------------------------------------------------------------------------
// Kernels.

CollisionKernel CollisionKernel::hard_sphere(double diameter) {
  if (!(diameter > 0.0)) throw std::invalid_argument("hard_sphere: diameter must be > 0");
  CollisionKernel k;
  k.kind_ = Kind::hard_sphere;
  k.diameter_ = diameter;
  return k;
}

CollisionKernel CollisionKernel::inverse_power(const PotentialSpec& spec, double mass,
                                               double chi_min, double g_min, double g_max) {
  CollisionKernel k;
  k.kind_ = Kind::inverse_power;
  k.table_ = std::make_shared<DeflectionTable>(spec, mass, chi_min, g_min, g_max);
  return k;
}

CollisionKernel CollisionKernel::pseudo_maxwell(double rate_lambda) {
  if (!(rate_lambda > 0.0)) throw std::invalid_argument("pseudo_maxwell: rate must be > 0");
  CollisionKernel k;
  k.kind_ = Kind::pseudo_maxwell;
  k.rate_lambda_ = rate_lambda;
  return k;
}

double CollisionKernel::sigma_g(double g) const {
  switch (kind_) {
    case Kind::hard_sphere:
      return kPi * diameter_ * diameter_ * g;
    case Kind::inverse_power: {
      const double rmax = table_->rho_max(g);
      return kPi * rmax * rmax * g;
    }
    case Kind::pseudo_maxwell:
      return rate_lambda_;
  }
  return 0.0;
}

CollisionOutcome CollisionKernel::collide(const Vec3& p, const Vec3& p1, double mass,
                                          Rng& rng) const {
  const double u_rho = rng.uniform();
  const double phi = rng.uniform(0.0, kTwoPi);
  switch (kind_) {
    case Kind::hard_sphere: {
      const double rho = diameter_ * std::sqrt(u_rho);
      const auto geom = make_collision_geometry(p, p1, rho, phi);
      return hard_sphere_outcome(p, p1, geom, diameter_);
    }
    case Kind::inverse_power: {
      const double g = (p - p1).norm() / mass;
      const double rho = table_->rho_max(g) * std::sqrt(u_rho);
      const auto geom = make_collision_geometry(p, p1, rho, phi);
      return apply_deflection(p, p1, geom, table_->chi(rho, g));
    }
    case Kind::pseudo_maxwell: {
      const double cos_chi = 2.0 * u_rho - 1.0;
      const auto geom = make_collision_geometry(p, p1, 0.0, phi);
      return apply_deflection(p, p1, geom, std::acos(cos_chi));
    }
  }
  return {p, p1, 0.0};
}

void CollisionKernel::quadrature_nodes(double g, std::size_t n_nodes,
                                       std::vector<double>& chi,
                                       std::vector<double>& weight) const {
  chi.resize(n_nodes);
  weight.resize(n_nodes);
  switch (kind_) {
    case Kind::hard_sphere: {
      const double w = kPi * diameter_ * diameter_ / static_cast<double>(n_nodes);
      for (std::size_t k = 0; k < n_nodes; ++k) {
        const double rho =
            diameter_ * std::sqrt((static_cast<double>(k) + 0.5) / static_cast<double>(n_nodes));
        chi[k] = 2.0 * std::acos(rho / diameter_);
        weight[k] = w;
      }
      break;
    }
    case Kind::inverse_power: {
      const double rmax = table_->rho_max(g);
      const double w = kPi * rmax * rmax / static_cast<double>(n_nodes);
      for (std::size_t k = 0; k < n_nodes; ++k) {
        const double rho =
            rmax * std::sqrt((static_cast<double>(k) + 0.5) / static_cast<double>(n_nodes));
        chi[k] = table_->chi(rho, g);
        weight[k] = w;
      }
      break;
    }
    case Kind::pseudo_maxwell: {
      const double w = rate_lambda_ / g / static_cast<double>(n_nodes);
      for (std::size_t k = 0; k < n_nodes; ++k) {
        const double c =
            -1.0 + 2.0 * (static_cast<double>(k) + 0.5) / static_cast<double>(n_nodes);
        chi[k] = std::acos(c);
        weight[k] = w;
      }
      break;
    }
  }
}

// ---------------------------------------------------------------------------
// DSMC.

void dsmc_collision_step(VelocityEnsemble& ve, double dt, const CollisionKernel& kernel,
                         double mu, double mass, Rng& rng, DsmcStats& stats) {
  const std::size_t s = ve.size();
  if (s < 2) throw std::invalid_argument("dsmc_collision_step: need >= 2 samples");
  if (!(dt > 0.0)) throw std::invalid_argument("dsmc_collision_step: dt must be > 0");

  if (stats.majorant <= 0.0) {
    // majorant of sigma_tot(g) * g from the current extreme momenta
    double pmax = 0.0;
    for (int a = 0; a < 3; ++a)
      pmax = std::fmax(pmax, kernels::reduce_max_abs(ve.p[a].data(), s));
    const double g_max = 2.0 * std::sqrt(3.0) * pmax * 1.05 / mass;  // conservative bound
    stats.majorant = kernel.sigma_g(std::fmax(g_max, 1e-12));
    if (kernel.kind() == CollisionKernel::Kind::inverse_power) {
      // sigma*g is not monotone for soft potentials; scan for a bound
      for (int k = 1; k <= 32; ++k) {
        stats.majorant =
            std::fmax(stats.majorant, kernel.sigma_g(g_max * static_cast<double>(k) / 32.0));
      }
    }
    stats.majorant *= 1.2;
  }

  // snapshot for a bias-free restart on majorant overflow
  const std::array<std::vector<double>, 3> saved = ve.p;
  const Rng saved_rng = rng;

  for (;;) {
    bool overflow = false;
    const double nu_max = ve.density * mu * mu * stats.majorant;
    const double expected = 0.5 * static_cast<double>(s) * nu_max * dt;
    std::uint64_t n_cand = static_cast<std::uint64_t>(expected);
    if (rng.uniform() < expected - static_cast<double>(n_cand)) ++n_cand;

    std::uint64_t accepted = 0;
    for (std::uint64_t c = 0; c < n_cand; ++c) {
      const std::size_t i = static_cast<std::size_t>(rng.below(s));
      std::size_t j = static_cast<std::size_t>(rng.below(s - 1));
      if (j >= i) ++j;
      const Vec3 pi = ve.sample(i);
      const Vec3 pj = ve.sample(j);
      const double g = (pi - pj).norm() / mass;
      const double sg = kernel.sigma_g(g);
      if (sg > stats.majorant) {
        stats.majorant *= 2.0;
        ++stats.majorant_doublings;
        overflow = true;
        break;
      }
      if (rng.uniform() * stats.majorant >= sg) continue;
      ++accepted;
      const auto out = kernel.collide(pi, pj, mass, rng);
      ve.set_sample(i, out.p_out);
      ve.set_sample(j, out.p1_out);
    }
    if (!overflow) {
      stats.candidates += n_cand;
      stats.accepted += accepted;
      return;
    }
    ve.p = saved;
    rng = saved_rng;
  }
}

void transport_step(SpatialEnsemble& se, double dt, const ExternalPotential& ext,
                    double mass) {
  const std::size_t n = se.size();
  const double half = 0.5 * dt;
  auto kick = [&](double h) {
    if (ext.kind == WellKind::none) return;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec3 a = ext.accel({se.q[0][i], se.q[1][i], se.q[2][i]}, mass);
      se.p[0][i] += h * mass * a.x;
      se.p[1][i] += h * mass * a.y;
      se.p[2][i] += h * mass * a.z;
    }
  };
  kick(half);
  for (int axis = 0; axis < 3; ++axis) {
    kernels::axpy(dt / mass, se.p[axis].data(), se.q[axis].data(), n);
  }
  kick(half);
  for (std::size_t i = 0; i < n; ++i) {
    if (!ext.inside({se.q[0][i], se.q[1][i], se.q[2][i]})) {
      throw integration_error("transport_step: sample left G (confinement error)", 0.0);
    }
  }
}

// ---------------------------------------------------------------------------
// Deterministic collision-operator quadrature.

double DiscreteVelocityGrid::mass() const {
  const double h3 = spacing() * spacing() * spacing();
  double s = 0.0;
  for (double v : f) s += v;
  return s * h3;
}

double DiscreteVelocityGrid::boundary_mass_fraction() const {
  double total = 0.0, edge = 0.0;
  for (std::size_t ix = 0; ix < n; ++ix)
    for (std::size_t iy = 0; iy < n; ++iy)
      for (std::size_t iz = 0; iz < n; ++iz) {
        const double v = f[index(ix, iy, iz)];
        total += v;
        if (ix == 0 || iy == 0 || iz == 0 || ix == n - 1 || iy == n - 1 || iz == n - 1) {
          edge += v;
        }
      }
  return total > 0.0 ? edge / total : 0.0;
}

DiscreteVelocityGrid maxwellian_grid(double p_max, std::size_t n, const Vec3& u_mean,
                                     double temperature, double mass) {
  DiscreteVelocityGrid grid;
  grid.p_max = p_max;
  grid.n = n;
  grid.f.assign(n * n * n, 0.0);
  const double sigma = std::sqrt(mass * temperature);
  const double h = grid.spacing();
  auto bin_mass_1d = [&](double center, double mu1) {
    const double a = (center - 0.5 * h - mu1) / (sigma * std::sqrt(2.0));
    const double b = (center + 0.5 * h - mu1) / (sigma * std::sqrt(2.0));
    return 0.5 * (std::erf(b) - std::erf(a));
  };
  std::vector<double> mx(n), my(n), mz(n);
  for (std::size_t i = 0; i < n; ++i) {
    mx[i] = bin_mass_1d(grid.node(i), u_mean.x);
    my[i] = bin_mass_1d(grid.node(i), u_mean.y);
    mz[i] = bin_mass_1d(grid.node(i), u_mean.z);
  }
  const double h3 = h * h * h;
  for (std::size_t ix = 0; ix < n; ++ix)
    for (std::size_t iy = 0; iy < n; ++iy)
      for (std::size_t iz = 0; iz < n; ++iz)
        grid.f[grid.index(ix, iy, iz)] = mx[ix] * my[iy] * mz[iz] / h3;
  return grid;
}

namespace {

// moment-exact quadratic deposition weights along one axis
struct StencilAxis {
  std::size_t c;       // center node
  double w[3];         // weights for c-1, c, c+1
  bool ok;
};

inline StencilAxis stencil_1d(double coord, double p_max, double h, std::size_t n) {
  StencilAxis s{};
  const double x = (coord + p_max) / h - 0.5;  // fractional node index
  const double c = std::round(x);
  const double d = x - c;
  if (c < 1.0 || c > static_cast<double>(n - 2)) {
    s.ok = false;
    return s;
  }
  s.c = static_cast<std::size_t>(c);
  s.w[0] = 0.5 * (d * d - d);
  s.w[1] = 1.0 - d * d;
  s.w[2] = 0.5 * (d * d + d);
  s.ok = true;
  return s;
}

}  // namespace

std::vector<double> collision_integral_quadrature(const DiscreteVelocityGrid& grid,
                                                  const CollisionKernel& kernel,
                                                  double n_density, double mu, double mass,
                                                  const QuadratureOptions& opts) {
  const std::size_t n = grid.n;
  if (grid.boundary_mass_fraction() > 1e-6) {
    throw config_error(
        {"collision_integral_quadrature: grid cutoff too small (tail mass > 1e-6)"});
  }
  const double h = grid.spacing();
  const double h3 = h * h * h;
  std::vector<double> st(n * n * n, 0.0);

  std::vector<double> chis, weights;
  std::vector<double> phis(opts.n_phi);
  for (std::size_t l = 0; l < opts.n_phi; ++l) {
    phis[l] = kTwoPi * (static_cast<double>(l) + 0.5) / static_cast<double>(opts.n_phi);
  }
  const double phi_w = 1.0 / static_cast<double>(opts.n_phi);

  const std::size_t total = n * n * n;
  for (std::size_t a = 0; a + 1 < total; ++a) {
    const double fa = grid.f[a];
    if (fa == 0.0) continue;
    const std::size_t ax = a / (n * n), ay = (a / n) % n, az = a % n;
    const Vec3 pa{grid.node(ax), grid.node(ay), grid.node(az)};
    for (std::size_t b = a + 1; b < total; ++b) {
      const double fb = grid.f[b];
      if (fb == 0.0) continue;
      const std::size_t bx = b / (n * n), by = (b / n) % n, bz = b % n;
      const Vec3 pb{grid.node(bx), grid.node(by), grid.node(bz)};
      const Vec3 rel = pa - pb;
      const double g = rel.norm() / mass;
      if (!(g > 0.0)) continue;

      kernel.quadrature_nodes(g, opts.n_rho, chis, weights);
      const auto geom = make_collision_geometry(pa, pb, 0.0, 0.0);

      for (std::size_t k = 0; k < opts.n_rho; ++k) {
        const double chi = chis[k];
        if (chi <= 0.0) continue;
        // event rate: n mu^2 g sigma-weight * f_a f_b h^3 (field units)
        const double base = n_density * mu * mu * g * weights[k] * phi_w * fa * fb * h3;
        if (base == 0.0) continue;
        for (std::size_t l = 0; l < opts.n_phi; ++l) {
          CollisionGeometry gm = geom;
          gm.phi_angle = phis[l];
          const auto post = apply_deflection(pa, pb, gm, chi);
          const Vec3 pa_post = post.p_out;
          const Vec3 pb_post = post.p1_out;

          const StencilAxis sax = stencil_1d(pa_post.x, grid.p_max, h, n);
          const StencilAxis say = stencil_1d(pa_post.y, grid.p_max, h, n);
          const StencilAxis saz = stencil_1d(pa_post.z, grid.p_max, h, n);
          const StencilAxis sbx = stencil_1d(pb_post.x, grid.p_max, h, n);
          const StencilAxis sby = stencil_1d(pb_post.y, grid.p_max, h, n);
          const StencilAxis sbz = stencil_1d(pb_post.z, grid.p_max, h, n);
          if (!sax.ok || !say.ok || !saz.ok || !sbx.ok || !sby.ok || !sbz.ok) {
            continue;  // event dropped whole: conservation preserved
          }
          st[a] -= base;
          st[b] -= base;
          for (int u = 0; u < 3; ++u)
            for (int v = 0; v < 3; ++v)
              for (int w = 0; w < 3; ++w) {
                const double wa = sax.w[u] * say.w[v] * saz.w[w];
                if (wa != 0.0)
                  st[grid.index(sax.c + u - 1, say.c + v - 1, saz.c + w - 1)] += base * wa;
                const double wb = sbx.w[u] * sby.w[v] * sbz.w[w];
                if (wb != 0.0)
                  st[grid.index(sbx.c + u - 1, sby.c + v - 1, sbz.c + w - 1)] += base * wb;
              }
        }
      }
    }
  }
  return st;
}

// ---------------------------------------------------------------------------
// Homogeneous runs.

PhaseHistogram velocity_histogram(const VelocityEnsemble& ve, const std::vector<Axis>& axes,
                                  double volume) {
  PhaseHistogram h;
  h.axes = axes;
  h.counts.assign(h.n_bins(), 0);
  for (std::size_t i = 0; i < ve.size(); ++i) {
    ++h.sample_count;
    std::size_t flat = 0;
    bool ok = true;
    const Vec3 p = ve.sample(i);
    for (const auto& ax : axes) {
      double x = 0.0;
      switch (ax.var) {
        case AxisVar::px: x = p.x; break;
        case AxisVar::py: x = p.y; break;
        case AxisVar::pz: x = p.z; break;
        default:
          throw std::invalid_argument("velocity_histogram: momentum axes only");
      }
      if (x < ax.edges.front() || x >= ax.edges.back()) {
        ok = false;
        break;
      }
      const auto it = std::upper_bound(ax.edges.begin(), ax.edges.end(), x);
      flat = flat * (ax.edges.size() - 1) +
             static_cast<std::size_t>(it - ax.edges.begin() - 1);
    }
    if (ok) {
      ++h.counts[flat];
    } else {
      ++h.out_of_range;
    }
  }
  const std::uint64_t in_range = h.sample_count - h.out_of_range;
  if (in_range == 0) throw std::invalid_argument("velocity_histogram: no in-range samples");
  h.normalization = volume;
  h.values.assign(h.counts.size(), 0.0);
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    if (h.counts[b] == 0) continue;
    h.values[b] = static_cast<double>(h.counts[b]) * volume /
                  (static_cast<double>(in_range) * h.bin_volume(b));
  }
  h.out_of_range_warning = h.out_of_range * 100 > h.sample_count;
  return h;
}

double maxwell_h_reference(const VelocityEnsemble& ve, const std::vector<Axis>& axes,
                           double volume, double mass) {
  const Moments m = moments(ve, mass);
  const double sigma2 = m.second_moment / 3.0;
  const double sigma = std::sqrt(sigma2);
  const Vec3 u = m.momentum_mean;

  // per-axis bin masses of the matched Gaussian
  std::vector<std::vector<double>> bin_mass(3);
  const double root2 = std::sqrt(2.0);
  for (int a = 0; a < 3; ++a) {
    const double mu1 = a == 0 ? u.x : a == 1 ? u.y : u.z;
    const auto& e = axes[a].edges;
    bin_mass[a].resize(e.size() - 1);
    for (std::size_t i = 0; i + 1 < e.size(); ++i) {
      bin_mass[a][i] = 0.5 * (std::erf((e[i + 1] - mu1) / (sigma * root2)) -
                              std::erf((e[i] - mu1) / (sigma * root2)));
    }
  }
  // total in-grid mass: the plug-in estimate is normalized over in-range
  // samples, so the reference is normalized over in-grid mass
  double total = 0.0;
  for (double vx : bin_mass[0])
    for (double vy : bin_mass[1])
      for (double vz : bin_mass[2]) total += vx * vy * vz;
  double h = 0.0;
  const std::size_t nx = bin_mass[0].size(), ny = bin_mass[1].size(), nz = bin_mass[2].size();
  for (std::size_t ix = 0; ix < nx; ++ix)
    for (std::size_t iy = 0; iy < ny; ++iy)
      for (std::size_t iz = 0; iz < nz; ++iz) {
        const double pm = bin_mass[0][ix] * bin_mass[1][iy] * bin_mass[2][iz] / total;
        if (pm <= 0.0) continue;
        const double vol = (axes[0].edges[ix + 1] - axes[0].edges[ix]) *
                           (axes[1].edges[iy + 1] - axes[1].edges[iy]) *
                           (axes[2].edges[iz + 1] - axes[2].edges[iz]);
        const double value = volume * pm / vol;
        h += value * std::log(value) * vol;
      }
  return h;
}

double estimate_mean_free_time(const VelocityEnsemble& ve, const CollisionKernel& kernel,
                               double mu, double mass) {
  const std::size_t s = ve.size();
  if (s < 2) throw std::invalid_argument("estimate_mean_free_time: need >= 2 samples");
  const std::size_t n_pairs = std::min<std::size_t>(s / 2, 4096);
  double acc = 0.0;
  for (std::size_t k = 0; k < n_pairs; ++k) {
    const Vec3 a = ve.sample(k);
    const Vec3 b = ve.sample(s - 1 - k);
    acc += kernel.sigma_g((a - b).norm() / mass);
  }
  const double mean_sg = acc / static_cast<double>(n_pairs);
  const double nu = ve.density * mu * mu * mean_sg;
  return nu > 0.0 ? 1.0 / nu : 0.0;
}

KineticRunReport run_homogeneous(const HomogeneousRunConfig& config) {
  KineticRunReport rep;
  VelocityEnsemble ve = config.initial;
  if (ve.size() < 2) throw config_error({"run_homogeneous: need >= 2 samples"});

  rep.mean_free_time = estimate_mean_free_time(ve, config.kernel, config.mu, config.mass);
  double dt = config.dt;
  if (dt <= 0.0) dt = 0.1 * rep.mean_free_time;
  if (rep.mean_free_time > 0.0 && dt > 0.2 * rep.mean_free_time) {
    throw config_error(
        {"run_homogeneous: dt exceeds the collision-frequency stability bound "
         "(expected collisions per particle per step > 0.2)"});
  }
  rep.dt = dt;

  // fixed H histogram across the run
  double span = config.h_span;
  if (span <= 0.0) {
    for (int a = 0; a < 3; ++a)
      span = std::fmax(span, kernels::reduce_max_abs(ve.p[a].data(), ve.size()));
    span *= 1.05;
  }
  rep.h_axes = {uniform_axis(AxisVar::px, -span, span, config.h_bins),
                uniform_axis(AxisVar::py, -span, span, config.h_bins),
                uniform_axis(AxisVar::pz, -span, span, config.h_bins)};

  Rng rng(config.seed);
  auto log_sample = [&](double t) {
    const auto hist = velocity_histogram(ve, rep.h_axes, config.volume);
    const auto hres = h_functional(hist);
    const auto mom = moments(ve, config.mass);
    KineticSample ks;
    ks.t = t;
    ks.h = hres.h;
    ks.h_stderr = hres.stderr_;
    ks.density = mom.density;
    ks.momentum_mean = mom.momentum_mean;
    ks.energy_density = mom.energy_density;
    ks.excess_kurtosis = mom.excess_kurtosis;
    ks.fourth_moment = mom.fourth_moment;
    rep.series.push_back(ks);
  };

  std::vector<double> outputs = config.output_times;
  std::sort(outputs.begin(), outputs.end());
  const std::uint64_t total_steps =
      static_cast<std::uint64_t>(std::llround(config.t_final / dt));
  std::vector<std::uint64_t> output_steps;
  for (double t : outputs) {
    output_steps.push_back(static_cast<std::uint64_t>(std::llround(t / dt)));
  }
  std::size_t next_out = 0;
  auto emit = [&](std::uint64_t k) {
    while (next_out < output_steps.size() && output_steps[next_out] == k) {
      log_sample(static_cast<double>(k) * dt);
      ++next_out;
    }
  };
  emit(0);
  for (std::uint64_t k = 0; k < total_steps; ++k) {
    if (ve.density > 0.0) {
      dsmc_collision_step(ve, dt, config.kernel, config.mu, config.mass, rng, rep.stats);
    }
    emit(k + 1);
  }
  rep.maxwell_h_reference = maxwell_h_reference(ve, rep.h_axes, config.volume, config.mass);
  rep.final_state = std::move(ve);
  return rep;
}

}  // namespace boltzlab
