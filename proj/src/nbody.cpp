#include "boltzlab/nbody.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <ostream>
#include <thread>

#include "boltzlab/errors.hpp"
#include "boltzlab/kernels.hpp"
#include "boltzlab/rng.hpp"

namespace boltzlab {

void SystemState::resize(std::size_t n) {
  for (int a = 0; a < 3; ++a) {
    q[a].assign(n, 0.0);
    p[a].assign(n, 0.0);
  }
}

PhasePoint SystemState::particle(std::size_t i) const {
  return {{q[0][i], q[1][i], q[2][i]}, {p[0][i], p[1][i], p[2][i]}};
}

void SystemState::set_particle(std::size_t i, const PhasePoint& x) {
  q[0][i] = x.q.x;
  q[1][i] = x.q.y;
  q[2][i] = x.q.z;
  p[0][i] = x.p.x;
  p[1][i] = x.p.y;
  p[2][i] = x.p.z;
}

// ---------------------------------------------------------------------------
// Forces.

ForceEvaluator::ForceEvaluator(const NbodyParams& params, std::size_t n)
    : params_(params), n_(n) {
  range_ = params_.mu * params_.pair.cutoff_radius;
  skin_ = params_.all_pairs ? 0.0 : params_.skin_factor * range_;
}

void ForceEvaluator::invalidate() { valid_ = false; }

namespace {

inline std::int64_t pack_cell(int cx, int cy, int cz) {
  // offset into 21-bit fields
  const std::int64_t off = 1 << 20;
  return ((cx + off) << 42) | ((cy + off) << 21) | (cz + off);
}

}  // namespace

void ForceEvaluator::rebuild(const SystemState& s) {
  pairs_.clear();
  if (n_ < 2) {
    valid_ = true;
    travel_bound_ = 0.0;
    return;
  }
  const double rlist = range_ + skin_;
  const double rlist2 = rlist * rlist;

  if (params_.all_pairs) {
    for (std::uint32_t i = 0; i + 1 < n_; ++i)
      for (std::uint32_t j = i + 1; j < n_; ++j) pairs_.emplace_back(i, j);
    valid_ = true;
    return;
  }

  const double inv_cell = 1.0 / rlist;
  std::vector<std::pair<std::int64_t, std::uint32_t>> keyed(n_);
  for (std::size_t i = 0; i < n_; ++i) {
    const int cx = static_cast<int>(std::floor(s.q[0][i] * inv_cell));
    const int cy = static_cast<int>(std::floor(s.q[1][i] * inv_cell));
    const int cz = static_cast<int>(std::floor(s.q[2][i] * inv_cell));
    keyed[i] = {pack_cell(cx, cy, cz), static_cast<std::uint32_t>(i)};
  }
  std::sort(keyed.begin(), keyed.end());

  // occupied-cell index: key -> [begin, end) in the sorted array
  struct Span {
    std::uint32_t begin, end;
  };
  std::vector<std::pair<std::int64_t, Span>> cells;
  for (std::uint32_t k = 0; k < n_;) {
    std::uint32_t e = k + 1;
    while (e < n_ && keyed[e].first == keyed[k].first) ++e;
    cells.push_back({keyed[k].first, {k, e}});
    k = e;
  }
  auto find_span = [&](std::int64_t key) -> const Span* {
    auto it = std::lower_bound(cells.begin(), cells.end(), key,
                               [](const auto& a, std::int64_t k) { return a.first < k; });
    if (it == cells.end() || it->first != key) return nullptr;
    return &it->second;
  };

  for (std::uint32_t i = 0; i < n_; ++i) {
    const int cx = static_cast<int>(std::floor(s.q[0][i] * inv_cell));
    const int cy = static_cast<int>(std::floor(s.q[1][i] * inv_cell));
    const int cz = static_cast<int>(std::floor(s.q[2][i] * inv_cell));
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          const Span* span = find_span(pack_cell(cx + dx, cy + dy, cz + dz));
          if (!span) continue;
          for (std::uint32_t k = span->begin; k < span->end; ++k) {
            const std::uint32_t j = keyed[k].second;
            if (j <= i) continue;
            const double ddx = s.q[0][i] - s.q[0][j];
            const double ddy = s.q[1][i] - s.q[1][j];
            const double ddz = s.q[2][i] - s.q[2][j];
            if (ddx * ddx + ddy * ddy + ddz * ddz <= rlist2) pairs_.emplace_back(i, j);
          }
        }
  }
  travel_bound_ = 0.0;
  valid_ = true;
}

double ForceEvaluator::compute(const SystemState& s,
                               std::array<std::vector<double>, 3>& force) {
  const std::size_t n = n_;
  for (int a = 0; a < 3; ++a) {
    if (force[a].size() != n) force[a].assign(n, 0.0);
  }

  // external force first (overwrites), pair forces accumulate on top
  switch (params_.ext.kind) {
    case WellKind::none:
      for (int a = 0; a < 3; ++a) std::fill(force[a].begin(), force[a].end(), 0.0);
      break;
    case WellKind::harmonic:
      for (int a = 0; a < 3; ++a) {
        std::fill(force[a].begin(), force[a].end(), 0.0);
        kernels::axpy(-params_.ext.stiffness, s.q[a].data(), force[a].data(), n);
      }
      break;
    case WellKind::power_wall: {
      const double L = params_.ext.domain_halfwidth;
      const double coeff = params_.ext.wall_energy * params_.ext.wall_exponent / L;
      for (int a = 0; a < 3; ++a) {
        kernels::wall_accel(s.q[a].data(), force[a].data(), n, 1.0 / L, coeff,
                            params_.ext.wall_exponent - 1);
      }
      break;
    }
  }

  if (n < 2) return 0.0;

  if (!params_.all_pairs) {
    // conservative displacement bound since the last rebuild
    if (!valid_ || travel_bound_ > 0.5 * skin_) rebuild(s);
  } else if (!valid_) {
    rebuild(s);
  }

  const double range2 = range_ * range_;
  const double inv_mu = 1.0 / params_.mu;
  double pair_energy = 0.0;
  for (const auto& [i, j] : pairs_) {
    const double dx = s.q[0][i] - s.q[0][j];
    const double dy = s.q[1][i] - s.q[1][j];
    const double dz = s.q[2][i] - s.q[2][j];
    const double r2 = dx * dx + dy * dy + dz * dz;
    if (r2 >= range2 || r2 == 0.0) continue;
    const double r = std::sqrt(r2);
    const double x = r * inv_mu;
    pair_energy += params_.pair.value(x);
    const double fmag = params_.pair.force(x) * inv_mu / r;
    const double fx = fmag * dx, fy = fmag * dy, fz = fmag * dz;
    force[0][i] += fx;
    force[0][j] -= fx;
    force[1][i] += fy;
    force[1][j] -= fy;
    force[2][i] += fz;
    force[2][j] -= fz;
  }
  return pair_energy;
}

// ---------------------------------------------------------------------------
// Integration.

void verlet_step(SystemState& s, double dt, double mass, ForceEvaluator& eval,
                 std::array<std::vector<double>, 3>& force) {
  const std::size_t n = s.size();
  const double half_dt = 0.5 * dt;
  const double dt_over_m = dt / mass;
  for (int a = 0; a < 3; ++a) kernels::axpy(half_dt, force[a].data(), s.p[a].data(), n);
  double vmax = 0.0;
  for (int a = 0; a < 3; ++a) {
    kernels::axpy(dt_over_m, s.p[a].data(), s.q[a].data(), n);
    vmax = std::fmax(vmax, kernels::reduce_max_abs(s.p[a].data(), n));
  }
  eval.note_travel(std::sqrt(3.0) * vmax / mass * dt);
  eval.compute(s, force);
  for (int a = 0; a < 3; ++a) kernels::axpy(half_dt, force[a].data(), s.p[a].data(), n);
  s.time += dt;
}

SystemState step(const SystemState& s, double dt, const NbodyParams& params) {
  NbodyParams local = params;
  if (s.size() <= 256) local.all_pairs = true;
  ForceEvaluator eval(local, s.size());
  std::array<std::vector<double>, 3> force;
  eval.compute(s, force);
  SystemState out = s;
  verlet_step(out, dt, params.mass, eval, force);
  return out;
}

double kinetic_energy(const SystemState& s, double mass) {
  const std::size_t n = s.size();
  double sum = 0.0;
  for (int a = 0; a < 3; ++a) sum += kernels::reduce_sum_sq(s.p[a].data(), n);
  return 0.5 * sum / mass;
}

double total_energy(const SystemState& s, const NbodyParams& params) {
  NbodyParams local = params;
  if (s.size() <= 256) local.all_pairs = true;
  ForceEvaluator eval(local, s.size());
  std::array<std::vector<double>, 3> scratch;
  const double pair_energy = eval.compute(s, scratch);
  double ext_energy = 0.0;
  if (params.ext.kind != WellKind::none) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      ext_energy += params.ext.value({s.q[0][i], s.q[1][i], s.q[2][i]});
    }
  }
  return kinetic_energy(s, params.mass) + pair_energy + ext_energy;
}

double suggest_dt(const SystemState& s, const NbodyParams& params) {
  double v2max = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double v2 = (s.p[0][i] * s.p[0][i] + s.p[1][i] * s.p[1][i] +
                       s.p[2][i] * s.p[2][i]);
    v2max = std::fmax(v2max, v2);
  }
  const double vmax = std::sqrt(v2max) / params.mass;
  if (vmax <= 0.0) return 0.05 * params.mu;
  const double traversal = params.mu * params.pair.cutoff_radius / vmax;
  return std::fmin(0.01 * params.mu / vmax, 0.05 * traversal);
}

void reverse_momenta(SystemState& s) {
  for (int a = 0; a < 3; ++a) kernels::scale(-1.0, s.p[a].data(), s.size());
}

// ---------------------------------------------------------------------------
// Sampling.

namespace {

Vec3 draw_position(const InitialLaw& law, double halfwidth, Rng& rng) {
  if (law.spatial == SpatialLaw::uniform_in_g) {
    return {rng.uniform(-halfwidth, halfwidth), rng.uniform(-halfwidth, halfwidth),
            rng.uniform(-halfwidth, halfwidth)};
  }
  // gaussian blob, sigma = L/3, resampled into the box
  for (;;) {
    const Vec3 v = (halfwidth / 3.0) * rng.normal3();
    if (std::fabs(v.x) < halfwidth && std::fabs(v.y) < halfwidth &&
        std::fabs(v.z) < halfwidth)
      return v;
  }
}

Vec3 draw_momentum(const InitialLaw& law, double mass, Rng& rng) {
  switch (law.velocity) {
    case VelocityLaw::maxwellian:
      return std::sqrt(mass * law.temperature) * rng.normal3();
    case VelocityLaw::two_temperature: {
      const double t = rng.uniform() < law.hot_weight ? law.t_hot : law.t_cold;
      return std::sqrt(mass * t) * rng.normal3();
    }
    case VelocityLaw::shifted_maxwellian:
      return mass * law.drift + std::sqrt(mass * law.temperature) * rng.normal3();
  }
  return Vec3{};
}

}  // namespace

Ensemble sample_initial(const InitialLaw& law, std::size_t n_particles,
                        std::size_t n_replicas, std::uint64_t seed,
                        const NbodyParams& params) {
  if (n_particles < 1 || n_replicas < 1) {
    throw config_error({"sample_initial: particle and replica counts must be >= 1"});
  }
  Ensemble ens;
  ens.rng_seed = seed;
  ens.mu = params.mu;
  ens.mass = params.mass;
  ens.box_halfwidth =
      params.ext.kind == WellKind::none ? 1.0 : params.ext.domain_halfwidth;
  ens.replicas.resize(n_replicas);

  const double excl2 = law.exclusion_radius * law.exclusion_radius;
  std::uint64_t attempts = 0, accepted = 0;

  for (std::size_t m = 0; m < n_replicas; ++m) {
    Rng rng(Rng::derive(seed, m));
    SystemState& st = ens.replicas[m];
    st.resize(n_particles);
    st.time = 0.0;
    std::vector<Vec3> placed;
    placed.reserve(n_particles);
    for (std::size_t i = 0; i < n_particles; ++i) {
      Vec3 pos;
      int local_attempts = 0;
      for (;;) {
        ++attempts;
        ++local_attempts;
        pos = draw_position(law, ens.box_halfwidth, rng);
        bool ok = true;
        if (excl2 > 0.0) {
          for (const Vec3& other : placed) {
            if ((pos - other).norm2() < excl2) {
              ok = false;
              break;
            }
          }
        }
        if (ok) break;
        if (local_attempts > 200) {
          throw config_error(
              {"sample_initial: exclusion acceptance rate below 50% (packing too dense)"});
        }
      }
      ++accepted;
      placed.push_back(pos);
      st.set_particle(i, {pos, draw_momentum(law, params.mass, rng)});
    }
  }
  ens.sampling_acceptance =
      attempts ? static_cast<double>(accepted) / static_cast<double>(attempts) : 1.0;
  if (ens.sampling_acceptance < 0.5) {
    throw config_error(
        {"sample_initial: exclusion acceptance rate below 50% (packing too dense)"});
  }
  return ens;
}

// ---------------------------------------------------------------------------
// Ensemble evolution.

namespace {

struct ReplicaResult {
  std::vector<SystemState> snaps;
  ReplicaEnergyStats energy;
};

}  // namespace

TrajectoryRecord evolve_ensemble(const Ensemble& ens, const NbodyParams& params,
                                 const EvolveOptions& opts) {
  TrajectoryRecord rec;
  if (ens.replicas.empty()) throw config_error({"evolve_ensemble: empty ensemble"});

  double dt = opts.dt;
  if (dt <= 0.0) {
    dt = suggest_dt(ens.replicas[0], params);
    for (const auto& r : ens.replicas) dt = std::fmin(dt, suggest_dt(r, params));
  }
  rec.dt = dt;

  // snap requested times to whole steps
  std::vector<std::uint64_t> snap_steps;
  for (double t : opts.snapshot_times) {
    if (t > opts.t_final + 0.5 * dt) {
      throw config_error({"evolve_ensemble: snapshot time beyond t_final"});
    }
    snap_steps.push_back(static_cast<std::uint64_t>(std::llround(t / dt)));
  }
  const std::uint64_t total_steps =
      static_cast<std::uint64_t>(std::llround(opts.t_final / dt));
  for (auto s : snap_steps) rec.snapshot_times.push_back(static_cast<double>(s) * dt);
  rec.total_steps = total_steps * ens.replicas.size();

  const std::size_t m_total = ens.replicas.size();
  std::vector<ReplicaResult> results(m_total);

  auto run_replica = [&](std::size_t m) {
    SystemState st = ens.replicas[m];
    ForceEvaluator eval(params, st.size());
    std::array<std::vector<double>, 3> force;
    eval.compute(st, force);
    ReplicaResult& out = results[m];
    out.energy.initial = total_energy(st, params);
    double e_ref = std::fabs(out.energy.initial) > 1e-12 ? out.energy.initial : 1.0;

    std::size_t next_snap = 0;
    auto take_snaps = [&](std::uint64_t step_idx) {
      while (next_snap < snap_steps.size() && snap_steps[next_snap] == step_idx) {
        out.snaps.push_back(st);
        ++next_snap;
      }
    };
    take_snaps(0);
    for (std::uint64_t k = 0; k < total_steps; ++k) {
      verlet_step(st, dt, params.mass, eval, force);
      if ((k + 1) % opts.check_every == 0 || k + 1 == total_steps) {
        for (std::size_t i = 0; i < st.size(); ++i) {
          if (!params.ext.inside({st.q[0][i], st.q[1][i], st.q[2][i]})) {
            throw integration_error("replica " + std::to_string(m) +
                                        ": particle escaped G (confinement overwhelmed)",
                                    0.0);
          }
        }
        const double e = total_energy(st, params);
        out.energy.max_rel_drift = std::fmax(out.energy.max_rel_drift,
                                             std::fabs(e - out.energy.initial) /
                                                 std::fabs(e_ref));
        out.energy.final_ = e;
      }
      take_snaps(k + 1);
    }
    if (total_steps == 0) out.energy.final_ = out.energy.initial;
  };

  const int threads = std::max(1, opts.threads);
  if (threads == 1 || m_total == 1) {
    for (std::size_t m = 0; m < m_total; ++m) run_replica(m);
  } else {
    std::atomic<std::size_t> cursor{0};
    std::exception_ptr first_error = nullptr;
    std::mutex err_mutex;
    auto worker = [&]() {
      for (;;) {
        const std::size_t m = cursor.fetch_add(1);
        if (m >= m_total) return;
        try {
          run_replica(m);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    };
    std::vector<std::thread> pool;
    const int nw = std::min<int>(threads, static_cast<int>(m_total));
    pool.reserve(nw);
    for (int w = 0; w < nw; ++w) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    if (first_error) std::rethrow_exception(first_error);
  }

  // assemble snapshots in (time, replica) order
  rec.snapshots.resize(snap_steps.size());
  for (std::size_t sidx = 0; sidx < snap_steps.size(); ++sidx) {
    Ensemble snap;
    snap.rng_seed = ens.rng_seed;
    snap.mu = ens.mu;
    snap.mass = ens.mass;
    snap.box_halfwidth = ens.box_halfwidth;
    snap.time = rec.snapshot_times[sidx];
    snap.sampling_acceptance = ens.sampling_acceptance;
    snap.replicas.reserve(m_total);
    for (std::size_t m = 0; m < m_total; ++m) snap.replicas.push_back(results[m].snaps[sidx]);
    rec.snapshots[sidx] = std::move(snap);
  }
  rec.energy.reserve(m_total);
  for (auto& r : results) rec.energy.push_back(r.energy);
  return rec;
}

void write_snapshot(std::ostream& os, const Ensemble& ens) {
  char buf[512];
  std::snprintf(buf, sizeof buf,
                "# {\"n\":%zu,\"m\":%zu,\"mu\":%.17g,\"mass\":%.17g,\"seed\":%llu,"
                "\"time\":%.17g,\"box_halfwidth\":%.17g}\n",
                ens.n_particles(), ens.n_replicas(), ens.mu, ens.mass,
                static_cast<unsigned long long>(ens.rng_seed), ens.time,
                ens.box_halfwidth);
  os << buf;
  os << "# replica index qx qy qz px py pz\n";
  for (std::size_t m = 0; m < ens.n_replicas(); ++m) {
    const SystemState& st = ens.replicas[m];
    for (std::size_t i = 0; i < st.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%zu %zu %.17g %.17g %.17g %.17g %.17g %.17g\n", m, i,
                    st.q[0][i], st.q[1][i], st.q[2][i], st.p[0][i], st.p[1][i], st.p[2][i]);
      os << buf;
    }
  }
}

}  // namespace boltzlab
