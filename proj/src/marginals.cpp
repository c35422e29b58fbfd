#include "boltzlab/marginals.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <stdexcept>

#include "boltzlab/errors.hpp"
#include "boltzlab/rng.hpp"

namespace boltzlab {

namespace {
constexpr double kPi = 3.14159265358979323846264338327950288;
}

const char* axis_var_name(AxisVar v) {
  switch (v) {
    case AxisVar::qx: return "qx";
    case AxisVar::qy: return "qy";
    case AxisVar::qz: return "qz";
    case AxisVar::px: return "px";
    case AxisVar::py: return "py";
    case AxisVar::pz: return "pz";
    case AxisVar::pr: return "pr";
    case AxisVar::r12: return "r12";
    case AxisVar::p1x: return "p1x";
    case AxisVar::p1y: return "p1y";
    case AxisVar::p1z: return "p1z";
    case AxisVar::p2x: return "p2x";
    case AxisVar::p2y: return "p2y";
    case AxisVar::p2z: return "p2z";
  }
  return "?";
}

Axis uniform_axis(AxisVar var, double lo, double hi, std::size_t bins) {
  if (!(hi > lo) || bins < 1) throw std::invalid_argument("uniform_axis: bad range");
  Axis ax;
  ax.var = var;
  ax.edges.resize(bins + 1);
  for (std::size_t i = 0; i <= bins; ++i) {
    ax.edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
  }
  return ax;
}

std::size_t PhaseHistogram::n_bins() const {
  std::size_t n = 1;
  for (const auto& ax : axes) n *= ax.edges.size() - 1;
  return n;
}

double PhaseHistogram::bin_volume(std::size_t flat) const {
  double vol = 1.0;
  for (std::size_t a = axes.size(); a-- > 0;) {
    const std::size_t nb = axes[a].edges.size() - 1;
    const std::size_t idx = flat % nb;
    vol *= axes[a].edges[idx + 1] - axes[a].edges[idx];
    flat /= nb;
  }
  return vol;
}

double PhaseHistogram::integral() const {
  double s = 0.0;
  for (std::size_t b = 0; b < values.size(); ++b) s += values[b] * bin_volume(b);
  return s;
}

namespace {

// bin index along one axis; -1 out of range
inline int locate(const std::vector<double>& edges, double x) {
  if (x < edges.front() || x >= edges.back()) return -1;
  const auto it = std::upper_bound(edges.begin(), edges.end(), x);
  return static_cast<int>(it - edges.begin()) - 1;
}

}  // namespace

double PhaseHistogram::value_at(const double* coords) const {
  std::size_t flat = 0;
  for (std::size_t a = 0; a < axes.size(); ++a) {
    const int idx = locate(axes[a].edges, coords[a]);
    if (idx < 0) return 0.0;
    flat = flat * (axes[a].edges.size() - 1) + static_cast<std::size_t>(idx);
  }
  return values[flat];
}

std::vector<double> PhaseHistogram::bin_centers(std::size_t axis) const {
  const auto& e = axes[axis].edges;
  std::vector<double> c(e.size() - 1);
  for (std::size_t i = 0; i + 1 < e.size(); ++i) c[i] = 0.5 * (e[i] + e[i + 1]);
  return c;
}

namespace {

double extract_single(const SystemState& st, std::size_t i, AxisVar v) {
  switch (v) {
    case AxisVar::qx: return st.q[0][i];
    case AxisVar::qy: return st.q[1][i];
    case AxisVar::qz: return st.q[2][i];
    case AxisVar::px: return st.p[0][i];
    case AxisVar::py: return st.p[1][i];
    case AxisVar::pz: return st.p[2][i];
    case AxisVar::pr:
      return std::sqrt(st.p[0][i] * st.p[0][i] + st.p[1][i] * st.p[1][i] +
                       st.p[2][i] * st.p[2][i]);
    default:
      throw std::invalid_argument("estimate_f1: pair axis used for a single-particle marginal");
  }
}

double extract_pair(const SystemState& st, std::size_t i, std::size_t j, AxisVar v) {
  switch (v) {
    case AxisVar::r12: {
      const double dx = st.q[0][i] - st.q[0][j];
      const double dy = st.q[1][i] - st.q[1][j];
      const double dz = st.q[2][i] - st.q[2][j];
      return std::sqrt(dx * dx + dy * dy + dz * dz);
    }
    case AxisVar::p1x: return st.p[0][i];
    case AxisVar::p1y: return st.p[1][i];
    case AxisVar::p1z: return st.p[2][i];
    case AxisVar::p2x: return st.p[0][j];
    case AxisVar::p2y: return st.p[1][j];
    case AxisVar::p2z: return st.p[2][j];
    default:
      throw std::invalid_argument("estimate_f2: single-particle axis used for a pair marginal");
  }
}

void finalize(PhaseHistogram& h, double norm) {
  h.normalization = norm;
  const std::uint64_t in_range = h.sample_count - h.out_of_range;
  if (in_range == 0) throw std::invalid_argument("histogram: no in-range samples");
  h.values.assign(h.counts.size(), 0.0);
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    if (h.counts[b] == 0) continue;
    h.values[b] = static_cast<double>(h.counts[b]) * norm /
                  (static_cast<double>(in_range) * h.bin_volume(b));
  }
  h.out_of_range_warning =
      h.out_of_range * 100 > h.sample_count;  // > 1% of samples out of range
}

}  // namespace

PhaseHistogram estimate_f1(const Ensemble& ens, const std::vector<Axis>& axes) {
  if (ens.replicas.empty() || ens.n_particles() == 0) {
    throw std::invalid_argument("estimate_f1: empty ensemble");
  }
  if (axes.empty()) throw std::invalid_argument("estimate_f1: no axes");
  PhaseHistogram h;
  h.axes = axes;
  h.counts.assign(h.n_bins(), 0);

  for (const auto& st : ens.replicas) {
    for (std::size_t i = 0; i < st.size(); ++i) {
      ++h.sample_count;
      std::size_t flat = 0;
      bool ok = true;
      for (const auto& ax : axes) {
        const int idx = locate(ax.edges, extract_single(st, i, ax.var));
        if (idx < 0) {
          ok = false;
          break;
        }
        flat = flat * (ax.edges.size() - 1) + static_cast<std::size_t>(idx);
      }
      if (ok) {
        ++h.counts[flat];
      } else {
        ++h.out_of_range;
      }
    }
  }
  finalize(h, ens.volume());
  return h;
}

PhaseHistogram estimate_f2(const Ensemble& ens, const std::vector<Axis>& axes) {
  if (ens.replicas.empty() || ens.n_particles() < 2) {
    throw std::invalid_argument("estimate_f2: need at least two particles");
  }
  if (axes.empty()) throw std::invalid_argument("estimate_f2: no axes");
  PhaseHistogram h;
  h.axes = axes;
  h.counts.assign(h.n_bins(), 0);

  for (const auto& st : ens.replicas) {
    const std::size_t n = st.size();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (i == j) continue;  // ordered pairs, both orderings counted
        ++h.sample_count;
        std::size_t flat = 0;
        bool ok = true;
        for (const auto& ax : axes) {
          const int idx = locate(ax.edges, extract_pair(st, i, j, ax.var));
          if (idx < 0) {
            ok = false;
            break;
          }
          flat = flat * (ax.edges.size() - 1) + static_cast<std::size_t>(idx);
        }
        if (ok) {
          ++h.counts[flat];
        } else {
          ++h.out_of_range;
        }
      }
    }
  }
  finalize(h, ens.volume() * ens.volume());
  return h;
}

HEstimate h_functional(const PhaseHistogram& f1) {
  HEstimate out;
  const std::uint64_t in_range = f1.sample_count - f1.out_of_range;
  double h = 0.0;
  double mean_a = 0.0, mean_a2 = 0.0;
  for (std::size_t b = 0; b < f1.values.size(); ++b) {
    const double v = f1.values[b];
    if (v < 0.0) throw std::invalid_argument("h_functional: negative bin value");
    if (v == 0.0) continue;
    ++out.occupied_bins;
    const double vol = f1.bin_volume(b);
    h += v * std::log(v) * vol;
    // delta-method pieces, weighted by the bin probability v*vol/norm
    const double pb = v * vol / f1.normalization;
    const double a = f1.normalization * (std::log(v) + 1.0);
    mean_a += pb * a;
    mean_a2 += pb * a * a;
  }
  out.h = h;
  out.entropy = -h;
  if (in_range > 1) {
    out.stderr_ = std::sqrt(std::fmax(0.0, mean_a2 - mean_a * mean_a) /
                            static_cast<double>(in_range));
    out.miller_madow_bias = f1.normalization *
                            static_cast<double>(out.occupied_bins ? out.occupied_bins - 1 : 0) /
                            (2.0 * static_cast<double>(in_range));
  }
  return out;
}

TestFunctionSet TestFunctionSet::defaults(double mass, double temperature) {
  const double sigma = std::sqrt(mass * temperature);
  const Vec3 p_thermal{sigma, 0.0, 0.0};
  TestFunctionSet set;
  set.members.push_back({"one", [](const Vec3&) { return 1.0; }});
  set.members.push_back({"p2x", [](const Vec3& p) { return p.x; }});
  set.members.push_back({"p2_sq", [](const Vec3& p) { return p.norm2(); }});
  set.members.push_back({"gauss_thermal", [p_thermal, sigma](const Vec3& p) {
                           return std::exp(-(p - p_thermal).norm2() / (2.0 * sigma * sigma));
                         }});
  return set;
}

std::vector<ChaosProbe> default_probes(double mass, double temperature) {
  const double sigma = std::sqrt(mass * temperature);
  const double r = sigma / std::sqrt(3.0);
  std::vector<ChaosProbe> probes;
  for (int sx : {-1, 1})
    for (int sy : {-1, 1})
      for (int sz : {-1, 1}) {
        probes.push_back({Vec3{sx * r, sy * r, sz * r}, 2.0 * sigma});
      }
  return probes;
}

// ---------------------------------------------------------------------------
// Molecular-chaos residual.

namespace {

// Separable f1-hat built from a snapshot: V * rho(q) * g(p) with rho and g
// pdf-normalized histograms.
struct SeparableF1 {
  PhaseHistogram rho;  // qx,qy,qz
  PhaseHistogram g;    // px,py,pz
  double volume = 1.0;

  double eval(const Vec3& q, const Vec3& p) const {
    const double qc[3] = {q.x, q.y, q.z};
    const double pc[3] = {p.x, p.y, p.z};
    // rho.values integrate to V over q; g.values integrate to V over p;
    // f1 = V * (rho/V) * (g/V) = rho * g / V
    return rho.value_at(qc) * g.value_at(pc) / volume;
  }
};

SeparableF1 build_separable_f1(const Ensemble& ens, const ChaosOptions& opts,
                               double sigma) {
  SeparableF1 f;
  f.volume = ens.volume();
  const double L = ens.box_halfwidth;
  const double span = opts.momentum_span * sigma;
  std::vector<Axis> qaxes = {uniform_axis(AxisVar::qx, -L, L, opts.space_bins),
                             uniform_axis(AxisVar::qy, -L, L, opts.space_bins),
                             uniform_axis(AxisVar::qz, -L, L, opts.space_bins)};
  std::vector<Axis> paxes = {uniform_axis(AxisVar::px, -span, span, opts.momentum_bins),
                             uniform_axis(AxisVar::py, -span, span, opts.momentum_bins),
                             uniform_axis(AxisVar::pz, -span, span, opts.momentum_bins)};
  f.rho = estimate_f1(ens, qaxes);
  f.g = estimate_f1(ens, paxes);
  return f;
}

}  // namespace

ChaosReport chaos_residual(const Ensemble& at_t, const Ensemble& at_t_minus_dt,
                           double delta_t, const std::vector<ChaosProbe>& probes,
                           const TestFunctionSet& tests, const PotentialSpec& spec,
                           const ChaosOptions& opts) {
  const std::size_t n = at_t.n_particles();
  const std::size_t m_reps = at_t.n_replicas();
  if (n < 2 || m_reps < 1) throw std::invalid_argument("chaos_residual: degenerate ensemble");
  const double mass = at_t.mass;
  const double mu = at_t.mu;
  const double volume = at_t.volume();
  const double L = at_t.box_halfwidth;
  const double sigma = std::sqrt(mass * opts.temperature_hint);

  const double bulk_half = opts.bulk_fraction * L;
  const double vol_bulk = 8.0 * bulk_half * bulk_half * bulk_half;
  const double r_w = opts.pair_window_factor * mu * spec.cutoff_radius;
  const double vol_w = 4.0 / 3.0 * kPi * r_w * r_w * r_w;
  // the partner window of every bulk probe center must stay inside the
  // near-uniform interior, or the empirical side is biased against the
  // factorized reference
  if (bulk_half + r_w > 0.95 * L) {
    throw config_error(
        {"chaos_residual: bulk window plus pair window exceeds the box interior "
         "(reduce bulk_fraction or pair_window_factor)"});
  }

  const std::size_t n_probes = probes.size();
  const std::size_t n_tf = tests.members.size();

  const SeparableF1 f1_ref = build_separable_f1(at_t_minus_dt, opts, sigma);

  // --- A side: empirical pair sums per replica -----------------------------
  std::vector<std::vector<double>> a_sum(m_reps,
                                         std::vector<double>(n_probes * n_tf, 0.0));
  std::vector<std::vector<std::uint64_t>> a_count(m_reps,
                                                  std::vector<std::uint64_t>(n_probes, 0));

  const double r_w2 = r_w * r_w;
  std::vector<double> phi_vals(n_tf);
  std::vector<std::size_t> probe_hits;
  for (std::size_t m = 0; m < m_reps; ++m) {
    const SystemState& st = at_t.replicas[m];
    // cell grid over positions with cell size r_w
    const double inv_cell = 1.0 / r_w;
    std::vector<std::pair<std::int64_t, std::uint32_t>> keyed(n);
    auto cell_of = [&](std::size_t i) -> std::array<int, 3> {
      return {static_cast<int>(std::floor(st.q[0][i] * inv_cell)),
              static_cast<int>(std::floor(st.q[1][i] * inv_cell)),
              static_cast<int>(std::floor(st.q[2][i] * inv_cell))};
    };
    auto pack = [](const std::array<int, 3>& c) -> std::int64_t {
      const std::int64_t off = 1 << 20;
      return ((static_cast<std::int64_t>(c[0]) + off) << 42) |
             ((static_cast<std::int64_t>(c[1]) + off) << 21) |
             (static_cast<std::int64_t>(c[2]) + off);
    };
    for (std::size_t i = 0; i < n; ++i) keyed[i] = {pack(cell_of(i)), static_cast<std::uint32_t>(i)};
    std::sort(keyed.begin(), keyed.end());

    for (std::size_t i = 0; i < n; ++i) {
      if (std::fabs(st.q[0][i]) > bulk_half || std::fabs(st.q[1][i]) > bulk_half ||
          std::fabs(st.q[2][i]) > bulk_half)
        continue;
      const Vec3 pi{st.p[0][i], st.p[1][i], st.p[2][i]};
      probe_hits.clear();
      for (std::size_t pr = 0; pr < n_probes; ++pr) {
        if ((pi - probes[pr].p_center).norm2() <=
            probes[pr].p_radius * probes[pr].p_radius)
          probe_hits.push_back(pr);
      }
      if (probe_hits.empty()) continue;

      const auto ci = cell_of(i);
      for (int dx = -1; dx <= 1; ++dx)
        for (int dy = -1; dy <= 1; ++dy)
          for (int dz = -1; dz <= 1; ++dz) {
            const std::int64_t key = pack({ci[0] + dx, ci[1] + dy, ci[2] + dz});
            auto it = std::lower_bound(
                keyed.begin(), keyed.end(), key,
                [](const auto& a, std::int64_t k) { return a.first < k; });
            for (; it != keyed.end() && it->first == key; ++it) {
              const std::size_t j = it->second;
              if (j == i) continue;
              const double ddx = st.q[0][j] - st.q[0][i];
              const double ddy = st.q[1][j] - st.q[1][i];
              const double ddz = st.q[2][j] - st.q[2][i];
              if (ddx * ddx + ddy * ddy + ddz * ddz > r_w2) continue;
              const Vec3 pj{st.p[0][j], st.p[1][j], st.p[2][j]};
              for (std::size_t t = 0; t < n_tf; ++t) phi_vals[t] = tests.members[t].eval(pj);
              for (std::size_t pr : probe_hits) {
                ++a_count[m][pr];
                for (std::size_t t = 0; t < n_tf; ++t)
                  a_sum[m][pr * n_tf + t] += phi_vals[t];
              }
            }
          }
    }
  }

  // --- B side: factorized reference through the backward flow --------------
  // common across replicas. The A side is a cell average over the probe set
  // (bulk positions x momentum ball x partner window), so the reference is
  // the same cell average: a free-flight part computed from unbinned sample
  // statistics (the free backward flight keeps momenta, so f1 f1 factorizes
  // into ball fraction x weak moments x bulk density squared), plus the flow
  // correction over paired (delta, p1) nodes, nonzero only where the backward
  // flow differs from free flight.
  std::vector<double> b_val(n_probes * n_tf, 0.0);
  {
    // sample statistics of the reference snapshot
    double bulk_count = 0.0, total_count = 0.0;
    std::vector<double> phi_mean(n_tf, 0.0);
    std::vector<std::vector<double>> ball_count(n_probes,
                                                std::vector<double>(1, 0.0));
    for (std::size_t pr = 0; pr < n_probes; ++pr) ball_count[pr][0] = 0.0;
    for (const auto& st : at_t_minus_dt.replicas) {
      for (std::size_t i = 0; i < st.size(); ++i) {
        total_count += 1.0;
        if (std::fabs(st.q[0][i]) <= bulk_half && std::fabs(st.q[1][i]) <= bulk_half &&
            std::fabs(st.q[2][i]) <= bulk_half)
          bulk_count += 1.0;
        const Vec3 p{st.p[0][i], st.p[1][i], st.p[2][i]};
        for (std::size_t t = 0; t < n_tf; ++t) phi_mean[t] += tests.members[t].eval(p);
        for (std::size_t pr = 0; pr < n_probes; ++pr) {
          if ((p - probes[pr].p_center).norm2() <=
              probes[pr].p_radius * probes[pr].p_radius)
            ball_count[pr][0] += 1.0;
        }
      }
    }
    for (std::size_t t = 0; t < n_tf; ++t) phi_mean[t] /= total_count;
    const double rho_bulk = bulk_count / (total_count * vol_bulk);  // spatial pdf

    const auto p_centers_x = f1_ref.g.bin_centers(0);
    const auto p_centers_y = f1_ref.g.bin_centers(1);
    const auto p_centers_z = f1_ref.g.bin_centers(2);
    const std::size_t nb = opts.momentum_bins;
    const Vec3 q1{0.0, 0.0, 0.0};  // bulk representative position
    auto free_pullback = [&](const PhasePoint& x) {
      return PhasePoint{x.q - (delta_t / mass) * x.p, x.p};
    };

    for (std::size_t pr = 0; pr < n_probes; ++pr) {
      const double vol_p = 4.0 / 3.0 * kPi * probes[pr].p_radius *
                           probes[pr].p_radius * probes[pr].p_radius;
      const double ball_avg = ball_count[pr][0] / (total_count * vol_p);
      const double spatial = volume * rho_bulk * volume * rho_bulk;
      for (std::size_t t = 0; t < n_tf; ++t) {
        b_val[pr * n_tf + t] = spatial * ball_avg * phi_mean[t];
      }

      // flow correction over paired (delta, p1) nodes
      if (delta_t != 0.0) {
        Rng rng(Rng::derive(opts.offset_seed, pr));
        const double r_p = probes[pr].p_radius;
        for (std::size_t k = 0; k < opts.q2_offsets; ++k) {
          Vec3 delta;
          do {
            delta = Vec3{rng.uniform(-r_w, r_w), rng.uniform(-r_w, r_w),
                         rng.uniform(-r_w, r_w)};
          } while (delta.norm2() > r_w2 || delta.norm2() == 0.0);
          Vec3 p1_off;
          do {
            p1_off = Vec3{rng.uniform(-r_p, r_p), rng.uniform(-r_p, r_p),
                          rng.uniform(-r_p, r_p)};
          } while (p1_off.norm2() > r_p * r_p);
          const Vec3 p1_node = probes[pr].p_center + p1_off;

          for (std::size_t bx = 0; bx < nb; ++bx)
            for (std::size_t by = 0; by < nb; ++by)
              for (std::size_t bz = 0; bz < nb; ++bz) {
                const Vec3 p2{p_centers_x[bx], p_centers_y[by], p_centers_z[bz]};
                const std::size_t flat = (bx * nb + by) * nb + bz;
                const double vol_bin = f1_ref.g.bin_volume(flat);
                const PhasePoint x1{q1, p1_node};
                const PhasePoint x2{q1 + delta, p2};
                auto [x10, x20] = two_body_flow(x1, x2, -delta_t, spec, mu, mass);
                const double flowed =
                    f1_ref.eval(x10.q, x10.p) * f1_ref.eval(x20.q, x20.p);
                const PhasePoint f10 = free_pullback(x1);
                const PhasePoint f20 = free_pullback(x2);
                const double free_val =
                    f1_ref.eval(f10.q, f10.p) * f1_ref.eval(f20.q, f20.p);
                const double diff = flowed - free_val;
                if (diff == 0.0) continue;
                for (std::size_t t = 0; t < n_tf; ++t) {
                  b_val[pr * n_tf + t] += diff * tests.members[t].eval(p2) * vol_bin /
                                          static_cast<double>(opts.q2_offsets);
                }
              }
        }
      }
    }
  }

  // --- assemble -------------------------------------------------------------
  const double c_a = volume * volume /
                     (static_cast<double>(n) * static_cast<double>(n - 1) * vol_bulk *
                      vol_w);
  ChaosReport rep;
  rep.delta_t = delta_t;
  std::vector<double> abs_defined;
  for (std::size_t pr = 0; pr < n_probes; ++pr) {
    std::uint64_t total = 0;
    for (std::size_t m = 0; m < m_reps; ++m) total += a_count[m][pr];
    rep.total_pairs += total;
    for (std::size_t t = 0; t < n_tf; ++t) {
      ChaosEntry e;
      e.probe = pr;
      e.test_function = tests.members[t].id;
      e.pair_count = total;
      e.defined = total >= opts.min_pairs;
      // per-probe momentum-ball volume enters the A normalization
      const double vol_p = 4.0 / 3.0 * kPi * probes[pr].p_radius * probes[pr].p_radius *
                           probes[pr].p_radius;
      double mean = 0.0, mean2 = 0.0;
      for (std::size_t m = 0; m < m_reps; ++m) {
        const double r_m = c_a / vol_p * a_sum[m][pr * n_tf + t] - b_val[pr * n_tf + t];
        mean += r_m;
        mean2 += r_m * r_m;
      }
      mean /= static_cast<double>(m_reps);
      mean2 /= static_cast<double>(m_reps);
      e.estimate = mean;
      e.stderr_ = m_reps > 1 ? std::sqrt(std::fmax(0.0, mean2 - mean * mean) /
                                         static_cast<double>(m_reps - 1))
                             : 0.0;
      if (e.defined) abs_defined.push_back(std::fabs(e.estimate));
      rep.entries.push_back(std::move(e));
    }
  }
  if (!abs_defined.empty()) {
    std::sort(abs_defined.begin(), abs_defined.end());
    rep.sup_abs = abs_defined.back();
    rep.median_abs = abs_defined[abs_defined.size() / 2];
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Pre-Boltzmann (pullback-factorized) right-hand side.

BogolyubovFields bogolyubov_rhs(const PhaseHistogram& g_early, double t_early,
                                const PhaseHistogram& g_mid,
                                const PhaseHistogram& g_late, double t_late,
                                double n_density, double mu, double mass,
                                const PotentialSpec& spec, const PullbackTable& pullback,
                                const BogolyubovOptions& opts) {
  if (!(t_late > t_early)) throw config_error({"bogolyubov_rhs: need t_late > t_early"});
  const double sigma = std::sqrt(mass * opts.temperature_hint);
  const std::size_t nb = opts.p_bins;
  if (nb < 3) throw config_error({"bogolyubov_rhs: p_bins must be >= 3"});

  BogolyubovFields out;
  out.p_bins = nb;
  const double span = opts.p_span * sigma;
  out.p_nodes.resize(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    out.p_nodes[i] = -span + 2.0 * span * static_cast<double>(i) /
                                static_cast<double>(nb - 1);
  }
  const double node_h = out.p_nodes[1] - out.p_nodes[0];

  auto gval = [](const PhaseHistogram& h, const Vec3& p) {
    const double c[3] = {p.x, p.y, p.z};
    return h.value_at(c) / h.normalization;  // pdf convention
  };

  // finite-difference time derivative + coarseness check
  out.dfdt_fd.assign(nb * nb * nb, 0.0);
  double max_g = 0.0, max_dg = 0.0;
  for (std::size_t ix = 0; ix < nb; ++ix)
    for (std::size_t iy = 0; iy < nb; ++iy)
      for (std::size_t iz = 0; iz < nb; ++iz) {
        const Vec3 p{out.p_nodes[ix], out.p_nodes[iy], out.p_nodes[iz]};
        const double ge = gval(g_early, p);
        const double gl = gval(g_late, p);
        out.dfdt_fd[(ix * nb + iy) * nb + iz] = (gl - ge) / (t_late - t_early);
        max_g = std::fmax(max_g, std::fmax(ge, gl));
        max_dg = std::fmax(max_dg, std::fabs(gl - ge));
      }
  if (max_g > 0.0 && max_dg > 0.5 * max_g) {
    throw config_error(
        {"bogolyubov_rhs: snapshot gap too coarse for the finite-difference derivative"});
  }

  // quadrature nodes for the relative-offset integral (xi in microscopic units)
  const double rc = spec.cutoff_radius;
  std::vector<double> xi_nodes(opts.q2_radial), xi_weights(opts.q2_radial);
  for (std::size_t i = 0; i < opts.q2_radial; ++i) {
    // midpoint rule on [0, rc], clustered toward the seam via s^2 mapping:
    // xi = rc * s^2 concentrates nodes near 0 where the force blows up
    const double s = (static_cast<double>(i) + 0.5) / static_cast<double>(opts.q2_radial);
    xi_nodes[i] = rc * s * s;
    xi_weights[i] = rc * 2.0 * s / static_cast<double>(opts.q2_radial);
  }
  // directions: Fibonacci sphere (deterministic, near-uniform)
  std::vector<Vec3> dirs(opts.q2_angular);
  for (std::size_t k = 0; k < opts.q2_angular; ++k) {
    const double z = 1.0 - 2.0 * (static_cast<double>(k) + 0.5) /
                               static_cast<double>(opts.q2_angular);
    const double r = std::sqrt(std::fmax(0.0, 1.0 - z * z));
    const double phi = 2.0 * kPi * static_cast<double>(k) * 0.6180339887498949;
    dirs[k] = {r * std::cos(phi), r * std::sin(phi), z};
  }
  const double dir_weight = 4.0 * kPi / static_cast<double>(opts.q2_angular);

  // momentum quadrature for p2: reuse the g_mid grid bins
  std::vector<Vec3> p2_nodes;
  std::vector<double> p2_weights;
  {
    const auto cx = g_mid.bin_centers(0);
    const auto cy = g_mid.bin_centers(1);
    const auto cz = g_mid.bin_centers(2);
    const std::size_t nx = cx.size(), ny = cy.size(), nz = cz.size();
    for (std::size_t bx = 0; bx < nx; ++bx)
      for (std::size_t by = 0; by < ny; ++by)
        for (std::size_t bz = 0; bz < nz; ++bz) {
          const std::size_t flat = (bx * ny + by) * nz + bz;
          if (g_mid.values[flat] == 0.0) continue;  // empty bins cannot contribute
          p2_nodes.push_back({cx[bx], cy[by], cz[bz]});
          p2_weights.push_back(g_mid.bin_volume(flat));
        }
  }

  // flux W on the node cube, then divergence
  std::vector<double> wx(nb * nb * nb, 0.0), wy(nb * nb * nb, 0.0), wz(nb * nb * nb, 0.0);
  for (std::size_t ix = 0; ix < nb; ++ix)
    for (std::size_t iy = 0; iy < nb; ++iy)
      for (std::size_t iz = 0; iz < nb; ++iz) {
        const Vec3 p1{out.p_nodes[ix], out.p_nodes[iy], out.p_nodes[iz]};
        Vec3 w{};
        for (std::size_t r = 0; r < opts.q2_radial; ++r) {
          const double xi = xi_nodes[r];
          const double f_xi = spec.force(xi);
          if (f_xi == 0.0) continue;
          const double radial_w = xi_weights[r] * xi * xi * f_xi;
          for (std::size_t d = 0; d < dirs.size(); ++d) {
            const Vec3& omega = dirs[d];
            const Vec3 r_rel = (-mu * xi) * omega;  // q1 - q2
            double acc = 0.0;
            for (std::size_t b = 0; b < p2_nodes.size(); ++b) {
              const Vec3& p2 = p2_nodes[b];
              const Vec3 p_rel = 0.5 * (p1 - p2);
              if (!(p_rel.norm2() > 0.0)) continue;
              const Vec3 p_rel0 = pullback.pulled_back_relative(r_rel, p_rel);
              const Vec3 p_half = 0.5 * (p1 + p2);
              const double g10 = gval(g_mid, p_half + p_rel0);
              if (g10 == 0.0) continue;
              const double g20 = gval(g_mid, p_half - p_rel0);
              if (g20 == 0.0) continue;
              acc += p2_weights[b] * g10 * g20;
            }
            w += (radial_w * dir_weight * acc) * omega;
          }
        }
        const std::size_t flat = (ix * nb + iy) * nb + iz;
        wx[flat] = mu * mu * w.x;
        wy[flat] = mu * mu * w.y;
        wz[flat] = mu * mu * w.z;
      }

  out.collision_rhs.assign(nb * nb * nb, 0.0);
  auto idx = [&](std::size_t x, std::size_t y, std::size_t z) { return (x * nb + y) * nb + z; };
  auto diff = [&](const std::vector<double>& f, std::size_t x, std::size_t y, std::size_t z,
                  int axis) {
    std::size_t lo[3] = {x, y, z}, hi[3] = {x, y, z};
    double denom = 2.0 * node_h;
    if (lo[axis] == 0) {
      denom = node_h;
    } else {
      --lo[axis];
    }
    if (hi[axis] == nb - 1) {
      denom = node_h;
    } else {
      ++hi[axis];
    }
    if (lo[axis] == hi[axis]) return 0.0;
    return (f[idx(hi[0], hi[1], hi[2])] - f[idx(lo[0], lo[1], lo[2])]) / denom;
  };
  for (std::size_t x = 0; x < nb; ++x)
    for (std::size_t y = 0; y < nb; ++y)
      for (std::size_t z = 0; z < nb; ++z) {
        out.collision_rhs[idx(x, y, z)] =
            n_density * (diff(wx, x, y, z, 0) + diff(wy, x, y, z, 1) + diff(wz, x, y, z, 2));
      }

  out.boltzmann_rhs.assign(nb * nb * nb, 0.0);  // caller fills from the collision quadrature
  return out;
}

double l1_distance(const PhaseHistogram& a, const PhaseHistogram& b) {
  if (a.values.size() != b.values.size()) {
    throw std::invalid_argument("l1_distance: histogram shapes differ");
  }
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < a.values.size(); ++i) {
    const double vol = a.bin_volume(i);
    num += std::fabs(a.values[i] - b.values[i]) * vol;
    den += std::fabs(a.values[i]) * vol;
  }
  return den > 0.0 ? num / den : 0.0;
}

}  // namespace boltzlab
