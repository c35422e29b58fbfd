#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "boltzlab/errors.hpp"
#include "boltzlab/marginals.hpp"
#include "boltzlab/nbody.hpp"
#include "boltzlab/rng.hpp"

using namespace boltzlab;

namespace {

NbodyParams free_params(double mu = 0.02) {
  NbodyParams p;
  p.pair = PotentialSpec{PairKind::inverse_power, 4.0, 1.0, 6.0};
  p.ext = ExternalPotential::checked(WellKind::power_wall, 0, 20, 1.0, 20.0);
  p.mu = mu;
  p.mass = 1.0;
  return p;
}

Ensemble uniform_maxwell_ensemble(std::size_t n, std::size_t m, std::uint64_t seed,
                                  double mu = 0.02) {
  auto params = free_params(mu);
  InitialLaw law;
  return sample_initial(law, n, m, seed, params);
}

}  // namespace

TEST_CASE("f1: delta distribution occupies one bin and integrates to V") {
  Ensemble ens;
  ens.box_halfwidth = 1.0;
  ens.mass = 1.0;
  ens.replicas.resize(3);
  for (auto& st : ens.replicas) {
    st.resize(5);
    for (std::size_t i = 0; i < 5; ++i) st.set_particle(i, {{0.1, 0.2, -0.3}, {0.5, 0, 0}});
  }
  const std::vector<Axis> axes = {uniform_axis(AxisVar::qx, -1, 1, 8),
                                  uniform_axis(AxisVar::px, -2, 2, 8)};
  const auto h = estimate_f1(ens, axes);
  std::size_t occupied = 0;
  for (auto c : h.counts)
    if (c) ++occupied;
  CHECK(occupied == 1);
  CHECK(h.integral() == doctest::Approx(8.0).epsilon(1e-12));
}

TEST_CASE("f1: uniform-Maxwellian counts sit in 4-sigma binomial bands") {
  const auto ens = uniform_maxwell_ensemble(100, 1000, 314);
  const std::vector<Axis> axes = {uniform_axis(AxisVar::qx, -1, 1, 4),
                                  uniform_axis(AxisVar::qy, -1, 1, 4)};
  const auto h = estimate_f1(ens, axes);
  const double total = 100000.0;
  const double p_bin = 1.0 / 16.0;
  const double sigma = std::sqrt(total * p_bin * (1 - p_bin));
  for (auto c : h.counts) {
    CHECK(std::fabs(static_cast<double>(c) - total * p_bin) <= 4.0 * sigma);
  }
  CHECK(h.integral() == doctest::Approx(8.0).epsilon(1e-12));
  CHECK(h.out_of_range == 0);
}

TEST_CASE("f1: out-of-range accounting and warning") {
  const auto ens = uniform_maxwell_ensemble(100, 20, 11);
  // momentum axis covering almost nothing
  const std::vector<Axis> axes = {uniform_axis(AxisVar::px, -0.1, 0.1, 4)};
  const auto h = estimate_f1(ens, axes);
  CHECK(h.out_of_range > 0);
  CHECK(h.out_of_range_warning);
  CHECK(h.integral() == doctest::Approx(8.0).epsilon(1e-12));
}

TEST_CASE("f2: counting and normalization") {
  const auto ens = uniform_maxwell_ensemble(2, 50, 7);
  const std::vector<Axis> axes = {uniform_axis(AxisVar::r12, 0, 4, 8)};
  const auto h = estimate_f2(ens, axes);
  CHECK(h.sample_count == 2 * 50);  // N=2: one pair per replica, both orderings
  CHECK(h.integral() == doctest::Approx(64.0).epsilon(1e-12));
}

TEST_CASE("f2: swap symmetry is exact") {
  const auto ens = uniform_maxwell_ensemble(30, 10, 99);
  const std::vector<Axis> ax12 = {uniform_axis(AxisVar::p1x, -4, 4, 6),
                                  uniform_axis(AxisVar::p2x, -4, 4, 6)};
  const auto h = estimate_f2(ens, ax12);
  for (std::size_t i = 0; i < 6; ++i)
    for (std::size_t j = 0; j < 6; ++j) {
      CHECK(h.counts[i * 6 + j] == h.counts[j * 6 + i]);
    }
}

TEST_CASE("f2: independent sampling factorizes on coarse bins") {
  const auto ens = uniform_maxwell_ensemble(40, 600, 123);
  const std::vector<Axis> pair_axes = {uniform_axis(AxisVar::p1x, -3, 3, 3),
                                       uniform_axis(AxisVar::p2x, -3, 3, 3)};
  const auto h2 = estimate_f2(ens, pair_axes);
  const std::vector<Axis> single = {uniform_axis(AxisVar::px, -3, 3, 3)};
  const auto h1 = estimate_f1(ens, single);
  // compare pdf(p1x, p2x) against pdf(px) x pdf(px)
  const double v2 = 64.0;
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 3; ++j) {
      const double joint = h2.values[i * 3 + j] / (v2 * v2 / v2);  // f2/V^2 * V... pdf scale
      const double prod = (h1.values[i] / 8.0) * (h1.values[j] / 8.0) * 4.0;
      // 4-sigma multinomial band on the joint estimate
      const double n_pairs = static_cast<double>(h2.sample_count);
      const double p_hat = static_cast<double>(h2.counts[i * 3 + j]) / n_pairs;
      const double band = 4.0 * std::sqrt(p_hat * (1 - p_hat) / n_pairs);
      const double joint_p = p_hat;
      const double prod_p = prod * h2.bin_volume(i * 3 + j) / 4.0;
      (void)joint;
      CHECK(std::fabs(joint_p - prod_p) <= band + 4e-3);
    }
}

TEST_CASE("H functional: flat density gives zero") {
  PhaseHistogram h;
  h.axes = {uniform_axis(AxisVar::px, 0, 2, 4)};
  h.values.assign(4, 1.0);
  h.counts.assign(4, 25);
  h.sample_count = 100;
  h.normalization = 2.0;
  CHECK(h_functional(h).h == doctest::Approx(0.0));
}

TEST_CASE("H functional: Maxwellian matches the Gaussian-integral closed form") {
  // V-normalized momentum histogram of Maxwell samples; the continuum value
  // for f = V * g(p) is V ln V + V * (-3/2)(ln(2 pi m T) + 1)
  const double temperature = 1.4, mass = 1.0, volume = 8.0;
  auto params = free_params();
  InitialLaw law;
  law.temperature = temperature;
  auto ens = sample_initial(law, 200, 1000, 2718, params);
  const double span = 5.0 * std::sqrt(mass * temperature);
  const std::vector<Axis> axes = {uniform_axis(AxisVar::px, -span, span, 14),
                                  uniform_axis(AxisVar::py, -span, span, 14),
                                  uniform_axis(AxisVar::pz, -span, span, 14)};
  const auto h = estimate_f1(ens, axes);
  const auto est = h_functional(h);
  const double pi = 3.14159265358979323846;
  const double closed = volume * std::log(volume) +
                        volume * (-1.5) * (std::log(2 * pi * mass * temperature) + 1.0);

  // bin-integrated Gaussian reference (erf closed form) on the same grid:
  // separates the sampling error from the discretization gap
  const double sigma = std::sqrt(mass * temperature);
  double binned = 0.0, total_mass = 0.0;
  std::vector<double> m1(14);
  for (std::size_t i = 0; i < 14; ++i) {
    const double lo = axes[0].edges[i], hi = axes[0].edges[i + 1];
    m1[i] = 0.5 * (std::erf(hi / (sigma * std::sqrt(2.0))) -
                   std::erf(lo / (sigma * std::sqrt(2.0))));
  }
  for (double ma : m1)
    for (double mb : m1)
      for (double mc : m1) total_mass += ma * mb * mc;
  const double vol_bin = std::pow(2 * span / 14, 3);
  for (double ma : m1)
    for (double mb : m1)
      for (double mc : m1) {
        const double pm = ma * mb * mc / total_mass;
        if (pm <= 0.0) continue;
        const double value = volume * pm / vol_bin;
        binned += value * std::log(value) * vol_bin;
      }
  CHECK(std::fabs(est.h - binned) <=
        4.0 * est.stderr_ + 2.0 * est.miller_madow_bias + 0.01);
  // the discretization gap to the continuum integral is small on this grid
  CHECK(std::fabs(binned - closed) <= 0.03 * std::fabs(closed));
  CHECK(est.entropy == -est.h);
  CHECK(est.stderr_ > 0.0);
  CHECK(est.miller_madow_bias > 0.0);
}

TEST_CASE("H functional: negative bin rejected") {
  PhaseHistogram h;
  h.axes = {uniform_axis(AxisVar::px, 0, 1, 2)};
  h.values = {1.0, -0.5};
  h.counts = {1, 1};
  h.sample_count = 2;
  CHECK_THROWS_AS(h_functional(h), std::invalid_argument);
}

TEST_CASE("H functional: coarse-graining never decreases entropy") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const std::size_t nb = 16;
    PhaseHistogram h;
    h.axes = {uniform_axis(AxisVar::px, -2, 2, nb)};
    h.counts.assign(nb, 0);
    std::uint64_t total = 0;
    for (std::size_t b = 0; b < nb; ++b) {
      h.counts[b] = static_cast<std::uint64_t>(rng.below(1000));
      total += h.counts[b];
    }
    if (total == 0) continue;
    h.sample_count = total;
    h.normalization = 1.0;
    h.values.assign(nb, 0.0);
    for (std::size_t b = 0; b < nb; ++b) {
      h.values[b] = static_cast<double>(h.counts[b]) / (static_cast<double>(total) * h.bin_volume(b));
    }
    const double h_fine = h_functional(h).h;

    PhaseHistogram hc;
    hc.axes = {uniform_axis(AxisVar::px, -2, 2, nb / 2)};
    hc.counts.assign(nb / 2, 0);
    for (std::size_t b = 0; b < nb; ++b) hc.counts[b / 2] += h.counts[b];
    hc.sample_count = total;
    hc.normalization = 1.0;
    hc.values.assign(nb / 2, 0.0);
    for (std::size_t b = 0; b < nb / 2; ++b) {
      hc.values[b] =
          static_cast<double>(hc.counts[b]) / (static_cast<double>(total) * hc.bin_volume(b));
    }
    const double h_coarse = h_functional(hc).h;
    CHECK(-h_coarse >= -h_fine - 1e-12);
  }
}

TEST_CASE("H functional: Maxwellian minimizes H among matched-moment histograms") {
  // any histogram's H is >= the H of the Gaussian with the same first/second
  // moments, up to discretization wiggle
  Rng rng(808);
  const double mass = 1.0;
  for (int trial = 0; trial < 3; ++trial) {
    const double t_hot = 2.0, t_cold = 0.5;
    PhaseHistogram h;
    const double span = 6.0;
    h.axes = {uniform_axis(AxisVar::px, -span, span, 24),
              uniform_axis(AxisVar::py, -span, span, 24),
              uniform_axis(AxisVar::pz, -span, span, 24)};
    h.counts.assign(h.n_bins(), 0);
    const std::size_t n_samp = 200000;
    double sum[3] = {0, 0, 0};
    double sumsq = 0;
    std::vector<Vec3> samples(n_samp);
    for (auto& p : samples) {
      const double t = rng.uniform() < 0.5 ? t_hot : t_cold;
      p = std::sqrt(mass * t) * rng.normal3();
      sum[0] += p.x;
      sum[1] += p.y;
      sum[2] += p.z;
      sumsq += p.norm2();
    }
    for (const auto& p : samples) {
      const double c[3] = {p.x, p.y, p.z};
      int flat = 0;
      bool ok = true;
      for (int a = 0; a < 3; ++a) {
        if (c[a] < -span || c[a] >= span) {
          ok = false;
          break;
        }
        flat = flat * 24 + static_cast<int>((c[a] + span) / (2 * span / 24));
      }
      if (ok) {
        ++h.counts[flat];
        ++h.sample_count;
      }
    }
    h.normalization = 1.0;
    h.values.assign(h.n_bins(), 0.0);
    for (std::size_t b = 0; b < h.n_bins(); ++b) {
      if (h.counts[b])
        h.values[b] = static_cast<double>(h.counts[b]) /
                      (static_cast<double>(h.sample_count) * h.bin_volume(b));
    }
    const double h_mix = h_functional(h).h;

    // matched Gaussian H (continuum closed form; pdf convention)
    const double var = (sumsq / n_samp -
                        (sum[0] * sum[0] + sum[1] * sum[1] + sum[2] * sum[2]) /
                            (static_cast<double>(n_samp) * n_samp)) /
                       3.0;
    const double pi = 3.14159265358979323846;
    const double h_gauss = -1.5 * (std::log(2 * pi * var) + 1.0);
    CHECK(h_mix >= h_gauss - 0.05 * std::fabs(h_gauss));
  }
}

// ---------------------------------------------------------------------------
// Chaos residual.

namespace {

// independent brute-force evaluator of the same residual definition at
// delta_t = 0 (identity flow): plain double sums over the empirical measure
std::vector<double> chaos_bruteforce(const Ensemble& ens, const ChaosProbe& probe,
                                     const TestFunctionSet& tests, const ChaosOptions& opts,
                                     const PotentialSpec& spec, std::size_t /*probe_index*/) {
  const double L = ens.box_halfwidth;
  const double bulk = opts.bulk_fraction * L;
  const double r_w = opts.pair_window_factor * ens.mu * spec.cutoff_radius;
  const double v = ens.volume();
  const double pi = 3.14159265358979323846;
  const double vol_w = 4.0 / 3.0 * pi * r_w * r_w * r_w;
  const double vol_bulk = 8.0 * bulk * bulk * bulk;
  const double vol_p = 4.0 / 3.0 * pi * std::pow(probe.p_radius, 3);
  const std::size_t n = ens.n_particles();

  // A side, averaged over replicas
  std::vector<double> a_mean(tests.members.size(), 0.0);
  for (const auto& st : ens.replicas) {
    std::vector<double> acc(tests.members.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto xi = st.particle(i);
      if (std::fabs(xi.q.x) > bulk || std::fabs(xi.q.y) > bulk || std::fabs(xi.q.z) > bulk)
        continue;
      if ((xi.p - probe.p_center).norm() > probe.p_radius) continue;
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) continue;
        const auto xj = st.particle(j);
        if ((xj.q - xi.q).norm() > r_w) continue;
        for (std::size_t t = 0; t < tests.members.size(); ++t)
          acc[t] += tests.members[t].eval(xj.p);
      }
    }
    for (std::size_t t = 0; t < tests.members.size(); ++t) a_mean[t] += acc[t];
  }
  const double c_a = v * v /
                     (static_cast<double>(n) * static_cast<double>(n - 1) * vol_bulk * vol_w *
                      vol_p) /
                     static_cast<double>(ens.n_replicas());
  for (auto& x : a_mean) x *= c_a;

  // delta_t = 0: identity flow, so the reference is the unbinned sample
  // product: (V rho_bulk)^2 x ball fraction / vol_p x mean phi (the flow
  // correction vanishes identically)
  std::vector<double> b(tests.members.size(), 0.0);
  {
    double bulk_count = 0.0, total = 0.0, in_ball = 0.0;
    std::vector<double> phi_mean(tests.members.size(), 0.0);
    for (const auto& st : ens.replicas) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto x = st.particle(i);
        total += 1.0;
        if (std::fabs(x.q.x) <= bulk && std::fabs(x.q.y) <= bulk &&
            std::fabs(x.q.z) <= bulk)
          bulk_count += 1.0;
        if ((x.p - probe.p_center).norm() <= probe.p_radius) in_ball += 1.0;
        for (std::size_t t = 0; t < tests.members.size(); ++t)
          phi_mean[t] += tests.members[t].eval(x.p);
      }
    }
    const double rho_bulk = bulk_count / (total * vol_bulk);
    const double ball_avg = in_ball / (total * vol_p);
    for (std::size_t t = 0; t < tests.members.size(); ++t) {
      b[t] = (v * rho_bulk) * (v * rho_bulk) * ball_avg * phi_mean[t] / total;
    }
  }

  std::vector<double> out(tests.members.size());
  for (std::size_t t = 0; t < tests.members.size(); ++t) out[t] = a_mean[t] - b[t];
  return out;
}

}  // namespace

TEST_CASE("chaos residual: delta_t = 0 equals the brute-force double sum") {
  const auto spec = PotentialSpec{PairKind::inverse_power, 4.0, 1.0, 6.0};
  // artificially correlated ensemble: every particle in a replica shares one
  // momentum vector
  auto params = free_params(0.015);
  InitialLaw law;
  auto ens = sample_initial(law, 150, 200, 5150, params);
  for (auto& st : ens.replicas) {
    const Vec3 shared = st.particle(0).p;
    for (std::size_t i = 0; i < st.size(); ++i) {
      auto x = st.particle(i);
      x.p = shared;
      st.set_particle(i, x);
    }
  }
  ChaosOptions opts;
  opts.pair_window_factor = 2.0;
  opts.bulk_fraction = 0.6;
  opts.min_pairs = 1;
  opts.momentum_bins = 8;
  const auto tests = TestFunctionSet::defaults(1.0, 1.0);
  const auto probes = default_probes(1.0, 1.0);
  const auto rep = chaos_residual(ens, ens, 0.0, probes, tests, spec, opts);

  for (std::size_t pr = 0; pr < probes.size(); ++pr) {
    const auto oracle = chaos_bruteforce(ens, probes[pr], tests, opts, spec, pr);
    for (std::size_t t = 0; t < tests.members.size(); ++t) {
      const auto& e = rep.entries[pr * tests.members.size() + t];
      const double scale = std::fmax(1.0, std::fabs(oracle[t]));
      CHECK(std::fabs(e.estimate - oracle[t]) <= 1e-9 * scale);
    }
  }
  // correlated momenta: the p2x residual is statistically nonzero somewhere
  double best_t = 0.0;
  for (const auto& e : rep.entries) {
    if (e.test_function == "p2x" && e.defined && e.stderr_ > 0.0)
      best_t = std::fmax(best_t, std::fabs(e.estimate) / e.stderr_);
  }
  CHECK(best_t > 3.0);
}

TEST_CASE("chaos residual: free factorized ensemble is mean-zero") {
  const auto spec = PotentialSpec{PairKind::inverse_power, 4.0, 0.0, 6.0};  // Phi = 0
  auto params = free_params(0.015);
  InitialLaw law;
  auto ens = sample_initial(law, 300, 60, 909, params);
  ChaosOptions opts;
  opts.pair_window_factor = 2.0;
  opts.bulk_fraction = 0.6;
  opts.min_pairs = 20;
  const auto tests = TestFunctionSet::defaults(1.0, 1.0);
  const auto probes = default_probes(1.0, 1.0);
  const auto rep = chaos_residual(ens, ens, 0.05, probes, tests, spec, opts);
  std::size_t defined = 0;
  for (const auto& e : rep.entries) {
    if (!e.defined) continue;
    ++defined;
    CHECK(std::fabs(e.estimate) <= 5.0 * e.stderr_ + 1e-12);
  }
  CHECK(defined >= rep.entries.size() / 2);
}

TEST_CASE("chaos residual: window wider than the interior is rejected") {
  const auto spec = PotentialSpec{PairKind::inverse_power, 4.0, 1.0, 6.0};
  auto ens = uniform_maxwell_ensemble(50, 4, 1, 0.05);
  ChaosOptions opts;
  opts.pair_window_factor = 4.0;  // 4 * 0.05 * 6 = 1.2 > box interior
  const auto tests = TestFunctionSet::defaults(1.0, 1.0);
  CHECK_THROWS_AS(
      chaos_residual(ens, ens, 0.0, default_probes(1.0, 1.0), tests, spec, opts),
      config_error);
}

TEST_CASE("bogolyubov: uniform free gas has identically zero collision term") {
  const PotentialSpec free_spec{PairKind::inverse_power, 4.0, 0.0, 6.0};
  auto ens = uniform_maxwell_ensemble(200, 100, 31415, 0.05);
  const double span = 5.0;
  const std::vector<Axis> paxes = {uniform_axis(AxisVar::px, -span, span, 9),
                                   uniform_axis(AxisVar::py, -span, span, 9),
                                   uniform_axis(AxisVar::pz, -span, span, 9)};
  const auto g0 = estimate_f1(ens, paxes);
  PullbackTable pb(free_spec, 0.05, 1.0, 0.05, 4, 4, 4, 8.0);
  BogolyubovOptions opts;
  opts.p_bins = 5;
  const auto fields = bogolyubov_rhs(g0, 0.0, g0, g0, 0.1, 25.0, 0.05, 1.0, free_spec, pb,
                                     opts);
  for (double v : fields.collision_rhs) CHECK(v == 0.0);
  for (double v : fields.dfdt_fd) CHECK(v == 0.0);  // same histogram at both times
}

TEST_CASE("bogolyubov: too-coarse snapshot gap is rejected") {
  auto ens_a = uniform_maxwell_ensemble(100, 50, 1, 0.05);
  auto params = free_params(0.05);
  InitialLaw cold;
  cold.temperature = 0.05;  // drastically different distribution
  auto ens_b = sample_initial(cold, 100, 50, 2, params);
  const double span = 5.0;
  const std::vector<Axis> paxes = {uniform_axis(AxisVar::px, -span, span, 7),
                                   uniform_axis(AxisVar::py, -span, span, 7),
                                   uniform_axis(AxisVar::pz, -span, span, 7)};
  const auto ga = estimate_f1(ens_a, paxes);
  const auto gb = estimate_f1(ens_b, paxes);
  const PotentialSpec spec{PairKind::inverse_power, 4.0, 1.0, 6.0};
  PullbackTable pb(spec, 0.05, 1.0, 0.05, 4, 4, 4, 8.0);
  BogolyubovOptions opts;
  opts.p_bins = 5;
  CHECK_THROWS_AS(bogolyubov_rhs(ga, 0.0, ga, gb, 0.1, 25.0, 0.05, 1.0, spec, pb, opts),
                  config_error);
}

TEST_CASE("l1 distance basics") {
  PhaseHistogram a, b;
  a.axes = b.axes = {uniform_axis(AxisVar::px, 0, 1, 4)};
  a.values = {1, 2, 3, 4};
  b.values = {1, 2, 3, 4};
  CHECK(l1_distance(a, b) == 0.0);
  b.values = {2, 1, 3, 4};
  CHECK(l1_distance(a, b) == doctest::Approx(0.2));
}
