#include "boltzlab/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "boltzlab/errors.hpp"
#include "boltzlab/version.hpp"

namespace boltzlab {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

class Timings {
 public:
  void add(const std::string& name, double seconds) { entries_[name] += seconds; }
  void write(const fs::path& dir) const {
    json j;
    for (const auto& [k, v] : entries_) j[k] = v;
    std::ofstream out(dir / "timings.json");
    out << j.dump(2) << "\n";
  }

 private:
  std::map<std::string, double> entries_;
};

class Stopwatch {
 public:
  Stopwatch(Timings& t, std::string name)
      : timings_(t), name_(std::move(name)), start_(std::chrono::steady_clock::now()) {}
  ~Stopwatch() {
    const auto dt = std::chrono::steady_clock::now() - start_;
    timings_.add(name_, std::chrono::duration<double>(dt).count());
  }

 private:
  Timings& timings_;
  std::string name_;
  std::chrono::steady_clock::time_point start_;
};

json histogram_to_json(const PhaseHistogram& h) {
  json j;
  json axes = json::array();
  for (const auto& ax : h.axes) {
    json a;
    a["var"] = axis_var_name(ax.var);
    a["edges"] = ax.edges;
    axes.push_back(a);
  }
  j["axes"] = axes;
  j["counts"] = h.counts;
  j["values"] = h.values;
  j["normalization"] = h.normalization;
  j["sample_count"] = h.sample_count;
  j["out_of_range"] = h.out_of_range;
  j["out_of_range_warning"] = h.out_of_range_warning;
  return j;
}

AxisVar axis_var_from_name(const std::string& name) {
  static const std::map<std::string, AxisVar> table = {
      {"qx", AxisVar::qx},   {"qy", AxisVar::qy},   {"qz", AxisVar::qz},
      {"px", AxisVar::px},   {"py", AxisVar::py},   {"pz", AxisVar::pz},
      {"pr", AxisVar::pr},
      {"r12", AxisVar::r12}, {"p1x", AxisVar::p1x}, {"p1y", AxisVar::p1y},
      {"p1z", AxisVar::p1z}, {"p2x", AxisVar::p2x}, {"p2y", AxisVar::p2y},
      {"p2z", AxisVar::p2z}};
  const auto it = table.find(name);
  if (it == table.end()) throw config_error({"unknown axis var in histogram JSON: " + name});
  return it->second;
}

PhaseHistogram histogram_from_json(const json& j) {
  PhaseHistogram h;
  for (const auto& a : j.at("axes")) {
    Axis ax;
    ax.var = axis_var_from_name(a.at("var").get<std::string>());
    ax.edges = a.at("edges").get<std::vector<double>>();
    h.axes.push_back(std::move(ax));
  }
  h.counts = j.at("counts").get<std::vector<std::uint64_t>>();
  h.values = j.at("values").get<std::vector<double>>();
  h.normalization = j.at("normalization").get<double>();
  h.sample_count = j.at("sample_count").get<std::uint64_t>();
  h.out_of_range = j.at("out_of_range").get<std::uint64_t>();
  h.out_of_range_warning = j.value("out_of_range_warning", false);
  return h;
}

void write_json(const fs::path& p, const json& j) {
  std::ofstream out(p);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out << j.dump(2) << "\n";
}

std::string seed_dir_name(std::uint64_t seed) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "seed_%llu", static_cast<unsigned long long>(seed));
  return buf;
}

// ---------------------------------------------------------------------------
// Physics assembly helpers.

InitialLaw resolve_initial_law(const ExperimentConfig& cfg, const SchedulePoint& pt) {
  InitialLaw law = cfg.initial;
  if (law.exclusion_radius < 0.0) {
    // auto: pair energy ~ thermal at the exclusion surface
    law.exclusion_radius =
        2.0 * pt.mu *
        std::pow(std::fmax(cfg.potential.amplitude, 1e-300) / cfg.temperature_nominal,
                 1.0 / cfg.potential.gamma);
    if (cfg.potential.amplitude == 0.0) law.exclusion_radius = 0.0;
  }
  return law;
}

NbodyParams resolve_nbody_params(const ExperimentConfig& cfg, const SchedulePoint& pt) {
  NbodyParams params;
  params.pair = cfg.potential;
  params.ext = cfg.external;
  params.mu = pt.mu;
  params.mass = cfg.mass;
  params.all_pairs = cfg.nbody_all_pairs;
  apply_mass_rescaling(pt, cfg.schedule, params.mass, params.pair);
  return params;
}

CollisionKernel resolve_kernel(const ExperimentConfig& cfg, double mass) {
  switch (cfg.boltzmann.kernel) {
    case KernelChoice::hard_sphere:
      return CollisionKernel::hard_sphere(cfg.boltzmann.hard_sphere_diameter);
    case KernelChoice::inverse_power: {
      const double sigma_v = std::sqrt(cfg.temperature_nominal / mass);
      return CollisionKernel::inverse_power(cfg.potential, mass, cfg.boltzmann.chi_min,
                                            0.05 * sigma_v, 16.0 * sigma_v);
    }
    case KernelChoice::pseudo_maxwell:
      return CollisionKernel::pseudo_maxwell(cfg.boltzmann.maxwell_rate);
  }
  return CollisionKernel::hard_sphere(1.0);
}

std::vector<Axis> momentum_axes(const ExperimentConfig& cfg, double mass) {
  const double span = cfg.marginals.f1_span * std::sqrt(mass * cfg.temperature_nominal);
  return {uniform_axis(AxisVar::px, -span, span, cfg.marginals.f1_p_bins),
          uniform_axis(AxisVar::py, -span, span, cfg.marginals.f1_p_bins),
          uniform_axis(AxisVar::pz, -span, span, cfg.marginals.f1_p_bins)};
}

struct NbodyRunResult {
  TrajectoryRecord record;
  std::vector<std::size_t> user_snapshot_index;  // into record.snapshots
  std::vector<PhaseHistogram> f1;                // per user snapshot (momentum)
  std::vector<ChaosReport> chaos;                // per user snapshot with t >= delta_t
  std::vector<double> chaos_times;
  Ensemble initial;
};

NbodyRunResult run_nbody_leg(const ExperimentConfig& cfg, const SchedulePoint& pt,
                             std::uint64_t seed, bool with_chaos) {
  const NbodyParams params = resolve_nbody_params(cfg, pt);
  const InitialLaw law = resolve_initial_law(cfg, pt);
  NbodyRunResult out;
  out.initial =
      sample_initial(law, pt.n_particles, cfg.replicas, Rng::derive(seed, 0xA1), params);

  // request companions at t - delta_t for the pullback
  std::set<double> times(cfg.snapshot_times.begin(), cfg.snapshot_times.end());
  if (with_chaos) {
    for (double t : cfg.snapshot_times) {
      if (t >= pt.delta_t) times.insert(t - pt.delta_t);
    }
  }
  EvolveOptions opts;
  opts.dt = cfg.nbody_dt;
  opts.t_final = cfg.t_final;
  opts.snapshot_times.assign(times.begin(), times.end());
  opts.threads = cfg.threads;
  out.record = evolve_ensemble(out.initial, params, opts);

  auto find_snapshot = [&](double t) -> std::size_t {
    // actual times are step-aligned; take the closest recorded snapshot
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t k = 0; k < out.record.snapshot_times.size(); ++k) {
      const double d = std::fabs(out.record.snapshot_times[k] - t);
      if (d < best_d) {
        best_d = d;
        best = k;
      }
    }
    return best;
  };

  const auto axes = momentum_axes(cfg, params.mass);
  for (double t : cfg.snapshot_times) {
    const std::size_t k = find_snapshot(t);
    out.user_snapshot_index.push_back(k);
    out.f1.push_back(estimate_f1(out.record.snapshots[k], axes));
  }

  if (with_chaos) {
    ChaosOptions copts;
    copts.bulk_fraction = cfg.chaos.bulk_fraction;
    copts.pair_window_factor = cfg.chaos.pair_window_factor;
    copts.min_pairs = cfg.chaos.min_pairs;
    copts.q2_offsets = cfg.chaos.q2_offsets;
    copts.momentum_bins = cfg.chaos.momentum_bins;
    copts.space_bins = cfg.chaos.space_bins;
    copts.momentum_span = cfg.chaos.momentum_span;
    copts.temperature_hint = cfg.temperature_nominal;
    const double sigma = std::sqrt(params.mass * cfg.temperature_nominal);
    auto probes = default_probes(params.mass, cfg.temperature_nominal);
    for (auto& pr : probes) pr.p_radius = cfg.chaos.probe_radius * sigma;
    const auto tests = TestFunctionSet::defaults(params.mass, cfg.temperature_nominal);

    for (double t : cfg.snapshot_times) {
      if (t < pt.delta_t || t == 0.0) continue;
      const std::size_t k_t = find_snapshot(t);
      const std::size_t k_early = find_snapshot(t - pt.delta_t);
      const double actual_dt = out.record.snapshot_times[k_t] -
                               out.record.snapshot_times[k_early];
      if (!(actual_dt > 0.0)) continue;
      out.chaos.push_back(chaos_residual(out.record.snapshots[k_t],
                                         out.record.snapshots[k_early], actual_dt, probes,
                                         tests, cfg.potential, copts));
      out.chaos_times.push_back(out.record.snapshot_times[k_t]);
    }
  }
  return out;
}

void write_nbody_artifacts(const fs::path& dir, const ExperimentConfig& cfg,
                           const NbodyRunResult& res) {
  fs::create_directories(dir);
  // columnar snapshots at the user times
  for (std::size_t u = 0; u < res.user_snapshot_index.size(); ++u) {
    char name[64];
    std::snprintf(name, sizeof name, "snapshot_%02zu.txt", u);
    std::ofstream out(dir / name);
    write_snapshot(out, res.record.snapshots[res.user_snapshot_index[u]]);
  }
  // energy bookkeeping
  {
    std::ofstream out(dir / "energy.csv");
    out << "replica,e_initial,e_final,max_rel_drift\n";
    for (std::size_t m = 0; m < res.record.energy.size(); ++m) {
      const auto& e = res.record.energy[m];
      out << m << ',' << fmt(e.initial) << ',' << fmt(e.final_) << ','
          << fmt(e.max_rel_drift) << "\n";
    }
  }
  // f1 histograms
  for (std::size_t u = 0; u < res.f1.size(); ++u) {
    char name[64];
    std::snprintf(name, sizeof name, "f1_%02zu.json", u);
    json j = histogram_to_json(res.f1[u]);
    j["time"] = res.record.snapshot_times[res.user_snapshot_index[u]];
    write_json(dir / name, j);
  }
  // chaos residuals
  if (!res.chaos.empty()) {
    std::ofstream out(dir / "residuals.csv");
    out << "t,probe,test_function,estimate,stderr,pairs,defined\n";
    for (std::size_t c = 0; c < res.chaos.size(); ++c) {
      for (const auto& e : res.chaos[c].entries) {
        out << fmt(res.chaos_times[c]) << ',' << e.probe << ',' << e.test_function << ','
            << fmt(e.estimate) << ',' << fmt(e.stderr_) << ',' << e.pair_count << ','
            << (e.defined ? 1 : 0) << "\n";
      }
    }
  }
  (void)cfg;
}

struct BoltzmannLeg {
  std::vector<KineticSample> series;
  std::vector<VelocityEnsemble> states_at_snapshots;  // aligned with cfg.snapshot_times
  double mean_free_time = 0.0;
  double maxwell_h_reference = 0.0;
  DsmcStats stats;
  std::vector<Axis> h_axes;
};

// segment-wise homogeneous run so the state is available at each snapshot time
BoltzmannLeg run_boltzmann_leg(const ExperimentConfig& cfg, const SchedulePoint& pt,
                               VelocityEnsemble initial, std::uint64_t seed) {
  BoltzmannLeg leg;
  const double t_final = cfg.boltzmann.t_final >= 0.0 ? cfg.boltzmann.t_final : cfg.t_final;

  // output grid: union of snapshot times and a uniform H-series grid
  std::set<double> outputs(cfg.snapshot_times.begin(), cfg.snapshot_times.end());
  for (std::size_t k = 0; k <= cfg.boltzmann.output_points; ++k) {
    outputs.insert(t_final * static_cast<double>(k) /
                   static_cast<double>(cfg.boltzmann.output_points));
  }
  std::vector<double> times(outputs.begin(), outputs.end());
  while (!times.empty() && times.back() > t_final) times.pop_back();

  const CollisionKernel kernel = resolve_kernel(cfg, cfg.mass);
  leg.mean_free_time = estimate_mean_free_time(initial, kernel, pt.mu, cfg.mass);

  // fixed H grid across the whole run
  double span = cfg.boltzmann.h_span;
  if (span <= 0.0) {
    for (int a = 0; a < 3; ++a)
      for (double v : initial.p[a]) span = std::fmax(span, std::fabs(v));
    span *= 1.05;
  }
  leg.h_axes = {uniform_axis(AxisVar::px, -span, span, cfg.boltzmann.h_bins),
                uniform_axis(AxisVar::py, -span, span, cfg.boltzmann.h_bins),
                uniform_axis(AxisVar::pz, -span, span, cfg.boltzmann.h_bins)};

  const double volume = 8.0 * std::pow(cfg.external.domain_halfwidth, 3);
  VelocityEnsemble state = std::move(initial);
  Rng rng(Rng::derive(seed, 0xB2));
  DsmcStats stats;
  double dt = cfg.boltzmann.dt;
  if (dt <= 0.0) dt = 0.1 * leg.mean_free_time;
  if (leg.mean_free_time > 0.0 && dt > 0.2 * leg.mean_free_time) {
    throw config_error({"boltzmann.dt exceeds the collision-frequency stability bound"});
  }

  auto log_state = [&](double t) {
    const auto hist = velocity_histogram(state, leg.h_axes, volume);
    const auto hres = h_functional(hist);
    const auto mom = moments(state, cfg.mass);
    KineticSample ks;
    ks.t = t;
    ks.h = hres.h;
    ks.h_stderr = hres.stderr_;
    ks.density = mom.density;
    ks.momentum_mean = mom.momentum_mean;
    ks.energy_density = mom.energy_density;
    ks.excess_kurtosis = mom.excess_kurtosis;
    ks.fourth_moment = mom.fourth_moment;
    leg.series.push_back(ks);
  };

  const std::set<double> snap_set(cfg.snapshot_times.begin(), cfg.snapshot_times.end());
  double now = 0.0;
  log_state(0.0);
  if (snap_set.count(0.0)) leg.states_at_snapshots.push_back(state);
  for (double t : times) {
    if (t <= 0.0) continue;
    const std::uint64_t steps =
        static_cast<std::uint64_t>(std::llround((t - now) / dt));
    for (std::uint64_t k = 0; k < steps; ++k) {
      if (state.density > 0.0) {
        dsmc_collision_step(state, dt, kernel, pt.mu, cfg.mass, rng, stats);
      }
    }
    now += static_cast<double>(steps) * dt;
    log_state(now);
    if (snap_set.count(t)) leg.states_at_snapshots.push_back(state);
  }
  leg.maxwell_h_reference = maxwell_h_reference(state, leg.h_axes, volume, cfg.mass);
  leg.stats = stats;
  return leg;
}

void write_boltzmann_artifacts(const fs::path& dir, const ExperimentConfig& cfg,
                               const BoltzmannLeg& leg, const CollisionKernel& kernel) {
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "series.csv");
    out << "t,H,H_stderr,n,px,py,pz,E,kurtosis,fourth_moment\n";
    for (const auto& s : leg.series) {
      out << fmt(s.t) << ',' << fmt(s.h) << ',' << fmt(s.h_stderr) << ',' << fmt(s.density)
          << ',' << fmt(s.momentum_mean.x) << ',' << fmt(s.momentum_mean.y) << ','
          << fmt(s.momentum_mean.z) << ',' << fmt(s.energy_density) << ','
          << fmt(s.excess_kurtosis) << ',' << fmt(s.fourth_moment) << "\n";
    }
  }
  {
    json j;
    j["maxwell_h_reference"] = leg.maxwell_h_reference;
    j["mean_free_time"] = leg.mean_free_time;
    j["dsmc"] = {{"candidates", leg.stats.candidates},
                 {"accepted", leg.stats.accepted},
                 {"majorant_doublings", leg.stats.majorant_doublings}};
    if (!leg.states_at_snapshots.empty()) {
      const double volume = 8.0 * std::pow(cfg.external.domain_halfwidth, 3);
      j["final_histogram"] =
          histogram_to_json(velocity_histogram(leg.states_at_snapshots.back(), leg.h_axes,
                                               volume));
    }
    write_json(dir / "summary.json", j);
  }
  if (kernel.table() != nullptr) {
    std::ofstream out(dir / "chi_table.csv");
    kernel.table()->dump_csv(out);
  }
}

VelocityEnsemble md_matched_initial(const ExperimentConfig& cfg, const Ensemble& md_t0,
                                    std::uint64_t seed) {
  // DSMC starts from the sampled MD f1 estimate: momenta are drawn from the
  // pooled t = 0 MD momenta (with replacement if more samples are requested)
  VelocityEnsemble ve;
  const std::size_t pool =
      md_t0.n_particles() * md_t0.n_replicas();
  const std::size_t want = cfg.boltzmann.samples;
  ve.resize(want);
  ve.density = static_cast<double>(md_t0.n_particles()) / md_t0.volume();
  Rng rng(Rng::derive(seed, 0xC3));
  for (std::size_t i = 0; i < want; ++i) {
    std::size_t idx = i < pool ? i : static_cast<std::size_t>(rng.below(pool));
    const std::size_t m = idx / md_t0.n_particles();
    const std::size_t k = idx % md_t0.n_particles();
    ve.set_sample(i, md_t0.replicas[m].particle(k).p);
  }
  return ve;
}

std::vector<Axis> radial_axes(const ExperimentConfig& cfg, double mass) {
  const double span = cfg.marginals.f1_span * std::sqrt(mass * cfg.temperature_nominal);
  return {uniform_axis(AxisVar::pr, 0.0, span, 24)};
}

PhaseHistogram radial_velocity_histogram(const VelocityEnsemble& ve,
                                         const std::vector<Axis>& axes, double volume) {
  PhaseHistogram h;
  h.axes = axes;
  h.counts.assign(h.n_bins(), 0);
  const auto& edges = axes[0].edges;
  for (std::size_t i = 0; i < ve.size(); ++i) {
    ++h.sample_count;
    const double r = ve.sample(i).norm();
    if (r < edges.front() || r >= edges.back()) {
      ++h.out_of_range;
      continue;
    }
    const auto it = std::upper_bound(edges.begin(), edges.end(), r);
    ++h.counts[static_cast<std::size_t>(it - edges.begin() - 1)];
  }
  const std::uint64_t in_range = h.sample_count - h.out_of_range;
  h.normalization = volume;
  h.values.assign(h.counts.size(), 0.0);
  for (std::size_t b = 0; b < h.counts.size(); ++b) {
    if (h.counts[b]) {
      h.values[b] = static_cast<double>(h.counts[b]) * volume /
                    (static_cast<double>(in_range) * h.bin_volume(b));
    }
  }
  h.out_of_range_warning = h.out_of_range * 100 > h.sample_count;
  return h;
}

void write_bridge_compare(const fs::path& dir, const ExperimentConfig& cfg,
                          const NbodyRunResult& md, const BoltzmannLeg& leg) {
  fs::create_directories(dir);
  const double volume = 8.0 * std::pow(cfg.external.domain_halfwidth, 3);
  const auto axes = momentum_axes(cfg, cfg.mass);
  const auto raxes = radial_axes(cfg, cfg.mass);
  std::ofstream out(dir / "l1.csv");
  out << "t,l1_f1,l1_radial,h_md,h_dsmc\n";
  for (std::size_t u = 0; u < cfg.snapshot_times.size() &&
                          u < leg.states_at_snapshots.size();
       ++u) {
    const auto dsmc_hist = velocity_histogram(leg.states_at_snapshots[u], axes, volume);
    const double l1 = l1_distance(md.f1[u], dsmc_hist);
    const auto md_radial =
        estimate_f1(md.record.snapshots[md.user_snapshot_index[u]], raxes);
    const auto dsmc_radial =
        radial_velocity_histogram(leg.states_at_snapshots[u], raxes, volume);
    const double l1r = l1_distance(md_radial, dsmc_radial);
    const double h_md = h_functional(md.f1[u]).h;
    const double h_b = h_functional(dsmc_hist).h;
    out << fmt(cfg.snapshot_times[u]) << ',' << fmt(l1) << ',' << fmt(l1r) << ','
        << fmt(h_md) << ',' << fmt(h_b) << "\n";
  }
}

}  // namespace

// ---------------------------------------------------------------------------

void run_experiment(const ExperimentConfig& cfg) {
  const fs::path root(cfg.out_dir);
  fs::create_directories(root);
  Timings timings;

  json manifest;
  manifest["config"] = cfg.echo;
  manifest["version"] = kVersion;
  manifest["seeds"] = cfg.seeds;
  manifest["kind"] = "run";
  write_json(root / "manifest.json", manifest);

  const SchedulePoint pt = cfg.schedule.points.front();
  for (const std::uint64_t seed : cfg.seeds) {
    const fs::path sdir = root / seed_dir_name(seed);
    fs::create_directories(sdir);

    if (cfg.mode == RunMode::nbody_only || cfg.mode == RunMode::bridge) {
      Stopwatch sw(timings, "nbody");
      const auto md = run_nbody_leg(cfg, pt, seed, /*with_chaos=*/true);
      write_nbody_artifacts(sdir / "nbody", cfg, md);
      if (cfg.mode == RunMode::bridge) {
        Stopwatch sw2(timings, "boltzmann");
        const auto kernel = resolve_kernel(cfg, cfg.mass);
        auto leg = run_boltzmann_leg(cfg, pt, md_matched_initial(cfg, md.initial, seed),
                                     seed);
        write_boltzmann_artifacts(sdir / "boltzmann", cfg, leg, kernel);
        write_bridge_compare(sdir / "compare", cfg, md, leg);
      }
    } else {
      Stopwatch sw(timings, "boltzmann");
      // analytic initial law sampled directly
      VelocityEnsemble ve;
      const double volume = 8.0 * std::pow(cfg.external.domain_halfwidth, 3);
      ve.density = static_cast<double>(pt.n_particles) / volume;
      ve.resize(cfg.boltzmann.samples);
      Rng rng(Rng::derive(seed, 0xD4));
      for (std::size_t i = 0; i < ve.size(); ++i) {
        InitialLaw law = cfg.initial;
        Vec3 p;
        switch (law.velocity) {
          case VelocityLaw::maxwellian:
            p = std::sqrt(cfg.mass * law.temperature) * rng.normal3();
            break;
          case VelocityLaw::two_temperature: {
            const double t = rng.uniform() < law.hot_weight ? law.t_hot : law.t_cold;
            p = std::sqrt(cfg.mass * t) * rng.normal3();
            break;
          }
          case VelocityLaw::shifted_maxwellian:
            p = cfg.mass * law.drift + std::sqrt(cfg.mass * law.temperature) * rng.normal3();
            break;
        }
        ve.set_sample(i, p);
      }
      const auto kernel = resolve_kernel(cfg, cfg.mass);
      auto leg = run_boltzmann_leg(cfg, pt, std::move(ve), seed);
      write_boltzmann_artifacts(sdir / "boltzmann", cfg, leg, kernel);
    }
  }
  timings.write(root);
}

// ---------------------------------------------------------------------------

namespace {

struct TrendStats {
  double median = 0.0;
  double band = 0.0;  // notched half-width 1.58 IQR / sqrt(n)
};

TrendStats trend_stats(std::vector<double> v) {
  TrendStats t;
  if (v.empty()) return t;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  t.median = n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  const double q1 = v[n / 4];
  const double q3 = v[(3 * n) / 4];
  t.band = 1.58 * (q3 - q1) / std::sqrt(static_cast<double>(n));
  return t;
}

}  // namespace

void grad_sweep(const ExperimentConfig& cfg) {
  if (cfg.schedule.points.size() < 3) {
    throw config_error({"grad_sweep: need at least 3 schedule points"});
  }
  if (cfg.mode != RunMode::bridge) {
    throw config_error({"grad_sweep: bridge mode required"});
  }
  const fs::path root(cfg.out_dir);
  fs::create_directories(root);
  Timings timings;

  json manifest;
  manifest["config"] = cfg.echo;
  manifest["version"] = kVersion;
  manifest["seeds"] = cfg.seeds;
  manifest["kind"] = "sweep";
  write_json(root / "manifest.json", manifest);

  json report;
  report["points"] = json::array();
  std::ofstream trend(root / "trend.csv");
  trend << "point,n_particles,mu,delta_t,chaos_median,chaos_band,l1_median,l1_band,"
           "status\n";

  for (std::size_t pi = 0; pi < cfg.schedule.points.size(); ++pi) {
    const SchedulePoint pt = cfg.schedule.points[pi];
    char pname[32];
    std::snprintf(pname, sizeof pname, "point_%02zu", pi);
    const fs::path pdir = root / pname;

    json point_record;
    point_record["n_particles"] = pt.n_particles;
    point_record["mu"] = pt.mu;
    point_record["delta_t"] = pt.delta_t;
    point_record["seeds"] = json::array();

    std::vector<double> chaos_medians, l1_finals;
    std::string status = "ok";
    try {
      Stopwatch sw(timings, pname);
      for (const std::uint64_t seed : cfg.seeds) {
        const fs::path sdir = pdir / seed_dir_name(seed);
        const auto md = run_nbody_leg(cfg, pt, seed, /*with_chaos=*/true);
        write_nbody_artifacts(sdir / "nbody", cfg, md);

        const auto kernel = resolve_kernel(cfg, cfg.mass);
        auto leg = run_boltzmann_leg(cfg, pt, md_matched_initial(cfg, md.initial, seed),
                                     seed);
        write_boltzmann_artifacts(sdir / "boltzmann", cfg, leg, kernel);
        write_bridge_compare(sdir / "compare", cfg, md, leg);

        json seed_record;
        seed_record["seed"] = seed;
        // per-seed chaos summary: median |estimate| over defined entries of
        // the last evaluated snapshot
        double chaos_median = std::nan("");
        if (!md.chaos.empty()) {
          chaos_median = md.chaos.back().median_abs;
          chaos_medians.push_back(chaos_median);
        }
        seed_record["chaos_median_abs"] = chaos_median;
        seed_record["chaos_total_pairs"] =
            md.chaos.empty() ? 0 : md.chaos.back().total_pairs;
        // L1 at the final snapshot
        if (!leg.states_at_snapshots.empty()) {
          const double volume = 8.0 * std::pow(cfg.external.domain_halfwidth, 3);
          const auto raxes = radial_axes(cfg, cfg.mass);
          const auto md_radial = estimate_f1(
              md.record.snapshots[md.user_snapshot_index.back()], raxes);
          const auto dsmc_radial = radial_velocity_histogram(
              leg.states_at_snapshots.back(), raxes, volume);
          const double l1 = l1_distance(md_radial, dsmc_radial);
          seed_record["l1_final"] = l1;
          l1_finals.push_back(l1);
        }
        point_record["seeds"].push_back(seed_record);
      }
    } catch (const std::exception& e) {
      status = std::string("error: ") + e.what();
    }

    const TrendStats cs = trend_stats(chaos_medians);
    const TrendStats ls = trend_stats(l1_finals);
    point_record["chaos"] = {{"median", cs.median}, {"band", cs.band}};
    point_record["l1"] = {{"median", ls.median}, {"band", ls.band}};
    point_record["status"] = status;
    report["points"].push_back(point_record);
    trend << pi << ',' << pt.n_particles << ',' << fmt(pt.mu) << ',' << fmt(pt.delta_t)
          << ',' << fmt(cs.median) << ',' << fmt(cs.band) << ',' << fmt(ls.median) << ','
          << fmt(ls.band) << ',' << status << "\n";
  }
  write_json(root / "sweep_report.json", report);
  timings.write(root);
}

// ---------------------------------------------------------------------------

void compare_bogolyubov_artifacts(const std::string& artifact_dir) {
  const fs::path root(artifact_dir);
  std::ifstream min(root / "manifest.json");
  if (!min) throw config_error({"compare: no manifest.json under " + artifact_dir});
  json manifest;
  min >> manifest;
  const ExperimentConfig cfg = parse_config(manifest.at("config"));
  const SchedulePoint pt = cfg.schedule.points.front();

  // locate a seed directory with nbody f1 histograms
  fs::path nbody_dir;
  for (const auto& seed : cfg.seeds) {
    fs::path cand = root / seed_dir_name(seed) / "nbody";
    if (fs::exists(cand / "f1_00.json")) {
      nbody_dir = cand;
      break;
    }
    cand = root / "point_00" / seed_dir_name(seed) / "nbody";
    if (fs::exists(cand / "f1_00.json")) {
      nbody_dir = cand;
      break;
    }
  }
  if (nbody_dir.empty()) {
    throw config_error({"compare: no f1 histograms found (bridge artifacts required)"});
  }

  // load the f1 series
  std::vector<PhaseHistogram> f1;
  std::vector<double> times;
  for (std::size_t u = 0;; ++u) {
    char name[64];
    std::snprintf(name, sizeof name, "f1_%02zu.json", u);
    std::ifstream in(nbody_dir / name);
    if (!in) break;
    json j;
    in >> j;
    f1.push_back(histogram_from_json(j));
    times.push_back(j.at("time").get<double>());
  }
  if (f1.size() < 3) {
    throw config_error({"compare: need at least 3 snapshot times for the finite "
                        "difference"});
  }
  for (std::size_t k = 1; k < f1.size(); ++k) {
    if (f1[k].axes[0].edges != f1[0].axes[0].edges) {
      throw config_error({"compare: snapshot histogram grids do not match"});
    }
  }

  const double mass_eff = [&] {
    double m = cfg.mass;
    PotentialSpec spec = cfg.potential;
    apply_mass_rescaling(pt, cfg.schedule, m, spec);
    return m;
  }();
  PotentialSpec spec_eff = cfg.potential;
  {
    double m = cfg.mass;
    apply_mass_rescaling(pt, cfg.schedule, m, spec_eff);
  }

  PullbackTable pullback(spec_eff, pt.mu, mass_eff, pt.delta_t);
  BogolyubovOptions bopts;
  bopts.p_bins = cfg.bogolyubov.p_bins;
  bopts.p_span = cfg.bogolyubov.p_span;
  bopts.q2_radial = cfg.bogolyubov.q2_radial;
  bopts.q2_angular = cfg.bogolyubov.q2_angular;
  bopts.temperature_hint = cfg.temperature_nominal;

  const double volume = 8.0 * std::pow(cfg.external.domain_halfwidth, 3);
  const double n_density = static_cast<double>(pt.n_particles) / volume;

  const fs::path cdir = root / "compare";
  fs::create_directories(cdir);
  std::ofstream table(cdir / "bogolyubov.csv");
  table << "t,node,dfdt_fd,pullback_rhs,boltzmann_rhs\n";
  std::ofstream summary(cdir / "bogolyubov_summary.csv");
  summary << "t,l1_fd_vs_pullback,l1_fd_vs_boltzmann,l1_pullback_vs_boltzmann\n";

  for (std::size_t mid = 1; mid + 1 < f1.size(); ++mid) {
    auto fields = bogolyubov_rhs(f1[mid - 1], times[mid - 1], f1[mid], f1[mid + 1],
                                 times[mid + 1], n_density, pt.mu, mass_eff, spec_eff,
                                 pullback, bopts);

    // collision-term quadrature on a wider aligned grid, restricted back to
    // the comparison nodes
    const std::size_t nb = fields.p_bins;
    const double s_span = fields.p_nodes.back();
    const double h_node = fields.p_nodes[1] - fields.p_nodes[0];
    const double sigma = std::sqrt(mass_eff * cfg.temperature_nominal);
    std::size_t extra = 0;
    while (s_span + (static_cast<double>(extra)) * h_node < 7.5 * sigma) ++extra;
    const std::size_t nq = nb + 2 * extra;
    const double s_q = s_span + static_cast<double>(extra) * h_node;
    DiscreteVelocityGrid grid;
    grid.n = nq;
    grid.p_max = s_q * static_cast<double>(nq) / static_cast<double>(nq - 1);
    grid.f.assign(nq * nq * nq, 0.0);
    for (std::size_t ix = 0; ix < nq; ++ix)
      for (std::size_t iy = 0; iy < nq; ++iy)
        for (std::size_t iz = 0; iz < nq; ++iz) {
          const double c[3] = {grid.node(ix), grid.node(iy), grid.node(iz)};
          grid.f[grid.index(ix, iy, iz)] = f1[mid].value_at(c) / f1[mid].normalization;
        }
    const auto kernel = resolve_kernel(cfg, mass_eff);
    const auto st = collision_integral_quadrature(
        grid, kernel, n_density, pt.mu, mass_eff,
        {cfg.bogolyubov.quad_rho, cfg.bogolyubov.quad_phi});
    for (std::size_t ix = 0; ix < nb; ++ix)
      for (std::size_t iy = 0; iy < nb; ++iy)
        for (std::size_t iz = 0; iz < nb; ++iz) {
          fields.boltzmann_rhs[(ix * nb + iy) * nb + iz] =
              st[grid.index(ix + extra, iy + extra, iz + extra)];
        }

    double l1_ab = 0, l1_ac = 0, l1_bc = 0;
    for (std::size_t k = 0; k < fields.dfdt_fd.size(); ++k) {
      table << fmt(times[mid]) << ',' << k << ',' << fmt(fields.dfdt_fd[k]) << ','
            << fmt(fields.collision_rhs[k]) << ',' << fmt(fields.boltzmann_rhs[k]) << "\n";
      l1_ab += std::fabs(fields.dfdt_fd[k] - fields.collision_rhs[k]);
      l1_ac += std::fabs(fields.dfdt_fd[k] - fields.boltzmann_rhs[k]);
      l1_bc += std::fabs(fields.collision_rhs[k] - fields.boltzmann_rhs[k]);
    }
    const double cell = h_node * h_node * h_node;
    summary << fmt(times[mid]) << ',' << fmt(l1_ab * cell) << ',' << fmt(l1_ac * cell)
            << ',' << fmt(l1_bc * cell) << "\n";
  }
}

}  // namespace boltzlab
