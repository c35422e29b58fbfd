#include "boltzlab/config.hpp"

#include <cmath>
#include <fstream>

#include "boltzlab/errors.hpp"

namespace boltzlab {

using nlohmann::json;

namespace {

class Collector {
 public:
  void add(const std::string& msg) { errors_.push_back(msg); }
  template <typename T>
  T get(const json& j, const std::string& key, const T& fallback) {
    if (!j.contains(key)) return fallback;
    try {
      return j.at(key).get<T>();
    } catch (const json::exception&) {
      add("field '" + key + "' has the wrong type");
      return fallback;
    }
  }
  void finish() {
    if (!errors_.empty()) throw config_error(std::move(errors_));
  }
  bool ok() const { return errors_.empty(); }

 private:
  std::vector<std::string> errors_;
};

}  // namespace

ExperimentConfig parse_config(const json& j) {
  Collector errs;
  ExperimentConfig cfg;
  cfg.echo = j;
  // execution parameters are not part of the experiment identity: artifacts
  // must be byte-identical regardless of worker count or output location
  cfg.echo.erase("threads");
  cfg.echo.erase("output");

  const std::string mode = errs.get<std::string>(j, "mode", "bridge");
  if (mode == "nbody_only") {
    cfg.mode = RunMode::nbody_only;
  } else if (mode == "boltzmann_only") {
    cfg.mode = RunMode::boltzmann_only;
  } else if (mode == "bridge") {
    cfg.mode = RunMode::bridge;
  } else {
    errs.add("mode must be one of nbody_only | boltzmann_only | bridge");
  }

  cfg.seeds = errs.get<std::vector<std::uint64_t>>(j, "seeds", {});
  if (cfg.seeds.empty()) errs.add("seeds must be an explicit non-empty list (no ambient entropy)");
  cfg.threads = errs.get<int>(j, "threads", 1);
  if (cfg.threads < 1) errs.add("threads must be >= 1");
  if (j.contains("output")) cfg.out_dir = errs.get<std::string>(j.at("output"), "dir", "out");

  cfg.mass = errs.get<double>(j, "mass", 1.0);
  if (!(cfg.mass > 0.0)) errs.add("mass must be > 0");

  // potential section
  {
    const json p = j.value("potential", json::object());
    const std::string kind = p.value("kind", "inverse_power");
    PairKind pk = PairKind::inverse_power;
    if (kind == "inverse_power") {
      pk = PairKind::inverse_power;
    } else if (kind == "hard_sphere_limit") {
      pk = PairKind::hard_sphere_limit;
    } else {
      errs.add("potential.kind must be inverse_power | hard_sphere_limit");
    }
    try {
      cfg.potential = PotentialSpec::checked(pk, p.value("gamma", 4.0),
                                             p.value("amplitude", 1.0),
                                             p.value("cutoff_radius", 6.0));
    } catch (const config_error& e) {
      for (const auto& v : e.violations()) errs.add(v);
    }
    // Phi = 0 control runs: an explicit flag rather than a zero amplitude
    if (p.value("free_gas", false)) cfg.potential.amplitude = 0.0;
  }

  // external section
  {
    const json e = j.value("external", json::object());
    const std::string kind = e.value("kind", "power_wall");
    WellKind wk = WellKind::power_wall;
    if (kind == "none") {
      wk = WellKind::none;
    } else if (kind == "harmonic") {
      wk = WellKind::harmonic;
    } else if (kind == "power_wall") {
      wk = WellKind::power_wall;
    } else {
      errs.add("external.kind must be none | harmonic | power_wall");
    }
    try {
      cfg.external = ExternalPotential::checked(
          wk, e.value("stiffness", 1.0), e.value("wall_exponent", 20),
          e.value("domain_halfwidth", 1.0), e.value("wall_energy", 20.0));
    } catch (const config_error& ex) {
      for (const auto& v : ex.violations()) errs.add(v);
    }
  }

  // initial law
  {
    const json i = j.value("initial", json::object());
    const std::string spatial = i.value("spatial", "uniform_in_g");
    if (spatial == "uniform_in_g") {
      cfg.initial.spatial = SpatialLaw::uniform_in_g;
    } else if (spatial == "gaussian_blob") {
      cfg.initial.spatial = SpatialLaw::gaussian_blob;
    } else {
      errs.add("initial.spatial must be uniform_in_g | gaussian_blob");
    }
    const std::string vel = i.value("velocity", "maxwellian");
    if (vel == "maxwellian") {
      cfg.initial.velocity = VelocityLaw::maxwellian;
    } else if (vel == "two_temperature") {
      cfg.initial.velocity = VelocityLaw::two_temperature;
    } else if (vel == "shifted_maxwellian") {
      cfg.initial.velocity = VelocityLaw::shifted_maxwellian;
    } else {
      errs.add("initial.velocity must be maxwellian | two_temperature | shifted_maxwellian");
    }
    cfg.initial.temperature = i.value("temperature", 1.0);
    cfg.initial.t_hot = i.value("t_hot", 2.0);
    cfg.initial.t_cold = i.value("t_cold", 0.5);
    cfg.initial.hot_weight = i.value("hot_weight", 0.5);
    if (!(cfg.initial.temperature > 0.0) || !(cfg.initial.t_hot > 0.0) ||
        !(cfg.initial.t_cold > 0.0)) {
      errs.add("initial temperatures must be > 0");
    }
    if (cfg.initial.hot_weight < 0.0 || cfg.initial.hot_weight > 1.0) {
      errs.add("initial.hot_weight must lie in [0, 1]");
    }
    if (i.contains("drift")) {
      const auto d = errs.get<std::vector<double>>(i, "drift", {0, 0, 0});
      if (d.size() == 3) {
        cfg.initial.drift = {d[0], d[1], d[2]};
      } else {
        errs.add("initial.drift must have 3 components");
      }
    }
    cfg.temperature_nominal =
        cfg.initial.velocity == VelocityLaw::two_temperature
            ? cfg.initial.hot_weight * cfg.initial.t_hot +
                  (1.0 - cfg.initial.hot_weight) * cfg.initial.t_cold
            : cfg.initial.temperature;
    // exclusion: "auto" = 2 mu (C/T)^(1/gamma), resolved per schedule point
    if (i.contains("exclusion_radius") && i.at("exclusion_radius").is_number()) {
      cfg.initial.exclusion_radius = i.at("exclusion_radius").get<double>();
      if (cfg.initial.exclusion_radius < 0.0) errs.add("initial.exclusion_radius must be >= 0");
    } else {
      cfg.initial.exclusion_radius = -1.0;  // sentinel: auto per point
    }
  }

  // schedule
  {
    const json s = j.value("schedule", json::object());
    cfg.schedule.mass_rescaling = s.value("mass_rescaling", false);
    const double coeff = s.value("delta_t_coeff", 0.4);
    if (!s.contains("points") || !s.at("points").is_array() || s.at("points").empty()) {
      errs.add("schedule.points must be a non-empty array");
    } else {
      for (const auto& pj : s.at("points")) {
        SchedulePoint pt;
        pt.n_particles = pj.value("n_particles", 0);
        pt.mu = pj.value("mu", 0.0);
        pt.delta_t = pj.value("delta_t", 0.0);
        if (pt.n_particles < 1) errs.add("schedule point: n_particles must be >= 1");
        if (!(pt.mu > 0.0)) errs.add("schedule point: mu must be > 0");
        if (pt.delta_t <= 0.0 && pt.mu > 0.0) pt.delta_t = coeff * std::sqrt(pt.mu);
        cfg.schedule.points.push_back(pt);
      }
      if (errs.ok() && !cfg.schedule.points.empty()) {
        cfg.schedule.constant = static_cast<double>(cfg.schedule.points[0].n_particles) *
                               cfg.schedule.points[0].mu * cfg.schedule.points[0].mu;
        for (const auto& pt : cfg.schedule.points) {
          const double c = static_cast<double>(pt.n_particles) * pt.mu * pt.mu;
          if (std::fabs(c - cfg.schedule.constant) >
              1e-12 * std::fabs(cfg.schedule.constant)) {
            errs.add("schedule violates N mu^2 = const (Grad-limit invariant)");
            break;
          }
        }
        for (std::size_t k = 1; k < cfg.schedule.points.size(); ++k) {
          if (!(cfg.schedule.points[k].delta_t < cfg.schedule.points[k - 1].delta_t)) {
            errs.add("schedule: delta_t must be strictly decreasing along the points");
            break;
          }
          if (!(cfg.schedule.points[k].delta_tau() >
                cfg.schedule.points[k - 1].delta_tau())) {
            errs.add("schedule: delta_tau = delta_t/mu must be strictly increasing");
            break;
          }
        }
      }
    }
  }

  cfg.replicas = errs.get<std::size_t>(j, "replicas", 8);
  if (cfg.replicas < 1) errs.add("replicas must be >= 1");
  cfg.t_final = errs.get<double>(j, "t_final", 0.3);
  if (!(cfg.t_final >= 0.0)) errs.add("t_final must be >= 0");
  cfg.snapshot_times = errs.get<std::vector<double>>(j, "snapshot_times", {});
  if (cfg.snapshot_times.empty()) {
    cfg.snapshot_times = cfg.t_final > 0.0 ? std::vector<double>{0.0, cfg.t_final}
                                           : std::vector<double>{0.0};
  }
  for (std::size_t k = 0; k < cfg.snapshot_times.size(); ++k) {
    if (cfg.snapshot_times[k] < 0.0 || cfg.snapshot_times[k] > cfg.t_final + 1e-12) {
      errs.add("snapshot_times must lie in [0, t_final]");
      break;
    }
    if (k > 0 && cfg.snapshot_times[k] <= cfg.snapshot_times[k - 1]) {
      errs.add("snapshot_times must be strictly increasing");
      break;
    }
  }

  {
    const json nb = j.value("nbody", json::object());
    cfg.nbody_dt = nb.value("dt", 0.0);
    cfg.nbody_all_pairs = nb.value("all_pairs", false);
  }

  {
    const json b = j.value("boltzmann", json::object());
    const std::string k = b.value("kernel", "inverse_power");
    if (k == "hard_sphere") {
      cfg.boltzmann.kernel = KernelChoice::hard_sphere;
    } else if (k == "inverse_power") {
      cfg.boltzmann.kernel = KernelChoice::inverse_power;
    } else if (k == "pseudo_maxwell") {
      cfg.boltzmann.kernel = KernelChoice::pseudo_maxwell;
    } else {
      errs.add("boltzmann.kernel must be hard_sphere | inverse_power | pseudo_maxwell");
    }
    cfg.boltzmann.samples = b.value("samples", 20000);
    if (cfg.boltzmann.samples < 2) errs.add("boltzmann.samples must be >= 2");
    cfg.boltzmann.chi_min = b.value("chi_min", 1e-3);
    if (!(cfg.boltzmann.chi_min > 0.0)) errs.add("boltzmann.chi_min must be > 0");
    cfg.boltzmann.hard_sphere_diameter = b.value("hard_sphere_diameter", 1.0);
    cfg.boltzmann.maxwell_rate = b.value("maxwell_rate", 5.0);
    cfg.boltzmann.dt = b.value("dt", 0.0);
    cfg.boltzmann.t_final = b.value("t_final", -1.0);
    cfg.boltzmann.h_bins = b.value("h_bins", 64);
    cfg.boltzmann.h_span = b.value("h_span", 0.0);
    cfg.boltzmann.output_points = b.value("output_points", 16);
    if (cfg.boltzmann.output_points < 2) errs.add("boltzmann.output_points must be >= 2");
  }

  {
    const json c = j.value("chaos", json::object());
    cfg.chaos.bulk_fraction = c.value("bulk_fraction", 0.5);
    cfg.chaos.pair_window_factor = c.value("pair_window_factor", 2.0);
    cfg.chaos.min_pairs = c.value("min_pairs", 100);
    cfg.chaos.q2_offsets = c.value("q2_offsets", 8);
    cfg.chaos.momentum_bins = c.value("momentum_bins", 12);
    cfg.chaos.space_bins = c.value("space_bins", 6);
    cfg.chaos.momentum_span = c.value("momentum_span", 5.0);
    cfg.chaos.probe_radius = c.value("probe_radius", 2.0);
  }

  {
    const json m = j.value("marginals", json::object());
    cfg.marginals.f1_p_bins = m.value("f1_p_bins", 16);
    cfg.marginals.f1_span = m.value("f1_span", 5.0);
  }

  {
    const json b = j.value("bogolyubov", json::object());
    cfg.bogolyubov.p_bins = b.value("p_bins", 9);
    cfg.bogolyubov.p_span = b.value("p_span", 4.0);
    cfg.bogolyubov.q2_radial = b.value("q2_radial", 6);
    cfg.bogolyubov.q2_angular = b.value("q2_angular", 14);
    cfg.bogolyubov.quad_rho = b.value("quad_rho", 8);
    cfg.bogolyubov.quad_phi = b.value("quad_phi", 8);
  }

  errs.finish();
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error({"cannot read config file: " + path});
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw config_error({std::string("config is not valid JSON: ") + e.what()});
  }
  return parse_config(j);
}

void apply_mass_rescaling(const SchedulePoint& pt, const ScalingSchedule& sched,
                          double& mass, PotentialSpec& spec) {
  if (!sched.mass_rescaling) return;
  const double mu2 = pt.mu * pt.mu;
  mass *= mu2;
  spec.amplitude *= mu2;
}

}  // namespace boltzlab
