#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "boltzlab/boltzmann.hpp"
#include "boltzlab/marginals.hpp"
#include "boltzlab/nbody.hpp"
#include "boltzlab/potentials.hpp"

#include <json.hpp>

namespace boltzlab {

enum class RunMode { nbody_only, boltzmann_only, bridge };

struct SchedulePoint {
  std::size_t n_particles = 0;
  double mu = 0.0;
  double delta_t = 0.0;  // chaos pullback window
  double delta_tau() const { return delta_t / mu; }
};

// Grad-limit sequence with N mu^2 held constant.
struct ScalingSchedule {
  std::vector<SchedulePoint> points;
  double constant = 0.0;  // N mu^2
  bool mass_rescaling = false;
};

enum class KernelChoice { hard_sphere, inverse_power, pseudo_maxwell };

struct BoltzmannSection {
  KernelChoice kernel = KernelChoice::inverse_power;
  std::size_t samples = 20000;
  double chi_min = 1e-3;
  double hard_sphere_diameter = 1.0;
  double maxwell_rate = 5.0;
  double dt = 0.0;
  double t_final = -1.0;  // <0: use the top-level t_final
  std::size_t h_bins = 64;
  double h_span = 0.0;
  std::size_t output_points = 16;
};

struct ChaosSection {
  double bulk_fraction = 0.5;
  double pair_window_factor = 2.0;
  std::size_t min_pairs = 100;
  std::size_t q2_offsets = 8;
  std::size_t momentum_bins = 12;
  std::size_t space_bins = 6;
  double momentum_span = 5.0;
  double probe_radius = 2.0;  // in units of sqrt(m T)
};

struct MarginalsSection {
  std::size_t f1_p_bins = 16;
  double f1_span = 5.0;  // in units of sqrt(m T)
};

struct BogolyubovSection {
  std::size_t p_bins = 9;
  double p_span = 4.0;
  std::size_t q2_radial = 6;
  std::size_t q2_angular = 14;
  std::size_t quad_rho = 8;
  std::size_t quad_phi = 8;
};

struct ExperimentConfig {
  RunMode mode = RunMode::bridge;
  std::vector<std::uint64_t> seeds;
  int threads = 1;
  std::string out_dir = "out";

  double mass = 1.0;
  PotentialSpec potential;
  ExternalPotential external;
  InitialLaw initial;
  double temperature_nominal = 1.0;  // grid spans, probe scales

  ScalingSchedule schedule;
  std::size_t replicas = 8;
  double t_final = 0.3;
  std::vector<double> snapshot_times;
  double nbody_dt = 0.0;        // 0: suggest_dt
  bool nbody_all_pairs = false;

  BoltzmannSection boltzmann;
  ChaosSection chaos;
  MarginalsSection marginals;
  BogolyubovSection bogolyubov;

  nlohmann::json echo;  // parsed config, re-serialized into the manifest
};

// Parses and validates; every schema violation is collected and reported in
// one config_error.
ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

// Applies Remark-1 style rescaling when enabled: m -> mu^2 m, C -> mu^2 C.
// The rescaled pair system reduces exactly to the plain one with momenta
// scaled by mu^2.
void apply_mass_rescaling(const SchedulePoint& pt, const ScalingSchedule& sched,
                          double& mass, PotentialSpec& spec);

}  // namespace boltzlab
