#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "boltzlab/potentials.hpp"
#include "boltzlab/scattering.hpp"

namespace boltzlab {

// One N-particle replica, SoA layout (the pushers and reductions are the hot
// loops and run through the kernels backend).
struct SystemState {
  double time = 0.0;
  std::array<std::vector<double>, 3> q;
  std::array<std::vector<double>, 3> p;

  std::size_t size() const { return q[0].size(); }
  void resize(std::size_t n);
  PhasePoint particle(std::size_t i) const;
  void set_particle(std::size_t i, const PhasePoint& x);
};

struct NbodyParams {
  PotentialSpec pair;
  ExternalPotential ext;
  double mu = 0.01;
  double mass = 1.0;
  // force the O(N^2) pair loop; used for small N and for the exact
  // reversibility runs where the pair traversal order must not depend on
  // neighbor-list rebuild history
  bool all_pairs = false;
  double skin_factor = 1.0;  // Verlet skin, in units of mu * cutoff
};

// Pair + external forces with a Verlet neighbor list over cell binning.
// Rebuilds are displacement-triggered; the pair traversal order is fixed by
// particle index, so force accumulation is deterministic and antisymmetric.
class ForceEvaluator {
 public:
  ForceEvaluator(const NbodyParams& params, std::size_t n);

  // Fills force with the total force and returns the pair potential energy.
  double compute(const SystemState& s, std::array<std::vector<double>, 3>& force);

  void invalidate();  // force a rebuild on the next compute

  // Accumulates a bound on per-particle displacement since the last rebuild;
  // the pusher reports v_max * dt each step.
  void note_travel(double d) { travel_bound_ += d; }

 private:
  void rebuild(const SystemState& s);

  NbodyParams params_;
  std::size_t n_;
  double range_, skin_;
  double travel_bound_ = 0.0;
  bool valid_ = false;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> pairs_;
};

// One velocity-Verlet step; `force` must hold the force at s.time matching s
// (compute it once before the first step). On return both are advanced.
void verlet_step(SystemState& s, double dt, double mass, ForceEvaluator& eval,
                 std::array<std::vector<double>, 3>& force);

// Convenience single-step contract (builds a local evaluator).
SystemState step(const SystemState& s, double dt, const NbodyParams& params);

double kinetic_energy(const SystemState& s, double mass);
double total_energy(const SystemState& s, const NbodyParams& params);

// dt stability bound: min(0.01 mu / v_max, 0.05 * interaction traversal time).
double suggest_dt(const SystemState& s, const NbodyParams& params);

void reverse_momenta(SystemState& s);

enum class SpatialLaw { uniform_in_g, gaussian_blob };
enum class VelocityLaw { maxwellian, two_temperature, shifted_maxwellian };

struct InitialLaw {
  SpatialLaw spatial = SpatialLaw::uniform_in_g;
  VelocityLaw velocity = VelocityLaw::maxwellian;
  double temperature = 1.0;       // maxwellian / shifted
  double t_hot = 2.0;             // two_temperature
  double t_cold = 0.5;
  double hot_weight = 0.5;
  Vec3 drift;                     // shifted_maxwellian mean velocity
  double exclusion_radius = 0.0;  // resample closer pairs; 0 = off
};

struct Ensemble {
  std::vector<SystemState> replicas;
  std::uint64_t rng_seed = 0;
  double mu = 0.0;
  double mass = 1.0;
  double box_halfwidth = 1.0;  // G halfwidth; volume = (2 L)^3
  double time = 0.0;
  double sampling_acceptance = 1.0;

  double volume() const { return 8.0 * box_halfwidth * box_halfwidth * box_halfwidth; }
  std::size_t n_particles() const { return replicas.empty() ? 0 : replicas[0].size(); }
  std::size_t n_replicas() const { return replicas.size(); }
};

// i.i.d. single-particle draws per replica with overlap-exclusion resampling.
// Throws config_error when the exclusion acceptance rate falls below 50%.
Ensemble sample_initial(const InitialLaw& law, std::size_t n_particles,
                        std::size_t n_replicas, std::uint64_t seed,
                        const NbodyParams& params);

struct EvolveOptions {
  double dt = 0.0;                     // 0 = use suggest_dt of the initial state
  double t_final = 0.0;
  std::vector<double> snapshot_times;  // sorted, <= t_final
  int threads = 1;
  std::size_t check_every = 200;       // escape / sanity check cadence
};

struct ReplicaEnergyStats {
  double initial = 0.0;
  double final_ = 0.0;
  double max_rel_drift = 0.0;
};

struct TrajectoryRecord {
  std::vector<Ensemble> snapshots;       // one per snapshot time (time set)
  std::vector<double> snapshot_times;    // actual (step-aligned) times
  std::vector<ReplicaEnergyStats> energy;  // per replica
  double dt = 0.0;
  std::uint64_t total_steps = 0;
};

// Advances every replica independently (optionally across threads); results
// are bit-identical for a fixed seed regardless of the worker count.
TrajectoryRecord evolve_ensemble(const Ensemble& ens, const NbodyParams& params,
                                 const EvolveOptions& opts);

// Self-describing columnar snapshot: a '#'-prefixed JSON metadata line, a
// header line, then one row per particle (replica index qx qy qz px py pz).
void write_snapshot(std::ostream& os, const Ensemble& ens);

}  // namespace boltzlab
