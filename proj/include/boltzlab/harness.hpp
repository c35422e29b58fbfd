#pragma once

#include <string>

#include "boltzlab/config.hpp"

namespace boltzlab {

// Executes the configured mode and writes the artifact tree under
// cfg.out_dir: manifest.json (config echo + version + seeds), per-seed CSV
// time series, JSON histograms, columnar snapshots, residual tables. All
// artifacts are byte-deterministic for a fixed config and seed; wall-clock
// timings go to timings.json only.
void run_experiment(const ExperimentConfig& cfg);

// Bridge runs across every schedule point with per-seed replication:
// chaos residuals, MD-vs-Boltzmann L1 distances, H series on both levels,
// and the trend summary with notched confidence bands.
void grad_sweep(const ExperimentConfig& cfg);

// Post-processes a bridge/sweep artifact directory: finite-difference
// df1/dt, the pullback-factorized right-hand side, and the collision-term
// quadrature on a shared momentum grid, with pairwise L1 discrepancies.
void compare_bogolyubov_artifacts(const std::string& artifact_dir);

}  // namespace boltzlab
