#pragma once

#include <string>
#include <vector>

#include "meanfield/config.hpp"
#include "meanfield/lsi.hpp"
#include "meanfield/objective.hpp"

namespace meanfield {

struct ArmResult {
  std::string label;
  RegularizerSpec reg;
  TrajectoryLog log;
  ParticleEnsemble final_ensemble;
  RateFit fit;
  bool fit_ok = false;
  std::string fit_note;
  std::vector<LsiBoundReport> bounds;
};

struct ExperimentResult {
  std::vector<ArmResult> arms;
};

/// Seed for the epoch's dataset; shared across arms so trajectories differ
/// only through the regularizer.
std::uint64_t epoch_data_seed(std::uint64_t master, long epoch);

/// Runs every regularizer arm from a bit-identical initial ensemble.
/// Epoch mode (cfg.epochs > 0) draws fresh teacher data each epoch and
/// stitches the segments on one global step/time axis; plain mode runs
/// cfg.sim.steps on a single dataset. Per arm: trajectory log, decay-rate
/// fit ([0.1 T, 0.6 T] window), and the applicable LSI bound routes.
/// Artifacts are written under cfg.outdir per cfg.emit; errors carry the
/// arm label. The output directory is probed before any compute.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

/// Writes the plot-facing artifacts: per-arm trajectory CSV, final-ensemble
/// snapshot JSON, rate-fit and LSI JSON, neuron scatter CSVs (raw and
/// 1/N-scaled projections), plus teacher.csv and schema.md.
void emit_plot_data(const ExperimentResult& res, const ExperimentConfig& cfg);

}  // namespace meanfield
