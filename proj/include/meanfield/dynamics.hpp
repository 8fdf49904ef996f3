#pragma once

#include <cstdint>
#include <vector>

#include "meanfield/model.hpp"

namespace meanfield {

struct SimConfig {
  int n_particles = 20;
  int d = 2;
  double lambda = 1.0;
  double dt = 1e-4;
  long steps = 0;
  std::uint64_t seed = 0;
  long record_every = 100;
  long decay_every = 0;  // 0 disables the step-size schedule
  double decay_factor = 0.5;
  int batch = 0;  // 0 means full dataset every step
  int entropy_k = 3;
};

struct TrajectoryRecord {
  long step = 0;
  double t = 0;
  double Q = 0;
  double risk = 0;
  double reg_mean = 0;
  double entropy = 0;
  double grad_norm_mean = 0;  // mean of ||grad U||^2 over particles
};

struct TrajectoryLog {
  std::vector<TrajectoryRecord> records;
};

/// All d+1 coordinates i.i.d. standard normal; bit-reproducible per seed.
ParticleEnsemble init_ensemble(int n, int d, std::uint64_t seed);

/// One synchronous Euler-Maruyama step at time index `step`:
///   theta_i <- theta_i - dt grad U(theta_i, rho_pre) + sqrt(2 lambda dt) xi_i
/// Gradients are taken against the frozen pre-step ensemble; noise comes from
/// the (seed, particle id, step) substream, so slot order never matters.
/// An empty batch drops the data term (pure-regularizer drift); dt = 0 is the
/// identity.
void em_step(ParticleEnsemble& ens, const Dataset& batch, const ModelSpecs& specs,
             double dt, double lambda, std::uint64_t seed, long step);

/// Step size at a global step index under the decay schedule.
double scheduled_dt(const SimConfig& cfg, long step);

/// Objective snapshot of the current ensemble against `data`.
TrajectoryRecord objective_record(const ParticleEnsemble& ens, const Dataset& data,
                                  const ModelSpecs& specs, const SimConfig& cfg,
                                  long step, double t);

/// Runs cfg.steps EM steps over `data`, recording the objective at the
/// configured cadence plus the final state (records are diagnostics computed
/// on the full dataset). step0/t0 let a caller stitch several segments into
/// one global clock.
TrajectoryLog simulate(ParticleEnsemble& ens, const Dataset& data,
                       const ModelSpecs& specs, const SimConfig& cfg,
                       long step0 = 0, double t0 = 0.0);

}  // namespace meanfield
