#include "meanfield/dynamics.hpp"

#include <cmath>

#include "meanfield/errors.hpp"
#include "meanfield/objective.hpp"
#include "meanfield/rng.hpp"

namespace meanfield {

ParticleEnsemble init_ensemble(int n, int d, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("init_ensemble: n must be >= 1");
  if (d < 1) throw std::invalid_argument("init_ensemble: d must be >= 1");
  ParticleEnsemble ens(n, d);
  for (int i = 0; i < n; ++i) {
    Substream rng(seed, StreamPurpose::kInit, ens.ids()[i]);
    for (int j = 0; j <= d; ++j) ens.raw()(i, j) = rng.next_normal();
  }
  return ens;
}

void em_step(ParticleEnsemble& ens, const Dataset& batch, const ModelSpecs& specs,
             double dt, double lambda, std::uint64_t seed, long step) {
  if (!(dt >= 0)) throw std::invalid_argument("em_step: dt must be >= 0");
  if (lambda < 0) throw std::invalid_argument("em_step: lambda must be >= 0");
  const int n = ens.size();
  const int d = ens.input_dim();
  const int K = batch.n();  // 0 gives pure-regularizer drift
  if (K > 0 && batch.d() != d)
    throw std::invalid_argument("em_step: batch dimension mismatch");

  // synchronous update: residuals and all per-particle gradients are taken
  // against the frozen pre-step ensemble
  ResidualWeights rw;
  if (K > 0) rw = residual_weights(ens, batch, specs.act, specs.loss);
  const double invK = K > 0 ? 1.0 / static_cast<double>(K) : 0.0;
  const double noise_scale =
      (lambda > 0 && dt > 0) ? std::sqrt(2.0 * lambda * dt) : 0.0;

  Eigen::MatrixXd update(n, d + 1);
  Eigen::VectorXd gw(d);
  for (int i = 0; i < n; ++i) {
    double u = ens.u(i);
    gw.setZero();
    double gu = 0.0;
    for (int k = 0; k < K; ++k) {
      double z = ens.w(i).dot(batch.X.row(k));
      gw += (rw.c(k) * u * specs.act.dg(z)) * batch.X.row(k).transpose();
      gu += rw.c(k) * specs.act.g(z);
    }
    Eigen::VectorXd theta = ens.theta(i).transpose();
    Eigen::VectorXd gr = specs.reg.grad(theta);
    update.row(i).head(d) = ens.w(i) - dt * (invK * gw.transpose() + gr.head(d).transpose());
    update(i, d) = u - dt * (invK * gu + gr(d));
    if (noise_scale > 0) {
      Substream rng(seed, StreamPurpose::kNoise, ens.ids()[i],
                    static_cast<std::uint64_t>(step));
      for (int j = 0; j <= d; ++j) update(i, j) += noise_scale * rng.next_normal();
    }
  }
  ens.raw() = update;
  for (int i = 0; i < n; ++i) {
    if (!ens.raw().row(i).allFinite())
      throw NumericFault("em_step: non-finite particle after update", i, step);
  }
}

double scheduled_dt(const SimConfig& cfg, long step) {
  if (cfg.decay_every <= 0) return cfg.dt;
  long k = step / cfg.decay_every;
  return cfg.dt * std::pow(cfg.decay_factor, static_cast<double>(k));
}

TrajectoryRecord objective_record(const ParticleEnsemble& ens, const Dataset& data,
                                  const ModelSpecs& specs, const SimConfig& cfg,
                                  long step, double t) {
  TrajectoryRecord rec;
  rec.step = step;
  rec.t = t;
  ObjectiveReport rep = free_energy(ens, data, specs, cfg.lambda, cfg.entropy_k);
  rec.Q = rep.Q;
  rec.risk = rep.risk;
  rec.reg_mean = rep.reg_mean;
  rec.entropy = rep.entropy;
  ResidualWeights rw = residual_weights(ens, data, specs.act, specs.loss);
  double acc = 0.0;
  for (int i = 0; i < ens.size(); ++i)
    acc += potential_grad(ens.particle(i), rw, data, specs).squaredNorm();
  rec.grad_norm_mean = acc / static_cast<double>(ens.size());
  return rec;
}

TrajectoryLog simulate(ParticleEnsemble& ens, const Dataset& data,
                       const ModelSpecs& specs, const SimConfig& cfg,
                       long step0, double t0) {
  if (cfg.steps < 0) throw std::invalid_argument("simulate: steps must be >= 0");
  if (data.n() == 0) throw std::invalid_argument("simulate: empty dataset");
  const int batch = (cfg.batch <= 0 || cfg.batch >= data.n()) ? data.n() : cfg.batch;

  TrajectoryLog log;
  double t = t0;
  for (long s = 0; s < cfg.steps; ++s) {
    long gstep = step0 + s;
    if (cfg.record_every > 0 && gstep % cfg.record_every == 0)
      log.records.push_back(objective_record(ens, data, specs, cfg, gstep, t));
    Dataset b;
    const Dataset* bp = &data;
    if (batch < data.n()) {
      long start = (static_cast<long>(batch) * gstep) % data.n();
      int count = static_cast<int>(std::min<long>(batch, data.n() - start));
      b = data.rows(static_cast<int>(start), count);
      bp = &b;
    }
    double dt = scheduled_dt(cfg, gstep);
    em_step(ens, *bp, specs, dt, cfg.lambda, cfg.seed, gstep);
    t += dt;
  }
  // the final state is always recorded, on cadence or not
  log.records.push_back(objective_record(ens, data, specs, cfg, step0 + cfg.steps, t));
  return log;
}

}  // namespace meanfield
