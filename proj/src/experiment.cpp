#include "meanfield/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "meanfield/errors.hpp"
#include "meanfield/io.hpp"
#include "meanfield/rng.hpp"

namespace meanfield {
namespace {

namespace fs = std::filesystem;

void probe_outdir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec)
    throw std::runtime_error("experiment: cannot create output dir '" + dir +
                             "': " + ec.message());
  fs::path probe = fs::path(dir) / ".write-probe";
  {
    std::ofstream out(probe);
    if (!out)
      throw std::runtime_error("experiment: output dir '" + dir + "' is not writable");
  }
  fs::remove(probe, ec);
}

// Appends `seg` to `log`, replacing a trailing record that carries the same
// step index (epoch boundaries are recorded twice; the later record is the
// one computed on the fresh dataset).
void merge_log(TrajectoryLog& log, const TrajectoryLog& seg) {
  for (const auto& r : seg.records) {
    if (!log.records.empty() && log.records.back().step == r.step)
      log.records.back() = r;
    else
      log.records.push_back(r);
  }
}

void fit_arm(ArmResult& arm) {
  const auto& recs = arm.log.records;
  if (recs.size() < 4) {
    arm.fit_note = "too few records for a rate fit";
    return;
  }
  double t_end = recs.back().t;
  double q_min = recs.front().Q, q_max = recs.front().Q;
  for (const auto& r : recs) {
    q_min = std::min(q_min, r.Q);
    q_max = std::max(q_max, r.Q);
  }
  double range = q_max - q_min;
  double q_star = q_min - (range > 0 ? 0.05 * range : 1.0);
  try {
    arm.fit = fit_decay_rate(arm.log, q_star, 0.1 * t_end, 0.6 * t_end);
    arm.fit_ok = true;
  } catch (const std::exception& e) {
    arm.fit_note = e.what();
  }
}

void bound_arm(ArmResult& arm, const ExperimentConfig& cfg) {
  const double lambda = cfg.sim.lambda;
  if (!(lambda > 0)) return;
  if (cfg.lsi_route != "lyapunov" && arm.reg.kind == RegularizerSpec::Kind::kQuartic &&
      cfg.loss.bounded_gradient()) {
    arm.bounds.push_back(quartic_bound(arm.reg.cert.m, arm.reg.beta, cfg.sim.d,
                                       cfg.loss.L1, cfg.act.C3, cfg.act.C4, lambda));
  }
  if (cfg.lsi_route != "quartic" && cfg.loss.bounded_gradient()) {
    LyapunovCertificate cert = lyapunov_constants(arm.reg, cfg.act, cfg.loss, cfg.sim.d);
    if (cfg.lsi_scaling != "strict-proof-scaling")
      arm.bounds.push_back(
          lyapunov_bound(cert, lambda, cfg.lsi_C, ScalingMode::kTheoremStatement));
    if (cfg.lsi_scaling != "theorem-statement")
      arm.bounds.push_back(
          lyapunov_bound(cert, lambda, cfg.lsi_C, ScalingMode::kStrictProofScaling));
  }
}

template <class Fn>
auto with_arm_label(const std::string& label, Fn&& fn) {
  try {
    return fn();
  } catch (const NumericFault& e) {
    throw NumericFault("[arm " + label + "] " + e.what(), e.index(), e.step());
  } catch (const ConvergenceFailure& e) {
    throw ConvergenceFailure("[arm " + label + "] " + e.what(), e.residuals());
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw std::runtime_error("[arm " + label + "] " + e.what());
  }
}

}  // namespace

std::uint64_t epoch_data_seed(std::uint64_t master, long epoch) {
  return Substream(master, StreamPurpose::kData, static_cast<std::uint64_t>(epoch))
      .next_u64();
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  if (cfg.regularizers.empty())
    throw ConfigError("experiment: at least one regularizer arm is required");
  probe_outdir(cfg.outdir);

  std::vector<std::string> labels;
  for (size_t a = 0; a < cfg.regularizers.size(); ++a) {
    std::string base = cfg.regularizers[a].label();
    std::string label = base;
    for (int suffix = 2; std::count(labels.begin(), labels.end(), label) > 0; ++suffix)
      label = base + "-" + std::to_string(suffix);
    labels.push_back(label);
  }

  ExperimentResult res;
  for (size_t a = 0; a < cfg.regularizers.size(); ++a) {
    ArmResult arm;
    arm.label = labels[a];
    arm.reg = cfg.regularizers[a];
    ModelSpecs specs{cfg.act, cfg.loss, arm.reg};

    with_arm_label(arm.label, [&] {
      ParticleEnsemble ens =
          init_ensemble(cfg.sim.n_particles, cfg.sim.d, cfg.sim.seed);
      if (cfg.epochs > 0) {
        long spe = cfg.samples_per_epoch;
        long bs = (cfg.sim.batch <= 0 || cfg.sim.batch >= spe) ? spe : cfg.sim.batch;
        long steps_per_epoch = (spe + bs - 1) / bs;
        SimConfig sim = cfg.sim;
        sim.steps = steps_per_epoch;
        if (cfg.decay_every_epochs > 0)
          sim.decay_every = cfg.decay_every_epochs * steps_per_epoch;
        long gstep = 0;
        double t = 0;
        for (long e = 0; e < cfg.epochs; ++e) {
          Dataset data = make_teacher_dataset(cfg.teacher, spe,
                                              epoch_data_seed(cfg.sim.seed, e));
          merge_log(arm.log, simulate(ens, data, specs, sim, gstep, t));
          for (long s = 0; s < steps_per_epoch; ++s) t += scheduled_dt(sim, gstep + s);
          gstep += steps_per_epoch;
        }
      } else {
        Dataset data = make_teacher_dataset(cfg.teacher, cfg.samples_per_epoch,
                                            epoch_data_seed(cfg.sim.seed, 0));
        arm.log = simulate(ens, data, specs, cfg.sim);
      }
      arm.final_ensemble = ens;
      fit_arm(arm);
      bound_arm(arm, cfg);
      return 0;
    });
    res.arms.push_back(std::move(arm));
  }

  emit_plot_data(res, cfg);
  return res;
}

void emit_plot_data(const ExperimentResult& res, const ExperimentConfig& cfg) {
  probe_outdir(cfg.outdir);
  fs::path dir(cfg.outdir);
  for (const auto& arm : res.arms) {
    with_arm_label(arm.label, [&] {
      if (cfg.emit.csv)
        write_trajectory_csv(arm.log, (dir / ("trajectory_" + arm.label + ".csv")).string());
      if (cfg.emit.json) {
        write_ensemble_json(arm.final_ensemble,
                            (dir / ("snapshots_" + arm.label + ".json")).string());
        if (arm.fit_ok)
          write_ratefit_json(arm.fit, (dir / ("ratefit_" + arm.label + ".json")).string());
        if (!arm.bounds.empty())
          write_lsi_json(arm.bounds, (dir / ("lsi_" + arm.label + ".json")).string());
      }
      if (cfg.emit.plotdata) {
        write_scatter_csv(arm.final_ensemble,
                          (dir / ("neurons_" + arm.label + ".csv")).string(), false);
        write_scatter_csv(arm.final_ensemble,
                          (dir / ("neurons_" + arm.label + "_scaled.csv")).string(), true);
      }
      return 0;
    });
  }
  if (cfg.emit.plotdata && cfg.teacher.neurons.size() > 0)
    write_scatter_csv(cfg.teacher.neurons, (dir / "teacher.csv").string(), false);
  write_schema_md((dir / "schema.md").string());
}

}  // namespace meanfield
