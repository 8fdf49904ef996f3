#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <json.hpp>

#include "meanfield/errors.hpp"
#include "meanfield/experiment.hpp"
#include "meanfield/fp.hpp"
#include "meanfield/io.hpp"
#include "meanfield/rng.hpp"

using namespace meanfield;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::vector<std::string> sets;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "key = value config file (schema = 1)");
  sub->add_option("--set", c.sets, "override: key=value (repeatable)");
}

ConfigMap resolve(const Common& c) {
  ConfigMap cfg = c.config.empty() ? parse_config_text("schema = 1\n", "<defaults>")
                                   : load_config(c.config);
  for (const auto& s : c.sets) apply_override(cfg, s);
  return cfg;
}

json bound_json(const LsiBoundReport& r) {
  json j = {{"route", r.route},       {"scaling_mode", r.scaling_mode},
            {"log10_nu", r.log10_nu}, {"overflow", r.overflow},
            {"rate", r.rate},         {"log10_rate", r.log10_rate},
            {"lambda", r.lambda},     {"intermediates", r.intermediates}};
  j["nu"] = r.overflow ? json("inf") : json(r.nu);
  return j;
}

int cmd_simulate(const ConfigMap& cfg) {
  ExperimentConfig ec = parse_experiment(cfg);
  ExperimentResult res = run_experiment(ec);
  json out = json::array();
  for (const auto& arm : res.arms) {
    const auto& last = arm.log.records.back();
    json j = {{"arm", arm.label},
              {"records", arm.log.records.size()},
              {"final_step", last.step},
              {"final_t", last.t},
              {"final_Q", last.Q},
              {"final_risk", last.risk}};
    if (arm.fit_ok) {
      j["fit_rate"] = arm.fit.rate;
      j["fit_r_squared"] = arm.fit.r_squared;
    } else if (!arm.fit_note.empty()) {
      j["fit_note"] = arm.fit_note;
    }
    json bounds = json::array();
    for (const auto& b : arm.bounds)
      bounds.push_back({{"route", b.route},
                        {"scaling_mode", b.scaling_mode},
                        {"log10_nu", b.log10_nu},
                        {"rate", b.rate}});
    j["lsi"] = bounds;
    out.push_back(j);
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_lsi_bound(const ConfigMap& cfg) {
  ExperimentConfig ec = parse_experiment(cfg);
  json out = json::array();
  for (size_t a = 0; a < ec.regularizers.size(); ++a) {
    const RegularizerSpec& reg = ec.regularizers[a];
    json arm = {{"arm", reg.label()}};
    json bounds = json::array();
    if (ec.lsi_route != "lyapunov" && reg.kind == RegularizerSpec::Kind::kQuartic &&
        ec.loss.bounded_gradient())
      bounds.push_back(bound_json(quartic_bound(reg.cert.m, reg.beta, ec.sim.d,
                                                ec.loss.L1, ec.act.C3, ec.act.C4,
                                                ec.sim.lambda)));
    if (ec.lsi_route != "quartic") {
      if (!ec.loss.bounded_gradient())
        throw ConfigError("lsi-bound: the lyapunov route needs a bounded-gradient loss");
      LyapunovCertificate cert = lyapunov_constants(reg, ec.act, ec.loss, ec.sim.d);
      if (ec.lsi_scaling != "strict-proof-scaling")
        bounds.push_back(bound_json(lyapunov_bound(cert, ec.sim.lambda, ec.lsi_C,
                                                   ScalingMode::kTheoremStatement)));
      if (ec.lsi_scaling != "theorem-statement")
        bounds.push_back(bound_json(lyapunov_bound(cert, ec.sim.lambda, ec.lsi_C,
                                                   ScalingMode::kStrictProofScaling)));
    }
    arm["bounds"] = bounds;
    out.push_back(arm);
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_fp_oracle(const ConfigMap& cfg) {
  ExperimentConfig ec = parse_experiment(cfg);
  const GridConfig& gc = ec.grid;
  ModelSpecs specs{ec.act, ec.loss, ec.regularizers.front()};
  Dataset data;
  if (gc.samples > 0) {
    if (ec.teacher.neurons.size() == 0 || ec.teacher.neurons.input_dim() != 1)
      throw ConfigError("fp-oracle: grid_samples > 0 needs a d = 1 teacher");
    data = make_teacher_dataset(ec.teacher, gc.samples,
                                epoch_data_seed(ec.sim.seed, 0));
  }
  std::filesystem::create_directories(ec.outdir);
  std::filesystem::path dir(ec.outdir);

  GridDensity g = make_grid(gc.n_u, gc.n_w, gc.u_lo, gc.u_hi, gc.w_lo, gc.w_hi);
  fill_gaussian(g, gc.init_u, gc.init_w, gc.init_sd);

  GridDensity gibbs = gibbs_fixed_point(g, data, specs, ec.sim.lambda);
  ObjectiveReport star = grid_free_energy(gibbs, data, specs, ec.sim.lambda);
  write_grid_csv(gibbs, (dir / "fp_gibbs.csv").string());

  Eigen::ArrayXXd Ureg = grid_reg_potential(g, specs.reg);
  TrajectoryLog log;
  double t = 0;
  auto record = [&](long step) {
    ObjectiveReport rep = grid_free_energy(g, data, specs, ec.sim.lambda);
    TrajectoryRecord r;
    r.step = step;
    r.t = t;
    r.Q = rep.Q;
    r.risk = rep.risk;
    r.reg_mean = rep.reg_mean;
    r.entropy = rep.entropy;
    log.records.push_back(r);
  };
  for (long s = 0; s < gc.steps; ++s) {
    Eigen::ArrayXXd U = Ureg;
    if (data.n() > 0) U += grid_data_potential(g, data, specs);
    if (ec.sim.record_every > 0 && s % ec.sim.record_every == 0) record(s);
    double dt = gc.dt_safety * fp_admissible_dt(g, U, ec.sim.lambda);
    fp_step(g, U, ec.sim.lambda, dt);
    t += dt;
  }
  record(gc.steps);
  write_trajectory_csv(log, (dir / "fp_trajectory.csv").string());
  write_grid_csv(g, (dir / "fp_density.csv").string());
  write_grid_binary(g, (dir / "fp_density.bin").string());

  json out = {{"gibbs_Q", star.Q},
              {"final_Q", log.records.back().Q},
              {"steps", gc.steps},
              {"final_t", t},
              {"final_mass", g.mass()}};
  try {
    RateFit fit = fit_decay_rate(log, star.Q, t / 3.0, 2.0 * t / 3.0);
    out["rate"] = fit.rate;
    out["r_squared"] = fit.r_squared;
  } catch (const std::exception& e) {
    out["fit_note"] = e.what();
  }
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_fit_rate(const ConfigMap& cfg) {
  std::string input = cfg.get_str("fit_input", "");
  if (input.empty()) throw ConfigError("fit-rate: set fit_input to a trajectory CSV");
  TrajectoryLog log = read_trajectory_csv(input);
  if (log.records.empty()) throw ConfigError("fit-rate: '" + input + "' has no records");
  double t_end = log.records.back().t;
  double q_min = log.records.front().Q, q_max = q_min;
  for (const auto& r : log.records) {
    q_min = std::min(q_min, r.Q);
    q_max = std::max(q_max, r.Q);
  }
  double auto_star = q_min - (q_max > q_min ? 0.05 * (q_max - q_min) : 1.0);
  double q_star = cfg.get_num("fit_q_star", auto_star);
  double t_lo = cfg.get_num("fit_t_lo", 0.1 * t_end);
  double t_hi = cfg.get_num("fit_t_hi", 0.6 * t_end);
  RateFit fit = fit_decay_rate(log, q_star, t_lo, t_hi);
  json out = {{"rate", fit.rate},         {"intercept", fit.intercept},
              {"r_squared", fit.r_squared}, {"q_star", fit.q_star},
              {"window_lo", fit.window_lo}, {"window_hi", fit.window_hi},
              {"n_points", fit.n_points},   {"q_star_auto", !cfg.has("fit_q_star")}};
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_gradcheck(const ConfigMap& cfg) {
  ExperimentConfig ec = parse_experiment(cfg);
  long trials = cfg.get_int("gradcheck_trials", 100);
  double tol_g = cfg.get_num("gradcheck_tol_grad", 1e-6);
  double tol_h = cfg.get_num("gradcheck_tol_hess", 1e-5);
  ModelSpecs specs{ec.act, ec.loss, ec.regularizers.front()};
  const int d = ec.sim.d;

  double worst_g = 0, worst_h = 0;
  for (long trial = 0; trial < trials; ++trial) {
    std::uint64_t sub =
        Substream(ec.sim.seed, StreamPurpose::kProbe, static_cast<std::uint64_t>(trial))
            .next_u64();
    ParticleEnsemble ens = init_ensemble(6, d, sub);
    Substream st(sub, StreamPurpose::kSampler);
    Dataset data;
    const int K = 5;
    data.X = Eigen::MatrixXd(K, d);
    data.y = Eigen::VectorXd(K);
    for (int k = 0; k < K; ++k) {
      Eigen::VectorXd x(d);
      for (int j = 0; j < d; ++j) x[j] = st.next_normal();
      double nrm = std::max(x.norm(), 1e-12);
      x *= ec.act.x_max * std::pow(st.next_uniform(), 1.0 / d) / nrm;
      data.X.row(k) = x.transpose();
      data.y[k] = st.next_normal();
    }
    Eigen::VectorXd theta(d + 1);
    for (int j = 0; j <= d; ++j) theta[j] = 1.5 * st.next_normal();
    Particle p = Particle::from_vector(theta);
    ResidualWeights rw = residual_weights(ens, data, specs.act, specs.loss);

    Eigen::VectorXd grad = potential_grad(p, rw, data, specs);
    Eigen::VectorXd grad_fd(d + 1);
    const double h = 1e-5;
    for (int j = 0; j <= d; ++j) {
      Eigen::VectorXd tp = theta, tm = theta;
      tp[j] += h;
      tm[j] -= h;
      grad_fd[j] = (potential_value(Particle::from_vector(tp), rw, data, specs) -
                    potential_value(Particle::from_vector(tm), rw, data, specs)) /
                   (2 * h);
    }
    worst_g = std::max(worst_g,
                       (grad - grad_fd).norm() / std::max(1.0, grad_fd.norm()));

    Eigen::MatrixXd hess = potential_hess(p, rw, data, specs);
    Eigen::MatrixXd hess_fd(d + 1, d + 1);
    for (int j = 0; j <= d; ++j) {
      Eigen::VectorXd tp = theta, tm = theta;
      tp[j] += h;
      tm[j] -= h;
      hess_fd.col(j) = (potential_grad(Particle::from_vector(tp), rw, data, specs) -
                        potential_grad(Particle::from_vector(tm), rw, data, specs)) /
                       (2 * h);
    }
    worst_h = std::max(worst_h,
                       (hess - hess_fd).norm() / std::max(1.0, hess_fd.norm()));
  }

  json out = {{"trials", trials},
              {"worst_grad_rel_err", worst_g},
              {"worst_hess_rel_err", worst_h},
              {"tol_grad", tol_g},
              {"tol_hess", tol_h},
              {"pass", worst_g < tol_g && worst_h < tol_h}};
  std::cout << out.dump(2) << '\n';
  if (!(worst_g < tol_g && worst_h < tol_h)) return 3;
  return 0;
}

int cmd_validate_specs(const ConfigMap& cfg) {
  ExperimentConfig ec = parse_experiment(cfg);
  json out;
  ActivationValidationReport act =
      validate_activation(ec.act, ec.sim.d, 10.0, 2000, ec.sim.seed);
  out["activation"] = {{"kind", ec.act.kind_name()},
                       {"worst_value_ratio", act.worst_value_ratio},
                       {"worst_grad_ratio", act.worst_grad_ratio},
                       {"worst_hess_ratio", act.worst_hess_ratio},
                       {"violations", act.violations},
                       {"pass", act.pass}};
  out["loss"] = {{"kind", ec.loss.kind_name()},
                 {"bounded_gradient", ec.loss.bounded_gradient()},
                 {"assumption_violating", !ec.loss.bounded_gradient()}};
  json arms = json::array();
  for (const auto& reg : ec.regularizers) {
    RegularizerValidationReport rep =
        validate_regularizer(reg, ec.sim.d, 10.0, 2000, ec.sim.seed);
    arms.push_back({{"arm", reg.label()},
                    {"worst_dissip_margin", rep.worst_dissip_margin},
                    {"worst_hess_lo_margin", rep.worst_hess_lo_margin},
                    {"worst_hess_hi_margin", rep.worst_hess_hi_margin},
                    {"worst_grad_margin", rep.worst_grad_margin},
                    {"worst_value_margin", rep.worst_value_margin},
                    {"violations", rep.violations},
                    {"pass", rep.pass},
                    {"assumption_violating", !rep.pass}});
  }
  out["regularizers"] = arms;
  std::cout << out.dump(2) << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mean-field Langevin simulator and log-Sobolev analysis toolkit"};
  app.require_subcommand(1);

  Common c;
  CLI::App* s_sim = app.add_subcommand("simulate", "run the configured experiment arms");
  CLI::App* s_lsi = app.add_subcommand("lsi-bound", "evaluate the LSI constant bounds");
  CLI::App* s_fp = app.add_subcommand("fp-oracle", "d = 1 finite-volume oracle run");
  CLI::App* s_fit = app.add_subcommand("fit-rate", "log-linear decay fit of a trajectory CSV");
  CLI::App* s_gc = app.add_subcommand("gradcheck", "finite-difference check of the potential");
  CLI::App* s_val = app.add_subcommand("validate-specs", "sampled certificate validation");
  for (CLI::App* s : {s_sim, s_lsi, s_fp, s_fit, s_gc, s_val}) add_common(s, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    ConfigMap cfg = resolve(c);
    if (s_sim->parsed()) return cmd_simulate(cfg);
    if (s_lsi->parsed()) return cmd_lsi_bound(cfg);
    if (s_fp->parsed()) return cmd_fp_oracle(cfg);
    if (s_fit->parsed()) return cmd_fit_rate(cfg);
    if (s_gc->parsed()) return cmd_gradcheck(cfg);
    if (s_val->parsed()) return cmd_validate_specs(cfg);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericFault& e) {
    std::cerr << "numeric fault: " << e.what() << '\n';
    return 3;
  } catch (const ConvergenceFailure& e) {
    std::cerr << "convergence failure: " << e.what() << '\n';
    return 4;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
