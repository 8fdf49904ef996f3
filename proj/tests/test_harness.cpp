#include <doctest.h>
#include <json.hpp>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "meanfield/config.hpp"
#include "meanfield/experiment.hpp"
#include "meanfield/io.hpp"
#include "meanfield/teacher.hpp"

using namespace meanfield;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("mf_test_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

int run_cli(const std::string& args) {
  std::string cmd = std::string(MFSIM_PATH) + " " + args + " > /dev/null 2>&1";
  int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

const char* kTinyConfig =
    "schema = 1\n"
    "name = tiny\n"
    "arms = quartic:1\n"
    "teacher_neurons = 0.5:1:0\n"
    "n_particles = 8\n"
    "d = 2\n"
    "steps = 40\n"
    "dt = 1e-3\n"
    "record_every = 10\n"
    "samples_per_epoch = 16\n"
    "seed = 3\n";

}  // namespace

TEST_CASE("config text parsing") {
  ConfigMap cfg = parse_config_text(
      "# comment\n"
      "schema = 1\n"
      "\n"
      "lambda = 0.25\n"
      "steps = 500\n"
      "emit_csv = false\n",
      "inline");
  CHECK(cfg.get_num("lambda", 1.0) == doctest::Approx(0.25));
  CHECK(cfg.get_int("steps", 0) == 500);
  CHECK(cfg.get_flag("emit_csv", true) == false);
  CHECK(cfg.get_str("name", "fallback") == "fallback");

  CHECK_THROWS_WITH_AS(parse_config_text("lambda = 1\n", "x"),
                       doctest::Contains("schema"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("schema = 1\nwat = 1\n", "x"),
                       doctest::Contains("x:2: unknown key 'wat'"), ConfigError);
  CHECK_THROWS_WITH_AS(
      parse_config_text("schema = 1\nsteps = 1\nsteps = 2\n", "x"),
      doctest::Contains("duplicate"), ConfigError);
  CHECK_THROWS_WITH_AS(parse_config_text("schema = 1\nnonsense\n", "x"),
                       doctest::Contains("expected key = value"), ConfigError);
  CHECK_THROWS_AS(load_config("/no/such/file.conf"), ConfigError);

  apply_override(cfg, "lambda=2.5");
  CHECK(cfg.get_num("lambda", 0) == doctest::Approx(2.5));
  CHECK_THROWS_AS(apply_override(cfg, "wat=1"), ConfigError);
  CHECK_THROWS_AS(apply_override(cfg, "lambda"), ConfigError);
  CHECK_THROWS_AS(cfg.get_num("emit_csv", 0), ConfigError);
}

TEST_CASE("arm and teacher syntax") {
  auto arms = parse_arms("power:1:2,quartic:0.5,quadcubic:1:2,power:2:5");
  REQUIRE(arms.size() == 4);
  CHECK(arms[0].label() == "quad");
  CHECK(arms[1].label() == "quartic");
  CHECK(arms[2].label() == "quadcubic");
  CHECK(arms[3].label() == "power5");
  CHECK_THROWS_AS(parse_arms("power:1"), ConfigError);
  CHECK_THROWS_AS(parse_arms("mystery:1:2"), ConfigError);
  CHECK_THROWS_AS(parse_arms("power:1:1.5"), ConfigError);

  ParticleEnsemble t = parse_teacher_neurons("1.1:1:2,-3.2:-3:1");
  REQUIRE(t.size() == 2);
  CHECK(t.input_dim() == 2);
  CHECK(t.u(0) == doctest::Approx(1.1));
  CHECK(t.w(1)[0] == doctest::Approx(-3.0));
  CHECK_THROWS_AS(parse_teacher_neurons("1.1"), ConfigError);
  CHECK_THROWS_AS(parse_teacher_neurons("1:2:3,1:2"), ConfigError);
}

TEST_CASE("parse_experiment fills documented defaults") {
  ExperimentConfig ec = parse_experiment(parse_config_text("schema = 1\n", "x"));
  CHECK(ec.sim.n_particles == 20);
  CHECK(ec.sim.d == 2);
  CHECK(ec.sim.lambda == doctest::Approx(1.0));
  CHECK(ec.grid.n_u == 128);
  CHECK(ec.grid.u_lo == doctest::Approx(-6.0));
  CHECK(ec.grid.w_hi == doctest::Approx(6.0));
  REQUIRE(ec.regularizers.size() == 2);
  CHECK(ec.regularizers[0].label() == "quad");
  CHECK(ec.regularizers[1].label() == "cubic");
  CHECK(ec.teacher.neurons.size() == 2);
  CHECK(ec.teacher.mean_normalize);
  CHECK(ec.teacher.law == InputLaw::kSphere);
  CHECK(ec.lsi_route == "both");

  CHECK_THROWS_AS(
      parse_experiment(parse_config_text("schema = 1\nloss = exotic\n", "x")),
      ConfigError);
  CHECK_THROWS_AS(
      parse_experiment(parse_config_text("schema = 1\narms = \n", "x")),
      ConfigError);
}

TEST_CASE("teacher datasets") {
  TeacherSpec t;
  t.neurons = parse_teacher_neurons("1.1:1:2,-3.2:-3:1");
  Dataset a = make_teacher_dataset(t, 64, 11);
  Dataset b = make_teacher_dataset(t, 64, 11);
  CHECK(a.X == b.X);
  CHECK(a.y == b.y);
  CHECK(a.n() == 64);
  CHECK(a.d() == 2);
  for (int i = 0; i < a.n(); ++i)
    CHECK(a.X.row(i).norm() == doctest::Approx(1.0).epsilon(1e-12));

  // sample i is a pure function of (seed, i): a prefix is reproduced
  Dataset pre = make_teacher_dataset(t, 16, 11);
  CHECK(pre.X == a.X.topRows(16));

  t.law = InputLaw::kBall;
  t.x_max = 0.7;
  Dataset ball = make_teacher_dataset(t, 64, 11);
  for (int i = 0; i < ball.n(); ++i) CHECK(ball.X.row(i).norm() <= 0.7 + 1e-12);

  t.law = InputLaw::kGaussianClipped;
  Dataset gc = make_teacher_dataset(t, 64, 11);
  for (int i = 0; i < gc.n(); ++i) CHECK(gc.X.row(i).norm() <= 0.7 + 1e-12);

  // labels follow the teacher sum convention
  TeacherSpec mean = t;
  mean.law = InputLaw::kSphere;
  TeacherSpec sum = mean;
  sum.mean_normalize = false;
  Dataset dm = make_teacher_dataset(mean, 32, 5);
  Dataset ds = make_teacher_dataset(sum, 32, 5);
  for (int i = 0; i < 32; ++i)
    CHECK(ds.y[i] == doctest::Approx(2.0 * dm.y[i]).epsilon(1e-13));

  TeacherSpec silent = mean;
  for (int i = 0; i < silent.neurons.size(); ++i) silent.neurons.u(i) = 0.0;
  Dataset zero = make_teacher_dataset(silent, 16, 5);
  CHECK(zero.y.cwiseAbs().maxCoeff() == 0.0);

  CHECK(epoch_data_seed(9, 0) == epoch_data_seed(9, 0));
  CHECK(epoch_data_seed(9, 0) != epoch_data_seed(9, 1));
  CHECK(epoch_data_seed(9, 3) != epoch_data_seed(10, 3));
}

TEST_CASE("trajectory and ensemble round trips") {
  fs::path dir = fresh_dir("io");

  TrajectoryLog log;
  for (int i = 0; i < 4; ++i) {
    TrajectoryRecord r;
    r.step = i * 7;
    r.t = i / 3.0;
    r.Q = std::pow(-1.0, i) * 1e-17 + 1.0;
    r.risk = 0.25 * i;
    r.reg_mean = 1.0 / (i + 1);
    r.entropy = (i == 0) ? std::nan("") : -0.5 * i;
    r.grad_norm_mean = 3e8 * i;
    log.records.push_back(r);
  }
  fs::path csv = dir / "traj.csv";
  write_trajectory_csv(log, csv.string());
  TrajectoryLog back = read_trajectory_csv(csv.string());
  REQUIRE(back.records.size() == 4);
  CHECK(back.records[3].Q == log.records[3].Q);
  CHECK(back.records[1].t == log.records[1].t);
  CHECK(std::isnan(back.records[0].entropy));
  fs::path csv2 = dir / "traj2.csv";
  write_trajectory_csv(back, csv2.string());
  CHECK(slurp(csv) == slurp(csv2));

  ParticleEnsemble ens = init_ensemble(5, 2, 9);
  ens.ids()[2] = 77;
  fs::path ej = dir / "ens.json";
  write_ensemble_json(ens, ej.string());
  ParticleEnsemble eback = read_ensemble_json(ej.string());
  CHECK(eback.raw() == ens.raw());
  CHECK(eback.ids() == ens.ids());

  GridDensity g = make_grid(4, 6, -1.5, 1.5, -2, 2);
  fill_gaussian(g, 0.1, -0.2, 0.6);
  fs::path gc = dir / "grid.csv";
  fs::path gb = dir / "grid.bin";
  write_grid_csv(g, gc.string());
  write_grid_binary(g, gb.string());
  GridDensity gcsv = read_grid_csv(gc.string());
  GridDensity gbin = read_grid_binary(gb.string());
  CHECK(gcsv.u_lo == g.u_lo);
  CHECK(gcsv.w_hi == g.w_hi);
  CHECK((gcsv.rho == g.rho).all());
  CHECK((gbin.rho == g.rho).all());

  fs::remove_all(dir);
}

TEST_CASE("scatter, ratefit and lsi artifacts") {
  fs::path dir = fresh_dir("artifacts");

  ParticleEnsemble ens(2, 2);
  ens.u(0) = 2.0;
  ens.w(0) << 3.0, -1.0;
  ens.u(1) = -4.0;
  ens.w(1) << 0.5, 0.25;
  fs::path sc = dir / "scatter.csv";
  write_scatter_csv(ens, sc.string(), false);
  std::string text = slurp(sc);
  CHECK(text.substr(0, text.find('\n')) == "u,w1,w2,uw1,uw2");
  CHECK(text.find("2,3,-1,6,-2") != std::string::npos);

  fs::path scs = dir / "scatter_scaled.csv";
  write_scatter_csv(ens, scs.string(), true);
  CHECK(slurp(scs).find("2,3,-1,3,-1") != std::string::npos);  // uw block / N

  RateFit fit;
  fit.rate = 6.5;
  fit.intercept = -0.25;
  fit.r_squared = 0.999;
  fit.q_star = 1.5;
  fit.window_lo = 0.1;
  fit.window_hi = 0.6;
  fit.n_points = 42;
  fs::path rf = dir / "fit.json";
  write_ratefit_json(fit, rf.string());
  nlohmann::json jf = nlohmann::json::parse(slurp(rf));
  CHECK(jf.at("rate").get<double>() == doctest::Approx(6.5));
  CHECK(jf.at("n_points").get<long>() == 42);

  std::vector<LsiBoundReport> reps;
  reps.push_back(quartic_bound(1.0, 1.0, 2, 1.0, 1.0, 1.0, 1.0));
  LyapunovConstants lc;
  lc.d = 1;
  lc.p = 2;
  lc.m = 100;
  lc.D4 = 1.0;
  lc.D3 = 0.01;
  reps.push_back(lyapunov_bound(lyapunov_constants(lc), 1.0));
  fs::path lj = dir / "lsi.json";
  write_lsi_json(reps, lj.string());
  nlohmann::json ja = nlohmann::json::parse(slurp(lj));
  REQUIRE(ja.is_array());
  REQUIRE(ja.size() == 2);
  CHECK(ja[0].at("route").get<std::string>() == "quartic-holley-stroock");
  CHECK(ja[0].at("nu").get<std::string>() == "inf");
  CHECK(ja[0].at("overflow").get<bool>());
  CHECK(ja[1].at("route").get<std::string>() == "lyapunov");
  CHECK(ja[1].at("intermediates").at("r_star").get<double>() > 0);

  std::string md = schema_markdown();
  for (const auto& [key, desc] : config_schema()) {
    CAPTURE(key);
    CHECK(md.find(key) != std::string::npos);
  }

  fs::remove_all(dir);
}

TEST_CASE("run_experiment writes per-arm artifacts deterministically") {
  fs::path dir1 = fresh_dir("exp1");
  ConfigMap cfg = parse_config_text(kTinyConfig, "tiny");
  ExperimentConfig ec = parse_experiment(cfg);
  ec.outdir = dir1.string();

  ExperimentResult res = run_experiment(ec);
  REQUIRE(res.arms.size() == 1);
  const ArmResult& arm = res.arms[0];
  CHECK(arm.label == "quartic");
  CHECK(arm.log.records.size() == 5);  // steps 0,10,20,30,40
  CHECK(arm.log.records.back().step == 40);
  CHECK(!arm.fit_ok);  // 2 records inside [0.1 T, 0.6 T] is too few
  CHECK(!arm.fit_note.empty());
  CHECK(arm.bounds.size() >= 2);  // quartic route + lyapunov route
  for (const fs::path name :
       {"trajectory_quartic.csv", "snapshots_quartic.json", "lsi_quartic.json",
        "neurons_quartic.csv", "neurons_quartic_scaled.csv", "teacher.csv",
        "schema.md"})
    CHECK(fs::exists(dir1 / name));

  // byte-identical rerun into a second directory
  fs::path dir2 = fresh_dir("exp2");
  ec.outdir = dir2.string();
  run_experiment(ec);
  CHECK(slurp(dir1 / "trajectory_quartic.csv") ==
        slurp(dir2 / "trajectory_quartic.csv"));

  fs::remove_all(dir1);
  fs::remove_all(dir2);
}

TEST_CASE("arm isolation and failure paths") {
  fs::path dir = fresh_dir("arms");
  ConfigMap cfg = parse_config_text(kTinyConfig, "tiny");
  apply_override(cfg, "arms=quartic:1,power:1:3");
  apply_override(cfg, "steps=0");
  ExperimentConfig ec = parse_experiment(cfg);
  ec.outdir = dir.string();

  ExperimentResult res = run_experiment(ec);
  REQUIRE(res.arms.size() == 2);
  // both arms start from the bit-identical initial ensemble
  CHECK(res.arms[0].final_ensemble.raw() == res.arms[1].final_ensemble.raw());
  CHECK(fs::exists(dir / "trajectory_quartic.csv"));
  CHECK(fs::exists(dir / "trajectory_cubic.csv"));

  fs::path blocker = dir / "blocker";
  spit(blocker, "not a directory");
  ec.outdir = (blocker / "sub").string();
  CHECK_THROWS_AS(run_experiment(ec), std::runtime_error);

  ExperimentConfig empty = ec;
  empty.outdir = dir.string();
  empty.regularizers.clear();
  CHECK_THROWS_AS(run_experiment(empty), ConfigError);

  fs::remove_all(dir);
}

TEST_CASE("cli exit codes") {
  fs::path dir = fresh_dir("cli");
  fs::path good = dir / "good.conf";
  spit(good, kTinyConfig);
  fs::path bad = dir / "bad.conf";
  spit(bad, "schema = 1\nbogus = 3\n");

  CHECK(run_cli("simulate --config " + good.string() +
                " --set outdir=" + (dir / "out").string()) == 0);
  CHECK(fs::exists(dir / "out" / "trajectory_quartic.csv"));
  CHECK(run_cli("simulate --config " + bad.string()) == 2);
  CHECK(run_cli("simulate --config " + good.string() + " --set wat=1") == 2);
  CHECK(run_cli("") != 0);          // a subcommand is required
  CHECK(run_cli("--help") == 0);

  fs::remove_all(dir);
}
