#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "meanfield/dynamics.hpp"
#include "meanfield/errors.hpp"
#include "meanfield/rng.hpp"
#include "meanfield/teacher.hpp"

using namespace meanfield;

namespace {

ModelSpecs default_specs() {
  return ModelSpecs{ActivationSpec::smoothed_relu(4.0, 1.0),
                    LossSpec::clipped_square(10.0), RegularizerSpec::quartic(1.0)};
}

Dataset teacher_data(int n, std::uint64_t seed, int d = 2) {
  TeacherSpec t;
  t.neurons = ParticleEnsemble(2, d);
  t.neurons.u(0) = 1.1;
  t.neurons.u(1) = -3.2;
  for (int j = 0; j < d; ++j) {
    t.neurons.w(0)(j) = (j == 0) ? 1.0 : 2.0;
    t.neurons.w(1)(j) = (j == 0) ? -3.0 : 1.0;
  }
  return make_teacher_dataset(t, n, seed);
}

}  // namespace

TEST_CASE("init_ensemble determinism and shape") {
  ParticleEnsemble a = init_ensemble(3, 2, 7);
  ParticleEnsemble b = init_ensemble(3, 2, 7);
  CHECK(a.raw() == b.raw());
  CHECK(a.size() == 3);
  CHECK(a.dim() == 3);

  ParticleEnsemble c = init_ensemble(3, 2, 8);
  CHECK(a.raw() != c.raw());

  ParticleEnsemble one = init_ensemble(1, 2, 0);
  CHECK(one.raw().allFinite());

  CHECK_THROWS_AS(init_ensemble(0, 2, 1), std::invalid_argument);
}

TEST_CASE("init_ensemble samples standard normals") {
  const int n = 10000;
  ParticleEnsemble ens = init_ensemble(n, 2, 4242);
  for (int j = 0; j < 3; ++j) {
    double mean = ens.raw().col(j).mean();
    double var = (ens.raw().col(j).array() - mean).square().sum() / (n - 1);
    CHECK(std::abs(mean) < 4.0 / std::sqrt(double(n)));
    CHECK(var == doctest::Approx(1.0).epsilon(0.08));
  }
}

TEST_CASE("em_step quartic drift closed form") {
  // single particle at theta = (w=0, u=1), quartic only: u' = 1 - 4 beta dt
  ModelSpecs specs = default_specs();
  ParticleEnsemble ens(1, 2);
  ens.u(0) = 1.0;
  double dt = 1e-3;
  em_step(ens, Dataset{}, specs, dt, 0.0, 0, 0);
  CHECK(ens.u(0) == doctest::Approx(1.0 - 4.0 * dt).epsilon(1e-14));
  CHECK(ens.w(0).norm() == doctest::Approx(0.0));
}

TEST_CASE("em_step identity cases") {
  ModelSpecs specs = default_specs();
  ParticleEnsemble ens = init_ensemble(4, 2, 3);
  Dataset data = teacher_data(5, 11);

  ParticleEnsemble before = ens;
  em_step(ens, data, specs, 0.0, 1.0, 9, 0);  // dt = 0 is the identity
  CHECK(ens.raw() == before.raw());

  // zero residuals + zero regularizer + lambda 0: nothing moves
  ModelSpecs zero = specs;
  zero.reg = RegularizerSpec::power(0.0, 2.0);
  Dataset fitted = data;
  fitted.y = predict(ens, fitted, zero.act);
  em_step(ens, fitted, zero, 1e-3, 0.0, 9, 0);
  CHECK((ens.raw() - before.raw()).lpNorm<Eigen::Infinity>() < 1e-15);

  CHECK_THROWS_AS(em_step(ens, data, specs, -1e-3, 0.0, 9, 0), std::invalid_argument);
  CHECK_THROWS_AS(em_step(ens, data, specs, 1e-3, -1.0, 9, 0), std::invalid_argument);
}

TEST_CASE("em_step is equivariant under particle permutation") {
  ModelSpecs specs = default_specs();
  Dataset data = teacher_data(6, 123);
  ParticleEnsemble ens = init_ensemble(6, 2, 55);
  std::vector<int> perm = {5, 2, 0, 4, 1, 3};
  ParticleEnsemble shuffled = ens.permuted(perm);

  em_step(ens, data, specs, 1e-3, 0.7, 321, 4);
  em_step(shuffled, data, specs, 1e-3, 0.7, 321, 4);

  // noise keys on particle ids, so the permuted run is the permuted result
  for (int i = 0; i < 6; ++i) {
    CHECK((shuffled.theta(i) - ens.theta(perm[i])).norm() ==
          doctest::Approx(0.0).epsilon(1e-15));
  }
}

TEST_CASE("lambda 0 single particle equals scalar gradient descent") {
  // d = 1, one data point: U(theta) is a plain scalar function; EM with
  // lambda = 0 must match a hand-rolled GD loop exactly.
  ModelSpecs specs{ActivationSpec::smoothed_relu(4.0, 1.0), LossSpec::square(),
                   RegularizerSpec::quad_plus_cubic(0.5, 0.25)};
  Dataset one;
  one.X.resize(1, 1);
  one.X << 0.9;
  one.y.resize(1);
  one.y << 0.4;

  ParticleEnsemble ens(1, 1);
  ens.w(0) << 0.3;
  ens.u(0) = -0.2;

  double w = 0.3, u = -0.2, dt = 1e-2;
  for (int s = 0; s < 50; ++s) {
    em_step(ens, one, specs, dt, 0.0, 0, s);
    double x = 0.9;
    double c = u * specs.act.g(w * x) - 0.4;  // residual of the own prediction
    Eigen::VectorXd th(2);
    th << w, u;
    Eigen::VectorXd gr = specs.reg.grad(th);
    double gw = c * u * specs.act.dg(w * x) * x + gr(0);
    double gu = c * specs.act.g(w * x) + gr(1);
    w -= dt * gw;
    u -= dt * gu;
    CHECK(ens.w(0)(0) == doctest::Approx(w).epsilon(1e-12));
    CHECK(ens.u(0) == doctest::Approx(u).epsilon(1e-12));
  }
}

TEST_CASE("pure diffusion grows variance at 2 lambda dt per step") {
  ModelSpecs specs = default_specs();
  specs.reg = RegularizerSpec::power(0.0, 2.0);
  const int n = 20000;
  const double lambda = 0.7, dt = 1e-2;
  const long T = 10;
  ParticleEnsemble ens(n, 1);  // all start at the origin
  for (long s = 0; s < T; ++s) em_step(ens, Dataset{}, specs, dt, lambda, 99, s);

  for (int j = 0; j < 2; ++j) {
    double mean = ens.raw().col(j).mean();
    double var = (ens.raw().col(j).array() - mean).square().sum() / (n - 1);
    double expect = 2.0 * lambda * dt * T;
    // chi-square 5-sigma band around the target variance
    double band = 5.0 * expect * std::sqrt(2.0 / (n - 1));
    CHECK(std::abs(var - expect) < band);
  }
}

TEST_CASE("em_step reports the faulting particle") {
  ModelSpecs specs = default_specs();
  ParticleEnsemble ens(2, 1);
  ens.u(0) = 0.01;
  ens.u(1) = 1e200;  // quartic drift at dt too big explodes this one
  try {
    for (long s = 0; s < 4; ++s) em_step(ens, Dataset{}, specs, 1.0, 0.0, 0, s);
    FAIL("expected NumericFault");
  } catch (const NumericFault& e) {
    CHECK(e.index() == 1);
    CHECK(e.step() >= 0);
  }
}

TEST_CASE("scheduled_dt halves on the decay schedule") {
  SimConfig cfg;
  cfg.dt = 1e-4;
  cfg.decay_every = 100;
  cfg.decay_factor = 0.5;
  CHECK(scheduled_dt(cfg, 0) == doctest::Approx(1e-4));
  CHECK(scheduled_dt(cfg, 99) == doctest::Approx(1e-4));
  CHECK(scheduled_dt(cfg, 100) == doctest::Approx(5e-5));
  CHECK(scheduled_dt(cfg, 250) == doctest::Approx(2.5e-5));
  cfg.decay_every = 0;
  CHECK(scheduled_dt(cfg, 1000000) == doctest::Approx(1e-4));
}

TEST_CASE("simulate records on the configured cadence") {
  ModelSpecs specs = default_specs();
  Dataset data = teacher_data(8, 5);
  SimConfig cfg;
  cfg.n_particles = 5;
  cfg.d = 2;
  cfg.lambda = 0.1;
  cfg.dt = 1e-3;
  cfg.steps = 10;
  cfg.record_every = 4;
  cfg.seed = 17;

  ParticleEnsemble ens = init_ensemble(cfg.n_particles, cfg.d, cfg.seed);
  TrajectoryLog log = simulate(ens, data, specs, cfg);
  // pre-step records at 0, 4, 8 plus the final state at step 10
  REQUIRE(log.records.size() == 4);
  CHECK(log.records[0].step == 0);
  CHECK(log.records[1].step == 4);
  CHECK(log.records[2].step == 8);
  CHECK(log.records[3].step == 10);
  for (size_t i = 1; i < log.records.size(); ++i)
    CHECK(log.records[i].t > log.records[i - 1].t);
  CHECK(log.records[0].t == doctest::Approx(0.0));
  CHECK(log.records.back().t == doctest::Approx(10 * cfg.dt).epsilon(1e-12));

  // steps = 0 leaves a single initial record
  SimConfig zero = cfg;
  zero.steps = 0;
  ParticleEnsemble ens0 = init_ensemble(cfg.n_particles, cfg.d, cfg.seed);
  TrajectoryLog log0 = simulate(ens0, data, specs, zero);
  REQUIRE(log0.records.size() == 1);
  CHECK(log0.records[0].step == 0);
  CHECK(ens0.raw() == init_ensemble(cfg.n_particles, cfg.d, cfg.seed).raw());

  CHECK_THROWS_AS(simulate(ens, Dataset{}, specs, cfg), std::invalid_argument);
}

TEST_CASE("simulate is deterministic and decreases Q without noise") {
  ModelSpecs specs = default_specs();
  Dataset data = teacher_data(12, 2024);
  SimConfig cfg;
  cfg.n_particles = 8;
  cfg.d = 2;
  cfg.lambda = 0.0;  // plain gradient descent on the free energy
  cfg.dt = 2e-3;
  cfg.steps = 400;
  cfg.record_every = 40;
  cfg.seed = 31;

  ParticleEnsemble e1 = init_ensemble(cfg.n_particles, cfg.d, cfg.seed);
  ParticleEnsemble e2 = init_ensemble(cfg.n_particles, cfg.d, cfg.seed);
  TrajectoryLog l1 = simulate(e1, data, specs, cfg);
  TrajectoryLog l2 = simulate(e2, data, specs, cfg);
  CHECK(e1.raw() == e2.raw());
  REQUIRE(l1.records.size() == l2.records.size());
  for (size_t i = 0; i < l1.records.size(); ++i)
    CHECK(l1.records[i].Q == l2.records[i].Q);

  for (size_t i = 1; i < l1.records.size(); ++i)
    CHECK(l1.records[i].Q <= l1.records[i - 1].Q + 1e-12);
  CHECK(l1.records.back().grad_norm_mean >= 0.0);
}

TEST_CASE("simulate batch slicing cycles through the dataset") {
  ModelSpecs specs = default_specs();
  Dataset data = teacher_data(10, 808);
  SimConfig cfg;
  cfg.n_particles = 4;
  cfg.d = 2;
  cfg.lambda = 0.0;
  cfg.dt = 1e-4;
  cfg.steps = 5;
  cfg.record_every = 0;  // only the final record
  cfg.batch = 2;
  cfg.seed = 12;

  ParticleEnsemble a = init_ensemble(cfg.n_particles, cfg.d, cfg.seed);
  simulate(a, data, specs, cfg);

  // manual replay: step s uses rows (2s mod 10) .. +2
  ParticleEnsemble b = init_ensemble(cfg.n_particles, cfg.d, cfg.seed);
  for (long s = 0; s < cfg.steps; ++s) {
    Dataset slice = data.rows(static_cast<int>((2 * s) % 10), 2);
    em_step(b, slice, specs, cfg.dt, cfg.lambda, cfg.seed, s);
  }
  CHECK((a.raw() - b.raw()).lpNorm<Eigen::Infinity>() == doctest::Approx(0.0));
}
