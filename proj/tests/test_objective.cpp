#include <doctest.h>

#include <cmath>
#include <vector>

#include "meanfield/dynamics.hpp"
#include "meanfield/objective.hpp"
#include "meanfield/rng.hpp"

using namespace meanfield;

namespace {

ModelSpecs default_specs() {
  return ModelSpecs{ActivationSpec::smoothed_relu(4.0, 1.0),
                    LossSpec::clipped_square(10.0), RegularizerSpec::quartic(1.0)};
}

ParticleEnsemble gaussian_cloud(int n, int d, std::uint64_t seed, double sd = 1.0) {
  ParticleEnsemble ens = init_ensemble(n, d, seed);
  ens.raw() *= sd;
  return ens;
}

}  // namespace

TEST_CASE("empirical risk basics") {
  ModelSpecs specs = default_specs();
  specs.loss = LossSpec::square();
  ParticleEnsemble ens = init_ensemble(5, 2, 3);
  Dataset data;
  data.X.resize(3, 2);
  data.X << 0.1, 0.2, -0.5, 0.3, 0.0, 0.9;
  data.y = predict(ens, data, specs.act);
  CHECK(empirical_risk(ens, data, specs.act, specs.loss) ==
        doctest::Approx(0.0).epsilon(1e-15));

  // zero output weights predict 0, so risk = mean(y^2) / 2
  ParticleEnsemble zeros = ens;
  for (int i = 0; i < zeros.size(); ++i) zeros.u(i) = 0.0;
  data.y << 1.0, -2.0, 0.5;
  CHECK(empirical_risk(zeros, data, specs.act, specs.loss) ==
        doctest::Approx((1.0 + 4.0 + 0.25) / 6.0).epsilon(1e-14));

  // independent re-summation
  double acc = 0.0;
  Eigen::VectorXd f = predict(ens, data, specs.act);
  for (int k = 0; k < 3; ++k) acc += specs.loss.value(f(k), data.y(k));
  CHECK(empirical_risk(ens, data, specs.act, specs.loss) ==
        doctest::Approx(acc / 3.0).epsilon(1e-15));

  CHECK_THROWS_AS(empirical_risk(ens, Dataset{}, specs.act, specs.loss),
                  std::invalid_argument);
}

TEST_CASE("regularizer mean") {
  RegularizerSpec quartic = RegularizerSpec::quartic(1.0);
  ParticleEnsemble origin(4, 2);
  CHECK(regularizer_mean(origin, quartic) == doctest::Approx(0.0));

  ParticleEnsemble one(1, 1);
  one.w(0) << 2.0;  // ||theta|| = 2 -> beta ||theta||^4 = 16
  CHECK(regularizer_mean(one, quartic) == doctest::Approx(16.0).epsilon(1e-13));

  ParticleEnsemble mixed = init_ensemble(9, 2, 5);
  double acc = 0.0;
  for (int i = 0; i < 9; ++i) acc += quartic.value(mixed.theta(i).transpose());
  CHECK(regularizer_mean(mixed, quartic) == doctest::Approx(acc / 9.0).epsilon(1e-15));
}

TEST_CASE("entropy_knn closed-form two-point oracle") {
  // two points at distance a in R^2, k = 1:
  // H = psi(2) - psi(1) + ln(pi) + (2/2)(ln a + ln a) = 1 + ln(pi) + 2 ln a
  for (double a : {0.5, 1.0, 3.0}) {
    ParticleEnsemble ens(2, 1);
    ens.w(1) << a;
    CHECK(entropy_knn(ens, 1) ==
          doctest::Approx(1.0 + std::log(3.14159265358979323846) + 2.0 * std::log(a))
              .epsilon(1e-12));
  }
}

TEST_CASE("entropy_knn invariances") {
  ParticleEnsemble ens = gaussian_cloud(500, 2, 17);
  double h = entropy_knn(ens, 3);

  ParticleEnsemble shifted = ens;
  shifted.raw().array() += 42.0;
  CHECK(entropy_knn(shifted, 3) == doctest::Approx(h).epsilon(1e-10));

  ParticleEnsemble scaled = ens;
  scaled.raw() *= 2.0;
  CHECK(entropy_knn(scaled, 3) ==
        doctest::Approx(h + 3.0 * std::log(2.0)).epsilon(1e-10));
}

TEST_CASE("entropy_knn statistical calibration (small N)") {
  // standard normal in R^3: H = (3/2) ln(2 pi e)
  ParticleEnsemble normal = gaussian_cloud(4000, 2, 99);
  CHECK(entropy_knn(normal, 3) ==
        doctest::Approx(1.5 * std::log(2.0 * 3.14159265358979323846 * std::exp(1.0)))
            .epsilon(0.03));

  // uniform on [0,1]^3: H = 0
  ParticleEnsemble cube(4000, 2);
  Substream rng(7, StreamPurpose::kSampler);
  for (int i = 0; i < cube.size(); ++i)
    for (int j = 0; j < 3; ++j) cube.raw()(i, j) = rng.next_uniform();
  CHECK(std::abs(entropy_knn(cube, 1)) < 0.1);
}

TEST_CASE("entropy_knn guards") {
  ParticleEnsemble ens = gaussian_cloud(5, 1, 3);
  CHECK_THROWS_AS(entropy_knn(ens, 5), std::invalid_argument);  // N = k
  CHECK_THROWS_AS(entropy_knn(ens, 0), std::invalid_argument);

  // exact duplicates survive via deterministic jitter
  ParticleEnsemble dup(4, 1);
  dup.raw() << 1.0, 2.0, 1.0, 2.0, 0.5, 0.5, 0.5, 0.5;
  double h = entropy_knn(dup, 1);
  CHECK(std::isfinite(h));
}

TEST_CASE("free energy composition") {
  ModelSpecs specs = default_specs();
  ParticleEnsemble ens = gaussian_cloud(50, 2, 23);
  Dataset data;
  data.X.resize(4, 2);
  data.X << 0.1, 0.0, 0.3, -0.2, -0.6, 0.1, 0.2, 0.2;
  data.y.resize(4);
  data.y << 0.5, -0.1, 0.0, 1.2;

  ObjectiveReport rep = free_energy(ens, data, specs, 0.7, 3);
  CHECK(rep.Q - rep.risk - rep.reg_mean + 0.7 * rep.entropy ==
        doctest::Approx(0.0).epsilon(1e-12));
  CHECK(rep.k_nn == 3);
  CHECK(rep.risk >= specs.loss.B_l);

  ObjectiveReport nolam = free_energy(ens, data, specs, 0.0, 3);
  CHECK(nolam.Q == doctest::Approx(nolam.risk + nolam.reg_mean).epsilon(1e-15));

  // lambda = 0 works even when the cloud is too small for the estimator
  ParticleEnsemble tiny = gaussian_cloud(2, 2, 1);
  ObjectiveReport small = free_energy(tiny, data, specs, 0.0, 3);
  CHECK(std::isnan(small.entropy));
  CHECK(small.Q == doctest::Approx(small.risk + small.reg_mean));
}

TEST_CASE("fit_decay_rate on exact exponentials") {
  std::vector<double> t, Q;
  for (int i = 0; i <= 100; ++i) {
    double ti = 0.01 * i;
    t.push_back(ti);
    Q.push_back(2.0 + std::exp(-3.0 * ti));
  }
  RateFit fit = fit_decay_rate(t, Q, 2.0, 0.1, 0.9);
  CHECK(fit.rate == doctest::Approx(3.0).epsilon(1e-10));
  CHECK(fit.r_squared == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.q_star == doctest::Approx(2.0));
  CHECK(fit.n_points >= 3);

  // time reindexing t -> t + 5 keeps the slope
  std::vector<double> ts = t;
  for (double& v : ts) v += 5.0;
  RateFit shifted = fit_decay_rate(ts, Q, 2.0, 5.1, 5.9);
  CHECK(shifted.rate == doctest::Approx(fit.rate).epsilon(1e-10));

  // seeded noise keeps the estimate within 1%
  Substream rng(4, StreamPurpose::kProbe);
  std::vector<double> Qn = Q;
  for (size_t i = 0; i < Qn.size(); ++i)
    Qn[i] += 1e-4 * (Qn[i] - 2.0) * rng.next_normal();
  RateFit noisy = fit_decay_rate(t, Qn, 2.0, 0.1, 0.9);
  CHECK(noisy.rate == doctest::Approx(3.0).epsilon(0.01));
}

TEST_CASE("fit_decay_rate error contract") {
  std::vector<double> t = {0.0, 0.1, 0.2, 0.3};
  std::vector<double> Q = {3.0, 2.5, 2.2, 2.1};
  CHECK_THROWS_AS(fit_decay_rate(t, Q, 2.0, 5.0, 6.0), std::invalid_argument);
  CHECK_THROWS_AS(fit_decay_rate(t, Q, 2.2, 0.0, 0.3), std::invalid_argument);
  CHECK_THROWS_AS(fit_decay_rate(t, Q, 2.0, 0.3, 0.0), std::invalid_argument);
  std::vector<double> bad = {3.0, 2.5};
  CHECK_THROWS_AS(fit_decay_rate(t, bad, 2.0, 0.0, 0.3), std::invalid_argument);

  // TrajectoryLog overload delegates to the raw fit
  TrajectoryLog log;
  for (int i = 0; i <= 50; ++i) {
    TrajectoryRecord r;
    r.step = i;
    r.t = 0.02 * i;
    r.Q = 1.0 + 4.0 * std::exp(-2.0 * r.t);
    log.records.push_back(r);
  }
  RateFit f = fit_decay_rate(log, 1.0, 0.1, 0.9);
  CHECK(f.rate == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(f.intercept == doctest::Approx(std::log(4.0)).epsilon(1e-10));
}
