#pragma once

#include "meanfield/dynamics.hpp"
#include "meanfield/model.hpp"

namespace meanfield {

struct ObjectiveReport {
  double risk = 0;
  double reg_mean = 0;
  double entropy = 0;
  double Q = 0;
  int k_nn = 0;
};

/// (1/K) sum_k phi(f(rho, x_k), y_k)
double empirical_risk(const ParticleEnsemble& ens, const Dataset& data,
                      const ActivationSpec& act, const LossSpec& loss);

/// (1/N) sum_i r(theta_i)
double regularizer_mean(const ParticleEnsemble& ens, const RegularizerSpec& reg);

/// Kozachenko-Leonenko k-NN differential entropy of the particle cloud in
/// R^{d+1}. Duplicate points get a deterministic 1e-12 relative jitter; a
/// still-degenerate pair raises NumericFault. Requires N > k.
double entropy_knn(const ParticleEnsemble& ens, int k = 3);

/// Q = risk + reg_mean - lambda * entropy. With lambda = 0 the entropy term
/// is skipped entirely (entropy is reported as NaN when N <= k).
ObjectiveReport free_energy(const ParticleEnsemble& ens, const Dataset& data,
                            const ModelSpecs& specs, double lambda, int k = 3);

struct RateFit {
  double rate = 0;       // decay rate nu_hat: Q_t - Q* ~ e^{-rate t}
  double intercept = 0;  // fitted log(Q - Q*) at t = 0
  double r_squared = 0;
  double q_star = 0;
  double window_lo = 0, window_hi = 0;
  long n_points = 0;
};

/// Least squares on (t, log(Q_t - q_star)) over records with t in
/// [t_lo, t_hi]. Errors if the window is empty, has fewer than 3 points,
/// or contains Q <= q_star.
RateFit fit_decay_rate(const TrajectoryLog& log, double q_star, double t_lo,
                       double t_hi);

/// Same fit on raw (t, Q) samples; the TrajectoryLog overload delegates here.
RateFit fit_decay_rate(const std::vector<double>& t, const std::vector<double>& Q,
                       double q_star, double t_lo, double t_hi);

}  // namespace meanfield
