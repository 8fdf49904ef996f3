#pragma once

#include <cstdint>

#include "meanfield/specs.hpp"
#include "meanfield/types.hpp"

namespace meanfield {

/// Network output f(rho, x) = (1/N) sum_i u_i h(w_i, x).
double predict(const ParticleEnsemble& ens, const Eigen::VectorXd& x,
               const ActivationSpec& act);

/// Outputs for every row of data.X.
Eigen::VectorXd predict(const ParticleEnsemble& ens, const Dataset& data,
                        const ActivationSpec& act);

/// Residual weights c_k = phi_1'(f(rho, x_k), y_k). The potential and its
/// theta-derivatives are linear in these, so one evaluation per ensemble
/// serves every particle in a synchronous step.
struct ResidualWeights {
  Eigen::VectorXd c;
};
ResidualWeights residual_weights(const ParticleEnsemble& ens, const Dataset& data,
                                 const ActivationSpec& act, const LossSpec& loss);

/// U(theta, rho) = E_k[ c_k u h(w, x_k) ] + r(theta), rho frozen.
double potential_value(const Particle& theta, const ParticleEnsemble& ens,
                       const Dataset& data, const ModelSpecs& specs);
double potential_value(const Particle& theta, const ResidualWeights& rw,
                       const Dataset& data, const ModelSpecs& specs);

/// Gradient in the [w, u] flattening: E_k[ c_k (u grad_w h; h) ] + grad r.
Eigen::VectorXd potential_grad(const Particle& theta, const ParticleEnsemble& ens,
                               const Dataset& data, const ModelSpecs& specs);
Eigen::VectorXd potential_grad(const Particle& theta, const ResidualWeights& rw,
                               const Dataset& data, const ModelSpecs& specs);

/// Hessian blocks [[u hess_w h, grad_w h], [grad_w h^T, 0]] weighted by c_k,
/// plus hess r. Symmetric by construction.
Eigen::MatrixXd potential_hess(const Particle& theta, const ParticleEnsemble& ens,
                               const Dataset& data, const ModelSpecs& specs);
Eigen::MatrixXd potential_hess(const Particle& theta, const ResidualWeights& rw,
                               const Dataset& data, const ModelSpecs& specs);

/// Sampled check of the activation growth certificates over ||w|| <= radius,
/// ||x|| <= x_max. Ratios are observed/bound; pass means no ratio exceeded
/// 1 + 1e-9. Deterministic extreme probes (aligned w, x) are always included.
struct ActivationValidationReport {
  double worst_value_ratio = 0;
  double worst_grad_ratio = 0;
  double worst_hess_ratio = 0;
  long violations = 0;
  bool pass = true;
};
ActivationValidationReport validate_activation(const ActivationSpec& act, int d,
                                               double radius, int trials,
                                               std::uint64_t seed);

/// Sampled check of the regularizer certificates over ||theta|| <= radius.
/// Margins are (satisfied side) - (required side); negative means violated.
struct RegularizerValidationReport {
  double worst_dissip_margin = 0;
  double worst_hess_lo_margin = 0;
  double worst_hess_hi_margin = 0;
  double worst_grad_margin = 0;
  double worst_value_margin = 0;
  bool ok_dissip = true, ok_hess_lo = true, ok_hess_hi = true;
  bool ok_grad = true, ok_value = true;
  long violations = 0;
  bool pass = true;
};
RegularizerValidationReport validate_regularizer(const RegularizerSpec& reg, int d,
                                                 double radius, int trials,
                                                 std::uint64_t seed);

}  // namespace meanfield
