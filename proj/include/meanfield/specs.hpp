#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>

namespace meanfield {

/// Ridge activation h(w,x) = g(<w,x>) together with the growth certificates
///   |h| <= C1 ||w|| + C2,   ||grad_w h|| <= C3,   ||hess_w h||_op <= C4
/// valid for ||x|| <= x_max. Factories fill the tightest closed-form
/// constants for each kind.
struct ActivationSpec {
  enum class Kind { kSmoothedRelu, kSigmoid, kTanh };

  Kind kind = Kind::kSmoothedRelu;
  double kappa = 4.0;  // sharpness, smoothed-relu only
  double x_max = 1.0;
  double C1 = 0, C2 = 0, C3 = 0, C4 = 0;

  static ActivationSpec smoothed_relu(double kappa = 4.0, double x_max = 1.0);
  static ActivationSpec sigmoid(double x_max = 1.0);
  static ActivationSpec tanh_unit(double x_max = 1.0);

  double g(double z) const;
  double dg(double z) const;
  double d2g(double z) const;

  std::string kind_name() const;
};

/// Loss phi(yhat, y), convex in yhat, with certificates
///   phi >= B_l,  |phi_1'| <= L1,  phi_1' L2-Lipschitz in yhat.
/// The clipped-square and huber values integrate their clamped gradient so
/// value and gradient stay consistent (the free energy dissipates exactly).
struct LossSpec {
  enum class Kind { kSquare, kClippedSquare, kHuber };

  Kind kind = Kind::kSquare;
  double L1 = std::numeric_limits<double>::infinity();
  double L2 = 1.0;
  double B_l = 0.0;

  static LossSpec square();
  static LossSpec clipped_square(double L1 = 10.0);
  static LossSpec huber(double L1 = 10.0);

  double value(double yhat, double y) const;
  double grad1(double yhat, double y) const;

  /// False when a certificate is vacuous (square loss has unbounded phi_1').
  bool bounded_gradient() const { return std::isfinite(L1); }

  std::string kind_name() const;
};

/// phi_1'(yhat, y); module-level alias for LossSpec::grad1.
double loss_grad(double yhat, double y, const LossSpec& loss);

/// Regularizer certificates (Assumption-style):
///   <theta, grad r> >= m ||theta||^{2+p} - b
///   (D1||theta|| + D2) I <= hess r <= (D3||theta||^p + D4) I
///   ||grad r|| >= D5 ||theta||^2 + D6
///   |r| <= D7 ||theta||^k + D8
/// Constants at the origin force D2 = D6 = 0 for pure power growth; the
/// validator treats the certificates as nonnegative reals.
struct RegularizerCert {
  double m = 0, b = 0, p = 1;
  double D1 = 0, D2 = 0, D3 = 0, D4 = 0;
  double D5 = 0, D6 = 0, D7 = 0, D8 = 0;
  double k = 3;
};

struct RegularizerSpec {
  enum class Kind { kPower, kQuartic, kQuadPlusCubic };

  Kind kind = Kind::kPower;
  double beta = 1.0;   // power / quartic coefficient
  double q = 2.0;      // power exponent, q >= 2
  double beta1 = 1.0;  // quad-plus-cubic
  double beta2 = 1.0;
  RegularizerCert cert;

  /// r(theta) = (beta/q) ||theta||^q
  static RegularizerSpec power(double beta, double q);
  /// r(theta) = beta ||theta||^4
  static RegularizerSpec quartic(double beta);
  /// r(theta) = (beta1/2) ||theta||^2 + (beta2/3) ||theta||^3
  static RegularizerSpec quad_plus_cubic(double beta1, double beta2);

  double value(const Eigen::VectorXd& theta) const;
  Eigen::VectorXd grad(const Eigen::VectorXd& theta) const;
  Eigen::MatrixXd hess(const Eigen::VectorXd& theta) const;

  std::string kind_name() const;
  std::string label() const;  // short tag used in output file names
};

/// Bundle passed to the potential / dynamics / objective operations.
struct ModelSpecs {
  ActivationSpec act;
  LossSpec loss;
  RegularizerSpec reg;
};

}  // namespace meanfield
