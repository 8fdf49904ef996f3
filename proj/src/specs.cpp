#include "meanfield/specs.hpp"

#include <stdexcept>

namespace meanfield {

namespace {
double sigmoid_stable(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  double e = std::exp(t);
  return e / (1.0 + e);
}
}  // namespace

ActivationSpec ActivationSpec::smoothed_relu(double kappa, double x_max) {
  if (!(kappa > 0)) throw std::invalid_argument("smoothed_relu: kappa must be > 0");
  if (!(x_max > 0)) throw std::invalid_argument("smoothed_relu: x_max must be > 0");
  ActivationSpec a;
  a.kind = Kind::kSmoothedRelu;
  a.kappa = kappa;
  a.x_max = x_max;
  a.C1 = x_max;
  a.C2 = std::log(2.0) / kappa;
  a.C3 = x_max;
  a.C4 = 0.25 * kappa * x_max * x_max;
  return a;
}

ActivationSpec ActivationSpec::sigmoid(double x_max) {
  if (!(x_max > 0)) throw std::invalid_argument("sigmoid: x_max must be > 0");
  ActivationSpec a;
  a.kind = Kind::kSigmoid;
  a.x_max = x_max;
  a.C1 = 0.0;
  a.C2 = 1.0;
  a.C3 = 0.25 * x_max;
  // sup |sigma''| = sqrt(3)/18, attained at sigma = (3 - sqrt(3))/6
  a.C4 = (std::sqrt(3.0) / 18.0) * x_max * x_max;
  return a;
}

ActivationSpec ActivationSpec::tanh_unit(double x_max) {
  if (!(x_max > 0)) throw std::invalid_argument("tanh_unit: x_max must be > 0");
  ActivationSpec a;
  a.kind = Kind::kTanh;
  a.x_max = x_max;
  a.C1 = 0.0;
  a.C2 = 1.0;
  a.C3 = x_max;
  // sup |tanh''| = 4/(3 sqrt(3)), attained at tanh = 1/sqrt(3)
  a.C4 = (4.0 / (3.0 * std::sqrt(3.0))) * x_max * x_max;
  return a;
}

double ActivationSpec::g(double z) const {
  switch (kind) {
    case Kind::kSmoothedRelu: {
      // (1/kappa) ln(1 + e^{kappa z}), evaluated without overflow
      double t = kappa * z;
      if (t > 0) return z + std::log1p(std::exp(-t)) / kappa;
      return std::log1p(std::exp(t)) / kappa;
    }
    case Kind::kSigmoid:
      return sigmoid_stable(z);
    case Kind::kTanh:
      return std::tanh(z);
  }
  return 0;
}

double ActivationSpec::dg(double z) const {
  switch (kind) {
    case Kind::kSmoothedRelu:
      return sigmoid_stable(kappa * z);
    case Kind::kSigmoid: {
      double s = sigmoid_stable(z);
      return s * (1.0 - s);
    }
    case Kind::kTanh: {
      double t = std::tanh(z);
      return 1.0 - t * t;
    }
  }
  return 0;
}

double ActivationSpec::d2g(double z) const {
  switch (kind) {
    case Kind::kSmoothedRelu: {
      double s = sigmoid_stable(kappa * z);
      return kappa * s * (1.0 - s);
    }
    case Kind::kSigmoid: {
      double s = sigmoid_stable(z);
      return s * (1.0 - s) * (1.0 - 2.0 * s);
    }
    case Kind::kTanh: {
      double t = std::tanh(z);
      return -2.0 * t * (1.0 - t * t);
    }
  }
  return 0;
}

std::string ActivationSpec::kind_name() const {
  switch (kind) {
    case Kind::kSmoothedRelu: return "smoothed-relu";
    case Kind::kSigmoid: return "sigmoid";
    case Kind::kTanh: return "tanh";
  }
  return "?";
}

LossSpec LossSpec::square() {
  LossSpec l;
  l.kind = Kind::kSquare;
  l.L1 = std::numeric_limits<double>::infinity();
  l.L2 = 1.0;
  l.B_l = 0.0;
  return l;
}

LossSpec LossSpec::clipped_square(double L1) {
  if (!(L1 > 0)) throw std::invalid_argument("clipped_square: L1 must be > 0");
  LossSpec l;
  l.kind = Kind::kClippedSquare;
  l.L1 = L1;
  l.L2 = 1.0;
  l.B_l = 0.0;
  return l;
}

LossSpec LossSpec::huber(double L1) {
  if (!(L1 > 0)) throw std::invalid_argument("huber: L1 must be > 0");
  LossSpec l;
  l.kind = Kind::kHuber;
  l.L1 = L1;
  l.L2 = 1.0;
  l.B_l = 0.0;
  return l;
}

double LossSpec::value(double yhat, double y) const {
  double r = yhat - y;
  switch (kind) {
    case Kind::kSquare:
      return 0.5 * r * r;
    case Kind::kClippedSquare:
    case Kind::kHuber: {
      double a = std::abs(r);
      if (a <= L1) return 0.5 * r * r;
      return L1 * a - 0.5 * L1 * L1;
    }
  }
  return 0;
}

double LossSpec::grad1(double yhat, double y) const {
  double r = yhat - y;
  switch (kind) {
    case Kind::kSquare:
      return r;
    case Kind::kClippedSquare:
    case Kind::kHuber:
      return std::clamp(r, -L1, L1);
  }
  return 0;
}

std::string LossSpec::kind_name() const {
  switch (kind) {
    case Kind::kSquare: return "square";
    case Kind::kClippedSquare: return "clipped-square";
    case Kind::kHuber: return "huber";
  }
  return "?";
}

double loss_grad(double yhat, double y, const LossSpec& loss) {
  return loss.grad1(yhat, y);
}

RegularizerSpec RegularizerSpec::power(double beta, double q) {
  if (!(beta >= 0)) throw std::invalid_argument("power: beta must be >= 0");
  if (!(q >= 2)) throw std::invalid_argument("power: q must be >= 2");
  RegularizerSpec r;
  r.kind = Kind::kPower;
  r.beta = beta;
  r.q = q;
  RegularizerCert& c = r.cert;
  // <theta, grad r> = beta ||theta||^q; exact for q >= 3, vacuous for q = 2
  // (p must stay >= 1, so the q = 2 certificate is knowingly violated and
  // the validator reports it).
  c.p = std::max(q - 2.0, 1.0);
  c.m = beta;
  c.b = 0.0;
  // hess eigenvalues: beta n^{q-2} and beta (q-1) n^{q-2}
  if (q == 2.0) {
    c.D1 = 0.0;
    c.D2 = beta;
    c.D3 = 0.0;
    c.D4 = beta;
  } else if (q == 3.0) {
    c.D1 = beta;
    c.D2 = 0.0;
    c.D3 = (q - 1.0) * beta;
    c.D4 = 0.0;
  } else {
    // min eigenvalue beta n^{q-2} has no positive linear lower bound near 0
    c.D1 = 0.0;
    c.D2 = 0.0;
    c.D3 = (q - 1.0) * beta;
    c.D4 = 0.0;
  }
  // ||grad r|| = beta n^{q-1}; only q = 3 admits D5 > 0
  c.D5 = (q == 3.0) ? beta : 0.0;
  c.D6 = 0.0;
  if (q >= 3.0) {
    c.k = q;
    c.D7 = beta / q;
    c.D8 = 0.0;
  } else {
    // (beta/2) s^2 <= (beta/2)(s^3 + 1)
    c.k = 3.0;
    c.D7 = 0.5 * beta;
    c.D8 = 0.5 * beta;
  }
  return r;
}

RegularizerSpec RegularizerSpec::quartic(double beta) {
  if (!(beta > 0)) throw std::invalid_argument("quartic: beta must be > 0");
  RegularizerSpec r;
  r.kind = Kind::kQuartic;
  r.beta = beta;
  RegularizerCert& c = r.cert;
  c.m = 4.0 * beta;
  c.b = 0.0;
  c.p = 2.0;
  c.D1 = 0.0;
  c.D2 = 0.0;
  c.D3 = 12.0 * beta;  // max eigenvalue of 4 beta n^2 I + 8 beta theta theta^T
  c.D4 = 0.0;
  c.D5 = 0.0;  // 4 beta n^3 beats no positive multiple of n^2 near 0
  c.D6 = 0.0;
  c.D7 = beta;
  c.D8 = 0.0;
  c.k = 4.0;
  return r;
}

RegularizerSpec RegularizerSpec::quad_plus_cubic(double beta1, double beta2) {
  if (!(beta1 > 0) || !(beta2 > 0))
    throw std::invalid_argument("quad_plus_cubic: beta1, beta2 must be > 0");
  RegularizerSpec r;
  r.kind = Kind::kQuadPlusCubic;
  r.beta1 = beta1;
  r.beta2 = beta2;
  RegularizerCert& c = r.cert;
  c.m = beta2;
  c.b = 0.0;
  c.p = 1.0;
  c.D1 = beta2;
  c.D2 = beta1;
  c.D3 = 2.0 * beta2;
  c.D4 = beta1;
  c.D5 = beta2;
  c.D6 = 0.0;
  // (b1/2) s^2 + (b2/3) s^3 <= (b1/2 + b2/3) s^3 + b1/2
  c.D7 = 0.5 * beta1 + beta2 / 3.0;
  c.D8 = 0.5 * beta1;
  c.k = 3.0;
  return r;
}

double RegularizerSpec::value(const Eigen::VectorXd& theta) const {
  double n = theta.norm();
  switch (kind) {
    case Kind::kPower:
      return (beta / q) * std::pow(n, q);
    case Kind::kQuartic:
      return beta * n * n * n * n;
    case Kind::kQuadPlusCubic:
      return 0.5 * beta1 * n * n + (beta2 / 3.0) * n * n * n;
  }
  return 0;
}

Eigen::VectorXd RegularizerSpec::grad(const Eigen::VectorXd& theta) const {
  double n = theta.norm();
  switch (kind) {
    case Kind::kPower:
      if (q == 2.0) return beta * theta;
      if (n == 0.0) return Eigen::VectorXd::Zero(theta.size());
      return beta * std::pow(n, q - 2.0) * theta;
    case Kind::kQuartic:
      return (4.0 * beta * n * n) * theta;
    case Kind::kQuadPlusCubic:
      return beta1 * theta + beta2 * n * theta;
  }
  return Eigen::VectorXd::Zero(theta.size());
}

Eigen::MatrixXd RegularizerSpec::hess(const Eigen::VectorXd& theta) const {
  const auto dim = theta.size();
  double n = theta.norm();
  Eigen::MatrixXd I = Eigen::MatrixXd::Identity(dim, dim);
  switch (kind) {
    case Kind::kPower: {
      if (q == 2.0) return beta * I;
      if (n == 0.0) return Eigen::MatrixXd::Zero(dim, dim);
      Eigen::VectorXd u = theta / n;
      return beta * std::pow(n, q - 2.0) * (I + (q - 2.0) * (u * u.transpose()));
    }
    case Kind::kQuartic:
      return 4.0 * beta * n * n * I + 8.0 * beta * (theta * theta.transpose());
    case Kind::kQuadPlusCubic: {
      if (n == 0.0) return beta1 * I;
      return beta1 * I + beta2 * (n * I + (theta * theta.transpose()) / n);
    }
  }
  return Eigen::MatrixXd::Zero(dim, dim);
}

std::string RegularizerSpec::kind_name() const {
  switch (kind) {
    case Kind::kPower: return "power";
    case Kind::kQuartic: return "quartic";
    case Kind::kQuadPlusCubic: return "quad-plus-cubic";
  }
  return "?";
}

std::string RegularizerSpec::label() const {
  switch (kind) {
    case Kind::kPower:
      if (q == 2.0) return "quad";
      if (q == 3.0) return "cubic";
      return "power" + std::to_string(static_cast<int>(q));
    case Kind::kQuartic: return "quartic";
    case Kind::kQuadPlusCubic: return "quadcubic";
  }
  return "reg";
}

}  // namespace meanfield
