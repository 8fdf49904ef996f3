#include "meanfield/model.hpp"

#include <cmath>

#include "meanfield/errors.hpp"
#include "meanfield/rng.hpp"

namespace meanfield {

namespace {

void check_dims(const ParticleEnsemble& ens, const Eigen::VectorXd& x) {
  if (x.size() != ens.input_dim())
    throw std::invalid_argument("predict: input dimension mismatch");
}

void check_finite(const ParticleEnsemble& ens) {
  if (!ens.raw().allFinite())
    throw NumericFault("predict: non-finite particle coordinate");
}

void check_data(const Dataset& data, int d) {
  if (data.n() == 0) throw std::invalid_argument("potential: empty dataset");
  if (data.d() != d) throw std::invalid_argument("potential: data dimension mismatch");
  if (data.y.size() != data.n())
    throw std::invalid_argument("potential: X/y row count mismatch");
}

}  // namespace

double predict(const ParticleEnsemble& ens, const Eigen::VectorXd& x,
               const ActivationSpec& act) {
  check_dims(ens, x);
  check_finite(ens);
  const int n = ens.size();
  if (n == 0) throw std::invalid_argument("predict: empty ensemble");
  double acc = 0.0;
  for (int i = 0; i < n; ++i) {
    double z = ens.w(i).dot(x.transpose());
    acc += ens.u(i) * act.g(z);
  }
  return acc / static_cast<double>(n);
}

Eigen::VectorXd predict(const ParticleEnsemble& ens, const Dataset& data,
                        const ActivationSpec& act) {
  if (data.d() != ens.input_dim())
    throw std::invalid_argument("predict: data dimension mismatch");
  check_finite(ens);
  const int n = ens.size();
  if (n == 0) throw std::invalid_argument("predict: empty ensemble");
  // Z(i,k) = <w_i, x_k>
  Eigen::MatrixXd Z = ens.raw().leftCols(ens.input_dim()) * data.X.transpose();
  Eigen::VectorXd out = Eigen::VectorXd::Zero(data.n());
  for (int k = 0; k < data.n(); ++k) {
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += ens.u(i) * act.g(Z(i, k));
    out(k) = acc / static_cast<double>(n);
  }
  return out;
}

ResidualWeights residual_weights(const ParticleEnsemble& ens, const Dataset& data,
                                 const ActivationSpec& act, const LossSpec& loss) {
  Eigen::VectorXd f = predict(ens, data, act);
  ResidualWeights rw;
  rw.c.resize(data.n());
  for (int k = 0; k < data.n(); ++k) rw.c(k) = loss.grad1(f(k), data.y(k));
  return rw;
}

double potential_value(const Particle& theta, const ResidualWeights& rw,
                       const Dataset& data, const ModelSpecs& specs) {
  check_data(data, static_cast<int>(theta.w.size()));
  const int K = data.n();
  double acc = 0.0;
  for (int k = 0; k < K; ++k)
    acc += rw.c(k) * theta.u * specs.act.g(theta.w.dot(data.X.row(k)));
  return acc / static_cast<double>(K) + specs.reg.value(theta.to_vector());
}

double potential_value(const Particle& theta, const ParticleEnsemble& ens,
                       const Dataset& data, const ModelSpecs& specs) {
  return potential_value(theta, residual_weights(ens, data, specs.act, specs.loss),
                         data, specs);
}

Eigen::VectorXd potential_grad(const Particle& theta, const ResidualWeights& rw,
                               const Dataset& data, const ModelSpecs& specs) {
  const int d = static_cast<int>(theta.w.size());
  check_data(data, d);
  const int K = data.n();
  Eigen::VectorXd g = Eigen::VectorXd::Zero(d + 1);
  for (int k = 0; k < K; ++k) {
    double z = theta.w.dot(data.X.row(k));
    double h = specs.act.g(z);
    double hp = specs.act.dg(z);
    g.head(d) += rw.c(k) * theta.u * hp * data.X.row(k).transpose();
    g(d) += rw.c(k) * h;
  }
  g /= static_cast<double>(K);
  g += specs.reg.grad(theta.to_vector());
  return g;
}

Eigen::VectorXd potential_grad(const Particle& theta, const ParticleEnsemble& ens,
                               const Dataset& data, const ModelSpecs& specs) {
  return potential_grad(theta, residual_weights(ens, data, specs.act, specs.loss),
                        data, specs);
}

Eigen::MatrixXd potential_hess(const Particle& theta, const ResidualWeights& rw,
                               const Dataset& data, const ModelSpecs& specs) {
  const int d = static_cast<int>(theta.w.size());
  check_data(data, d);
  const int K = data.n();
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(d + 1, d + 1);
  for (int k = 0; k < K; ++k) {
    double z = theta.w.dot(data.X.row(k));
    double hp = specs.act.dg(z);
    double hpp = specs.act.d2g(z);
    Eigen::VectorXd x = data.X.row(k).transpose();
    H.topLeftCorner(d, d) += rw.c(k) * theta.u * hpp * (x * x.transpose());
    H.block(0, d, d, 1) += rw.c(k) * hp * x;
  }
  H /= static_cast<double>(K);
  H.block(d, 0, 1, d) = H.block(0, d, d, 1).transpose();
  H += specs.reg.hess(theta.to_vector());
  return H;
}

Eigen::MatrixXd potential_hess(const Particle& theta, const ParticleEnsemble& ens,
                               const Dataset& data, const ModelSpecs& specs) {
  return potential_hess(theta, residual_weights(ens, data, specs.act, specs.loss),
                        data, specs);
}

ActivationValidationReport validate_activation(const ActivationSpec& act, int d,
                                               double radius, int trials,
                                               std::uint64_t seed) {
  if (d < 1) throw std::invalid_argument("validate_activation: d must be >= 1");
  if (!(radius > 0)) throw std::invalid_argument("validate_activation: radius must be > 0");
  if (trials < 1) throw std::invalid_argument("validate_activation: trials must be >= 1");
  ActivationValidationReport rep;
  Substream rng(seed, StreamPurpose::kProbe);
  const double tol = 1.0 + 1e-9;

  auto probe = [&](const Eigen::VectorXd& w, const Eigen::VectorXd& x) {
    double z = w.dot(x);
    double h = act.g(z);
    double gn = std::abs(act.dg(z)) * x.norm();
    double hn = std::abs(act.d2g(z)) * x.squaredNorm();
    double vb = act.C1 * w.norm() + act.C2;
    double vr = (vb > 0) ? std::abs(h) / vb : (std::abs(h) > 0 ? 2.0 : 0.0);
    double gr = (act.C3 > 0) ? gn / act.C3 : (gn > 0 ? 2.0 : 0.0);
    double hr = (act.C4 > 0) ? hn / act.C4 : (hn > 0 ? 2.0 : 0.0);
    rep.worst_value_ratio = std::max(rep.worst_value_ratio, vr);
    rep.worst_grad_ratio = std::max(rep.worst_grad_ratio, gr);
    rep.worst_hess_ratio = std::max(rep.worst_hess_ratio, hr);
    if (vr > tol || gr > tol || hr > tol) ++rep.violations;
  };

  // extreme probes: aligned, anti-aligned, orthogonal-ish, origin
  Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
  e(0) = 1.0;
  probe(radius * e, act.x_max * e);
  probe(-radius * e, act.x_max * e);
  probe(radius * e, -act.x_max * e);
  probe(Eigen::VectorXd::Zero(d), act.x_max * e);

  for (int t = 0; t < trials; ++t) {
    Eigen::VectorXd w(d), x(d);
    for (int j = 0; j < d; ++j) w(j) = rng.next_normal();
    for (int j = 0; j < d; ++j) x(j) = rng.next_normal();
    if (w.norm() > 0) w *= radius * std::pow(rng.next_uniform(), 1.0 / d) / w.norm();
    if (x.norm() > 0) {
      // half the draws sit exactly on the ||x|| = x_max sphere where the
      // bounds are tight
      double scale = (t % 2 == 0) ? 1.0 : std::pow(rng.next_uniform(), 1.0 / d);
      x *= act.x_max * scale / x.norm();
    }
    probe(w, x);
  }
  rep.pass = rep.violations == 0;
  return rep;
}

RegularizerValidationReport validate_regularizer(const RegularizerSpec& reg, int d,
                                                 double radius, int trials,
                                                 std::uint64_t seed) {
  if (d < 1) throw std::invalid_argument("validate_regularizer: d must be >= 1");
  if (!(radius > 0)) throw std::invalid_argument("validate_regularizer: radius must be > 0");
  if (trials < 1) throw std::invalid_argument("validate_regularizer: trials must be >= 1");
  RegularizerValidationReport rep;
  Substream rng(seed, StreamPurpose::kProbe);
  const RegularizerCert& c = reg.cert;
  const int dim = d + 1;
  bool first = true;

  auto probe = [&](const Eigen::VectorXd& th) {
    double n = th.norm();
    Eigen::VectorXd g = reg.grad(th);
    Eigen::MatrixXd H = reg.hess(th);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H, Eigen::EigenvaluesOnly);
    double lmin = es.eigenvalues().minCoeff();
    double lmax = es.eigenvalues().maxCoeff();

    double dissip = th.dot(g) - (c.m * std::pow(n, 2.0 + c.p) - c.b);
    double hess_lo = lmin - (c.D1 * n + c.D2);
    double hess_hi = (c.D3 * std::pow(n, c.p) + c.D4) - lmax;
    double grad_lo = g.norm() - (c.D5 * n * n + c.D6);
    double val_hi = (c.D7 * std::pow(n, c.k) + c.D8) - std::abs(reg.value(th));

    if (first) {
      rep.worst_dissip_margin = dissip;
      rep.worst_hess_lo_margin = hess_lo;
      rep.worst_hess_hi_margin = hess_hi;
      rep.worst_grad_margin = grad_lo;
      rep.worst_value_margin = val_hi;
      first = false;
    } else {
      rep.worst_dissip_margin = std::min(rep.worst_dissip_margin, dissip);
      rep.worst_hess_lo_margin = std::min(rep.worst_hess_lo_margin, hess_lo);
      rep.worst_hess_hi_margin = std::min(rep.worst_hess_hi_margin, hess_hi);
      rep.worst_grad_margin = std::min(rep.worst_grad_margin, grad_lo);
      rep.worst_value_margin = std::min(rep.worst_value_margin, val_hi);
    }
    auto scale = [&](double ref) { return 1e-9 * (1.0 + std::abs(ref)); };
    bool v = false;
    if (dissip < -scale(th.dot(g))) { rep.ok_dissip = false; v = true; }
    if (hess_lo < -scale(lmin)) { rep.ok_hess_lo = false; v = true; }
    if (hess_hi < -scale(lmax)) { rep.ok_hess_hi = false; v = true; }
    if (grad_lo < -scale(g.norm())) { rep.ok_grad = false; v = true; }
    if (val_hi < -scale(reg.value(th))) { rep.ok_value = false; v = true; }
    if (v) ++rep.violations;
  };

  // radial probes along a few fixed directions, then random points
  for (int axis = 0; axis < std::min(dim, 3); ++axis) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(dim);
    e(axis) = 1.0;
    for (double s : {radius, 0.5 * radius, 1.0, 0.1, 1e-3}) probe(s * e);
  }
  for (int t = 0; t < trials; ++t) {
    Eigen::VectorXd th(dim);
    for (int j = 0; j < dim; ++j) th(j) = rng.next_normal();
    if (th.norm() > 0)
      th *= radius * std::pow(rng.next_uniform(), 1.0 / dim) / th.norm();
    probe(th);
  }
  rep.pass = rep.violations == 0;
  return rep;
}

}  // namespace meanfield
