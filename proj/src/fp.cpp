#include "meanfield/fp.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <vector>

#include "meanfield/errors.hpp"

namespace meanfield {
namespace {

void require_d1(const Dataset& data) {
  if (data.n() > 0 && data.d() != 1)
    throw std::invalid_argument("fp: grid solver supports d = 1 data only");
}

// Chang-Cooper face weight: delta(w) = 1/w - 1/(e^w - 1).
double cc_delta(double w) {
  if (std::abs(w) < 1e-8) return 0.5 - w / 12.0;
  return 1.0 / w - 1.0 / std::expm1(w);
}

double max_face_drift(const GridDensity& g, const Eigen::ArrayXXd& U) {
  double m = 0;
  const int nu = g.n_u(), nw = g.n_w();
  for (int i = 0; i + 1 < nu; ++i)
    for (int j = 0; j < nw; ++j)
      m = std::max(m, std::abs(U(i + 1, j) - U(i, j)) / g.hu());
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j + 1 < nw; ++j)
      m = std::max(m, std::abs(U(i, j + 1) - U(i, j)) / g.hw());
  return m;
}

}  // namespace

void GridDensity::normalize() {
  double m = mass();
  if (!(m > 0)) throw NumericFault("GridDensity::normalize: nonpositive mass");
  rho /= m;
}

GridDensity GridDensity::coarsened(int factor) const {
  if (factor < 1 || n_u() % factor != 0 || n_w() % factor != 0)
    throw std::invalid_argument("GridDensity::coarsened: factor must divide both extents");
  GridDensity out;
  out.u_lo = u_lo;
  out.u_hi = u_hi;
  out.w_lo = w_lo;
  out.w_hi = w_hi;
  out.rho = Eigen::ArrayXXd::Zero(n_u() / factor, n_w() / factor);
  for (int i = 0; i < n_u(); ++i)
    for (int j = 0; j < n_w(); ++j) out.rho(i / factor, j / factor) += rho(i, j);
  out.rho /= double(factor) * double(factor);
  return out;
}

GridDensity make_grid(int n_u, int n_w, double u_lo, double u_hi, double w_lo,
                      double w_hi) {
  if (n_u < 2 || n_w < 2 || !(u_hi > u_lo) || !(w_hi > w_lo))
    throw std::invalid_argument("make_grid: need >= 2 cells per axis and ordered bounds");
  GridDensity g;
  g.rho = Eigen::ArrayXXd::Zero(n_u, n_w);
  g.u_lo = u_lo;
  g.u_hi = u_hi;
  g.w_lo = w_lo;
  g.w_hi = w_hi;
  return g;
}

void fill_gaussian(GridDensity& g, double u_mean, double w_mean, double sd) {
  if (!(sd > 0)) throw std::invalid_argument("fill_gaussian: sd must be positive");
  for (int i = 0; i < g.n_u(); ++i)
    for (int j = 0; j < g.n_w(); ++j) {
      double du = (g.u_center(i) - u_mean) / sd;
      double dw = (g.w_center(j) - w_mean) / sd;
      g.rho(i, j) = std::exp(-0.5 * (du * du + dw * dw));
    }
  g.normalize();
}

Eigen::VectorXd grid_predict(const GridDensity& g, const Dataset& data,
                             const ActivationSpec& act) {
  require_d1(data);
  const int K = static_cast<int>(data.n());
  Eigen::VectorXd f = Eigen::VectorXd::Zero(K);
  if (K == 0) return f;
  Eigen::ArrayXd ucol = Eigen::ArrayXd::Zero(g.n_w());
  for (int j = 0; j < g.n_w(); ++j)
    for (int i = 0; i < g.n_u(); ++i) ucol[j] += g.rho(i, j) * g.u_center(i);
  for (int k = 0; k < K; ++k) {
    double xk = data.X(k, 0);
    double s = 0;
    for (int j = 0; j < g.n_w(); ++j) s += ucol[j] * act.g(g.w_center(j) * xk);
    f[k] = s * g.cell_area();
  }
  return f;
}

Eigen::ArrayXXd grid_reg_potential(const GridDensity& g, const RegularizerSpec& reg) {
  Eigen::ArrayXXd U(g.n_u(), g.n_w());
  Eigen::VectorXd theta(2);
  for (int j = 0; j < g.n_w(); ++j) {
    theta[0] = g.w_center(j);
    for (int i = 0; i < g.n_u(); ++i) {
      theta[1] = g.u_center(i);
      U(i, j) = reg.value(theta);
    }
  }
  return U;
}

Eigen::ArrayXXd grid_data_potential(const GridDensity& g, const Dataset& data,
                                    const ModelSpecs& specs) {
  require_d1(data);
  const int K = static_cast<int>(data.n());
  Eigen::ArrayXXd U = Eigen::ArrayXXd::Zero(g.n_u(), g.n_w());
  if (K == 0) return U;
  Eigen::ArrayXd P = Eigen::ArrayXd::Zero(g.n_w());
  Eigen::VectorXd f = grid_predict(g, data, specs.act);
  for (int k = 0; k < K; ++k) {
    double ck = loss_grad(f[k], data.y[k], specs.loss);
    double xk = data.X(k, 0);
    for (int j = 0; j < g.n_w(); ++j) P[j] += ck * specs.act.g(g.w_center(j) * xk);
  }
  P /= double(K);
  for (int j = 0; j < g.n_w(); ++j)
    for (int i = 0; i < g.n_u(); ++i) U(i, j) = g.u_center(i) * P[j];
  return U;
}

Eigen::ArrayXXd grid_potential(const GridDensity& g, const Dataset& data,
                               const ModelSpecs& specs) {
  Eigen::ArrayXXd U = grid_reg_potential(g, specs.reg);
  if (data.n() > 0) U += grid_data_potential(g, data, specs);
  return U;
}

double fp_admissible_dt(const GridDensity& g, const Eigen::ArrayXXd& U,
                        double lambda) {
  if (U.rows() != g.rho.rows() || U.cols() != g.rho.cols())
    throw std::invalid_argument("fp_admissible_dt: potential shape mismatch");
  double h = std::min(g.hu(), g.hw());
  double amax = max_face_drift(g, U);
  return h * h / (4.0 * lambda + 4.0 * h * amax);
}

void fp_step(GridDensity& g, const Eigen::ArrayXXd& U, double lambda, double dt) {
  if (!(lambda > 0)) throw std::invalid_argument("fp_step: lambda must be positive");
  if (!(dt > 0)) throw std::invalid_argument("fp_step: dt must be positive");
  double dt_adm = fp_admissible_dt(g, U, lambda);
  if (dt > dt_adm) {
    char buf[160];
    std::snprintf(buf, sizeof(buf),
                  "fp_step: dt = %.17g exceeds admissible dt = %.17g", dt, dt_adm);
    throw std::invalid_argument(buf);
  }

  const int nu = g.n_u(), nw = g.n_w();
  const double hu = g.hu(), hw = g.hw();
  Eigen::ArrayXXd drho = Eigen::ArrayXXd::Zero(nu, nw);

  // u-direction faces (between rows i and i+1); zero flux at the boundary
  for (int j = 0; j < nw; ++j) {
    for (int i = 0; i + 1 < nu; ++i) {
      double A = (U(i + 1, j) - U(i, j)) / hu;
      double w = A * hu / lambda;
      double d = cc_delta(w);
      double G = A * ((1.0 - d) * g.rho(i + 1, j) + d * g.rho(i, j)) +
                 lambda * (g.rho(i + 1, j) - g.rho(i, j)) / hu;
      drho(i, j) += G / hu;
      drho(i + 1, j) -= G / hu;
    }
  }
  // w-direction faces
  for (int i = 0; i < nu; ++i) {
    for (int j = 0; j + 1 < nw; ++j) {
      double A = (U(i, j + 1) - U(i, j)) / hw;
      double w = A * hw / lambda;
      double d = cc_delta(w);
      double G = A * ((1.0 - d) * g.rho(i, j + 1) + d * g.rho(i, j)) +
                 lambda * (g.rho(i, j + 1) - g.rho(i, j)) / hw;
      drho(i, j) += G / hw;
      drho(i, j + 1) -= G / hw;
    }
  }

  g.rho += dt * drho;
  double mx = g.rho.maxCoeff();
  double mn = g.rho.minCoeff();
  if (!g.rho.allFinite()) throw NumericFault("fp_step: non-finite density");
  if (mn < -1e-10 * mx) throw NumericFault("fp_step: negative density beyond tolerance");
  g.rho = g.rho.max(0.0);
}

GridDensity fp_step(const GridDensity& rho, const Dataset& data,
                    const ModelSpecs& specs, double lambda, double dt) {
  GridDensity out = rho;
  Eigen::ArrayXXd U = grid_potential(out, data, specs);
  fp_step(out, U, lambda, dt);
  return out;
}

GridDensity gibbs_fixed_point(const GridDensity& init, const Dataset& data,
                              const ModelSpecs& specs, double lambda,
                              int max_iter, double tol, double damping) {
  require_d1(data);
  if (!(lambda > 0))
    throw std::invalid_argument("gibbs_fixed_point: lambda must be positive");
  double alpha = damping;
  if (alpha < 0) alpha = data.n() == 0 ? 1.0 : 0.5;
  if (!(alpha > 0) || alpha > 1)
    throw std::invalid_argument("gibbs_fixed_point: damping must be in (0, 1]");

  GridDensity cur = init;
  cur.normalize();
  std::vector<double> residuals;
  bool converged = false;
  for (int it = 0; it < max_iter; ++it) {
    Eigen::ArrayXXd U = grid_potential(cur, data, specs);
    GridDensity next = cur;
    next.rho = (-(U - U.minCoeff()) / lambda).exp();
    next.normalize();
    double res = (next.rho - cur.rho).abs().sum() * cur.cell_area();
    residuals.push_back(res);
    cur.rho = alpha * next.rho + (1.0 - alpha) * cur.rho;
    if (res < tol) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    size_t tail = std::min<size_t>(residuals.size(), 8);
    std::vector<double> last(residuals.end() - tail, residuals.end());
    throw ConvergenceFailure("gibbs_fixed_point: fixed point not reached", last);
  }

  double mx = cur.rho.maxCoeff();
  double edge = 0;
  for (int i = 0; i < cur.n_u(); ++i)
    edge = std::max({edge, cur.rho(i, 0), cur.rho(i, cur.n_w() - 1)});
  for (int j = 0; j < cur.n_w(); ++j)
    edge = std::max({edge, cur.rho(0, j), cur.rho(cur.n_u() - 1, j)});
  if (edge > 1e-12 * mx)
    throw std::invalid_argument(
        "gibbs_fixed_point: density touches the grid boundary; widen the bounds");
  return cur;
}

ObjectiveReport grid_free_energy(const GridDensity& g, const Dataset& data,
                                 const ModelSpecs& specs, double lambda) {
  require_d1(data);
  if (std::abs(g.mass() - 1.0) > 1e-8)
    throw std::invalid_argument("grid_free_energy: density is not normalized");
  ObjectiveReport rep;
  rep.k_nn = 0;
  const int K = static_cast<int>(data.n());
  if (K > 0) {
    Eigen::VectorXd f = grid_predict(g, data, specs.act);
    double s = 0;
    for (int k = 0; k < K; ++k) s += specs.loss.value(f[k], data.y[k]);
    rep.risk = s / K;
  }
  double area = g.cell_area();
  double regm = 0, ent = 0;
  Eigen::VectorXd theta(2);
  for (int j = 0; j < g.n_w(); ++j) {
    theta[0] = g.w_center(j);
    for (int i = 0; i < g.n_u(); ++i) {
      double r = g.rho(i, j);
      if (r > 0) {
        theta[1] = g.u_center(i);
        regm += r * specs.reg.value(theta);
        ent -= r * std::log(r);
      }
    }
  }
  rep.reg_mean = regm * area;
  rep.entropy = ent * area;
  rep.Q = rep.risk + rep.reg_mean - lambda * rep.entropy;
  return rep;
}

GridCompareReport compare_particle_to_grid(const ParticleEnsemble& ens,
                                           const GridDensity& g, int factor) {
  if (ens.input_dim() != 1)
    throw std::invalid_argument("compare_particle_to_grid: d = 1 ensembles only");
  if (ens.size() == 0)
    throw std::invalid_argument("compare_particle_to_grid: empty ensemble");
  GridDensity coarse = g.coarsened(factor);
  Eigen::ArrayXXd hist = Eigen::ArrayXXd::Zero(coarse.n_u(), coarse.n_w());
  GridCompareReport rep;
  rep.n = static_cast<long>(ens.size());
  for (Eigen::Index i = 0; i < ens.size(); ++i) {
    double u = ens.u(i);
    double w = ens.w(i)[0];
    if (u < coarse.u_lo || u >= coarse.u_hi || w < coarse.w_lo || w >= coarse.w_hi) {
      ++rep.outside;
      continue;
    }
    int iu = static_cast<int>((u - coarse.u_lo) / coarse.hu());
    int jw = static_cast<int>((w - coarse.w_lo) / coarse.hw());
    iu = std::min(iu, coarse.n_u() - 1);
    jw = std::min(jw, coarse.n_w() - 1);
    hist(iu, jw) += 1.0;
  }
  // Out-of-bounds particles live in a virtual overflow cell where the grid
  // density carries no mass, so they enter the distance at full weight.
  hist /= static_cast<double>(rep.n);
  double gmass = coarse.rho.sum();
  if (gmass <= 0) {
    rep.tv = 1.0;
    return rep;
  }
  Eigen::ArrayXXd q = coarse.rho / gmass;
  double outside_frac = static_cast<double>(rep.outside) / static_cast<double>(rep.n);
  rep.tv = 0.5 * ((hist - q).abs().sum() + outside_frac);
  return rep;
}

}  // namespace meanfield
