#include "meanfield/lsi.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <stdexcept>
#include <vector>

#include "meanfield/errors.hpp"
#include "meanfield/rng.hpp"

namespace meanfield {
namespace {

constexpr double kLn10 = 2.302585092994045684;

// log(1 + e^t) without overflow.
double log1pexp(double t) {
  if (t > 0) return t + std::log1p(std::exp(-t));
  return std::log1p(std::exp(t));
}

double logaddexp(double a, double b) {
  if (a < b) std::swap(a, b);
  if (!std::isfinite(a)) return a;
  return a + log1pexp(b - a);
}

void fill_rate(LsiBoundReport& rep) {
  rep.log10_rate = std::log10(2.0 * rep.lambda) - rep.log10_nu;
  if (rep.overflow) {
    rep.nu = std::numeric_limits<double>::infinity();
    rep.rate = 0.0;
  } else {
    rep.nu = std::exp(rep.log10_nu * kLn10);
    rep.rate = 2.0 * rep.lambda / rep.nu;
  }
  if (std::isfinite(rep.log10_nu))
    rep.intermediates["nu_mantissa"] =
        std::exp((rep.log10_nu - std::floor(rep.log10_nu)) * kLn10);
}

}  // namespace

double rate_bound(double nu, double lambda) {
  if (!(nu > 0)) throw std::invalid_argument("rate_bound: nu must be positive");
  if (lambda == 0) return 0.0;
  if (std::isinf(nu)) return 0.0;
  return 2.0 * lambda / nu;
}

double rate_bound(const LsiBoundReport& rep) { return rep.rate; }

LsiBoundReport quartic_bound(double m, double beta, int d, double L1, double C3,
                             double C4, double lambda) {
  if (!(m > 0) || !(beta > 0) || !(L1 > 0) || !(C3 > 0) || !(C4 > 0) || d < 1 ||
      !(lambda > 0))
    throw std::invalid_argument("quartic_bound: all constants must be positive");
  auto q = quartic_route<double>(m, beta, d, L1, C3, C4, lambda);
  LsiBoundReport rep;
  rep.route = "quartic-holley-stroock";
  rep.scaling_mode = "theorem-statement";
  rep.lambda = lambda;
  rep.log10_nu = q.log_nu / kLn10;
  rep.overflow = rep.log10_nu > 300.0;
  rep.intermediates = {{"R", q.R},   {"L", q.L},   {"m", m},
                       {"beta", beta}, {"d", double(d)}, {"L1", L1},
                       {"C3", C3},   {"C4", C4}};
  fill_rate(rep);
  return rep;
}

LyapunovConstants lyapunov_inputs(const ActivationSpec& act, const LossSpec& loss,
                                  const RegularizerSpec& reg, int d) {
  if (!loss.bounded_gradient())
    throw std::invalid_argument("lyapunov_inputs: loss must have bounded gradient (finite L1)");
  LyapunovConstants c;
  c.d = d;
  c.p = reg.cert.p;
  c.m = reg.cert.m;
  c.b = reg.cert.b;
  c.L1 = loss.L1;
  c.C1 = act.C1;
  c.C2 = act.C2;
  c.C3 = act.C3;
  c.C4 = act.C4;
  c.D3 = reg.cert.D3;
  c.D4 = reg.cert.D4;
  c.D7 = reg.cert.D7;
  c.D8 = reg.cert.D8;
  c.k = reg.cert.k;
  return c;
}

double phi(double s, const LyapunovConstants& c) {
  double dp1 = c.d + 1.0;
  return std::sqrt(2.0 * dp1) * c.D3 * std::pow(s, c.p) +
         std::sqrt(2.0 * c.d) * c.L1 * c.C4 * s +
         2.0 * std::sqrt(dp1 * c.D3 * c.D4) * std::pow(s, c.p / 2.0) +
         std::sqrt(4.0 * c.L1 * c.L1 * c.C3 * c.C3 + 2.0 * dp1 * c.D4 * c.D4);
}

namespace {

LyapunovConstants scale_constants(const LyapunovConstants& c, double lambda) {
  LyapunovConstants sc = c;
  sc.m /= lambda;
  sc.b /= lambda;
  sc.L1 /= lambda;
  sc.D3 /= lambda;
  sc.D4 /= lambda;
  sc.D7 /= lambda;
  sc.D8 /= lambda;
  return sc;
}

}  // namespace

LyapunovCertificate lyapunov_constants(const LyapunovConstants& c) {
  if (!(c.m > 0)) throw std::invalid_argument("lyapunov_constants: m must be positive");
  if (!(c.p >= 1)) throw std::invalid_argument("lyapunov_constants: p must be >= 1");
  if (c.d < 1) throw std::invalid_argument("lyapunov_constants: d must be >= 1");

  LyapunovCertificate cert;
  cert.in = c;
  cert.Phi0 = phi(0.0, c);
  cert.c1 = 1.0;

  double dp1 = c.d + 1.0;
  double pre = std::pow(2.0, c.p / 2.0);
  if (c.p == 1.0) {
    cert.branch = 1;
    cert.gamma =
        pre * (std::sqrt(2.0 * dp1) * c.D3 + 2.0 * c.L1 * c.C4 * std::sqrt(double(c.d))) /
            c.m +
        4.0;
  } else {
    cert.branch = 2;
    cert.gamma = pre * std::sqrt(2.0 * dp1) * c.D3 / c.m + 5.0;
  }

  double g = cert.gamma;
  double quad_coef = g * (g + c.L1 * c.C1 + c.L1 * c.C3 * c.C3);
  double r2 = 1.0;
  r2 = std::max(r2, std::pow((cert.Phi0 + quad_coef) / c.m, 2.0 / c.p));
  r2 = std::max(r2, std::pow(g * c.L1 * c.C2 / c.m, 2.0 / (1.0 + c.p)));
  r2 = std::max(r2, std::pow(g * (c.b + c.d + 1.0) / c.m, 2.0 / (2.0 + c.p)));
  double cross = 2.0 * std::sqrt(dp1 * c.D3 * c.D4);
  if (cross > 0) r2 = std::max(r2, std::pow(cross / c.m, 4.0 / c.p));
  if (c.p > 1.0) {
    double lin = 2.0 * c.L1 * c.C4 * std::sqrt(double(c.d));
    if (lin > 0) r2 = std::max(r2, std::pow(lin / c.m, 2.0 / (c.p - 1.0)));
  }
  cert.R = std::sqrt(r2);

  cert.c2 = cert.c1 * r2 * phi(2.0 * cert.R, c) + g * dp1 + quad_coef * r2 +
            g * c.L1 * c.C2 * cert.R + g * c.b;
  return cert;
}

LyapunovCertificate lyapunov_constants(const RegularizerSpec& reg,
                                       const ActivationSpec& act,
                                       const LossSpec& loss, int d, double lambda,
                                       ScalingMode mode) {
  LyapunovConstants c = lyapunov_inputs(act, loss, reg, d);
  if (mode == ScalingMode::kStrictProofScaling) {
    if (!(lambda > 0))
      throw std::invalid_argument("lyapunov_constants: lambda must be positive");
    c = scale_constants(c, lambda);
  }
  return lyapunov_constants(c);
}

LyapunovVerifyReport verify_lyapunov(const LyapunovCertificate& cert,
                                     const ParticleEnsemble& ens,
                                     const Dataset& data, const ModelSpecs& specs,
                                     int trials, double radius, std::uint64_t seed,
                                     double c2_override) {
  if (trials < 0 || !(radius > 0))
    throw std::invalid_argument("verify_lyapunov: need trials >= 0 and radius > 0");
  const auto& c = cert.in;
  if (ens.input_dim() != c.d)
    throw std::invalid_argument("verify_lyapunov: ensemble dimension mismatch");
  double c2 = c2_override >= 0 ? c2_override : cert.c2;
  ResidualWeights rw = residual_weights(ens, data, specs.act, specs.loss);

  LyapunovVerifyReport rep;
  rep.trials = trials + 1;
  rep.radius = radius;
  rep.worst_margin = std::numeric_limits<double>::infinity();
  int dim = c.d + 1;

  auto check = [&](const Eigen::VectorXd& theta) {
    Particle p = Particle::from_vector(theta);
    Eigen::VectorXd grad = potential_grad(p, rw, data, specs);
    double n2 = theta.squaredNorm();
    double lhs = cert.gamma * (c.d + 1.0) - cert.gamma * grad.dot(theta) +
                 cert.gamma * cert.gamma * n2;
    double rhs = -cert.c1 * n2 * phi(2.0 * std::sqrt(n2), c) + c2;
    double margin = rhs - lhs;
    rep.worst_margin = std::min(rep.worst_margin, margin);
    double scale = std::max({1.0, std::abs(lhs), std::abs(rhs)});
    if (margin < -1e-7 * scale) ++rep.violations;
  };

  check(Eigen::VectorXd::Zero(dim));
  for (int i = 0; i < trials; ++i) {
    Substream st(seed, StreamPurpose::kProbe, static_cast<std::uint64_t>(i));
    Eigen::VectorXd v(dim);
    for (int j = 0; j < dim; ++j) v[j] = st.next_normal();
    double nv = v.norm();
    if (nv == 0) v[0] = nv = 1.0;
    double r = (i % 2 == 0) ? radius : radius * st.next_uniform();
    check(v * (r / nv));
  }
  return rep;
}

namespace {

struct LyapEval {
  double lnB;     // ln(c1 Phi0 / lambda)
  double lnCnum;  // ln(C c1 Phi0 / lambda)
  double r_min;
  LyapunovConstants c;
  double gamma;
  // oscillation exponent: defaults to the uniform bound
  // 2 poly(r) = 2 (D7 r^k + L1 C1 r^2 + L1 C2 r + D8)
  std::function<double(double)> osc;

  // natural log of F(r); domain r > r_min
  double logF(double r) const {
    double t = lnCnum + 4.0 * std::log(r) + osc(r) + 0.5 * gamma * r * r;
    double den = lnB + std::log(r - r_min) + std::log(r + r_min);
    return log1pexp(t) - den;
  }
};

LyapEval make_eval(const LyapunovCertificate& cert, double lam_eff, double C) {
  LyapEval ev;
  ev.c = cert.in;
  ev.gamma = cert.gamma;
  double B = cert.c1 * cert.Phi0 / lam_eff;
  ev.lnB = std::log(B);
  ev.lnCnum = std::log(C) + ev.lnB;
  ev.r_min = std::sqrt(cert.c2 / B);
  LyapunovConstants cc = ev.c;
  ev.osc = [cc](double r) {
    return 2.0 * (cc.D7 * std::pow(r, cc.k) + cc.L1 * cc.C1 * r * r +
                  cc.L1 * cc.C2 * r + cc.D8);
  };
  return ev;
}

LyapunovCertificate resolve_cert(const LyapunovCertificate& cert, double lambda,
                                 ScalingMode mode, double& lam_eff) {
  if (mode == ScalingMode::kTheoremStatement) {
    lam_eff = lambda;
    return cert;
  }
  lam_eff = 1.0;
  return lyapunov_constants(scale_constants(cert.in, lambda));
}

// Shared search + report assembly once the evaluator is fixed.
LsiBoundReport finish_lyapunov(const LyapunovCertificate& eff, const LyapEval& ev,
                               double lambda, double lam_eff, double C,
                               const std::string& scaling_mode) {
  // coarse log-spaced scan, extended while the minimum sits on the right edge
  const int n = 4096;
  double xlo = std::log(ev.r_min * (1.0 + 1e-6));
  double xhi = std::log(ev.r_min) + 6.0 * kLn10;
  int best = -1;
  std::vector<double> xs(n), fs(n);
  for (int round = 0;; ++round) {
    for (int j = 0; j < n; ++j) {
      xs[j] = xlo + (xhi - xlo) * j / (n - 1);
      fs[j] = ev.logF(std::exp(xs[j]));
    }
    best = 0;
    for (int j = 1; j < n; ++j)
      if (fs[j] < fs[best]) best = j;
    if (best < n - 1) break;
    if (round >= 8)
      throw ConvergenceFailure("lyapunov_bound: infimum search window exhausted",
                               {fs[best]});
    xlo = xhi;
    xhi += 6.0 * kLn10;
  }

  double a = xs[std::max(0, best - 1)];
  double b = xs[std::min(n - 1, best + 1)];
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - invphi * (b - a);
  double x2 = a + invphi * (b - a);
  double f1 = ev.logF(std::exp(x1));
  double f2 = ev.logF(std::exp(x2));
  while (b - a > 1e-12) {
    if (f1 < f2) {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - invphi * (b - a);
      f1 = ev.logF(std::exp(x1));
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + invphi * (b - a);
      f2 = ev.logF(std::exp(x2));
    }
  }
  double x_star = (f1 < f2) ? x1 : x2;
  double r_star = std::exp(x_star);
  double logF_star = std::min(f1, f2);

  double B = eff.c1 * eff.Phi0 / lam_eff;
  double base = 2.0 * std::sqrt(2.0 / B) + 1.0 / eff.c1;
  double bracket = 2.0 * std::sqrt(2.0 / B) * eff.c2 + 2.0 * eff.c2 / eff.c1 + 2.0;
  double ln_nu = logaddexp(std::log(base), std::log(bracket) + logF_star);

  LsiBoundReport rep;
  rep.route = "lyapunov";
  rep.scaling_mode = scaling_mode;
  rep.lambda = lambda;
  rep.log10_nu = ln_nu / kLn10;
  rep.overflow = rep.log10_nu > 300.0;
  rep.intermediates = {{"gamma", eff.gamma},
                       {"R", eff.R},
                       {"c1", eff.c1},
                       {"c2", eff.c2},
                       {"Phi0", eff.Phi0},
                       {"r_min", ev.r_min},
                       {"r_star", r_star},
                       {"log10_F_star", logF_star / kLn10},
                       {"branch", double(eff.branch)},
                       {"p", eff.in.p},
                       {"C_universal", C}};
  fill_rate(rep);
  return rep;
}

LsiBoundReport infeasible_report(const LyapunovCertificate& eff, double lambda,
                                 double C, const std::string& scaling_mode) {
  LsiBoundReport rep;
  rep.route = "lyapunov";
  rep.scaling_mode = scaling_mode;
  rep.lambda = lambda;
  rep.infeasible = true;
  rep.overflow = true;
  rep.log10_nu = std::numeric_limits<double>::infinity();
  rep.intermediates = {{"gamma", eff.gamma},
                       {"c1", eff.c1},
                       {"c2", eff.c2},
                       {"Phi0", eff.Phi0},
                       {"C_universal", C}};
  fill_rate(rep);
  return rep;
}

}  // namespace

LsiBoundReport lyapunov_bound(const LyapunovCertificate& cert, double lambda,
                              double C_universal, ScalingMode mode) {
  if (!(lambda > 0)) throw std::invalid_argument("lyapunov_bound: lambda must be positive");
  if (!(C_universal > 0))
    throw std::invalid_argument("lyapunov_bound: C must be positive");
  std::string mode_name =
      mode == ScalingMode::kTheoremStatement ? "theorem-statement" : "strict-proof-scaling";
  double lam_eff = lambda;
  LyapunovCertificate eff = resolve_cert(cert, lambda, mode, lam_eff);
  if (!(eff.Phi0 > 0) || !(eff.c2 > 0))
    return infeasible_report(eff, lambda, C_universal, mode_name);
  LyapEval ev = make_eval(eff, lam_eff, C_universal);
  return finish_lyapunov(eff, ev, lambda, lam_eff, C_universal, mode_name);
}

LsiBoundReport lyapunov_bound_empirical(const LyapunovCertificate& cert,
                                        double lambda, double C_universal,
                                        const ParticleEnsemble& ens,
                                        const Dataset& data, const ModelSpecs& specs,
                                        int directions, std::uint64_t seed) {
  if (!(lambda > 0))
    throw std::invalid_argument("lyapunov_bound_empirical: lambda must be positive");
  if (directions < 1)
    throw std::invalid_argument("lyapunov_bound_empirical: directions must be >= 1");
  if (ens.input_dim() != cert.in.d)
    throw std::invalid_argument("lyapunov_bound_empirical: ensemble dimension mismatch");
  if (!(cert.Phi0 > 0) || !(cert.c2 > 0))
    return infeasible_report(cert, lambda, C_universal, "theorem-statement");

  const int dim = cert.in.d + 1;
  std::vector<Eigen::VectorXd> dirs;
  dirs.reserve(directions);
  for (int i = 0; i < directions; ++i) {
    Substream st(seed, StreamPurpose::kProbe, static_cast<std::uint64_t>(i));
    Eigen::VectorXd v(dim);
    for (int j = 0; j < dim; ++j) v[j] = st.next_normal();
    double nv = v.norm();
    if (nv == 0) v[0] = nv = 1.0;
    dirs.push_back(v / nv);
  }
  ResidualWeights rw = residual_weights(ens, data, specs.act, specs.loss);
  const double origin_u =
      potential_value(Particle::from_vector(Eigen::VectorXd::Zero(dim)), rw, data, specs);

  LyapEval ev = make_eval(cert, lambda, C_universal);
  ev.osc = [&, origin_u](double r) {
    double lo = origin_u, hi = origin_u;
    for (const auto& v : dirs) {
      for (double frac : {0.25, 0.5, 0.75, 1.0}) {
        double u = potential_value(Particle::from_vector(v * (frac * r)), rw, data, specs);
        lo = std::min(lo, u);
        hi = std::max(hi, u);
      }
    }
    return hi - lo;
  };
  LsiBoundReport rep =
      finish_lyapunov(cert, ev, lambda, lambda, C_universal, "theorem-statement");
  rep.intermediates["osc_empirical"] = 1.0;
  rep.intermediates["osc_at_r_star"] = ev.osc(rep.intermediates["r_star"]);
  rep.intermediates["directions"] = directions;
  return rep;
}

double lyapunov_bound_grid_argmin(const LyapunovCertificate& cert, double lambda,
                                  double C_universal, ScalingMode mode,
                                  long points_per_round, int rounds) {
  double lam_eff = lambda;
  LyapunovCertificate eff = resolve_cert(cert, lambda, mode, lam_eff);
  LyapEval ev = make_eval(eff, lam_eff, C_universal);
  double xlo = std::log(ev.r_min * (1.0 + 1e-6));
  double xhi = std::log(ev.r_min) + 6.0 * kLn10;
  double xbest = xlo;
  for (int round = 0; round < rounds; ++round) {
    double fbest = std::numeric_limits<double>::infinity();
    long jbest = 0;
    for (long j = 0; j < points_per_round; ++j) {
      double x = xlo + (xhi - xlo) * j / (points_per_round - 1);
      double f = ev.logF(std::exp(x));
      if (f < fbest) {
        fbest = f;
        jbest = j;
      }
    }
    double h = (xhi - xlo) / (points_per_round - 1);
    xbest = xlo + h * jbest;
    xlo = xbest - h;
    xhi = xbest + h;
  }
  return std::exp(xbest);
}

}  // namespace meanfield
