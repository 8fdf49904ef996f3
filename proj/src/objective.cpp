#include "meanfield/objective.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "meanfield/errors.hpp"
#include "meanfield/rng.hpp"

namespace meanfield {

double empirical_risk(const ParticleEnsemble& ens, const Dataset& data,
                      const ActivationSpec& act, const LossSpec& loss) {
  if (data.n() == 0) throw std::invalid_argument("empirical_risk: empty dataset");
  Eigen::VectorXd f = predict(ens, data, act);
  double acc = 0.0;
  for (int k = 0; k < data.n(); ++k) acc += loss.value(f(k), data.y(k));
  return acc / static_cast<double>(data.n());
}

double regularizer_mean(const ParticleEnsemble& ens, const RegularizerSpec& reg) {
  if (ens.size() == 0) throw std::invalid_argument("regularizer_mean: empty ensemble");
  double acc = 0.0;
  for (int i = 0; i < ens.size(); ++i)
    acc += reg.value(ens.theta(i).transpose());
  return acc / static_cast<double>(ens.size());
}

namespace {

// psi(n) for integer n: -gamma + sum_{j<n} 1/j
double digamma_int(int n) {
  constexpr double kEulerGamma = 0.5772156649015328606;
  double h = 0.0;
  for (int j = 1; j < n; ++j) h += 1.0 / j;
  return h - kEulerGamma;
}

double unit_ball_volume(int m) {
  return std::pow(3.14159265358979323846, 0.5 * m) / std::tgamma(0.5 * m + 1.0);
}

}  // namespace

double entropy_knn(const ParticleEnsemble& ens, int k) {
  const int n = ens.size();
  const int m = ens.dim();
  if (k < 1) throw std::invalid_argument("entropy_knn: k must be >= 1");
  if (n <= k) throw std::invalid_argument("entropy_knn: need more samples than k");

  Eigen::MatrixXd pts = ens.raw();
  // deterministic relative jitter on exact duplicates so k-NN distances
  // stay positive
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](int a, int b) {
    for (int j = 0; j < m; ++j) {
      if (pts(a, j) != pts(b, j)) return pts(a, j) < pts(b, j);
    }
    return a < b;
  });
  for (int s = 1; s < n; ++s) {
    int i = order[s], prev = order[s - 1];
    if ((pts.row(i) - pts.row(prev)).norm() == 0.0) {
      double scale = 1e-12 * std::max(1.0, pts.row(i).norm());
      Substream rng(0x6a7b1c9dULL, StreamPurpose::kProbe, static_cast<std::uint64_t>(i));
      for (int j = 0; j < m; ++j) pts(i, j) += scale * (rng.next_uniform() - 0.5);
    }
  }

  double sum_log_eps = 0.0;
  std::vector<double> dist(n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) dist[j] = (pts.row(i) - pts.row(j)).squaredNorm();
    dist[i] = std::numeric_limits<double>::infinity();
    std::nth_element(dist.begin(), dist.begin() + (k - 1), dist.end());
    double eps2 = dist[k - 1];
    if (!(eps2 > 0.0))
      throw NumericFault("entropy_knn: zero k-NN distance after jitter", i);
    sum_log_eps += 0.5 * std::log(eps2);
  }
  return digamma_int(n) - digamma_int(k) + std::log(unit_ball_volume(m)) +
         (static_cast<double>(m) / n) * sum_log_eps;
}

ObjectiveReport free_energy(const ParticleEnsemble& ens, const Dataset& data,
                            const ModelSpecs& specs, double lambda, int k) {
  ObjectiveReport rep;
  rep.k_nn = k;
  rep.risk = empirical_risk(ens, data, specs.act, specs.loss);
  rep.reg_mean = regularizer_mean(ens, specs.reg);
  rep.entropy = (ens.size() > k) ? entropy_knn(ens, k)
                                 : std::numeric_limits<double>::quiet_NaN();
  rep.Q = rep.risk + rep.reg_mean;
  if (lambda != 0.0) rep.Q -= lambda * rep.entropy;
  return rep;
}

RateFit fit_decay_rate(const std::vector<double>& t, const std::vector<double>& Q,
                       double q_star, double t_lo, double t_hi) {
  if (t.size() != Q.size())
    throw std::invalid_argument("fit_decay_rate: t/Q size mismatch");
  if (!(t_lo < t_hi)) throw std::invalid_argument("fit_decay_rate: bad window");
  std::vector<double> xs, ys;
  for (size_t i = 0; i < t.size(); ++i) {
    if (t[i] < t_lo || t[i] > t_hi) continue;
    double gap = Q[i] - q_star;
    if (!(gap > 0.0))
      throw std::invalid_argument("fit_decay_rate: Q <= Q* inside the window");
    xs.push_back(t[i]);
    ys.push_back(std::log(gap));
  }
  if (xs.size() < 3)
    throw std::invalid_argument("fit_decay_rate: window holds fewer than 3 records");

  const double n = static_cast<double>(xs.size());
  double mx = 0, my = 0;
  for (size_t i = 0; i < xs.size(); ++i) { mx += xs[i]; my += ys[i]; }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (size_t i = 0; i < xs.size(); ++i) {
    double dx = xs[i] - mx, dy = ys[i] - my;
    sxx += dx * dx;
    sxy += dx * dy;
    syy += dy * dy;
  }
  if (!(sxx > 0)) throw std::invalid_argument("fit_decay_rate: degenerate time axis");
  double slope = sxy / sxx;

  RateFit fit;
  fit.rate = -slope;
  fit.intercept = my - slope * mx;
  fit.r_squared = (syy > 0) ? (sxy * sxy) / (sxx * syy) : 1.0;
  fit.q_star = q_star;
  fit.window_lo = t_lo;
  fit.window_hi = t_hi;
  fit.n_points = static_cast<long>(xs.size());
  return fit;
}

RateFit fit_decay_rate(const TrajectoryLog& log, double q_star, double t_lo,
                       double t_hi) {
  std::vector<double> t, Q;
  t.reserve(log.records.size());
  Q.reserve(log.records.size());
  for (const auto& r : log.records) {
    t.push_back(r.t);
    Q.push_back(r.Q);
  }
  return fit_decay_rate(t, Q, q_star, t_lo, t_hi);
}

}  // namespace meanfield
