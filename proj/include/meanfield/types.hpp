#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace meanfield {

/// One neuron theta = (u, w) in R^{d+1}. The canonical flattening used by
/// the potential derivatives is [w_0 .. w_{d-1}, u] (w-block first).
struct Particle {
  double u = 0.0;
  Eigen::VectorXd w;

  Eigen::VectorXd to_vector() const {
    Eigen::VectorXd v(w.size() + 1);
    v.head(w.size()) = w;
    v(w.size()) = u;
    return v;
  }
  static Particle from_vector(const Eigen::VectorXd& v) {
    Particle p;
    p.w = v.head(v.size() - 1);
    p.u = v(v.size() - 1);
    return p;
  }
};

/// Dense ensemble storage: row i holds particle i as [w, u]. Each particle
/// carries a stable id so counter-based noise follows the particle identity
/// rather than its slot (permutation equivariance of em_step).
class ParticleEnsemble {
 public:
  ParticleEnsemble() = default;
  ParticleEnsemble(int n, int d)
      : theta_(Eigen::MatrixXd::Zero(n, d + 1)), ids_(n), d_(d) {
    for (int i = 0; i < n; ++i) ids_[i] = static_cast<std::uint64_t>(i);
  }

  int size() const { return static_cast<int>(theta_.rows()); }
  int input_dim() const { return d_; }
  int dim() const { return d_ + 1; }

  double u(int i) const { return theta_(i, d_); }
  double& u(int i) { return theta_(i, d_); }
  auto w(int i) const { return theta_.row(i).head(d_); }
  auto w(int i) { return theta_.row(i).head(d_); }
  auto theta(int i) const { return theta_.row(i); }
  auto theta(int i) { return theta_.row(i); }

  Particle particle(int i) const {
    Particle p;
    p.w = theta_.row(i).head(d_).transpose();
    p.u = theta_(i, d_);
    return p;
  }
  void set_particle(int i, const Particle& p) {
    if (p.w.size() != d_) throw std::invalid_argument("particle dimension mismatch");
    theta_.row(i).head(d_) = p.w.transpose();
    theta_(i, d_) = p.u;
  }

  const Eigen::MatrixXd& raw() const { return theta_; }
  Eigen::MatrixXd& raw() { return theta_; }
  const std::vector<std::uint64_t>& ids() const { return ids_; }
  std::vector<std::uint64_t>& ids() { return ids_; }

  ParticleEnsemble permuted(const std::vector<int>& perm) const {
    ParticleEnsemble out(size(), d_);
    for (int i = 0; i < size(); ++i) {
      out.theta_.row(i) = theta_.row(perm[i]);
      out.ids_[i] = ids_[perm[i]];
    }
    return out;
  }

 private:
  Eigen::MatrixXd theta_;
  std::vector<std::uint64_t> ids_;
  int d_ = 0;
};

/// Supervised sample set: X is n x d (inputs as rows), y is the targets.
struct Dataset {
  Eigen::MatrixXd X;
  Eigen::VectorXd y;

  int n() const { return static_cast<int>(X.rows()); }
  int d() const { return static_cast<int>(X.cols()); }

  Dataset rows(int begin, int count) const {
    Dataset b;
    b.X = X.middleRows(begin, count);
    b.y = y.segment(begin, count);
    return b;
  }
};

}  // namespace meanfield
