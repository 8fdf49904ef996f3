#pragma once

#include <Eigen/Dense>
#include <cstdint>

#include "meanfield/model.hpp"
#include "meanfield/objective.hpp"

namespace meanfield {

/// Cell-centered density on a rectangular (u, w) grid, d = 1 only.
/// rho(i, j) is the density at u-center i, w-center j.
struct GridDensity {
  Eigen::ArrayXXd rho;
  double u_lo = -1, u_hi = 1, w_lo = -1, w_hi = 1;

  int n_u() const { return static_cast<int>(rho.rows()); }
  int n_w() const { return static_cast<int>(rho.cols()); }
  double hu() const { return (u_hi - u_lo) / n_u(); }
  double hw() const { return (w_hi - w_lo) / n_w(); }
  double cell_area() const { return hu() * hw(); }
  double u_center(int i) const { return u_lo + (i + 0.5) * hu(); }
  double w_center(int j) const { return w_lo + (j + 0.5) * hw(); }
  double mass() const { return rho.sum() * cell_area(); }
  void normalize();

  /// Block-means into an (n_u/factor) x (n_w/factor) grid (mass preserved);
  /// factor must divide both extents.
  GridDensity coarsened(int factor) const;
};

GridDensity make_grid(int n_u, int n_w, double u_lo, double u_hi, double w_lo,
                      double w_hi);

/// Isotropic Gaussian bump evaluated at cell centers, then normalized.
void fill_gaussian(GridDensity& g, double u_mean, double w_mean, double sd);

/// Mean-field potential on the grid: U(i,j) = u_i P(j) + r([w_j, u_i]) with
/// P(j) = (1/K) sum_k c_k h(w_j, x_k) and residual weights c_k computed from
/// the grid predictions. K = 0 gives the pure-regularizer potential.
Eigen::ArrayXXd grid_potential(const GridDensity& g, const Dataset& data,
                               const ModelSpecs& specs);

/// The two addends separately: r([w_j, u_i]) depends only on the geometry,
/// u_i P(j) only on the current density. Time-stepping loops cache the
/// former and refresh the latter.
Eigen::ArrayXXd grid_reg_potential(const GridDensity& g, const RegularizerSpec& reg);
Eigen::ArrayXXd grid_data_potential(const GridDensity& g, const Dataset& data,
                                    const ModelSpecs& specs);

/// f_k = cell_area * sum_ij rho_ij u_i h(w_j, x_k)
Eigen::VectorXd grid_predict(const GridDensity& g, const Dataset& data,
                             const ActivationSpec& act);

/// Largest explicit-Euler step the finite-volume scheme accepts:
/// h^2 / (4 lambda + 4 h max|A|) with h the smaller cell width and A the
/// exact-difference face drifts.
double fp_admissible_dt(const GridDensity& g, const Eigen::ArrayXXd& U,
                        double lambda);

/// One explicit Chang-Cooper finite-volume step with zero-flux boundaries.
/// The face weighting makes the discrete Gibbs density exp(-U/lambda)
/// exactly stationary. Throws std::invalid_argument (message carries the
/// admissible value) when dt exceeds fp_admissible_dt.
void fp_step(GridDensity& g, const Eigen::ArrayXXd& U, double lambda, double dt);

/// Convenience shape: recompute the mean-field potential from rho itself and
/// return the advanced density.
GridDensity fp_step(const GridDensity& rho, const Dataset& data,
                    const ModelSpecs& specs, double lambda, double dt);

/// Self-consistent Gibbs density rho = Z^{-1} exp(-U[rho]/lambda) by damped
/// fixed-point iteration from `init`. damping < 0 selects 1.0 when the
/// dataset is empty (linear problem) and 0.5 otherwise. Throws
/// ConvergenceFailure with the residual tail on stall, and
/// std::invalid_argument when the converged density touches the boundary
/// (bounds too tight).
GridDensity gibbs_fixed_point(const GridDensity& init, const Dataset& data,
                              const ModelSpecs& specs, double lambda,
                              int max_iter = 500, double tol = 1e-12,
                              double damping = -1.0);

/// Free energy of a grid density: risk + mean regularizer - lambda * entropy,
/// with differential entropy -sum rho ln(rho) * area (0 ln 0 = 0). The density
/// must be normalized (|mass - 1| <= 1e-8) or std::invalid_argument is thrown.
ObjectiveReport grid_free_energy(const GridDensity& g, const Dataset& data,
                                 const ModelSpecs& specs, double lambda);

struct GridCompareReport {
  double tv = 0;      // total variation on the coarse grid + overflow cell
  long outside = 0;   // particles outside the grid bounds
  long n = 0;
};

/// Histogram the ensemble onto g's grid (coarsened by `factor`) and report
/// total-variation distance between the histogram and the density. Particles
/// outside the bounds land in a virtual overflow cell where the grid density
/// has no mass.
GridCompareReport compare_particle_to_grid(const ParticleEnsemble& ens,
                                           const GridDensity& g, int factor = 1);

}  // namespace meanfield
