#pragma once

#include <string>

#include "meanfield/dynamics.hpp"
#include "meanfield/fp.hpp"
#include "meanfield/lsi.hpp"
#include "meanfield/objective.hpp"

namespace meanfield {

/// All writers emit doubles as %.17g (round-trip exact) so identical runs
/// produce byte-identical files. Failures throw std::runtime_error.

/// Columns: step,t,Q,risk,reg_mean,entropy,grad_norm_mean
void write_trajectory_csv(const TrajectoryLog& log, const std::string& path);
TrajectoryLog read_trajectory_csv(const std::string& path);

/// JSON array of [u, w_0, ..., w_{d-1}] rows plus the id list.
void write_ensemble_json(const ParticleEnsemble& ens, const std::string& path);
ParticleEnsemble read_ensemble_json(const std::string& path);

/// Neuron scatter for plotting: columns u, w_0.., then the projected point
/// u*w_0.. (Figure-style "uw" coordinates). `scale` divides the uw block by
/// the ensemble size for the mean-field-scaled variant.
void write_scatter_csv(const ParticleEnsemble& ens, const std::string& path,
                       bool scale = false);

/// Grid density as CSV: a `# u_lo,u_hi,w_lo,w_hi,n_u,n_w` header line, then
/// one row of w-values per u-row (row-major).
void write_grid_csv(const GridDensity& g, const std::string& path);
GridDensity read_grid_csv(const std::string& path);

/// Same payload as raw little-endian doubles after a small text header.
void write_grid_binary(const GridDensity& g, const std::string& path);
GridDensity read_grid_binary(const std::string& path);

void write_ratefit_json(const RateFit& fit, const std::string& path);

/// Accepts one or many reports (both routes / both scaling modes).
void write_lsi_json(const std::vector<LsiBoundReport>& reports,
                    const std::string& path);

/// Human-readable description of the config schema and every file format.
std::string schema_markdown();
void write_schema_md(const std::string& path);

}  // namespace meanfield
