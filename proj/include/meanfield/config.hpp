#pragma once

#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "meanfield/dynamics.hpp"
#include "meanfield/teacher.hpp"

namespace meanfield {

/// Configuration problems exit the CLI with code 2.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Flat key = value text config. '#' starts a comment, blank lines are
/// skipped, keys must come from the documented schema (unknown keys are
/// errors), and a `schema = 1` line is required.
struct ConfigMap {
  std::map<std::string, std::string> kv;

  bool has(const std::string& key) const { return kv.count(key) > 0; }
  std::string get_str(const std::string& key, const std::string& dflt) const;
  double get_num(const std::string& key, double dflt) const;
  long get_int(const std::string& key, long dflt) const;
  bool get_flag(const std::string& key, bool dflt) const;
};

ConfigMap load_config(const std::string& path);
ConfigMap parse_config_text(const std::string& text, const std::string& origin);

/// Apply `--set key=value` overrides (same key validation as the file).
void apply_override(ConfigMap& cfg, const std::string& assignment);

/// Keys the schema knows, with one-line descriptions (drives schema.md).
const std::vector<std::pair<std::string, std::string>>& config_schema();

struct EmitFlags {
  bool csv = true, json = true, plotdata = true;
};

struct GridConfig {
  int n_u = 128, n_w = 128;
  double u_lo = -6, u_hi = 6, w_lo = -6, w_hi = 6;
  double dt_safety = 0.9;  // fraction of the admissible step
  long steps = 10000;
  long samples = 0;  // dataset size for the grid potential (0 = pure regularizer)
  double init_u = 0.3, init_w = 0.0, init_sd = 0.5;
};

struct ExperimentConfig {
  std::string name = "experiment";
  std::string outdir = "out";
  SimConfig sim;
  long epochs = 0;  // 0 = plain steps mode
  long samples_per_epoch = 200;
  long decay_every_epochs = 0;
  ActivationSpec act = ActivationSpec::smoothed_relu();
  LossSpec loss = LossSpec::clipped_square();
  std::vector<RegularizerSpec> regularizers;
  TeacherSpec teacher;
  EmitFlags emit;
  GridConfig grid;
  std::string lsi_route = "both";      // quartic | lyapunov | both
  std::string lsi_scaling = "both";    // theorem-statement | strict-proof-scaling | both
  double lsi_C = 1.0;
};

/// Builds and validates the full experiment description from a ConfigMap.
/// The default output directory honors $MEANFIELD_OUTDIR.
ExperimentConfig parse_experiment(const ConfigMap& cfg);

/// Arm list syntax: comma-separated `power:<beta>:<q>`, `quartic:<beta>`,
/// `quadcubic:<beta1>:<beta2>`.
std::vector<RegularizerSpec> parse_arms(const std::string& text);

/// Teacher neuron syntax: comma-separated `u:w1:...:wd`.
ParticleEnsemble parse_teacher_neurons(const std::string& text);

}  // namespace meanfield
