#include "meanfield/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace meanfield {
namespace {

std::string trim(const std::string& s) {
  size_t a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  size_t b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  if (!s.empty() && s.back() == sep) out.push_back("");
  return out;
}

bool known_key(const std::string& key) {
  for (const auto& [k, desc] : config_schema())
    if (k == key) return true;
  return false;
}

double parse_num(const std::string& key, const std::string& value) {
  try {
    size_t pos = 0;
    double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config: key '" + key + "' has non-numeric value '" + value + "'");
  }
}

}  // namespace

const std::vector<std::pair<std::string, std::string>>& config_schema() {
  static const std::vector<std::pair<std::string, std::string>> schema = {
      {"schema", "config schema version; must be 1"},
      {"name", "experiment label (informational)"},
      {"outdir", "output directory (default $MEANFIELD_OUTDIR or ./out)"},
      {"seed", "master seed for init/noise/data substreams"},
      {"n_particles", "student ensemble size N"},
      {"d", "input dimension"},
      {"lambda", "noise level / entropy weight"},
      {"dt", "base step size"},
      {"steps", "EM steps for plain simulate (epochs = 0 mode)"},
      {"batch", "minibatch size; 0 = full dataset each step"},
      {"record_every", "steps between trajectory records"},
      {"entropy_k", "k-NN order of the entropy estimator"},
      {"decay_every_steps", "steps between dt halvings in plain mode; 0 = off"},
      {"decay_factor", "dt multiplier per decay event"},
      {"epochs", "number of epochs (fresh teacher data per epoch); 0 = plain mode"},
      {"samples_per_epoch", "teacher samples drawn per epoch"},
      {"decay_every_epochs", "epochs between dt decays in epoch mode; 0 = off"},
      {"activation", "smoothed-relu | sigmoid | tanh"},
      {"kappa", "smoothed-relu sharpness"},
      {"x_max", "input radius the activation certificates assume"},
      {"loss", "square | clipped-square | huber"},
      {"loss_l1", "gradient clip level L1 for clipped-square / huber"},
      {"arms", "regularizer arms: power:<beta>:<q> | quartic:<beta> | quadcubic:<b1>:<b2>"},
      {"teacher_neurons", "comma list of u:w1:...:wd"},
      {"teacher_input", "sphere | ball | gaussian-clipped"},
      {"teacher_x_max", "input sampler radius"},
      {"teacher_noise_sd", "label noise standard deviation"},
      {"teacher_sum", "1 = raw sum over teacher neurons instead of the 1/M mean"},
      {"emit_csv", "write trajectory CSVs"},
      {"emit_json", "write rate-fit / LSI JSON reports"},
      {"emit_plotdata", "write neuron scatter and teacher CSVs"},
      {"grid_nu", "grid cells along u"},
      {"grid_nw", "grid cells along w"},
      {"grid_u_lo", "grid bounds"},
      {"grid_u_hi", "grid bounds"},
      {"grid_w_lo", "grid bounds"},
      {"grid_w_hi", "grid bounds"},
      {"grid_dt_safety", "fraction of the admissible explicit step"},
      {"grid_steps", "finite-volume steps for fp-oracle"},
      {"grid_samples", "teacher samples for the grid potential; 0 = pure regularizer"},
      {"grid_init_u", "Gaussian start: u mean"},
      {"grid_init_w", "Gaussian start: w mean"},
      {"grid_init_sd", "Gaussian start: standard deviation"},
      {"lsi_route", "quartic | lyapunov | both"},
      {"lsi_scaling", "theorem-statement | strict-proof-scaling | both"},
      {"lsi_C", "universal constant C in the Lyapunov bound"},
      {"gradcheck_trials", "random instances for gradcheck"},
      {"gradcheck_tol_grad", "relative gradient tolerance"},
      {"gradcheck_tol_hess", "relative Hessian tolerance"},
      {"fit_input", "trajectory CSV consumed by fit-rate"},
      {"fit_q_star", "Q* subtracted before the log-linear fit"},
      {"fit_t_lo", "fit window start (absolute t)"},
      {"fit_t_hi", "fit window end (absolute t)"},
  };
  return schema;
}

std::string ConfigMap::get_str(const std::string& key, const std::string& dflt) const {
  auto it = kv.find(key);
  return it == kv.end() ? dflt : it->second;
}

double ConfigMap::get_num(const std::string& key, double dflt) const {
  auto it = kv.find(key);
  return it == kv.end() ? dflt : parse_num(key, it->second);
}

long ConfigMap::get_int(const std::string& key, long dflt) const {
  auto it = kv.find(key);
  if (it == kv.end()) return dflt;
  double v = parse_num(key, it->second);
  long r = static_cast<long>(v);
  if (static_cast<double>(r) != v)
    throw ConfigError("config: key '" + key + "' must be an integer, got '" + it->second + "'");
  return r;
}

bool ConfigMap::get_flag(const std::string& key, bool dflt) const {
  auto it = kv.find(key);
  if (it == kv.end()) return dflt;
  const std::string& v = it->second;
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw ConfigError("config: key '" + key + "' must be a boolean, got '" + v + "'");
}

ConfigMap parse_config_text(const std::string& text, const std::string& origin) {
  ConfigMap cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    std::string key = trim(line.substr(0, eq));
    std::string value = trim(line.substr(eq + 1));
    if (!known_key(key))
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    if (cfg.kv.count(key))
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
    cfg.kv[key] = value;
  }
  if (cfg.get_int("schema", -1) != 1)
    throw ConfigError(origin + ": missing or unsupported 'schema' (expected schema = 1)");
  return cfg;
}

ConfigMap load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str(), path);
}

void apply_override(ConfigMap& cfg, const std::string& assignment) {
  size_t eq = assignment.find('=');
  if (eq == std::string::npos)
    throw ConfigError("--set expects key=value, got '" + assignment + "'");
  std::string key = trim(assignment.substr(0, eq));
  std::string value = trim(assignment.substr(eq + 1));
  if (!known_key(key)) throw ConfigError("--set: unknown key '" + key + "'");
  cfg.kv[key] = value;
}

std::vector<RegularizerSpec> parse_arms(const std::string& text) {
  std::vector<RegularizerSpec> arms;
  for (const std::string& item : split(text, ',')) {
    if (item.empty()) continue;
    std::vector<std::string> f = split(item, ':');
    try {
      if (f[0] == "power" && f.size() == 3)
        arms.push_back(RegularizerSpec::power(parse_num("arms", f[1]), parse_num("arms", f[2])));
      else if (f[0] == "quartic" && f.size() == 2)
        arms.push_back(RegularizerSpec::quartic(parse_num("arms", f[1])));
      else if (f[0] == "quadcubic" && f.size() == 3)
        arms.push_back(RegularizerSpec::quad_plus_cubic(parse_num("arms", f[1]),
                                                        parse_num("arms", f[2])));
      else
        throw ConfigError("config: bad arm '" + item + "'");
    } catch (const std::invalid_argument& e) {
      throw ConfigError("config: arm '" + item + "': " + e.what());
    }
  }
  return arms;
}

ParticleEnsemble parse_teacher_neurons(const std::string& text) {
  std::vector<std::vector<double>> rows;
  for (const std::string& item : split(text, ',')) {
    if (item.empty()) continue;
    std::vector<double> vals;
    for (const std::string& f : split(item, ':'))
      vals.push_back(parse_num("teacher_neurons", f));
    if (vals.size() < 2)
      throw ConfigError("config: teacher neuron '" + item + "' needs u and at least one w");
    rows.push_back(vals);
  }
  if (rows.empty()) return ParticleEnsemble(0, 1);
  int d = static_cast<int>(rows[0].size()) - 1;
  ParticleEnsemble ens(static_cast<int>(rows.size()), d);
  for (size_t i = 0; i < rows.size(); ++i) {
    if (static_cast<int>(rows[i].size()) - 1 != d)
      throw ConfigError("config: teacher neurons have inconsistent dimensions");
    ens.u(static_cast<int>(i)) = rows[i][0];
    for (int j = 0; j < d; ++j) ens.w(static_cast<int>(i))[j] = rows[i][j + 1];
  }
  return ens;
}

ExperimentConfig parse_experiment(const ConfigMap& cfg) {
  ExperimentConfig ec;
  ec.name = cfg.get_str("name", "experiment");
  const char* env = std::getenv("MEANFIELD_OUTDIR");
  ec.outdir = cfg.get_str("outdir", env ? env : "out");

  ec.sim.seed = static_cast<std::uint64_t>(cfg.get_int("seed", 0));
  ec.sim.n_particles = static_cast<int>(cfg.get_int("n_particles", 20));
  ec.sim.d = static_cast<int>(cfg.get_int("d", 2));
  ec.sim.lambda = cfg.get_num("lambda", 1.0);
  ec.sim.dt = cfg.get_num("dt", 1e-4);
  ec.sim.steps = cfg.get_int("steps", 0);
  ec.sim.batch = static_cast<int>(cfg.get_int("batch", 0));
  ec.sim.record_every = cfg.get_int("record_every", 100);
  ec.sim.entropy_k = static_cast<int>(cfg.get_int("entropy_k", 3));
  ec.sim.decay_every = cfg.get_int("decay_every_steps", 0);
  ec.sim.decay_factor = cfg.get_num("decay_factor", 0.5);

  ec.epochs = cfg.get_int("epochs", 0);
  ec.samples_per_epoch = cfg.get_int("samples_per_epoch", 200);
  ec.decay_every_epochs = cfg.get_int("decay_every_epochs", 0);

  std::string act = cfg.get_str("activation", "smoothed-relu");
  double kappa = cfg.get_num("kappa", 4.0);
  double x_max = cfg.get_num("x_max", 1.0);
  if (act == "smoothed-relu")
    ec.act = ActivationSpec::smoothed_relu(kappa, x_max);
  else if (act == "sigmoid")
    ec.act = ActivationSpec::sigmoid(x_max);
  else if (act == "tanh")
    ec.act = ActivationSpec::tanh_unit(x_max);
  else
    throw ConfigError("config: unknown activation '" + act + "'");

  std::string loss = cfg.get_str("loss", "clipped-square");
  double l1 = cfg.get_num("loss_l1", 10.0);
  if (loss == "square")
    ec.loss = LossSpec::square();
  else if (loss == "clipped-square")
    ec.loss = LossSpec::clipped_square(l1);
  else if (loss == "huber")
    ec.loss = LossSpec::huber(l1);
  else
    throw ConfigError("config: unknown loss '" + loss + "'");

  ec.regularizers = parse_arms(cfg.get_str("arms", "power:1:2,power:1:3"));
  if (ec.regularizers.empty())
    throw ConfigError("config: at least one regularizer arm is required");

  ec.teacher.neurons =
      parse_teacher_neurons(cfg.get_str("teacher_neurons", "1.1:1:2,-3.2:-3:1"));
  ec.teacher.act = ec.act;
  try {
    ec.teacher.law = parse_input_law(cfg.get_str("teacher_input", "sphere"));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  ec.teacher.x_max = cfg.get_num("teacher_x_max", x_max);
  ec.teacher.noise_sd = cfg.get_num("teacher_noise_sd", 0.0);
  ec.teacher.mean_normalize = !cfg.get_flag("teacher_sum", false);

  ec.emit.csv = cfg.get_flag("emit_csv", true);
  ec.emit.json = cfg.get_flag("emit_json", true);
  ec.emit.plotdata = cfg.get_flag("emit_plotdata", true);

  ec.grid.n_u = static_cast<int>(cfg.get_int("grid_nu", 128));
  ec.grid.n_w = static_cast<int>(cfg.get_int("grid_nw", 128));
  ec.grid.u_lo = cfg.get_num("grid_u_lo", -6.0);
  ec.grid.u_hi = cfg.get_num("grid_u_hi", 6.0);
  ec.grid.w_lo = cfg.get_num("grid_w_lo", -6.0);
  ec.grid.w_hi = cfg.get_num("grid_w_hi", 6.0);
  ec.grid.dt_safety = cfg.get_num("grid_dt_safety", 0.9);
  ec.grid.steps = cfg.get_int("grid_steps", 10000);
  ec.grid.samples = cfg.get_int("grid_samples", 0);
  ec.grid.init_u = cfg.get_num("grid_init_u", 0.3);
  ec.grid.init_w = cfg.get_num("grid_init_w", 0.0);
  ec.grid.init_sd = cfg.get_num("grid_init_sd", 0.5);

  ec.lsi_route = cfg.get_str("lsi_route", "both");
  if (ec.lsi_route != "quartic" && ec.lsi_route != "lyapunov" && ec.lsi_route != "both")
    throw ConfigError("config: lsi_route must be quartic | lyapunov | both");
  ec.lsi_scaling = cfg.get_str("lsi_scaling", "both");
  if (ec.lsi_scaling != "theorem-statement" && ec.lsi_scaling != "strict-proof-scaling" &&
      ec.lsi_scaling != "both")
    throw ConfigError(
        "config: lsi_scaling must be theorem-statement | strict-proof-scaling | both");
  ec.lsi_C = cfg.get_num("lsi_C", 1.0);

  if (ec.sim.n_particles < 1) throw ConfigError("config: n_particles must be >= 1");
  if (ec.sim.d < 1) throw ConfigError("config: d must be >= 1");
  if (!(ec.sim.dt > 0)) throw ConfigError("config: dt must be positive");
  if (ec.sim.lambda < 0) throw ConfigError("config: lambda must be >= 0");
  if (ec.epochs > 0) {
    if (ec.samples_per_epoch < 1)
      throw ConfigError("config: samples_per_epoch must be >= 1 in epoch mode");
    if (ec.teacher.neurons.size() == 0)
      throw ConfigError("config: epoch mode needs teacher_neurons");
    if (ec.teacher.neurons.input_dim() != ec.sim.d)
      throw ConfigError("config: teacher dimension differs from d");
  }
  return ec;
}

}  // namespace meanfield
