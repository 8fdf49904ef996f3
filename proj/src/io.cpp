#include "meanfield/io.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "meanfield/config.hpp"

namespace meanfield {
namespace {

using nlohmann::json;

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode = std::ios::out) {
  std::ofstream out(path, mode);
  if (!out) throw std::runtime_error("io: cannot write '" + path + "'");
  return out;
}

std::ifstream open_in(const std::string& path, std::ios::openmode mode = std::ios::in) {
  std::ifstream in(path, mode);
  if (!in) throw std::runtime_error("io: cannot read '" + path + "'");
  return in;
}

std::vector<double> parse_csv_row(const std::string& line, const std::string& path) {
  std::vector<double> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    try {
      out.push_back(std::stod(cell));
    } catch (const std::exception&) {
      throw std::runtime_error("io: bad number '" + cell + "' in " + path);
    }
  }
  return out;
}

}  // namespace

void write_trajectory_csv(const TrajectoryLog& log, const std::string& path) {
  auto out = open_out(path);
  out << "step,t,Q,risk,reg_mean,entropy,grad_norm_mean\n";
  for (const auto& r : log.records) {
    out << r.step << ',' << fmt(r.t) << ',' << fmt(r.Q) << ',' << fmt(r.risk) << ','
        << fmt(r.reg_mean) << ',' << fmt(r.entropy) << ',' << fmt(r.grad_norm_mean)
        << '\n';
  }
  if (!out) throw std::runtime_error("io: write failed for '" + path + "'");
}

TrajectoryLog read_trajectory_csv(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("step,t,Q", 0) != 0)
    throw std::runtime_error("io: '" + path + "' is not a trajectory CSV");
  TrajectoryLog log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> v = parse_csv_row(line, path);
    if (v.size() != 7)
      throw std::runtime_error("io: trajectory row with " + std::to_string(v.size()) +
                               " columns in " + path);
    TrajectoryRecord r;
    r.step = static_cast<long>(v[0]);
    r.t = v[1];
    r.Q = v[2];
    r.risk = v[3];
    r.reg_mean = v[4];
    r.entropy = v[5];
    r.grad_norm_mean = v[6];
    log.records.push_back(r);
  }
  return log;
}

void write_ensemble_json(const ParticleEnsemble& ens, const std::string& path) {
  json j;
  j["d"] = ens.input_dim();
  j["n"] = ens.size();
  json rows = json::array();
  for (int i = 0; i < ens.size(); ++i) {
    json row = json::array();
    row.push_back(ens.u(i));
    for (int k = 0; k < ens.input_dim(); ++k) row.push_back(ens.w(i)[k]);
    rows.push_back(row);
  }
  j["particles"] = rows;
  j["ids"] = ens.ids();
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

ParticleEnsemble read_ensemble_json(const std::string& path) {
  auto in = open_in(path);
  json j = json::parse(in);
  int n = j.at("n").get<int>();
  int d = j.at("d").get<int>();
  ParticleEnsemble ens(n, d);
  const auto& rows = j.at("particles");
  if (static_cast<int>(rows.size()) != n)
    throw std::runtime_error("io: particle count mismatch in " + path);
  for (int i = 0; i < n; ++i) {
    const auto& row = rows[i];
    if (static_cast<int>(row.size()) != d + 1)
      throw std::runtime_error("io: particle row size mismatch in " + path);
    ens.u(i) = row[0].get<double>();
    for (int k = 0; k < d; ++k) ens.w(i)[k] = row[k + 1].get<double>();
  }
  if (j.contains("ids")) ens.ids() = j.at("ids").get<std::vector<std::uint64_t>>();
  return ens;
}

void write_scatter_csv(const ParticleEnsemble& ens, const std::string& path,
                       bool scale) {
  auto out = open_out(path);
  out << "u";
  for (int k = 0; k < ens.input_dim(); ++k) out << ",w" << (k + 1);
  for (int k = 0; k < ens.input_dim(); ++k) out << ",uw" << (k + 1);
  out << '\n';
  double s = scale ? 1.0 / std::max(1, ens.size()) : 1.0;
  for (int i = 0; i < ens.size(); ++i) {
    out << fmt(ens.u(i));
    for (int k = 0; k < ens.input_dim(); ++k) out << ',' << fmt(ens.w(i)[k]);
    for (int k = 0; k < ens.input_dim(); ++k)
      out << ',' << fmt(s * ens.u(i) * ens.w(i)[k]);
    out << '\n';
  }
}

void write_grid_csv(const GridDensity& g, const std::string& path) {
  auto out = open_out(path);
  out << "# u_lo,u_hi,w_lo,w_hi,n_u,n_w\n";
  out << "# " << fmt(g.u_lo) << ',' << fmt(g.u_hi) << ',' << fmt(g.w_lo) << ','
      << fmt(g.w_hi) << ',' << g.n_u() << ',' << g.n_w() << '\n';
  for (int i = 0; i < g.n_u(); ++i) {
    for (int j = 0; j < g.n_w(); ++j) {
      if (j) out << ',';
      out << fmt(g.rho(i, j));
    }
    out << '\n';
  }
}

GridDensity read_grid_csv(const std::string& path) {
  auto in = open_in(path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("# u_lo", 0) != 0)
    throw std::runtime_error("io: '" + path + "' is not a grid CSV");
  if (!std::getline(in, line) || line.size() < 2)
    throw std::runtime_error("io: missing grid header in " + path);
  std::vector<double> h = parse_csv_row(line.substr(2), path);
  if (h.size() != 6) throw std::runtime_error("io: bad grid header in " + path);
  GridDensity g = make_grid(static_cast<int>(h[4]), static_cast<int>(h[5]), h[0], h[1],
                            h[2], h[3]);
  for (int i = 0; i < g.n_u(); ++i) {
    if (!std::getline(in, line))
      throw std::runtime_error("io: truncated grid CSV " + path);
    std::vector<double> row = parse_csv_row(line, path);
    if (static_cast<int>(row.size()) != g.n_w())
      throw std::runtime_error("io: grid row width mismatch in " + path);
    for (int j = 0; j < g.n_w(); ++j) g.rho(i, j) = row[j];
  }
  return g;
}

void write_grid_binary(const GridDensity& g, const std::string& path) {
  auto out = open_out(path, std::ios::binary);
  char head[128];
  std::snprintf(head, sizeof(head), "mfgrid1 %d %d %.17g %.17g %.17g %.17g\n",
                g.n_u(), g.n_w(), g.u_lo, g.u_hi, g.w_lo, g.w_hi);
  out << head;
  for (int i = 0; i < g.n_u(); ++i)
    for (int j = 0; j < g.n_w(); ++j) {
      double v = g.rho(i, j);
      out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
  if (!out) throw std::runtime_error("io: write failed for '" + path + "'");
}

GridDensity read_grid_binary(const std::string& path) {
  auto in = open_in(path, std::ios::binary);
  std::string head;
  std::getline(in, head);
  int nu = 0, nw = 0;
  double ulo, uhi, wlo, whi;
  if (std::sscanf(head.c_str(), "mfgrid1 %d %d %lg %lg %lg %lg", &nu, &nw, &ulo, &uhi,
                  &wlo, &whi) != 6)
    throw std::runtime_error("io: '" + path + "' is not a binary grid file");
  GridDensity g = make_grid(nu, nw, ulo, uhi, wlo, whi);
  for (int i = 0; i < nu; ++i)
    for (int j = 0; j < nw; ++j) {
      double v;
      in.read(reinterpret_cast<char*>(&v), sizeof(v));
      if (!in) throw std::runtime_error("io: truncated binary grid " + path);
      g.rho(i, j) = v;
    }
  return g;
}

void write_ratefit_json(const RateFit& fit, const std::string& path) {
  json j = {{"rate", fit.rate},         {"intercept", fit.intercept},
            {"r_squared", fit.r_squared}, {"q_star", fit.q_star},
            {"window_lo", fit.window_lo}, {"window_hi", fit.window_hi},
            {"n_points", fit.n_points}};
  auto out = open_out(path);
  out << j.dump(2) << '\n';
}

void write_lsi_json(const std::vector<LsiBoundReport>& reports,
                    const std::string& path) {
  json arr = json::array();
  for (const auto& r : reports) {
    json j = {{"route", r.route},
              {"scaling_mode", r.scaling_mode},
              {"log10_nu", r.log10_nu},
              {"overflow", r.overflow},
              {"rate", r.rate},
              {"log10_rate", r.log10_rate},
              {"lambda", r.lambda},
              {"intermediates", r.intermediates}};
    j["nu"] = r.overflow ? json("inf") : json(r.nu);
    arr.push_back(j);
  }
  auto out = open_out(path);
  out << arr.dump(2) << '\n';
}

std::string schema_markdown() {
  std::ostringstream md;
  md << "# Config schema (schema = 1)\n\n"
     << "Flat `key = value` lines; `#` starts a comment; unknown keys are"
     << " rejected.\nEvery subcommand takes `--config FILE` plus repeatable"
     << " `--set key=value` overrides.\n\n| key | meaning |\n|---|---|\n";
  for (const auto& [k, desc] : config_schema()) md << "| `" << k << "` | " << desc << " |\n";
  md << "\n# File formats\n\n"
     << "## trajectory_<arm>.csv\n"
     << "Columns `step,t,Q,risk,reg_mean,entropy,grad_norm_mean`; one row per"
     << " record; doubles as `%.17g`. `Q` is risk + mean regularizer -"
     << " lambda * entropy; `grad_norm_mean` is the particle-mean of"
     << " ||grad U||^2.\n\n"
     << "## snapshots_<arm>.json\n"
     << "`{n, d, particles: [[u, w_1..w_d]...], ids: [...]}` for the final"
     << " ensemble.\n\n"
     << "## neurons_<arm>.csv / neurons_<arm>_scaled.csv / teacher.csv\n"
     << "Columns `u,w1..wd,uw1..uwd`. The `uw` block is the projected point"
     << " u*w; the `_scaled` variant divides it by the ensemble size.\n\n"
     << "## ratefit_<arm>.json\n"
     << "Least-squares fit of log(Q_t - Q*) vs t: `rate` (decay rate),"
     << " `intercept`, `r_squared`, `q_star`, window, point count.\n\n"
     << "## lsi_<arm>.json\n"
     << "Array of bound reports: `route` (quartic-hs | lyapunov),"
     << " `scaling_mode`, `log10_nu`, `nu` (\"inf\" when log10_nu > 300),"
     << " `overflow`, `rate` = 2*lambda/nu, `log10_rate`, `lambda`, and route"
     << " intermediates (R, L or gamma, R, c1, c2, r_star, ...).\n\n"
     << "## grid CSV / binary\n"
     << "CSV: two `#` header lines (`u_lo,u_hi,w_lo,w_hi,n_u,n_w`, then the"
     << " values) followed by n_u rows of n_w densities. Binary: one text"
     << " line `mfgrid1 n_u n_w u_lo u_hi w_lo w_hi` then row-major"
     << " little-endian doubles.\n";
  return md.str();
}

void write_schema_md(const std::string& path) {
  auto out = open_out(path);
  out << schema_markdown();
}

}  // namespace meanfield
