#include "g2flow/config.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "g2flow/io.hpp"

namespace g2flow::cfg {

namespace {

std::string trim(const std::string& s) {
  auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  char* end = nullptr;
  double x = std::strtod(v.c_str(), &end);
  if (!end || *end != '\0')
    throw ConfigError("config: bad numeric value for " + key + ": " + v);
  return x;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  double x = to_double(key, v);
  if (x < 0 || x != static_cast<std::size_t>(x))
    throw ConfigError("config: bad integer value for " + key);
  return static_cast<std::size_t>(x);
}

std::vector<double> to_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(to_double(key, item));
  }
  return out;
}

}  // namespace

void apply_override(RunConfig& cfg, const std::string& key,
                    const std::string& value) {
  if (key == "family.r0" || key == "r0")
    cfg.r0 = to_double(key, value);
  else if (key == "family.abar" || key == "abar")
    cfg.abar = to_double(key, value);
  else if (key == "family.ell_target" || key == "ell_target")
    cfg.ell_target = to_double(key, value);
  else if (key == "solver.rel_tol" || key == "rel_tol")
    cfg.rel_tol = to_double(key, value);
  else if (key == "solver.abs_tol" || key == "abs_tol")
    cfg.abs_tol = to_double(key, value);
  else if (key == "solver.t_max" || key == "t_max")
    cfg.t_max = to_double(key, value);
  else if (key == "solver.blowup_threshold" || key == "blowup_threshold")
    cfg.blowup_threshold = to_double(key, value);
  else if (key == "scan.f1_min")
    cfg.f1_min = to_double(key, value);
  else if (key == "scan.f1_max")
    cfg.f1_max = to_double(key, value);
  else if (key == "scan.g1_min")
    cfg.g1_min = to_double(key, value);
  else if (key == "scan.g1_max")
    cfg.g1_max = to_double(key, value);
  else if (key == "scan.n_f")
    cfg.n_f = to_size(key, value);
  else if (key == "scan.n_g")
    cfg.n_g = to_size(key, value);
  else if (key == "boundary.g1_list")
    cfg.g1_list = to_list(key, value);
  else if (key == "boundary.bisect_tol" || key == "bisect_tol")
    cfg.bisect_tol = to_double(key, value);
  else if (key == "taubnut.m" || key == "m")
    cfg.m = to_double(key, value);
  else if (key == "taubnut.C" || key == "C")
    cfg.C = to_double(key, value);
  else if (key == "taubnut.D" || key == "D")
    cfg.D = to_double(key, value);
  else if (key == "adiabatic.mu1" || key == "mu1")
    cfg.mu1 = to_double(key, value);
  else if (key == "adiabatic.mu3" || key == "mu3")
    cfg.mu3 = to_double(key, value);
  else if (key == "adiabatic.r0_list")
    cfg.r0_list = to_list(key, value);
  else if (key == "end.Ginf" || key == "Ginf")
    cfg.Ginf = to_double(key, value);
  else if (key == "end.lambda" || key == "lambda")
    cfg.lambda = to_double(key, value);
  else if (key == "end.T" || key == "T")
    cfg.T = to_double(key, value);
  else if (key == "output.directory" || key == "out")
    cfg.out_dir = value;
  else if (key == "output.format" || key == "format") {
    if (value != "csv" && value != "json")
      throw ConfigError("config: format must be csv or json");
    cfg.format = value;
  } else if (key == "jobs")
    cfg.jobs = static_cast<int>(to_size(key, value));
  else
    throw ConfigError("config: unknown key " + key);
}

RunConfig parse_config_text(const std::string& text) {
  RunConfig cfg;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config: line " + std::to_string(lineno) +
                        " is not key = value");
    apply_override(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  if (cfg.abar && cfg.ell_target)
    throw ConfigError("config: give exactly one of family.abar / family.ell_target");
  if (!(cfg.rel_tol > 0) || !(cfg.abs_tol > 0))
    throw ConfigError("config: tolerances must be positive");
  if (cfg.f1_max < cfg.f1_min || cfg.g1_max < cfg.g1_min)
    throw ConfigError("config: scan ranges must be ordered");
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

std::string RunConfig::canonical_text() const {
  std::ostringstream os;
  auto put = [&os](const char* k, const std::string& v) {
    os << k << "=" << v << "\n";
  };
  put("family.r0", io::fmt17(r0));
  if (abar) put("family.abar", io::fmt17(*abar));
  if (ell_target) put("family.ell_target", io::fmt17(*ell_target));
  put("solver.rel_tol", io::fmt17(rel_tol));
  put("solver.abs_tol", io::fmt17(abs_tol));
  put("solver.t_max", io::fmt17(t_max));
  put("solver.blowup_threshold", io::fmt17(blowup_threshold));
  put("scan.f1_min", io::fmt17(f1_min));
  put("scan.f1_max", io::fmt17(f1_max));
  put("scan.g1_min", io::fmt17(g1_min));
  put("scan.g1_max", io::fmt17(g1_max));
  put("scan.n_f", std::to_string(n_f));
  put("scan.n_g", std::to_string(n_g));
  std::string gl;
  for (double g : g1_list) gl += io::fmt17(g) + ",";
  put("boundary.g1_list", gl);
  put("boundary.bisect_tol", io::fmt17(bisect_tol));
  put("taubnut.m", io::fmt17(m));
  put("taubnut.C", io::fmt17(C));
  put("taubnut.D", io::fmt17(D));
  put("adiabatic.mu1", io::fmt17(mu1));
  put("adiabatic.mu3", io::fmt17(mu3));
  std::string rl;
  for (double r : r0_list) rl += io::fmt17(r) + ",";
  put("adiabatic.r0_list", rl);
  put("end.Ginf", io::fmt17(Ginf));
  put("end.lambda", io::fmt17(lambda));
  put("end.T", io::fmt17(T));
  put("output.format", format);
  return os.str();
}

}  // namespace g2flow::cfg
