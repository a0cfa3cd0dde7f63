#pragma once

// Flat key=value run configuration with command-line overrides; scriptable
// sweeps without a config language.

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace g2flow::cfg {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  // family: either (r0, abar) or (r0, ell_target)
  double r0 = 1.0;
  std::optional<double> abar;
  std::optional<double> ell_target;

  // solver
  double rel_tol = 1e-9;
  double abs_tol = 1e-12;
  double t_max = 0.0;  // 0 = per-command default
  double blowup_threshold = 1e8;

  // scan
  double f1_min = 0.0, f1_max = 0.0;  // 0,0 = default [0, 2/ell^2]
  double g1_min = 0.0, g1_max = 0.0;
  std::size_t n_f = 64, n_g = 64;

  // boundary
  std::vector<double> g1_list;
  double bisect_tol = 1e-6;

  // taubnut / adiabatic
  double m = 1.0, C = 1.0, D = 1.0;
  double mu1 = 0.0, mu3 = 0.0;
  std::vector<double> r0_list;

  // end shooting
  double Ginf = 0.0, lambda = 0.0, T = 0.0;

  // output
  std::string out_dir = ".";
  std::string format = "csv";
  int jobs = 0;  // 0 = library default

  std::string canonical_text() const;  // normalized form, hashed for sidecars
};

/// Parse "key = value" lines ('#' comments, blank lines ignored).
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::string& path);
/// Apply one "key=value" override (the CLI layer maps flags onto these).
void apply_override(RunConfig& cfg, const std::string& key,
                    const std::string& value);

}  // namespace g2flow::cfg
