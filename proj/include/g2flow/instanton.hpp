#pragma once

// The reduced G2-instanton ODEs along a B7 metric: series seeding at the
// singular orbit, forward flows (co-integrated or on stored metric data),
// the explicit abelian family, completeness classification, and the decay
// and remainder fits for complete solutions.

#include <array>
#include <vector>

#include "g2flow/b7_metric.hpp"

namespace g2flow::inst {

struct InstError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InstantonInit {
  double f1 = 0.0;
  double g1 = 0.0;
};

enum class VerdictKind {
  Abelian,
  CompleteExponential,
  CompleteBoundary,
  Incomplete,
  Undecided
};

const char* to_string(VerdictKind k);

struct Verdict {
  VerdictKind kind = VerdictKind::Undecided;
  double Ginf = 0.0;
  double Ginf_err = 0.0;
  double lambda_fit = 0.0;
  double t_blowup = 0.0;  // Incomplete only
};

struct InstantonSample {
  double t, f, g, F, G, A3;
};

struct InstantonTrajectory {
  InstantonInit init;
  std::vector<InstantonSample> samples;
  Verdict verdict;
  double ell = 0.0;
  double t_max = 0.0;
};

enum class CoeffMode { CoIntegrate, Interpolate };

/// CompleteBoundary tolerance: 1e-3 * ell^-1 (boundary solutions converge
/// only polynomially, so the G_inf fit error scales the same way).
inline double boundary_tol_for(double ell) { return 1e-3 / ell; }

/// Series state (f, g) at eps, with the exact t^3 corrections
/// f3 = -f1(g1 - 4 alpha1)/2 and g3 = 2 alpha3 g1 - f1^2/2.
std::array<double, 2> seed_instanton(const InstantonInit& init,
                                     const b7::B7Params& params, double eps);

InstantonTrajectory flow_instanton(const InstantonInit& init,
                                   const b7::MetricTrajectory& metric,
                                   double t_max, double rel_tol,
                                   CoeffMode mode = CoeffMode::CoIntegrate);
/// Interpolated-coefficient flow over a prebuilt interpolant (replay mode).
InstantonTrajectory flow_instanton(const InstantonInit& init,
                                   const b7::MetricInterp& interp,
                                   double t_max, double rel_tol);

/// f = 0, g = 2 g1 A3 evaluated on the metric grid; G_inf = 2 g1 ell.
InstantonTrajectory abelian_solution(double g1,
                                     const b7::MetricTrajectory& metric);

Verdict classify_trajectory(const InstantonTrajectory& traj, double ell,
                            double t_max, double boundary_tol = 0.0);

struct DecayFit {
  double rate = 0.0;             // fitted exponential rate (ell^-1 - G_inf)
  double prefactor_power = 0.0;  // fitted power of t (-5/2)
  double lambda_fit = 0.0;       // prefactor of t^-5/2 in the end form
};
/// Least-squares fit of log f against (1, t, log t) over the final decade.
DecayFit decay_rate_fit(const InstantonTrajectory& traj, double ell,
                        double Ginf);

struct RemainderReport {
  bool ok = true;
  double sup_k = 0.0;            // sup of |(g - G_inf) t^2|
  bool tail_decreasing = true;   // weighted remainder decreasing over tail
  double first_weighted = 0.0;
  double last_weighted = 0.0;
  double t_first_violation = 0.0;
};
/// Checks g = g_ab + o(t^-5/2 exp((ell^-1 - G_inf) t)) and boundedness of
/// k(t) = (g - G_inf) t^2 along the stored tail.
RemainderReport check_g_remainder(const InstantonTrajectory& traj, double Ginf,
                                  double ell);

struct FullSample {
  double t, fp, fm, gp, gm;
};
/// The four-function system on the equivariant bundle; the plus sector with
/// fm = gm = 0 seeds must reproduce flow_instanton.
std::vector<FullSample> flow_full_instanton(double f1p, double f1m, double g1p,
                                            double g1m,
                                            const b7::MetricTrajectory& metric,
                                            double t_max, double rel_tol);

}  // namespace g2flow::inst
