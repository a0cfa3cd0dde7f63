#pragma once

// Members of the B7 family of ALC metrics on S^3 x R^4: series seeding at the
// singular orbit, the Hitchin flow in both parameterisations, the (A_i, B_i)
// coefficients, the H function, and the asymptotic fibre length ell.

#include <span>
#include <stdexcept>
#include <vector>

#include "g2flow/ode.hpp"

namespace g2flow::b7 {

struct B7Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DegenerateSeed : B7Error {
  using B7Error::B7Error;
};
struct IncompleteMetric : B7Error {
  using B7Error::B7Error;
};
struct FormMismatch : B7Error {
  using B7Error::B7Error;
};

/// Family member (r0, abar, bbar) with p = -q = r0^3, subject to
/// 64 r0 (2 abar + bbar) = 1.  Complete for 64 abar r0 >= 1/3; the equality
/// case is the AC (Bryant-Salamon) cone, strict inequality is ALC.
struct B7Params {
  double r0 = 1.0;
  double abar = 0.0;
  double bbar = 0.0;

  double p() const { return r0 * r0 * r0; }
  double q() const { return -p(); }
  double completeness() const { return 64.0 * abar * r0; }
  bool is_ac(double tol = 1e-12) const {
    return std::abs(completeness() - 1.0 / 3.0) <= tol;
  }
  bool is_alc(double tol = 1e-12) const {
    return completeness() > 1.0 / 3.0 + tol;
  }
  bool constraint_ok(double tol = 1e-12) const {
    return std::abs(64.0 * r0 * (2.0 * abar + bbar) - 1.0) <= tol;
  }

  // t^3 coefficients of A1 and A3 near the singular orbit.
  double alpha1() const { return -2.0 * bbar / r0; }
  double alpha3() const { return -2.0 * (2.0 * abar - bbar) / r0; }

  /// Canonical coordinate on the family: bbar eliminated via the constraint.
  static B7Params from_r0_abar(double r0, double abar);
};

struct MetricSample {
  double t = 0;
  double a = 0, b = 0, adot = 0, bdot = 0, addot = 0, bddot = 0;
  double A1 = 0, A3 = 0, B1 = 0, B3 = 0;
  double H = 0;
  double cf = 0, cg = 0;  // instanton-ODE coefficient functions
};

struct MetricTrajectory {
  B7Params params;
  std::vector<MetricSample> samples;
  double ell = 0.0;
  double ell_fit_err = 0.0;
  double t_max = 0.0;
  double rel_tol = 0.0;
  ode::Termination termination = ode::Termination::ReachedEnd;
};

// ---- pointwise formulas -------------------------------------------------

struct ABCoeffs {
  double A1, A3, B1, B3;
};

/// The (A_i, B_i) coefficients from (a, b, adot, bdot, p).
ABCoeffs ab_coeffs(double a, double b, double adot, double bdot, double p);

/// Coefficient of g+ in the reduced instanton ODE (equals -d/dt log A3).
double coeff_cg(double a, double b, double adot, double bdot, double p);
/// Coefficient of f+ (tends to -1/ell at infinity).
double coeff_cf(double a, double b, double adot, double bdot, double p);

double eval_H_ab(double a, double b, double adot, double bdot, double p);
double eval_H_AB(const ABCoeffs& c);
/// Evaluates both forms of H and insists they agree (FormMismatch otherwise).
double eval_H(const MetricSample& s, double tol = 1e-9);
/// The Hhat decomposition (2-b')(4a^2-(b+p)^2-2a(b-p)) - b'(b-p)(b+p), b'=bdot/adot.
double eval_Hhat(double a, double b, double adot, double bdot, double p);

// ---- series at the singular orbit ---------------------------------------

struct SeriesState {
  double a, b, adot, bdot, addot, bddot;
};
SeriesState series_eval(const B7Params& p, double t);

/// Taylor coefficients of the Hitchin state (x1, x2, a, b) through t^4.
std::vector<std::vector<double>> hitchin_series(const B7Params& p);

/// The Hitchin flow as a singular system: the 1/t part is absorbed in the
/// caller-supplied series (the family member is not selected by y0 alone).
ode::SingularSystem hitchin_singular_system(const B7Params& p);

/// RHS of the Hitchin flow for y = (x1, x2, a, b).
void hitchin_rhs(double p, const double* y, double* dy);

// ---- operations ----------------------------------------------------------

MetricSample seed_metric(const B7Params& params, double eps);

struct FlowOptions {
  double eps = 0.0;  // 0 = derived from the series remainder bound
  bool check_inequalities = true;
};
MetricTrajectory flow_metric(const B7Params& params, double t_max,
                             double rel_tol, const FlowOptions& opt = {});

struct ABSample {
  double t, A1, A3, B1, B3;
  double dA1, dA3, dB1, dB3;
};
std::vector<ABSample> flow_metric_ABform(const B7Params& params, double t_max,
                                         double rel_tol);
/// Same system from an explicit seed (used by the scaling-symmetry checks).
std::vector<ABSample> flow_AB_from_seed(const double seed[4], double t0,
                                        double t_max, double rel_tol);

/// ell = lim A3 by inverse-t extrapolation over the final decade of samples.
/// Returns (ell, fit_err); FitUnstable if the residual exceeds 1e-3*ell.
std::pair<double, double> estimate_ell(const MetricTrajectory& traj);

struct IneqReport {
  bool ok = true;
  std::string violation;   // empty when ok
  double t_violation = 0;
  double min_b_minus_p = 0;
  double min_bdot = 0;
  double min_a_over_b_margin = 0;    // min of a/b - 1
  double min_ratio_margin = 0;       // min of adot/bdot - a/b
  double min_second_ratio_margin = 0;  // min of addot/bddot - adot/bdot (FD)
  double min_H = 0;
};
/// eq:b7ineq and H > 0 at every sample; the second-derivative ratio is checked
/// with centered differences on the stored grid (relative tolerance 1e-5).
IneqReport check_inequalities(const MetricTrajectory& traj);

// ---- interpolation --------------------------------------------------------

/// Hermite interpolation of (a, b, adot, bdot) over the stored grid, with the
/// singular-orbit series below the first sample.  All derived coefficient
/// combinations are evaluated from the interpolated state.
class MetricInterp {
 public:
  explicit MetricInterp(const MetricTrajectory& traj);

  double t_min() const { return ts_.front(); }
  double t_max() const { return ts_.back(); }
  const B7Params& params() const { return params_; }
  double ell() const { return ell_; }

  SeriesState eval(double t) const;
  ABCoeffs coeffs(double t) const;
  double cf(double t) const;
  double cg(double t) const;

  struct FGCoeffs {
    double u1;  // t * adot / (b - p)        -> 2 at t = 0
    double u2;  // t * bdot / (2a - b - p)   -> 2 at t = 0
    double k1;  // 2(a + p) / (2a + b + p)   -> 1 at t = 0
    double k2;  // 2(b + p) / (2a + b + p)   -> 1 at t = 0
  };
  FGCoeffs fg_coeffs(double t) const;

 private:
  B7Params params_;
  double ell_ = 0.0;
  std::vector<double> ts_;
  // channel-major Hermite data: value and slope per knot
  std::vector<double> a_, b_, ad_, bd_, add_, bdd_;
  std::size_t locate(double t) const;
};

}  // namespace g2flow::b7
