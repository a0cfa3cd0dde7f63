#pragma once

// Shooting from infinity, the (f1, g1) parameter-plane scan, and extraction of
// the completeness boundary curve.

#include <string>
#include <utility>
#include <vector>

#include "g2flow/instanton.hpp"

namespace g2flow::cls {

struct ClsError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidEnd : ClsError {
  using ClsError::ClsError;
};
struct BadBracket : ClsError {
  using ClsError::ClsError;
};

struct EndConditions {
  double Ginf = 0.0;
  double lambda = 0.0;
};

/// The bounded remainder functions of the instanton-ODE coefficients at
/// infinity, tabulated from a metric trajectory with an inverse-t asymptote
/// beyond the stored window (they enter the end system as smooth data in
/// s = 1/t).
class EndCoefficients {
 public:
  EndCoefficients(const b7::MetricTrajectory& metric, double ell);
  double gamma1(double s) const;
  double gamma2(double s) const;
  double gamma1_inf() const { return g1_inf_; }
  double gamma2_inf() const { return g2_inf_; }

 private:
  std::vector<double> ss_, g1_, g2_;  // ascending in s = 1/t
  double g1_inf_ = 0, g1_slope_ = 0, g2_inf_ = 0, g2_slope_ = 0;
  double interp(const std::vector<double>& ys, double s, double c0,
                double c1) const;
};

struct EndState {
  double t = 0;
  double f = 0, g = 0;  // instanton functions at t = T
  double F = 0, G = 0;  // A1 f and A3 g
  double X = 0, Y = 0;  // end-system state at s = 1/T
};

/// Solve the end system as a singular IVP in s = 1/t from (X, Y)(0) = (lambda, 0)
/// and reconstruct the instanton data at t = T.
EndState end_seed(const EndConditions& ec, double ell,
                  const b7::MetricTrajectory& metric, double T,
                  double rel_tol = 1e-10);

struct BackwardSample {
  double t, F, G;
};
/// Backward integration of the (F, G) system in log time from data at T.
std::vector<BackwardSample> backward_fg(const b7::MetricInterp& interp,
                                        double F_T, double G_T, double T,
                                        double t_min, double rel_tol);

struct ShootResult {
  bool closed = false;
  double f1 = 0, g1 = 0;
  std::string reason;  // set when not closed
};
/// Integrate backward from the end data; closes when (F/t^2, G/t^2) converge
/// toward t = 0 (relative variation below 1e-4 over the final decade).
ShootResult shoot_backward(const EndConditions& ec,
                           const b7::MetricTrajectory& metric, double T,
                           double rel_tol);

// ---- region scan -----------------------------------------------------------

struct ScanOptions {
  double rel_tol = 1e-8;
  double base_t_max = 0.0;   // 0 = 12 * ell
  int max_escalations = 4;   // t_max doubles on Undecided, up to 16x
  bool refine_boundary = true;
  double bisect_tol = 0.0;   // 0 = cell width / 16
};

struct ClassificationMap {
  double ell = 0;
  std::vector<double> f1s, g1s;
  std::vector<inst::Verdict> verdicts;  // row-major: [ig * f1s.size() + if]
  std::vector<std::pair<double, double>> boundary;  // (g1, f_boundary)
  const inst::Verdict& at(std::size_t i_f, std::size_t i_g) const {
    return verdicts[i_g * f1s.size() + i_f];
  }
  std::size_t count(inst::VerdictKind k) const;
};

/// Classify one initial condition, escalating t_max while Undecided.
inst::Verdict classify_point(const b7::MetricTrajectory& metric, double f1,
                             double g1, const ScanOptions& opt = {});

ClassificationMap scan_region_serial(const b7::MetricTrajectory& metric,
                                     double f1_lo, double f1_hi, double g1_lo,
                                     double g1_hi, std::size_t n_f,
                                     std::size_t n_g,
                                     const ScanOptions& opt = {});
/// OpenMP version; cell results are bit-identical to the serial reference.
ClassificationMap scan_region(const b7::MetricTrajectory& metric, double f1_lo,
                              double f1_hi, double g1_lo, double g1_hi,
                              std::size_t n_f, std::size_t n_g,
                              const ScanOptions& opt = {});

struct BoundaryResult {
  double f_boundary = 0;
  double Ginf_check = 0;  // G_inf of the last complete-side iterate
  double t_max_used = 0;
};
/// Bisection in f1 at fixed g1 over a bracket straddling the transition.
BoundaryResult boundary_curve(const b7::MetricTrajectory& metric, double g1,
                              double f_lo, double f_hi, double tol,
                              const ScanOptions& opt = {});

// ---- comparison lemma -------------------------------------------------------

struct OrderReport {
  bool hypothesis_met = false;
  bool ordering_holds = false;
  double t_first_violation = 0;
  std::size_t checked = 0;
};
/// Checks the pairwise ordering (g >= ghat, fhat >= f > 0 at the window start,
/// solutions distinct) propagates strictly along the shared window.
OrderReport comparison_order(const inst::InstantonTrajectory& traj,
                             const inst::InstantonTrajectory& hat);

}  // namespace g2flow::cls
