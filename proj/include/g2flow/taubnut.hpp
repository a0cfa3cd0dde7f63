#pragma once

// Closed-form Taub-NUT metric and its invariant ASD instanton families, the
// conserved quantity of the ASD system, and the adiabatic-limit bridge from
// the B7 family (rescaled flows and the convergence table).

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "g2flow/b7_metric.hpp"

namespace g2flow::tn {

struct TnError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DomainError : TnError {
  using TnError::TnError;
};
struct ConstraintViolation : TnError {
  using TnError::TnError;
};

struct TaubNutParams {
  double m = 1.0;  // asymptotic circle radius
};

// ---- metric ---------------------------------------------------------------

/// Arc length from eta; closed form of the quadrature of
/// dt = -sqrt(eta) (eta - m^-2)^-2 deta from eta = infinity.
double t_of_eta(double m, double eta);
double eta_of_t(double m, double t);

struct TnPoint {
  double f1, f3, t;
};
TnPoint tn_metric(const TaubNutParams& p, double eta);

/// RHS of the Taub-NUT metric ODE for y = (f1, f3).
void tn_rhs(const double* y, double* dy);

/// Taylor coefficients of (f1, f3) at the origin through t^3.
std::vector<std::vector<double>> tn_series(double m);

// ---- ASD instanton families ------------------------------------------------

enum class AsdFamily { TwoParameter, Abelian, EtesiHausel };

struct AsdParams {
  AsdFamily family = AsdFamily::TwoParameter;
  double C = 0.0;  // TwoParameter / Abelian
  double D = 0.0;  // TwoParameter
  double B = 0.0;  // EtesiHausel
};

struct AsdPoint {
  double a1, a3;
};
AsdPoint asd_eval(const AsdParams& p, double m, double eta);
/// Analytic eta-derivatives of the closed forms.
AsdPoint asd_eval_deta(const AsdParams& p, double m, double eta);

/// Max absolute residual of the closed form in the ASD ODE over the grid,
/// via analytic eta-derivatives and the chain rule through dt/deta.
struct AsdResidual {
  double max_r1 = 0.0, max_r3 = 0.0;
  double max() const { return max_r1 > max_r3 ? max_r1 : max_r3; }
};
AsdResidual asd_residual(const AsdParams& p, double m,
                         std::span<const double> eta_grid);

/// Q = (eta - m^-2)^2 d(eta a3)/deta - (eta a3 - m^-2)^2; equals -C^2 on
/// solutions of the ASD system.
double conserved_quantity(double eta, double a3, double da3_deta, double m);
double conserved_quantity_closed(const AsdParams& p, double m, double eta);

/// Deterministic random-residual sweep (the reproducible self-check suite);
/// returns the max residual over `n` draws of (m, C, D).  Serial reference
/// and OpenMP versions must agree exactly.
double asd_residual_sweep_serial(int n, std::uint64_t seed);
double asd_residual_sweep(int n, std::uint64_t seed);

// ---- local data of the ASD families at the origin ---------------------------

/// t^2 coefficients (mu1, mu3) of (a1, a3) near t = 0 for the TwoParameter
/// family: mu1 = C csch(D)/4, mu3 = (m^-2 + C coth(D))/4.
struct MuPair {
  double mu1, mu3;
};
MuPair mu_from_cd(double m, double C, double D);
/// Inverse map; mu1 = 0 yields the Abelian family with C = 4 mu3 - m^-2.
/// ConstraintViolation unless mu3 - 1/(4 m^2) >= mu1 >= 0.
AsdParams cd_from_mu(double m, double mu1, double mu3);

// ---- rescaled B7 flows and the adiabatic limit ------------------------------

/// Fibre-length dictionary between a B7 member and its adiabatic Taub-NUT:
/// m^2 = (24 r0^3 (2 abar - bbar))^-1.
double adiabatic_m(const b7::B7Params& p);
/// Family member at scale r0 whose adiabatic limit is Taub-NUT of radius m.
b7::B7Params b7_params_for_adiabatic(double m, double r0);

struct RescaledSample {
  double t, A1, A3, B1, B3;
};
/// Integrates the rescaled Hitchin system at deformation parameter lambda
/// (lambda = r0 reproduces the B7 member; lambda = 0 decouples to Taub-NUT).
std::vector<RescaledSample> rescaled_b7_flow(const b7::B7Params& params,
                                             double lambda, double t_max,
                                             double rel_tol);

struct DressedSample {
  double t, F, G, A1, A3, B1, B3;
};
/// Co-integrates the lambda-dressed instanton system along the rescaled
/// metric from seeds F = mu1 t^2, G = mu3 t^2 (+ t^4 corrections).
std::vector<DressedSample> adiabatic_instanton_flow(const b7::B7Params& params,
                                                    double lambda, double mu1,
                                                    double mu3, double t_max,
                                                    double rel_tol);

struct ConvergenceRow {
  double r0, lambda, sup_err_a1, sup_err_a3, t_max;
};
/// For each r0, integrate the dressed system on the m-fixed family member and
/// compare against the closed-form ASD solution with matching local data.
std::vector<ConvergenceRow> adiabatic_instanton_compare(
    double mu1, double mu3, double m, std::span<const double> r0_list,
    double t_max, double rel_tol);

/// Eigenvalues of the two boundary-expansion linearisation blocks
/// [[-2,-1],[-2,-1]] and [[-4,2],[4,-6]]: {0, -3} and {-2, -8}.
std::vector<double> linearisation_eigenvalues();

}  // namespace g2flow::tn
