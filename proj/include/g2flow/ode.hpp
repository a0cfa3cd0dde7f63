#pragma once

// Adaptive explicit integration and singular initial-value machinery shared by
// the metric, instanton and shooting modules.

#include <array>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace g2flow::ode {

inline constexpr std::size_t kMaxDim = 8;

struct OdeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct InvalidSystem : OdeError {
  using OdeError::OdeError;
};

enum class Termination { ReachedEnd, BlowUp, StepUnderflow, EventStop };

/// Dense record of an adaptive run: one row per accepted step, with the RHS
/// value at each stored point (enables cubic Hermite interpolation downstream).
struct Trajectory {
  std::size_t dim = 0;
  std::vector<double> times;
  std::vector<double> states;  // size() * dim, row-major
  std::vector<double> derivs;  // same layout
  Termination termination = Termination::ReachedEnd;
  double termination_time = 0.0;

  std::size_t size() const { return times.size(); }
  std::span<const double> state(std::size_t i) const {
    return {states.data() + i * dim, dim};
  }
  std::span<const double> deriv(std::size_t i) const {
    return {derivs.data() + i * dim, dim};
  }
  std::span<const double> back_state() const { return state(size() - 1); }
  double back_time() const { return times.back(); }
};

struct IntegrateOptions {
  double rel_tol = 1e-9;
  double abs_tol = 1e-12;
  double blowup_norm = 1e8;   // sup-norm threshold for the BlowUp verdict
  double init_step = 0.0;     // 0 = estimate from the RHS
  double max_step = 0.0;      // 0 = unlimited
  double max_step_scale = 0.0;  // if >0, cap dt <= scale*max(|t|, t_floor)
  double t_floor = 1e-3;
  bool store_all = true;  // store every accepted step (else first/last only)
  // Optional early exit, checked after each accepted step.
  std::function<bool(double, std::span<const double>)> stop;
};

namespace detail {

// Dormand-Prince 5(4) tableau.
inline constexpr double kC[7] = {0.0, 1.0 / 5, 3.0 / 10, 4.0 / 5, 8.0 / 9, 1.0, 1.0};
inline constexpr double kA21 = 1.0 / 5;
inline constexpr double kA31 = 3.0 / 40, kA32 = 9.0 / 40;
inline constexpr double kA41 = 44.0 / 45, kA42 = -56.0 / 15, kA43 = 32.0 / 9;
inline constexpr double kA51 = 19372.0 / 6561, kA52 = -25360.0 / 2187,
                        kA53 = 64448.0 / 6561, kA54 = -212.0 / 729;
inline constexpr double kA61 = 9017.0 / 3168, kA62 = -355.0 / 33,
                        kA63 = 46732.0 / 5247, kA64 = 49.0 / 176,
                        kA65 = -5103.0 / 18656;
inline constexpr double kB1 = 35.0 / 384, kB3 = 500.0 / 1113, kB4 = 125.0 / 192,
                        kB5 = -2187.0 / 6784, kB6 = 11.0 / 84;
// b - bhat (error weights of the embedded 4th-order solution)
inline constexpr double kE1 = 71.0 / 57600, kE3 = -71.0 / 16695, kE4 = 71.0 / 1920,
                        kE5 = -17253.0 / 339200, kE6 = 22.0 / 525, kE7 = -1.0 / 40;

inline double sup_norm(const double* y, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) m = std::max(m, std::abs(y[i]));
  return m;
}

inline bool all_finite(const double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i)
    if (!std::isfinite(y[i])) return false;
  return true;
}

}  // namespace detail

/// Embedded Dormand-Prince 5(4) with PI step control.  RHS signature:
/// rhs(t, const double* y, double* dydt).  Integrates t0 -> t1 (t1 > t0).
template <class RHS>
Trajectory integrate_adaptive(RHS&& rhs, std::span<const double> y0, double t0,
                              double t1, const IntegrateOptions& opt = {}) {
  using namespace detail;
  const std::size_t n = y0.size();
  if (n == 0 || n > kMaxDim) throw OdeError("integrate_adaptive: bad dimension");
  if (!(t1 > t0)) throw OdeError("integrate_adaptive: need t1 > t0");
  if (!(opt.rel_tol > 0.0) || !(opt.abs_tol > 0.0))
    throw OdeError("integrate_adaptive: tolerances must be positive");

  std::array<double, kMaxDim> y, ynew, yerr, k1, k2, k3, k4, k5, k6, k7, tmp;
  for (std::size_t i = 0; i < n; ++i) y[i] = y0[i];

  Trajectory out;
  out.dim = n;
  auto push = [&](double t, const double* s, const double* d) {
    out.times.push_back(t);
    out.states.insert(out.states.end(), s, s + n);
    out.derivs.insert(out.derivs.end(), d, d + n);
  };

  double t = t0;
  rhs(t, y.data(), k1.data());
  if (!all_finite(k1.data(), n)) throw OdeError("integrate_adaptive: rhs not finite at start");
  push(t, y.data(), k1.data());

  const double span = t1 - t0;
  double max_dt = opt.max_step > 0 ? opt.max_step : span;
  auto step_cap = [&](double tt) {
    double cap = max_dt;
    if (opt.max_step_scale > 0)
      cap = std::min(cap, opt.max_step_scale * std::max(std::abs(tt), opt.t_floor));
    return cap;
  };

  // Initial step: scale so that an Euler step changes y by ~1% of its weight.
  double dt = opt.init_step;
  if (dt <= 0) {
    double d0 = 0, d1 = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double sc = opt.abs_tol + opt.rel_tol * std::abs(y[i]);
      d0 = std::max(d0, std::abs(y[i]) / sc);
      d1 = std::max(d1, std::abs(k1[i]) / sc);
    }
    dt = (d1 > 1e-10) ? 0.01 * d0 / d1 : 1e-6 * span;
    if (dt <= 0 || !std::isfinite(dt)) dt = 1e-6 * span;
  }
  dt = std::min(dt, step_cap(t));

  const double underflow = 1e-14 * span;
  double err_prev = 1.0;
  out.termination = Termination::ReachedEnd;

  while (t < t1) {
    if (dt < underflow) {
      out.termination = Termination::StepUnderflow;
      out.termination_time = t;
      break;
    }
    bool last = false;
    if (t + dt >= t1) {
      dt = t1 - t;
      last = true;
    }

    // Stages (k1 is FSAL from the previous accepted step).
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + dt * kA21 * k1[i];
    rhs(t + kC[1] * dt, tmp.data(), k2.data());
    for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + dt * (kA31 * k1[i] + kA32 * k2[i]);
    rhs(t + kC[2] * dt, tmp.data(), k3.data());
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + dt * (kA41 * k1[i] + kA42 * k2[i] + kA43 * k3[i]);
    rhs(t + kC[3] * dt, tmp.data(), k4.data());
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + dt * (kA51 * k1[i] + kA52 * k2[i] + kA53 * k3[i] + kA54 * k4[i]);
    rhs(t + kC[4] * dt, tmp.data(), k5.data());
    for (std::size_t i = 0; i < n; ++i)
      tmp[i] = y[i] + dt * (kA61 * k1[i] + kA62 * k2[i] + kA63 * k3[i] + kA64 * k4[i] +
                            kA65 * k5[i]);
    rhs(t + dt, tmp.data(), k6.data());
    for (std::size_t i = 0; i < n; ++i)
      ynew[i] = y[i] + dt * (kB1 * k1[i] + kB3 * k3[i] + kB4 * k4[i] + kB5 * k5[i] +
                             kB6 * k6[i]);
    rhs(t + dt, ynew.data(), k7.data());
    for (std::size_t i = 0; i < n; ++i)
      yerr[i] = dt * (kE1 * k1[i] + kE3 * k3[i] + kE4 * k4[i] + kE5 * k5[i] +
                      kE6 * k6[i] + kE7 * k7[i]);

    bool finite = all_finite(ynew.data(), n) && all_finite(k7.data(), n);
    double err = 0.0;
    if (finite) {
      for (std::size_t i = 0; i < n; ++i) {
        double sc = opt.abs_tol +
                    opt.rel_tol * std::max(std::abs(y[i]), std::abs(ynew[i]));
        double e = yerr[i] / sc;
        err += e * e;
      }
      err = std::sqrt(err / static_cast<double>(n));
    } else {
      err = 10.0;  // force rejection
    }

    if (err <= 1.0) {
      t += dt;
      y = ynew;
      k1 = k7;  // FSAL
      if (opt.store_all || t >= t1) push(t, y.data(), k1.data());

      if (sup_norm(y.data(), n) > opt.blowup_norm) {
        if (!opt.store_all) push(t, y.data(), k1.data());
        out.termination = Termination::BlowUp;
        out.termination_time = t;
        break;
      }
      if (opt.stop && opt.stop(t, std::span<const double>(y.data(), n))) {
        if (!opt.store_all) push(t, y.data(), k1.data());
        out.termination = Termination::EventStop;
        out.termination_time = t;
        break;
      }
      if (last && out.termination == Termination::ReachedEnd && t >= t1) {
        out.termination_time = t;
        break;
      }
      // PI controller (order 5 propagated, 4 embedded).
      double e = std::max(err, 1e-10);
      double fac = 0.9 * std::pow(e, -0.7 / 5.0) * std::pow(err_prev, 0.4 / 5.0);
      fac = std::min(5.0, std::max(0.2, fac));
      dt = std::min(dt * fac, step_cap(t));
      err_prev = e;
    } else {
      double fac = std::max(0.2, 0.9 * std::pow(err, -0.2));
      dt *= fac;
    }
  }
  if (!opt.store_all && out.times.back() != t) push(t, y.data(), k1.data());
  return out;
}

/// Evaluate a truncated vector Taylor series: sum_k coeffs[k] * eps^k.
std::vector<double> taylor_seed(const std::vector<std::vector<double>>& coeffs,
                                double eps);

/// Singular IVP in the normal form y' = M_{-1}(y)/t + M(t,y), y(0)=y0.
/// `series` optionally carries explicit Taylor coefficients (series[0] == y0);
/// when absent, a two-term seed is built from finite differences of the maps.
struct SingularSystem {
  std::size_t dim = 0;
  std::function<void(std::span<const double>, std::span<double>)> m_minus1;
  std::function<void(double, std::span<const double>, std::span<double>)> m_smooth;
  std::vector<double> y0;
  std::vector<std::vector<double>> series;
};

struct SingularCheck {
  bool ok = false;
  std::string reason;
  std::vector<double> jacobian;        // dim x dim, row-major, d(M_{-1}) at y0
  std::vector<double> eigen_real;      // eigenvalues of the Jacobian
  std::vector<double> eigen_imag;
};

/// Theorem-style validity check: M_{-1}(y0) = 0 within tol, and no eigenvalue
/// of d(M_{-1})|_{y0} within `int_tol` of a positive integer.
SingularCheck check_singular_system(const SingularSystem& sys,
                                    double tol_cond1 = 1e-12,
                                    double int_tol = 1e-8);

/// Solve the singular IVP on (0, t_end]: seed with a truncated series at an
/// eps chosen from a crude remainder bound (or the override), then hand off
/// to the adaptive integrator.  Conditions (i)/(ii) are enforced when no
/// explicit series is supplied (an explicit series is the caller selecting a
/// solution branch).
Trajectory solve_singular_ivp(const SingularSystem& sys, double t_end,
                              double rel_tol, IntegrateOptions opt = {},
                              double eps_override = 0.0);

/// The eps the solver would use (exposed for the eps-robustness tests).
double singular_seed_eps(const SingularSystem& sys, double abs_tol);

}  // namespace g2flow::ode
