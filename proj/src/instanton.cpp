#include "g2flow/instanton.hpp"

#include <algorithm>
#include <cmath>

#include "g2flow/fitting.hpp"
#include "g2flow/ode.hpp"

namespace g2flow::inst {

const char* to_string(VerdictKind k) {
  switch (k) {
    case VerdictKind::Abelian: return "abelian";
    case VerdictKind::CompleteExponential: return "complete-exponential";
    case VerdictKind::CompleteBoundary: return "complete-boundary";
    case VerdictKind::Incomplete: return "incomplete";
    case VerdictKind::Undecided: return "undecided";
  }
  return "?";
}

std::array<double, 2> seed_instanton(const InstantonInit& init,
                                     const b7::B7Params& params, double eps) {
  const double a1 = params.alpha1(), a3 = params.alpha3();
  const double f3 = -0.5 * init.f1 * (init.g1 - 4.0 * a1);
  const double g3 = 2.0 * a3 * init.g1 - 0.5 * init.f1 * init.f1;
  const double e3 = eps * eps * eps;
  return {init.f1 * eps + f3 * e3, init.g1 * eps + g3 * e3};
}

namespace {

double instanton_eps(const InstantonInit& init, const b7::B7Params& params,
                     double abs_tol) {
  // metric series remainder
  auto series = b7::hitchin_series(params);
  double nrm = 1e-30;
  for (double v : series.back()) nrm = std::max(nrm, std::abs(v));
  double eps = std::pow(abs_tol / nrm, 0.2);
  // instanton cubic-term remainder
  const double f3 = 0.5 * std::abs(init.f1) *
                    (std::abs(init.g1) + 4 * std::abs(params.alpha1()));
  const double g3 = 2 * std::abs(params.alpha3() * init.g1) +
                    0.5 * init.f1 * init.f1;
  const double cub = std::max({f3, g3, 1e-3});
  eps = std::min(eps, std::pow(abs_tol / cub, 0.25));
  return std::min(eps, 0.05 * params.r0);
}

struct StopInfo {
  bool fired = false;
  double t = 0.0;
};

InstantonTrajectory finish_trajectory(InstantonTrajectory traj, double ell,
                                      double t_max, const StopInfo& stop,
                                      ode::Termination term) {
  traj.ell = ell;
  traj.t_max = t_max;
  if (traj.init.f1 == 0.0) {
    traj.verdict.kind = VerdictKind::Abelian;
    traj.verdict.Ginf = 2.0 * traj.init.g1 * ell;
    traj.verdict.Ginf_err = 0.0;
  } else if (term == ode::Termination::BlowUp ||
             term == ode::Termination::EventStop || stop.fired) {
    traj.verdict.kind = VerdictKind::Incomplete;
    traj.verdict.t_blowup = stop.fired ? stop.t : traj.samples.back().t;
  } else if (term == ode::Termination::StepUnderflow) {
    traj.verdict.kind = VerdictKind::Undecided;
  } else {
    traj.verdict = classify_trajectory(traj, ell, t_max);
  }
  return traj;
}

}  // namespace

InstantonTrajectory flow_instanton(const InstantonInit& init,
                                   const b7::MetricTrajectory& metric,
                                   double t_max, double rel_tol,
                                   CoeffMode mode) {
  if (mode == CoeffMode::Interpolate) {
    b7::MetricInterp interp(metric);
    return flow_instanton(init, interp, t_max, rel_tol);
  }
  const b7::B7Params& params = metric.params;
  ode::IntegrateOptions opt;
  opt.rel_tol = rel_tol;
  opt.abs_tol = std::max(1e-14, 1e-3 * rel_tol);
  opt.blowup_norm = std::max(1e9, 1000.0 * std::pow(t_max, 4));
  opt.max_step_scale = 0.2;
  const double eps = instanton_eps(init, params, opt.abs_tol);
  opt.t_floor = 10 * eps;

  b7::SeriesState st = b7::series_eval(params, eps);
  auto fg = seed_instanton(init, params, eps);
  std::vector<double> y0 = {st.adot * st.bdot, st.adot * st.adot,
                            st.a,             st.b,
                            fg[0],            fg[1]};
  const double p = params.p();
  auto rhs = [p](double, const double* y, double* dy) {
    b7::hitchin_rhs(p, y, dy);
    const double adot = std::sqrt(y[1]);
    const double bdot = y[0] / adot;
    const double cf = b7::coeff_cf(y[2], y[3], adot, bdot, p);
    const double cg = b7::coeff_cg(y[2], y[3], adot, bdot, p);
    dy[4] = -(cf + y[5]) * y[4];
    dy[5] = -cg * y[5] - y[4] * y[4];
  };
  StopInfo stop;
  const bool nonabelian = init.f1 != 0.0;
  opt.stop = [&stop, nonabelian](double t, std::span<const double> y) {
    if ((nonabelian && y[5] < 0.0) || std::abs(y[4]) > 1e8 ||
        std::abs(y[5]) > 1e8) {
      stop.fired = true;
      stop.t = t;
      return true;
    }
    return false;
  };
  ode::Trajectory tr = ode::integrate_adaptive(rhs, y0, eps, t_max, opt);

  InstantonTrajectory out;
  out.init = init;
  out.samples.reserve(tr.size());
  for (std::size_t i = 0; i < tr.size(); ++i) {
    auto y = tr.state(i);
    const double adot = std::sqrt(y[1]);
    const double bdot = y[0] / adot;
    b7::ABCoeffs c = b7::ab_coeffs(y[2], y[3], adot, bdot, p);
    out.samples.push_back(
        {tr.times[i], y[4], y[5], c.A1 * y[4], c.A3 * y[5], c.A3});
  }
  return finish_trajectory(std::move(out), metric.ell, t_max, stop,
                           tr.termination);
}

InstantonTrajectory flow_instanton(const InstantonInit& init,
                                   const b7::MetricInterp& interp,
                                   double t_max, double rel_tol) {
  if (t_max > interp.t_max() * (1 + 1e-12))
    throw InstError("flow_instanton: stored metric does not cover t_max");
  const b7::B7Params& params = interp.params();
  ode::IntegrateOptions opt;
  opt.rel_tol = rel_tol;
  opt.abs_tol = std::max(1e-14, 1e-3 * rel_tol);
  opt.blowup_norm = 1e9;
  opt.max_step_scale = 0.2;
  const double eps = instanton_eps(init, params, opt.abs_tol);
  opt.t_floor = 10 * eps;

  auto fg = seed_instanton(init, params, eps);
  std::vector<double> y0 = {fg[0], fg[1]};
  auto rhs = [&interp](double t, const double* y, double* dy) {
    const double cf = interp.cf(t);
    const double cg = interp.cg(t);
    dy[0] = -(cf + y[1]) * y[0];
    dy[1] = -cg * y[1] - y[0] * y[0];
  };
  StopInfo stop;
  const bool nonabelian = init.f1 != 0.0;
  opt.stop = [&stop, nonabelian](double t, std::span<const double> y) {
    if ((nonabelian && y[1] < 0.0) || std::abs(y[0]) > 1e8 ||
        std::abs(y[1]) > 1e8) {
      stop.fired = true;
      stop.t = t;
      return true;
    }
    return false;
  };
  ode::Trajectory tr = ode::integrate_adaptive(rhs, y0, eps, t_max, opt);

  InstantonTrajectory out;
  out.init = init;
  out.samples.reserve(tr.size());
  for (std::size_t i = 0; i < tr.size(); ++i) {
    auto y = tr.state(i);
    b7::ABCoeffs c = interp.coeffs(tr.times[i]);
    out.samples.push_back(
        {tr.times[i], y[0], y[1], c.A1 * y[0], c.A3 * y[1], c.A3});
  }
  return finish_trajectory(std::move(out), interp.ell(), t_max, stop,
                           tr.termination);
}

InstantonTrajectory abelian_solution(double g1,
                                     const b7::MetricTrajectory& metric) {
  InstantonTrajectory out;
  out.init = {0.0, g1};
  out.ell = metric.ell;
  out.t_max = metric.t_max;
  out.samples.reserve(metric.samples.size());
  for (const auto& s : metric.samples) {
    const double g = 2.0 * g1 * s.A3;
    out.samples.push_back({s.t, 0.0, g, 0.0, s.A3 * g, s.A3});
  }
  out.verdict.kind = VerdictKind::Abelian;
  out.verdict.Ginf = 2.0 * g1 * metric.ell;
  out.verdict.lambda_fit = 0.0;
  return out;
}

Verdict classify_trajectory(const InstantonTrajectory& traj, double ell,
                            double t_max, double boundary_tol) {
  Verdict v;
  if (boundary_tol <= 0) boundary_tol = boundary_tol_for(ell);
  if (traj.init.f1 == 0.0) {
    v.kind = VerdictKind::Abelian;
    v.Ginf = 2.0 * traj.init.g1 * ell;
    return v;
  }
  // Negative g with f != 0 is an irrecoverable exit (the negative trap).
  for (const auto& s : traj.samples) {
    if (s.g < 0.0) {
      v.kind = VerdictKind::Incomplete;
      v.t_blowup = s.t;
      return v;
    }
  }
  const double t_end = traj.samples.back().t;
  if (t_end < t_max * (1 - 1e-9)) {
    v.kind = VerdictKind::Undecided;
    return v;
  }
  // g/A3 = G_inf/ell + integral_t^inf f^2/A3: the last sample overestimates
  // G_inf by exactly the tail integral, and the drop over the final half of
  // the window bounds that tail for both decay classes.
  const double q_end = traj.samples.back().g / traj.samples.back().A3;
  double q_half = q_end;
  for (const auto& s : traj.samples) {
    if (s.t >= 0.5 * t_end) {
      q_half = s.g / s.A3;
      break;
    }
  }
  v.Ginf = ell * q_end;
  v.Ginf_err = ell * std::max(q_half - q_end, 0.0) + 1e-12 * std::abs(v.Ginf);
  if (v.Ginf_err > boundary_tol) {
    v.kind = VerdictKind::Undecided;
    return v;
  }
  if (std::abs(v.Ginf - 1.0 / ell) < boundary_tol) {
    v.kind = VerdictKind::CompleteBoundary;
    v.Ginf = 1.0 / ell;
  } else {
    v.kind = VerdictKind::CompleteExponential;
  }
  try {
    v.lambda_fit = decay_rate_fit(traj, ell, v.Ginf).lambda_fit;
  } catch (const fit::FitUnstable&) {
    v.lambda_fit = std::numeric_limits<double>::quiet_NaN();
  }
  return v;
}

DecayFit decay_rate_fit(const InstantonTrajectory& traj, double ell,
                        double Ginf) {
  const double t_end = traj.samples.back().t;
  std::vector<double> ts, logf;
  for (const auto& s : traj.samples) {
    if (s.t >= 0.1 * t_end && s.f > 0.0 && std::isfinite(std::log(s.f))) {
      ts.push_back(s.t);
      logf.push_back(std::log(s.f));
    }
  }
  if (ts.size() < 8 || ts.back() / ts.front() < 2.0)
    throw fit::FitUnstable("decay_rate_fit: insufficient dynamic range");
  fit::LinearFit f = fit::fit_basis(
      ts, logf,
      {[](double) { return 1.0; }, [](double t) { return t; },
       [](double t) { return std::log(t); }});
  DecayFit out;
  out.rate = f.coef[1];
  out.prefactor_power = f.coef[2];
  // lambda from the end normal form with the theoretical exponents pinned
  const double sigma = 1.0 / ell - Ginf;
  std::vector<double> lam;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const double t = ts[i];
    lam.push_back(std::exp(logf[i] - sigma * t + 2.5 * std::log(t)));
  }
  fit::TailLimit ll = fit::tail_limit_inverse_t(ts, lam);
  out.lambda_fit = ll.limit;
  return out;
}

RemainderReport check_g_remainder(const InstantonTrajectory& traj, double Ginf,
                                  double ell) {
  RemainderReport rep;
  const double t_end = traj.samples.back().t;
  const double sigma = 1.0 / ell - Ginf;  // <= 0
  std::vector<double> ws, ts;
  for (const auto& s : traj.samples) {
    const double k = (s.g - Ginf) * s.t * s.t;
    rep.sup_k = std::max(rep.sup_k, std::abs(k));
    if (s.t >= 0.1 * t_end) {
      const double gab = Ginf / ell * s.A3;
      const double w =
          std::abs(s.g - gab) * std::pow(s.t, 2.5) * std::exp(-sigma * s.t);
      ws.push_back(w);
      ts.push_back(s.t);
    }
  }
  if (ws.size() < 4) {
    rep.ok = false;
    return rep;
  }
  rep.first_weighted = ws.front();
  rep.last_weighted = ws.back();
  rep.tail_decreasing = ws.back() < ws.front();
  if (!rep.tail_decreasing) {
    rep.ok = false;
    rep.t_first_violation = ts.back();
  }
  return rep;
}

std::vector<FullSample> flow_full_instanton(double f1p, double f1m, double g1p,
                                            double g1m,
                                            const b7::MetricTrajectory& metric,
                                            double t_max, double rel_tol) {
  const b7::B7Params& params = metric.params;
  const double p = params.p();
  ode::IntegrateOptions opt;
  opt.rel_tol = rel_tol;
  opt.abs_tol = std::max(1e-14, 1e-3 * rel_tol);
  opt.blowup_norm = std::max(1e9, 1000.0 * std::pow(t_max, 4));
  opt.max_step_scale = 0.2;
  const double eps = instanton_eps({f1p, g1p}, params, opt.abs_tol);
  opt.t_floor = 10 * eps;

  b7::SeriesState st = b7::series_eval(params, eps);
  auto fg = seed_instanton({f1p, g1p}, params, eps);
  std::vector<double> y0 = {st.adot * st.bdot,
                            st.adot * st.adot,
                            st.a,
                            st.b,
                            fg[0],
                            f1m * eps,
                            fg[1],
                            g1m * eps};
  auto rhs = [p](double, const double* y, double* dy) {
    b7::hitchin_rhs(p, y, dy);
    const double a = y[2], b = y[3];
    const double adot = std::sqrt(y[1]);
    const double bdot = y[0] / adot;
    const double fp = y[4], fm = y[5], gp = y[6], gm = y[7];
    const double Q = 4 * a * a - (b + p) * (b + p);
    const double D = (b - p) * Q;
    const double kfp =
        (adot * (Q - 2 * a * (b - p)) - bdot * (a - b) * (2 * a + b + p)) / D;
    const double kfm =
        (adot * (Q + 2 * a * (b - p)) + bdot * (a + b) * (2 * a - b - p)) / D;
    const double kgp = bdot * (b + p) / Q;
    const double kgm = -(4 * a * adot * (b + p) + bdot * Q) / D;
    dy[4] = kfp * fp + fm * gm - fp * gp;
    dy[5] = kfm * fm + fp * gm + fm * gp;
    dy[6] = kgp * gp + fm * fm - fp * fp;
    dy[7] = kgm * gm + 2 * fp * fm;
  };
  ode::Trajectory tr = ode::integrate_adaptive(rhs, y0, eps, t_max, opt);
  std::vector<FullSample> out;
  out.reserve(tr.size());
  for (std::size_t i = 0; i < tr.size(); ++i) {
    auto y = tr.state(i);
    out.push_back({tr.times[i], y[4], y[5], y[6], y[7]});
  }
  return out;
}

}  // namespace g2flow::inst
