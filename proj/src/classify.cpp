#include "g2flow/classify.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "g2flow/fitting.hpp"
#include "g2flow/ode.hpp"

namespace g2flow::cls {

// ---- EndCoefficients --------------------------------------------------------

EndCoefficients::EndCoefficients(const b7::MetricTrajectory& metric,
                                 double ell) {
  const double t_max = metric.samples.back().t;
  std::vector<double> ts, g1v, g2v;
  for (const auto& s : metric.samples) {
    if (s.t < 1.0) continue;  // the remainders are asymptotic data
    const double t2 = s.t * s.t;
    const double g1 = (s.cg + 4.5 * ell * ell / (t2 * s.t)) * t2 * t2;
    const double g2 = (s.cf + 1.0 / ell - 2.5 / s.t) * t2;
    ts.push_back(s.t);
    g1v.push_back(g1);
    g2v.push_back(g2);
  }
  if (ts.size() < 16)
    throw ClsError("EndCoefficients: metric trajectory too short");
  // inverse-t asymptote from the final decade
  std::vector<double> tt, w1, w2;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts[i] >= 0.1 * t_max) {
      tt.push_back(ts[i]);
      w1.push_back(g1v[i]);
      w2.push_back(g2v[i]);
    }
  }
  auto lin = [](std::span<const double> x, std::span<const double> y) {
    fit::LinearFit f = fit::fit_basis(
        x, y, {[](double) { return 1.0; }, [](double t) { return 1.0 / t; }});
    return std::pair<double, double>{f.coef[0], f.coef[1]};
  };
  std::tie(g1_inf_, g1_slope_) = lin(tt, w1);
  std::tie(g2_inf_, g2_slope_) = lin(tt, w2);

  // store ascending in s = 1/t
  for (std::size_t i = ts.size(); i-- > 0;) {
    ss_.push_back(1.0 / ts[i]);
    g1_.push_back(g1v[i]);
    g2_.push_back(g2v[i]);
  }
}

double EndCoefficients::interp(const std::vector<double>& ys, double s,
                               double c0, double c1) const {
  if (s <= ss_.front()) return c0 + c1 * s;  // beyond the stored window
  if (s >= ss_.back()) return ys.back();
  auto it = std::upper_bound(ss_.begin(), ss_.end(), s);
  std::size_t i = static_cast<std::size_t>(it - ss_.begin()) - 1;
  const double w = (s - ss_[i]) / (ss_[i + 1] - ss_[i]);
  return (1 - w) * ys[i] + w * ys[i + 1];
}

double EndCoefficients::gamma1(double s) const {
  return interp(g1_, s, g1_inf_, g1_slope_);
}
double EndCoefficients::gamma2(double s) const {
  return interp(g2_, s, g2_inf_, g2_slope_);
}

// ---- end_seed ---------------------------------------------------------------

EndState end_seed(const EndConditions& ec, double ell,
                  const b7::MetricTrajectory& metric, double T,
                  double rel_tol) {
  if (!(ell > 0)) throw ClsError("end_seed: need ell > 0");
  if (ec.Ginf < 1.0 / ell - 1e-12)
    throw InvalidEnd("end_seed: Ginf below 1/ell");
  if (metric.samples.back().t < 1.2 * T)
    throw ClsError("end_seed: metric trajectory must extend past T");

  EndCoefficients gam(metric, ell);
  const double G = ec.Ginf;
  const double sigma = 1.0 / ell - G;  // <= 0
  const double l2 = ell * ell;

  ode::SingularSystem sys;
  sys.dim = 2;
  sys.y0 = {ec.lambda, 0.0};
  sys.m_minus1 = [](std::span<const double> y, std::span<double> out) {
    out[0] = 0.0;
    out[1] = -2.0 * y[1];
  };
  sys.m_smooth = [&gam, G, sigma, l2](double s, std::span<const double> y,
                                      std::span<double> out) {
    const double X = y[0], Y = y[1];
    const double g1s = gam.gamma1(s);
    const double g2s = gam.gamma2(s);
    double E = 0.0;
    if (s > 0) {
      const double arg = 2.0 * sigma / s;
      E = arg < -700.0 ? 0.0 : std::exp(arg);
    } else {
      E = sigma < 0 ? 0.0 : 1.0;
    }
    out[0] = (g2s - 2.25 * l2 * G - Y) * X;
    out[1] = -G * g1s -
             (10.125 * l2 * l2 * G + 4.5 * l2 * Y + X * X * E) * s +
             g1s * (Y + 2.25 * l2 * G) * s * s;
  };

  ode::IntegrateOptions opt;
  opt.abs_tol = std::max(1e-14, 1e-4 * rel_tol);
  ode::Trajectory tr = ode::solve_singular_ivp(sys, 1.0 / T, rel_tol, opt);

  EndState es;
  es.t = T;
  es.X = tr.back_state()[0];
  es.Y = tr.back_state()[1];
  es.f = std::pow(T, -2.5) * std::exp(sigma * T) * es.X;
  es.g = G - (2.25 * l2 * G + es.Y) / (T * T);
  b7::MetricInterp interp(metric);
  b7::ABCoeffs c = interp.coeffs(T);
  es.F = c.A1 * es.f;
  es.G = c.A3 * es.g;
  return es;
}

// ---- backward shooting --------------------------------------------------------

std::vector<BackwardSample> backward_fg(const b7::MetricInterp& interp,
                                        double F_T, double G_T, double T,
                                        double t_min, double rel_tol) {
  // tau = ln(T / t) runs forward from 0 as t decreases from T.
  const double tau_end = std::log(T / t_min);
  const double big = 10.0 * (1.0 + std::abs(F_T) + std::abs(G_T));
  auto rhs = [&interp, T](double tau, const double* y, double* dy) {
    const double t = T * std::exp(-tau);
    const auto c = interp.fg_coeffs(t);
    // d/dtau = -t d/dt
    dy[0] = -c.u1 * y[0] * (c.k1 - y[1]);
    dy[1] = -c.u2 * (c.k2 * y[1] - y[0] * y[0]);
  };
  ode::IntegrateOptions opt;
  opt.rel_tol = rel_tol;
  opt.abs_tol = std::max(1e-16, 1e-6 * rel_tol);
  opt.blowup_norm = big;
  std::vector<double> y0 = {F_T, G_T};
  ode::Trajectory tr = ode::integrate_adaptive(rhs, y0, 0.0, tau_end, opt);
  std::vector<BackwardSample> out;
  out.reserve(tr.size());
  for (std::size_t i = 0; i < tr.size(); ++i) {
    auto y = tr.state(i);
    out.push_back({T * std::exp(-tr.times[i]), y[0], y[1]});
  }
  return out;
}

ShootResult shoot_backward(const EndConditions& ec,
                           const b7::MetricTrajectory& metric, double T,
                           double rel_tol) {
  ShootResult res;
  EndState es = end_seed(ec, metric.ell > 0 ? metric.ell : 1.0, metric, T,
                         std::min(rel_tol, 1e-10));
  b7::MetricInterp interp(metric);
  const double t_min = 1e-5 * metric.params.r0;
  auto traj = backward_fg(interp, es.F, es.G, T, t_min, rel_tol);
  if (traj.back().t > t_min * (1 + 1e-9)) {
    res.reason = "backward trajectory left the bounded region";
    return res;
  }
  // relative variation of F/t^2 and G/t^2 over the final decade toward t = 0
  double fmin = std::numeric_limits<double>::infinity(), fmax = -fmin;
  double gmin = fmin, gmax = -fmin;
  double f_end = 0, g_end = 0;
  std::size_t n_dec = 0;
  for (const auto& s : traj) {
    if (s.t <= 10.0 * t_min) {
      const double phi = s.F / (s.t * s.t);
      const double psi = s.G / (s.t * s.t);
      fmin = std::min(fmin, phi);
      fmax = std::max(fmax, phi);
      gmin = std::min(gmin, psi);
      gmax = std::max(gmax, psi);
      f_end = phi;
      g_end = psi;
      ++n_dec;
    }
  }
  if (n_dec < 4) {
    res.reason = "too few samples near t = 0";
    return res;
  }
  const double fvar = (fmax - fmin) / std::max(std::abs(f_end), 1e-300);
  const double gvar = (gmax - gmin) / std::max(std::abs(g_end), 1e-300);
  if (!(fvar < 1e-4) || !(gvar < 1e-3)) {
    res.reason = "F/t^2 did not converge (variation " + std::to_string(fvar) +
                 ")";
    return res;
  }
  res.closed = true;
  res.f1 = 2.0 * f_end;
  res.g1 = 2.0 * g_end;
  return res;
}

// ---- classification scan ------------------------------------------------------

inst::Verdict classify_point(const b7::MetricTrajectory& metric, double f1,
                             double g1, const ScanOptions& opt) {
  const double ell = metric.ell;
  double t_max = opt.base_t_max > 0 ? opt.base_t_max : 12.0 * ell;
  inst::Verdict v;
  for (int k = 0; k <= opt.max_escalations; ++k) {
    auto traj = inst::flow_instanton({f1, g1}, metric, t_max, opt.rel_tol);
    v = traj.verdict;
    if (v.kind != inst::VerdictKind::Undecided) return v;
    t_max *= 2.0;
  }
  return v;
}

namespace {

inst::Verdict classify_stable(const b7::MetricTrajectory& metric, double f1,
                              double g1, const ScanOptions& opt,
                              double* t_used) {
  ScanOptions o = opt;
  double t_max = o.base_t_max > 0 ? o.base_t_max : 12.0 * metric.ell;
  inst::Verdict v = classify_point(metric, f1, g1, o);
  for (int k = 0; k < opt.max_escalations; ++k) {
    ScanOptions o2 = o;
    o2.base_t_max = 2.0 * t_max;
    inst::Verdict v2 = classify_point(metric, f1, g1, o2);
    const bool same =
        (v.kind == inst::VerdictKind::Incomplete) ==
        (v2.kind == inst::VerdictKind::Incomplete);
    if (same && v.kind != inst::VerdictKind::Undecided) {
      if (t_used) *t_used = t_max;
      return v2.kind == inst::VerdictKind::Undecided ? v : v2;
    }
    v = v2;
    t_max *= 2.0;
    o.base_t_max = t_max;
  }
  if (t_used) *t_used = t_max;
  return v;
}

bool complete_side(inst::VerdictKind k) {
  return k == inst::VerdictKind::CompleteExponential ||
         k == inst::VerdictKind::CompleteBoundary ||
         k == inst::VerdictKind::Abelian;
}

ClassificationMap scan_impl(const b7::MetricTrajectory& metric, double f1_lo,
                            double f1_hi, double g1_lo, double g1_hi,
                            std::size_t n_f, std::size_t n_g,
                            const ScanOptions& opt, bool parallel) {
  if (!(n_f >= 2 && n_g >= 2 && f1_hi > f1_lo && g1_hi > g1_lo))
    throw ClsError("scan_region: degenerate grid");
  if (!(metric.ell > 0)) throw ClsError("scan_region: metric has no ell");
  ClassificationMap map;
  map.ell = metric.ell;
  for (std::size_t i = 0; i < n_f; ++i)
    map.f1s.push_back(f1_lo + (f1_hi - f1_lo) * i / double(n_f - 1));
  for (std::size_t j = 0; j < n_g; ++j)
    map.g1s.push_back(g1_lo + (g1_hi - g1_lo) * j / double(n_g - 1));
  map.verdicts.assign(n_f * n_g, {});

  const long total = static_cast<long>(n_f * n_g);
#pragma omp parallel for schedule(dynamic, 4) if (parallel)
  for (long idx = 0; idx < total; ++idx) {
    const std::size_t i = idx % n_f, j = idx / n_f;
    map.verdicts[idx] = classify_point(metric, map.f1s[i], map.g1s[j], opt);
  }

  // boundary brackets per row, refined by bisection when requested
  const double half = 0.5 / (map.ell * map.ell);
  const double df = map.f1s[1] - map.f1s[0];
  std::vector<int> rows;
  for (std::size_t j = 0; j < n_g; ++j)
    if (map.g1s[j] > half) rows.push_back(static_cast<int>(j));
  std::vector<std::pair<double, double>> boundary(rows.size(),
                                                  {0.0, -1.0});
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (long r = 0; r < static_cast<long>(rows.size()); ++r) {
    const std::size_t j = rows[r];
    std::size_t first_inc = n_f;
    for (std::size_t i = 1; i < n_f; ++i) {
      if (map.at(i, j).kind == inst::VerdictKind::Incomplete) {
        first_inc = i;
        break;
      }
    }
    if (first_inc == n_f || first_inc == 1) {
      // transition at or below the first positive cell: report half a cell
      double fb = first_inc == 1 ? map.f1s[0] + 0.5 * df : -1.0;
      boundary[r] = {map.g1s[j], fb};
      continue;
    }
    double lo = map.f1s[first_inc - 1], hi = map.f1s[first_inc];
    if (opt.refine_boundary) {
      const double tol = opt.bisect_tol > 0 ? opt.bisect_tol : df / 16.0;
      try {
        BoundaryResult b = boundary_curve(metric, map.g1s[j], lo, hi, tol, opt);
        boundary[r] = {map.g1s[j], b.f_boundary};
        continue;
      } catch (const BadBracket&) {
      }
    }
    boundary[r] = {map.g1s[j], 0.5 * (lo + hi)};
  }
  for (auto& b : boundary)
    if (b.second >= 0) map.boundary.push_back(b);
  return map;
}

}  // namespace

ClassificationMap scan_region_serial(const b7::MetricTrajectory& metric,
                                     double f1_lo, double f1_hi, double g1_lo,
                                     double g1_hi, std::size_t n_f,
                                     std::size_t n_g, const ScanOptions& opt) {
  return scan_impl(metric, f1_lo, f1_hi, g1_lo, g1_hi, n_f, n_g, opt, false);
}

ClassificationMap scan_region(const b7::MetricTrajectory& metric, double f1_lo,
                              double f1_hi, double g1_lo, double g1_hi,
                              std::size_t n_f, std::size_t n_g,
                              const ScanOptions& opt) {
  return scan_impl(metric, f1_lo, f1_hi, g1_lo, g1_hi, n_f, n_g, opt, true);
}

std::size_t ClassificationMap::count(inst::VerdictKind k) const {
  std::size_t n = 0;
  for (const auto& v : verdicts)
    if (v.kind == k) ++n;
  return n;
}

BoundaryResult boundary_curve(const b7::MetricTrajectory& metric, double g1,
                              double f_lo, double f_hi, double tol,
                              const ScanOptions& opt) {
  if (!(f_hi > f_lo) || !(tol > 0))
    throw ClsError("boundary_curve: bad bracket or tolerance");
  double t_used = 0;
  inst::Verdict vlo = classify_stable(metric, f_lo, g1, opt, &t_used);
  inst::Verdict vhi = classify_stable(metric, f_hi, g1, opt, &t_used);
  const bool lo_complete = complete_side(vlo.kind);
  const bool hi_incomplete = vhi.kind == inst::VerdictKind::Incomplete;
  if (!lo_complete || !hi_incomplete)
    throw BadBracket("boundary_curve: endpoints do not straddle the transition");
  BoundaryResult res;
  res.Ginf_check = vlo.Ginf;
  while (f_hi - f_lo > tol) {
    const double mid = 0.5 * (f_lo + f_hi);
    inst::Verdict vm = classify_stable(metric, mid, g1, opt, &t_used);
    if (vm.kind == inst::VerdictKind::Incomplete) {
      f_hi = mid;
    } else if (complete_side(vm.kind)) {
      f_lo = mid;
      res.Ginf_check = vm.Ginf;
    } else {
      // Undecided at full escalation: shrink toward the complete side so the
      // bracket stays valid (the undecided sliver hugs the boundary).
      f_hi = mid;
    }
  }
  res.f_boundary = 0.5 * (f_lo + f_hi);
  res.t_max_used = t_used;
  return res;
}

// ---- comparison lemma -----------------------------------------------------

OrderReport comparison_order(const inst::InstantonTrajectory& traj,
                             const inst::InstantonTrajectory& hat) {
  OrderReport rep;
  const auto& a = traj.samples;
  const auto& b = hat.samples;
  if (a.size() < 2 || b.size() < 2) return rep;
  const double t0 = std::max(a.front().t, b.front().t);
  const double t1 = std::min(a.back().t, b.back().t);
  if (!(t1 > t0)) return rep;

  // evaluate hat at time t by linear interpolation
  std::size_t k = 0;
  auto hat_at = [&](double t) {
    while (k + 2 < b.size() && b[k + 1].t < t) ++k;
    const auto& l = b[k];
    const auto& r = b[k + 1];
    const double w = (t - l.t) / (r.t - l.t);
    return std::pair<double, double>{l.f + w * (r.f - l.f),
                                     l.g + w * (r.g - l.g)};
  };

  bool first = true;
  for (const auto& s : a) {
    if (s.t < t0 || s.t > t1) continue;
    auto [fh, gh] = hat_at(s.t);
    if (first) {
      const bool distinct = std::abs(s.f - fh) > 1e-14 * (1 + std::abs(fh)) ||
                            std::abs(s.g - gh) > 1e-14 * (1 + std::abs(gh));
      rep.hypothesis_met = s.g >= gh && fh >= s.f && s.f > 0 && distinct;
      if (!rep.hypothesis_met) return rep;
      rep.ordering_holds = true;
      first = false;
      continue;
    }
    ++rep.checked;
    if (!(s.g > gh && fh > s.f)) {
      rep.ordering_holds = false;
      rep.t_first_violation = s.t;
      return rep;
    }
  }
  return rep;
}

}  // namespace g2flow::cls
