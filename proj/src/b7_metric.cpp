#include "g2flow/b7_metric.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "g2flow/fitting.hpp"

namespace g2flow::b7 {

B7Params B7Params::from_r0_abar(double r0, double abar) {
  if (!(r0 > 0)) throw B7Error("B7Params: r0 must be positive");
  B7Params p;
  p.r0 = r0;
  p.abar = abar;
  p.bbar = 1.0 / (64.0 * r0) - 2.0 * abar;
  return p;
}

ABCoeffs ab_coeffs(double a, double b, double adot, double bdot, double p) {
  const double bp = b - p;
  const double d1 = 2 * a - b - p;
  const double d2 = 2 * a + b + p;
  const double xd = adot * bdot;
  if (!(bp > 0) || !(d1 > 0) || !(d2 > 0) || !(xd > 0) || !(adot > 0))
    throw DegenerateSeed("ab_coeffs: square-root argument not positive");
  ABCoeffs c;
  c.A1 = std::sqrt(bp * d1 / xd);
  c.B1 = std::sqrt(bp * d2 / xd);
  c.A3 = bp / adot;
  c.B3 = 2 * xd / bp;
  return c;
}

double coeff_cg(double a, double b, double /*adot*/, double bdot, double p) {
  const double Q = 4 * a * a - (b + p) * (b + p);
  return -bdot * (b + p) / Q;
}

double coeff_cf(double a, double b, double adot, double bdot, double p) {
  const double Q = 4 * a * a - (b + p) * (b + p);
  const double num =
      adot * (Q - 2 * a * (b - p)) - bdot * (a - b) * (2 * a + b + p);
  return -num / ((b - p) * Q);
}

double eval_H_ab(double a, double b, double adot, double bdot, double p) {
  const double Q = 4 * a * a - (b + p) * (b + p);
  const double bp = b - p;
  const double num = (2 * adot * adot - adot * bdot) * Q +
                     adot * bdot * bp * (2 * a - b - p) -
                     4 * adot * adot * a * bp;
  return num / (2 * bp * bp * Q);
}

double eval_H_AB(const ABCoeffs& c) {
  return 0.5 * (2.0 / (c.A3 * c.A3) + 1.0 / (c.B1 * c.B1) -
                (c.A1 * c.A1 + c.B1 * c.B1 + c.B3 * c.B3) /
                    (c.A1 * c.A3 * c.B1 * c.B3));
}

double eval_Hhat(double a, double b, double adot, double bdot, double p) {
  const double bprime = bdot / adot;
  return (2 - bprime) * (4 * a * a - (b + p) * (b + p) - 2 * a * (b - p)) -
         bprime * (b - p) * (b + p);
}

double eval_H(const MetricSample& s, double tol) {
  const double p = s.b - s.A3 * s.adot;  // A3 = (b - p)/adot
  const double h1 = eval_H_ab(s.a, s.b, s.adot, s.bdot, p);
  ABCoeffs c{s.A1, s.A3, s.B1, s.B3};
  const double h2 = eval_H_AB(c);
  if (std::abs(h1 - h2) > tol * std::max(1.0, std::abs(h1)))
    throw FormMismatch("eval_H: (a,b) and (A,B) forms disagree");
  return h1;
}

SeriesState series_eval(const B7Params& p, double t) {
  const double r0 = p.r0, ab = p.abar, bb = p.bbar;
  const double t2 = t * t, t3 = t2 * t, t4 = t2 * t2;
  SeriesState s;
  s.a = r0 * r0 * r0 + 0.25 * r0 * t2 + ab * t4;
  s.b = r0 * r0 * r0 + 0.25 * r0 * t2 + bb * t4;
  s.adot = 0.5 * r0 * t + 4 * ab * t3;
  s.bdot = 0.5 * r0 * t + 4 * bb * t3;
  s.addot = 0.5 * r0 + 12 * ab * t2;
  s.bddot = 0.5 * r0 + 12 * bb * t2;
  return s;
}

std::vector<std::vector<double>> hitchin_series(const B7Params& p) {
  const double r0 = p.r0, ab = p.abar, bb = p.bbar;
  const double r03 = r0 * r0 * r0;
  // y = (x1, x2, a, b) with x1 = adot*bdot, x2 = adot^2
  return {
      {0, 0, r03, r03},
      {0, 0, 0, 0},
      {0.25 * r0 * r0, 0.25 * r0 * r0, 0.25 * r0, 0.25 * r0},
      {0, 0, 0, 0},
      {2 * r0 * (ab + bb), 4 * r0 * ab, ab, bb},
  };
}

void hitchin_rhs(double p, const double* y, double* dy) {
  const double x1 = y[0], x2 = y[1], a = y[2], b = y[3];
  const double Q = 4 * a * a - (b + p) * (b + p);
  const double S = std::sqrt(Q);
  const double sx2 = std::sqrt(x2);
  dy[0] = 2 * a * (b - p) / S;
  dy[1] = 2 * (2 * a * a - b * (b + p)) / S;
  dy[2] = sx2;
  dy[3] = x1 / sx2;
}

ode::SingularSystem hitchin_singular_system(const B7Params& params) {
  ode::SingularSystem sys;
  sys.dim = 4;
  sys.y0 = {0, 0, params.p(), params.p()};
  sys.series = hitchin_series(params);
  sys.m_minus1 = [](std::span<const double>, std::span<double> out) {
    for (auto& v : out) v = 0.0;
  };
  const double p = params.p();
  sys.m_smooth = [p](double, std::span<const double> y, std::span<double> dy) {
    hitchin_rhs(p, y.data(), dy.data());
  };
  return sys;
}

namespace {

MetricSample make_sample(const B7Params& params, double t, double x1, double x2,
                         double a, double b) {
  MetricSample s;
  s.t = t;
  s.a = a;
  s.b = b;
  s.adot = std::sqrt(x2);
  s.bdot = x1 / s.adot;
  double dy[4];
  double y[4] = {x1, x2, a, b};
  hitchin_rhs(params.p(), y, dy);
  s.addot = dy[1] / (2 * s.adot);
  s.bddot = (dy[0] - s.addot * s.bdot) / s.adot;
  ABCoeffs c = ab_coeffs(a, b, s.adot, s.bdot, params.p());
  s.A1 = c.A1;
  s.A3 = c.A3;
  s.B1 = c.B1;
  s.B3 = c.B3;
  s.H = eval_H_ab(a, b, s.adot, s.bdot, params.p());
  s.cf = coeff_cf(a, b, s.adot, s.bdot, params.p());
  s.cg = coeff_cg(a, b, s.adot, s.bdot, params.p());
  return s;
}

double metric_eps(const B7Params& params, double abs_tol) {
  auto series = hitchin_series(params);
  double nrm = 1e-30;
  for (double v : series.back()) nrm = std::max(nrm, std::abs(v));
  double eps = std::pow(abs_tol / nrm, 0.2);
  return std::min(eps, 0.05 * params.r0);
}

}  // namespace

MetricSample seed_metric(const B7Params& params, double eps) {
  if (!(eps > 0) || !(eps < params.r0))
    throw B7Error("seed_metric: need 0 < eps << r0");
  SeriesState st = series_eval(params, eps);
  return make_sample(params, eps, st.adot * st.bdot, st.adot * st.adot, st.a,
                     st.b);
}

MetricTrajectory flow_metric(const B7Params& params, double t_max,
                             double rel_tol, const FlowOptions& fopt) {
  if (!params.constraint_ok(1e-10))
    throw B7Error("flow_metric: 64 r0 (2 abar + bbar) = 1 violated");
  if (!(t_max > 0)) throw B7Error("flow_metric: t_max must be positive");

  ode::IntegrateOptions opt;
  opt.rel_tol = rel_tol;
  opt.abs_tol = std::max(1e-14, 1e-3 * rel_tol);
  // x2 = adot^2 grows like t^4/36; keep the blow-up guard above that.
  opt.blowup_norm = std::max(1e8, 100.0 * std::pow(t_max, 4));
  opt.max_step_scale = 0.2;  // geometric grid: dense near 0, sparse at infinity
  opt.t_floor = 0.05 * params.r0;

  const double eps = fopt.eps > 0 ? fopt.eps : metric_eps(params, opt.abs_tol);
  SeriesState st = series_eval(params, eps);
  std::vector<double> seed = {st.adot * st.bdot, st.adot * st.adot, st.a, st.b};
  auto rhs = [p = params.p()](double, const double* y, double* dy) {
    hitchin_rhs(p, y, dy);
  };
  ode::Trajectory tr = ode::integrate_adaptive(rhs, seed, eps, t_max, opt);

  MetricTrajectory out;
  out.params = params;
  out.rel_tol = rel_tol;
  out.t_max = t_max;
  out.termination = tr.termination;
  out.samples.reserve(tr.size());
  for (std::size_t i = 0; i < tr.size(); ++i) {
    auto y = tr.state(i);
    out.samples.push_back(
        make_sample(params, tr.times[i], y[0], y[1], y[2], y[3]));
  }
  if (fopt.check_inequalities) {
    IneqReport rep = check_inequalities(out);
    if (!rep.ok)
      throw IncompleteMetric("flow_metric: " + rep.violation +
                             " at t = " + std::to_string(rep.t_violation));
  }
  try {
    auto [ell, err] = estimate_ell(out);
    out.ell = ell;
    out.ell_fit_err = err;
  } catch (const fit::FitUnstable&) {
    out.ell = 0.0;
    out.ell_fit_err = std::numeric_limits<double>::infinity();
  }
  return out;
}

namespace {

void ab_form_rhs(const double* y, double* dy) {
  const double A1 = y[0], A3 = y[1], B1 = y[2], B3 = y[3];
  dy[0] = 0.5 * ((B1 * B1 + B3 * B3 - A1 * A1) / (B1 * B3) - A3 / A1);
  dy[1] = 0.5 * (A3 * A3 / (A1 * A1) - A3 * A3 / (B1 * B1));
  dy[2] = 0.5 * ((A1 * A1 + B3 * B3 - B1 * B1) / (A1 * B3) + A3 / B1);
  dy[3] = (A1 * A1 + B1 * B1 - B3 * B3) / (A1 * B1);
}

std::vector<ABSample> ab_samples_from(const ode::Trajectory& tr) {
  std::vector<ABSample> out;
  out.reserve(tr.size());
  for (std::size_t i = 0; i < tr.size(); ++i) {
    auto y = tr.state(i);
    auto d = tr.deriv(i);
    out.push_back({tr.times[i], y[0], y[1], y[2], y[3], d[0], d[1], d[2], d[3]});
  }
  return out;
}

}  // namespace

std::vector<ABSample> flow_metric_ABform(const B7Params& params, double t_max,
                                         double rel_tol) {
  const double r0 = params.r0;
  const double beta = 1.0 / (8.0 * r0);  // t^2 coefficient of B1 and B3
  double eps = std::pow(std::max(1e-14, 1e-3 * rel_tol) / beta, 0.25);
  eps = std::min(eps, 0.05 * r0);
  const double a1c = params.alpha1(), a3c = params.alpha3();
  double seed[4] = {eps / 2 + a1c * eps * eps * eps,
                    eps / 2 + a3c * eps * eps * eps,
                    2 * r0 + beta * eps * eps, 2 * r0 + beta * eps * eps};
  return flow_AB_from_seed(seed, eps, t_max, rel_tol);
}

std::vector<ABSample> flow_AB_from_seed(const double seed[4], double t0,
                                        double t_max, double rel_tol) {
  ode::IntegrateOptions opt;
  opt.rel_tol = rel_tol;
  opt.abs_tol = std::max(1e-14, 1e-3 * rel_tol);
  opt.blowup_norm = std::max(1e8, 100.0 * std::pow(t_max, 4));
  opt.max_step_scale = 0.2;
  opt.t_floor = 10 * t0;
  auto rhs = [](double, const double* y, double* dy) { ab_form_rhs(y, dy); };
  std::vector<double> y0(seed, seed + 4);
  ode::Trajectory tr = ode::integrate_adaptive(rhs, y0, t0, t_max, opt);
  return ab_samples_from(tr);
}

std::pair<double, double> estimate_ell(const MetricTrajectory& traj) {
  if (traj.samples.size() < 16)
    throw fit::FitUnstable("estimate_ell: too few samples");
  const double t_max = traj.samples.back().t;
  std::vector<double> ts, a3;
  for (const auto& s : traj.samples) {
    if (s.t >= 0.1 * t_max) {
      ts.push_back(s.t);
      a3.push_back(s.A3);
    }
  }
  if (ts.size() < 8) throw fit::FitUnstable("estimate_ell: tail too short");
  fit::TailLimit lim = fit::tail_limit_inverse_t(ts, a3);
  if (!(lim.limit > 0) || lim.fit_err > 1e-3 * std::abs(lim.limit))
    throw fit::FitUnstable("estimate_ell: extrapolation residual too large");
  return {lim.limit, lim.fit_err};
}

IneqReport check_inequalities(const MetricTrajectory& traj) {
  IneqReport rep;
  const double p = traj.params.p();
  // AC members have a = b exactly; the strict inequalities are enforced only
  // up to a small tolerance so that equality cases pass as margin zero.
  const double tol = 1e-9;
  rep.min_b_minus_p = rep.min_bdot = rep.min_a_over_b_margin =
      rep.min_ratio_margin = rep.min_second_ratio_margin = rep.min_H =
          std::numeric_limits<double>::infinity();
  auto fail = [&](const char* what, double t) {
    if (rep.ok) {
      rep.ok = false;
      rep.violation = what;
      rep.t_violation = t;
    }
  };
  const auto& ss = traj.samples;
  for (std::size_t i = 0; i < ss.size(); ++i) {
    const auto& s = ss[i];
    rep.min_b_minus_p = std::min(rep.min_b_minus_p, s.b - p);
    rep.min_bdot = std::min(rep.min_bdot, s.bdot);
    rep.min_a_over_b_margin = std::min(rep.min_a_over_b_margin, s.a / s.b - 1.0);
    rep.min_ratio_margin =
        std::min(rep.min_ratio_margin, s.adot / s.bdot - s.a / s.b);
    rep.min_H = std::min(rep.min_H, s.H);
    if (!(s.b - p > 0)) fail("b > p fails", s.t);
    if (!(s.bdot > 0)) fail("bdot > 0 fails", s.t);
    if (s.a / s.b - 1.0 < -tol) fail("a/b > 1 fails", s.t);
    if (s.adot / s.bdot - s.a / s.b < -tol) fail("adot/bdot > a/b fails", s.t);
    if (s.H < -tol) fail("H > 0 fails", s.t);
    // centered second differences for the addot/bddot ratio
    if (i > 0 && i + 1 < ss.size()) {
      const auto& l = ss[i - 1];
      const auto& r = ss[i + 1];
      const double hl = s.t - l.t, hr = r.t - s.t;
      auto fd = [&](double yl, double ym, double yr) {
        return ((yr - ym) / hr * hl + (ym - yl) / hl * hr) / (hl + hr);
      };
      const double add = fd(l.adot, s.adot, r.adot);
      const double bdd = fd(l.bdot, s.bdot, r.bdot);
      if (bdd > 0) {
        const double margin = add / bdd - s.adot / s.bdot;
        rep.min_second_ratio_margin =
            std::min(rep.min_second_ratio_margin, margin);
        if (margin < -1e-5 * std::abs(add / bdd))
          fail("addot/bddot > adot/bdot fails", s.t);
      }
    }
  }
  return rep;
}

// ---- MetricInterp ---------------------------------------------------------

MetricInterp::MetricInterp(const MetricTrajectory& traj)
    : params_(traj.params), ell_(traj.ell) {
  const std::size_t n = traj.samples.size();
  if (n < 2) throw B7Error("MetricInterp: need at least two samples");
  ts_.reserve(n);
  for (const auto& s : traj.samples) {
    ts_.push_back(s.t);
    a_.push_back(s.a);
    b_.push_back(s.b);
    ad_.push_back(s.adot);
    bd_.push_back(s.bdot);
    add_.push_back(s.addot);
    bdd_.push_back(s.bddot);
  }
}

std::size_t MetricInterp::locate(double t) const {
  auto it = std::upper_bound(ts_.begin(), ts_.end(), t);
  std::size_t i = (it == ts_.begin()) ? 0 : static_cast<std::size_t>(it - ts_.begin()) - 1;
  return std::min(i, ts_.size() - 2);
}

namespace {
inline double hermite(double t, double t0, double t1, double y0, double y1,
                      double d0, double d1) {
  const double h = t1 - t0;
  const double s = (t - t0) / h;
  const double s2 = s * s, s3 = s2 * s;
  return (2 * s3 - 3 * s2 + 1) * y0 + (s3 - 2 * s2 + s) * h * d0 +
         (-2 * s3 + 3 * s2) * y1 + (s3 - s2) * h * d1;
}
}  // namespace

SeriesState MetricInterp::eval(double t) const {
  if (t <= ts_.front()) return series_eval(params_, t);
  if (t > ts_.back() * (1 + 1e-12))
    throw B7Error("MetricInterp: t beyond stored trajectory");
  t = std::min(t, ts_.back());
  const std::size_t i = locate(t);
  SeriesState s;
  s.a = hermite(t, ts_[i], ts_[i + 1], a_[i], a_[i + 1], ad_[i], ad_[i + 1]);
  s.b = hermite(t, ts_[i], ts_[i + 1], b_[i], b_[i + 1], bd_[i], bd_[i + 1]);
  s.adot = hermite(t, ts_[i], ts_[i + 1], ad_[i], ad_[i + 1], add_[i], add_[i + 1]);
  s.bdot = hermite(t, ts_[i], ts_[i + 1], bd_[i], bd_[i + 1], bdd_[i], bdd_[i + 1]);
  s.addot = s.bddot = 0.0;  // not interpolated
  return s;
}

ABCoeffs MetricInterp::coeffs(double t) const {
  SeriesState s = eval(t);
  return ab_coeffs(s.a, s.b, s.adot, s.bdot, params_.p());
}

double MetricInterp::cf(double t) const {
  SeriesState s = eval(t);
  return coeff_cf(s.a, s.b, s.adot, s.bdot, params_.p());
}

double MetricInterp::cg(double t) const {
  SeriesState s = eval(t);
  return coeff_cg(s.a, s.b, s.adot, s.bdot, params_.p());
}

MetricInterp::FGCoeffs MetricInterp::fg_coeffs(double t) const {
  const double p = params_.p();
  FGCoeffs c;
  if (t <= ts_.front()) {
    // form b - p and 2a - b - p directly from the series (no cancellation)
    const double r0 = params_.r0, ab = params_.abar, bb = params_.bbar;
    const double t2 = t * t, t4 = t2 * t2;
    const double bmp = 0.25 * r0 * t2 + bb * t4;
    const double d1 = 0.25 * r0 * t2 + (2 * ab - bb) * t4;
    const double d2 = 4 * r0 * r0 * r0 + 0.75 * r0 * t2 + (2 * ab + bb) * t4;
    const double ap = 2 * r0 * r0 * r0 + 0.25 * r0 * t2 + ab * t4;
    const double bp = 2 * r0 * r0 * r0 + 0.25 * r0 * t2 + bb * t4;
    const double adot = 0.5 * r0 * t + 4 * ab * t2 * t;
    const double bdot = 0.5 * r0 * t + 4 * bb * t2 * t;
    c.u1 = t * adot / bmp;
    c.u2 = t * bdot / d1;
    c.k1 = 2 * ap / d2;
    c.k2 = 2 * bp / d2;
    return c;
  }
  SeriesState s = eval(t);
  c.u1 = t * s.adot / (s.b - p);
  c.u2 = t * s.bdot / (2 * s.a - s.b - p);
  c.k1 = 2 * (s.a + p) / (2 * s.a + s.b + p);
  c.k2 = 2 * (s.b + p) / (2 * s.a + s.b + p);
  return c;
}

}  // namespace g2flow::b7
