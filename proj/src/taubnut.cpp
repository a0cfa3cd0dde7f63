#include "g2flow/taubnut.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>

#include "g2flow/fitting.hpp"
#include "g2flow/ode.hpp"

namespace g2flow::tn {

double t_of_eta(double m, double eta) {
  const double c = 1.0 / (m * m);
  if (!(eta > c)) throw DomainError("t_of_eta: need eta > 1/m^2");
  const double u = std::sqrt(eta);
  return u / (eta - c) + 0.5 * m * std::log((m * u + 1.0) / (m * u - 1.0));
}

double eta_of_t(double m, double t) {
  if (!(t > 0)) throw DomainError("eta_of_t: need t > 0");
  const double c = 1.0 / (m * m);
  // t(eta) is strictly decreasing; bracket then bisect.
  double lo = c * (1 + 1e-14), hi = std::max(2.0 * c, 4.0 / (t * t) + 2.0 * c);
  while (t_of_eta(m, hi) > t) hi *= 4.0;
  while (t_of_eta(m, lo) < t) lo = c + 0.5 * (lo - c);
  for (int it = 0; it < 200; ++it) {
    double mid = 0.5 * (lo + hi);
    if (mid == lo || mid == hi) break;
    if (t_of_eta(m, mid) > t)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

TnPoint tn_metric(const TaubNutParams& p, double eta) {
  const double c = 1.0 / (p.m * p.m);
  if (!(eta > c)) throw DomainError("tn_metric: need eta > 1/m^2");
  TnPoint out;
  out.f1 = std::sqrt(eta) / (eta - c);
  out.f3 = 1.0 / std::sqrt(eta);
  out.t = t_of_eta(p.m, eta);
  return out;
}

void tn_rhs(const double* y, double* dy) {
  const double f1 = y[0], f3 = y[1];
  dy[0] = 0.5 * (2.0 - f3 / f1);
  dy[1] = 0.5 * (f3 / f1) * (f3 / f1);
}

std::vector<std::vector<double>> tn_series(double m) {
  const double c = 1.0 / (m * m);
  return {{0, 0}, {0.5, 0.5}, {0, 0}, {c / 24.0, -c / 12.0}};
}

// ---- ASD families -----------------------------------------------------------

AsdPoint asd_eval(const AsdParams& p, double m, double eta) {
  const double c = 1.0 / (m * m);
  if (!(eta > c)) throw DomainError("asd_eval: need eta > 1/m^2");
  AsdPoint out{0.0, 0.0};
  switch (p.family) {
    case AsdFamily::TwoParameter: {
      const double w = p.C / (eta - c);
      out.a1 = w / std::sinh(w + p.D);
      out.a3 = (c + p.C / std::tanh(w + p.D)) / eta;
      break;
    }
    case AsdFamily::Abelian: {
      out.a1 = 0.0;
      out.a3 = (c + p.C) / eta;
      break;
    }
    case AsdFamily::EtesiHausel: {
      const double u = eta - c;
      out.a1 = 1.0 / (1.0 + p.B * u);
      out.a3 = (c + u / (1.0 + p.B * u)) / eta;
      break;
    }
  }
  return out;
}

AsdPoint asd_eval_deta(const AsdParams& p, double m, double eta) {
  const double c = 1.0 / (m * m);
  if (!(eta > c)) throw DomainError("asd_eval_deta: need eta > 1/m^2");
  AsdPoint d{0.0, 0.0};
  switch (p.family) {
    case AsdFamily::TwoParameter: {
      const double w = p.C / (eta - c);
      const double dw = -w * w / p.C;  // dw/deta
      const double sh = std::sinh(w + p.D), ch = std::cosh(w + p.D);
      const double a3 = (c + p.C * ch / sh) / eta;
      d.a1 = dw * (1.0 / sh - w * ch / (sh * sh));
      d.a3 = -a3 / eta + (w * w / eta) / (sh * sh);
      break;
    }
    case AsdFamily::Abelian: {
      d.a1 = 0.0;
      d.a3 = -(c + p.C) / (eta * eta);
      break;
    }
    case AsdFamily::EtesiHausel: {
      const double u = eta - c;
      const double den = 1.0 + p.B * u;
      const double a3 = (c + u / den) / eta;
      d.a1 = -p.B / (den * den);
      d.a3 = -a3 / eta + 1.0 / (eta * den * den);
      break;
    }
  }
  return d;
}

AsdResidual asd_residual(const AsdParams& p, double m,
                         std::span<const double> eta_grid) {
  AsdResidual res;
  const double c = 1.0 / (m * m);
  for (double eta : eta_grid) {
    const TnPoint g = tn_metric(TaubNutParams{m}, eta);
    const AsdPoint a = asd_eval(p, m, eta);
    const AsdPoint da = asd_eval_deta(p, m, eta);
    const double dt_deta = -std::sqrt(eta) / ((eta - c) * (eta - c));
    const double a1dot = da.a1 / dt_deta;
    const double a3dot = da.a3 / dt_deta;
    const double r1 = a1dot + (a.a3 - 1.0) * a.a1 / g.f3;
    const double r3 = a3dot + g.f3 * (a.a1 * a.a1 - a.a3) / (g.f1 * g.f1);
    res.max_r1 = std::max(res.max_r1, std::abs(r1));
    res.max_r3 = std::max(res.max_r3, std::abs(r3));
  }
  return res;
}

double conserved_quantity(double eta, double a3, double da3_deta, double m) {
  const double c = 1.0 / (m * m);
  const double d_eta_a3 = a3 + eta * da3_deta;
  const double u = eta - c;
  const double v = eta * a3 - c;
  return u * u * d_eta_a3 - v * v;
}

double conserved_quantity_closed(const AsdParams& p, double m, double eta) {
  const AsdPoint da = asd_eval_deta(p, m, eta);
  const AsdPoint a = asd_eval(p, m, eta);
  return conserved_quantity(eta, a.a3, da.a3, m);
}

namespace {

double residual_for_draw(std::uint64_t s0, int i) {
  // Per-draw generator: order-independent, so the parallel sweep is
  // bit-identical to the serial one.
  fit::SplitMix64 rng(s0 + 0x9e3779b97f4a7c15ull * static_cast<std::uint64_t>(i + 1));
  const double m = rng.uniform(0.5, 2.0);
  AsdParams p;
  p.family = AsdFamily::TwoParameter;
  p.C = rng.uniform(1e-3, 3.0);
  p.D = rng.uniform(1e-3, 3.0);
  const double c = 1.0 / (m * m);
  std::vector<double> grid;
  for (int k = 0; k < 64; ++k)
    grid.push_back(c * (1.05 + (50.0 - 1.05) * k / 63.0));
  AsdResidual r = asd_residual(p, m, grid);
  // conserved quantity drift on the same grid
  double qmax = 0.0;
  for (double eta : grid)
    qmax = std::max(qmax,
                    std::abs(conserved_quantity_closed(p, m, eta) + p.C * p.C));
  return std::max(r.max(), qmax);
}

}  // namespace

double asd_residual_sweep_serial(int n, std::uint64_t seed) {
  double worst = 0.0;
  for (int i = 0; i < n; ++i) worst = std::max(worst, residual_for_draw(seed, i));
  return worst;
}

double asd_residual_sweep(int n, std::uint64_t seed) {
  double worst = 0.0;
#pragma omp parallel for reduction(max : worst) schedule(static)
  for (int i = 0; i < n; ++i) worst = std::max(worst, residual_for_draw(seed, i));
  return worst;
}

// ---- local data -------------------------------------------------------------

MuPair mu_from_cd(double m, double C, double D) {
  if (!(C >= 0) || !(D > 0))
    throw DomainError("mu_from_cd: need C >= 0, D > 0");
  const double c = 1.0 / (m * m);
  return {0.25 * C / std::sinh(D), 0.25 * (c + C / std::tanh(D))};
}

AsdParams cd_from_mu(double m, double mu1, double mu3) {
  const double q = mu3 - 1.0 / (4.0 * m * m);
  if (!(mu1 >= 0) || !(q >= mu1))
    throw ConstraintViolation("cd_from_mu: need mu3 - 1/(4m^2) >= mu1 >= 0");
  AsdParams p;
  if (mu1 == 0.0) {
    p.family = AsdFamily::Abelian;
    p.C = 4.0 * mu3 - 1.0 / (m * m);
    return p;
  }
  p.family = AsdFamily::TwoParameter;
  p.C = 4.0 * std::sqrt(q * q - mu1 * mu1);
  p.D = std::acosh(q / mu1);
  return p;
}

// ---- rescaled flows ----------------------------------------------------------

double adiabatic_m(const b7::B7Params& p) {
  const double k = 24.0 * p.p() * (2.0 * p.abar - p.bbar);
  if (!(k > 0)) throw TnError("adiabatic_m: member has no ALF limit");
  return 1.0 / std::sqrt(k);
}

b7::B7Params b7_params_for_adiabatic(double m, double r0) {
  if (!(m > 0) || !(r0 > 0)) throw TnError("b7_params_for_adiabatic: bad input");
  const double k1 = 1.0 / (24.0 * r0 * r0 * r0 * m * m);  // 2 abar - bbar
  const double k2 = 1.0 / (64.0 * r0);                    // 2 abar + bbar
  b7::B7Params p;
  p.r0 = r0;
  p.abar = 0.25 * (k1 + k2);
  p.bbar = 0.5 * (k2 - k1);
  return p;
}

namespace {

struct RescaledSeed {
  double a10, a30, b0;  // A_i = t/2 + a_i0 t^3, B_i = 2 + b0 t^2
};

RescaledSeed rescaled_seed(const b7::B7Params& params, double lambda) {
  RescaledSeed s;
  s.a30 = -2.0 * params.p() * (2.0 * params.abar - params.bbar);
  s.a10 = -lambda * lambda / 64.0 - 0.5 * s.a30;
  s.b0 = lambda * lambda / 8.0;
  return s;
}

// Along the m-fixed adiabatic family the a3 constant does not move:
// a30 = -2 r0^3 (2 abar - bbar) = -1/(12 m^2) for every r0.
RescaledSeed rescaled_seed_for_m(double m, double lambda) {
  RescaledSeed s;
  s.a30 = -1.0 / (12.0 * m * m);
  s.a10 = -lambda * lambda / 64.0 - 0.5 * s.a30;
  s.b0 = lambda * lambda / 8.0;
  return s;
}

void rescaled_rhs(double lam2, const double* y, double* dy) {
  const double A1 = y[0], A3 = y[1], B1 = y[2], B3 = y[3];
  dy[0] = 0.5 * ((B1 * B1 + B3 * B3 - lam2 * A1 * A1) / (B1 * B3) - A3 / A1);
  dy[1] = 0.5 * (A3 * A3 / (A1 * A1) - lam2 * A3 * A3 / (B1 * B1));
  dy[2] = 0.5 * ((lam2 * A1 * A1 + B3 * B3 - B1 * B1) / (A1 * B3) +
                 lam2 * A3 / B1);
  dy[3] = (lam2 * A1 * A1 + B1 * B1 - B3 * B3) / (A1 * B1);
}

double rescaled_eps(const RescaledSeed& s, double rel_tol) {
  double nrm = std::max({std::abs(s.a10), std::abs(s.a30), std::abs(s.b0), 1e-3});
  double eps = std::pow(std::max(1e-14, 1e-3 * rel_tol) / nrm, 0.25);
  return std::min(eps, 0.02);
}

}  // namespace

namespace {

std::vector<RescaledSample> rescaled_flow_core(const RescaledSeed& s,
                                               double lambda, double t_max,
                                               double rel_tol) {
  const double eps = rescaled_eps(s, rel_tol);
  std::vector<double> y0 = {eps / 2 + s.a10 * eps * eps * eps,
                            eps / 2 + s.a30 * eps * eps * eps,
                            2 + s.b0 * eps * eps, 2 + s.b0 * eps * eps};
  ode::IntegrateOptions opt;
  opt.rel_tol = rel_tol;
  opt.abs_tol = std::max(1e-14, 1e-3 * rel_tol);
  opt.blowup_norm = std::max(1e8, 100.0 * t_max * t_max);
  opt.max_step_scale = 0.2;
  opt.t_floor = 10 * eps;
  const double lam2 = lambda * lambda;
  auto rhs = [lam2](double, const double* y, double* dy) {
    rescaled_rhs(lam2, y, dy);
  };
  ode::Trajectory tr = ode::integrate_adaptive(rhs, y0, eps, t_max, opt);
  std::vector<RescaledSample> out;
  out.reserve(tr.size());
  for (std::size_t i = 0; i < tr.size(); ++i) {
    auto y = tr.state(i);
    out.push_back({tr.times[i], y[0], y[1], y[2], y[3]});
  }
  return out;
}

std::vector<DressedSample> dressed_flow_core(const RescaledSeed& s,
                                             double lambda, double mu1,
                                             double mu3, double t_max,
                                             double rel_tol) {
  const double lam2 = lambda * lambda;
  // t^4 coefficients of the dressed seeds (series matching at the origin).
  const double F4 = -mu1 * (2 * s.a30 + lam2 / 16.0 + mu3);
  const double G4 = (2 * s.a30 - 4 * s.a10) * mu3 - lam2 * mu3 / 16.0 - mu1 * mu1;
  double eps = rescaled_eps(s, rel_tol);
  const double mu_scale = std::max({std::abs(F4), std::abs(G4), 1e-3});
  eps = std::min(eps, std::pow(std::max(1e-14, 1e-3 * rel_tol) / mu_scale, 0.25));

  std::vector<double> y0 = {eps / 2 + s.a10 * eps * eps * eps,
                            eps / 2 + s.a30 * eps * eps * eps,
                            2 + s.b0 * eps * eps,
                            2 + s.b0 * eps * eps,
                            mu1 * eps * eps + F4 * eps * eps * eps * eps,
                            mu3 * eps * eps + G4 * eps * eps * eps * eps};
  ode::IntegrateOptions opt;
  opt.rel_tol = rel_tol;
  opt.abs_tol = std::max(1e-14, 1e-3 * rel_tol);
  opt.blowup_norm = std::max(1e8, 100.0 * t_max * t_max);
  opt.max_step_scale = 0.2;
  opt.t_floor = 10 * eps;
  auto rhs = [lam2](double, const double* y, double* dy) {
    rescaled_rhs(lam2, y, dy);
    const double A1 = y[0], A3 = y[1], B1 = y[2], B3 = y[3];
    const double F = y[4], G = y[5];
    dy[4] = (F / A3) * (1.0 - lam2 * A1 * A3 / (B1 * B3) - G);
    dy[5] = (A3 / (A1 * A1)) * ((1.0 - lam2 * A1 * A1 / (B1 * B1)) * G - F * F);
  };
  ode::Trajectory tr = ode::integrate_adaptive(rhs, y0, eps, t_max, opt);
  std::vector<DressedSample> out;
  out.reserve(tr.size());
  for (std::size_t i = 0; i < tr.size(); ++i) {
    auto y = tr.state(i);
    out.push_back({tr.times[i], y[4], y[5], y[0], y[1], y[2], y[3]});
  }
  return out;
}

}  // namespace

std::vector<RescaledSample> rescaled_b7_flow(const b7::B7Params& params,
                                             double lambda, double t_max,
                                             double rel_tol) {
  if (!(lambda >= 0) || lambda > params.r0 * (1 + 1e-12))
    throw TnError("rescaled_b7_flow: need 0 <= lambda <= r0");
  return rescaled_flow_core(rescaled_seed(params, lambda), lambda, t_max,
                            rel_tol);
}

std::vector<DressedSample> adiabatic_instanton_flow(const b7::B7Params& params,
                                                    double lambda, double mu1,
                                                    double mu3, double t_max,
                                                    double rel_tol) {
  if (!(lambda >= 0) || lambda > params.r0 * (1 + 1e-12))
    throw TnError("adiabatic_instanton_flow: need 0 <= lambda <= r0");
  return dressed_flow_core(rescaled_seed(params, lambda), lambda, mu1, mu3,
                           t_max, rel_tol);
}

std::vector<ConvergenceRow> adiabatic_instanton_compare(
    double mu1, double mu3, double m, std::span<const double> r0_list,
    double t_max, double rel_tol) {
  const AsdParams asd = cd_from_mu(m, mu1, mu3);
  std::vector<ConvergenceRow> rows;
  for (double r0 : r0_list) {
    const double lambda = std::max(r0, 0.0);
    auto traj = dressed_flow_core(rescaled_seed_for_m(m, lambda), lambda, mu1,
                                  mu3, t_max, rel_tol);
    double e1 = 0.0, e3 = 0.0;
    for (const auto& s : traj) {
      const double eta = eta_of_t(m, s.t);
      const AsdPoint ref = asd_eval(asd, m, eta);
      e1 = std::max(e1, std::abs(s.F - ref.a1));
      e3 = std::max(e3, std::abs(s.G - ref.a3));
    }
    rows.push_back({r0, lambda, e1, e3, t_max});
  }
  return rows;
}

std::vector<double> linearisation_eigenvalues() {
  auto eig2 = [](double a, double b, double c, double d) {
    const double tr = a + d, det = a * d - b * c;
    const double disc = std::sqrt(std::max(0.0, tr * tr / 4 - det));
    return std::pair<double, double>{tr / 2 + disc, tr / 2 - disc};
  };
  auto [l1, l2] = eig2(-2, -1, -2, -1);  // a-block
  auto [l3, l4] = eig2(-4, 2, 4, -6);    // b-block
  return {l1, l2, l3, l4};
}

}  // namespace g2flow::tn
