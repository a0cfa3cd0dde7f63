#include "g2flow/ode.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>

namespace g2flow::ode {

std::vector<double> taylor_seed(const std::vector<std::vector<double>>& coeffs,
                                double eps) {
  if (coeffs.empty()) throw OdeError("taylor_seed: empty coefficient list");
  if (!(eps > 0)) throw OdeError("taylor_seed: eps must be positive");
  const std::size_t n = coeffs.front().size();
  std::vector<double> out(n, 0.0);
  double ek = 1.0;
  for (const auto& c : coeffs) {
    if (c.size() != n) throw OdeError("taylor_seed: ragged coefficients");
    for (std::size_t i = 0; i < n; ++i) out[i] += c[i] * ek;
    ek *= eps;
  }
  return out;
}

namespace {

Eigen::MatrixXd jacobian_m_minus1(const SingularSystem& sys) {
  const std::size_t n = sys.dim;
  Eigen::MatrixXd J(n, n);
  std::vector<double> yp(sys.y0), ym(sys.y0), fp(n), fm(n);
  for (std::size_t j = 0; j < n; ++j) {
    double h = 1e-6 * std::max(1.0, std::abs(sys.y0[j]));
    yp = sys.y0;
    ym = sys.y0;
    yp[j] += h;
    ym[j] -= h;
    sys.m_minus1(yp, fp);
    sys.m_minus1(ym, fm);
    for (std::size_t i = 0; i < n; ++i) J(i, j) = (fp[i] - fm[i]) / (2 * h);
  }
  return J;
}

struct SeedSeries {
  std::vector<std::vector<double>> coeffs;
  double remainder_scale = 0.0;  // norm of the last coefficient
  std::size_t order = 0;         // degree of the last coefficient
};

SeedSeries build_seed(const SingularSystem& sys) {
  SeedSeries s;
  if (!sys.series.empty()) {
    if (sys.series.size() < 2)
      throw InvalidSystem("solve_singular_ivp: series needs >= 2 terms");
    s.coeffs = sys.series;
  } else {
    const std::size_t n = sys.dim;
    Eigen::MatrixXd J = jacobian_m_minus1(sys);
    std::vector<double> m0(n);
    sys.m_smooth(0.0, sys.y0, m0);
    Eigen::VectorXd rhs(n);
    for (std::size_t i = 0; i < n; ++i) rhs(i) = m0[i];
    Eigen::VectorXd c1 = (Eigen::MatrixXd::Identity(n, n) - J).partialPivLu().solve(rhs);

    // W(t) = M(t, y0+c1 t) + M_{-1}(y0+c1 t)/t; the t-coefficient of W feeds c2.
    auto W = [&](double t) {
      std::vector<double> y(n), a(n), b(n);
      for (std::size_t i = 0; i < n; ++i) y[i] = sys.y0[i] + c1(i) * t;
      sys.m_smooth(t, y, a);
      sys.m_minus1(y, b);
      Eigen::VectorXd w(n);
      for (std::size_t i = 0; i < n; ++i) w(i) = a[i] + b[i] / t;
      return w;
    };
    double h = 1e-4;
    Eigen::VectorXd w1 = (W(h) - W(-h)) / (2 * h);
    Eigen::VectorXd c2 =
        (2.0 * Eigen::MatrixXd::Identity(n, n) - J).partialPivLu().solve(w1);

    s.coeffs.resize(3);
    s.coeffs[0] = sys.y0;
    s.coeffs[1].assign(n, 0.0);
    s.coeffs[2].assign(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      s.coeffs[1][i] = c1(i);
      s.coeffs[2][i] = c2(i);
    }
  }
  s.order = s.coeffs.size() - 1;
  double nrm = 0.0;
  for (double v : s.coeffs.back()) nrm = std::max(nrm, std::abs(v));
  s.remainder_scale = nrm;
  return s;
}

double eps_from_remainder(const SeedSeries& s, double abs_tol, double t_end) {
  // Crude bound: |c_K| eps^{K+1} < abs_tol.
  double nrm = std::max(s.remainder_scale, 1e-30);
  double eps = std::pow(abs_tol / nrm, 1.0 / static_cast<double>(s.order + 1));
  eps = std::min(eps, 0.1 * t_end);
  eps = std::max(eps, 1e-12 * t_end);
  return eps;
}

}  // namespace

SingularCheck check_singular_system(const SingularSystem& sys, double tol_cond1,
                                    double int_tol) {
  SingularCheck chk;
  const std::size_t n = sys.dim;
  if (n == 0 || n > kMaxDim || sys.y0.size() != n) {
    chk.reason = "bad dimension";
    return chk;
  }
  std::vector<double> m(n);
  sys.m_minus1(sys.y0, m);
  double scale = 1.0;
  for (double v : sys.y0) scale = std::max(scale, std::abs(v));
  for (double v : m) {
    if (std::abs(v) > tol_cond1 * scale) {
      chk.reason = "condition (i) fails: M_{-1}(y0) != 0";
      return chk;
    }
  }
  Eigen::MatrixXd J = jacobian_m_minus1(sys);
  chk.jacobian.assign(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) chk.jacobian[i * n + j] = J(i, j);

  Eigen::EigenSolver<Eigen::MatrixXd> es(J);
  for (std::size_t i = 0; i < n; ++i) {
    double re = es.eigenvalues()(i).real();
    double im = es.eigenvalues()(i).imag();
    chk.eigen_real.push_back(re);
    chk.eigen_imag.push_back(im);
    double nearest = std::round(re);
    if (std::abs(im) < int_tol && nearest >= 1.0 &&
        std::abs(re - nearest) < int_tol) {
      chk.reason = "condition (ii) fails: eigenvalue at a positive integer";
      return chk;
    }
  }
  chk.ok = true;
  return chk;
}

double singular_seed_eps(const SingularSystem& sys, double abs_tol) {
  SeedSeries s = build_seed(sys);
  return eps_from_remainder(s, abs_tol, 1.0);
}

Trajectory solve_singular_ivp(const SingularSystem& sys, double t_end,
                              double rel_tol, IntegrateOptions opt) {
  if (!(t_end > 0)) throw OdeError("solve_singular_ivp: t_end must be positive");
  if (sys.series.empty()) {
    SingularCheck chk = check_singular_system(sys);
    if (!chk.ok) throw InvalidSystem("solve_singular_ivp: " + chk.reason);
  }
  SeedSeries seed = build_seed(sys);
  opt.rel_tol = rel_tol;
  if (opt.abs_tol <= 0) opt.abs_tol = 1e-3 * rel_tol;
  double eps = eps_from_remainder(seed, opt.abs_tol, t_end);
  std::vector<double> y_eps = taylor_seed(seed.coeffs, eps);

  auto rhs = [&sys](double t, const double* y, double* dy) {
    std::span<const double> ys(y, sys.dim);
    std::array<double, kMaxDim> m1{}, ms{};
    sys.m_minus1(ys, std::span<double>(m1.data(), sys.dim));
    sys.m_smooth(t, ys, std::span<double>(ms.data(), sys.dim));
    for (std::size_t i = 0; i < sys.dim; ++i) dy[i] = m1[i] / t + ms[i];
  };
  return integrate_adaptive(rhs, y_eps, eps, t_end, opt);
}

}  // namespace g2flow::ode
