#include "g2flow/fitting.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdlib>

namespace g2flow::fit {

LinearFit fit_basis(std::span<const double> xs, std::span<const double> ys,
                    const std::vector<std::function<double(double)>>& basis) {
  const std::size_t m = xs.size(), k = basis.size();
  if (m != ys.size() || m < k || k == 0)
    throw FitUnstable("fit_basis: degenerate sample set");
  Eigen::MatrixXd A(m, k);
  Eigen::VectorXd b(m);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < k; ++j) A(i, j) = basis[j](xs[i]);
    b(i) = ys[i];
  }
  Eigen::VectorXd c = A.colPivHouseholderQr().solve(b);
  Eigen::VectorXd r = A * c - b;
  LinearFit out;
  out.coef.assign(c.data(), c.data() + k);
  out.rms = std::sqrt(r.squaredNorm() / static_cast<double>(m));
  out.max_abs = r.cwiseAbs().maxCoeff();
  return out;
}

namespace {
LinearFit inv_t_fit(std::span<const double> ts, std::span<const double> ys) {
  return fit_basis(ts, ys,
                   {[](double) { return 1.0; }, [](double t) { return 1.0 / t; },
                    [](double t) { return 1.0 / (t * t); }});
}
}  // namespace

TailLimit tail_limit_inverse_t(std::span<const double> ts,
                               std::span<const double> ys) {
  if (ts.size() < 8) throw FitUnstable("tail_limit: too few samples");
  LinearFit full = inv_t_fit(ts, ys);
  // Refit on the later half of the window; the shift in the constant term is
  // the honest error estimate for a slowly converging tail.
  std::size_t half = ts.size() / 2;
  LinearFit tail = inv_t_fit(ts.subspan(half), ys.subspan(half));
  TailLimit out;
  out.limit = tail.coef[0];
  out.c1 = tail.coef[1];
  out.c2 = tail.coef[2];
  out.fit_err = std::max(tail.rms, std::abs(full.coef[0] - tail.coef[0]));
  return out;
}

std::uint64_t default_seed() {
  if (const char* env = std::getenv("G2FLOW_SEED")) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (end && *end == '\0') return static_cast<std::uint64_t>(v);
  }
  return 20250811ull;
}

}  // namespace g2flow::fit
