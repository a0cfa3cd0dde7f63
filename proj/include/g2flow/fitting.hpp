#pragma once

// Small least-squares and tail-extrapolation helpers used by the asymptotic
// fits (ell extraction, G_infinity limits, decay-rate fits).

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <vector>

namespace g2flow::fit {

struct FitUnstable : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LinearFit {
  std::vector<double> coef;
  double rms = 0.0;     // root-mean-square residual
  double max_abs = 0.0; // max absolute residual
};

/// Least squares of y ~ sum_k coef[k] * basis[k](x).
LinearFit fit_basis(std::span<const double> xs, std::span<const double> ys,
                    const std::vector<std::function<double(double)>>& basis);

/// Fit y(t) ~ L + c1/t + c2/t^2 on the sample window and extrapolate t->inf.
/// Returns (L, fit_err) where fit_err combines the residual with the change in
/// L when the window is shortened (sensitivity to the tail).
struct TailLimit {
  double limit = 0.0;
  double fit_err = 0.0;
  double c1 = 0.0, c2 = 0.0;
};
TailLimit tail_limit_inverse_t(std::span<const double> ts,
                               std::span<const double> ys);

/// Deterministic 64-bit stream for the reproducible random suites.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  double uniform() {  // in [0,1)
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t state_;
};

/// Seed source for the random suites: G2FLOW_SEED env var, else a fixed default.
std::uint64_t default_seed();

}  // namespace g2flow::fit
