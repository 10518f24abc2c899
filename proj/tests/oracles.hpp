// Independent reference implementations used to check the library's
// numerics. Deliberately written with different algorithms than the library
// (quadrature instead of series/continued fractions, direct enumeration
// instead of log-space scans) so agreement is meaningful.
#pragma once

#include <cmath>
#include <functional>
#include <stdexcept>

namespace oracles {

// Adaptive Simpson on [a, b] with absolute tolerance eps.
inline double adaptive_simpson(const std::function<double(double)>& f, double a,
                               double b, double eps, double fa, double fm, double fb,
                               double whole, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0) throw std::runtime_error("adaptive_simpson: depth exhausted");
  if (std::abs(delta) <= 15.0 * eps) return left + right + delta / 15.0;
  return adaptive_simpson(f, a, m, eps / 2.0, fa, flm, fm, left, depth - 1) +
         adaptive_simpson(f, m, b, eps / 2.0, fm, frm, fb, right, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double eps) {
  if (!(b > a)) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double m = 0.5 * (a + b);
  const double fm = f(m);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, b, eps, fa, fm, fb, whole, 60);
}

// Chi-squared survival function by quadrature. Substituting t = s^2 turns
// the density into a smooth integrand (no endpoint singularity at df = 1):
//   Pr(X >= x) = int_{sqrt(x)}^{inf} 2 s^{df-1} e^{-s^2/2} ds / (2^{df/2} Gamma(df/2)).
// The upper limit sqrt(x) + 45 leaves a remainder below e^{-1012} of the
// integrand scale, far outside double precision.
inline double chi_squared_sf_quadrature(double x, int df) {
  if (x <= 0.0) return 1.0;
  const double log_norm =
      (df / 2.0) * std::log(2.0) + std::lgamma(df / 2.0);
  const double lo = std::sqrt(x);
  const double hi = lo + 45.0;
  // Work relative to the integrand's peak on [lo, hi] to keep the absolute
  // Simpson tolerance meaningful in the far tail.
  const double s_peak = std::min(std::max(lo, std::sqrt(std::max(0.0, df - 1.0))), hi);
  const double log_peak = (df - 1.0) * std::log(std::max(s_peak, 1e-300)) -
                          0.5 * s_peak * s_peak;
  const auto integrand = [&](double s) {
    const double log_f = (df - 1.0) * std::log(std::max(s, 1e-300)) - 0.5 * s * s;
    return std::exp(log_f - log_peak);
  };
  // Unit-width panels so the initial Simpson probes cannot straddle the
  // peak (width ~1) without sampling it; the far-tail panels cost nothing.
  double scaled = 0.0;
  for (double a = lo; a < hi; a += 1.0) {
    scaled += integrate(integrand, a, std::min(a + 1.0, hi), 1e-12 / 45.0);
  }
  return 2.0 * scaled * std::exp(log_peak - log_norm);
}

// Two-sided Fisher exact test by direct enumeration with long-double
// factorials (adequate for the desk-scale tables the tests use).
inline double fisher_two_sided_enumeration(long long a, long long b, long long c,
                                           long long d) {
  const long long r1 = a + b, r2 = c + d, c1 = a + c, n = a + b + c + d;
  auto lfact = [](long long k) { return std::lgamma(static_cast<double>(k) + 1.0); };
  const double log_const = lfact(r1) + lfact(r2) + lfact(c1) + lfact(n - c1) - lfact(n);
  auto log_p = [&](long long aa) {
    return log_const - lfact(aa) - lfact(r1 - aa) - lfact(c1 - aa) -
           lfact(r2 - c1 + aa);
  };
  const double lp_obs = log_p(a);
  const long long lo = std::max(0LL, c1 - r2);
  const long long hi = std::min(r1, c1);
  double total = 0.0;
  for (long long aa = lo; aa <= hi; ++aa) {
    const double lp = log_p(aa);
    if (lp <= lp_obs + 1e-7) total += std::exp(lp);
  }
  return std::min(1.0, total);
}

}  // namespace oracles
