#include "choicekit/stats.hpp"

#include <cmath>
#include <string>

#include "choicekit/errors.hpp"

namespace choicekit {

namespace {

constexpr int kMaxIter = 1000;
constexpr double kEps = 1e-15;
constexpr double kTiny = 1e-300;

// Lower regularized gamma P(a, x) by series; valid for x < a + 1.
double gamma_p_series(double a, double x) {
  if (x <= 0.0) return 0.0;
  double term = 1.0 / a;
  double sum = term;
  double ap = a;
  for (int n = 0; n < kMaxIter; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::abs(term) < std::abs(sum) * kEps)
      return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  throw NumericError("regularized_gamma_q: series did not converge");
}

// Upper regularized gamma Q(a, x) by modified Lentz continued fraction;
// valid for x >= a + 1.
double gamma_q_cf(double a, double x) {
  double b = x + 1.0 - a;
  double c = 1.0 / kTiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i <= kMaxIter; ++i) {
    const double an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < kTiny) d = kTiny;
    c = b + an / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kEps)
      return h * std::exp(-x + a * std::log(x) - std::lgamma(a));
  }
  throw NumericError("regularized_gamma_q: continued fraction did not converge");
}

}  // namespace

double regularized_gamma_q(double a, double x) {
  if (!(a > 0.0)) throw DataError("regularized_gamma_q: a must be positive");
  if (!(x >= 0.0)) throw DataError("regularized_gamma_q: x must be non-negative");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_cf(a, x);
}

double chi_squared_sf(double x, int df) {
  if (df < 1) throw DataError("chi_squared_sf: df must be >= 1");
  if (!(x >= 0.0)) throw DataError("chi_squared_sf: x must be non-negative");
  return regularized_gamma_q(0.5 * df, 0.5 * x);
}

double log_binomial(long long n, long long k) {
  if (n < 0 || k < 0 || k > n) throw DataError("log_binomial: need 0 <= k <= n");
  return std::lgamma(static_cast<double>(n) + 1.0) -
         std::lgamma(static_cast<double>(k) + 1.0) -
         std::lgamma(static_cast<double>(n - k) + 1.0);
}

double fisher_exact_two_sided(long long a, long long b, long long c, long long d) {
  if (a < 0 || b < 0 || c < 0 || d < 0)
    throw DataError("fisher_exact_two_sided: counts must be non-negative");
  const long long r1 = a + b, r2 = c + d;
  const long long c1 = a + c;
  const long long n = r1 + r2;
  if (n == 0) throw DataError("fisher_exact_two_sided: empty table");

  // Hypergeometric log-probability of a table with top-left entry k.
  auto log_prob = [&](long long k) {
    return log_binomial(r1, k) + log_binomial(r2, c1 - k) - log_binomial(n, c1);
  };

  const long long k_lo = std::max(0LL, c1 - r2);
  const long long k_hi = std::min(c1, r1);
  const double lp_obs = log_prob(a);
  const double threshold = lp_obs + std::log1p(1e-7);
  double p = 0.0;
  for (long long k = k_lo; k <= k_hi; ++k) {
    const double lp = log_prob(k);
    if (lp <= threshold) p += std::exp(lp);
  }
  return std::min(1.0, p);
}

}  // namespace choicekit
