#pragma once

namespace choicekit {

// Regularized upper incomplete gamma Q(a, x) = Gamma(a, x) / Gamma(a) for
// a > 0, x >= 0. Series expansion below x < a + 1, Lentz continued fraction
// above; relative accuracy ~1e-12 in the tested range.
double regularized_gamma_q(double a, double x);

// Chi-squared survival function Pr(X >= x) with df degrees of freedom.
double chi_squared_sf(double x, int df);

// log of the binomial coefficient C(n, k), via lgamma.
double log_binomial(long long n, long long k);

// Two-sided Fisher exact test on the 2x2 table [[a, b], [c, d]] with fixed
// margins: sums hypergeometric probabilities of all tables at most as likely
// as the observed one (inclusion tolerance p <= p_obs * (1 + 1e-7)).
double fisher_exact_two_sided(long long a, long long b, long long c, long long d);

}  // namespace choicekit
