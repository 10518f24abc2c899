#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <vector>

#include "choicekit/stats.hpp"
#include "doctest.h"
#include "oracles.hpp"

using namespace choicekit;

TEST_CASE("chi-squared survival matches closed forms for small even/odd df") {
  // df = 1: SF(x) = erfc(sqrt(x/2)); df = 2: e^{-x/2};
  // df = 4: e^{-x/2} (1 + x/2); df = 6: e^{-x/2} (1 + x/2 + x^2/8).
  for (double x : {0.01, 0.5, 1.0, 3.841, 10.0, 25.0, 60.0, 100.0}) {
    CHECK(chi_squared_sf(x, 1) ==
          doctest::Approx(std::erfc(std::sqrt(x / 2.0))).epsilon(1e-12));
    CHECK(chi_squared_sf(x, 2) == doctest::Approx(std::exp(-x / 2.0)).epsilon(1e-12));
    CHECK(chi_squared_sf(x, 4) ==
          doctest::Approx(std::exp(-x / 2.0) * (1.0 + x / 2.0)).epsilon(1e-12));
    CHECK(chi_squared_sf(x, 6) ==
          doctest::Approx(std::exp(-x / 2.0) * (1.0 + x / 2.0 + x * x / 8.0))
              .epsilon(1e-12));
  }
}

TEST_CASE("chi-squared survival matches the quadrature oracle across df and x") {
  const std::vector<double> xs = {1e-3, 0.05, 0.5, 1.0, 2.0,  3.841, 5.0,
                                  9.0,  15.0, 25.0, 40.0, 65.0, 100.0};
  for (int df = 1; df <= 20; ++df) {
    for (double x : xs) {
      const double got = chi_squared_sf(x, df);
      const double want = oracles::chi_squared_sf_quadrature(x, df);
      CHECK(got == doctest::Approx(want).epsilon(1e-8));
    }
  }
  CHECK(chi_squared_sf(0.0, 3) == 1.0);
}

TEST_CASE("chi-squared survival edge behavior") {
  CHECK_THROWS(chi_squared_sf(-1.0, 2));
  CHECK_THROWS(chi_squared_sf(1.0, 0));
  CHECK(chi_squared_sf(1e308, 2) == 0.0);
  // Monotone decreasing in x, increasing in df.
  CHECK(chi_squared_sf(5.0, 3) > chi_squared_sf(6.0, 3));
  CHECK(chi_squared_sf(5.0, 4) > chi_squared_sf(5.0, 3));
}

TEST_CASE("the conventional 0.05 critical value") {
  CHECK(chi_squared_sf(3.841, 1) == doctest::Approx(0.05).epsilon(1e-3));
  CHECK(std::abs(chi_squared_sf(3.841, 1) - 0.05) < 1e-4);
}

TEST_CASE("log_binomial against exact coefficients") {
  CHECK(std::exp(log_binomial(10, 3)) == doctest::Approx(120.0).epsilon(1e-12));
  CHECK(std::exp(log_binomial(52, 5)) == doctest::Approx(2598960.0).epsilon(1e-10));
  CHECK(log_binomial(7, 0) == doctest::Approx(0.0));
  CHECK(log_binomial(7, 7) == doctest::Approx(0.0));
}

TEST_CASE("regularized gamma Q sanity") {
  CHECK(regularized_gamma_q(2.5, 0.0) == 1.0);
  // Q(1, x) = e^{-x}.
  for (double x : {0.1, 1.0, 5.0, 30.0}) {
    CHECK(regularized_gamma_q(1.0, x) == doctest::Approx(std::exp(-x)).epsilon(1e-12));
  }
}

TEST_CASE("fisher exact matches direct enumeration") {
  struct Table {
    long long a, b, c, d;
  };
  const std::vector<Table> tables = {
      {1, 9, 11, 3}, {3, 1, 1, 3},  {10, 10, 10, 10}, {5, 0, 1, 4},
      {0, 5, 5, 0},  {2, 7, 8, 2},  {40, 10, 20, 30}, {1, 0, 0, 1},
  };
  for (const Table& t : tables) {
    const double got = fisher_exact_two_sided(t.a, t.b, t.c, t.d);
    const double want = oracles::fisher_two_sided_enumeration(t.a, t.b, t.c, t.d);
    CHECK(got == doctest::Approx(want).epsilon(1e-9));
  }
}

TEST_CASE("fisher exact invariances") {
  // Transposing the table (swap rows with columns) keeps the p-value.
  CHECK(fisher_exact_two_sided(12, 5, 3, 9) ==
        doctest::Approx(fisher_exact_two_sided(12, 3, 5, 9)).epsilon(1e-12));
  // Swapping the two rows keeps the p-value; same for columns.
  CHECK(fisher_exact_two_sided(12, 5, 3, 9) ==
        doctest::Approx(fisher_exact_two_sided(3, 9, 12, 5)).epsilon(1e-12));
  CHECK(fisher_exact_two_sided(12, 5, 3, 9) ==
        doctest::Approx(fisher_exact_two_sided(5, 12, 9, 3)).epsilon(1e-12));
  // Rows proportional -> no association -> p = 1.
  CHECK(fisher_exact_two_sided(4, 6, 2, 3) == doctest::Approx(1.0));
  CHECK(fisher_exact_two_sided(5, 5, 20, 20) == doctest::Approx(1.0));
}

TEST_CASE("fisher exact on a large lopsided table") {
  const double p = fisher_exact_two_sided(1196, 465, 688, 141);
  CHECK(p > 6.5e-10);
  CHECK(p < 6.5e-8);
  CHECK(p == doctest::Approx(oracles::fisher_two_sided_enumeration(1196, 465, 688, 141))
                 .epsilon(1e-6));
}

TEST_CASE("fisher exact rejects negative cells and handles empty margins") {
  CHECK_THROWS(fisher_exact_two_sided(-1, 2, 3, 4));
  // A table with an all-zero row carries no evidence.
  CHECK(fisher_exact_two_sided(0, 0, 3, 4) == doctest::Approx(1.0));
}
