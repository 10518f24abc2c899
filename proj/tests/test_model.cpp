#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <Eigen/Dense>
#include <random>
#include <vector>

#include "choicekit/errors.hpp"
#include "choicekit/model.hpp"
#include "choicekit/weights.hpp"
#include "doctest.h"
#include "helpers.hpp"

using namespace choicekit;

namespace {

// Central finite differences of the weighted log-likelihood.
Eigen::VectorXd fd_gradient(ChoiceModel model, const ChoiceDataset& data,
                            const SampleWeights& w, double h) {
  Eigen::VectorXd g(model.n_params());
  for (int p = 0; p < model.n_params(); ++p) {
    const double keep = model.params()(p);
    model.params()(p) = keep + h;
    const double up = model.log_likelihood(data, w);
    model.params()(p) = keep - h;
    const double down = model.log_likelihood(data, w);
    model.params()(p) = keep;
    g(p) = (up - down) / (2.0 * h);
  }
  return g;
}

// Per-coordinate relative error with a unit floor (gradient entries are
// O(1)..O(n_obs) here, so the floor only matters for near-zero coordinates).
double max_rel_error(const Eigen::VectorXd& got, const Eigen::VectorXd& want) {
  double worst = 0.0;
  for (int i = 0; i < got.size(); ++i) {
    const double denom = std::max(1.0, std::abs(want(i)));
    worst = std::max(worst, std::abs(got(i) - want(i)) / denom);
  }
  return worst;
}

ChoiceModel randomized(const ModelSpec& spec, const ChoiceDataset& data,
                       std::uint64_t seed) {
  ChoiceModel model = ChoiceModel::zeros(spec, data);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 0.6);
  for (int p = 0; p < model.n_params(); ++p) model.params()(p) = normal(rng);
  if (spec.family == Family::cdm && !spec.self_pulls) {
    // layout stays dense off-diagonal; nothing to zero
  } else if (spec.family == Family::mixed_logit) {
    // mixture weights must be a simplex point
    Eigen::VectorXd pi(spec.mixture_components);
    for (int k = 0; k < spec.mixture_components; ++k)
      pi(k) = 0.5 + std::uniform_real_distribution<double>(0.0, 1.0)(rng);
    pi /= pi.sum();
    model.params().head(spec.mixture_components) = pi;
  }
  return model;
}

SampleWeights random_weights(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unif(0.25, 2.0);
  Eigen::VectorXd w(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < w.size(); ++i) w(i) = unif(rng);
  return SampleWeights::raw(w);
}

}  // namespace

TEST_CASE("analytic gradients match central finite differences for every family") {
  struct Case {
    ModelSpec spec;
    int d_x, d_y;
  };
  const std::vector<Case> cases = {
      {{Family::logit}, 0, 0},
      {{Family::mnl}, 3, 0},
      {{Family::mnl, false, false}, 3, 0},  // no intercepts
      {{Family::cl}, 0, 3},
      {{Family::cml}, 2, 3},
      {{Family::cdm}, 0, 0},
      {{Family::cdm, true}, 0, 0},  // self pulls
      {{Family::mcdm}, 2, 0},
      {{Family::lcl}, 0, 3},
      {{Family::mlcl}, 2, 3},
      {{Family::mixed_logit, false, true, 3}, 0, 0},
  };
  for (std::size_t ci = 0; ci < cases.size(); ++ci) {
    const Case& c = cases[ci];
    for (std::uint64_t rep = 0; rep < 2; ++rep) {
      const std::uint64_t seed = 100 * ci + rep;
      const ChoiceDataset data = helpers::random_dataset(5, 40, c.d_x, c.d_y, seed);
      const SampleWeights w = random_weights(data.n_observations(), seed + 7);
      const ChoiceModel model = randomized(c.spec, data, seed + 13);

      const Eigen::VectorXd analytic = model.gradient(data, w);
      const Eigen::VectorXd numeric = fd_gradient(model, data, w, 1e-5);
      INFO("family ", family_name(c.spec.family), " rep ", rep);
      CHECK(max_rel_error(analytic, numeric) < 1e-6);

      // ll_and_gradient agrees with the two single-purpose entry points.
      Eigen::VectorXd both(model.n_params());
      const double ll = model.ll_and_gradient(data, w, &both);
      CHECK(ll == doctest::Approx(model.log_likelihood(data, w)).epsilon(1e-14));
      CHECK((both - analytic).cwiseAbs().maxCoeff() == 0.0);
    }
  }
}

TEST_CASE("logit probabilities are softmax over set utilities") {
  const ChoiceDataset data = helpers::make_dataset({{"u", {"a", "b", "c"}, "b"}});
  Eigen::VectorXd u(3);
  u << 1.0, 0.0, -1.0;  // indices follow first-intern order: a, b, c
  const ChoiceModel m = ChoiceModel::logit(u);
  const Eigen::VectorXd p = m.choice_probabilities(data, 0);
  const double z = std::exp(1.0) + 1.0 + std::exp(-1.0);
  CHECK(p(0) == doctest::Approx(std::exp(1.0) / z).epsilon(1e-14));
  CHECK(p(1) == doctest::Approx(1.0 / z).epsilon(1e-14));
  CHECK(p(2) == doctest::Approx(std::exp(-1.0) / z).epsilon(1e-14));
  CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(m.utility(data, 0, 1) == 0.0);
}

TEST_CASE("probabilities are translation invariant in utilities") {
  const ChoiceDataset data = helpers::random_dataset(4, 25, 2, 0, 3);
  const SampleWeights w = SampleWeights::uniform(data.n_observations());

  SUBCASE("logit: constant shift of u") {
    Eigen::VectorXd u(4);
    u << 0.3, -0.9, 1.4, 0.0;
    const ChoiceModel a = ChoiceModel::logit(u);
    const ChoiceModel b = ChoiceModel::logit(u.array() + 17.5);
    CHECK(a.log_likelihood(data, w) == doctest::Approx(b.log_likelihood(data, w))
                                           .epsilon(1e-12));
  }
  SUBCASE("mnl: shared row added to gamma") {
    Eigen::MatrixXd gamma(4, 2);
    gamma << 0.2, -0.4, 1.0, 0.1, -0.7, 0.3, 0.0, 0.9;
    Eigen::VectorXd u = Eigen::VectorXd::Zero(4);
    const ChoiceModel a = ChoiceModel::mnl(u, gamma);
    Eigen::MatrixXd shifted = gamma;
    shifted.rowwise() += Eigen::RowVector2d(3.0, -2.0);
    const ChoiceModel b = ChoiceModel::mnl(u, shifted);
    CHECK(a.log_likelihood(data, w) == doctest::Approx(b.log_likelihood(data, w))
                                           .epsilon(1e-12));
  }
}

TEST_CASE("logit satisfies IIA: within-pair odds ignore the rest of the set") {
  const ChoiceDataset pair = helpers::make_dataset({{"u", {"a", "b"}, "a"}});
  const ChoiceDataset triple = helpers::make_dataset({{"u", {"a", "b", "c"}, "a"}});
  Eigen::VectorXd u(3);
  u << 0.4, -0.2, 1.1;
  const ChoiceModel m2 = ChoiceModel::logit(u.head(2));
  const ChoiceModel m3 = ChoiceModel::logit(u);
  const Eigen::VectorXd p2 = m2.choice_probabilities(pair, 0);
  const Eigen::VectorXd p3 = m3.choice_probabilities(triple, 0);
  CHECK(p2(0) / p2(1) == doctest::Approx(p3(0) / p3(1)).epsilon(1e-12));
}

TEST_CASE("cdm utilities accumulate pulls from the rest of the set") {
  const ChoiceDataset data = helpers::make_dataset({
      {"u", {"a", "b", "c"}, "a"},
      {"u", {"a", "b"}, "b"},
  });
  Eigen::MatrixXd p(3, 3);
  p << 0.0, 0.5, -1.0,
       2.0, 0.0, 0.25,
       -0.5, 1.5, 0.0;
  const ChoiceModel m = ChoiceModel::cdm(p, false);
  // u_a({a,b,c}) = p_ab + p_ac
  CHECK(m.utility(data, 0, 0) == doctest::Approx(0.5 - 1.0));
  CHECK(m.utility(data, 0, 1) == doctest::Approx(2.0 + 0.25));
  CHECK(m.utility(data, 0, 2) == doctest::Approx(-0.5 + 1.5));
  // pairs only see each other
  CHECK(m.utility(data, 1, 0) == doctest::Approx(0.5));
  CHECK(m.utility(data, 1, 1) == doctest::Approx(2.0));
  // pulls() round-trips the matrix, diagonal forced to zero
  CHECK((m.pulls() - p).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(ChoiceModel::cdm(Eigen::MatrixXd::Ones(3, 3), false), DataError);
}

TEST_CASE("context-model equivalence: indicator-encoded MNL equals self-pull CDM") {
  // With Gamma = P, an intercept-free MNL on set-indicator covariates gives
  // utilities x_C . gamma_i = sum_{j in C} p_ij, the self-pull CDM.
  for (std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
    const ChoiceDataset data = helpers::random_dataset(5, 30, 0, 0, seed);
    const ChoiceDataset encoded = indicator_encode(data);
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 0.8);
    Eigen::MatrixXd p(5, 5);
    for (int i = 0; i < 5; ++i)
      for (int j = 0; j < 5; ++j) p(i, j) = normal(rng);

    const ChoiceModel mnl = ChoiceModel::mnl_no_intercepts(p);
    const ChoiceModel cdm = ChoiceModel::cdm(p, true);
    for (std::size_t o = 0; o < data.n_observations(); ++o) {
      const Eigen::VectorXd pm = mnl.choice_probabilities(encoded, o);
      const Eigen::VectorXd pc = cdm.choice_probabilities(data, o);
      CHECK((pm - pc).cwiseAbs().maxCoeff() < 1e-12);
    }

    // The duality view reinterprets the fitted MNL as that CDM.
    const ChoiceModel view = cdm_duality_view(mnl);
    CHECK(view.family() == Family::cdm);
    CHECK(view.spec().self_pulls);
    CHECK((view.pulls() - p).cwiseAbs().maxCoeff() < 1e-14);
  }
}

TEST_CASE("mixed logit mixes component softmaxes with the weights") {
  const ChoiceDataset data = helpers::make_dataset({{"u", {"a", "b"}, "a"}});
  Eigen::VectorXd pi(2);
  pi << 0.3, 0.7;
  Eigen::MatrixXd u(2, 2);
  u << 2.0, 0.0,   // component 0 prefers a
       0.0, 2.0;   // component 1 prefers b
  const ChoiceModel m = ChoiceModel::mixed_logit(pi, u);
  const Eigen::VectorXd p = m.choice_probabilities(data, 0);
  const double s = 1.0 / (1.0 + std::exp(-2.0));
  CHECK(p(0) == doctest::Approx(0.3 * s + 0.7 * (1.0 - s)).epsilon(1e-14));
  CHECK(p.sum() == doctest::Approx(1.0).epsilon(1e-14));
  CHECK_THROWS_AS(m.utility(data, 0, 0), DataError);
  // invalid mixture weights are rejected
  Eigen::VectorXd bad(2);
  bad << 0.5, 0.6;
  CHECK_THROWS_AS(ChoiceModel::mixed_logit(bad, u), DataError);
}

TEST_CASE("zeros() produces the documented flat layouts") {
  const ChoiceDataset data = helpers::random_dataset(4, 10, 2, 3, 11);
  auto n_params = [&](const ModelSpec& spec) {
    return ChoiceModel::zeros(spec, data).n_params();
  };
  CHECK(n_params({Family::logit}) == 4);
  CHECK(n_params({Family::mnl}) == 4 + 4 * 2);
  CHECK(n_params({Family::mnl, false, false}) == 4 * 2);
  CHECK(n_params({Family::cl}) == 3);
  CHECK(n_params({Family::cml}) == 3 + 3 * 2);
  CHECK(n_params({Family::cdm}) == 4 * 3);
  CHECK(n_params({Family::cdm, true}) == 4 * 4);
  CHECK(n_params({Family::mcdm}) == 4 * 3 + 4 * 2);
  CHECK(n_params({Family::lcl}) == 3 + 3 * 3);
  CHECK(n_params({Family::mlcl}) == 3 + 3 * 3 + 3 * 2);
  const ChoiceModel mixed = ChoiceModel::zeros({Family::mixed_logit, false, true, 3}, data);
  CHECK(mixed.n_params() == 3 + 3 * 4);
  CHECK(mixed.mixture_weights().isApprox(Eigen::VectorXd::Constant(3, 1.0 / 3.0)));
}

TEST_CASE("check_data rejects mismatched universes") {
  const ChoiceDataset with_cov = helpers::random_dataset(4, 10, 2, 0, 5);
  const ChoiceDataset bare = helpers::random_dataset(4, 10, 0, 0, 5);
  const ChoiceDataset fewer = helpers::random_dataset(3, 10, 2, 0, 5);

  const ChoiceModel mnl = ChoiceModel::zeros({Family::mnl}, with_cov);
  CHECK_THROWS_AS(mnl.log_likelihood(bare, SampleWeights::uniform(10)), DataError);
  CHECK_THROWS_AS(mnl.log_likelihood(fewer, SampleWeights::uniform(10)), DataError);

  const ChoiceModel cl = ChoiceModel::cl(Eigen::Vector3d(1.0, 0.0, -1.0));
  CHECK_THROWS_AS(cl.log_likelihood(bare, SampleWeights::uniform(10)), DataError);

  // weight length must match the dataset
  const ChoiceModel logit = ChoiceModel::zeros({Family::logit}, bare);
  CHECK_THROWS_AS(logit.log_likelihood(bare, SampleWeights::uniform(9)), DataError);
}

TEST_CASE("lcl mean-field parameters satisfy their defining equations") {
  SUBCASE("isotropic closed form") {
    Eigen::VectorXd mu(2);
    mu << 0.5, -0.3;
    const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2, 2);
    auto [theta, a] = lcl_mean_field_params(mu, eye, eye, 5);
    CHECK((theta - mu / 6.0).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((a - (5.0 / 6.0) * eye).cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("random SPD inputs") {
    std::mt19937_64 rng(21);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int d = 3, k = 4;
    Eigen::MatrixXd m0(d, d), m1(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) {
        m0(i, j) = normal(rng);
        m1(i, j) = normal(rng);
      }
    const Eigen::MatrixXd sigma0 = m0 * m0.transpose() + 0.1 * Eigen::MatrixXd::Identity(d, d);
    const Eigen::MatrixXd sigma = m1 * m1.transpose() + 0.1 * Eigen::MatrixXd::Identity(d, d);
    Eigen::VectorXd mu(d);
    mu << 1.0, -2.0, 0.5;

    auto [theta, a] = lcl_mean_field_params(mu, sigma0, sigma, k);
    const Eigen::MatrixXd denom = sigma0 + sigma / static_cast<double>(k);
    // A (Sigma0 + Sigma/k) = Sigma0 and (Sigma0 + Sigma/k) Sigma^{-1} k theta = mu
    CHECK((a * denom - sigma0).cwiseAbs().maxCoeff() < 1e-10);
    const Eigen::VectorXd lhs =
        denom * sigma.ldlt().solve(static_cast<double>(k) * theta);
    CHECK((lhs - mu).cwiseAbs().maxCoeff() < 1e-10);
  }
  SUBCASE("singular sum rejected") {
    const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(2, 2);
    Eigen::VectorXd mu = Eigen::VectorXd::Ones(2);
    CHECK_THROWS_AS(lcl_mean_field_params(mu, zero, zero, 3), NumericError);
  }
}

TEST_CASE("singleton sets contribute zero log-likelihood") {
  const ChoiceDataset with = helpers::make_dataset({
      {"u0", {"a", "b"}, "a"},
      {"u1", {"c"}, "c"},
      {"u2", {"b", "c"}, "c"},
  });
  const ChoiceDataset without = helpers::make_dataset({
      {"u0", {"a", "b"}, "a"},
      {"u2", {"b", "c"}, "c"},
  });
  Eigen::VectorXd u(3);
  u << 0.2, -0.5, 0.9;
  const ChoiceModel m = ChoiceModel::logit(u);
  CHECK(m.log_likelihood(with, SampleWeights::uniform(3)) ==
        doctest::Approx(m.log_likelihood(without, SampleWeights::uniform(2)))
            .epsilon(1e-14));
  // and the gradient ignores them too
  const Eigen::VectorXd g_with = m.gradient(with, SampleWeights::uniform(3));
  const Eigen::VectorXd g_without = m.gradient(without, SampleWeights::uniform(2));
  CHECK((g_with - g_without).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("family names round trip") {
  for (Family f : {Family::logit, Family::mnl, Family::cl, Family::cml, Family::cdm,
                   Family::mcdm, Family::lcl, Family::mlcl, Family::mixed_logit}) {
    CHECK(family_from_name(family_name(f)) == f);
  }
  CHECK_THROWS_AS(family_from_name("flogit"), DataError);
}
