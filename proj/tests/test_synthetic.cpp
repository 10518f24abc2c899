// Synthetic generators: the exact pets oracle, oracle sampling, the
// confounded-recommender world, and the Gaussian recommender.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Core>
#include <cmath>
#include <map>
#include <vector>

#include "choicekit/dataset.hpp"
#include "choicekit/errors.hpp"
#include "choicekit/synthetic.hpp"

using namespace choicekit;

namespace {

// Mean over observations of the average chooser-item affinity inside the set.
double mean_set_affinity(const ChoiceDataset& data, const SyntheticWorld& world) {
  const Eigen::MatrixXd& x = data.chooser_covariates();
  double total = 0.0;
  for (std::size_t o = 0; o < data.n_observations(); ++o) {
    const Observation& ob = data.observation(o);
    const Eigen::VectorXd xa = x.row(data.observation(o).chooser);
    double s = 0.0;
    for (int i : ob.items) s += world.item_embeddings.row(i).dot(xa);
    total += s / static_cast<double>(ob.items.size());
  }
  return total / static_cast<double>(data.n_observations());
}

}  // namespace

TEST_CASE("the pets population shifts observed frequencies without anyone changing taste") {
  const PopulationOracle po = pets_oracle();
  const std::vector<std::string> pair = {"cat", "dog"};
  const std::vector<std::string> trio = {"cat", "dog", "fish"};

  // Exact rational arithmetic end to end.
  CHECK(observed_choice_prob_exact(po, "dog", pair) == Rational(1, 2));
  CHECK(observed_choice_prob_exact(po, "dog", trio) == Rational(7, 10));
  CHECK(aggregate_choice_prob_exact(po, "dog", pair) == Rational(5, 8));
  CHECK(aggregate_choice_prob_exact(po, "dog", trio) == Rational(5, 8));

  // Complements behave; fish is never picked.
  CHECK(observed_choice_prob_exact(po, "cat", pair) == Rational(1, 2));
  CHECK(observed_choice_prob_exact(po, "cat", trio) +
            observed_choice_prob_exact(po, "dog", trio) +
            observed_choice_prob_exact(po, "fish", trio) ==
        Rational(1));
  CHECK(observed_choice_prob_exact(po, "fish", trio) == Rational(0));

  // The double-precision wrappers agree with the rationals.
  CHECK(observed_choice_prob(po, "dog", trio) == doctest::Approx(0.7).epsilon(1e-15));
  CHECK(aggregate_choice_prob(po, "dog", pair) == doctest::Approx(0.625).epsilon(1e-15));

  // Unknown sets and items are rejected.
  CHECK_THROWS_AS(observed_choice_prob_exact(po, "dog", {"cat", "fish"}), DataError);
  CHECK_THROWS_AS(observed_choice_prob_exact(po, "bird", pair), DataError);
}

TEST_CASE("oracle validation rejects inconsistent tables") {
  PopulationOracle po = pets_oracle();
  po.type_weights = {Rational(1, 4), Rational(1, 4)};  // sums to 1/2
  CHECK_THROWS_AS(observed_choice_prob_exact(po, "dog", {"cat", "dog"}), DataError);

  po = pets_oracle();
  po.choice_probs[0][0] = {Rational(1, 2), Rational(1, 4)};  // sums to 3/4
  CHECK_THROWS_AS(observed_choice_prob_exact(po, "dog", {"cat", "dog"}), DataError);

  po = pets_oracle();
  po.sets[0] = {1, 0};  // unsorted
  CHECK_THROWS_AS(observed_choice_prob_exact(po, "dog", {"cat", "dog"}), DataError);
}

TEST_CASE("oracle samples reproduce the exact conditional frequencies") {
  const PopulationOracle po = pets_oracle();
  const int n = 20000;
  const OracleSample sample = sample_oracle(po, n, 31u);
  REQUIRE(sample.data.n_observations() == static_cast<std::size_t>(n));
  REQUIRE(sample.chooser_types.size() == static_cast<std::size_t>(n));
  REQUIRE(sample.set_propensities.size() == static_cast<std::size_t>(n));

  const int dog = sample.data.items().find("dog").value();
  std::map<std::size_t, std::pair<long long, long long>> by_size;  // set size -> (n, dog picks)
  for (std::size_t o = 0; o < sample.data.n_observations(); ++o) {
    const Observation& ob = sample.data.observation(o);
    auto& cell = by_size[ob.items.size()];
    cell.first += 1;
    if (ob.chosen == dog) cell.second += 1;
  }
  REQUIRE(by_size.count(2) == 1);
  REQUIRE(by_size.count(3) == 1);

  // Each conditional frequency within 3 binomial sigmas of its exact value.
  const auto close = [](std::pair<long long, long long> cell, double p) {
    const double n_c = static_cast<double>(cell.first);
    const double sigma = std::sqrt(p * (1.0 - p) / n_c);
    return std::abs(static_cast<double>(cell.second) / n_c - p) <= 3.0 * sigma;
  };
  CHECK(close(by_size[2], 0.5));
  CHECK(close(by_size[3], 0.7));

  // Pr(size-3 set) = 1/4 * 1/4 + 3/4 * 3/4 = 5/8 of all draws.
  const double frac3 = static_cast<double>(by_size[3].first) / n;
  CHECK(std::abs(frac3 - 0.625) <= 3.0 * std::sqrt(0.625 * 0.375 / n));

  // Recorded propensities are exactly Pr(C | recorded type).
  for (std::size_t o = 0; o < 400; ++o) {
    const Observation& ob = sample.data.observation(o);
    const int t = sample.chooser_types[o];
    const double expect = (ob.items.size() == 2) == (t == 0) ? 0.75 : 0.25;
    CHECK(sample.set_propensities[o] == doctest::Approx(expect).epsilon(1e-15));
  }
}

TEST_CASE("oracle sampling is deterministic in the seed") {
  const PopulationOracle po = pets_oracle();
  const OracleSample a = sample_oracle(po, 500, 7u);
  const OracleSample b = sample_oracle(po, 500, 7u);
  const OracleSample c = sample_oracle(po, 500, 8u);
  REQUIRE(a.data.n_observations() == b.data.n_observations());
  bool identical = a.chooser_types == b.chooser_types;
  for (std::size_t o = 0; o < a.data.n_observations(); ++o) {
    identical = identical && a.data.observation(o).chosen == b.data.observation(o).chosen &&
                a.data.observation(o).items == b.data.observation(o).items;
  }
  CHECK(identical);

  bool differs = false;
  for (std::size_t o = 0; o < c.data.n_observations(); ++o) {
    differs = differs || c.data.observation(o).chosen != a.data.observation(o).chosen;
  }
  CHECK(differs);
}

TEST_CASE("confounded worlds have unit-circle geometry independent of strength") {
  const SyntheticWorld w0 = make_confounded_world(12, 0.0, 19u);
  const SyntheticWorld w5 = make_confounded_world(12, 5.0, 19u);
  REQUIRE(w0.item_embeddings.rows() == 12);
  REQUIRE(w0.item_embeddings.cols() == 2);
  for (int i = 0; i < 12; ++i) {
    CHECK(w0.item_embeddings.row(i).norm() == doctest::Approx(1.0).epsilon(1e-12));
  }
  REQUIRE(w0.true_cdm.rows() == 12);
  CHECK(w0.true_cdm.diagonal().cwiseAbs().maxCoeff() == 0.0);
  CHECK(w0.true_cdm.maxCoeff() <= 1.0);
  CHECK(w0.true_cdm.minCoeff() >= -1.0);

  // Strength is a dial on set formation, not on the world's geometry.
  CHECK((w0.item_embeddings - w5.item_embeddings).cwiseAbs().maxCoeff() == 0.0);
  CHECK((w0.true_cdm - w5.true_cdm).cwiseAbs().maxCoeff() == 0.0);
  CHECK(w0.confounding_strength == 0.0);
  CHECK(w5.confounding_strength == 5.0);

  CHECK_THROWS_AS(make_confounded_world(1, 0.0, 0u), DataError);
  CHECK_THROWS_AS(make_confounded_world(5, -1.0, 0u), DataError);
}

TEST_CASE("zero strength makes both set branches a fair coin per item") {
  const SyntheticWorld world = make_confounded_world(10, 0.0, 3u);
  const ChoiceDataset data = sample_confounded(world, 4000, 4u);
  double total = 0.0;
  for (std::size_t o = 0; o < data.n_observations(); ++o) {
    total += static_cast<double>(data.observation(o).items.size());
  }
  // E|C| for 10 iid coins conditioned on |C| >= 2: 10/2 adjusted upward a touch.
  const double mean_size = total / static_cast<double>(data.n_observations());
  CHECK(mean_size > 4.8);
  CHECK(mean_size < 5.3);
}

TEST_CASE("confounding pulls sets toward the chooser, uniform draws do not") {
  const SyntheticWorld world = make_confounded_world(20, 5.0, 23u);
  const ChoiceDataset conf = sample_confounded(world, 3000, 5u);
  const ChoiceDataset unif = sample_uniform_sets(world, 3000, 6u);
  REQUIRE(conf.has_chooser_covariates());
  REQUIRE(unif.has_chooser_covariates());

  const double affinity_conf = mean_set_affinity(conf, world);
  const double affinity_unif = mean_set_affinity(unif, world);
  CHECK(affinity_conf > affinity_unif + 0.2);
  CHECK(std::abs(affinity_unif) < 0.05);
}

TEST_CASE("confounded sampling is deterministic and reports redraws") {
  const SyntheticWorld world = make_confounded_world(3, 5.0, 2u);
  int ur1 = -1, lr1 = -1, ur2 = -1, lr2 = -1;
  const ChoiceDataset a = sample_confounded(world, 2000, 9u, &ur1, &lr1);
  const ChoiceDataset b = sample_confounded(world, 2000, 9u, &ur2, &lr2);
  CHECK(ur1 == ur2);
  CHECK(lr1 == lr2);
  // Three items redraw often: the uniform branch alone lands |C| < 2 half
  // the time, and strong logistic sets reject even more.
  CHECK(ur1 + lr1 > 0);
  bool identical = true;
  for (std::size_t o = 0; o < a.n_observations(); ++o) {
    identical = identical && a.observation(o).items == b.observation(o).items &&
                a.observation(o).chosen == b.observation(o).chosen;
  }
  CHECK(identical);
  for (std::size_t o = 0; o < a.n_observations(); ++o) {
    REQUIRE(a.observation(o).items.size() >= 2);
  }
}

TEST_CASE("generate_confounded records the sampled choosers in the world") {
  const auto [data, world] = generate_confounded(8, 250, 2.5, 13u);
  REQUIRE(world.chooser_embeddings.rows() == 250);
  REQUIRE(world.chooser_embeddings.cols() == 2);
  REQUIRE(data.n_observations() == 250);
  REQUIRE(data.has_chooser_covariates());
  // The dataset's covariates are exactly the recorded embeddings.
  for (std::size_t o = 0; o < 250; ++o) {
    const Eigen::VectorXd xa = data.chooser_covariates().row(data.observation(o).chooser);
    CHECK((xa.transpose() - world.chooser_embeddings.row(static_cast<int>(o))).norm() == 0.0);
  }
}

TEST_CASE("the gaussian recommender yields per-sample items with their coordinates") {
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(2);
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2, 2);
  const ChoiceDataset data = generate_gaussian_recommender(mu, eye, eye, 5, 300, 17u);
  REQUIRE(data.n_observations() == 300);
  REQUIRE(data.has_item_features());
  CHECK(data.feature_dim() == 2);
  CHECK(data.n_items() == 1500);  // items are sample-specific
  for (std::size_t o = 0; o < data.n_observations(); ++o) {
    REQUIRE(data.observation(o).items.size() == 5);
  }

  const ChoiceDataset again = generate_gaussian_recommender(mu, eye, eye, 5, 300, 17u);
  CHECK((data.item_features() - again.item_features()).cwiseAbs().maxCoeff() == 0.0);
  bool same_choices = true;
  for (std::size_t o = 0; o < 300; ++o) {
    same_choices = same_choices && data.observation(o).chosen == again.observation(o).chosen;
  }
  CHECK(same_choices);
}

TEST_CASE("a zero recommendation covariance collapses each set onto its chooser") {
  // The chooser's position is latent, but with sigma = 0 every recommended
  // item lands exactly on it: all features within a set coincide, while
  // sigma0 = I keeps different choosers' sets apart.
  Eigen::VectorXd mu(2);
  mu << 0.4, -0.2;
  const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(2, 2);
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(2, 2);
  const ChoiceDataset data = generate_gaussian_recommender(mu, eye, zero, 4, 50, 29u);
  for (std::size_t o = 0; o < data.n_observations(); ++o) {
    const Observation& ob = data.observation(o);
    const Eigen::VectorXd first = data.item_features().row(ob.items.front());
    for (int i : ob.items) {
      CHECK((data.item_features().row(i).transpose() - first).norm() == 0.0);
    }
  }
  const Eigen::VectorXd a = data.item_features().row(data.observation(0).items.front());
  const Eigen::VectorXd b = data.item_features().row(data.observation(1).items.front());
  CHECK((a - b).norm() > 1e-3);

  // Grand mean of set centers hovers near mu.
  Eigen::Vector2d center = Eigen::Vector2d::Zero();
  for (std::size_t o = 0; o < data.n_observations(); ++o) {
    center += data.item_features().row(data.observation(o).items.front());
  }
  center /= static_cast<double>(data.n_observations());
  CHECK((center - mu).norm() < 0.5);
}
