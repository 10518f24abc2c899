// Bipartite spectral co-clustering: incidence construction, planted-block
// recovery, accuracy scoring, and per-cluster fitting.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <vector>

#include "choicekit/clustering.hpp"
#include "choicekit/dataset.hpp"
#include "choicekit/errors.hpp"
#include "choicekit/fit.hpp"
#include "choicekit/model.hpp"
#include "helpers.hpp"

using namespace choicekit;

TEST_CASE("incidence rows mirror the observed choice sets") {
  const ChoiceDataset data = helpers::make_dataset({
      {"u0", {"a", "b"}, "a"},
      {"u1", {"b", "c"}, "c"},
      {"u2", {"a", "b", "c"}, "b"},
  });
  const IncidenceMatrix inc = build_incidence(data);
  REQUIRE(inc.r.rows() == 3);
  REQUIRE(inc.r.cols() == 3);
  REQUIRE(inc.row_ids.size() == 3);
  REQUIRE(inc.col_ids.size() == 3);

  for (std::size_t o = 0; o < 3; ++o) {
    const Observation& ob = data.observation(o);
    for (int i = 0; i < 3; ++i) {
      const bool in_set = std::find(ob.items.begin(), ob.items.end(), i) != ob.items.end();
      CHECK(inc.r(static_cast<int>(o), i) == (in_set ? 1.0 : 0.0));
    }
    CHECK(inc.col_ids[static_cast<std::size_t>(o)] == data.items().name(static_cast<int>(o)));
  }
}

TEST_CASE("planted two-type blocks are recovered almost perfectly") {
  // Strong signal: same-type edges at 0.9, cross-type at 0.1.
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const SbmSample sbm = generate_sbm(2, {120, 120}, {120, 120}, 0.9, 0.1, seed);
    const ClusterAssignment got = spectral_cocluster(sbm.incidence, 2, seed);
    const ClusterAccuracy acc = cluster_accuracy(got, sbm.truth);
    CHECK(acc.chooser >= 0.99);
    CHECK(acc.item >= 0.99);
  }
}

TEST_CASE("the signal-free null stays near chance") {
  // p = q removes all block structure; permutation-adjusted accuracy for
  // k = 2 is >= 1/2 by construction, so near-chance means barely above it.
  double total = 0.0;
  const int reps = 6;
  for (std::uint64_t seed = 1; seed <= reps; ++seed) {
    const SbmSample sbm = generate_sbm(2, {120, 120}, {120, 120}, 0.5, 0.5, seed);
    const ClusterAssignment got = spectral_cocluster(sbm.incidence, 2, seed);
    total += cluster_accuracy(got, sbm.truth).chooser;
  }
  CHECK(total / reps <= 0.58);
}

TEST_CASE("accuracy is invariant to relabeling clusters") {
  const SbmSample sbm = generate_sbm(3, {40, 40, 40}, {40, 40, 40}, 0.85, 0.1, 11u);
  const ClusterAssignment got = spectral_cocluster(sbm.incidence, 3, 11u);
  const ClusterAccuracy base = cluster_accuracy(got, sbm.truth);

  // Swap ids 0 <-> 2 everywhere: the best-permutation score cannot change.
  ClusterAssignment swapped = got;
  auto swap02 = [](std::vector<int>& v) {
    for (int& x : v) x = x == 0 ? 2 : (x == 2 ? 0 : x);
  };
  swap02(swapped.chooser_labels);
  swap02(swapped.item_labels);
  const ClusterAccuracy relabeled = cluster_accuracy(swapped, sbm.truth);
  CHECK(relabeled.chooser == doctest::Approx(base.chooser).epsilon(1e-12));
  CHECK(relabeled.item == doctest::Approx(base.item).epsilon(1e-12));

  // Perfect self-agreement, and a hand-built 3/4 partial agreement.
  const ClusterAccuracy self = cluster_accuracy(got, got);
  CHECK(self.chooser == 1.0);
  CHECK(self.item == 1.0);

  ClusterAssignment truth;
  truth.k = 2;
  truth.chooser_labels = {0, 0, 1, 1};
  truth.item_labels = {0, 1};
  ClusterAssignment pred = truth;
  pred.chooser_labels[3] = 0;  // one of four rows astray
  const ClusterAccuracy partial = cluster_accuracy(pred, truth);
  CHECK(partial.chooser == doctest::Approx(0.75));
  CHECK(partial.item == 1.0);
}

TEST_CASE("accuracy scoring validates its inputs") {
  ClusterAssignment a;
  a.k = 2;
  a.chooser_labels = {0, 1};
  a.item_labels = {0, 1};
  ClusterAssignment b = a;
  b.k = 3;
  CHECK_THROWS_AS(cluster_accuracy(a, b), DataError);
  b = a;
  b.chooser_labels.push_back(0);
  CHECK_THROWS_AS(cluster_accuracy(a, b), DataError);
  b = a;
  b.chooser_labels[0] = 5;
  CHECK_THROWS_AS(cluster_accuracy(b, a), DataError);
}

TEST_CASE("co-clustering is deterministic for a fixed seed") {
  const SbmSample sbm = generate_sbm(2, {60, 60}, {60, 60}, 0.8, 0.2, 5u);
  const ClusterAssignment first = spectral_cocluster(sbm.incidence, 2, 77u);
  const ClusterAssignment second = spectral_cocluster(sbm.incidence, 2, 77u);
  CHECK(first.chooser_labels == second.chooser_labels);
  CHECK(first.item_labels == second.item_labels);
}

TEST_CASE("co-clustering validates shape and degree") {
  const SbmSample sbm = generate_sbm(2, {10, 10}, {10, 10}, 0.9, 0.1, 3u);
  CHECK_THROWS_AS(spectral_cocluster(sbm.incidence, 1, 0u), DataError);
  CHECK_THROWS_AS(spectral_cocluster(sbm.incidence, 30, 0u), DataError);

  IncidenceMatrix zero_row = sbm.incidence;
  zero_row.r.row(4).setZero();
  CHECK_THROWS_AS(spectral_cocluster(zero_row, 2, 0u), DataError);
}

TEST_CASE("zero-degree columns are dropped, counted, and still labeled") {
  SbmSample sbm = generate_sbm(2, {60, 60}, {60, 60}, 0.9, 0.1, 9u);
  // Silence two items entirely; rows keep their other entries.
  sbm.incidence.r.col(3).setZero();
  sbm.incidence.r.col(70).setZero();
  int dropped = -1;
  const ClusterAssignment got = spectral_cocluster(sbm.incidence, 2, 9u, &dropped);
  CHECK(dropped == 2);
  REQUIRE(got.item_labels.size() == sbm.incidence.col_ids.size());
  CHECK(got.item_labels[3] >= 0);
  CHECK(got.item_labels[3] < 2);
  CHECK(got.item_labels[70] >= 0);
  CHECK(got.item_labels[70] < 2);

  // The untouched columns should still recover their planted types.
  int correct = 0, scored = 0;
  // Best permutation over the *kept* columns only.
  for (int flip = 0; flip < 2; ++flip) {
    int c = 0;
    for (std::size_t j = 0; j < got.item_labels.size(); ++j) {
      if (j == 3 || j == 70) continue;
      const int pred = flip ? 1 - got.item_labels[j] : got.item_labels[j];
      if (pred == sbm.truth.item_labels[j]) ++c;
    }
    correct = std::max(correct, c);
  }
  scored = static_cast<int>(got.item_labels.size()) - 2;
  CHECK(static_cast<double>(correct) / scored >= 0.99);
}

TEST_CASE("per-cluster fits add up and predict from the right component") {
  const ChoiceDataset data = helpers::random_dataset(6, 120, 0, 0, 21u);
  ClusterAssignment assign;
  assign.k = 2;
  assign.item_labels.assign(6, 0);
  std::mt19937_64 rng(4u);
  for (std::size_t o = 0; o < 120; ++o) {
    assign.chooser_labels.push_back(static_cast<int>(rng() % 2));
  }

  FitConfig cfg;
  const ModelSpec spec{};  // plain logit
  const ClusterFitOutcome outcome = cluster_fit(data, assign, spec, cfg);
  REQUIRE(outcome.fits.size() == 2);

  // Combined LL must equal the sum of fits run by hand on each subset.
  double manual = 0.0;
  for (int c = 0; c < 2; ++c) {
    std::vector<std::size_t> idx;
    for (std::size_t o = 0; o < 120; ++o) {
      if (assign.chooser_labels[o] == c) idx.push_back(o);
    }
    const ChoiceDataset part = subset(data, idx);
    const FitResult res = fit(spec, part, SampleWeights::uniform(part.n_observations()), cfg);
    manual += res.final_data_ll;
    CHECK(outcome.fits[static_cast<std::size_t>(c)].final_data_ll ==
          doctest::Approx(res.final_data_ll).epsilon(1e-12));
  }
  CHECK(outcome.combined_data_ll == doctest::Approx(manual).epsilon(1e-12));

  // Predictions come from the observation's own cluster model.
  for (std::size_t o : {std::size_t{0}, std::size_t{57}, std::size_t{119}}) {
    const int label = assign.chooser_labels[o];
    const Eigen::VectorXd via_cluster = cluster_predict_probabilities(outcome, assign, data, o);
    const Eigen::VectorXd direct =
        outcome.fits[static_cast<std::size_t>(label)].model.choice_probabilities(data, o);
    CHECK((via_cluster - direct).cwiseAbs().maxCoeff() == doctest::Approx(0.0).epsilon(1e-15));
  }
}

TEST_CASE("cluster_fit rejects degenerate assignments") {
  const ChoiceDataset data = helpers::random_dataset(4, 30, 0, 0, 8u);
  ClusterAssignment assign;
  assign.k = 2;
  assign.chooser_labels.assign(30, 0);  // cluster 1 empty
  assign.item_labels.assign(4, 0);
  CHECK_THROWS_AS(cluster_fit(data, assign, ModelSpec{}), DataError);

  assign.chooser_labels[0] = 7;  // out of range
  CHECK_THROWS_AS(cluster_fit(data, assign, ModelSpec{}), DataError);

  ClusterAssignment short_labels;
  short_labels.k = 2;
  short_labels.chooser_labels.assign(5, 0);
  CHECK_THROWS_AS(cluster_fit(data, short_labels, ModelSpec{}), DataError);
}

TEST_CASE("a cluster holding only singleton sets cannot be fitted") {
  std::vector<helpers::Row> rows;
  for (int i = 0; i < 6; ++i) rows.push_back({"u" + std::to_string(i), {"a", "b"}, "a"});
  rows.push_back({"lone", {"a"}, "a"});
  const ChoiceDataset data = helpers::make_dataset(rows);

  ClusterAssignment assign;
  assign.k = 2;
  assign.chooser_labels.assign(7, 0);
  assign.chooser_labels[6] = 1;  // the singleton-only cluster
  assign.item_labels.assign(2, 0);
  CHECK_THROWS_AS(cluster_fit(data, assign, ModelSpec{}), DataError);
}
