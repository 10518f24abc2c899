#pragma once

#include <Eigen/Core>
#include <boost/rational.hpp>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "choicekit/dataset.hpp"

namespace choicekit {

// Ground truth for the confounded-recommender world: items on the unit
// circle, a shared pull matrix, and logistic set formation whose strength
// couples sets to chooser position.
struct SyntheticWorld {
  Eigen::MatrixXd item_embeddings;     // n x 2, unit-norm rows
  Eigen::MatrixXd chooser_embeddings;  // one row per sample of the generating call
  Eigen::MatrixXd true_cdm;            // n x n pulls, zero diagonal
  double confounding_strength = 0.0;
  double uniform_mix_prob = 0.25;
  std::uint64_t seed = 0;
  std::vector<std::string> item_ids;
};

SyntheticWorld make_confounded_world(int n_items, double c, std::uint64_t seed);

// Draws fresh choosers on the unit circle. A set comes from the uniform
// branch (each item iid with probability 1/2) with probability
// world.uniform_mix_prob and otherwise includes item i with probability
// sigmoid(c * x_a . y_i); either branch is redrawn until |C| >= 2, with
// redraw counts reported. The choice follows the softmax of
// x_a . y_i + sum of pulls from the rest of the set. Chooser covariates
// are x_a; item embeddings stay out of the dataset.
ChoiceDataset sample_confounded(const SyntheticWorld& world, int n_samples,
                                std::uint64_t seed, int* uniform_rejections = nullptr,
                                int* logistic_rejections = nullptr);

// Counterfactual draw: the same chooser-and-choice process, but every set
// comes from the uniform branch, decoupling set formation from preferences.
ChoiceDataset sample_uniform_sets(const SyntheticWorld& world, int n_samples,
                                  std::uint64_t seed, int* rejections = nullptr);

// One-call generator: builds a world and samples n_samples observations,
// recording the sampled chooser embeddings in the returned world.
std::pair<ChoiceDataset, SyntheticWorld> generate_confounded(int n_items, int n_samples,
                                                             double c, std::uint64_t seed);

using Rational = boost::rational<long long>;

// Finite mixture of chooser types with per-type set-assignment and choice
// tables; probabilities are kept rational so small worked examples stay
// exact.
struct PopulationOracle {
  std::vector<std::string> items;
  std::vector<std::string> types;
  std::vector<Rational> type_weights;                            // Pr(a)
  std::vector<std::vector<int>> sets;                            // sorted item indices
  std::vector<std::vector<Rational>> set_probs;                  // [type][set] = Pr(C|a)
  std::vector<std::vector<std::vector<Rational>>> choice_probs;  // [type][set][pos]
};

// Two pet-shop chooser types whose set assignment and preferences are both
// tied to type: marginal choice frequencies shift across supersets even
// though no individual's preferences change.
PopulationOracle pets_oracle();

// Pr(i | C): choice probability of the mixed population among choosers who
// were shown C, i.e. type weights Pr(a | C) by Bayes over set assignment.
Rational observed_choice_prob_exact(const PopulationOracle& po, const std::string& item,
                                    const std::vector<std::string>& set);
// E_a[Pr(i | a, C)]: what the population would choose if everyone saw C.
Rational aggregate_choice_prob_exact(const PopulationOracle& po, const std::string& item,
                                     const std::vector<std::string>& set);
double observed_choice_prob(const PopulationOracle& po, const std::string& item,
                            const std::vector<std::string>& set);
double aggregate_choice_prob(const PopulationOracle& po, const std::string& item,
                             const std::vector<std::string>& set);

// Simulated draws from an oracle, keeping each observation's latent type and
// true set propensity Pr(C | a) — the quantities inverse weighting needs.
struct OracleSample {
  ChoiceDataset data;
  std::vector<int> chooser_types;
  std::vector<double> set_propensities;
};

OracleSample sample_oracle(const PopulationOracle& po, int n_samples, std::uint64_t seed);

// Gaussian recommender world: choosers x_a ~ N(mu, sigma0), each
// observation's k items drawn N(x_a, sigma) with their coordinates as
// feature rows (items are sample-specific), choice from softmax of x_a . y.
ChoiceDataset generate_gaussian_recommender(const Eigen::VectorXd& mu,
                                            const Eigen::MatrixXd& sigma0,
                                            const Eigen::MatrixXd& sigma, int k,
                                            int n_samples, std::uint64_t seed);

}  // namespace choicekit
