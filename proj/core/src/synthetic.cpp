#include "choicekit/synthetic.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <memory>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "choicekit/errors.hpp"
#include "choicekit/rng.hpp"

namespace choicekit {

namespace {

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

void check_world(const SyntheticWorld& world) {
  const int n = static_cast<int>(world.item_embeddings.rows());
  if (n < 2) throw DataError("synthetic world needs at least two items");
  if (world.item_embeddings.cols() != 2 || !world.item_embeddings.allFinite()) {
    throw DataError("synthetic world item embeddings must be a finite n x 2 matrix");
  }
  if (world.true_cdm.rows() != n || world.true_cdm.cols() != n ||
      !world.true_cdm.allFinite()) {
    throw DataError("synthetic world pull matrix must be a finite n x n matrix");
  }
  if (!(world.uniform_mix_prob >= 0.0 && world.uniform_mix_prob <= 1.0)) {
    throw DataError("synthetic world uniform_mix_prob must lie in [0, 1]");
  }
  if (!(world.confounding_strength >= 0.0)) {
    throw DataError("synthetic world confounding strength must be non-negative");
  }
  if (static_cast<int>(world.item_ids.size()) != n) {
    throw DataError("synthetic world item id list does not match embedding count");
  }
}

ChoiceDataset sample_world(const SyntheticWorld& world, int n_samples, std::uint64_t seed,
                           bool force_uniform, int* uniform_rejections,
                           int* logistic_rejections) {
  check_world(world);
  if (n_samples < 1) throw DataError("sample count must be positive");

  const int n = static_cast<int>(world.item_embeddings.rows());
  const double c = world.confounding_strength;
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);

  auto items_interner = std::make_shared<Interner>();
  for (const std::string& id : world.item_ids) items_interner->intern(id);
  auto choosers = std::make_shared<Interner>();

  std::vector<Observation> obs;
  obs.reserve(static_cast<std::size_t>(n_samples));
  Eigen::MatrixXd covariates(n_samples, 2);
  Eigen::VectorXd util(n);
  Eigen::VectorXd probs(n);
  int urej = 0;
  int lrej = 0;
  constexpr int kMaxRedraws = 1000000;

  for (int s = 0; s < n_samples; ++s) {
    const double phi = angle(rng);
    const Eigen::Vector2d x(std::cos(phi), std::sin(phi));
    covariates(s, 0) = x(0);
    covariates(s, 1) = x(1);

    const bool uniform_branch = force_uniform || unit(rng) < world.uniform_mix_prob;
    std::vector<int> set;
    int redraws = 0;
    while (true) {
      set.clear();
      for (int i = 0; i < n; ++i) {
        const double p_in =
            uniform_branch ? 0.5 : sigmoid(c * world.item_embeddings.row(i).dot(x));
        if (unit(rng) < p_in) set.push_back(i);
      }
      if (set.size() >= 2) break;
      (uniform_branch ? urej : lrej) += 1;
      if (++redraws > kMaxRedraws) {
        throw NumericError("set redraw budget exhausted while enforcing |C| >= 2");
      }
    }

    const int m = static_cast<int>(set.size());
    for (int t = 0; t < m; ++t) {
      const int i = set[static_cast<std::size_t>(t)];
      double u = world.item_embeddings.row(i).dot(x);
      for (int r = 0; r < m; ++r) {
        const int j = set[static_cast<std::size_t>(r)];
        if (j != i) u += world.true_cdm(i, j);
      }
      util(t) = u;
    }
    const double mx = util.head(m).maxCoeff();
    probs.head(m) = (util.head(m).array() - mx).exp();
    const int pick = sample_categorical(probs.head(m), rng);

    Observation o;
    o.chooser = choosers->intern("a" + std::to_string(s));
    o.items = set;
    o.chosen = set[static_cast<std::size_t>(pick)];
    obs.push_back(std::move(o));
  }

  if (uniform_rejections != nullptr) *uniform_rejections = urej;
  if (logistic_rejections != nullptr) *logistic_rejections = lrej;

  ChoiceDataset data(items_interner, choosers, std::move(obs));
  return data.with_chooser_covariates(std::move(covariates), {"x0", "x1"});
}

}  // namespace

SyntheticWorld make_confounded_world(int n_items, double c, std::uint64_t seed) {
  if (n_items < 2) throw DataError("confounded world needs at least two items");
  if (!(c >= 0.0)) throw DataError("confounding strength must be non-negative");

  SyntheticWorld world;
  world.confounding_strength = c;
  world.seed = seed;
  Rng rng = make_rng(derive_seed(seed, 0));
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> pull(-1.0, 1.0);

  world.item_embeddings.resize(n_items, 2);
  for (int i = 0; i < n_items; ++i) {
    const double phi = angle(rng);
    world.item_embeddings(i, 0) = std::cos(phi);
    world.item_embeddings(i, 1) = std::sin(phi);
    world.item_ids.push_back("i" + std::to_string(i));
  }
  world.true_cdm = Eigen::MatrixXd::Zero(n_items, n_items);
  for (int i = 0; i < n_items; ++i) {
    for (int j = 0; j < n_items; ++j) {
      if (i != j) world.true_cdm(i, j) = pull(rng);
    }
  }
  return world;
}

ChoiceDataset sample_confounded(const SyntheticWorld& world, int n_samples, std::uint64_t seed,
                                int* uniform_rejections, int* logistic_rejections) {
  return sample_world(world, n_samples, seed, false, uniform_rejections, logistic_rejections);
}

ChoiceDataset sample_uniform_sets(const SyntheticWorld& world, int n_samples, std::uint64_t seed,
                                  int* rejections) {
  return sample_world(world, n_samples, seed, true, rejections, nullptr);
}

std::pair<ChoiceDataset, SyntheticWorld> generate_confounded(int n_items, int n_samples,
                                                             double c, std::uint64_t seed) {
  SyntheticWorld world = make_confounded_world(n_items, c, seed);
  ChoiceDataset data = sample_confounded(world, n_samples, derive_seed(seed, 1));
  world.chooser_embeddings = data.chooser_covariates();
  return {std::move(data), std::move(world)};
}

namespace {

void check_oracle(const PopulationOracle& po) {
  const int n_types = static_cast<int>(po.types.size());
  const int n_sets = static_cast<int>(po.sets.size());
  if (n_types < 1) throw DataError("oracle needs at least one chooser type");
  if (static_cast<int>(po.type_weights.size()) != n_types ||
      static_cast<int>(po.set_probs.size()) != n_types ||
      static_cast<int>(po.choice_probs.size()) != n_types) {
    throw DataError("oracle per-type tables do not match the type count");
  }

  Rational total(0);
  for (const Rational& w : po.type_weights) {
    if (w < Rational(0)) throw DataError("oracle type weights must be non-negative");
    total += w;
  }
  if (total != Rational(1)) throw DataError("oracle type weights must sum to 1");

  for (int t = 0; t < n_types; ++t) {
    const auto& sp = po.set_probs[static_cast<std::size_t>(t)];
    const auto& cp = po.choice_probs[static_cast<std::size_t>(t)];
    if (static_cast<int>(sp.size()) != n_sets || static_cast<int>(cp.size()) != n_sets) {
      throw DataError("oracle tables do not match the set count");
    }
    Rational set_total(0);
    for (int s = 0; s < n_sets; ++s) {
      if (sp[static_cast<std::size_t>(s)] < Rational(0)) {
        throw DataError("oracle set probabilities must be non-negative");
      }
      set_total += sp[static_cast<std::size_t>(s)];
      const auto& set = po.sets[static_cast<std::size_t>(s)];
      if (set.empty() || !std::is_sorted(set.begin(), set.end()) ||
          std::adjacent_find(set.begin(), set.end()) != set.end() || set.front() < 0 ||
          set.back() >= static_cast<int>(po.items.size())) {
        throw DataError("oracle sets must be sorted distinct item indices");
      }
      const auto& row = cp[static_cast<std::size_t>(s)];
      if (row.size() != set.size()) {
        throw DataError("oracle choice row length does not match its set");
      }
      Rational choice_total(0);
      for (const Rational& p : row) {
        if (p < Rational(0)) throw DataError("oracle choice probabilities must be non-negative");
        choice_total += p;
      }
      if (choice_total != Rational(1)) {
        throw DataError("oracle choice probabilities must sum to 1");
      }
    }
    if (set_total != Rational(1)) {
      throw DataError("oracle set probabilities must sum to 1 per type");
    }
  }
}

int oracle_set_index(const PopulationOracle& po, const std::vector<std::string>& set) {
  std::vector<int> idx;
  idx.reserve(set.size());
  for (const std::string& name : set) {
    const auto it = std::find(po.items.begin(), po.items.end(), name);
    if (it == po.items.end()) throw DataError("oracle does not know item '" + name + "'");
    idx.push_back(static_cast<int>(it - po.items.begin()));
  }
  std::sort(idx.begin(), idx.end());
  if (std::adjacent_find(idx.begin(), idx.end()) != idx.end()) {
    throw DataError("query set contains a repeated item");
  }
  for (std::size_t s = 0; s < po.sets.size(); ++s) {
    if (po.sets[s] == idx) return static_cast<int>(s);
  }
  throw DataError("query set is not in the oracle's support");
}

Rational oracle_item_prob(const PopulationOracle& po, int type, int set_index,
                          const std::string& item) {
  const auto& set = po.sets[static_cast<std::size_t>(set_index)];
  const auto it = std::find(po.items.begin(), po.items.end(), item);
  if (it == po.items.end()) throw DataError("oracle does not know item '" + item + "'");
  const int idx = static_cast<int>(it - po.items.begin());
  const auto pos = std::find(set.begin(), set.end(), idx);
  if (pos == set.end()) return Rational(0);
  return po.choice_probs[static_cast<std::size_t>(type)][static_cast<std::size_t>(set_index)]
                        [static_cast<std::size_t>(pos - set.begin())];
}

}  // namespace

PopulationOracle pets_oracle() {
  PopulationOracle po;
  po.items = {"cat", "dog", "fish"};
  po.types = {"cat_person", "dog_person"};
  po.type_weights = {Rational(1, 4), Rational(3, 4)};
  po.sets = {{0, 1}, {0, 1, 2}};
  po.set_probs = {{Rational(3, 4), Rational(1, 4)},   // cat people mostly see {cat, dog}
                  {Rational(1, 4), Rational(3, 4)}};  // dog people mostly see the superset
  po.choice_probs = {
      {{Rational(3, 4), Rational(1, 4)}, {Rational(3, 4), Rational(1, 4), Rational(0)}},
      {{Rational(1, 4), Rational(3, 4)}, {Rational(1, 4), Rational(3, 4), Rational(0)}}};
  return po;
}

Rational observed_choice_prob_exact(const PopulationOracle& po, const std::string& item,
                                    const std::vector<std::string>& set) {
  check_oracle(po);
  const int s = oracle_set_index(po, set);
  Rational total(0);
  Rational num(0);
  for (std::size_t t = 0; t < po.types.size(); ++t) {
    const Rational joint = po.type_weights[t] * po.set_probs[t][static_cast<std::size_t>(s)];
    total += joint;
    num += joint * oracle_item_prob(po, static_cast<int>(t), s, item);
  }
  if (total == Rational(0)) {
    throw DataError("query set has zero assignment probability; conditional is undefined");
  }
  return num / total;
}

Rational aggregate_choice_prob_exact(const PopulationOracle& po, const std::string& item,
                                     const std::vector<std::string>& set) {
  check_oracle(po);
  const int s = oracle_set_index(po, set);
  Rational out(0);
  for (std::size_t t = 0; t < po.types.size(); ++t) {
    out += po.type_weights[t] * oracle_item_prob(po, static_cast<int>(t), s, item);
  }
  return out;
}

double observed_choice_prob(const PopulationOracle& po, const std::string& item,
                            const std::vector<std::string>& set) {
  return boost::rational_cast<double>(observed_choice_prob_exact(po, item, set));
}

double aggregate_choice_prob(const PopulationOracle& po, const std::string& item,
                             const std::vector<std::string>& set) {
  return boost::rational_cast<double>(aggregate_choice_prob_exact(po, item, set));
}

OracleSample sample_oracle(const PopulationOracle& po, int n_samples, std::uint64_t seed) {
  check_oracle(po);
  if (n_samples < 1) throw DataError("sample count must be positive");

  const int n_types = static_cast<int>(po.types.size());
  const int n_sets = static_cast<int>(po.sets.size());
  Eigen::VectorXd type_w(n_types);
  for (int t = 0; t < n_types; ++t) {
    type_w(t) = boost::rational_cast<double>(po.type_weights[static_cast<std::size_t>(t)]);
  }
  Eigen::MatrixXd set_w(n_types, n_sets);
  for (int t = 0; t < n_types; ++t) {
    for (int s = 0; s < n_sets; ++s) {
      set_w(t, s) = boost::rational_cast<double>(
          po.set_probs[static_cast<std::size_t>(t)][static_cast<std::size_t>(s)]);
    }
  }

  auto items_interner = std::make_shared<Interner>();
  for (const std::string& id : po.items) items_interner->intern(id);
  auto choosers = std::make_shared<Interner>();

  Rng rng = make_rng(seed);
  std::vector<Observation> obs;
  obs.reserve(static_cast<std::size_t>(n_samples));
  std::vector<int> chooser_types;
  std::vector<double> set_propensities;
  for (int s = 0; s < n_samples; ++s) {
    const int t = sample_categorical(type_w, rng);
    const int set_idx = sample_categorical(set_w.row(t).transpose(), rng);
    const auto& set = po.sets[static_cast<std::size_t>(set_idx)];
    const auto& row =
        po.choice_probs[static_cast<std::size_t>(t)][static_cast<std::size_t>(set_idx)];
    Eigen::VectorXd cw(static_cast<int>(row.size()));
    for (int i = 0; i < cw.size(); ++i) {
      cw(i) = boost::rational_cast<double>(row[static_cast<std::size_t>(i)]);
    }
    const int pick = sample_categorical(cw, rng);

    Observation o;
    o.chooser = choosers->intern("a" + std::to_string(s));
    o.items = set;
    o.chosen = set[static_cast<std::size_t>(pick)];
    obs.push_back(std::move(o));
    chooser_types.push_back(t);
    set_propensities.push_back(set_w(t, set_idx));
  }

  return OracleSample{ChoiceDataset(items_interner, choosers, std::move(obs)),
                      std::move(chooser_types), std::move(set_propensities)};
}

namespace {

Eigen::MatrixXd symmetric_sqrt(const Eigen::MatrixXd& m, const char* name) {
  if (m.rows() != m.cols() || !m.allFinite()) {
    throw DataError(std::string(name) + " must be a finite square matrix");
  }
  const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (!m.isApprox(m.transpose(), 1e-9)) {
    throw DataError(std::string(name) + " must be symmetric");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(m);
  Eigen::VectorXd vals = eig.eigenvalues();
  for (int i = 0; i < vals.size(); ++i) {
    if (vals(i) < -1e-9 * scale) {
      throw DataError(std::string(name) + " must be positive semidefinite");
    }
    vals(i) = std::sqrt(std::max(0.0, vals(i)));
  }
  return eig.eigenvectors() * vals.asDiagonal() * eig.eigenvectors().transpose();
}

}  // namespace

ChoiceDataset generate_gaussian_recommender(const Eigen::VectorXd& mu,
                                            const Eigen::MatrixXd& sigma0,
                                            const Eigen::MatrixXd& sigma, int k, int n_samples,
                                            std::uint64_t seed) {
  const int d = static_cast<int>(mu.size());
  if (d < 1 || !mu.allFinite()) throw DataError("mu must be a finite non-empty vector");
  if (sigma0.rows() != d || sigma.rows() != d) {
    throw DataError("covariance dimensions must match mu");
  }
  if (k < 2) throw DataError("set size k must be at least 2");
  if (n_samples < 1) throw DataError("sample count must be positive");

  const Eigen::MatrixXd l0 = symmetric_sqrt(sigma0, "sigma0");
  const Eigen::MatrixXd l = symmetric_sqrt(sigma, "sigma");

  auto items_interner = std::make_shared<Interner>();
  auto choosers = std::make_shared<Interner>();
  Rng rng = make_rng(seed);

  std::vector<Observation> obs;
  obs.reserve(static_cast<std::size_t>(n_samples));
  Eigen::MatrixXd features(static_cast<long>(n_samples) * k, d);
  Eigen::VectorXd util(k);
  Eigen::VectorXd probs(k);

  for (int s = 0; s < n_samples; ++s) {
    const Eigen::VectorXd x = mu + l0 * standard_normal_vector(d, rng);
    Observation o;
    o.chooser = choosers->intern("a" + std::to_string(s));
    o.items.reserve(static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) {
      const Eigen::VectorXd y = x + l * standard_normal_vector(d, rng);
      const int idx =
          items_interner->intern("s" + std::to_string(s) + "i" + std::to_string(j));
      features.row(idx) = y.transpose();
      o.items.push_back(idx);
      util(j) = x.dot(y);
    }
    const double mx = util.maxCoeff();
    probs = (util.array() - mx).exp();
    o.chosen = o.items[static_cast<std::size_t>(sample_categorical(probs, rng))];
    obs.push_back(std::move(o));
  }

  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(d));
  for (int j = 0; j < d; ++j) names.push_back("y" + std::to_string(j));
  ChoiceDataset data(items_interner, choosers, std::move(obs));
  return data.with_item_features(std::move(features), std::move(names));
}

}  // namespace choicekit
