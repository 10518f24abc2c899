#include "choicekit/clustering.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "choicekit/errors.hpp"
#include "choicekit/rng.hpp"

namespace choicekit {

namespace {

struct KMeansResult {
  std::vector<int> labels;
  Eigen::MatrixXd centroids;  // k x d
  double inertia = std::numeric_limits<double>::infinity();
};

// Squared distance of every point to its nearest centroid among the first
// `used` centroids.
void min_dist2(const Eigen::MatrixXd& points, const Eigen::MatrixXd& centroids, int used,
               Eigen::VectorXd& out) {
  const int n = static_cast<int>(points.rows());
  for (int i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (int c = 0; c < used; ++c) {
      const double d = (points.row(i) - centroids.row(c)).squaredNorm();
      if (d < best) best = d;
    }
    out(i) = best;
  }
}

KMeansResult kmeans_once(const Eigen::MatrixXd& points, int k, Rng& rng) {
  const int n = static_cast<int>(points.rows());
  const int d = static_cast<int>(points.cols());
  KMeansResult res;
  res.centroids.resize(k, d);

  // k-means++ seeding.
  std::uniform_int_distribution<int> uni(0, n - 1);
  res.centroids.row(0) = points.row(uni(rng));
  Eigen::VectorXd dist2 = Eigen::VectorXd::Zero(n);
  for (int c = 1; c < k; ++c) {
    min_dist2(points, res.centroids, c, dist2);
    int pick;
    if (dist2.sum() > 0.0) {
      pick = sample_categorical(dist2, rng);
    } else {
      pick = uni(rng);  // all remaining points coincide with a centroid
    }
    res.centroids.row(c) = points.row(pick);
  }

  res.labels.assign(static_cast<std::size_t>(n), 0);
  std::vector<int> counts(static_cast<std::size_t>(k), 0);
  constexpr int kMaxIters = 100;
  for (int iter = 0; iter < kMaxIters; ++iter) {
    bool changed = false;
    std::fill(counts.begin(), counts.end(), 0);
    for (int i = 0; i < n; ++i) {
      int best = 0;
      double bd = (points.row(i) - res.centroids.row(0)).squaredNorm();
      for (int c = 1; c < k; ++c) {
        const double dd = (points.row(i) - res.centroids.row(c)).squaredNorm();
        if (dd < bd) {
          bd = dd;
          best = c;
        }
      }
      if (res.labels[static_cast<std::size_t>(i)] != best) {
        res.labels[static_cast<std::size_t>(i)] = best;
        changed = true;
      }
      ++counts[static_cast<std::size_t>(best)];
    }

    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(k, d);
    for (int i = 0; i < n; ++i) sums.row(res.labels[static_cast<std::size_t>(i)]) += points.row(i);
    for (int c = 0; c < k; ++c) {
      if (counts[static_cast<std::size_t>(c)] > 0) {
        res.centroids.row(c) = sums.row(c) / counts[static_cast<std::size_t>(c)];
      } else {
        // Revive an empty cluster at the point farthest from its centroid.
        for (int i = 0; i < n; ++i) {
          dist2(i) = (points.row(i) -
                      res.centroids.row(res.labels[static_cast<std::size_t>(i)]))
                         .squaredNorm();
        }
        int far = 0;
        dist2.maxCoeff(&far);
        res.centroids.row(c) = points.row(far);
        changed = true;
      }
    }
    if (!changed && iter > 0) break;
  }

  res.inertia = 0.0;
  for (int i = 0; i < n; ++i) {
    res.inertia += (points.row(i) - res.centroids.row(res.labels[static_cast<std::size_t>(i)]))
                       .squaredNorm();
  }
  return res;
}

KMeansResult kmeans(const Eigen::MatrixXd& points, int k, Rng& rng, int restarts = 10) {
  KMeansResult best;
  for (int r = 0; r < restarts; ++r) {
    KMeansResult cur = kmeans_once(points, k, rng);
    if (cur.inertia < best.inertia) best = std::move(cur);
  }
  return best;
}

int embedding_dim(int k) {
  int l = 0;
  while ((1 << l) < k) ++l;
  return l;  // ceil(log2 k); >= 1 for k >= 2
}

}  // namespace

IncidenceMatrix build_incidence(const ChoiceDataset& data) {
  IncidenceMatrix inc;
  const int m = static_cast<int>(data.n_observations());
  const int n = static_cast<int>(data.n_items());
  inc.r = Eigen::MatrixXd::Zero(m, n);
  inc.row_ids.reserve(static_cast<std::size_t>(m));
  for (int o = 0; o < m; ++o) {
    inc.row_ids.push_back(std::to_string(o));
    for (int item : data.observation(static_cast<std::size_t>(o)).items) inc.r(o, item) = 1.0;
  }
  inc.col_ids = data.items().names();
  return inc;
}

ClusterAssignment spectral_cocluster(const IncidenceMatrix& incidence, int k,
                                     std::uint64_t seed, int* dropped_columns) {
  const int m = static_cast<int>(incidence.r.rows());
  const int n = static_cast<int>(incidence.r.cols());
  if (k < 2) throw DataError("spectral_cocluster: k must be at least 2");
  if (k > std::min(m, n)) {
    throw DataError("spectral_cocluster: k exceeds min(rows, columns) = " +
                    std::to_string(std::min(m, n)));
  }
  if (!incidence.r.allFinite() || (incidence.r.array() < 0.0).any()) {
    throw DataError("spectral_cocluster: incidence entries must be finite and non-negative");
  }

  const Eigen::VectorXd row_deg = incidence.r.rowwise().sum();
  for (int i = 0; i < m; ++i) {
    if (row_deg(i) <= 0.0) {
      throw DataError("spectral_cocluster: row " + std::to_string(i) + " has zero degree");
    }
  }

  // Zero-degree columns carry no signal; exclude them from the decomposition.
  std::vector<int> kept;
  kept.reserve(static_cast<std::size_t>(n));
  const Eigen::VectorXd col_deg_full = incidence.r.colwise().sum().transpose();
  for (int j = 0; j < n; ++j) {
    if (col_deg_full(j) > 0.0) kept.push_back(j);
  }
  const int nk = static_cast<int>(kept.size());
  if (dropped_columns != nullptr) *dropped_columns = n - nk;

  const int l = embedding_dim(k);
  if (l + 1 > std::min(m, nk)) {
    throw DataError("spectral_cocluster: too few non-empty columns for k = " +
                    std::to_string(k));
  }

  Eigen::MatrixXd r_kept(m, nk);
  Eigen::VectorXd col_deg(nk);
  for (int j = 0; j < nk; ++j) {
    r_kept.col(j) = incidence.r.col(kept[static_cast<std::size_t>(j)]);
    col_deg(j) = col_deg_full(kept[static_cast<std::size_t>(j)]);
  }

  const Eigen::VectorXd d1 = row_deg.array().rsqrt().matrix();
  const Eigen::VectorXd d2 = col_deg.array().rsqrt().matrix();
  const Eigen::MatrixXd an = d1.asDiagonal() * r_kept * d2.asDiagonal();

  Eigen::BDCSVD<Eigen::MatrixXd> svd(an, Eigen::ComputeThinU | Eigen::ComputeThinV);
  // Discard the leading singular pair (the degree-driven trivial direction)
  // and keep the next l; rescale back by D^{-1/2} on each side.
  Eigen::MatrixXd z(m + nk, l);
  z.topRows(m) = d1.asDiagonal() * svd.matrixU().middleCols(1, l);
  z.bottomRows(nk) = d2.asDiagonal() * svd.matrixV().middleCols(1, l);

  Rng rng = make_rng(seed);
  const KMeansResult km = kmeans(z, k, rng);

  ClusterAssignment out;
  out.k = k;
  out.chooser_labels.assign(km.labels.begin(), km.labels.begin() + m);
  out.item_labels.assign(static_cast<std::size_t>(n), -1);
  for (int j = 0; j < nk; ++j) {
    out.item_labels[static_cast<std::size_t>(kept[static_cast<std::size_t>(j)])] =
        km.labels[static_cast<std::size_t>(m + j)];
  }
  if (nk < n) {
    // A dropped column has an all-zero embedding; hand it to the centroid
    // nearest the origin.
    int nearest = 0;
    double bd = km.centroids.row(0).squaredNorm();
    for (int c = 1; c < k; ++c) {
      const double dd = km.centroids.row(c).squaredNorm();
      if (dd < bd) {
        bd = dd;
        nearest = c;
      }
    }
    for (int j = 0; j < n; ++j) {
      if (out.item_labels[static_cast<std::size_t>(j)] < 0) {
        out.item_labels[static_cast<std::size_t>(j)] = nearest;
      }
    }
  }
  return out;
}

SbmSample generate_sbm(int k, const std::vector<int>& choosers_per_type,
                       const std::vector<int>& items_per_type, double p, double q,
                       std::uint64_t seed) {
  if (k < 1) throw DataError("generate_sbm: k must be positive");
  if (static_cast<int>(choosers_per_type.size()) != k ||
      static_cast<int>(items_per_type.size()) != k) {
    throw DataError("generate_sbm: per-type size lists must have length k");
  }
  for (int v : choosers_per_type) {
    if (v < 1) throw DataError("generate_sbm: chooser counts must be positive");
  }
  for (int v : items_per_type) {
    if (v < 1) throw DataError("generate_sbm: item counts must be positive");
  }
  if (!(p >= 0.0 && p <= 1.0 && q >= 0.0 && q <= p)) {
    throw DataError("generate_sbm: need 0 <= q <= p <= 1");
  }

  int m = 0;
  int n = 0;
  std::vector<int> row_type;
  std::vector<int> col_type;
  for (int t = 0; t < k; ++t) {
    for (int i = 0; i < choosers_per_type[static_cast<std::size_t>(t)]; ++i) row_type.push_back(t);
    for (int i = 0; i < items_per_type[static_cast<std::size_t>(t)]; ++i) col_type.push_back(t);
  }
  m = static_cast<int>(row_type.size());
  n = static_cast<int>(col_type.size());
  if (p == 0.0) throw DataError("generate_sbm: p = 0 cannot produce non-empty rows");

  SbmSample sample;
  sample.incidence.r = Eigen::MatrixXd::Zero(m, n);
  for (int i = 0; i < m; ++i) sample.incidence.row_ids.push_back("c" + std::to_string(i));
  for (int j = 0; j < n; ++j) sample.incidence.col_ids.push_back("i" + std::to_string(j));

  Rng rng = make_rng(seed);
  std::bernoulli_distribution same(p);
  std::bernoulli_distribution cross(q);
  constexpr int kMaxResamples = 1000000;
  for (int i = 0; i < m; ++i) {
    while (true) {
      double row_sum = 0.0;
      for (int j = 0; j < n; ++j) {
        const bool on = row_type[static_cast<std::size_t>(i)] ==
                                col_type[static_cast<std::size_t>(j)]
                            ? same(rng)
                            : cross(rng);
        sample.incidence.r(i, j) = on ? 1.0 : 0.0;
        row_sum += sample.incidence.r(i, j);
      }
      if (row_sum > 0.0) break;
      if (++sample.resample_count > kMaxResamples) {
        throw NumericError("generate_sbm: row resampling budget exhausted");
      }
    }
  }

  sample.truth.k = k;
  sample.truth.chooser_labels = std::move(row_type);
  sample.truth.item_labels = std::move(col_type);
  return sample;
}

ClusterFitOutcome cluster_fit(const ChoiceDataset& data, const ClusterAssignment& assignment,
                              const ModelSpec& spec, const FitConfig& config) {
  const std::size_t m = data.n_observations();
  if (assignment.chooser_labels.size() != m) {
    throw DataError("cluster_fit: assignment has " +
                    std::to_string(assignment.chooser_labels.size()) + " row labels for " +
                    std::to_string(m) + " observations");
  }
  const int k = assignment.k;
  if (k < 1) throw DataError("cluster_fit: assignment has no clusters");

  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(k));
  for (std::size_t o = 0; o < m; ++o) {
    const int c = assignment.chooser_labels[o];
    if (c < 0 || c >= k) {
      throw DataError("cluster_fit: row label out of range at observation " + std::to_string(o));
    }
    members[static_cast<std::size_t>(c)].push_back(o);
  }

  ClusterFitOutcome outcome;
  outcome.fits.reserve(static_cast<std::size_t>(k));
  for (int c = 0; c < k; ++c) {
    const auto& idx = members[static_cast<std::size_t>(c)];
    if (idx.empty()) {
      throw DataError("cluster_fit: cluster " + std::to_string(c) + " has no observations");
    }
    bool has_real_choice = false;
    for (std::size_t o : idx) {
      if (data.observation(o).items.size() >= 2) {
        has_real_choice = true;
        break;
      }
    }
    if (!has_real_choice) {
      throw DataError("cluster_fit: cluster " + std::to_string(c) +
                      " contains only singleton choice sets");
    }
    ChoiceDataset part = subset(data, idx);
    FitResult res = fit(spec, part, SampleWeights::uniform(part.n_observations()), config);
    outcome.combined_data_ll += res.final_data_ll;
    outcome.fits.push_back(std::move(res));
  }
  return outcome;
}

Eigen::VectorXd cluster_predict_probabilities(const ClusterFitOutcome& outcome,
                                              const ClusterAssignment& assignment,
                                              const ChoiceDataset& data, std::size_t obs_index) {
  if (obs_index >= data.n_observations()) {
    throw DataError("cluster_predict_probabilities: observation index out of range");
  }
  if (assignment.chooser_labels.size() != data.n_observations()) {
    throw DataError("cluster_predict_probabilities: assignment does not match dataset");
  }
  const int c = assignment.chooser_labels[obs_index];
  if (c < 0 || c >= static_cast<int>(outcome.fits.size())) {
    throw DataError("cluster_predict_probabilities: row label out of range");
  }
  return outcome.fits[static_cast<std::size_t>(c)].model.choice_probabilities(data, obs_index);
}

namespace {

// Exact maximum-agreement bijection between predicted and true labels via
// bitmask DP over the k x k score matrix.
std::vector<int> best_permutation(const Eigen::MatrixXd& score, int k) {
  const std::size_t n_masks = std::size_t{1} << k;
  std::vector<double> dp(n_masks, -std::numeric_limits<double>::infinity());
  std::vector<int> choice(n_masks, -1);
  dp[0] = 0.0;
  for (std::size_t mask = 0; mask < n_masks; ++mask) {
    if (!std::isfinite(dp[mask])) continue;
    const int row = __builtin_popcountll(mask);
    if (row == k) continue;
    for (int t = 0; t < k; ++t) {
      if (mask & (std::size_t{1} << t)) continue;
      const std::size_t next = mask | (std::size_t{1} << t);
      const double val = dp[mask] + score(row, t);
      if (val > dp[next]) {
        dp[next] = val;
        choice[next] = t;
      }
    }
  }
  std::vector<int> perm(static_cast<std::size_t>(k), -1);
  std::size_t mask = n_masks - 1;
  for (int row = k - 1; row >= 0; --row) {
    const int t = choice[mask];
    perm[static_cast<std::size_t>(row)] = t;
    mask &= ~(std::size_t{1} << t);
  }
  return perm;
}

}  // namespace

ClusterAccuracy cluster_accuracy(const ClusterAssignment& predicted,
                                 const ClusterAssignment& truth) {
  const int k = truth.k;
  if (predicted.k != k) throw DataError("cluster_accuracy: cluster counts differ");
  if (k < 1 || k > 20) throw DataError("cluster_accuracy: k must be in [1, 20]");
  if (predicted.chooser_labels.size() != truth.chooser_labels.size() ||
      predicted.item_labels.size() != truth.item_labels.size()) {
    throw DataError("cluster_accuracy: label vectors have mismatched lengths");
  }

  Eigen::MatrixXd chooser_conf = Eigen::MatrixXd::Zero(k, k);
  Eigen::MatrixXd item_conf = Eigen::MatrixXd::Zero(k, k);
  auto tally = [k](const std::vector<int>& pred, const std::vector<int>& tru,
                   Eigen::MatrixXd& conf) {
    for (std::size_t i = 0; i < pred.size(); ++i) {
      if (pred[i] < 0 || pred[i] >= k || tru[i] < 0 || tru[i] >= k) {
        throw DataError("cluster_accuracy: label out of range");
      }
      conf(pred[i], tru[i]) += 1.0;
    }
  };
  tally(predicted.chooser_labels, truth.chooser_labels, chooser_conf);
  tally(predicted.item_labels, truth.item_labels, item_conf);

  // One shared relabeling must serve both sides: co-clustering ties chooser
  // and item clusters together, so score the permutation on the sum.
  const std::vector<int> perm = best_permutation(chooser_conf + item_conf, k);

  ClusterAccuracy acc;
  double hits = 0.0;
  for (int c = 0; c < k; ++c) hits += chooser_conf(c, perm[static_cast<std::size_t>(c)]);
  if (!predicted.chooser_labels.empty()) {
    acc.chooser = hits / static_cast<double>(predicted.chooser_labels.size());
  }
  hits = 0.0;
  for (int c = 0; c < k; ++c) hits += item_conf(c, perm[static_cast<std::size_t>(c)]);
  if (!predicted.item_labels.empty()) {
    acc.item = hits / static_cast<double>(predicted.item_labels.size());
  }
  return acc;
}

}  // namespace choicekit
