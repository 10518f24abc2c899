#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "choicekit/dataset.hpp"
#include "choicekit/fit.hpp"

namespace choicekit {

// 0/1 choice-set incidence: one row per observation's set, one column per
// item. Stored dense (desk scale), with id maps for both sides.
struct IncidenceMatrix {
  Eigen::MatrixXd r;  // m x n, entries in {0, 1}
  std::vector<std::string> row_ids;
  std::vector<std::string> col_ids;
};

IncidenceMatrix build_incidence(const ChoiceDataset& data);

struct ClusterAssignment {
  std::vector<int> chooser_labels;  // one per incidence row, in [0, k)
  std::vector<int> item_labels;     // one per incidence column, in [0, k)
  int k = 0;
};

// Bipartite spectral co-clustering: normalize A_n = D1^{-1/2} R D2^{-1/2},
// take singular vector pairs 2..ceil(log2 k)+1, rescale each side by its
// D^{-1/2}, stack, and k-means (k-means++ with 10 restarts under `seed`).
// Requires 2 <= k <= min(m, n) and no zero rows. Zero-degree columns are
// dropped from the decomposition and assigned to the cluster nearest the
// origin after the fact; their count is written to *dropped_columns (pass
// null to ignore) so callers can warn. Deterministic for a fixed seed.
ClusterAssignment spectral_cocluster(const IncidenceMatrix& incidence, int k,
                                     std::uint64_t seed,
                                     int* dropped_columns = nullptr);

// Planted bipartite block model: same-type chooser/item pairs connect with
// probability p, others with q (0 <= q <= p <= 1; equality gives the
// signal-free null). Rows are resampled until non-empty; the count of
// resamples is reported.
struct SbmSample {
  IncidenceMatrix incidence;
  ClusterAssignment truth;
  int resample_count = 0;
};

SbmSample generate_sbm(int k, const std::vector<int>& choosers_per_type,
                       const std::vector<int>& items_per_type, double p, double q,
                       std::uint64_t seed);

// Fits one model per cluster on that cluster's observations (uniform
// weights); errors if any cluster has no observations. combined_data_ll is
// the sum of per-cluster unpenalized data log-likelihoods.
struct ClusterFitOutcome {
  std::vector<FitResult> fits;  // indexed by cluster label
  double combined_data_ll = 0.0;
};

ClusterFitOutcome cluster_fit(const ChoiceDataset& data,
                              const ClusterAssignment& assignment, const ModelSpec& spec,
                              const FitConfig& config = {});

// Predicts with the model of the observation's cluster.
Eigen::VectorXd cluster_predict_probabilities(const ClusterFitOutcome& outcome,
                                              const ClusterAssignment& assignment,
                                              const ChoiceDataset& data,
                                              std::size_t obs_index);

// Fraction of correct labels under the single permutation of cluster ids
// that maximizes total (chooser + item) agreement; exact assignment via
// bitmask DP (k <= 20).
struct ClusterAccuracy {
  double chooser = 0.0;
  double item = 0.0;
};

ClusterAccuracy cluster_accuracy(const ClusterAssignment& predicted,
                                 const ClusterAssignment& truth);

}  // namespace choicekit
