#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "choicekit/dataset.hpp"
#include "choicekit/fit.hpp"
#include "choicekit/model.hpp"
#include "choicekit/synthetic.hpp"

namespace choicekit {

// Rank-based prediction quality in [0, 1]: per observation with |C| >= 2,
// the chosen item's relative position in the descending-probability ranking
// (1 = always ranked most likely; ties get mean ranks), averaged over
// observations.
double mean_relative_position(const ChoiceModel& m, const ChoiceDataset& ds);

struct LrtReport {
  double restricted_ll = 0.0;  // unregularized, uniform weights, on the given data
  double full_ll = 0.0;
  double statistic = 0.0;  // 2 * (full - restricted); may be slightly negative
  int df = 1;
  double p_value = 1.0;
};

// Likelihood-ratio test between two fits of nested families on ds. Allowed
// pairs: logit<MNL, logit<CDM, MNL<MCDM, CDM<MCDM, CL<CML, CL<LCL, CML<MLCL,
// LCL<MLCL, plus same-family pairs (df floored at 1). Log-likelihoods are
// recomputed raw (no penalty, uniform weights) at each fit's parameters.
LrtReport lrt(const FitResult& restricted, const FitResult& full, const ChoiceDataset& ds);

// One significant regularity violation: adding items to base_set raised the
// empirical choice probability of `item`.
struct RegularityFinding {
  std::vector<int> base_set;   // C, sorted item indices
  std::vector<int> super_set;  // C', a strict superset of C
  int item = -1;               // i in C with rising empirical probability
  long long base_count = 0;    // observations showing C
  long long base_chosen = 0;   // ... of which chose i
  long long super_count = 0;
  long long super_chosen = 0;
  double base_rate = 0.0;
  double super_rate = 0.0;
  double p_value = 1.0;
};

struct RegularityReport {
  std::vector<RegularityFinding> findings;  // p <= alpha, ascending p
  long long pairs_examined = 0;             // (C, C') pairs meeting min_count
  long long tests_performed = 0;            // Fisher tests run (rate increased)
  double alpha = 0.0;
  int min_count = 0;
};

// Scans observed subset/superset pairs whose counts both reach min_count;
// every in-subset item whose empirical choice probability rises in the
// superset gets a two-sided Fisher exact test, and findings with p <= alpha
// are reported. By default only pairs differing by exactly one item are
// examined; general_pairs widens the scan to all strict subset pairs.
RegularityReport detect_regularity_violations(const ChoiceDataset& ds, int min_count,
                                              double alpha, bool general_pairs = false);

struct BenchmarkRow {
  std::string method;  // family name, with "+ipw" when inverse-weighted
  std::string split;   // "confounded" or "counterfactual"
  double confounding = 0.0;
  double mean = 0.0;
  double std_error = 0.0;
  int trials = 0;
};

struct BenchmarkOptions {
  int n_confounded_test = 2500;
  int n_counterfactual_test = 2500;
  bool with_ipw = true;  // additionally fit every method with IPW weights
  // Quantile clip for the IPW weights (see ipw_weights). Unset = no clipping.
  // Inverse-propensity weights on strongly confounded sets are heavy-tailed
  // enough to drown the deconfounding signal in variance; clipping trades a
  // little bias back for a usable effective sample size.
  std::optional<double> ipw_clip_quantile;
  FitConfig fit;
};

// Counterfactual stress test: per trial, draws a confounded train set, a
// confounded test set, and a uniform-set test set from the world; fits each
// method on the train set (plain, and IPW-weighted via a per-item logistic
// propensity fitted on the same train set) and scores mean relative position
// on both test splits. Rows aggregate trials as mean and standard error.
std::vector<BenchmarkRow> counterfactual_benchmark(const SyntheticWorld& world,
                                                   const std::vector<ModelSpec>& methods,
                                                   int n_train, int n_trials,
                                                   std::uint64_t seed,
                                                   const BenchmarkOptions& options = {});

}  // namespace choicekit
