#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <functional>
#include <vector>

#include "choicekit/dataset.hpp"
#include "choicekit/model.hpp"
#include "choicekit/weights.hpp"

namespace choicekit {

// Full-batch resilient propagation without weight backtracking, with the
// sign-change step zeroed (the variant PyTorch ships): on a gradient sign
// flip the step size shrinks, no move is made, and the stored gradient is
// cleared for the next epoch.
struct RpropConfig {
  double eta_plus = 1.2;
  double eta_minus = 0.5;
  double delta0 = 0.1;
  double delta_max = 50.0;
  double delta_min = 1e-6;
};

struct FitConfig {
  int max_epochs = 500;
  double grad_sq_tol = 1e-8;    // stop when ||grad||^2 drops below this
  double l2_lambda = 1e-4;      // objective is weighted LL - lambda * ||params||^2
  bool normalize_weights = true;  // rescale weights to mean 1 before fitting
  std::uint64_t seed = 0;       // consumed by randomized fits (EM init)
  RpropConfig rprop{};
};

struct EmConfig {
  int max_iters = 200;
  double ll_tol = 1e-6;           // stop when the LL gain falls below this
  double timeout_seconds = 3600.0;
};

// objective_trace[e] is the objective at the parameters entering epoch e
// (entry 0 = the zero initialization); the last entry is the objective at
// the returned parameters, so final_objective == objective_trace.back().
// For the Rprop path the objective is the l2-regularized weighted LL; for
// the EM path it is the mixture data log-likelihood per EM iteration (the
// l2 penalty applies inside the per-component refits).
struct FitResult {
  ChoiceModel model;
  std::vector<double> objective_trace;
  double final_objective = 0.0;
  double final_data_ll = 0.0;  // unpenalized weighted LL at the final params
  int epochs = 0;
  bool converged = false;
  double grad_norm_sq = 0.0;
};

// Deterministic maximum-likelihood fit from all-zero initialization.
// mixed_logit is fit by EM and must go through fit_mixed_logit.
FitResult fit(const ModelSpec& spec, const ChoiceDataset& data,
              const SampleWeights& weights, const FitConfig& config = {});

// EM for the discrete mixed logit: responsibilities seeded Dirichlet(1,..,1)
// from config.seed, closed-form mixture-weight updates, warm-started Rprop
// component refits (persistent step state). If an iteration ever lowers the
// data LL (possible: penalized, finitely-optimized M-steps), the previous
// iterate is restored and the fit stops, so the reported trace is
// non-decreasing. Errors if components < 1 or components > |observations|.
FitResult fit_mixed_logit(int components, const ChoiceDataset& data,
                          const FitConfig& config = {}, const EmConfig& em = {});

// Reusable optimizer core. Maximizes f (which writes the gradient through
// its second argument) from x0. `state` persists step sizes across calls
// when warm-starting; pass null for a fresh run.
struct RpropState {
  Eigen::VectorXd step;
  Eigen::VectorXd prev_grad;
  bool initialized = false;
};

struct RpropOutcome {
  Eigen::VectorXd x;
  std::vector<double> trace;
  int epochs = 0;
  bool converged = false;
  double grad_norm_sq = 0.0;
};

RpropOutcome rprop_maximize(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& f,
    Eigen::VectorXd x0, int max_epochs, double grad_sq_tol,
    const RpropConfig& config = {}, RpropState* state = nullptr);

}  // namespace choicekit
