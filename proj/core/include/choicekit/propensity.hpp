#pragma once

#include <Eigen/Core>
#include <optional>
#include <variant>
#include <vector>

#include "choicekit/dataset.hpp"
#include "choicekit/fit.hpp"
#include "choicekit/model.hpp"
#include "choicekit/weights.hpp"

namespace choicekit {

// Floor applied to estimated set propensities when inverting them, keeping
// importance weights finite.
inline constexpr double kPropensityFloor = 1e-12;

// Independent per-item inclusion model: item i enters the choice set of a
// chooser with covariates x with probability sigma(coefficients_i . x +
// intercept_i). Set propensity is the full product over included and
// excluded items, evaluated in log space.
struct PerItemLogistic {
  Eigen::MatrixXd coefficients;  // n_items x d_x
  Eigen::VectorXd intercepts;    // n_items

  double inclusion_probability(int item, const Eigen::VectorXd& x) const;
  double log_set_propensity(const Eigen::VectorXd& x, const std::vector<int>& set) const;
  // exp(log_set_propensity), floored at kPropensityFloor.
  double set_propensity(const Eigen::VectorXd& x, const std::vector<int>& set) const;
};

// One penalized logistic regression per item (labels: set membership),
// trained with the same Rprop protocol as the choice models. Requires
// chooser covariates and that every item appears in at least one set.
PerItemLogistic fit_item_logistic(const ChoiceDataset& data, const FitConfig& config = {});

// Mean-set-vector model y_C ~ N(W x + z, Sigma), the closed-form MLE of the
// least-squares problem on (x_a, y_C) pairs. Identifiable iff the centered
// covariate second-moment matrix has full rank (d_x + 1 affinely independent
// chooser rows); DataError otherwise.
struct AffineGaussian {
  Eigen::MatrixXd w;      // d_y x d_x
  Eigen::VectorXd z;      // d_y
  Eigen::MatrixXd sigma;  // d_y x d_y, positive semi-definite

  // Gaussian density of y at mean W x + z. A singular Sigma gets a ridge of
  // 1e-9 * max(1, trace/d) before factorization.
  double density(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const;
};

AffineGaussian fit_affine_gaussian(const ChoiceDataset& data);

// Density of an observation's mean set feature vector under the model;
// requires item features on the dataset.
double gaussian_propensity(const AffineGaussian& model, const ChoiceDataset& data,
                           std::size_t obs_index);

using PropensityModel = std::variant<PerItemLogistic, AffineGaussian>;

// Estimated propensity of the observation's realized choice set (logistic:
// product form; Gaussian: density of y_C).
double set_propensity(const PropensityModel& model, const ChoiceDataset& data,
                      std::size_t obs_index);

// Inverse propensity weights w_o = 1 / (|distinct sets| * propensity_o),
// propensities floored at kPropensityFloor. Optional clipping at an upper
// empirical quantile (nearest-rank) of the raw weights. Mean-normalized by
// default; raw = true keeps the inverse scale.
SampleWeights ipw_weights(const PropensityModel& model, const ChoiceDataset& data,
                          std::optional<double> clip_quantile = std::nullopt,
                          bool raw = false);

// Size-calibrated weighted log-likelihood: the weighted mean of log
// Pr(chosen | C) over non-singleton observations, scaled by their count, so
// values are comparable to an unweighted LL on the same data. Errors if the
// weights of non-singleton observations sum to zero.
double normalized_ipw_loglik(const ChoiceModel& model, const ChoiceDataset& data,
                             const SampleWeights& weights);

// Covariate-adjusted family fitted with inverse propensity weights: consistent
// if either the outcome model or the propensity model is right. Families
// without covariates are rejected.
FitResult fit_doubly_robust(const ModelSpec& spec, const ChoiceDataset& data,
                            const PropensityModel& propensity,
                            const FitConfig& config = {});

}  // namespace choicekit
