#pragma once

#include <Eigen/Core>
#include <string>
#include <string_view>
#include <vector>

#include "choicekit/dataset.hpp"
#include "choicekit/weights.hpp"

namespace choicekit {

// Conditional choice-system families. Utilities for chooser a facing set C:
//   logit        u_i
//   mnl          u_i + x_a . gamma_i            (per-chooser covariates x_a)
//   cl           y_i . theta                     (item features y_i)
//   cml          y_i . (theta + B x_a)
//   cdm          sum_{j in C \ i} p_ij           (+ p_ii when self_pulls)
//   mcdm         cdm utility + x_a . gamma_i
//   lcl          y_i . (theta + A y_C)           (y_C = mean feature vec of C)
//   mlcl         y_i . (theta + A y_C + B x_a)
//   mixed_logit  Pr(i | C) = sum_k pi_k softmax_k(i | C)   (K latent classes)
enum class Family { logit, mnl, cl, cml, cdm, mcdm, lcl, mlcl, mixed_logit };

std::string_view family_name(Family family);
Family family_from_name(std::string_view name);  // DataError on unknown name

// Structural choices that shape the parameter vector.
struct ModelSpec {
  Family family = Family::logit;
  bool self_pulls = false;       // cdm/mcdm: keep the diagonal of P
  bool item_intercepts = true;   // mnl: include per-item u (drop for the
                                 // set-indicator encoding of context effects)
  int mixture_components = 1;    // mixed_logit only
};

// A fitted or hand-constructed choice system. Parameters live in one flat
// vector; the layout per family (gradients use the same order) is:
//   logit        [u_0..u_{n-1}]
//   mnl          [u (if item_intercepts)] [Gamma row-major, n x d_x]
//   cl           [theta_0..theta_{d_y-1}]
//   cml          [theta] [B row-major, d_y x d_x]
//   cdm          self_pulls: [P row-major, n x n]
//                otherwise:  row-major P with the diagonal removed,
//                            n*(n-1) entries (row i lists p_ij, j != i)
//   mcdm         [cdm block] [Gamma row-major, n x d_x]
//   lcl          [theta] [A row-major, d_y x d_y]
//   mlcl         [theta] [A row-major] [B row-major, d_y x d_x]
//   mixed_logit  [pi_0..pi_{K-1}] [U row-major, K x n]
class ChoiceModel {
 public:
  static ChoiceModel logit(Eigen::VectorXd u);
  static ChoiceModel mnl(Eigen::VectorXd u, Eigen::MatrixXd gamma);
  static ChoiceModel mnl_no_intercepts(Eigen::MatrixXd gamma);
  static ChoiceModel cl(Eigen::VectorXd theta);
  static ChoiceModel cml(Eigen::VectorXd theta, Eigen::MatrixXd b);
  // p must have a zero diagonal when self_pulls is false.
  static ChoiceModel cdm(Eigen::MatrixXd p, bool self_pulls);
  static ChoiceModel mcdm(Eigen::MatrixXd p, Eigen::MatrixXd gamma, bool self_pulls);
  static ChoiceModel lcl(Eigen::VectorXd theta, Eigen::MatrixXd a);
  static ChoiceModel mlcl(Eigen::VectorXd theta, Eigen::MatrixXd a, Eigen::MatrixXd b);
  // pi: K non-negative entries summing to 1 within 1e-12; u: K x n.
  static ChoiceModel mixed_logit(Eigen::VectorXd pi, Eigen::MatrixXd u);

  // All-zero parameters shaped for `spec` against `data` (mixture weights
  // start uniform). The deterministic optimizer initial point.
  static ChoiceModel zeros(const ModelSpec& spec, const ChoiceDataset& data);

  Family family() const { return spec_.family; }
  const ModelSpec& spec() const { return spec_; }
  int n_items() const { return n_items_; }        // 0 for cl/cml/lcl/mlcl
  int covariate_dim() const { return d_x_; }      // 0 unless the family uses x_a
  int feature_dim() const { return d_y_; }        // 0 unless the family uses y_i
  int components() const { return components_; }  // 1 unless mixed_logit

  const Eigen::VectorXd& params() const { return params_; }
  Eigen::VectorXd& params() { return params_; }
  int n_params() const { return static_cast<int>(params_.size()); }

  // Family-specific parameter views (copies, shaped per the table above).
  Eigen::VectorXd item_utilities() const;      // logit / mnl u
  Eigen::MatrixXd gamma() const;               // mnl / mcdm
  Eigen::VectorXd theta() const;               // cl / cml / lcl / mlcl
  Eigen::MatrixXd covariate_matrix() const;    // cml / mlcl B
  Eigen::MatrixXd context_matrix() const;      // lcl / mlcl A
  Eigen::MatrixXd pulls() const;               // cdm / mcdm P (zero diagonal
                                               // when self_pulls is false)
  Eigen::VectorXd mixture_weights() const;     // mixed_logit pi
  Eigen::MatrixXd component_utilities() const; // mixed_logit U

  // Throws DataError when `data` lacks what the family needs (covariates,
  // features, matching item universe / dimensions).
  void check_data(const ChoiceDataset& data) const;

  // Utility of one item (dense index, must lie in the observation's set).
  // mixed_logit has no single utility and throws DataError.
  double utility(const ChoiceDataset& data, std::size_t obs_index, int item) const;

  // Choice distribution over the observation's set, in set order.
  Eigen::VectorXd choice_probabilities(const ChoiceDataset& data,
                                       std::size_t obs_index) const;

  // Weighted log-likelihood sum_o w_o log Pr(chosen_o | C_o). Singleton sets
  // contribute log 1 = 0.
  double log_likelihood(const ChoiceDataset& data, const SampleWeights& weights) const;

  // Gradient of log_likelihood in the flat parameter layout.
  Eigen::VectorXd gradient(const ChoiceDataset& data, const SampleWeights& weights) const;

  // Single pass computing both; `grad` may be null. Used by the optimizer.
  double ll_and_gradient(const ChoiceDataset& data, const SampleWeights& weights,
                         Eigen::VectorXd* grad) const;

 private:
  ChoiceModel(ModelSpec spec, int n_items, int d_x, int d_y, int components,
              Eigen::VectorXd params);

  void fill_utilities(const ChoiceDataset& data, std::size_t obs_index,
                      const Observation& obs, double* util, Eigen::VectorXd& phi) const;
  void scatter_gradient(const ChoiceDataset& data, std::size_t obs_index,
                        const Observation& obs, const double* resid,
                        Eigen::VectorXd& grad) const;

  ModelSpec spec_;
  int n_items_ = 0;
  int d_x_ = 0;
  int d_y_ = 0;
  int components_ = 1;
  Eigen::VectorXd params_;
};

// Reinterprets a multinomial logit fitted on indicator-encoded data (d_x =
// n items, u absent or identically zero) as the equivalent context-effect
// model: P = Gamma with self-pulls kept.
ChoiceModel cdm_duality_view(const ChoiceModel& model);

// Population parameters of the linear-context model that is the mean-field
// view of a recommender world: chooser vectors x_a ~ N(mu, sigma0), k-item
// sets drawn around the chooser from N(x_a, sigma), utilities x_a . y_i:
//   theta = (1/k) Sigma (Sigma0 + Sigma/k)^{-1} mu
//   A     =       Sigma0 (Sigma0 + Sigma/k)^{-1}
// Solved via LDLT, no explicit inversion; errors if the sum is singular.
std::pair<Eigen::VectorXd, Eigen::MatrixXd> lcl_mean_field_params(
    const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma0,
    const Eigen::MatrixXd& sigma, int k);

}  // namespace choicekit
