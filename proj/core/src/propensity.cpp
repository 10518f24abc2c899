#include "choicekit/propensity.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>

#include "choicekit/errors.hpp"

namespace choicekit {

namespace {

// log sigma(t) and log(1 - sigma(t)) without overflow.
double log_sigmoid(double t) { return t >= 0.0 ? -std::log1p(std::exp(-t)) : t - std::log1p(std::exp(t)); }
double log_one_minus_sigmoid(double t) { return log_sigmoid(-t); }

}  // namespace

// ---------- per-item logistic ----------

double PerItemLogistic::inclusion_probability(int item, const Eigen::VectorXd& x) const {
  if (item < 0 || item >= coefficients.rows())
    throw DataError("inclusion_probability: item index out of range");
  if (x.size() != coefficients.cols())
    throw DataError("inclusion_probability: covariate dimension mismatch");
  const double t = coefficients.row(item).dot(x) + intercepts[item];
  return 1.0 / (1.0 + std::exp(-t));
}

double PerItemLogistic::log_set_propensity(const Eigen::VectorXd& x,
                                           const std::vector<int>& set) const {
  if (x.size() != coefficients.cols())
    throw DataError("log_set_propensity: covariate dimension mismatch");
  const int n = static_cast<int>(coefficients.rows());
  std::vector<bool> in_set(static_cast<std::size_t>(n), false);
  for (int item : set) {
    if (item < 0 || item >= n) throw DataError("log_set_propensity: item index out of range");
    in_set[static_cast<std::size_t>(item)] = true;
  }
  double log_p = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = coefficients.row(i).dot(x) + intercepts[i];
    log_p += in_set[static_cast<std::size_t>(i)] ? log_sigmoid(t) : log_one_minus_sigmoid(t);
  }
  return log_p;
}

double PerItemLogistic::set_propensity(const Eigen::VectorXd& x,
                                       const std::vector<int>& set) const {
  return std::max(std::exp(log_set_propensity(x, set)), kPropensityFloor);
}

PerItemLogistic fit_item_logistic(const ChoiceDataset& data, const FitConfig& config) {
  if (!data.has_chooser_covariates())
    throw DataError("fit_item_logistic: dataset has no chooser covariates");
  const int n = data.n_items();
  const int d = data.covariate_dim();
  const std::size_t n_obs = data.n_observations();
  const Eigen::MatrixXd& cov = data.chooser_covariates();

  // Membership labels once per item, then a penalized logistic fit each.
  std::vector<char> label(n_obs);
  PerItemLogistic out;
  out.coefficients.resize(n, d);
  out.intercepts.resize(n);
  const double lambda = config.l2_lambda;

  for (int i = 0; i < n; ++i) {
    long long positives = 0;
    for (std::size_t o = 0; o < n_obs; ++o) {
      const auto& items = data.observations()[o].items;
      label[o] = std::binary_search(items.begin(), items.end(), i) ? 1 : 0;
      positives += label[o];
    }
    if (positives == 0)
      throw DataError("fit_item_logistic: item '" + data.items().name(i) +
                      "' never appears in a choice set");

    // params = [coefficients; intercept]
    auto objective = [&](const Eigen::VectorXd& p, Eigen::VectorXd& grad) {
      grad.setZero();
      double obj = 0.0;
      for (std::size_t o = 0; o < n_obs; ++o) {
        const auto x = cov.row(data.observations()[o].chooser);
        const double t = x.dot(p.head(d)) + p[d];
        const double sig = 1.0 / (1.0 + std::exp(-t));
        if (label[o]) {
          obj += log_sigmoid(t);
        } else {
          obj += log_one_minus_sigmoid(t);
        }
        const double r = static_cast<double>(label[o]) - sig;
        grad.head(d) += r * x.transpose();
        grad[d] += r;
      }
      obj -= lambda * p.squaredNorm();
      grad -= 2.0 * lambda * p;
      return obj;
    };

    RpropOutcome opt = rprop_maximize(objective, Eigen::VectorXd::Zero(d + 1),
                                      config.max_epochs, config.grad_sq_tol, config.rprop);
    out.coefficients.row(i) = opt.x.head(d).transpose();
    out.intercepts[i] = opt.x[d];
  }
  return out;
}

// ---------- affine-mean Gaussian ----------

AffineGaussian fit_affine_gaussian(const ChoiceDataset& data) {
  if (!data.has_chooser_covariates())
    throw DataError("fit_affine_gaussian: dataset has no chooser covariates");
  if (!data.has_item_features())
    throw DataError("fit_affine_gaussian: dataset has no item features");
  const std::size_t n_obs = data.n_observations();
  const int d_x = data.covariate_dim();
  const int d_y = data.feature_dim();
  const Eigen::MatrixXd& cov = data.chooser_covariates();
  const Eigen::MatrixXd& set_means = data.set_mean_features();

  Eigen::VectorXd x_bar = Eigen::VectorXd::Zero(d_x);
  Eigen::VectorXd y_bar = Eigen::VectorXd::Zero(d_y);
  for (std::size_t o = 0; o < n_obs; ++o) {
    x_bar += cov.row(data.observations()[o].chooser).transpose();
    y_bar += set_means.row(data.set_id(o)).transpose();
  }
  x_bar /= static_cast<double>(n_obs);
  y_bar /= static_cast<double>(n_obs);

  Eigen::MatrixXd sxx = Eigen::MatrixXd::Zero(d_x, d_x);  // sum (x - x_bar)(x - x_bar)^T
  Eigen::MatrixXd syx = Eigen::MatrixXd::Zero(d_y, d_x);  // sum (y - y_bar)(x - x_bar)^T
  for (std::size_t o = 0; o < n_obs; ++o) {
    const Eigen::VectorXd dx = cov.row(data.observations()[o].chooser).transpose() - x_bar;
    const Eigen::VectorXd dy = set_means.row(data.set_id(o)).transpose() - y_bar;
    sxx.noalias() += dx * dx.transpose();
    syx.noalias() += dy * dx.transpose();
  }

  Eigen::FullPivLU<Eigen::MatrixXd> lu(sxx);
  if (!lu.isInvertible())
    throw DataError(
        "fit_affine_gaussian: not identifiable (need d_x + 1 affinely independent "
        "chooser covariate rows)");

  AffineGaussian out;
  out.w = lu.solve(syx.transpose()).transpose();
  out.z = y_bar - out.w * x_bar;
  out.sigma = Eigen::MatrixXd::Zero(d_y, d_y);
  for (std::size_t o = 0; o < n_obs; ++o) {
    const Eigen::VectorXd r =
        set_means.row(data.set_id(o)).transpose() -
        (out.w * cov.row(data.observations()[o].chooser).transpose() + out.z);
    out.sigma.noalias() += r * r.transpose();
  }
  out.sigma /= static_cast<double>(n_obs);
  return out;
}

double AffineGaussian::density(const Eigen::VectorXd& x, const Eigen::VectorXd& y) const {
  if (x.size() != w.cols()) throw DataError("AffineGaussian: covariate dimension mismatch");
  if (y.size() != w.rows()) throw DataError("AffineGaussian: feature dimension mismatch");
  const Eigen::Index d = y.size();
  const Eigen::VectorXd r = y - (w * x + z);

  Eigen::LLT<Eigen::MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) {
    const double tr = sigma.trace();
    const double ridge = 1e-9 * std::max(1.0, tr / static_cast<double>(d));
    Eigen::MatrixXd patched = sigma;
    patched.diagonal().array() += ridge;
    llt.compute(patched);
    if (llt.info() != Eigen::Success)
      throw NumericError("AffineGaussian: covariance not factorizable even with ridge");
  }
  const Eigen::VectorXd half = llt.matrixL().solve(r);
  double log_det = 0.0;
  for (Eigen::Index i = 0; i < d; ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));
  const double log_density = -0.5 * (static_cast<double>(d) * std::log(2.0 * std::numbers::pi) +
                                     log_det + half.squaredNorm());
  return std::exp(log_density);
}

double gaussian_propensity(const AffineGaussian& model, const ChoiceDataset& data,
                           std::size_t obs_index) {
  if (!data.has_chooser_covariates())
    throw DataError("gaussian_propensity: dataset has no chooser covariates");
  if (!data.has_item_features())
    throw DataError("gaussian_propensity: dataset has no item features");
  const Observation& obs = data.observation(obs_index);
  const Eigen::VectorXd x = data.chooser_covariates().row(obs.chooser).transpose();
  const Eigen::VectorXd y_c = data.set_mean_features().row(data.set_id(obs_index)).transpose();
  return model.density(x, y_c);
}

// ---------- weights ----------

double set_propensity(const PropensityModel& model, const ChoiceDataset& data,
                      std::size_t obs_index) {
  if (const auto* logistic = std::get_if<PerItemLogistic>(&model)) {
    if (!data.has_chooser_covariates())
      throw DataError("set_propensity: dataset has no chooser covariates");
    const Observation& obs = data.observation(obs_index);
    const Eigen::VectorXd x = data.chooser_covariates().row(obs.chooser).transpose();
    if (logistic->coefficients.rows() != data.n_items())
      throw DataError("set_propensity: item count mismatch");
    return logistic->set_propensity(x, obs.items);
  }
  return gaussian_propensity(std::get<AffineGaussian>(model), data, obs_index);
}

SampleWeights ipw_weights(const PropensityModel& model, const ChoiceDataset& data,
                          std::optional<double> clip_quantile, bool raw) {
  const std::size_t n_obs = data.n_observations();
  const double n_sets = static_cast<double>(data.n_unique_sets());
  Eigen::VectorXd w(static_cast<Eigen::Index>(n_obs));
  for (std::size_t o = 0; o < n_obs; ++o) {
    const double prop = std::max(set_propensity(model, data, o), kPropensityFloor);
    w[static_cast<Eigen::Index>(o)] = 1.0 / (n_sets * prop);
  }
  if (clip_quantile) {
    const double q = *clip_quantile;
    if (!(q > 0.0) || q > 1.0)
      throw DataError("ipw_weights: clip_quantile must lie in (0, 1]");
    std::vector<double> sorted(w.data(), w.data() + w.size());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t rank = static_cast<std::size_t>(
        std::ceil(q * static_cast<double>(n_obs)));
    const double cap = sorted[std::max<std::size_t>(rank, 1) - 1];
    for (Eigen::Index i = 0; i < w.size(); ++i) w[i] = std::min(w[i], cap);
  }
  SampleWeights out = raw ? SampleWeights::raw(std::move(w))
                          : SampleWeights::mean_normalized(std::move(w));
  if (clip_quantile) out.set_clip_quantile(*clip_quantile);
  return out;
}

double normalized_ipw_loglik(const ChoiceModel& model, const ChoiceDataset& data,
                             const SampleWeights& weights) {
  if (weights.size() != data.n_observations())
    throw DataError("normalized_ipw_loglik: weights length mismatch");
  double weight_sum = 0.0;
  std::size_t contributors = 0;
  for (std::size_t o = 0; o < data.n_observations(); ++o) {
    if (data.observations()[o].items.size() < 2) continue;
    weight_sum += weights.values()[static_cast<Eigen::Index>(o)];
    ++contributors;
  }
  if (!(weight_sum > 0.0))
    throw DataError("normalized_ipw_loglik: non-singleton weights sum to zero");
  const double weighted_ll = model.log_likelihood(data, weights);
  return weighted_ll / weight_sum * static_cast<double>(contributors);
}

FitResult fit_doubly_robust(const ModelSpec& spec, const ChoiceDataset& data,
                            const PropensityModel& propensity, const FitConfig& config) {
  const bool covariate_family = spec.family == Family::mnl || spec.family == Family::cml ||
                                spec.family == Family::mcdm || spec.family == Family::mlcl;
  if (!covariate_family)
    throw DataError(
        "fit_doubly_robust: needs a covariate-adjusted family (mnl, cml, mcdm, mlcl)");
  const SampleWeights w = ipw_weights(propensity, data);
  return fit(spec, data, w, config);
}

}  // namespace choicekit
