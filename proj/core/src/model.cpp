#include "choicekit/model.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

#include "choicekit/errors.hpp"

namespace choicekit {

namespace {

using RowMajorMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMajorMap = Eigen::Map<const RowMajorMatrix>;
using RowMajorMap = Eigen::Map<RowMajorMatrix>;

int set_position(const std::vector<int>& items, int item) {
  auto it = std::lower_bound(items.begin(), items.end(), item);
  if (it == items.end() || *it != item) return -1;
  return static_cast<int>(it - items.begin());
}

// In-place softmax over util[0..s); returns log of the normalizer shifted by
// the max, so log Pr(t) = util[t] - max - log_z.
double softmax(const double* util, double* prob, int s, double& max_out) {
  double m = util[0];
  for (int t = 1; t < s; ++t) m = std::max(m, util[t]);
  double z = 0.0;
  for (int t = 0; t < s; ++t) {
    prob[t] = std::exp(util[t] - m);
    z += prob[t];
  }
  for (int t = 0; t < s; ++t) prob[t] /= z;
  max_out = m;
  return std::log(z);
}

}  // namespace

std::string_view family_name(Family family) {
  switch (family) {
    case Family::logit: return "logit";
    case Family::mnl: return "mnl";
    case Family::cl: return "cl";
    case Family::cml: return "cml";
    case Family::cdm: return "cdm";
    case Family::mcdm: return "mcdm";
    case Family::lcl: return "lcl";
    case Family::mlcl: return "mlcl";
    case Family::mixed_logit: return "mixed-logit";
  }
  throw DataError("family_name: invalid family");
}

Family family_from_name(std::string_view name) {
  if (name == "logit") return Family::logit;
  if (name == "mnl") return Family::mnl;
  if (name == "cl") return Family::cl;
  if (name == "cml") return Family::cml;
  if (name == "cdm") return Family::cdm;
  if (name == "mcdm") return Family::mcdm;
  if (name == "lcl") return Family::lcl;
  if (name == "mlcl") return Family::mlcl;
  if (name == "mixed-logit" || name == "mixed_logit") return Family::mixed_logit;
  throw DataError("unknown model family '" + std::string(name) + "'");
}

// ---------- construction ----------

ChoiceModel::ChoiceModel(ModelSpec spec, int n_items, int d_x, int d_y, int components,
                         Eigen::VectorXd params)
    : spec_(spec),
      n_items_(n_items),
      d_x_(d_x),
      d_y_(d_y),
      components_(components),
      params_(std::move(params)) {
  if (!params_.allFinite()) throw DataError("ChoiceModel: non-finite parameter");
}

ChoiceModel ChoiceModel::logit(Eigen::VectorXd u) {
  const int n = static_cast<int>(u.size());
  if (n < 1) throw DataError("logit: need at least one item");
  return ChoiceModel({Family::logit}, n, 0, 0, 1, std::move(u));
}

ChoiceModel ChoiceModel::mnl(Eigen::VectorXd u, Eigen::MatrixXd gamma) {
  const int n = static_cast<int>(u.size());
  if (n < 1) throw DataError("mnl: need at least one item");
  if (gamma.rows() != n) throw DataError("mnl: gamma must have one row per item");
  if (gamma.cols() < 1) throw DataError("mnl: gamma needs at least one column");
  const int d_x = static_cast<int>(gamma.cols());
  Eigen::VectorXd params(n + n * d_x);
  params.head(n) = u;
  RowMajorMap(params.data() + n, n, d_x) = gamma;
  ModelSpec spec{Family::mnl};
  return ChoiceModel(spec, n, d_x, 0, 1, std::move(params));
}

ChoiceModel ChoiceModel::mnl_no_intercepts(Eigen::MatrixXd gamma) {
  const int n = static_cast<int>(gamma.rows());
  if (n < 1) throw DataError("mnl: need at least one item");
  if (gamma.cols() < 1) throw DataError("mnl: gamma needs at least one column");
  const int d_x = static_cast<int>(gamma.cols());
  Eigen::VectorXd params(n * d_x);
  RowMajorMap(params.data(), n, d_x) = gamma;
  ModelSpec spec{Family::mnl};
  spec.item_intercepts = false;
  return ChoiceModel(spec, n, d_x, 0, 1, std::move(params));
}

ChoiceModel ChoiceModel::cl(Eigen::VectorXd theta) {
  const int d_y = static_cast<int>(theta.size());
  if (d_y < 1) throw DataError("cl: theta must be non-empty");
  return ChoiceModel({Family::cl}, 0, 0, d_y, 1, std::move(theta));
}

ChoiceModel ChoiceModel::cml(Eigen::VectorXd theta, Eigen::MatrixXd b) {
  const int d_y = static_cast<int>(theta.size());
  if (d_y < 1) throw DataError("cml: theta must be non-empty");
  if (b.rows() != d_y) throw DataError("cml: B must have d_y rows");
  if (b.cols() < 1) throw DataError("cml: B needs at least one column");
  const int d_x = static_cast<int>(b.cols());
  Eigen::VectorXd params(d_y + d_y * d_x);
  params.head(d_y) = theta;
  RowMajorMap(params.data() + d_y, d_y, d_x) = b;
  return ChoiceModel({Family::cml}, 0, d_x, d_y, 1, std::move(params));
}

namespace {

Eigen::VectorXd flatten_cdm(const Eigen::MatrixXd& p, bool self_pulls) {
  const int n = static_cast<int>(p.rows());
  if (n < 1 || p.cols() != n) throw DataError("cdm: P must be square");
  if (self_pulls) {
    Eigen::VectorXd flat(n * n);
    RowMajorMap(flat.data(), n, n) = p;
    return flat;
  }
  for (int i = 0; i < n; ++i)
    if (p(i, i) != 0.0)
      throw DataError("cdm: P must have a zero diagonal when self_pulls is false");
  Eigen::VectorXd flat(n * (n - 1));
  int k = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (j != i) flat[k++] = p(i, j);
  return flat;
}

}  // namespace

ChoiceModel ChoiceModel::cdm(Eigen::MatrixXd p, bool self_pulls) {
  const int n = static_cast<int>(p.rows());
  ModelSpec spec{Family::cdm};
  spec.self_pulls = self_pulls;
  return ChoiceModel(spec, n, 0, 0, 1, flatten_cdm(p, self_pulls));
}

ChoiceModel ChoiceModel::mcdm(Eigen::MatrixXd p, Eigen::MatrixXd gamma, bool self_pulls) {
  const int n = static_cast<int>(p.rows());
  if (gamma.rows() != n) throw DataError("mcdm: gamma must have one row per item");
  if (gamma.cols() < 1) throw DataError("mcdm: gamma needs at least one column");
  const int d_x = static_cast<int>(gamma.cols());
  Eigen::VectorXd cdm_flat = flatten_cdm(p, self_pulls);
  Eigen::VectorXd params(cdm_flat.size() + n * d_x);
  params.head(cdm_flat.size()) = cdm_flat;
  RowMajorMap(params.data() + cdm_flat.size(), n, d_x) = gamma;
  ModelSpec spec{Family::mcdm};
  spec.self_pulls = self_pulls;
  return ChoiceModel(spec, n, d_x, 0, 1, std::move(params));
}

ChoiceModel ChoiceModel::lcl(Eigen::VectorXd theta, Eigen::MatrixXd a) {
  const int d_y = static_cast<int>(theta.size());
  if (d_y < 1) throw DataError("lcl: theta must be non-empty");
  if (a.rows() != d_y || a.cols() != d_y) throw DataError("lcl: A must be d_y x d_y");
  Eigen::VectorXd params(d_y + d_y * d_y);
  params.head(d_y) = theta;
  RowMajorMap(params.data() + d_y, d_y, d_y) = a;
  return ChoiceModel({Family::lcl}, 0, 0, d_y, 1, std::move(params));
}

ChoiceModel ChoiceModel::mlcl(Eigen::VectorXd theta, Eigen::MatrixXd a, Eigen::MatrixXd b) {
  const int d_y = static_cast<int>(theta.size());
  if (d_y < 1) throw DataError("mlcl: theta must be non-empty");
  if (a.rows() != d_y || a.cols() != d_y) throw DataError("mlcl: A must be d_y x d_y");
  if (b.rows() != d_y) throw DataError("mlcl: B must have d_y rows");
  if (b.cols() < 1) throw DataError("mlcl: B needs at least one column");
  const int d_x = static_cast<int>(b.cols());
  Eigen::VectorXd params(d_y + d_y * d_y + d_y * d_x);
  params.head(d_y) = theta;
  RowMajorMap(params.data() + d_y, d_y, d_y) = a;
  RowMajorMap(params.data() + d_y + d_y * d_y, d_y, d_x) = b;
  return ChoiceModel({Family::mlcl}, 0, d_x, d_y, 1, std::move(params));
}

ChoiceModel ChoiceModel::mixed_logit(Eigen::VectorXd pi, Eigen::MatrixXd u) {
  const int k = static_cast<int>(pi.size());
  if (k < 1) throw DataError("mixed_logit: need at least one component");
  if (u.rows() != k) throw DataError("mixed_logit: U must have one row per component");
  if (u.cols() < 1) throw DataError("mixed_logit: need at least one item");
  for (int i = 0; i < k; ++i)
    if (!(pi[i] >= 0.0)) throw DataError("mixed_logit: mixture weights must be >= 0");
  if (std::abs(pi.sum() - 1.0) > 1e-12)
    throw DataError("mixed_logit: mixture weights must sum to 1");
  const int n = static_cast<int>(u.cols());
  Eigen::VectorXd params(k + k * n);
  params.head(k) = pi;
  RowMajorMap(params.data() + k, k, n) = u;
  ModelSpec spec{Family::mixed_logit};
  spec.mixture_components = k;
  return ChoiceModel(spec, n, 0, 0, k, std::move(params));
}

ChoiceModel ChoiceModel::zeros(const ModelSpec& spec, const ChoiceDataset& data) {
  const int n = data.n_items();
  const int d_x = data.covariate_dim();
  const int d_y = data.feature_dim();
  const bool needs_x = spec.family == Family::mnl || spec.family == Family::cml ||
                       spec.family == Family::mcdm || spec.family == Family::mlcl;
  const bool needs_y = spec.family == Family::cl || spec.family == Family::cml ||
                       spec.family == Family::lcl || spec.family == Family::mlcl;
  if (needs_x && !data.has_chooser_covariates())
    throw DataError(std::string(family_name(spec.family)) +
                    " requires chooser covariates");
  if (needs_y && !data.has_item_features())
    throw DataError(std::string(family_name(spec.family)) + " requires item features");

  switch (spec.family) {
    case Family::logit:
      return logit(Eigen::VectorXd::Zero(n));
    case Family::mnl:
      return spec.item_intercepts
                 ? mnl(Eigen::VectorXd::Zero(n), Eigen::MatrixXd::Zero(n, d_x))
                 : mnl_no_intercepts(Eigen::MatrixXd::Zero(n, d_x));
    case Family::cl:
      return cl(Eigen::VectorXd::Zero(d_y));
    case Family::cml:
      return cml(Eigen::VectorXd::Zero(d_y), Eigen::MatrixXd::Zero(d_y, d_x));
    case Family::cdm:
      return cdm(Eigen::MatrixXd::Zero(n, n), spec.self_pulls);
    case Family::mcdm:
      return mcdm(Eigen::MatrixXd::Zero(n, n), Eigen::MatrixXd::Zero(n, d_x),
                  spec.self_pulls);
    case Family::lcl:
      return lcl(Eigen::VectorXd::Zero(d_y), Eigen::MatrixXd::Zero(d_y, d_y));
    case Family::mlcl:
      return mlcl(Eigen::VectorXd::Zero(d_y), Eigen::MatrixXd::Zero(d_y, d_y),
                  Eigen::MatrixXd::Zero(d_y, d_x));
    case Family::mixed_logit: {
      const int k = spec.mixture_components;
      if (k < 1) throw DataError("mixed_logit: mixture_components must be >= 1");
      return mixed_logit(Eigen::VectorXd::Constant(k, 1.0 / k),
                         Eigen::MatrixXd::Zero(k, n));
    }
  }
  throw DataError("zeros: invalid family");
}

// ---------- parameter views ----------

namespace {
int cdm_block_size(int n, bool self_pulls) { return self_pulls ? n * n : n * (n - 1); }
}

Eigen::VectorXd ChoiceModel::item_utilities() const {
  if (spec_.family == Family::logit) return params_;
  if (spec_.family == Family::mnl) {
    if (!spec_.item_intercepts) return Eigen::VectorXd::Zero(n_items_);
    return params_.head(n_items_);
  }
  throw DataError("item_utilities: only logit/mnl carry per-item utilities");
}

Eigen::MatrixXd ChoiceModel::gamma() const {
  if (spec_.family == Family::mnl) {
    const int off = spec_.item_intercepts ? n_items_ : 0;
    return ConstRowMajorMap(params_.data() + off, n_items_, d_x_);
  }
  if (spec_.family == Family::mcdm) {
    const int off = cdm_block_size(n_items_, spec_.self_pulls);
    return ConstRowMajorMap(params_.data() + off, n_items_, d_x_);
  }
  throw DataError("gamma: only mnl/mcdm carry per-item covariate coefficients");
}

Eigen::VectorXd ChoiceModel::theta() const {
  switch (spec_.family) {
    case Family::cl:
    case Family::cml:
    case Family::lcl:
    case Family::mlcl:
      return params_.head(d_y_);
    default:
      throw DataError("theta: family has no feature coefficient vector");
  }
}

Eigen::MatrixXd ChoiceModel::covariate_matrix() const {
  if (spec_.family == Family::cml)
    return ConstRowMajorMap(params_.data() + d_y_, d_y_, d_x_);
  if (spec_.family == Family::mlcl)
    return ConstRowMajorMap(params_.data() + d_y_ + d_y_ * d_y_, d_y_, d_x_);
  throw DataError("covariate_matrix: only cml/mlcl carry B");
}

Eigen::MatrixXd ChoiceModel::context_matrix() const {
  if (spec_.family == Family::lcl || spec_.family == Family::mlcl)
    return ConstRowMajorMap(params_.data() + d_y_, d_y_, d_y_);
  throw DataError("context_matrix: only lcl/mlcl carry A");
}

Eigen::MatrixXd ChoiceModel::pulls() const {
  if (spec_.family != Family::cdm && spec_.family != Family::mcdm)
    throw DataError("pulls: only cdm/mcdm carry a pull matrix");
  const int n = n_items_;
  if (spec_.self_pulls) return ConstRowMajorMap(params_.data(), n, n);
  Eigen::MatrixXd p = Eigen::MatrixXd::Zero(n, n);
  int k = 0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (j != i) p(i, j) = params_[k++];
  return p;
}

Eigen::VectorXd ChoiceModel::mixture_weights() const {
  if (spec_.family != Family::mixed_logit)
    throw DataError("mixture_weights: not a mixed logit");
  return params_.head(components_);
}

Eigen::MatrixXd ChoiceModel::component_utilities() const {
  if (spec_.family != Family::mixed_logit)
    throw DataError("component_utilities: not a mixed logit");
  return ConstRowMajorMap(params_.data() + components_, components_, n_items_);
}

// ---------- data compatibility ----------

void ChoiceModel::check_data(const ChoiceDataset& data) const {
  const bool item_indexed = spec_.family == Family::logit || spec_.family == Family::mnl ||
                            spec_.family == Family::cdm || spec_.family == Family::mcdm ||
                            spec_.family == Family::mixed_logit;
  if (item_indexed && data.n_items() != n_items_)
    throw DataError("model expects " + std::to_string(n_items_) + " items, dataset has " +
                    std::to_string(data.n_items()));
  if (d_x_ > 0) {
    if (!data.has_chooser_covariates())
      throw DataError(std::string(family_name(spec_.family)) +
                      " requires chooser covariates");
    if (data.covariate_dim() != d_x_)
      throw DataError("model expects covariate dimension " + std::to_string(d_x_) +
                      ", dataset has " + std::to_string(data.covariate_dim()));
  }
  if (d_y_ > 0) {
    if (!data.has_item_features())
      throw DataError(std::string(family_name(spec_.family)) + " requires item features");
    if (data.feature_dim() != d_y_)
      throw DataError("model expects feature dimension " + std::to_string(d_y_) +
                      ", dataset has " + std::to_string(data.feature_dim()));
  }
}

// ---------- utilities, probabilities, likelihood ----------

// Fills util[0..s) for one observation; phi is a d_y-sized scratch vector.
void ChoiceModel::fill_utilities(const ChoiceDataset& data, std::size_t o,
                                 const Observation& obs, double* util,
                                 Eigen::VectorXd& phi) const {
  const int s = static_cast<int>(obs.items.size());
  switch (spec_.family) {
    case Family::logit:
      for (int t = 0; t < s; ++t) util[t] = params_[obs.items[t]];
      break;
    case Family::mnl: {
      const auto x = data.chooser_covariates().row(obs.chooser);
      const int off = spec_.item_intercepts ? n_items_ : 0;
      for (int t = 0; t < s; ++t) {
        const int i = obs.items[t];
        double v = spec_.item_intercepts ? params_[i] : 0.0;
        v += Eigen::Map<const Eigen::VectorXd>(params_.data() + off + i * d_x_, d_x_)
                 .dot(x);
        util[t] = v;
      }
      break;
    }
    case Family::cl: {
      const auto& y = data.item_features();
      for (int t = 0; t < s; ++t)
        util[t] = y.row(obs.items[t]).dot(params_);
      break;
    }
    case Family::cml: {
      const auto x = data.chooser_covariates().row(obs.chooser);
      phi = params_.head(d_y_);
      phi.noalias() += ConstRowMajorMap(params_.data() + d_y_, d_y_, d_x_) * x.transpose();
      const auto& y = data.item_features();
      for (int t = 0; t < s; ++t) util[t] = y.row(obs.items[t]).dot(phi);
      break;
    }
    case Family::cdm: {
      const bool self = spec_.self_pulls;
      for (int t = 0; t < s; ++t) {
        const int i = obs.items[t];
        double v = 0.0;
        if (self) {
          const double* row = params_.data() + i * n_items_;
          for (int l = 0; l < s; ++l) v += row[obs.items[l]];
        } else {
          const double* row = params_.data() + i * (n_items_ - 1);
          for (int l = 0; l < s; ++l) {
            const int j = obs.items[l];
            if (j == i) continue;
            v += row[j < i ? j : j - 1];
          }
        }
        util[t] = v;
      }
      break;
    }
    case Family::mcdm: {
      const auto x = data.chooser_covariates().row(obs.chooser);
      const bool self = spec_.self_pulls;
      const int off = cdm_block_size(n_items_, self);
      for (int t = 0; t < s; ++t) {
        const int i = obs.items[t];
        double v = 0.0;
        if (self) {
          const double* row = params_.data() + i * n_items_;
          for (int l = 0; l < s; ++l) v += row[obs.items[l]];
        } else {
          const double* row = params_.data() + i * (n_items_ - 1);
          for (int l = 0; l < s; ++l) {
            const int j = obs.items[l];
            if (j == i) continue;
            v += row[j < i ? j : j - 1];
          }
        }
        v += Eigen::Map<const Eigen::VectorXd>(params_.data() + off + i * d_x_, d_x_)
                 .dot(x);
        util[t] = v;
      }
      break;
    }
    case Family::lcl: {
      const auto y_c = data.set_mean_features().row(data.set_id(o));
      phi = params_.head(d_y_);
      phi.noalias() +=
          ConstRowMajorMap(params_.data() + d_y_, d_y_, d_y_) * y_c.transpose();
      const auto& y = data.item_features();
      for (int t = 0; t < s; ++t) util[t] = y.row(obs.items[t]).dot(phi);
      break;
    }
    case Family::mlcl: {
      const auto y_c = data.set_mean_features().row(data.set_id(o));
      const auto x = data.chooser_covariates().row(obs.chooser);
      phi = params_.head(d_y_);
      phi.noalias() +=
          ConstRowMajorMap(params_.data() + d_y_, d_y_, d_y_) * y_c.transpose();
      phi.noalias() += ConstRowMajorMap(params_.data() + d_y_ + d_y_ * d_y_, d_y_, d_x_) *
                       x.transpose();
      const auto& y = data.item_features();
      for (int t = 0; t < s; ++t) util[t] = y.row(obs.items[t]).dot(phi);
      break;
    }
    case Family::mixed_logit:
      throw DataError("mixed logit has per-component utilities only");
  }
}

// Adds the per-observation chain-rule contribution to `grad`; resid[t] is
// w * (1{t == chosen} - Pr(t)).
void ChoiceModel::scatter_gradient(const ChoiceDataset& data, std::size_t o,
                                   const Observation& obs, const double* resid,
                                   Eigen::VectorXd& grad) const {
  const int s = static_cast<int>(obs.items.size());
  switch (spec_.family) {
    case Family::logit:
      for (int t = 0; t < s; ++t) grad[obs.items[t]] += resid[t];
      break;
    case Family::mnl: {
      const auto x = data.chooser_covariates().row(obs.chooser);
      const int off = spec_.item_intercepts ? n_items_ : 0;
      for (int t = 0; t < s; ++t) {
        const int i = obs.items[t];
        if (spec_.item_intercepts) grad[i] += resid[t];
        Eigen::Map<Eigen::VectorXd>(grad.data() + off + i * d_x_, d_x_) +=
            resid[t] * x.transpose();
      }
      break;
    }
    case Family::cl: {
      const auto& y = data.item_features();
      for (int t = 0; t < s; ++t) grad += resid[t] * y.row(obs.items[t]).transpose();
      break;
    }
    case Family::cml: {
      const auto x = data.chooser_covariates().row(obs.chooser);
      const auto& y = data.item_features();
      Eigen::VectorXd v = Eigen::VectorXd::Zero(d_y_);
      for (int t = 0; t < s; ++t) v += resid[t] * y.row(obs.items[t]).transpose();
      grad.head(d_y_) += v;
      RowMajorMap(grad.data() + d_y_, d_y_, d_x_).noalias() += v * x;
      break;
    }
    case Family::cdm: {
      const bool self = spec_.self_pulls;
      for (int t = 0; t < s; ++t) {
        const int i = obs.items[t];
        if (self) {
          double* row = grad.data() + i * n_items_;
          for (int l = 0; l < s; ++l) row[obs.items[l]] += resid[t];
        } else {
          double* row = grad.data() + i * (n_items_ - 1);
          for (int l = 0; l < s; ++l) {
            const int j = obs.items[l];
            if (j == i) continue;
            row[j < i ? j : j - 1] += resid[t];
          }
        }
      }
      break;
    }
    case Family::mcdm: {
      const auto x = data.chooser_covariates().row(obs.chooser);
      const bool self = spec_.self_pulls;
      const int off = cdm_block_size(n_items_, self);
      for (int t = 0; t < s; ++t) {
        const int i = obs.items[t];
        if (self) {
          double* row = grad.data() + i * n_items_;
          for (int l = 0; l < s; ++l) row[obs.items[l]] += resid[t];
        } else {
          double* row = grad.data() + i * (n_items_ - 1);
          for (int l = 0; l < s; ++l) {
            const int j = obs.items[l];
            if (j == i) continue;
            row[j < i ? j : j - 1] += resid[t];
          }
        }
        Eigen::Map<Eigen::VectorXd>(grad.data() + off + i * d_x_, d_x_) +=
            resid[t] * x.transpose();
      }
      break;
    }
    case Family::lcl: {
      const auto y_c = data.set_mean_features().row(data.set_id(o));
      const auto& y = data.item_features();
      Eigen::VectorXd v = Eigen::VectorXd::Zero(d_y_);
      for (int t = 0; t < s; ++t) v += resid[t] * y.row(obs.items[t]).transpose();
      grad.head(d_y_) += v;
      RowMajorMap(grad.data() + d_y_, d_y_, d_y_).noalias() += v * y_c;
      break;
    }
    case Family::mlcl: {
      const auto y_c = data.set_mean_features().row(data.set_id(o));
      const auto x = data.chooser_covariates().row(obs.chooser);
      const auto& y = data.item_features();
      Eigen::VectorXd v = Eigen::VectorXd::Zero(d_y_);
      for (int t = 0; t < s; ++t) v += resid[t] * y.row(obs.items[t]).transpose();
      grad.head(d_y_) += v;
      RowMajorMap(grad.data() + d_y_, d_y_, d_y_).noalias() += v * y_c;
      RowMajorMap(grad.data() + d_y_ + d_y_ * d_y_, d_y_, d_x_).noalias() += v * x;
      break;
    }
    case Family::mixed_logit:
      throw DataError("mixed logit gradient handled separately");
  }
}

double ChoiceModel::utility(const ChoiceDataset& data, std::size_t obs_index,
                            int item) const {
  check_data(data);
  if (spec_.family == Family::mixed_logit)
    throw DataError("mixed logit has no single utility; use choice_probabilities");
  const Observation& obs = data.observation(obs_index);
  const int pos = set_position(obs.items, item);
  if (pos < 0) throw DataError("utility: item not in the observation's choice set");
  std::vector<double> util(obs.items.size());
  Eigen::VectorXd phi(std::max(1, d_y_));
  fill_utilities(data, obs_index, obs, util.data(), phi);
  return util[static_cast<std::size_t>(pos)];
}

Eigen::VectorXd ChoiceModel::choice_probabilities(const ChoiceDataset& data,
                                                  std::size_t obs_index) const {
  check_data(data);
  const Observation& obs = data.observation(obs_index);
  const int s = static_cast<int>(obs.items.size());
  Eigen::VectorXd out(s);
  if (spec_.family == Family::mixed_logit) {
    out.setZero();
    std::vector<double> util(static_cast<std::size_t>(s)), prob(static_cast<std::size_t>(s));
    for (int k = 0; k < components_; ++k) {
      const double* u_row = params_.data() + components_ + k * n_items_;
      for (int t = 0; t < s; ++t) util[static_cast<std::size_t>(t)] = u_row[obs.items[t]];
      double m;
      softmax(util.data(), prob.data(), s, m);
      for (int t = 0; t < s; ++t) out[t] += params_[k] * prob[static_cast<std::size_t>(t)];
    }
    return out;
  }
  std::vector<double> util(static_cast<std::size_t>(s)), prob(static_cast<std::size_t>(s));
  Eigen::VectorXd phi(std::max(1, d_y_));
  fill_utilities(data, obs_index, obs, util.data(), phi);
  double m;
  softmax(util.data(), prob.data(), s, m);
  for (int t = 0; t < s; ++t) out[t] = prob[static_cast<std::size_t>(t)];
  return out;
}

double ChoiceModel::ll_and_gradient(const ChoiceDataset& data, const SampleWeights& weights,
                                    Eigen::VectorXd* grad) const {
  check_data(data);
  const Eigen::VectorXd& w = weights.values();
  if (weights.size() != data.n_observations())
    throw DataError("weights length does not match the number of observations");
  if (grad) {
    grad->resize(params_.size());
    grad->setZero();
  }

  const int max_s = data.max_set_size();
  std::vector<double> util(static_cast<std::size_t>(std::max(1, max_s)));
  std::vector<double> prob(static_cast<std::size_t>(std::max(1, max_s)));
  std::vector<double> resid(static_cast<std::size_t>(std::max(1, max_s)));
  Eigen::VectorXd phi(std::max(1, d_y_));
  double ll = 0.0;

  if (spec_.family == Family::mixed_logit) {
    // Pr(i|C) = sum_k pi_k softmax_k(i|C); gradients treat pi as free
    // coordinates (the EM driver owns the simplex constraint).
    std::vector<double> pk(static_cast<std::size_t>(components_));
    Eigen::MatrixXd probs(components_, std::max(1, max_s));
    for (std::size_t o = 0; o < data.n_observations(); ++o) {
      const double wo = w[static_cast<Eigen::Index>(o)];
      if (wo == 0.0) continue;
      const Observation& obs = data.observations()[o];
      const int s = static_cast<int>(obs.items.size());
      if (s < 2) continue;  // singletons: log 1 = 0, nothing to learn
      const int c = set_position(obs.items, obs.chosen);
      double mix = 0.0;
      for (int k = 0; k < components_; ++k) {
        const double* u_row = params_.data() + components_ + k * n_items_;
        for (int t = 0; t < s; ++t) util[static_cast<std::size_t>(t)] = u_row[obs.items[t]];
        double m;
        softmax(util.data(), prob.data(), s, m);
        for (int t = 0; t < s; ++t) probs(k, t) = prob[static_cast<std::size_t>(t)];
        pk[static_cast<std::size_t>(k)] = probs(k, c);
        mix += params_[k] * probs(k, c);
      }
      ll += wo * std::log(mix);
      if (grad) {
        for (int k = 0; k < components_; ++k) {
          const double gk = wo * pk[static_cast<std::size_t>(k)] / mix;
          (*grad)[k] += gk;
          const double scale = params_[k] * gk;  // w * pi_k p_k(c) / mix
          double* g_row = grad->data() + components_ + k * n_items_;
          for (int t = 0; t < s; ++t) {
            const double delta = (t == c) ? 1.0 : 0.0;
            g_row[obs.items[t]] += scale * (delta - probs(k, t));
          }
        }
      }
    }
    return ll;
  }

  for (std::size_t o = 0; o < data.n_observations(); ++o) {
    const double wo = w[static_cast<Eigen::Index>(o)];
    if (wo == 0.0) continue;
    const Observation& obs = data.observations()[o];
    const int s = static_cast<int>(obs.items.size());
    if (s < 2) continue;
    fill_utilities(data, o, obs, util.data(), phi);
    double m;
    const double log_z = softmax(util.data(), prob.data(), s, m);
    const int c = set_position(obs.items, obs.chosen);
    ll += wo * (util[static_cast<std::size_t>(c)] - m - log_z);
    if (grad) {
      for (int t = 0; t < s; ++t) {
        const double delta = (t == c) ? 1.0 : 0.0;
        resid[static_cast<std::size_t>(t)] = wo * (delta - prob[static_cast<std::size_t>(t)]);
      }
      scatter_gradient(data, o, obs, resid.data(), *grad);
    }
  }
  return ll;
}

double ChoiceModel::log_likelihood(const ChoiceDataset& data,
                                   const SampleWeights& weights) const {
  return ll_and_gradient(data, weights, nullptr);
}

Eigen::VectorXd ChoiceModel::gradient(const ChoiceDataset& data,
                                      const SampleWeights& weights) const {
  Eigen::VectorXd grad;
  ll_and_gradient(data, weights, &grad);
  return grad;
}

// ---------- dualities ----------

ChoiceModel cdm_duality_view(const ChoiceModel& model) {
  if (model.family() != Family::mnl)
    throw DataError("cdm_duality_view: expected a multinomial logit");
  if (model.covariate_dim() != model.n_items())
    throw DataError(
        "cdm_duality_view: needs indicator encoding (covariate dim == item count)");
  if (model.spec().item_intercepts && !model.item_utilities().isZero(0.0))
    throw DataError("cdm_duality_view: item intercepts must be identically zero");
  return ChoiceModel::cdm(model.gamma(), /*self_pulls=*/true);
}

std::pair<Eigen::VectorXd, Eigen::MatrixXd> lcl_mean_field_params(
    const Eigen::VectorXd& mu, const Eigen::MatrixXd& sigma0,
    const Eigen::MatrixXd& sigma, int k) {
  const Eigen::Index d = mu.size();
  if (d < 1) throw DataError("lcl_mean_field_params: empty mean");
  if (sigma0.rows() != d || sigma0.cols() != d || sigma.rows() != d || sigma.cols() != d)
    throw DataError("lcl_mean_field_params: covariance dimensions must match mu");
  if (k < 1) throw DataError("lcl_mean_field_params: k must be >= 1");
  const double scale = std::max({1.0, sigma0.cwiseAbs().maxCoeff(),
                                 sigma.cwiseAbs().maxCoeff()});
  if ((sigma0 - sigma0.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale ||
      (sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw DataError("lcl_mean_field_params: covariances must be symmetric");

  const Eigen::MatrixXd m = sigma0 + sigma / static_cast<double>(k);
  Eigen::FullPivLU<Eigen::MatrixXd> lu(m);
  if (!lu.isInvertible())
    throw NumericError("lcl_mean_field_params: Sigma0 + Sigma/k is singular");
  const Eigen::VectorXd theta = sigma * lu.solve(mu) / static_cast<double>(k);
  const Eigen::MatrixXd a = (lu.solve(sigma0)).transpose();
  return {theta, a};
}

}  // namespace choicekit
