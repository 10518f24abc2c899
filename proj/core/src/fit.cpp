#include "choicekit/fit.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "choicekit/errors.hpp"
#include "choicekit/rng.hpp"

namespace choicekit {

RpropOutcome rprop_maximize(
    const std::function<double(const Eigen::VectorXd&, Eigen::VectorXd&)>& f,
    Eigen::VectorXd x0, int max_epochs, double grad_sq_tol, const RpropConfig& config,
    RpropState* state) {
  if (max_epochs < 0) throw DataError("rprop_maximize: max_epochs must be >= 0");
  const Eigen::Index n = x0.size();

  RpropState local;
  RpropState& st = state ? *state : local;
  if (!st.initialized) {
    st.step = Eigen::VectorXd::Constant(n, config.delta0);
    st.prev_grad = Eigen::VectorXd::Zero(n);
    st.initialized = true;
  } else if (st.step.size() != n) {
    throw DataError("rprop_maximize: warm-start state has the wrong size");
  }

  RpropOutcome out;
  out.x = std::move(x0);
  Eigen::VectorXd grad(n);
  while (true) {
    const double obj = f(out.x, grad);
    if (!std::isfinite(obj) || !grad.allFinite())
      throw NumericError("non-finite objective at epoch " + std::to_string(out.epochs));
    out.trace.push_back(obj);
    out.grad_norm_sq = grad.squaredNorm();
    if (out.grad_norm_sq < grad_sq_tol) {
      out.converged = true;
      break;
    }
    if (out.epochs >= max_epochs) break;
    for (Eigen::Index i = 0; i < n; ++i) {
      double g = grad[i];
      const double s = g * st.prev_grad[i];
      if (s > 0.0)
        st.step[i] = std::min(st.step[i] * config.eta_plus, config.delta_max);
      else if (s < 0.0) {
        st.step[i] = std::max(st.step[i] * config.eta_minus, config.delta_min);
        g = 0.0;  // skip the move after a sign flip
      }
      if (g > 0.0)
        out.x[i] += st.step[i];
      else if (g < 0.0)
        out.x[i] -= st.step[i];
      st.prev_grad[i] = g;
    }
    ++out.epochs;
  }
  return out;
}

FitResult fit(const ModelSpec& spec, const ChoiceDataset& data,
              const SampleWeights& weights, const FitConfig& config) {
  if (spec.family == Family::mixed_logit)
    throw DataError("fit: mixed logit is trained by EM; call fit_mixed_logit");
  if (weights.size() != data.n_observations())
    throw DataError("fit: weights length does not match the number of observations");
  if (!(config.l2_lambda >= 0.0)) throw DataError("fit: l2_lambda must be >= 0");

  const SampleWeights w =
      config.normalize_weights ? weights.normalized() : weights;

  ChoiceModel model = ChoiceModel::zeros(spec, data);
  model.check_data(data);
  const double lambda = config.l2_lambda;

  auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
    model.params() = x;
    const double ll = model.ll_and_gradient(data, w, &grad);
    grad -= 2.0 * lambda * x;
    return ll - lambda * x.squaredNorm();
  };

  RpropOutcome opt = rprop_maximize(objective, model.params(), config.max_epochs,
                                    config.grad_sq_tol, config.rprop);
  model.params() = opt.x;

  FitResult result{std::move(model), std::move(opt.trace), 0.0, 0.0,
                   opt.epochs, opt.converged, opt.grad_norm_sq};
  result.final_objective = result.objective_trace.back();
  result.final_data_ll = result.model.log_likelihood(data, w);
  return result;
}

namespace {

// log Pr(chosen | C) under a single logit utility row; 0 for singletons.
double logit_log_prob(const Observation& obs, const double* u) {
  const std::size_t s = obs.items.size();
  if (s < 2) return 0.0;
  double m = u[obs.items[0]];
  for (std::size_t t = 1; t < s; ++t) m = std::max(m, u[obs.items[t]]);
  double z = 0.0;
  for (std::size_t t = 0; t < s; ++t) z += std::exp(u[obs.items[t]] - m);
  return u[obs.chosen] - m - std::log(z);
}

}  // namespace

FitResult fit_mixed_logit(int components, const ChoiceDataset& data,
                          const FitConfig& config, const EmConfig& em) {
  const std::size_t n_obs = data.n_observations();
  if (components < 1) throw DataError("fit_mixed_logit: components must be >= 1");
  if (static_cast<std::size_t>(components) > n_obs)
    throw DataError("fit_mixed_logit: more components than observations");
  if (em.max_iters < 1) throw DataError("fit_mixed_logit: max_iters must be >= 1");
  const int k = components;
  const int n = data.n_items();
  const auto start = std::chrono::steady_clock::now();

  // Random responsibilities seed the first M-step.
  Rng rng = make_rng(config.seed);
  Eigen::MatrixXd resp(static_cast<Eigen::Index>(n_obs), k);
  for (std::size_t o = 0; o < n_obs; ++o)
    resp.row(static_cast<Eigen::Index>(o)) = sample_dirichlet_uniform(k, rng).transpose();

  Eigen::VectorXd pi = Eigen::VectorXd::Constant(k, 1.0 / k);
  std::vector<Eigen::VectorXd> u(static_cast<std::size_t>(k),
                                 Eigen::VectorXd::Zero(n));
  std::vector<RpropState> rprop_state(static_cast<std::size_t>(k));
  const double lambda = config.l2_lambda;

  std::vector<double> trace;
  Eigen::VectorXd pi_prev;
  std::vector<Eigen::VectorXd> u_prev;
  Eigen::MatrixXd resp_prev;
  bool converged = false;
  int iters = 0;

  ChoiceModel component = ChoiceModel::logit(Eigen::VectorXd::Zero(n));
  std::vector<double> log_pk(static_cast<std::size_t>(k));

  for (int iter = 0; iter < em.max_iters; ++iter) {
    pi_prev = pi;
    u_prev = u;
    resp_prev = resp;

    // M-step: closed-form mixture weights, warm-started penalized refits.
    pi = resp.colwise().mean().transpose();
    for (int c = 0; c < k; ++c) {
      const SampleWeights w = SampleWeights::raw(resp.col(c));
      auto objective = [&](const Eigen::VectorXd& x, Eigen::VectorXd& grad) {
        component.params() = x;
        const double ll = component.ll_and_gradient(data, w, &grad);
        grad -= 2.0 * lambda * x;
        return ll - lambda * x.squaredNorm();
      };
      RpropOutcome opt =
          rprop_maximize(objective, u[static_cast<std::size_t>(c)], config.max_epochs,
                         config.grad_sq_tol, config.rprop,
                         &rprop_state[static_cast<std::size_t>(c)]);
      u[static_cast<std::size_t>(c)] = std::move(opt.x);
    }

    // E-step plus the mixture data LL at the new parameters.
    double ll = 0.0;
    for (std::size_t o = 0; o < n_obs; ++o) {
      const Observation& obs = data.observations()[o];
      double m = -std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        log_pk[static_cast<std::size_t>(c)] =
            logit_log_prob(obs, u[static_cast<std::size_t>(c)].data());
        m = std::max(m, log_pk[static_cast<std::size_t>(c)]);
      }
      double mix = 0.0;
      for (int c = 0; c < k; ++c) {
        const double v = pi[c] * std::exp(log_pk[static_cast<std::size_t>(c)] - m);
        resp(static_cast<Eigen::Index>(o), c) = v;
        mix += v;
      }
      if (!(mix > 0.0) || !std::isfinite(mix))
        throw NumericError("fit_mixed_logit: degenerate mixture at iteration " +
                           std::to_string(iter));
      resp.row(static_cast<Eigen::Index>(o)) /= mix;
      ll += std::log(mix) + m;
    }

    ++iters;
    if (!trace.empty() && ll < trace.back()) {
      // A finite-accuracy M-step walked downhill; keep the previous iterate.
      pi = pi_prev;
      u = u_prev;
      resp = resp_prev;
      converged = true;
      break;
    }
    const bool small_gain = !trace.empty() && ll - trace.back() < em.ll_tol;
    trace.push_back(ll);
    if (small_gain) {
      converged = true;
      break;
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (elapsed > em.timeout_seconds) break;
  }
  Eigen::MatrixXd u_stack(k, n);
  for (int c = 0; c < k; ++c) u_stack.row(c) = u[static_cast<std::size_t>(c)].transpose();
  ChoiceModel model = ChoiceModel::mixed_logit(pi, u_stack);

  FitResult result{std::move(model), std::move(trace), 0.0, 0.0, iters, converged, 0.0};
  result.final_objective = result.objective_trace.back();
  result.final_data_ll = result.final_objective;
  result.grad_norm_sq =
      result.model.gradient(data, SampleWeights::uniform(n_obs)).squaredNorm();
  return result;
}

}  // namespace choicekit
