#include "choicekit/rng.hpp"

#include "choicekit/errors.hpp"

namespace choicekit {

int sample_categorical(const Eigen::VectorXd& weights, Rng& rng) {
  if (weights.size() == 0) throw DataError("sample_categorical: empty weight vector");
  const double total = weights.sum();
  if (!(total > 0.0) || !std::isfinite(total))
    throw NumericError("sample_categorical: weights must sum to a positive finite value");
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  const double u = unif(rng) * total;
  double acc = 0.0;
  for (int i = 0; i < weights.size(); ++i) {
    acc += weights[i];
    if (u < acc) return i;
  }
  return static_cast<int>(weights.size()) - 1;  // guards against rounding spill
}

Eigen::VectorXd sample_dirichlet_uniform(int k, Rng& rng) {
  if (k < 1) throw DataError("sample_dirichlet_uniform: k must be positive");
  std::exponential_distribution<double> expo(1.0);
  Eigen::VectorXd v(k);
  for (int i = 0; i < k; ++i) v[i] = expo(rng);
  const double s = v.sum();
  if (!(s > 0.0)) return Eigen::VectorXd::Constant(k, 1.0 / k);
  return v / s;
}

Eigen::VectorXd standard_normal_vector(int d, Rng& rng) {
  std::normal_distribution<double> norm(0.0, 1.0);
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v[i] = norm(rng);
  return v;
}

}  // namespace choicekit
