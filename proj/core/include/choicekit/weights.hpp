#pragma once

#include <Eigen/Core>
#include <cmath>
#include <cstddef>
#include <optional>
#include <utility>

#include "choicekit/errors.hpp"

namespace choicekit {

enum class WeightKind { uniform, ipw_raw, ipw_normalized };

// Per-observation weights for weighted maximum likelihood. Entries are
// finite and non-negative; ipw_normalized weights have mean 1 (within
// 1e-12 — the factory rescales by the exact sample mean).
class SampleWeights {
 public:
  static SampleWeights uniform(std::size_t n) {
    return SampleWeights(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(n)),
                         WeightKind::uniform);
  }

  // Raw weights, e.g. 1 / (|unique sets| * propensity). Kept unscaled.
  static SampleWeights raw(Eigen::VectorXd values) {
    validate(values);
    return SampleWeights(std::move(values), WeightKind::ipw_raw);
  }

  // Rescales to mean exactly 1; errors if every weight is zero.
  static SampleWeights mean_normalized(Eigen::VectorXd values) {
    validate(values);
    const double m = values.mean();
    if (!(m > 0.0)) throw DataError("SampleWeights: cannot normalize all-zero weights");
    values /= m;
    return SampleWeights(std::move(values), WeightKind::ipw_normalized);
  }

  const Eigen::VectorXd& values() const { return values_; }
  WeightKind kind() const { return kind_; }
  std::size_t size() const { return static_cast<std::size_t>(values_.size()); }
  double mean() const { return values_.size() == 0 ? 0.0 : values_.mean(); }

  SampleWeights normalized() const { return mean_normalized(values_); }

  // Provenance: quantile at which raw inverse-propensity weights were
  // clipped before (optional) normalization.
  std::optional<double> clip_quantile() const { return clip_quantile_; }
  void set_clip_quantile(double q) { clip_quantile_ = q; }

 private:
  SampleWeights(Eigen::VectorXd values, WeightKind kind)
      : values_(std::move(values)), kind_(kind) {}

  static void validate(const Eigen::VectorXd& values) {
    for (Eigen::Index i = 0; i < values.size(); ++i) {
      if (!std::isfinite(values[i]) || values[i] < 0.0)
        throw DataError("SampleWeights: weights must be finite and non-negative");
    }
  }

  Eigen::VectorXd values_;
  WeightKind kind_;
  std::optional<double> clip_quantile_;
};

}  // namespace choicekit
