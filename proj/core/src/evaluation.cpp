#include "choicekit/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "choicekit/errors.hpp"
#include "choicekit/propensity.hpp"
#include "choicekit/rng.hpp"
#include "choicekit/stats.hpp"
#include "choicekit/weights.hpp"

namespace choicekit {

double mean_relative_position(const ChoiceModel& m, const ChoiceDataset& ds) {
  m.check_data(ds);
  constexpr double kTieTol = 1e-12;
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t o = 0; o < ds.n_observations(); ++o) {
    const Observation& obs = ds.observation(o);
    const int size = static_cast<int>(obs.items.size());
    if (size < 2) continue;
    const Eigen::VectorXd probs = m.choice_probabilities(ds, o);
    int chosen_pos = -1;
    for (int t = 0; t < size; ++t) {
      if (obs.items[static_cast<std::size_t>(t)] == obs.chosen) {
        chosen_pos = t;
        break;
      }
    }
    const double pc = probs(chosen_pos);
    int greater = 0;
    int tied = 0;  // includes the chosen item itself
    for (int t = 0; t < size; ++t) {
      const double diff = probs(t) - pc;
      if (std::abs(diff) <= kTieTol) {
        ++tied;
      } else if (diff > 0.0) {
        ++greater;
      }
    }
    const double rank = greater + 0.5 * (tied + 1);  // mean tied rank, 1-based
    total += 1.0 - (rank - 1.0) / (size - 1.0);
    ++used;
  }
  if (used == 0) {
    throw DataError("mean_relative_position: no observations with at least two items");
  }
  return total / static_cast<double>(used);
}

namespace {

bool nested_families(Family restricted, Family full) {
  if (restricted == full) return true;
  static constexpr std::pair<Family, Family> kNested[] = {
      {Family::logit, Family::mnl},  {Family::logit, Family::cdm},
      {Family::mnl, Family::mcdm},   {Family::cdm, Family::mcdm},
      {Family::cl, Family::cml},     {Family::cl, Family::lcl},
      {Family::cml, Family::mlcl},   {Family::lcl, Family::mlcl}};
  for (const auto& [r, f] : kNested) {
    if (r == restricted && f == full) return true;
  }
  return false;
}

}  // namespace

LrtReport lrt(const FitResult& restricted, const FitResult& full, const ChoiceDataset& ds) {
  const Family rf = restricted.model.spec().family;
  const Family ff = full.model.spec().family;
  if (!nested_families(rf, ff)) {
    throw DataError("lrt: family '" + std::string(family_name(rf)) +
                    "' is not nested in '" + std::string(family_name(ff)) + "'");
  }
  const SampleWeights uniform = SampleWeights::uniform(ds.n_observations());
  LrtReport report;
  report.restricted_ll = restricted.model.log_likelihood(ds, uniform);
  report.full_ll = full.model.log_likelihood(ds, uniform);
  report.statistic = 2.0 * (report.full_ll - report.restricted_ll);
  report.df = std::max(1, full.model.n_params() - restricted.model.n_params());
  report.p_value =
      report.statistic <= 0.0 ? 1.0 : chi_squared_sf(report.statistic, report.df);
  return report;
}

RegularityReport detect_regularity_violations(const ChoiceDataset& ds, int min_count,
                                              double alpha, bool general_pairs) {
  if (min_count < 1) throw DataError("detect_regularity_violations: min_count must be >= 1");
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    throw DataError("detect_regularity_violations: alpha must lie in [0, 1]");
  }

  RegularityReport report;
  report.alpha = alpha;
  report.min_count = min_count;

  // Qualifying sets and their per-item chosen counts.
  std::vector<int> candidates;
  for (int s = 0; s < ds.n_unique_sets(); ++s) {
    if (ds.set_count(s) >= min_count) candidates.push_back(s);
  }
  std::map<std::pair<int, int>, long long> chosen_counts;  // (set_id, item) -> count
  for (std::size_t o = 0; o < ds.n_observations(); ++o) {
    const int s = ds.set_id(o);
    if (ds.set_count(s) >= min_count) {
      chosen_counts[{s, ds.observation(o).chosen}] += 1;
    }
  }
  auto chosen = [&chosen_counts](int set_id, int item) -> long long {
    const auto it = chosen_counts.find({set_id, item});
    return it == chosen_counts.end() ? 0 : it->second;
  };

  for (const int base : candidates) {
    const std::vector<int>& base_set = ds.unique_set(base);
    for (const int super : candidates) {
      if (super == base) continue;
      const std::vector<int>& super_set = ds.unique_set(super);
      if (super_set.size() <= base_set.size()) continue;
      if (!general_pairs && super_set.size() != base_set.size() + 1) continue;
      if (!std::includes(super_set.begin(), super_set.end(), base_set.begin(),
                         base_set.end())) {
        continue;
      }
      report.pairs_examined += 1;

      const long long n_base = ds.set_count(base);
      const long long n_super = ds.set_count(super);
      for (const int item : base_set) {
        const long long k_base = chosen(base, item);
        const long long k_super = chosen(super, item);
        const double rate_base = static_cast<double>(k_base) / static_cast<double>(n_base);
        const double rate_super =
            static_cast<double>(k_super) / static_cast<double>(n_super);
        if (!(rate_super > rate_base)) continue;
        report.tests_performed += 1;
        const double p =
            fisher_exact_two_sided(k_base, n_base - k_base, k_super, n_super - k_super);
        if (p <= alpha) {
          RegularityFinding finding;
          finding.base_set = base_set;
          finding.super_set = super_set;
          finding.item = item;
          finding.base_count = n_base;
          finding.base_chosen = k_base;
          finding.super_count = n_super;
          finding.super_chosen = k_super;
          finding.base_rate = rate_base;
          finding.super_rate = rate_super;
          finding.p_value = p;
          report.findings.push_back(std::move(finding));
        }
      }
    }
  }

  std::sort(report.findings.begin(), report.findings.end(),
            [](const RegularityFinding& a, const RegularityFinding& b) {
              if (a.p_value != b.p_value) return a.p_value < b.p_value;
              if (a.base_set != b.base_set) return a.base_set < b.base_set;
              if (a.super_set != b.super_set) return a.super_set < b.super_set;
              return a.item < b.item;
            });
  return report;
}

std::vector<BenchmarkRow> counterfactual_benchmark(const SyntheticWorld& world,
                                                   const std::vector<ModelSpec>& methods,
                                                   int n_train, int n_trials,
                                                   std::uint64_t seed,
                                                   const BenchmarkOptions& options) {
  if (methods.empty()) throw DataError("counterfactual_benchmark: no methods given");
  if (n_train < 1) throw DataError("counterfactual_benchmark: n_train must be positive");
  if (n_trials < 1) throw DataError("counterfactual_benchmark: n_trials must be positive");
  if (options.n_confounded_test < 1 || options.n_counterfactual_test < 1) {
    throw DataError("counterfactual_benchmark: test sizes must be positive");
  }

  struct Cell {
    std::vector<double> values;
  };
  const std::size_t n_methods = methods.size() * (options.with_ipw ? 2 : 1);
  std::vector<Cell> cells(n_methods * 2);  // method-major, split-minor

  for (int trial = 0; trial < n_trials; ++trial) {
    const std::uint64_t base = derive_seed(seed, static_cast<std::uint64_t>(trial));
    const ChoiceDataset train = sample_confounded(world, n_train, derive_seed(base, 0));
    const ChoiceDataset conf_test =
        sample_confounded(world, options.n_confounded_test, derive_seed(base, 1));
    const ChoiceDataset cf_test =
        sample_uniform_sets(world, options.n_counterfactual_test, derive_seed(base, 2));

    SampleWeights ipw = SampleWeights::uniform(train.n_observations());
    if (options.with_ipw) {
      const PerItemLogistic propensity = fit_item_logistic(train, options.fit);
      ipw = ipw_weights(PropensityModel(propensity), train, options.ipw_clip_quantile);
    }

    std::size_t cell = 0;
    for (const ModelSpec& spec : methods) {
      const int variants = options.with_ipw ? 2 : 1;
      for (int variant = 0; variant < variants; ++variant) {
        const SampleWeights& w =
            variant == 0 ? SampleWeights::uniform(train.n_observations()) : ipw;
        const FitResult res = fit(spec, train, w, options.fit);
        cells[cell++].values.push_back(mean_relative_position(res.model, conf_test));
        cells[cell++].values.push_back(mean_relative_position(res.model, cf_test));
      }
    }
  }

  std::vector<BenchmarkRow> rows;
  rows.reserve(cells.size());
  std::size_t cell = 0;
  for (const ModelSpec& spec : methods) {
    const int variants = options.with_ipw ? 2 : 1;
    for (int variant = 0; variant < variants; ++variant) {
      const std::string method =
          std::string(family_name(spec.family)) + (variant == 1 ? "+ipw" : "");
      for (const char* split : {"confounded", "counterfactual"}) {
        const std::vector<double>& vals = cells[cell++].values;
        double mean = 0.0;
        for (double v : vals) mean += v;
        mean /= static_cast<double>(vals.size());
        double var = 0.0;
        for (double v : vals) var += (v - mean) * (v - mean);
        const double se = vals.size() > 1
                              ? std::sqrt(var / static_cast<double>(vals.size() - 1) /
                                          static_cast<double>(vals.size()))
                              : 0.0;
        BenchmarkRow row;
        row.method = method;
        row.split = split;
        row.confounding = world.confounding_strength;
        row.mean = mean;
        row.std_error = se;
        row.trials = static_cast<int>(vals.size());
        rows.push_back(std::move(row));
      }
    }
  }
  return rows;
}

}  // namespace choicekit
