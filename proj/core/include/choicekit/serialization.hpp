#pragma once

#include <filesystem>
#include <vector>

#include "choicekit/clustering.hpp"
#include "choicekit/dataset.hpp"
#include "choicekit/evaluation.hpp"
#include "choicekit/fit.hpp"
#include "choicekit/propensity.hpp"
#include "choicekit/synthetic.hpp"
#include "choicekit/weights.hpp"

namespace choicekit {

// Model documents are JSON carrying the family, its flags, the flat
// parameter vector, and the id/name lists the parameters are indexed by.
// Loading validates the document against the dataset it will be applied to
// (same item universe in the same order, same covariate/feature columns).
void save_model(const FitResult& result, const ChoiceDataset& data,
                const std::filesystem::path& file);
FitResult load_model(const std::filesystem::path& file, const ChoiceDataset& data);

void save_propensity(const PropensityModel& model, const ChoiceDataset& data,
                     const std::filesystem::path& file);
PropensityModel load_propensity(const std::filesystem::path& file, const ChoiceDataset& data);

// Weights travel as CSV (obs_index,weight) in observation order; loading
// returns them as raw values (callers decide about normalization).
void save_weights(const SampleWeights& weights, const std::filesystem::path& file);
SampleWeights load_weights(const std::filesystem::path& file, std::size_t expected);

// Row-side assignment CSV (row_id,cluster); the optional item-side file uses
// (item_id,cluster). Loading matches rows to dataset observation indices;
// item labels are left empty.
void save_assignment(const ClusterAssignment& assignment, const IncidenceMatrix& incidence,
                     const std::filesystem::path& file);
void save_item_assignment(const ClusterAssignment& assignment,
                          const IncidenceMatrix& incidence,
                          const std::filesystem::path& file);
ClusterAssignment load_assignment(const std::filesystem::path& file,
                                  const ChoiceDataset& data);

void save_lrt_report(const LrtReport& report, const std::filesystem::path& file);
void save_regularity_report(const RegularityReport& report, const ChoiceDataset& data,
                            const std::filesystem::path& file);

// Benchmark rows as CSV with header method,split,c,mean,stderr.
void save_benchmark_csv(const std::vector<BenchmarkRow>& rows,
                        const std::filesystem::path& file);

// World documents carry item embeddings, the pull matrix, the confounding
// strength, the mixture probability, and the seed (chooser draws live in the
// dataset files, not here).
void save_world(const SyntheticWorld& world, const std::filesystem::path& file);
SyntheticWorld load_world(const std::filesystem::path& file);

}  // namespace choicekit
