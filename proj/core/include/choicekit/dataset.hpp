#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace choicekit {

// Bijective string <-> dense index map. Indices are assigned in first-seen
// order and never change once assigned.
class Interner {
 public:
  int intern(const std::string& name);
  std::optional<int> find(const std::string& name) const;
  const std::string& name(int index) const;  // errors on out-of-range index
  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
};

struct Observation {
  int chooser = -1;
  std::vector<int> items;  // strictly increasing dense item indices, non-empty
  int chosen = -1;         // element of items
};

// Immutable choice data: observations over interned choosers/items, optional
// chooser covariates (one row per chooser) and item features (one row per
// item), plus a registry of the distinct choice sets. Copies are cheap (the
// payload is shared); all mutating operations return new datasets.
class ChoiceDataset {
 public:
  ChoiceDataset(std::shared_ptr<const Interner> items,
                std::shared_ptr<const Interner> choosers,
                std::vector<Observation> observations);

  // Returns a copy with the table attached; rows are indexed by dense
  // chooser / item index and must be finite.
  ChoiceDataset with_chooser_covariates(Eigen::MatrixXd table,
                                        std::vector<std::string> names) const;
  ChoiceDataset with_item_features(Eigen::MatrixXd table,
                                   std::vector<std::string> names) const;

  int n_items() const;
  int n_choosers() const;
  std::size_t n_observations() const;
  const Observation& observation(std::size_t i) const;
  const std::vector<Observation>& observations() const;
  const Interner& items() const;
  const Interner& choosers() const;

  bool has_chooser_covariates() const;
  const Eigen::MatrixXd& chooser_covariates() const;  // n_choosers x d_x
  int covariate_dim() const;
  const std::vector<std::string>& covariate_names() const;

  bool has_item_features() const;
  const Eigen::MatrixXd& item_features() const;  // n_items x d_y
  int feature_dim() const;
  const std::vector<std::string>& feature_names() const;

  // Distinct choice sets, ids assigned in first-appearance order.
  int n_unique_sets() const;
  int set_id(std::size_t obs_index) const;
  const std::vector<int>& unique_set(int set_id) const;
  int set_count(int set_id) const;  // observations carrying this set
  // Mean item-feature vector of a set (requires item features).
  const Eigen::MatrixXd& set_mean_features() const;  // n_unique_sets x d_y

  std::size_t singleton_count() const;  // observations with |set| == 1
  int max_set_size() const;

  // Internal shared payload; defined in the implementation file. The pointer
  // constructor is the plumbing every factory funnels through — it is not
  // meant to be called with hand-built cores.
  struct Core;
  explicit ChoiceDataset(std::shared_ptr<const Core> core);

 private:
  std::shared_ptr<const Core> core_;
};

enum class FileFormat { csv, jsonl };

// choices files: CSV with header chooser,choice_set,chosen (choice_set is
// '|'-separated), or JSONL with objects
// {"chooser": str, "choice_set": [str, ...], "chosen": str}.
ChoiceDataset load_choices(const std::filesystem::path& file, FileFormat format);
void save_choices(const ChoiceDataset& data, const std::filesystem::path& file,
                  FileFormat format);

// covariates: CSV header chooser,<name>,... or JSONL {"chooser": str,
// <name>: number, ...}; exactly one row per dataset chooser, finite values.
// item features use the same layouts keyed by "item".
ChoiceDataset attach_covariates(const ChoiceDataset& data,
                                const std::filesystem::path& file, FileFormat format);
ChoiceDataset attach_item_features(const ChoiceDataset& data,
                                   const std::filesystem::path& file, FileFormat format);
void save_covariates(const ChoiceDataset& data, const std::filesystem::path& file);
void save_item_features(const ChoiceDataset& data, const std::filesystem::path& file);

// Disjoint partition by uniform shuffle under the seed. The train side gets
// floor(train_fraction * n) observations, clamped so both sides are
// non-empty; observations keep their original relative order.
std::pair<ChoiceDataset, ChoiceDataset> split(const ChoiceDataset& data,
                                              double train_fraction,
                                              std::uint64_t seed);

// New dataset holding the given observations (indices may repeat), sharing
// interners and tables with the original.
ChoiceDataset subset(const ChoiceDataset& data, const std::vector<std::size_t>& indices);

// Re-keys every observation to a fresh pseudo-chooser whose covariate row is
// the 0/1 indicator vector of the observation's choice set (d_x = n_items).
// The bridge between set-indicator multinomial logit and context effects.
ChoiceDataset indicator_encode(const ChoiceDataset& data);

}  // namespace choicekit
