// Small dataset builders shared across the test binaries.
#pragma once

#include <Eigen/Core>
#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "choicekit/dataset.hpp"

namespace helpers {

struct Row {
  std::string chooser;
  std::vector<std::string> set;
  std::string chosen;
};

inline choicekit::ChoiceDataset make_dataset(const std::vector<Row>& rows) {
  auto items = std::make_shared<choicekit::Interner>();
  auto choosers = std::make_shared<choicekit::Interner>();
  std::vector<choicekit::Observation> obs;
  obs.reserve(rows.size());
  for (const Row& row : rows) {
    choicekit::Observation o;
    o.chooser = choosers->intern(row.chooser);
    for (const std::string& name : row.set) o.items.push_back(items->intern(name));
    std::sort(o.items.begin(), o.items.end());
    o.chosen = items->intern(row.chosen);
    obs.push_back(std::move(o));
  }
  return choicekit::ChoiceDataset(std::move(items), std::move(choosers), std::move(obs));
}

// Random dataset with one chooser per observation. Set sizes vary in
// [2, n_items]; covariates / features are standard normal when requested
// (dimension 0 omits the table).
inline choicekit::ChoiceDataset random_dataset(int n_items, int n_obs, int d_x, int d_y,
                                               std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> size_dist(2, n_items);
  std::normal_distribution<double> normal(0.0, 1.0);

  auto items = std::make_shared<choicekit::Interner>();
  for (int i = 0; i < n_items; ++i) items->intern("item" + std::to_string(i));
  auto choosers = std::make_shared<choicekit::Interner>();

  std::vector<choicekit::Observation> obs;
  obs.reserve(static_cast<std::size_t>(n_obs));
  std::vector<int> pool(static_cast<std::size_t>(n_items));
  for (int i = 0; i < n_items; ++i) pool[static_cast<std::size_t>(i)] = i;
  for (int o = 0; o < n_obs; ++o) {
    choicekit::Observation ob;
    ob.chooser = choosers->intern("c" + std::to_string(o));
    const int size = size_dist(rng);
    std::shuffle(pool.begin(), pool.end(), rng);
    ob.items.assign(pool.begin(), pool.begin() + size);
    std::sort(ob.items.begin(), ob.items.end());
    std::uniform_int_distribution<int> pick(0, size - 1);
    ob.chosen = ob.items[static_cast<std::size_t>(pick(rng))];
    obs.push_back(std::move(ob));
  }
  choicekit::ChoiceDataset data(std::move(items), std::move(choosers), std::move(obs));

  if (d_x > 0) {
    Eigen::MatrixXd x(n_obs, d_x);
    for (int r = 0; r < n_obs; ++r)
      for (int c = 0; c < d_x; ++c) x(r, c) = normal(rng);
    std::vector<std::string> names;
    for (int c = 0; c < d_x; ++c) names.push_back("x" + std::to_string(c));
    data = data.with_chooser_covariates(std::move(x), std::move(names));
  }
  if (d_y > 0) {
    Eigen::MatrixXd y(n_items, d_y);
    for (int r = 0; r < n_items; ++r)
      for (int c = 0; c < d_y; ++c) y(r, c) = normal(rng);
    std::vector<std::string> names;
    for (int c = 0; c < d_y; ++c) names.push_back("y" + std::to_string(c));
    data = data.with_item_features(std::move(y), std::move(names));
  }
  return data;
}

// Unique scratch directory under the system temp root, removed on
// destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    auto root = std::filesystem::temp_directory_path();
    for (int attempt = 0; attempt < 1000; ++attempt) {
      auto candidate = root / (tag + "-" + std::to_string(counter_++));
      std::error_code ec;
      if (std::filesystem::create_directory(candidate, ec)) {
        path_ = candidate;
        return;
      }
    }
    throw std::runtime_error("TempDir: could not create a scratch directory");
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path file(const std::string& name) const { return path_ / name; }

 private:
  static inline int counter_ = 0;
  std::filesystem::path path_;
};

}  // namespace helpers
