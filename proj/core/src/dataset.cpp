#include "choicekit/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "choicekit/errors.hpp"
#include "choicekit/rng.hpp"

namespace choicekit {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string quoted(const std::string& s) { return "'" + s + "'"; }

void check_id_token(const std::string& id, const char* what) {
  if (id.empty()) throw DataError(std::string(what) + ": empty id");
  if (id.find_first_of(",|\"\n\r") != std::string::npos)
    throw DataError(std::string(what) + ": id " + quoted(id) +
                    " contains a delimiter character");
}

double parse_double(const std::string& token, const std::string& where) {
  const char* begin = token.c_str();
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(begin, &end);
  if (end == begin || end != begin + token.size())
    throw DataError(where + ": cannot parse number " + quoted(token));
  if (!std::isfinite(v))
    throw DataError(where + ": non-finite value " + quoted(token));
  return v;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

std::vector<std::string> read_lines(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open " + file.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

bool is_blank(const std::string& s) {
  return s.find_first_not_of(" \t") == std::string::npos;
}

}  // namespace

// ---------- Interner ----------

int Interner::intern(const std::string& name) {
  auto it = index_.find(name);
  if (it != index_.end()) return it->second;
  const int id = static_cast<int>(names_.size());
  names_.push_back(name);
  index_.emplace(name, id);
  return id;
}

std::optional<int> Interner::find(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

const std::string& Interner::name(int index) const {
  if (index < 0 || index >= size())
    throw DataError("Interner: index " + std::to_string(index) + " out of range");
  return names_[static_cast<std::size_t>(index)];
}

// ---------- ChoiceDataset ----------

struct ChoiceDataset::Core {
  std::shared_ptr<const Interner> items;
  std::shared_ptr<const Interner> choosers;
  std::vector<Observation> observations;

  std::shared_ptr<const Eigen::MatrixXd> covariates;  // null when absent
  std::vector<std::string> covariate_names;
  std::shared_ptr<const Eigen::MatrixXd> features;
  std::vector<std::string> feature_names;

  std::vector<std::vector<int>> unique_sets;
  std::vector<int> obs_set_id;
  std::vector<int> set_counts;
  Eigen::MatrixXd set_mean_features;  // empty unless features present
  std::size_t singleton_count = 0;
  int max_set_size = 0;
};

ChoiceDataset::ChoiceDataset(std::shared_ptr<const Core> core) : core_(std::move(core)) {
  if (!core_) throw DataError("ChoiceDataset: null core");
}

namespace {

void check_table(const Eigen::MatrixXd& table, int rows,
                 const std::vector<std::string>& names, const char* what) {
  if (table.rows() != rows)
    throw DataError(std::string(what) + ": expected " + std::to_string(rows) +
                    " rows, got " + std::to_string(table.rows()));
  if (table.cols() != static_cast<Eigen::Index>(names.size()))
    throw DataError(std::string(what) + ": column count does not match names");
  if (table.cols() == 0) throw DataError(std::string(what) + ": no columns");
  if (!table.allFinite()) throw DataError(std::string(what) + ": non-finite entry");
}

std::shared_ptr<const ChoiceDataset::Core> build_core(
    std::shared_ptr<const Interner> items, std::shared_ptr<const Interner> choosers,
    std::vector<Observation> observations,
    std::shared_ptr<const Eigen::MatrixXd> covariates,
    std::vector<std::string> covariate_names,
    std::shared_ptr<const Eigen::MatrixXd> features,
    std::vector<std::string> feature_names) {
  if (!items || !choosers) throw DataError("ChoiceDataset: null interner");
  auto core = std::make_shared<ChoiceDataset::Core>();
  core->items = std::move(items);
  core->choosers = std::move(choosers);
  core->observations = std::move(observations);

  const int n_items = core->items->size();
  const int n_choosers = core->choosers->size();

  std::map<std::vector<int>, int> set_index;
  for (std::size_t o = 0; o < core->observations.size(); ++o) {
    Observation& obs = core->observations[o];
    const std::string where = "observation " + std::to_string(o);
    if (obs.chooser < 0 || obs.chooser >= n_choosers)
      throw DataError(where + ": chooser index out of range");
    if (obs.items.empty()) throw DataError(where + ": empty choice set");
    std::sort(obs.items.begin(), obs.items.end());
    for (std::size_t j = 0; j < obs.items.size(); ++j) {
      if (obs.items[j] < 0 || obs.items[j] >= n_items)
        throw DataError(where + ": item index out of range");
      if (j > 0 && obs.items[j] == obs.items[j - 1])
        throw DataError(where + ": duplicate item " +
                        quoted(core->items->name(obs.items[j])) + " in choice set");
    }
    if (!std::binary_search(obs.items.begin(), obs.items.end(), obs.chosen))
      throw DataError(where + ": chosen item not in choice set");

    auto [it, inserted] =
        set_index.emplace(obs.items, static_cast<int>(core->unique_sets.size()));
    if (inserted) {
      core->unique_sets.push_back(obs.items);
      core->set_counts.push_back(0);
    }
    core->obs_set_id.push_back(it->second);
    core->set_counts[static_cast<std::size_t>(it->second)] += 1;
    if (obs.items.size() == 1) core->singleton_count += 1;
    core->max_set_size = std::max(core->max_set_size, static_cast<int>(obs.items.size()));
  }

  if (covariates) {
    check_table(*covariates, n_choosers, covariate_names, "chooser covariates");
    core->covariates = std::move(covariates);
    core->covariate_names = std::move(covariate_names);
  }
  if (features) {
    check_table(*features, n_items, feature_names, "item features");
    core->features = std::move(features);
    core->feature_names = std::move(feature_names);
    core->set_mean_features.resize(static_cast<Eigen::Index>(core->unique_sets.size()),
                                   core->features->cols());
    for (std::size_t s = 0; s < core->unique_sets.size(); ++s) {
      Eigen::RowVectorXd mean = Eigen::RowVectorXd::Zero(core->features->cols());
      for (int item : core->unique_sets[s]) mean += core->features->row(item);
      core->set_mean_features.row(static_cast<Eigen::Index>(s)) =
          mean / static_cast<double>(core->unique_sets[s].size());
    }
  }
  return core;
}

}  // namespace

ChoiceDataset::ChoiceDataset(std::shared_ptr<const Interner> items,
                             std::shared_ptr<const Interner> choosers,
                             std::vector<Observation> observations)
    : core_(build_core(std::move(items), std::move(choosers), std::move(observations),
                       nullptr, {}, nullptr, {})) {}

ChoiceDataset ChoiceDataset::with_chooser_covariates(
    Eigen::MatrixXd table, std::vector<std::string> names) const {
  auto tbl = std::make_shared<const Eigen::MatrixXd>(std::move(table));
  return ChoiceDataset(build_core(core_->items, core_->choosers, core_->observations,
                                  std::move(tbl), std::move(names), core_->features,
                                  core_->feature_names));
}

ChoiceDataset ChoiceDataset::with_item_features(Eigen::MatrixXd table,
                                                std::vector<std::string> names) const {
  auto tbl = std::make_shared<const Eigen::MatrixXd>(std::move(table));
  return ChoiceDataset(build_core(core_->items, core_->choosers, core_->observations,
                                  core_->covariates, core_->covariate_names,
                                  std::move(tbl), std::move(names)));
}

int ChoiceDataset::n_items() const { return core_->items->size(); }
int ChoiceDataset::n_choosers() const { return core_->choosers->size(); }
std::size_t ChoiceDataset::n_observations() const { return core_->observations.size(); }

const Observation& ChoiceDataset::observation(std::size_t i) const {
  if (i >= core_->observations.size())
    throw DataError("observation index out of range");
  return core_->observations[i];
}

const std::vector<Observation>& ChoiceDataset::observations() const {
  return core_->observations;
}

const Interner& ChoiceDataset::items() const { return *core_->items; }
const Interner& ChoiceDataset::choosers() const { return *core_->choosers; }

bool ChoiceDataset::has_chooser_covariates() const { return core_->covariates != nullptr; }

const Eigen::MatrixXd& ChoiceDataset::chooser_covariates() const {
  if (!core_->covariates) throw DataError("dataset has no chooser covariates");
  return *core_->covariates;
}

int ChoiceDataset::covariate_dim() const {
  return core_->covariates ? static_cast<int>(core_->covariates->cols()) : 0;
}

const std::vector<std::string>& ChoiceDataset::covariate_names() const {
  return core_->covariate_names;
}

bool ChoiceDataset::has_item_features() const { return core_->features != nullptr; }

const Eigen::MatrixXd& ChoiceDataset::item_features() const {
  if (!core_->features) throw DataError("dataset has no item features");
  return *core_->features;
}

int ChoiceDataset::feature_dim() const {
  return core_->features ? static_cast<int>(core_->features->cols()) : 0;
}

const std::vector<std::string>& ChoiceDataset::feature_names() const {
  return core_->feature_names;
}

int ChoiceDataset::n_unique_sets() const {
  return static_cast<int>(core_->unique_sets.size());
}

int ChoiceDataset::set_id(std::size_t obs_index) const {
  if (obs_index >= core_->obs_set_id.size())
    throw DataError("observation index out of range");
  return core_->obs_set_id[obs_index];
}

const std::vector<int>& ChoiceDataset::unique_set(int set_id) const {
  if (set_id < 0 || set_id >= n_unique_sets()) throw DataError("set id out of range");
  return core_->unique_sets[static_cast<std::size_t>(set_id)];
}

int ChoiceDataset::set_count(int set_id) const {
  if (set_id < 0 || set_id >= n_unique_sets()) throw DataError("set id out of range");
  return core_->set_counts[static_cast<std::size_t>(set_id)];
}

const Eigen::MatrixXd& ChoiceDataset::set_mean_features() const {
  if (!core_->features) throw DataError("dataset has no item features");
  return core_->set_mean_features;
}

std::size_t ChoiceDataset::singleton_count() const { return core_->singleton_count; }
int ChoiceDataset::max_set_size() const { return core_->max_set_size; }

// ---------- choices io ----------

namespace {

struct RawObservation {
  std::string chooser;
  std::vector<std::string> items;
  std::string chosen;
};

ChoiceDataset from_raw(const std::vector<RawObservation>& raw) {
  auto items = std::make_shared<Interner>();
  auto choosers = std::make_shared<Interner>();
  std::vector<Observation> observations;
  observations.reserve(raw.size());
  for (const RawObservation& r : raw) {
    Observation obs;
    obs.chooser = choosers->intern(r.chooser);
    obs.items.reserve(r.items.size());
    for (const std::string& it : r.items) obs.items.push_back(items->intern(it));
    obs.chosen = items->intern(r.chosen);
    observations.push_back(std::move(obs));
  }
  return ChoiceDataset(std::move(items), std::move(choosers), std::move(observations));
}

std::vector<std::string> split_set_field(const std::string& field,
                                         const std::string& where) {
  std::vector<std::string> items;
  std::string cur;
  for (char c : field) {
    if (c == '|') {
      items.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  items.push_back(cur);
  for (const std::string& it : items)
    if (it.empty()) throw DataError(where + ": empty item id in choice set");
  return items;
}

std::vector<RawObservation> parse_choices_csv(const std::filesystem::path& file) {
  const auto lines = read_lines(file);
  if (lines.empty()) throw DataError(file.string() + ": empty file");
  if (lines[0] != "chooser,choice_set,chosen")
    throw DataError(file.string() + ": expected header 'chooser,choice_set,chosen'");
  std::vector<RawObservation> raw;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    const std::string where = file.string() + ":" + std::to_string(i + 1);
    const auto fields = split_csv_line(lines[i]);
    if (fields.size() != 3) throw DataError(where + ": expected 3 fields");
    RawObservation r;
    r.chooser = fields[0];
    r.items = split_set_field(fields[1], where);
    r.chosen = fields[2];
    if (r.chooser.empty()) throw DataError(where + ": empty chooser id");
    if (r.chosen.empty()) throw DataError(where + ": empty chosen id");
    raw.push_back(std::move(r));
  }
  return raw;
}

std::vector<RawObservation> parse_choices_jsonl(const std::filesystem::path& file) {
  const auto lines = read_lines(file);
  std::vector<RawObservation> raw;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    const std::string where = file.string() + ":" + std::to_string(i + 1);
    ordered_json j;
    try {
      j = ordered_json::parse(lines[i]);
    } catch (const std::exception& e) {
      throw DataError(where + ": invalid JSON (" + e.what() + ")");
    }
    if (!j.is_object() || !j.contains("chooser") || !j.contains("choice_set") ||
        !j.contains("chosen"))
      throw DataError(where + ": expected object with chooser, choice_set, chosen");
    if (!j["chooser"].is_string() || !j["chosen"].is_string() ||
        !j["choice_set"].is_array())
      throw DataError(where + ": chooser/chosen must be strings, choice_set an array");
    RawObservation r;
    r.chooser = j["chooser"].get<std::string>();
    for (const auto& it : j["choice_set"]) {
      if (!it.is_string()) throw DataError(where + ": choice_set entries must be strings");
      r.items.push_back(it.get<std::string>());
    }
    r.chosen = j["chosen"].get<std::string>();
    raw.push_back(std::move(r));
  }
  return raw;
}

}  // namespace

ChoiceDataset load_choices(const std::filesystem::path& file, FileFormat format) {
  auto raw = format == FileFormat::csv ? parse_choices_csv(file)
                                       : parse_choices_jsonl(file);
  if (raw.empty()) throw DataError(file.string() + ": no observations");
  return from_raw(raw);
}

void save_choices(const ChoiceDataset& data, const std::filesystem::path& file,
                  FileFormat format) {
  for (const std::string& id : data.items().names()) check_id_token(id, "save_choices");
  for (const std::string& id : data.choosers().names()) check_id_token(id, "save_choices");
  std::ofstream out(file);
  if (!out) throw DataError("cannot write " + file.string());
  if (format == FileFormat::csv) {
    out << "chooser,choice_set,chosen\n";
    for (const Observation& obs : data.observations()) {
      out << data.choosers().name(obs.chooser) << ',';
      for (std::size_t j = 0; j < obs.items.size(); ++j) {
        if (j > 0) out << '|';
        out << data.items().name(obs.items[j]);
      }
      out << ',' << data.items().name(obs.chosen) << '\n';
    }
  } else {
    for (const Observation& obs : data.observations()) {
      ordered_json j;
      j["chooser"] = data.choosers().name(obs.chooser);
      auto arr = ordered_json::array();
      for (int it : obs.items) arr.push_back(data.items().name(it));
      j["choice_set"] = std::move(arr);
      j["chosen"] = data.items().name(obs.chosen);
      out << j.dump() << '\n';
    }
  }
  if (!out) throw DataError("failed writing " + file.string());
}

// ---------- covariate / feature io ----------

namespace {

// Parses a table keyed by `key_column` ("chooser" or "item"); returns one row
// per key in `keys` order. Every key must appear exactly once, no strangers.
std::pair<Eigen::MatrixXd, std::vector<std::string>> load_keyed_table(
    const std::filesystem::path& file, FileFormat format, const std::string& key_column,
    const Interner& keys) {
  std::vector<std::string> names;
  std::vector<std::pair<std::string, std::vector<double>>> rows;

  if (format == FileFormat::csv) {
    const auto lines = read_lines(file);
    if (lines.empty()) throw DataError(file.string() + ": empty file");
    auto header = split_csv_line(lines[0]);
    if (header.empty() || header[0] != key_column)
      throw DataError(file.string() + ": first header column must be '" + key_column + "'");
    if (header.size() < 2) throw DataError(file.string() + ": no value columns");
    names.assign(header.begin() + 1, header.end());
    for (std::size_t i = 1; i < lines.size(); ++i) {
      if (is_blank(lines[i])) continue;
      const std::string where = file.string() + ":" + std::to_string(i + 1);
      auto fields = split_csv_line(lines[i]);
      if (fields.size() != header.size())
        throw DataError(where + ": expected " + std::to_string(header.size()) + " fields");
      std::vector<double> vals;
      vals.reserve(fields.size() - 1);
      for (std::size_t c = 1; c < fields.size(); ++c)
        vals.push_back(parse_double(fields[c], where));
      rows.emplace_back(fields[0], std::move(vals));
    }
  } else {
    const auto lines = read_lines(file);
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (is_blank(lines[i])) continue;
      const std::string where = file.string() + ":" + std::to_string(i + 1);
      ordered_json j;
      try {
        j = ordered_json::parse(lines[i]);
      } catch (const std::exception& e) {
        throw DataError(where + ": invalid JSON (" + e.what() + ")");
      }
      if (!j.is_object() || !j.contains(key_column) || !j[key_column].is_string())
        throw DataError(where + ": expected object with string '" + key_column + "'");
      std::vector<std::string> line_names;
      std::vector<double> vals;
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (it.key() == key_column) continue;
        if (!it.value().is_number())
          throw DataError(where + ": value '" + it.key() + "' must be a number");
        line_names.push_back(it.key());
        vals.push_back(it.value().get<double>());
        if (!std::isfinite(vals.back()))
          throw DataError(where + ": non-finite value for '" + it.key() + "'");
      }
      if (line_names.empty()) throw DataError(where + ": no value fields");
      if (names.empty())
        names = line_names;
      else if (names != line_names)
        throw DataError(where + ": field names differ from first record");
      rows.emplace_back(j[key_column].get<std::string>(), std::move(vals));
    }
    if (rows.empty()) throw DataError(file.string() + ": no records");
  }

  Eigen::MatrixXd table(keys.size(), static_cast<Eigen::Index>(names.size()));
  std::vector<bool> seen(static_cast<std::size_t>(keys.size()), false);
  for (const auto& [key, vals] : rows) {
    auto idx = keys.find(key);
    if (!idx)
      throw DataError(file.string() + ": " + key_column + " " + quoted(key) +
                      " does not appear in the choice data");
    if (seen[static_cast<std::size_t>(*idx)])
      throw DataError(file.string() + ": duplicate row for " + key_column + " " + quoted(key));
    seen[static_cast<std::size_t>(*idx)] = true;
    for (std::size_t c = 0; c < vals.size(); ++c)
      table(*idx, static_cast<Eigen::Index>(c)) = vals[c];
  }
  for (int k = 0; k < keys.size(); ++k)
    if (!seen[static_cast<std::size_t>(k)])
      throw DataError(file.string() + ": missing row for " + key_column + " " +
                      quoted(keys.name(k)));
  return {std::move(table), std::move(names)};
}

void save_keyed_table(const std::filesystem::path& file, const std::string& key_column,
                      const Interner& keys, const Eigen::MatrixXd& table,
                      const std::vector<std::string>& names) {
  std::ofstream out(file);
  if (!out) throw DataError("cannot write " + file.string());
  out << key_column;
  for (const std::string& n : names) {
    check_id_token(n, "column name");
    out << ',' << n;
  }
  out << '\n';
  for (int r = 0; r < keys.size(); ++r) {
    check_id_token(keys.name(r), key_column.c_str());
    out << keys.name(r);
    for (Eigen::Index c = 0; c < table.cols(); ++c) out << ',' << format_double(table(r, c));
    out << '\n';
  }
  if (!out) throw DataError("failed writing " + file.string());
}

}  // namespace

ChoiceDataset attach_covariates(const ChoiceDataset& data,
                                const std::filesystem::path& file, FileFormat format) {
  auto [table, names] = load_keyed_table(file, format, "chooser", data.choosers());
  return data.with_chooser_covariates(std::move(table), std::move(names));
}

ChoiceDataset attach_item_features(const ChoiceDataset& data,
                                   const std::filesystem::path& file, FileFormat format) {
  auto [table, names] = load_keyed_table(file, format, "item", data.items());
  return data.with_item_features(std::move(table), std::move(names));
}

void save_covariates(const ChoiceDataset& data, const std::filesystem::path& file) {
  save_keyed_table(file, "chooser", data.choosers(), data.chooser_covariates(),
                   data.covariate_names());
}

void save_item_features(const ChoiceDataset& data, const std::filesystem::path& file) {
  save_keyed_table(file, "item", data.items(), data.item_features(),
                   data.feature_names());
}

// ---------- splits and re-encodings ----------

std::pair<ChoiceDataset, ChoiceDataset> split(const ChoiceDataset& data,
                                              double train_fraction, std::uint64_t seed) {
  const std::size_t n = data.n_observations();
  if (n < 2) throw DataError("split: need at least 2 observations");
  if (!(train_fraction > 0.0) || !(train_fraction < 1.0))
    throw DataError("split: train_fraction must be in (0, 1)");
  std::size_t n_train =
      static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, 1, n - 1);

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = make_rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<std::size_t> train_idx(order.begin(), order.begin() + n_train);
  std::vector<std::size_t> test_idx(order.begin() + n_train, order.end());
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {subset(data, train_idx), subset(data, test_idx)};
}

ChoiceDataset subset(const ChoiceDataset& data, const std::vector<std::size_t>& indices) {
  if (indices.empty()) throw DataError("subset: empty index list");
  std::vector<Observation> obs;
  obs.reserve(indices.size());
  for (std::size_t i : indices) obs.push_back(data.observation(i));
  auto items = std::make_shared<Interner>(data.items());
  auto choosers = std::make_shared<Interner>(data.choosers());
  ChoiceDataset out(std::move(items), std::move(choosers), std::move(obs));
  if (data.has_chooser_covariates())
    out = out.with_chooser_covariates(data.chooser_covariates(), data.covariate_names());
  if (data.has_item_features())
    out = out.with_item_features(data.item_features(), data.feature_names());
  return out;
}

ChoiceDataset indicator_encode(const ChoiceDataset& data) {
  const std::size_t n = data.n_observations();
  const int n_items = data.n_items();
  auto items = std::make_shared<Interner>(data.items());
  auto choosers = std::make_shared<Interner>();
  std::vector<Observation> obs;
  obs.reserve(n);
  Eigen::MatrixXd indicators = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n), n_items);
  for (std::size_t o = 0; o < n; ++o) {
    Observation copy = data.observation(o);
    copy.chooser = choosers->intern("#" + std::to_string(o));
    for (int item : copy.items) indicators(static_cast<Eigen::Index>(o), item) = 1.0;
    obs.push_back(std::move(copy));
  }
  ChoiceDataset out(std::move(items), std::move(choosers), std::move(obs));
  std::vector<std::string> names = data.items().names();
  out = out.with_chooser_covariates(std::move(indicators), std::move(names));
  if (data.has_item_features())
    out = out.with_item_features(data.item_features(), data.feature_names());
  return out;
}

}  // namespace choicekit
