#include "choicekit/serialization.hpp"

#include <Eigen/Core>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "choicekit/errors.hpp"
#include "choicekit/version.hpp"

namespace choicekit {

namespace {

using json = nlohmann::ordered_json;

json load_json(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open '" + file.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("'" + file.string() + "' is not valid JSON: " + e.what());
  }
}

void write_json(const json& doc, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw DataError("cannot write '" + file.string() + "'");
  out << doc.dump(2) << '\n';
  if (!out) throw DataError("failed while writing '" + file.string() + "'");
}

json matrix_to_json(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const json& j, const char* what) {
  if (!j.is_array() || j.empty() || !j.front().is_array()) {
    throw DataError(std::string(what) + " must be a non-empty array of rows");
  }
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  const Eigen::Index cols = static_cast<Eigen::Index>(j.front().size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const json& row = j[static_cast<std::size_t>(i)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
      throw DataError(std::string(what) + " rows have inconsistent lengths");
    }
    for (Eigen::Index c = 0; c < cols; ++c) {
      const json& cell = row[static_cast<std::size_t>(c)];
      if (!cell.is_number()) throw DataError(std::string(what) + " entries must be numbers");
      m(i, c) = cell.get<double>();
    }
  }
  return m;
}

Eigen::VectorXd vector_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw DataError(std::string(what) + " must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const json& cell = j[static_cast<std::size_t>(i)];
    if (!cell.is_number()) throw DataError(std::string(what) + " entries must be numbers");
    v(i) = cell.get<double>();
  }
  return v;
}

std::vector<std::string> strings_from_json(const json& j, const char* what) {
  if (!j.is_array()) throw DataError(std::string(what) + " must be an array");
  std::vector<std::string> out;
  out.reserve(j.size());
  for (const json& cell : j) {
    if (!cell.is_string()) throw DataError(std::string(what) + " entries must be strings");
    out.push_back(cell.get<std::string>());
  }
  return out;
}

const json& require(const json& doc, const char* key, const std::filesystem::path& file) {
  const auto it = doc.find(key);
  if (it == doc.end()) {
    throw DataError("'" + file.string() + "' is missing the '" + key + "' field");
  }
  return *it;
}

void check_names(const std::vector<std::string>& doc_names,
                 const std::vector<std::string>& data_names, const char* what,
                 const std::filesystem::path& file) {
  if (doc_names != data_names) {
    throw DataError("'" + file.string() + "': " + what +
                    " do not match the dataset (same entries in the same order required)");
  }
}

}  // namespace

void save_model(const FitResult& result, const ChoiceDataset& data,
                const std::filesystem::path& file) {
  const ChoiceModel& m = result.model;
  json doc;
  doc["kind"] = "choicekit-model";
  doc["library_version"] = kVersionString;
  doc["family"] = family_name(m.family());
  doc["self_pulls"] = m.spec().self_pulls;
  doc["item_intercepts"] = m.spec().item_intercepts;
  doc["mixture_components"] = m.spec().mixture_components;
  if (m.n_items() > 0) doc["item_ids"] = data.items().names();
  if (m.covariate_dim() > 0) doc["covariate_names"] = data.covariate_names();
  if (m.feature_dim() > 0) doc["feature_names"] = data.feature_names();
  json params = json::array();
  for (Eigen::Index i = 0; i < m.params().size(); ++i) params.push_back(m.params()(i));
  doc["params"] = std::move(params);
  json fitj;
  fitj["final_objective"] = result.final_objective;
  fitj["final_data_ll"] = result.final_data_ll;
  fitj["epochs"] = result.epochs;
  fitj["converged"] = result.converged;
  fitj["grad_norm_sq"] = result.grad_norm_sq;
  fitj["objective_trace"] = result.objective_trace;
  doc["fit"] = std::move(fitj);
  write_json(doc, file);
}

FitResult load_model(const std::filesystem::path& file, const ChoiceDataset& data) {
  const json doc = load_json(file);
  if (doc.value("kind", "") != "choicekit-model") {
    throw DataError("'" + file.string() + "' is not a model document");
  }
  ModelSpec spec;
  spec.family = family_from_name(require(doc, "family", file).get<std::string>());
  spec.self_pulls = doc.value("self_pulls", false);
  spec.item_intercepts = doc.value("item_intercepts", true);
  spec.mixture_components = doc.value("mixture_components", 1);

  ChoiceModel model = ChoiceModel::zeros(spec, data);
  if (model.n_items() > 0) {
    check_names(strings_from_json(require(doc, "item_ids", file), "item_ids"),
                data.items().names(), "item ids", file);
  }
  if (model.covariate_dim() > 0) {
    check_names(strings_from_json(require(doc, "covariate_names", file), "covariate_names"),
                data.covariate_names(), "covariate names", file);
  }
  if (model.feature_dim() > 0) {
    check_names(strings_from_json(require(doc, "feature_names", file), "feature_names"),
                data.feature_names(), "feature names", file);
  }

  const Eigen::VectorXd params = vector_from_json(require(doc, "params", file), "params");
  if (params.size() != model.params().size()) {
    throw DataError("'" + file.string() + "' carries " + std::to_string(params.size()) +
                    " parameters where the family shape needs " +
                    std::to_string(model.params().size()));
  }
  if (!params.allFinite()) {
    throw DataError("'" + file.string() + "' contains non-finite parameters");
  }
  if (spec.family == Family::mixed_logit) {
    const int k = spec.mixture_components;
    double total = 0.0;
    for (int c = 0; c < k; ++c) {
      if (params(c) < 0.0) {
        throw DataError("'" + file.string() + "' has negative mixture weights");
      }
      total += params(c);
    }
    if (std::abs(total - 1.0) > 1e-9) {
      throw DataError("'" + file.string() + "' mixture weights do not sum to 1");
    }
  }
  model.params() = params;

  FitResult result{std::move(model), {}, 0.0, 0.0, 0, false, 0.0};
  if (const auto it = doc.find("fit"); it != doc.end() && it->is_object()) {
    const json& fitj = *it;
    result.final_objective = fitj.value("final_objective", 0.0);
    result.final_data_ll = fitj.value("final_data_ll", 0.0);
    result.epochs = fitj.value("epochs", 0);
    result.converged = fitj.value("converged", false);
    result.grad_norm_sq = fitj.value("grad_norm_sq", 0.0);
    if (const auto tr = fitj.find("objective_trace"); tr != fitj.end() && tr->is_array()) {
      result.objective_trace = tr->get<std::vector<double>>();
    }
  }
  return result;
}

void save_propensity(const PropensityModel& model, const ChoiceDataset& data,
                     const std::filesystem::path& file) {
  json doc;
  doc["kind"] = "choicekit-propensity";
  doc["library_version"] = kVersionString;
  if (const auto* logistic = std::get_if<PerItemLogistic>(&model)) {
    doc["model"] = "item-logistic";
    doc["item_ids"] = data.items().names();
    doc["covariate_names"] = data.covariate_names();
    doc["coefficients"] = matrix_to_json(logistic->coefficients);
    json ic = json::array();
    for (Eigen::Index i = 0; i < logistic->intercepts.size(); ++i) {
      ic.push_back(logistic->intercepts(i));
    }
    doc["intercepts"] = std::move(ic);
  } else {
    const auto& gauss = std::get<AffineGaussian>(model);
    doc["model"] = "affine-gaussian";
    doc["covariate_names"] = data.covariate_names();
    doc["feature_names"] = data.feature_names();
    doc["w"] = matrix_to_json(gauss.w);
    json z = json::array();
    for (Eigen::Index i = 0; i < gauss.z.size(); ++i) z.push_back(gauss.z(i));
    doc["z"] = std::move(z);
    doc["sigma"] = matrix_to_json(gauss.sigma);
  }
  write_json(doc, file);
}

PropensityModel load_propensity(const std::filesystem::path& file, const ChoiceDataset& data) {
  const json doc = load_json(file);
  if (doc.value("kind", "") != "choicekit-propensity") {
    throw DataError("'" + file.string() + "' is not a propensity document");
  }
  if (!data.has_chooser_covariates()) {
    throw DataError("propensity models need chooser covariates on the dataset");
  }
  const std::string kind = require(doc, "model", file).get<std::string>();
  check_names(strings_from_json(require(doc, "covariate_names", file), "covariate_names"),
              data.covariate_names(), "covariate names", file);
  if (kind == "item-logistic") {
    check_names(strings_from_json(require(doc, "item_ids", file), "item_ids"),
                data.items().names(), "item ids", file);
    PerItemLogistic logistic;
    logistic.coefficients = matrix_from_json(require(doc, "coefficients", file), "coefficients");
    logistic.intercepts = vector_from_json(require(doc, "intercepts", file), "intercepts");
    if (logistic.coefficients.rows() != data.n_items() ||
        logistic.coefficients.cols() != data.covariate_dim() ||
        logistic.intercepts.size() != data.n_items() ||
        !logistic.coefficients.allFinite() || !logistic.intercepts.allFinite()) {
      throw DataError("'" + file.string() + "' logistic shapes do not match the dataset");
    }
    return logistic;
  }
  if (kind == "affine-gaussian") {
    if (!data.has_item_features()) {
      throw DataError("affine-gaussian propensities need item features on the dataset");
    }
    check_names(strings_from_json(require(doc, "feature_names", file), "feature_names"),
                data.feature_names(), "feature names", file);
    AffineGaussian gauss;
    gauss.w = matrix_from_json(require(doc, "w", file), "w");
    gauss.z = vector_from_json(require(doc, "z", file), "z");
    gauss.sigma = matrix_from_json(require(doc, "sigma", file), "sigma");
    const Eigen::Index dy = data.feature_dim();
    if (gauss.w.rows() != dy || gauss.w.cols() != data.covariate_dim() ||
        gauss.z.size() != dy || gauss.sigma.rows() != dy || gauss.sigma.cols() != dy ||
        !gauss.w.allFinite() || !gauss.z.allFinite() || !gauss.sigma.allFinite()) {
      throw DataError("'" + file.string() + "' gaussian shapes do not match the dataset");
    }
    return gauss;
  }
  throw DataError("'" + file.string() + "' has unknown propensity model '" + kind + "'");
}

void save_weights(const SampleWeights& weights, const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw DataError("cannot write '" + file.string() + "'");
  out << "obs_index,weight\n";
  char buf[64];
  for (std::size_t i = 0; i < weights.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", weights.values()[i]);
    out << i << ',' << buf << '\n';
  }
  if (!out) throw DataError("failed while writing '" + file.string() + "'");
}

SampleWeights load_weights(const std::filesystem::path& file, std::size_t expected) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open '" + file.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + file.string() + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "obs_index,weight") {
    throw DataError("'" + file.string() + "' must start with header obs_index,weight");
  }
  Eigen::VectorXd values = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(expected));
  std::vector<bool> seen(expected, false);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string::npos) {
      throw DataError("'" + file.string() + "' line " + std::to_string(line_no) +
                      ": expected obs_index,weight");
    }
    std::size_t idx = 0;
    double value = 0.0;
    try {
      std::size_t used = 0;
      idx = static_cast<std::size_t>(std::stoull(line.substr(0, comma), &used));
      if (used != comma) throw std::invalid_argument("trailing");
      std::string rest = line.substr(comma + 1);
      value = std::stod(rest, &used);
      if (used != rest.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw DataError("'" + file.string() + "' line " + std::to_string(line_no) +
                      ": malformed row");
    }
    if (idx >= expected) {
      throw DataError("'" + file.string() + "' line " + std::to_string(line_no) +
                      ": observation index " + std::to_string(idx) + " out of range");
    }
    if (seen[idx]) {
      throw DataError("'" + file.string() + "' line " + std::to_string(line_no) +
                      ": duplicate observation index " + std::to_string(idx));
    }
    seen[idx] = true;
    values(static_cast<Eigen::Index>(idx)) = value;
  }
  for (std::size_t i = 0; i < expected; ++i) {
    if (!seen[i]) {
      throw DataError("'" + file.string() + "' is missing a weight for observation " +
                      std::to_string(i));
    }
  }
  return SampleWeights::raw(values);
}

namespace {

void save_labels(const std::vector<std::string>& ids, const std::vector<int>& labels,
                 const char* header, const std::filesystem::path& file) {
  if (ids.size() != labels.size()) {
    throw DataError("assignment ids and labels have different lengths");
  }
  std::ofstream out(file);
  if (!out) throw DataError("cannot write '" + file.string() + "'");
  out << header << '\n';
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << ids[i] << ',' << labels[i] << '\n';
  }
  if (!out) throw DataError("failed while writing '" + file.string() + "'");
}

}  // namespace

void save_assignment(const ClusterAssignment& assignment, const IncidenceMatrix& incidence,
                     const std::filesystem::path& file) {
  save_labels(incidence.row_ids, assignment.chooser_labels, "row_id,cluster", file);
}

void save_item_assignment(const ClusterAssignment& assignment,
                          const IncidenceMatrix& incidence,
                          const std::filesystem::path& file) {
  save_labels(incidence.col_ids, assignment.item_labels, "item_id,cluster", file);
}

ClusterAssignment load_assignment(const std::filesystem::path& file,
                                  const ChoiceDataset& data) {
  std::ifstream in(file);
  if (!in) throw DataError("cannot open '" + file.string() + "'");
  std::string line;
  if (!std::getline(in, line)) throw DataError("'" + file.string() + "' is empty");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "row_id,cluster") {
    throw DataError("'" + file.string() + "' must start with header row_id,cluster");
  }
  const std::size_t n = data.n_observations();
  ClusterAssignment assignment;
  assignment.chooser_labels.assign(n, -1);
  std::size_t line_no = 1;
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::size_t comma = line.find(',');
    if (comma == std::string::npos) {
      throw DataError("'" + file.string() + "' line " + std::to_string(line_no) +
                      ": expected row_id,cluster");
    }
    std::size_t idx = 0;
    long label = -1;
    try {
      std::size_t used = 0;
      idx = static_cast<std::size_t>(std::stoull(line.substr(0, comma), &used));
      if (used != comma) throw std::invalid_argument("trailing");
      std::string rest = line.substr(comma + 1);
      label = std::stol(rest, &used);
      if (used != rest.size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw DataError("'" + file.string() + "' line " + std::to_string(line_no) +
                      ": malformed row");
    }
    if (idx >= n) {
      throw DataError("'" + file.string() + "' line " + std::to_string(line_no) +
                      ": row id " + std::to_string(idx) + " is not an observation index");
    }
    if (assignment.chooser_labels[idx] != -1) {
      throw DataError("'" + file.string() + "' line " + std::to_string(line_no) +
                      ": duplicate row id " + std::to_string(idx));
    }
    if (label < 0) {
      throw DataError("'" + file.string() + "' line " + std::to_string(line_no) +
                      ": cluster labels must be non-negative");
    }
    assignment.chooser_labels[idx] = static_cast<int>(label);
    assignment.k = std::max(assignment.k, static_cast<int>(label) + 1);
    ++rows;
  }
  if (rows != n) {
    throw DataError("'" + file.string() + "' covers " + std::to_string(rows) + " of " +
                    std::to_string(n) + " observations");
  }
  return assignment;
}

void save_lrt_report(const LrtReport& report, const std::filesystem::path& file) {
  json doc;
  doc["kind"] = "choicekit-lrt";
  doc["restricted_ll"] = report.restricted_ll;
  doc["full_ll"] = report.full_ll;
  doc["statistic"] = report.statistic;
  doc["df"] = report.df;
  doc["p_value"] = report.p_value;
  write_json(doc, file);
}

void save_regularity_report(const RegularityReport& report, const ChoiceDataset& data,
                            const std::filesystem::path& file) {
  json doc;
  doc["kind"] = "choicekit-regularity";
  doc["min_count"] = report.min_count;
  doc["alpha"] = report.alpha;
  doc["pairs_examined"] = report.pairs_examined;
  doc["tests_performed"] = report.tests_performed;
  json findings = json::array();
  auto names_of = [&data](const std::vector<int>& items) {
    json out = json::array();
    for (int i : items) out.push_back(data.items().name(i));
    return out;
  };
  for (const RegularityFinding& f : report.findings) {
    json fj;
    fj["item"] = data.items().name(f.item);
    fj["base_set"] = names_of(f.base_set);
    fj["super_set"] = names_of(f.super_set);
    fj["base_chosen"] = f.base_chosen;
    fj["base_count"] = f.base_count;
    fj["super_chosen"] = f.super_chosen;
    fj["super_count"] = f.super_count;
    fj["base_rate"] = f.base_rate;
    fj["super_rate"] = f.super_rate;
    fj["p_value"] = f.p_value;
    findings.push_back(std::move(fj));
  }
  doc["findings"] = std::move(findings);
  write_json(doc, file);
}

void save_benchmark_csv(const std::vector<BenchmarkRow>& rows,
                        const std::filesystem::path& file) {
  std::ofstream out(file);
  if (!out) throw DataError("cannot write '" + file.string() + "'");
  out << "method,split,c,mean,stderr\n";
  char buf[160];
  for (const BenchmarkRow& row : rows) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%.17g", row.confounding, row.mean,
                  row.std_error);
    out << row.method << ',' << row.split << ',' << buf << '\n';
  }
  if (!out) throw DataError("failed while writing '" + file.string() + "'");
}

void save_world(const SyntheticWorld& world, const std::filesystem::path& file) {
  json doc;
  doc["kind"] = "choicekit-world";
  doc["library_version"] = kVersionString;
  doc["item_ids"] = world.item_ids;
  doc["item_embeddings"] = matrix_to_json(world.item_embeddings);
  doc["true_cdm"] = matrix_to_json(world.true_cdm);
  doc["confounding_strength"] = world.confounding_strength;
  doc["uniform_mix_prob"] = world.uniform_mix_prob;
  doc["seed"] = world.seed;
  write_json(doc, file);
}

SyntheticWorld load_world(const std::filesystem::path& file) {
  const json doc = load_json(file);
  if (doc.value("kind", "") != "choicekit-world") {
    throw DataError("'" + file.string() + "' is not a world document");
  }
  SyntheticWorld world;
  world.item_ids = strings_from_json(require(doc, "item_ids", file), "item_ids");
  world.item_embeddings =
      matrix_from_json(require(doc, "item_embeddings", file), "item_embeddings");
  world.true_cdm = matrix_from_json(require(doc, "true_cdm", file), "true_cdm");
  world.confounding_strength = require(doc, "confounding_strength", file).get<double>();
  world.uniform_mix_prob = require(doc, "uniform_mix_prob", file).get<double>();
  world.seed = require(doc, "seed", file).get<std::uint64_t>();
  return world;
}

}  // namespace choicekit
