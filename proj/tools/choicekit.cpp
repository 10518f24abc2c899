// choicekit command line: simulation, estimation, weighting, clustering, and
// diagnostics as composable file-to-file pipelines. Outputs land in files;
// stdout carries short human-readable summaries; every command drops a
// manifest recording its arguments, seed, and input digests.

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "choicekit/clustering.hpp"
#include "choicekit/dataset.hpp"
#include "choicekit/errors.hpp"
#include "choicekit/evaluation.hpp"
#include "choicekit/fit.hpp"
#include "choicekit/model.hpp"
#include "choicekit/propensity.hpp"
#include "choicekit/rng.hpp"
#include "choicekit/serialization.hpp"
#include "choicekit/synthetic.hpp"
#include "choicekit/version.hpp"
#include "choicekit/weights.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace choicekit;

namespace {

std::string fnv1a_digest(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw DataError("cannot open '" + file.string() + "' for digesting");
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  char buf[65536];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    const std::streamsize got = in.gcount();
    for (std::streamsize i = 0; i < got; ++i) {
      hash ^= static_cast<unsigned char>(buf[i]);
      hash *= 0x100000001b3ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof(hex), "%016llx", static_cast<unsigned long long>(hash));
  return std::string("fnv1a:") + hex;
}

// Gathers what every command records: the parsed flags, the seed, and the
// digests of files read. write() drops `<primary>.manifest.json`.
struct Manifest {
  std::string command;
  json arguments = json::object();
  std::uint64_t seed = 0;
  json inputs = json::object();
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();

  void record_input(const fs::path& file) { inputs[file.string()] = fnv1a_digest(file); }

  void write(const fs::path& primary_output) const {
    json doc;
    doc["kind"] = "choicekit-run";
    doc["library_version"] = kVersionString;
    doc["command"] = command;
    doc["arguments"] = arguments;
    doc["seed"] = seed;
    doc["inputs"] = inputs;
    const auto elapsed = std::chrono::steady_clock::now() - start;
    doc["duration_seconds"] =
        std::chrono::duration_cast<std::chrono::duration<double>>(elapsed).count();
    const fs::path out = primary_output.string() + ".manifest.json";
    std::ofstream stream(out);
    if (!stream) throw DataError("cannot write '" + out.string() + "'");
    stream << doc.dump(2) << '\n';
  }
};

Manifest make_manifest(const CLI::App& sub, std::uint64_t seed) {
  Manifest m;
  m.command = sub.get_name();
  m.seed = seed;
  for (const CLI::Option* opt : sub.get_options()) {
    if (opt->count() == 0) continue;
    const auto& results = opt->results();
    if (results.empty()) {
      m.arguments[opt->get_name()] = true;
    } else if (results.size() == 1) {
      m.arguments[opt->get_name()] = results.front();
    } else {
      m.arguments[opt->get_name()] = results;
    }
  }
  return m;
}

FileFormat resolve_format(const std::string& flag, const fs::path& file) {
  if (flag == "csv") return FileFormat::csv;
  if (flag == "jsonl") return FileFormat::jsonl;
  return file.extension() == ".jsonl" ? FileFormat::jsonl : FileFormat::csv;
}

// Shared --choices/--covariates/--item-features loading; records digests.
struct DataArgs {
  std::string choices;
  std::string format = "auto";
  std::string covariates;
  std::string item_features;

  void attach(CLI::App* sub, bool choices_required = true) {
    auto* c = sub->add_option("--choices", choices, "choice data file (CSV or JSONL)");
    if (choices_required) c->required();
    sub->add_option("--format", format, "choice file format: csv, jsonl, or auto")
        ->check(CLI::IsMember({"auto", "csv", "jsonl"}))
        ->capture_default_str();
    sub->add_option("--covariates", covariates, "chooser covariate table (CSV or JSONL)");
    sub->add_option("--item-features", item_features, "item feature table (CSV or JSONL)");
  }

  ChoiceDataset load(Manifest& manifest) const {
    manifest.record_input(choices);
    ChoiceDataset data = load_choices(choices, resolve_format(format, choices));
    if (!covariates.empty()) {
      manifest.record_input(covariates);
      data = attach_covariates(data, covariates, resolve_format(format, covariates));
    }
    if (!item_features.empty()) {
      manifest.record_input(item_features);
      data = attach_item_features(data, item_features,
                                  resolve_format(format, item_features));
    }
    return data;
  }
};

// Optimizer knobs shared by fit-like commands.
struct FitArgs {
  FitConfig config;
  bool raw_weights = false;

  void attach(CLI::App* sub) {
    sub->add_option("--max-epochs", config.max_epochs, "optimizer epoch cap")
        ->check(CLI::PositiveNumber)
        ->capture_default_str();
    sub->add_option("--grad-tol", config.grad_sq_tol,
                    "stop when the squared gradient norm falls below this")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    sub->add_option("--lambda", config.l2_lambda, "l2 penalty strength")
        ->check(CLI::NonNegativeNumber)
        ->capture_default_str();
    sub->add_flag("--raw-weights", raw_weights,
                  "use sample weights as given instead of mean-normalizing them");
  }

  FitConfig resolve(std::uint64_t seed) const {
    FitConfig out = config;
    out.normalize_weights = !raw_weights;
    out.seed = seed;
    return out;
  }
};

void add_common(CLI::App* sub, std::uint64_t& seed, int& threads) {
  sub->add_option("--seed", seed, "root seed; child streams are derived from it")
      ->capture_default_str();
  sub->add_option("--threads", threads,
                  "parallelism cap (execution is serial at desk scale)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->set_config("--config", "", "key=value file; explicit flags win");
}

ModelSpec make_spec(const std::string& family, bool self_pulls, bool no_item_intercepts,
                    int components) {
  ModelSpec spec;
  spec.family = family_from_name(family);
  spec.self_pulls = self_pulls;
  spec.item_intercepts = !no_item_intercepts;
  spec.mixture_components = components;
  return spec;
}

// ---------- simulate ----------

struct SimulateArgs {
  std::string preset;
  int samples = 1000;
  int counterfactual_samples = -1;  // -1: follow --samples
  int items = 20;
  double c = 0.0;
  int dim = 2;
  int set_size = 5;
  std::vector<double> mu;
  double sigma0_scale = 1.0;
  double sigma_scale = 1.0;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  int threads = 1;
};

void run_simulate(const CLI::App& sub, const SimulateArgs& args) {
  Manifest manifest = make_manifest(sub, args.seed);
  const fs::path dir(args.out_dir);
  fs::create_directories(dir);

  if (args.preset == "confounded") {
    auto [data, world] = generate_confounded(args.items, args.samples, args.c, args.seed);
    save_choices(data, dir / "choices.csv", FileFormat::csv);
    save_covariates(data, dir / "covariates.csv");
    save_world(world, dir / "world.json");
    const int n_cf =
        args.counterfactual_samples < 0 ? args.samples : args.counterfactual_samples;
    if (n_cf > 0) {
      const ChoiceDataset cf = sample_uniform_sets(world, n_cf, derive_seed(args.seed, 2));
      save_choices(cf, dir / "counterfactual_choices.csv", FileFormat::csv);
      save_covariates(cf, dir / "counterfactual_covariates.csv");
    }
    manifest.write(dir / "choices.csv");
    std::cout << "confounded world: " << args.items << " items, c = " << args.c << "\n"
              << "wrote " << (dir / "choices.csv").string() << " (" << args.samples
              << " observations), covariates.csv, world.json"
              << (n_cf > 0 ? ", counterfactual_{choices,covariates}.csv" : "") << "\n";
    return;
  }

  if (args.preset == "pets") {
    const PopulationOracle oracle = pets_oracle();
    const OracleSample sample = sample_oracle(oracle, args.samples, args.seed);
    save_choices(sample.data, dir / "choices.csv", FileFormat::csv);

    std::ofstream prop(dir / "propensities.csv");
    if (!prop) throw DataError("cannot write propensities.csv");
    prop << "obs_index,propensity\n";
    char buf[64];
    Eigen::VectorXd w(static_cast<Eigen::Index>(sample.set_propensities.size()));
    for (std::size_t i = 0; i < sample.set_propensities.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", sample.set_propensities[i]);
      prop << i << ',' << buf << '\n';
      w(static_cast<Eigen::Index>(i)) =
          1.0 / (sample.data.n_unique_sets() * sample.set_propensities[i]);
    }
    prop.close();
    save_weights(SampleWeights::raw(w), dir / "weights.csv");
    manifest.write(dir / "choices.csv");
    std::cout << "pets oracle: wrote " << (dir / "choices.csv").string() << " ("
              << args.samples
              << " observations), propensities.csv, weights.csv (true-propensity IPW)\n";
    return;
  }

  // recommender
  Eigen::VectorXd mu = Eigen::VectorXd::Zero(args.dim);
  if (!args.mu.empty()) {
    if (static_cast<int>(args.mu.size()) != args.dim) {
      throw DataError("--mu needs exactly --dim entries");
    }
    for (int i = 0; i < args.dim; ++i) mu(i) = args.mu[static_cast<std::size_t>(i)];
  }
  const Eigen::MatrixXd sigma0 =
      args.sigma0_scale * Eigen::MatrixXd::Identity(args.dim, args.dim);
  const Eigen::MatrixXd sigma =
      args.sigma_scale * Eigen::MatrixXd::Identity(args.dim, args.dim);
  const ChoiceDataset data =
      generate_gaussian_recommender(mu, sigma0, sigma, args.set_size, args.samples, args.seed);
  save_choices(data, dir / "choices.csv", FileFormat::csv);
  save_item_features(data, dir / "item_features.csv");
  manifest.write(dir / "choices.csv");
  std::cout << "gaussian recommender: wrote " << (dir / "choices.csv").string() << " ("
            << args.samples << " observations, sets of " << args.set_size
            << "), item_features.csv\n";
}

// ---------- fit ----------

struct FitCmdArgs {
  DataArgs data;
  FitArgs fit;
  std::string family;
  std::string weights;
  bool self_pulls = false;
  bool no_item_intercepts = false;
  int components = 1;
  EmConfig em;
  std::string out = "model.json";
  std::uint64_t seed = 0;
  int threads = 1;
};

void run_fit(const CLI::App& sub, const FitCmdArgs& args) {
  Manifest manifest = make_manifest(sub, args.seed);
  const ChoiceDataset data = args.data.load(manifest);
  const ModelSpec spec =
      make_spec(args.family, args.self_pulls, args.no_item_intercepts, args.components);

  SampleWeights weights = SampleWeights::uniform(data.n_observations());
  if (!args.weights.empty()) {
    manifest.record_input(args.weights);
    weights = load_weights(args.weights, data.n_observations());
  }
  const FitConfig config = args.fit.resolve(args.seed);

  FitResult result = spec.family == Family::mixed_logit
                         ? fit_mixed_logit(spec.mixture_components, data, config, args.em)
                         : fit(spec, data, weights, config);
  save_model(result, data, args.out);
  manifest.write(args.out);
  std::cout << family_name(spec.family) << " fit on " << data.n_observations()
            << " observations: data LL " << result.final_data_ll << ", "
            << result.epochs << " epochs, "
            << (result.converged ? "converged" : "epoch cap reached") << "\n"
            << "wrote " << args.out << "\n";
}

// ---------- propensity ----------

struct PropensityArgs {
  DataArgs data;
  FitArgs fit;
  std::string model;
  std::string out = "propensity.json";
  std::uint64_t seed = 0;
  int threads = 1;
};

void run_propensity(const CLI::App& sub, const PropensityArgs& args) {
  Manifest manifest = make_manifest(sub, args.seed);
  const ChoiceDataset data = args.data.load(manifest);
  PropensityModel model = args.model == "item-logistic"
                              ? PropensityModel(fit_item_logistic(data, args.fit.resolve(args.seed)))
                              : PropensityModel(fit_affine_gaussian(data));
  save_propensity(model, data, args.out);
  manifest.write(args.out);
  std::cout << args.model << " propensity fit on " << data.n_observations()
            << " observations\nwrote " << args.out << "\n";
}

// ---------- ipw-weights ----------

struct IpwArgs {
  DataArgs data;
  std::string propensity;
  double clip_quantile = 0.0;  // 0: no clipping
  bool raw = false;
  std::string out = "weights.csv";
  std::uint64_t seed = 0;
  int threads = 1;
};

void run_ipw_weights(const CLI::App& sub, const IpwArgs& args) {
  Manifest manifest = make_manifest(sub, args.seed);
  const ChoiceDataset data = args.data.load(manifest);
  manifest.record_input(args.propensity);
  const PropensityModel model = load_propensity(args.propensity, data);
  const std::optional<double> clip =
      args.clip_quantile > 0.0 ? std::optional<double>(args.clip_quantile) : std::nullopt;
  const SampleWeights weights = ipw_weights(model, data, clip, args.raw);
  save_weights(weights, args.out);
  manifest.write(args.out);
  std::cout << "wrote " << args.out << " (" << weights.size() << " weights, mean "
            << weights.mean() << ", max " << weights.values().maxCoeff() << ")\n";
}

// ---------- cluster ----------

struct ClusterArgs {
  DataArgs data;
  int k = 2;
  std::string out = "assignment.csv";
  std::string items_out;
  std::uint64_t seed = 0;
  int threads = 1;
};

void run_cluster(const CLI::App& sub, const ClusterArgs& args) {
  Manifest manifest = make_manifest(sub, args.seed);
  const ChoiceDataset data = args.data.load(manifest);
  const IncidenceMatrix incidence = build_incidence(data);
  int dropped = 0;
  const ClusterAssignment assignment = spectral_cocluster(incidence, args.k, args.seed, &dropped);
  if (dropped > 0) {
    std::cerr << "warning: " << dropped
              << " item column(s) appear in no choice set; assigned to the cluster nearest "
                 "the origin\n";
  }
  save_assignment(assignment, incidence, args.out);
  if (!args.items_out.empty()) save_item_assignment(assignment, incidence, args.items_out);
  manifest.write(args.out);

  std::vector<int> sizes(static_cast<std::size_t>(args.k), 0);
  for (int label : assignment.chooser_labels) sizes[static_cast<std::size_t>(label)] += 1;
  std::cout << "co-clustered " << incidence.r.rows() << " observation rows and "
            << incidence.r.cols() << " items into " << args.k << " clusters; row sizes:";
  for (int s : sizes) std::cout << ' ' << s;
  std::cout << "\nwrote " << args.out;
  if (!args.items_out.empty()) std::cout << " and " << args.items_out;
  std::cout << "\n";
}

// ---------- cluster-fit ----------

struct ClusterFitArgs {
  DataArgs data;
  FitArgs fit;
  std::string assignment;
  std::string family = "logit";
  bool self_pulls = false;
  bool no_item_intercepts = false;
  std::string out_dir = "cluster_models";
  std::uint64_t seed = 0;
  int threads = 1;
};

void run_cluster_fit(const CLI::App& sub, const ClusterFitArgs& args) {
  Manifest manifest = make_manifest(sub, args.seed);
  const ChoiceDataset data = args.data.load(manifest);
  manifest.record_input(args.assignment);
  const ClusterAssignment assignment = load_assignment(args.assignment, data);
  const ModelSpec spec = make_spec(args.family, args.self_pulls, args.no_item_intercepts, 1);

  const ClusterFitOutcome outcome =
      cluster_fit(data, assignment, spec, args.fit.resolve(args.seed));

  const fs::path dir(args.out_dir);
  fs::create_directories(dir);
  json summary;
  summary["kind"] = "choicekit-cluster-fit";
  summary["k"] = assignment.k;
  summary["family"] = family_name(spec.family);
  summary["combined_data_ll"] = outcome.combined_data_ll;
  json files = json::array();
  for (std::size_t c = 0; c < outcome.fits.size(); ++c) {
    const fs::path file = dir / ("cluster_" + std::to_string(c) + ".json");
    save_model(outcome.fits[c], data, file);
    files.push_back(file.string());
  }
  summary["models"] = std::move(files);
  const fs::path summary_path = dir / "cluster_fit.json";
  std::ofstream out(summary_path);
  if (!out) throw DataError("cannot write '" + summary_path.string() + "'");
  out << summary.dump(2) << '\n';
  out.close();
  manifest.write(summary_path);

  std::cout << "fit " << assignment.k << " per-cluster " << family_name(spec.family)
            << " models; combined data LL " << outcome.combined_data_ll << "\nwrote "
            << summary_path.string() << "\n";
}

// ---------- evaluate ----------

struct EvaluateArgs {
  DataArgs data;
  std::string model;
  std::string metric;
  std::string weights;
  std::string out = "evaluation.json";
  std::uint64_t seed = 0;
  int threads = 1;
};

void run_evaluate(const CLI::App& sub, const EvaluateArgs& args) {
  Manifest manifest = make_manifest(sub, args.seed);
  const ChoiceDataset data = args.data.load(manifest);
  manifest.record_input(args.model);
  const FitResult result = load_model(args.model, data);

  double value = 0.0;
  if (args.metric == "ll") {
    value = result.model.log_likelihood(data, SampleWeights::uniform(data.n_observations()));
  } else if (args.metric == "ipw-ll") {
    if (args.weights.empty()) throw DataError("--metric ipw-ll needs --weights");
    manifest.record_input(args.weights);
    const SampleWeights weights = load_weights(args.weights, data.n_observations());
    value = normalized_ipw_loglik(result.model, data, weights);
  } else {
    value = mean_relative_position(result.model, data);
  }

  json doc;
  doc["kind"] = "choicekit-evaluation";
  doc["metric"] = args.metric;
  doc["value"] = value;
  doc["observations"] = data.n_observations();
  doc["model"] = args.model;
  std::ofstream out(args.out);
  if (!out) throw DataError("cannot write '" + args.out + "'");
  out << doc.dump(2) << '\n';
  out.close();
  manifest.write(args.out);
  std::cout << args.metric << " = " << value << "\nwrote " << args.out << "\n";
}

// ---------- lrt ----------

struct LrtArgs {
  DataArgs data;
  std::string restricted;
  std::string full;
  std::string out = "lrt.json";
  std::uint64_t seed = 0;
  int threads = 1;
};

void run_lrt(const CLI::App& sub, const LrtArgs& args) {
  Manifest manifest = make_manifest(sub, args.seed);
  const ChoiceDataset data = args.data.load(manifest);
  manifest.record_input(args.restricted);
  manifest.record_input(args.full);
  const FitResult restricted = load_model(args.restricted, data);
  const FitResult full = load_model(args.full, data);
  const LrtReport report = lrt(restricted, full, data);
  save_lrt_report(report, args.out);
  manifest.write(args.out);
  char line[160];
  std::snprintf(line, sizeof(line),
                "statistic %.6g on %d df -> p = %.6g (restricted LL %.6f, full LL %.6f)",
                report.statistic, report.df, report.p_value, report.restricted_ll,
                report.full_ll);
  std::cout << line << "\nwrote " << args.out << "\n";
}

// ---------- regularity ----------

struct RegularityArgs {
  DataArgs data;
  int min_count = 20;
  double alpha = 0.05;
  bool general_pairs = false;
  std::string out = "regularity.json";
  std::uint64_t seed = 0;
  int threads = 1;
};

void run_regularity(const CLI::App& sub, const RegularityArgs& args) {
  Manifest manifest = make_manifest(sub, args.seed);
  const ChoiceDataset data = args.data.load(manifest);
  const RegularityReport report =
      detect_regularity_violations(data, args.min_count, args.alpha, args.general_pairs);
  save_regularity_report(report, data, args.out);
  manifest.write(args.out);

  std::cout << report.pairs_examined << " subset/superset pair(s) examined, "
            << report.tests_performed << " test(s) run, " << report.findings.size()
            << " finding(s) at alpha = " << args.alpha << "\n";
  const std::size_t show = std::min<std::size_t>(report.findings.size(), 10);
  for (std::size_t i = 0; i < show; ++i) {
    const RegularityFinding& f = report.findings[i];
    std::cout << "  " << data.items().name(f.item) << ": ";
    auto print_set = [&data](const std::vector<int>& set) {
      std::cout << '{';
      for (std::size_t j = 0; j < set.size(); ++j) {
        if (j > 0) std::cout << ',';
        std::cout << data.items().name(set[j]);
      }
      std::cout << '}';
    };
    print_set(f.base_set);
    std::cout << " -> ";
    print_set(f.super_set);
    char tail[96];
    std::snprintf(tail, sizeof(tail), "  %.4f -> %.4f  (p = %.3g)", f.base_rate,
                  f.super_rate, f.p_value);
    std::cout << tail << "\n";
  }
  std::cout << "wrote " << args.out << "\n";
}

// ---------- benchmark ----------

struct BenchmarkArgs {
  std::string preset = "confounded";
  int items = 20;
  std::vector<double> c_values{0.0, 2.5, 5.0};
  int trials = 8;
  int train = 10000;
  int test = 2500;
  std::vector<std::string> methods{"logit", "mnl", "cdm", "mcdm"};
  bool no_ipw = false;
  double clip_quantile = 0.0;
  FitArgs fit;
  std::string out = "benchmark.csv";
  std::uint64_t seed = 0;
  int threads = 1;
};

void run_benchmark(const CLI::App& sub, const BenchmarkArgs& args) {
  Manifest manifest = make_manifest(sub, args.seed);
  if (args.c_values.empty()) throw DataError("--c needs at least one value");

  std::vector<ModelSpec> specs;
  for (const std::string& name : args.methods) {
    specs.push_back(make_spec(name, false, false, 1));
  }
  BenchmarkOptions options;
  options.n_confounded_test = args.test;
  options.n_counterfactual_test = args.test;
  options.with_ipw = !args.no_ipw;
  if (args.clip_quantile > 0.0) options.ipw_clip_quantile = args.clip_quantile;
  options.fit = args.fit.resolve(args.seed);

  // One item geometry across the sweep: only the set-formation strength moves.
  std::vector<BenchmarkRow> rows;
  for (std::size_t ci = 0; ci < args.c_values.size(); ++ci) {
    const double c = args.c_values[ci];
    const SyntheticWorld world = make_confounded_world(args.items, c, args.seed);
    const std::vector<BenchmarkRow> part = counterfactual_benchmark(
        world, specs, args.train, args.trials, derive_seed(args.seed, 1 + ci), options);
    rows.insert(rows.end(), part.begin(), part.end());
    std::cout << "c = " << c << ":\n";
    for (const BenchmarkRow& row : part) {
      char line[128];
      std::snprintf(line, sizeof(line), "  %-12s %-15s %.4f +/- %.4f", row.method.c_str(),
                    row.split.c_str(), row.mean, row.std_error);
      std::cout << line << "\n";
    }
  }
  save_benchmark_csv(rows, args.out);
  manifest.write(args.out);
  std::cout << "wrote " << args.out << " (" << rows.size() << " rows)\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"choice modeling under choice-set confounding: simulation, estimation, "
               "inverse weighting, co-clustering, and diagnostics"};
  app.set_version_flag("--version", kVersionString);
  app.require_subcommand(1);

  // simulate
  SimulateArgs sim;
  CLI::App* s_sim = app.add_subcommand("simulate", "generate synthetic choice data");
  s_sim->add_option("--preset", sim.preset, "confounded | pets | recommender")
      ->required()
      ->check(CLI::IsMember({"confounded", "pets", "recommender"}));
  s_sim->add_option("--samples", sim.samples, "observations to draw")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  s_sim->add_option("--counterfactual-samples", sim.counterfactual_samples,
                    "uniform-set observations (confounded preset; -1 follows --samples)")
      ->capture_default_str();
  s_sim->add_option("--items", sim.items, "item count (confounded preset)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  s_sim->add_option("--c", sim.c, "confounding strength (confounded preset)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  s_sim->add_option("--dim", sim.dim, "embedding dimension (recommender preset)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  s_sim->add_option("--set-size", sim.set_size, "items per set (recommender preset)")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  s_sim->add_option("--mu", sim.mu, "chooser mean vector (recommender preset)")
      ->delimiter(',');
  s_sim->add_option("--sigma0-scale", sim.sigma0_scale,
                    "chooser covariance scale (recommender preset)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  s_sim->add_option("--sigma-scale", sim.sigma_scale,
                    "item covariance scale (recommender preset)")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  s_sim->add_option("--out-dir", sim.out_dir, "output directory")->capture_default_str();
  add_common(s_sim, sim.seed, sim.threads);
  s_sim->callback([&]() { run_simulate(*s_sim, sim); });

  // fit
  FitCmdArgs fit_args;
  CLI::App* s_fit = app.add_subcommand("fit", "fit a choice model");
  s_fit->add_option("--family", fit_args.family,
                    "logit | mnl | cl | cml | cdm | mcdm | lcl | mlcl | mixed-logit")
      ->required();
  fit_args.data.attach(s_fit);
  s_fit->add_option("--weights", fit_args.weights, "sample weight CSV (obs_index,weight)");
  s_fit->add_flag("--self-pulls", fit_args.self_pulls, "cdm/mcdm: allow diagonal pulls");
  s_fit->add_flag("--no-item-intercepts", fit_args.no_item_intercepts,
                  "mnl: drop per-item intercepts");
  s_fit->add_option("--components", fit_args.components, "mixed-logit component count")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  s_fit->add_option("--em-max-iters", fit_args.em.max_iters, "mixed-logit EM iteration cap")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  s_fit->add_option("--em-ll-tol", fit_args.em.ll_tol, "mixed-logit EM stopping gain")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  s_fit->add_option("--em-timeout", fit_args.em.timeout_seconds,
                    "mixed-logit EM wall-clock cap in seconds")
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  fit_args.fit.attach(s_fit);
  s_fit->add_option("--out", fit_args.out, "model JSON path")->capture_default_str();
  add_common(s_fit, fit_args.seed, fit_args.threads);
  s_fit->callback([&]() { run_fit(*s_fit, fit_args); });

  // propensity
  PropensityArgs prop;
  CLI::App* s_prop = app.add_subcommand("propensity", "fit a choice-set propensity model");
  s_prop->add_option("--model", prop.model, "item-logistic | affine-gaussian")
      ->required()
      ->check(CLI::IsMember({"item-logistic", "affine-gaussian"}));
  prop.data.attach(s_prop);
  prop.fit.attach(s_prop);
  s_prop->add_option("--out", prop.out, "propensity JSON path")->capture_default_str();
  add_common(s_prop, prop.seed, prop.threads);
  s_prop->callback([&]() { run_propensity(*s_prop, prop); });

  // ipw-weights
  IpwArgs ipw;
  CLI::App* s_ipw = app.add_subcommand("ipw-weights", "turn a propensity model into weights");
  s_ipw->add_option("--propensity", ipw.propensity, "propensity JSON")->required();
  ipw.data.attach(s_ipw);
  s_ipw->add_option("--clip-quantile", ipw.clip_quantile,
                    "cap raw weights at this upper quantile (0 disables)")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  s_ipw->add_flag("--raw", ipw.raw, "keep inverse scale instead of mean-normalizing");
  s_ipw->add_option("--out", ipw.out, "weights CSV path")->capture_default_str();
  add_common(s_ipw, ipw.seed, ipw.threads);
  s_ipw->callback([&]() { run_ipw_weights(*s_ipw, ipw); });

  // cluster
  ClusterArgs cluster;
  CLI::App* s_cluster = app.add_subcommand("cluster", "spectral co-clustering of choice sets");
  cluster.data.attach(s_cluster);
  s_cluster->add_option("--k", cluster.k, "number of clusters (>= 2)")
      ->required()
      ->check(CLI::Range(2, 1000000));
  s_cluster->add_option("--out", cluster.out, "row assignment CSV")->capture_default_str();
  s_cluster->add_option("--items-out", cluster.items_out, "item assignment CSV (optional)");
  add_common(s_cluster, cluster.seed, cluster.threads);
  s_cluster->callback([&]() { run_cluster(*s_cluster, cluster); });

  // cluster-fit
  ClusterFitArgs cfit;
  CLI::App* s_cfit = app.add_subcommand("cluster-fit", "fit one model per cluster");
  cfit.data.attach(s_cfit);
  s_cfit->add_option("--assignment", cfit.assignment, "row assignment CSV from `cluster`")
      ->required();
  s_cfit->add_option("--family", cfit.family, "model family per cluster")
      ->capture_default_str();
  s_cfit->add_flag("--self-pulls", cfit.self_pulls, "cdm/mcdm: allow diagonal pulls");
  s_cfit->add_flag("--no-item-intercepts", cfit.no_item_intercepts,
                   "mnl: drop per-item intercepts");
  cfit.fit.attach(s_cfit);
  s_cfit->add_option("--out-dir", cfit.out_dir, "directory for per-cluster model JSONs")
      ->capture_default_str();
  add_common(s_cfit, cfit.seed, cfit.threads);
  s_cfit->callback([&]() { run_cluster_fit(*s_cfit, cfit); });

  // evaluate
  EvaluateArgs eval;
  CLI::App* s_eval = app.add_subcommand("evaluate", "score a fitted model on a dataset");
  s_eval->add_option("--model", eval.model, "model JSON")->required();
  eval.data.attach(s_eval);
  s_eval->add_option("--metric", eval.metric, "ll | ipw-ll | mrp")
      ->required()
      ->check(CLI::IsMember({"ll", "ipw-ll", "mrp"}));
  s_eval->add_option("--weights", eval.weights, "weights CSV (required for ipw-ll)");
  s_eval->add_option("--out", eval.out, "report JSON path")->capture_default_str();
  add_common(s_eval, eval.seed, eval.threads);
  s_eval->callback([&]() { run_evaluate(*s_eval, eval); });

  // lrt
  LrtArgs lrt_args;
  CLI::App* s_lrt = app.add_subcommand("lrt", "likelihood-ratio test between nested fits");
  s_lrt->add_option("--restricted", lrt_args.restricted, "restricted model JSON")->required();
  s_lrt->add_option("--full", lrt_args.full, "full model JSON")->required();
  lrt_args.data.attach(s_lrt);
  s_lrt->add_option("--out", lrt_args.out, "report JSON path")->capture_default_str();
  add_common(s_lrt, lrt_args.seed, lrt_args.threads);
  s_lrt->callback([&]() { run_lrt(*s_lrt, lrt_args); });

  // regularity
  RegularityArgs reg;
  CLI::App* s_reg = app.add_subcommand("regularity", "scan for regularity violations");
  reg.data.attach(s_reg);
  s_reg->add_option("--min-count", reg.min_count, "minimum observations per set")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  s_reg->add_option("--alpha", reg.alpha, "significance threshold")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  s_reg->add_flag("--general-pairs", reg.general_pairs,
                  "test all strict subset pairs, not only single-item extensions");
  s_reg->add_option("--out", reg.out, "report JSON path")->capture_default_str();
  add_common(s_reg, reg.seed, reg.threads);
  s_reg->callback([&]() { run_regularity(*s_reg, reg); });

  // benchmark
  BenchmarkArgs bench;
  CLI::App* s_bench = app.add_subcommand("benchmark", "counterfactual prediction benchmark");
  s_bench->add_option("--preset", bench.preset, "world preset (confounded)")
      ->check(CLI::IsMember({"confounded"}))
      ->capture_default_str();
  s_bench->add_option("--items", bench.items, "item count")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  s_bench->add_option("--c", bench.c_values, "confounding strengths to sweep")
      ->delimiter(',');
  s_bench->add_option("--trials", bench.trials, "trials per strength")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  s_bench->add_option("--train", bench.train, "training observations per trial")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  s_bench->add_option("--test", bench.test, "observations per test split")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  s_bench->add_option("--methods", bench.methods, "model families to benchmark")
      ->delimiter(',');
  s_bench->add_flag("--no-ipw", bench.no_ipw, "skip the IPW-weighted variants");
  s_bench->add_option("--clip-quantile", bench.clip_quantile,
                      "clip IPW weights at this quantile (0 disables)")
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  bench.fit.attach(s_bench);
  s_bench->add_option("--out", bench.out, "results CSV path")->capture_default_str();
  add_common(s_bench, bench.seed, bench.threads);
  s_bench->callback([&]() { run_benchmark(*s_bench, bench); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "unexpected failure: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
