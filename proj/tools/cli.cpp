#include "cli.hpp"

#include "hardness/estimator.hpp"
#include "hardness/evalstats.hpp"
#include "hardness/explain.hpp"
#include "hardness/knowledgebase.hpp"
#include "hardness/parallel.hpp"
#include "hardness/synthgen.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace hardness::cli {

namespace fs = std::filesystem;
using Json = nlohmann::json;

namespace {

// Config keys that name files; left out of the input digest.
const std::vector<std::string> kPathKeys{"config", "out_dir", "dataset", "schema", "kb", "model",
                                         "metafeatures", "nested", "real", "synthetic"};

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    fail(ErrorCode::io, "SHA-256 failed");
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 15];
  }
  return out;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::missing_artifact, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string real(double v) {
  char buffer[32];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof buffer, v);
  return std::string(buffer, ptr);
}

std::vector<std::string> split(const std::string& line, char sep = ',') {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, sep)) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == sep) cells.emplace_back();
  return cells;
}

/// Header-indexed numeric table read from one of our own CSV artifacts.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;

  int column(const std::string& name, const std::string& source) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) fail(ErrorCode::schema_mismatch, source + " has no column '" + name + "'");
    return static_cast<int>(it - header.begin());
  }
  Vector values(const std::string& name, const std::string& source) const {
    const int c = column(name, source);
    Vector out(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) out[static_cast<Eigen::Index>(i)] = rows[i][c];
    return out;
  }
  MetaMatrix meta(const std::string& source) const {
    MetaMatrix out(static_cast<Eigen::Index>(rows.size()), kMetaCount);
    for (int j = 0; j < kMetaCount; ++j) out.col(j) = values(std::string(kMetaNames[j]), source);
    return out;
  }
};

Table parse_table(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  Table table;
  if (!std::getline(in, line)) fail(ErrorCode::empty_dataset, source + " is empty");
  table.header = split(line);
  int number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != table.header.size())
      fail(ErrorCode::schema_mismatch, source + " line " + std::to_string(number) + " has the wrong number of cells");
    std::vector<double> row(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto [ptr, ec] = std::from_chars(cells[c].data(), cells[c].data() + cells[c].size(), row[c]);
      if (ec != std::errc() || ptr != cells[c].data() + cells[c].size())
        fail(ErrorCode::unparseable_cell,
             source + " line " + std::to_string(number) + " column '" + table.header[c] + "' is not a number");
    }
    table.rows.push_back(std::move(row));
  }
  return table;
}

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::missing_artifact: return ExitCode::missing_artifact;
    case ErrorCode::version_mismatch: return ExitCode::version_mismatch;
    case ErrorCode::io:
    case ErrorCode::degenerate: return ExitCode::internal;
    default: return ExitCode::input;
  }
}

/// State of one command: merged configuration, seed, output directory and the
/// hashes of everything read and written.
class Run {
 public:
  Run(std::string command, Json config, std::ostream& log) : command_(std::move(command)), config_(std::move(config)), log_(log) {
    if (!config_.contains("seed")) fail(ErrorCode::invalid_argument, "a seed is required (--seed or config)");
    seed_ = Seed{config_.at("seed").get<std::uint64_t>()};
    out_dir_ = config_.value("out_dir", std::string("."));
    set_threads(config_.value("threads", 0));
  }

  Seed seed() const { return seed_; }
  const Json& config() const { return config_; }
  const fs::path& out_dir() const { return out_dir_; }

  bool has(const std::string& key) const { return config_.contains(key) && !config_.at(key).is_null(); }

  std::string path(const std::string& key) const {
    if (!has(key)) fail(ErrorCode::invalid_argument, "missing required setting '" + key + "'");
    return config_.at(key).get<std::string>();
  }

  /// `key` from the config, else the named artifact in the output directory.
  std::string artifact(const std::string& key, const std::string& default_name) const {
    return has(key) ? path(key) : (out_dir_ / default_name).string();
  }

  template <typename T>
  T section(const std::string& name, const std::string& key, T fallback) const {
    if (!config_.contains(name)) return fallback;
    return config_.at(name).value(key, fallback);
  }

  std::string read(const fs::path& path) {
    std::string bytes = read_file(path);
    inputs_.push_back({path.filename().string(), sha256_hex(bytes)});
    return bytes;
  }

  void write(const std::string& name, const std::string& bytes) {
    const fs::path target = out_dir_ / name;
    fs::create_directories(target.parent_path());
    const fs::path temp = target.string() + ".tmp";
    {
      std::ofstream out(temp, std::ios::binary | std::ios::trunc);
      if (!out) fail(ErrorCode::io, "cannot write " + temp.string());
      out << bytes;
      if (!out.flush()) fail(ErrorCode::io, "cannot write " + temp.string());
    }
    fs::rename(temp, target);
    outputs_.push_back({name, sha256_hex(bytes)});
    log_ << "wrote " << target.string() << '\n';
  }

  LabelledDataset dataset(const std::string& file, const std::string& schema_file = {}) {
    const std::string text = read(file);
    DatasetSchema schema;
    fs::path sibling = fs::path(file);
    sibling.replace_extension(".schema.json");
    if (!schema_file.empty()) schema = DatasetSchema::from_json_text(read(schema_file));
    else if (fs::exists(sibling)) schema = DatasetSchema::from_json_text(read(sibling));
    else schema = infer_schema(text, file);
    LoadOptions options;
    options.impute_missing = config_.value("impute_missing", false);
    return parse_dataset(text, schema, options, fs::path(file).stem().string());
  }

  void finish() {
    Json manifest;
    manifest["tool"] = "hardness";
    manifest["version"] = kToolVersion;
    manifest["command"] = command_;
    manifest["seed"] = seed_.value;
    manifest["config"] = config_;
    Json inputs = Json::array(), outputs = Json::array();
    for (const auto& [name, hash] : inputs_) inputs.push_back({{"name", name}, {"sha256", hash}});
    for (const auto& [name, hash] : outputs_) outputs.push_back({{"name", name}, {"sha256", hash}});
    manifest["inputs"] = inputs;
    manifest["outputs"] = outputs;
    Json settings = config_;
    for (const auto& key : kPathKeys) settings.erase(key);
    manifest["inputs_digest"] = sha256_hex(command_ + '\n' + settings.dump() + '\n' + inputs.dump());
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    manifest["created"] = stamp;  // not part of any digest
    write(command_ + ".manifest.json", manifest.dump(2) + "\n");
  }

 private:
  static DatasetSchema infer_schema(const std::string& text, const std::string& file) {
    const auto header = split(text.substr(0, text.find('\n')));
    if (header.size() < 2) fail(ErrorCode::schema_mismatch, file + " needs at least one feature and a class column");
    DatasetSchema schema;
    const bool named = std::find(header.begin(), header.end(), "class") != header.end();
    schema.class_column = named ? "class" : header.back();
    for (const auto& name : header)
      if (name != schema.class_column) schema.features.push_back({name, FeatureKind::continuous, {}});
    return schema;
  }

  std::string command_;
  Json config_;
  std::ostream& log_;
  Seed seed_;
  fs::path out_dir_;
  std::vector<std::pair<std::string, std::string>> inputs_;
  std::vector<std::pair<std::string, std::string>> outputs_;
};

ClassifierSpec classifier(const Run& run) {
  return ClassifierSpec::defaults(classifier_kind_from_string(run.config().value("classifier", "knn_classifier")));
}

RecordOptions record_options(const Run& run) {
  RecordOptions options;
  options.folds = run.section("records", "folds", options.folds);
  options.tuning_folds = run.section("records", "tuning_folds", options.tuning_folds);
  options.tuning_budget = run.section("records", "tuning_budget", options.tuning_budget);
  options.meta.k = run.section("records", "k", options.meta.k);
  return options;
}

EstimatorConfig estimator_config(const Run& run) {
  EstimatorConfig c;
  c.min_clusters = run.section("estimator", "min_clusters", c.min_clusters);
  c.max_clusters = run.section("estimator", "max_clusters", c.max_clusters);
  c.budget = run.section("estimator", "budget", c.budget);
  c.warmup = run.section("estimator", "warmup", c.warmup);
  c.fuzzifier = run.section("estimator", "fuzzifier", c.fuzzifier);
  c.tolerance = run.section("estimator", "tolerance", c.tolerance);
  c.max_iterations = run.section("estimator", "max_iterations", c.max_iterations);
  c.restarts = run.section("estimator", "restarts", c.restarts);
  c.outer_folds = run.section("estimator", "outer_folds", c.outer_folds);
  c.inner_folds = run.section("estimator", "inner_folds", c.inner_folds);
  c.tuning_splits = run.section("estimator", "tuning_splits", c.tuning_splits);
  c.validate();
  return c;
}

std::string meta_header() {
  std::string out;
  for (const auto name : kMetaNames) out += "," + std::string(name);
  return out;
}

std::string meta_cells(const Eigen::Ref<const RowVector>& row) {
  std::string out;
  for (Eigen::Index j = 0; j < row.size(); ++j) out += "," + real(row[j]);
  return out;
}

std::vector<std::string> csv_files(const Json& entry) {
  std::vector<std::string> paths;
  auto add = [&](const std::string& p) {
    if (fs::is_directory(p)) {
      std::vector<std::string> found;
      for (const auto& e : fs::directory_iterator(p))
        if (e.path().extension() == ".csv") found.push_back(e.path().string());
      std::sort(found.begin(), found.end());
      paths.insert(paths.end(), found.begin(), found.end());
    } else {
      paths.push_back(p);
    }
  };
  if (entry.is_string()) add(entry.get<std::string>());
  else if (entry.is_array())
    for (const auto& p : entry) add(p.get<std::string>());
  return paths;
}

void cmd_metafeatures(Run& run) {
  const auto data = run.dataset(run.path("dataset"), run.has("schema") ? run.path("schema") : std::string());
  const RecordOptions options = record_options(run);
  const FoldPlan plan = make_stratified_folds(data, options.folds, run.seed().derive(1));
  std::vector<MetaResult> results(data.size());
  parallel_for(options.folds, [&](int f) {
    MetaConfig config = options.meta;
    config.seed = run.seed().derive(10 + static_cast<std::uint64_t>(f));
    const ReferenceContext context(data.subset(plan.complement({f})), config);
    for (int row : plan.members(f)) {
      const RowVector x = data.features.row(row);
      results[row] = compute_all(context, x, context.neighbour_vote(x));
    }
  });
  std::string csv = "instance_id" + meta_header() + "\n";
  for (int i = 0; i < data.size(); ++i) csv += std::to_string(i) + meta_cells(results[i].values.transpose()) + "\n";
  run.write("metafeatures.csv", csv);
}

void cmd_synth(Run& run) {
  LabelledDataset templ;
  if (run.has("dataset")) {
    templ = run.dataset(run.path("dataset"), run.has("schema") ? run.path("schema") : std::string());
  } else {
    const int m = run.section("synth", "instances", 300);
    const int n = run.section("synth", "features", 2);
    const int c = run.section("synth", "classes", 2);
    Labels y(m);
    for (int i = 0; i < m; ++i) y[i] = i % c;
    templ = LabelledDataset::from_matrix(Matrix::Zero(m, n), y, c, "template");
  }
  GaSettings ga;
  ga.population = run.section("synth", "population", ga.population);
  ga.generations = run.section("synth", "generations", ga.generations);
  const auto grid = generate_grid(templ, run.seed(), ga);
  Json index = Json::array();
  for (const auto& g : grid) {
    run.write("synthetic/" + g.data.id + ".csv", to_csv(g.data));
    run.write("synthetic/" + g.data.id + ".schema.json", g.data.schema.to_json_text());
    run.write("synthetic/" + g.data.id + ".json", sidecar_json(g));
    index.push_back({{"id", g.data.id}, {"infeasible", g.infeasible}});
  }
  run.write("synthetic/index.json", index.dump(2) + "\n");
}

void cmd_kb(Run& run) {
  std::vector<KbSource> sources;
  for (const auto& [key, provenance] : {std::pair{"real", Provenance::real}, {"synthetic", Provenance::synthetic}}) {
    if (!run.has(key)) continue;
    for (const auto& file : csv_files(run.config().at(key))) sources.push_back({run.dataset(file), provenance});
  }
  if (sources.empty()) fail(ErrorCode::invalid_argument, "no knowledge-base sources (--real / --synthetic)");
  const auto result = build_kb(sources, classifier(run), record_options(run), run.seed());
  Json failures = Json::array();
  for (const auto& f : result.failures)
    failures.push_back({{"dataset_id", f.dataset_id}, {"code", to_string(f.code)}, {"message", f.message}});
  run.write("kb_failures.json", failures.dump(2) + "\n");
  if (result.kb.empty()) fail(ErrorCode::empty_dataset, "every knowledge-base source failed");
  run.write("kb.jsonl", kb_to_jsonl(result.kb));
}

SamplingPolicy sampling_policy(const Run& run) {
  SamplingPolicy policy;
  policy.m = run.section("sampling", "m", policy.m);
  policy.q = run.section("sampling", "q", policy.q);
  policy.realness = realness_from_string(run.section("sampling", "realness", std::string(to_string(policy.realness))));
  return policy;
}

void cmd_train(Run& run) {
  const auto data = run.dataset(run.path("dataset"), run.has("schema") ? run.path("schema") : std::string());
  const auto full = kb_from_jsonl(run.read(run.artifact("kb", "kb.jsonl")));
  const auto kb = sample_kb(full, full.means, sampling_policy(run), run.seed().derive(5));
  const EstimatorConfig config = estimator_config(run);
  const auto result = nested_cv_run(data, kb, classifier(run), config, record_options(run), run.seed());

  std::string csv = "instance_id,fold,predicted,misclassified,uncertainty,certainty" + meta_header() + "\n";
  for (int i = 0; i < data.size(); ++i)
    csv += std::to_string(i) + "," + std::to_string(result.fold[i]) + "," + std::to_string(result.predicted[i]) + "," +
           std::to_string(result.misclassified[i]) + "," + real(result.uncertainty[i]) + "," +
           real(result.certainty[i]) + meta_cells(result.meta.row(i)) + "\n";
  run.write("nested.csv", csv);

  // Deployable model: the best outer-fold configuration refitted on the
  // knowledge base plus every cross-validated record of the dataset.
  std::size_t best = 0;
  for (std::size_t f = 1; f < result.tuning.size(); ++f)
    if (result.tuning[f].value > result.tuning[best].value) best = f;
  LabelledMeta own{result.meta, Vector(data.size())};
  for (int i = 0; i < data.size(); ++i) own.flags[i] = result.misclassified[i];
  const auto model = fcm_fit(LabelledMeta::concat(LabelledMeta::from_kb(kb), own), result.tuning[best].weights,
                             result.tuning[best].n_clusters, config, run.seed().derive(7));
  run.write("model.json", model_to_json(model));
}

void cmd_estimate(Run& run) {
  const auto model = model_from_json(run.read(run.artifact("model", "model.json")));
  const std::string source = run.artifact("metafeatures", "metafeatures.csv");
  const Table table = parse_table(run.read(source), source);
  const Vector ids = table.values("instance_id", source);
  const Vector u = estimate_uncertainty_rows(model, table.meta(source));
  std::string csv = "instance_id,uncertainty\n";
  for (Eigen::Index i = 0; i < u.size(); ++i)
    csv += std::to_string(static_cast<long>(ids[i])) + "," + real(u[i]) + "\n";
  run.write("uncertainty.csv", csv);
}

struct NestedTable {
  Table table;
  std::string source;
  std::vector<int> flags;
};

NestedTable read_nested(Run& run) {
  NestedTable n;
  n.source = run.artifact("nested", "nested.csv");
  n.table = parse_table(run.read(n.source), n.source);
  const Vector m = n.table.values("misclassified", n.source);
  for (Eigen::Index i = 0; i < m.size(); ++i) n.flags.push_back(m[i] > 0.5 ? 1 : 0);
  return n;
}

void cmd_eval(Run& run) {
  const auto n = read_nested(run);
  const auto report = evaluate(n.table.values("uncertainty", n.source), n.table.values("certainty", n.source), n.flags,
                               n.table.meta(n.source));
  run.write("report.json", report_json(report));
  run.write("report.txt", report_table(report));
}

void cmd_abstain(Run& run) {
  const auto n = read_nested(run);
  run.write("abstention.csv", abstention_csv(abstention_curve(n.table.values("uncertainty", n.source), n.flags)));
}

void cmd_explain(Run& run) {
  const auto model = model_from_json(run.read(run.artifact("model", "model.json")));
  const auto kb = kb_from_jsonl(run.read(run.artifact("kb", "kb.jsonl")));
  const std::string source = run.artifact("metafeatures", "metafeatures.csv");
  const Table table = parse_table(run.read(source), source);
  const MetaMatrix meta = table.meta(source);
  const Vector ids = table.values("instance_id", source);
  require(meta.rows() > 0, source + " has no rows", ErrorCode::empty_dataset);
  Eigen::Index row = 0;
  if (run.has("instance")) {
    const long wanted = run.config().at("instance").get<long>();
    while (row < ids.size() && static_cast<long>(ids[row]) != wanted) ++row;
    require(row < ids.size(), "instance " + std::to_string(wanted) + " is not in " + source);
  } else {
    estimate_uncertainty_rows(model, meta).maxCoeff(&row);
  }
  const auto attribution = shapley(model, meta.row(row).transpose(), kb, run.seed());
  Json doc = Json::parse(force_plot_data(attribution));
  doc["instance_id"] = static_cast<long>(ids[row]);
  run.write("explanation.json", doc.dump(2) + "\n");
  run.write("explanation.txt", narrate(attribution));
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Instance hardness meta-features and fuzzy uncertainty estimation"};
  app.require_subcommand(1);
  app.fallthrough();

  std::map<std::string, Json> overrides;
  std::string config_path;
  auto text_option = [&](CLI::App* on, const std::string& flag, const std::string& key, const std::string& help) {
    on->add_option_function<std::string>(flag, [&overrides, key](const std::string& v) { overrides[key] = v; }, help);
  };
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option_function<std::uint64_t>("--seed", [&](std::uint64_t v) { overrides["seed"] = v; }, "random seed");
  app.add_option_function<int>("--threads", [&](int v) { overrides["threads"] = v; }, "worker threads (0 = all cores)");
  text_option(&app, "--out-dir", "out_dir", "directory for artifacts");

  std::map<std::string, std::function<void(Run&)>> commands{
      {"metafeatures", cmd_metafeatures}, {"synth", cmd_synth},       {"kb", cmd_kb},
      {"train", cmd_train},               {"estimate", cmd_estimate}, {"eval", cmd_eval},
      {"abstain", cmd_abstain},           {"explain", cmd_explain}};
  const std::map<std::string, std::string> descriptions{
      {"metafeatures", "per-instance meta-features with fold-aware reference sets"},
      {"synth", "synthetic datasets over the complexity grid"},
      {"kb", "knowledge base from real and synthetic datasets"},
      {"train", "nested cross-validation and the fitted cluster model"},
      {"estimate", "uncertainty for meta-feature rows"},
      {"eval", "odds ratios, AUROC and AUPRC report"},
      {"abstain", "abstention curve"},
      {"explain", "Shapley attribution of one instance"}};
  std::vector<std::string> real_sources, synthetic_sources;
  for (const auto& [name, fn] : commands) {
    CLI::App* sub = app.add_subcommand(name, descriptions.at(name));
    if (name == "metafeatures" || name == "synth" || name == "train") {
      text_option(sub, "--dataset", "dataset", "dataset CSV");
      text_option(sub, "--schema", "schema", "schema JSON");
    }
    if (name == "metafeatures" || name == "kb" || name == "train")
      text_option(sub, "--classifier", "classifier", "logistic_regression, gaussian_nb, knn_classifier or decision_tree");
    if (name == "kb") {
      sub->add_option("--real", real_sources, "real dataset CSVs or directories");
      sub->add_option("--synthetic", synthetic_sources, "synthetic dataset CSVs or directories");
    }
    if (name == "train" || name == "explain") text_option(sub, "--kb", "kb", "knowledge base JSONL");
    if (name == "estimate" || name == "explain") {
      text_option(sub, "--model", "model", "cluster model JSON");
      text_option(sub, "--metafeatures", "metafeatures", "meta-feature CSV");
    }
    if (name == "eval" || name == "abstain") text_option(sub, "--nested", "nested", "nested cross-validation CSV");
    if (name == "explain")
      sub->add_option_function<long>("--instance", [&](long v) { overrides["instance"] = v; }, "instance id");
  }

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return ExitCode::ok;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return ExitCode::input;
  }

  try {
    Json config = Json::object();
    if (!config_path.empty()) {
      try {
        config = Json::parse(read_file(config_path));
      } catch (const Json::exception& e) {
        fail(ErrorCode::schema_mismatch, "config " + config_path + " is not valid JSON: " + e.what());
      }
      config["config"] = config_path;
    }
    for (const auto& [key, value] : overrides) config[key] = value;
    if (!real_sources.empty()) config["real"] = real_sources;
    if (!synthetic_sources.empty()) config["synthetic"] = synthetic_sources;
    const std::string name = app.get_subcommands().front()->get_name();
    Run state(name, config, err);
    commands.at(name)(state);
    state.finish();
    return ExitCode::ok;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const Json::exception& e) {
    err << "error: bad configuration value: " << e.what() << '\n';
    return ExitCode::input;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return ExitCode::internal;
  }
}

}  // namespace hardness::cli
