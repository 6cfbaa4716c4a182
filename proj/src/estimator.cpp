#include "hardness/estimator.hpp"

#include "hardness/evalstats.hpp"
#include "hardness/parallel.hpp"
#include "hardness/random.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace hardness {

void EstimatorConfig::validate() const {
  require(min_clusters >= 1 && min_clusters <= max_clusters, "cluster range is empty");
  require(weight_low >= 0.0 && weight_low < weight_high, "weight range is empty");
  require(budget >= 1, "optimisation budget must be at least 1");
  require(fuzzifier > 1.0, "fuzzifier must exceed 1");
  require(tolerance > 0.0, "tolerance must be positive");
  require(max_iterations >= 1, "max iterations must be at least 1");
  require(restarts >= 1, "restarts must be at least 1");
  require(outer_folds >= 2 && inner_folds >= 2, "fold counts must be at least 2");
  require(tuning_splits >= 0, "tuning splits must be nonnegative");
}

LabelledMeta LabelledMeta::from_kb(const KnowledgeBase& kb) { return {kb.meta_matrix(), kb.flags()}; }

LabelledMeta LabelledMeta::concat(const LabelledMeta& a, const LabelledMeta& b) {
  LabelledMeta out;
  out.meta.resize(a.size() + b.size(), kMetaCount);
  out.flags.resize(a.size() + b.size());
  if (a.size()) {
    out.meta.topRows(a.size()) = a.meta;
    out.flags.head(a.size()) = a.flags;
  }
  if (b.size()) {
    out.meta.bottomRows(b.size()) = b.meta;
    out.flags.tail(b.size()) = b.flags;
  }
  return out;
}

LabelledMeta LabelledMeta::rows(const Indices& rows) const {
  LabelledMeta out;
  out.meta.resize(static_cast<Eigen::Index>(rows.size()), kMetaCount);
  out.flags.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.meta.row(static_cast<Eigen::Index>(i)) = meta.row(rows[i]);
    out.flags[static_cast<Eigen::Index>(i)] = flags[rows[i]];
  }
  return out;
}

double misclassification_rate(long tp, long fp, long tn, long fn) {
  require(tp >= 0 && fp >= 0 && tn >= 0 && fn >= 0, "confusion counts must be nonnegative");
  const long total = tp + fp + tn + fn;
  require(total > 0, "misclassification rate of no instances");
  return 1.0 - static_cast<double>(tp + tn) / static_cast<double>(total);
}

namespace {

Matrix weighted(const MetaMatrix& meta, const MetaFeatureVector& weights) {
  return meta.array().rowwise() * weights.transpose().array();
}

Matrix squared_distances(const Matrix& x, const Matrix& centers) {
  Matrix d = (-2.0 * x * centers.transpose()).colwise() + x.rowwise().squaredNorm();
  d.rowwise() += centers.rowwise().squaredNorm().transpose();
  return d.cwiseMax(0.0);
}

// Membership rows from squared distances; a zero distance gives a one-hot row.
Matrix membership_matrix(const Matrix& d2, double fuzzifier) {
  const double exponent = 1.0 / (fuzzifier - 1.0);
  Matrix u(d2.rows(), d2.cols());
  for (Eigen::Index i = 0; i < d2.rows(); ++i) {
    Eigen::Index nearest = 0;
    const double dmin = d2.row(i).minCoeff(&nearest);
    if (!(dmin > 0.0)) {
      u.row(i).setZero();
      u(i, nearest) = 1.0;
      continue;
    }
    for (Eigen::Index j = 0; j < d2.cols(); ++j) u(i, j) = std::pow(dmin / d2(i, j), exponent);
    u.row(i) /= u.row(i).sum();
  }
  return u;
}

Matrix kmeans_plus_plus(const Matrix& x, int clusters, Rng& rng) {
  const Eigen::Index n = x.rows();
  Matrix centers(clusters, x.cols());
  centers.row(0) = x.row(rng.index(static_cast<int>(n)));
  Vector nearest = (x.rowwise() - centers.row(0)).rowwise().squaredNorm();
  for (int c = 1; c < clusters; ++c) {
    const double total = nearest.sum();
    Eigen::Index pick = 0;
    if (total > 0.0) {
      double target = rng.uniform() * total;
      for (pick = 0; pick < n - 1; ++pick) {
        target -= nearest[pick];
        if (target < 0.0) break;
      }
    } else {
      pick = rng.index(static_cast<int>(n));
    }
    centers.row(c) = x.row(pick);
    nearest = nearest.cwiseMin((x.rowwise() - centers.row(c)).rowwise().squaredNorm());
  }
  return centers;
}

struct FcmRun {
  Matrix centers;
  std::vector<double> objective;
  int iterations = 0;
};

FcmRun fcm_once(const Matrix& x, int clusters, double fuzzifier, double tolerance, int max_iterations, Rng& rng) {
  FcmRun run;
  run.centers = kmeans_plus_plus(x, clusters, rng);
  for (run.iterations = 1; run.iterations <= max_iterations; ++run.iterations) {
    const Matrix um = membership_matrix(squared_distances(x, run.centers), fuzzifier).array().pow(fuzzifier);
    const Vector mass = um.colwise().sum().transpose();
    Matrix next = um.transpose() * x;
    for (int c = 0; c < clusters; ++c) {
      if (mass[c] > 0.0) next.row(c) /= mass[c];
      else next.row(c) = run.centers.row(c);
    }
    run.objective.push_back((um.array() * squared_distances(x, next).array()).sum());
    const double shift = (next - run.centers).rowwise().norm().maxCoeff();
    run.centers = std::move(next);
    if (shift < tolerance) break;
  }
  run.iterations = std::min(run.iterations, max_iterations);
  return run;
}

}  // namespace

FuzzyClusterModel fcm_fit(const LabelledMeta& data, const MetaFeatureVector& weights, int n_clusters,
                          const EstimatorConfig& config, Seed seed) {
  require(n_clusters >= 1, "n_clusters must be at least 1");
  require(data.size() >= n_clusters, "fewer records than clusters", ErrorCode::empty_dataset);
  require(weights.allFinite() && (weights.array() >= 0.0).all(), "weights must be finite and nonnegative");
  require(weights.sum() > 0.0, "weights are all zero");
  require(config.fuzzifier > 1.0, "fuzzifier must exceed 1");
  const Matrix x = weighted(data.meta, weights);
  const double spread = std::sqrt((x.rowwise() - x.colwise().mean()).rowwise().squaredNorm().mean());
  const double tolerance = config.tolerance * std::max(spread, std::numeric_limits<double>::min());

  Rng rng(seed);
  FcmRun best;
  double best_distortion = std::numeric_limits<double>::infinity();
  for (int r = 0; r < config.restarts; ++r) {
    FcmRun run = fcm_once(x, n_clusters, config.fuzzifier, tolerance, config.max_iterations, rng);
    if (run.objective.back() < best_distortion) {
      best_distortion = run.objective.back();
      best = std::move(run);
    }
  }

  FuzzyClusterModel model;
  model.centers = std::move(best.centers);
  model.fuzzifier = config.fuzzifier;
  model.weights = weights;
  model.n_clusters = n_clusters;
  model.objective = std::move(best.objective);
  model.iterations = best.iterations;
  model.rates.resize(n_clusters);
  model.empty_clusters.assign(n_clusters, false);

  const Matrix u = membership_matrix(squared_distances(x, model.centers), config.fuzzifier);
  std::vector<long> wrong(n_clusters, 0), right(n_clusters, 0);
  for (Eigen::Index i = 0; i < u.rows(); ++i) {
    Eigen::Index c = 0;
    u.row(i).maxCoeff(&c);
    (data.flags[i] > 0.5 ? wrong : right)[c] += 1;
  }
  const double global = data.flags.mean();
  for (int c = 0; c < n_clusters; ++c) {
    if (wrong[c] + right[c] == 0) {
      model.rates[c] = global;
      model.empty_clusters[c] = true;
    } else {
      // Records carry only a correct/incorrect flag, so every error is
      // counted as a false positive and every hit as a true negative.
      model.rates[c] = misclassification_rate(0, wrong[c], right[c], 0);
    }
  }
  return model;
}

FuzzyClusterModel fcm_fit(const KnowledgeBase& kb, const MetaFeatureVector& weights, int n_clusters,
                          const EstimatorConfig& config, Seed seed) {
  return fcm_fit(LabelledMeta::from_kb(kb), weights, n_clusters, config, seed);
}

Vector memberships(const FuzzyClusterModel& model, const Eigen::Ref<const Vector>& point) {
  require(model.centers.rows() >= 1, "model has no clusters");
  require(point.size() == model.centers.cols(), "point has the wrong dimension");
  const Matrix d2 = (model.centers.rowwise() - point.transpose()).rowwise().squaredNorm().transpose();
  return membership_matrix(d2, model.fuzzifier).row(0).transpose();
}

double defuzzify(const Eigen::Ref<const Vector>& membership, const Eigen::Ref<const Vector>& rates) {
  require(membership.size() == rates.size(), "membership and rates differ in length");
  const double mass = membership.sum();
  require(mass > 0.0, "membership is all zero", ErrorCode::degenerate);
  return membership.dot(rates) / mass;
}

double estimate_uncertainty(const FuzzyClusterModel& model, const MetaFeatureVector& meta) {
  return defuzzify(memberships(model, meta.cwiseProduct(model.weights)), model.rates);
}

Vector estimate_uncertainty_rows(const FuzzyClusterModel& model, const MetaMatrix& meta) {
  const Matrix u = membership_matrix(squared_distances(weighted(meta, model.weights), model.centers),
                                     model.fuzzifier);
  return u * model.rates;
}

double fcm_objective(const FuzzyClusterModel& model, const MetaMatrix& meta) {
  const Matrix d2 = squared_distances(weighted(meta, model.weights), model.centers);
  return (membership_matrix(d2, model.fuzzifier).array().pow(model.fuzzifier) * d2.array()).sum();
}

SearchSpace estimator_search_space(const EstimatorConfig& config) {
  SearchSpace space;
  for (const auto name : kMetaNames)
    space.push_back({std::string(name), config.weight_low, config.weight_high, Scale::linear});
  space.push_back({"n_clusters", static_cast<double>(config.min_clusters), static_cast<double>(config.max_clusters),
                   Scale::integer});
  return space;
}

double tuning_objective(const std::vector<TuningSplit>& splits, const MetaFeatureVector& weights, int n_clusters,
                        const EstimatorConfig& config, Seed seed) {
  require(!splits.empty(), "no tuning splits");
  if (!(weights.sum() > 0.0)) return 0.0;
  double total = 0.0;
  for (std::size_t s = 0; s < splits.size(); ++s) {
    const auto& split = splits[s];
    const auto model = fcm_fit(split.train, weights, n_clusters, config, seed.derive(s));
    const Vector u = estimate_uncertainty_rows(model, split.validation.meta);
    std::vector<int> flags(split.validation.size());
    for (int i = 0; i < split.validation.size(); ++i) flags[i] = split.validation.flags[i] > 0.5;
    total += utility_product(summarise_method("estimator", u, flags));
  }
  return total / static_cast<double>(splits.size());
}

EstimatorTuning optimize(const std::vector<TuningSplit>& splits, const EstimatorConfig& config, Seed seed) {
  config.validate();
  require(!splits.empty(), "no tuning splits");
  for (const auto& split : splits) {
    const double positives = split.validation.flags.sum();
    require(positives > 0.0 && positives < split.validation.size(),
            "validation records contain a single class", ErrorCode::single_class);
    require(split.train.size() >= config.max_clusters, "fewer training records than the largest cluster count",
            ErrorCode::empty_dataset);
  }
  const SearchSpace space = estimator_search_space(config);
  const Seed fit_seed = seed.derive(1);
  auto objective = [&](const Vector& point) {
    return tuning_objective(splits, point.head<kMetaCount>(), static_cast<int>(point[kMetaCount]), config, fit_seed);
  };
  BayesOptOptions options;
  options.budget = config.budget;
  options.warmup = std::min(config.warmup, config.budget);
  const auto result = maximize(space, objective, options, seed.derive(2));
  EstimatorTuning out;
  out.weights = result.best.head<kMetaCount>();
  out.n_clusters = static_cast<int>(result.best[kMetaCount]);
  out.value = result.best_value;
  out.history = result.history;
  return out;
}

EstimatorTuning optimize(const LabelledMeta& train, const LabelledMeta& validation, const EstimatorConfig& config,
                         Seed seed) {
  return optimize(std::vector<TuningSplit>{{train, validation}}, config, seed);
}

namespace {

LabelledMeta records_meta(const CrossValidatedRecords& records) {
  LabelledMeta out;
  out.meta = records.meta;
  out.flags.resize(records.meta.rows());
  for (Eigen::Index i = 0; i < out.flags.size(); ++i) out.flags[i] = records.misclassified[i];
  return out;
}

}  // namespace

NestedCvResult nested_cv_run(const LabelledDataset& data, const KnowledgeBase& kb, const ClassifierSpec& spec,
                             const EstimatorConfig& config, const RecordOptions& records, Seed seed) {
  config.validate();
  RecordOptions outer_options = records;
  outer_options.folds = config.outer_folds;
  RecordOptions inner_options = records;
  inner_options.folds = config.inner_folds;

  const auto outer = cross_validated_records(data, spec, outer_options, seed.derive(1));
  const LabelledMeta base = LabelledMeta::from_kb(kb);
  const int m = data.size();

  NestedCvResult result;
  result.uncertainty.resize(m);
  result.misclassified = outer.misclassified;
  result.certainty = outer.probability_baseline;
  result.meta = outer.meta;
  result.predicted = outer.predicted;
  result.fold = outer.fold;
  result.tuning.resize(config.outer_folds);

  for (int f = 0; f < config.outer_folds; ++f) {
    Indices train_rows, test_rows;
    for (int i = 0; i < m; ++i) (outer.fold[i] == f ? test_rows : train_rows).push_back(i);
    try {
      const auto inner = cross_validated_records(data.subset(train_rows), spec, inner_options,
                                                 seed.derive(100 + static_cast<std::uint64_t>(f)));
      const LabelledMeta inner_meta = records_meta(inner);
      const int splits = config.tuning_splits > 0 ? std::min(config.tuning_splits, config.inner_folds)
                                                  : config.inner_folds;
      std::vector<TuningSplit> tuning;
      for (int g = 0; g < splits; ++g) {
        Indices fit_rows, validation_rows;
        for (int i = 0; i < inner_meta.size(); ++i) (inner.fold[i] == g ? validation_rows : fit_rows).push_back(i);
        TuningSplit split{LabelledMeta::concat(base, inner_meta.rows(fit_rows)), inner_meta.rows(validation_rows)};
        const double positives = split.validation.flags.sum();
        if (positives > 0.0 && positives < split.validation.size()) tuning.push_back(std::move(split));
      }
      require(!tuning.empty(), "every inner validation fold holds a single class", ErrorCode::single_class);
      const auto best = optimize(tuning, config, seed.derive(200 + static_cast<std::uint64_t>(f)));
      const auto model = fcm_fit(LabelledMeta::concat(base, inner_meta), best.weights, best.n_clusters, config,
                                 seed.derive(300 + static_cast<std::uint64_t>(f)));
      for (int row : test_rows) result.uncertainty[row] = estimate_uncertainty(model, outer.meta.row(row).transpose());
      result.tuning[f] = best;
    } catch (const Error& e) {
      fail(e.code(), "outer fold " + std::to_string(f) + ": " + e.what());
    }
  }
  return result;
}

std::string model_to_json(const FuzzyClusterModel& model) {
  nlohmann::ordered_json j;
  j["format"] = "hardness-fcm";
  j["version"] = kModelFormatVersion;
  j["n_clusters"] = model.n_clusters;
  j["fuzzifier"] = model.fuzzifier;
  j["columns"] = std::vector<std::string>(kMetaNames.begin(), kMetaNames.end());
  j["weights"] = std::vector<double>(model.weights.data(), model.weights.data() + kMetaCount);
  j["centers"] = nlohmann::ordered_json::array();
  for (Eigen::Index c = 0; c < model.centers.rows(); ++c) {
    std::vector<double> row(model.centers.cols());
    for (Eigen::Index d = 0; d < model.centers.cols(); ++d) row[d] = model.centers(c, d);
    j["centers"].push_back(row);
  }
  j["rates"] = std::vector<double>(model.rates.data(), model.rates.data() + model.rates.size());
  j["empty_clusters"] = model.empty_clusters;
  return j.dump(2) + "\n";
}

FuzzyClusterModel model_from_json(const std::string& text) {
  FuzzyClusterModel model;
  try {
    const auto j = nlohmann::json::parse(text);
    if (j.value("format", "") != "hardness-fcm") fail(ErrorCode::schema_mismatch, "not a cluster model file");
    if (j.value("version", -1) != kModelFormatVersion)
      fail(ErrorCode::version_mismatch,
           "cluster model format version " + std::to_string(j.value("version", -1)) + " is not supported");
    model.n_clusters = j.at("n_clusters").get<int>();
    model.fuzzifier = j.at("fuzzifier").get<double>();
    const auto weights = j.at("weights").get<std::vector<double>>();
    require(static_cast<int>(weights.size()) == kMetaCount, "model needs seven weights", ErrorCode::schema_mismatch);
    for (int d = 0; d < kMetaCount; ++d) model.weights[d] = weights[d];
    const auto centers = j.at("centers").get<std::vector<std::vector<double>>>();
    const auto rates = j.at("rates").get<std::vector<double>>();
    require(static_cast<int>(centers.size()) == model.n_clusters && static_cast<int>(rates.size()) == model.n_clusters,
            "model cluster count does not match its centres", ErrorCode::schema_mismatch);
    model.centers.resize(model.n_clusters, kMetaCount);
    model.rates.resize(model.n_clusters);
    for (int c = 0; c < model.n_clusters; ++c) {
      require(static_cast<int>(centers[c].size()) == kMetaCount, "centre has the wrong dimension",
              ErrorCode::schema_mismatch);
      for (int d = 0; d < kMetaCount; ++d) model.centers(c, d) = centers[c][d];
      model.rates[c] = rates[c];
    }
    model.empty_clusters = j.value("empty_clusters", std::vector<bool>(model.n_clusters, false));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::unparseable_cell, std::string("malformed cluster model: ") + e.what());
  }
  return model;
}

}  // namespace hardness
