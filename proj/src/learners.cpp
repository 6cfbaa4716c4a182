#include "hardness/learners.hpp"

#include "hardness/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hardness {

namespace {

double sigmoid(double t) {
  return t >= 0.0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
}

Vector softmax(const Vector& logits) {
  const double top = logits.maxCoeff();
  if (!std::isfinite(top)) return Vector::Constant(logits.size(), 1.0 / logits.size());
  Vector p = (logits.array() - top).exp();
  return p / p.sum();
}

int argmax(const Eigen::Ref<const Vector>& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return static_cast<int>(best);
}

Hyperparameters to_hyperparameters(const SearchSpace& space, const Vector& point) {
  Hyperparameters h;
  for (std::size_t d = 0; d < space.size(); ++d) h[space[d].name] = point[static_cast<Eigen::Index>(d)];
  return h;
}

double get(const Hyperparameters& h, const std::string& key, double fallback) {
  const auto it = h.find(key);
  return it == h.end() ? fallback : it->second;
}

}  // namespace

const char* to_string(ClassifierKind kind) {
  switch (kind) {
    case ClassifierKind::logistic_regression: return "logistic_regression";
    case ClassifierKind::gaussian_nb: return "gaussian_nb";
    case ClassifierKind::knn_classifier: return "knn_classifier";
    case ClassifierKind::decision_tree: return "decision_tree";
  }
  return "logistic_regression";
}

ClassifierKind classifier_kind_from_string(const std::string& text) {
  if (text == "logistic_regression" || text == "lr") return ClassifierKind::logistic_regression;
  if (text == "gaussian_nb" || text == "nb") return ClassifierKind::gaussian_nb;
  if (text == "knn_classifier" || text == "knn") return ClassifierKind::knn_classifier;
  if (text == "decision_tree" || text == "tree") return ClassifierKind::decision_tree;
  fail(ErrorCode::invalid_argument, "unknown classifier kind '" + text + "'");
}

ClassifierSpec ClassifierSpec::defaults(ClassifierKind kind) {
  ClassifierSpec spec{kind, {}};
  switch (kind) {
    case ClassifierKind::logistic_regression:
      spec.space = {{"C", 0.01, 100.0, Scale::log}};
      break;
    case ClassifierKind::gaussian_nb:
      spec.space = {{"var_smoothing", 1e-9, 1.0, Scale::log}};
      break;
    case ClassifierKind::knn_classifier:
      spec.space = {{"n_neighbors", 2, 11, Scale::integer}};
      break;
    case ClassifierKind::decision_tree:
      spec.space = {{"max_depth", 1, 20, Scale::integer}, {"min_samples_leaf", 1, 20, Scale::integer}};
      break;
  }
  return spec;
}

// ---------------------------------------------------------------------------
// Classifiers

TrainedClassifier::TrainedClassifier(ClassifierKind kind, Hyperparameters hyperparameters,
                                     FeatureSpace space, std::vector<std::string> classes,
                                     Parameters parameters)
    : kind_(kind),
      hyperparameters_(std::move(hyperparameters)),
      space_(std::move(space)),
      classes_(std::move(classes)),
      parameters_(std::move(parameters)) {}

Vector TrainedClassifier::proba_transformed(const Eigen::Ref<const Vector>& z) const {
  const int classes = num_classes();
  return std::visit(
      [&](const auto& model) -> Vector {
        using T = std::decay_t<decltype(model)>;
        if constexpr (std::is_same_v<T, LogisticModel>) {
          if (model.weights.rows() == 1) {
            const double p = sigmoid(model.weights.row(0).dot(z) + model.intercepts[0]);
            Vector out(2);
            out << 1.0 - p, p;
            return out;
          }
          Vector out(classes);
          for (int c = 0; c < classes; ++c) out[c] = sigmoid(model.weights.row(c).dot(z) + model.intercepts[c]);
          const double total = out.sum();
          return total > 0.0 ? Vector(out / total) : Vector::Constant(classes, 1.0 / classes);
        } else if constexpr (std::is_same_v<T, GaussianNbModel>) {
          Vector logits(classes);
          for (int c = 0; c < classes; ++c) {
            const auto var = model.variances.row(c).array();
            logits[c] = model.log_priors[c] -
                        0.5 * ((2.0 * M_PI * var).log() +
                               (z.transpose().array() - model.means.row(c).array()).square() / var)
                                  .sum();
          }
          return softmax(logits);
        } else if constexpr (std::is_same_v<T, KnnModel>) {
          const auto m = static_cast<int>(model.points.rows());
          const int k = std::min(model.neighbours, m);
          std::vector<std::pair<double, int>> d(m);
          for (int i = 0; i < m; ++i) d[i] = {(model.points.row(i).transpose() - z).squaredNorm(), i};
          std::partial_sort(d.begin(), d.begin() + k, d.end());
          Vector votes = Vector::Zero(classes);
          for (int i = 0; i < k; ++i) votes[model.labels[d[i].second]] += 1.0;
          return votes / k;
        } else {
          return model.tree.predict_proba(z);
        }
      },
      parameters_);
}

Matrix TrainedClassifier::predict_proba(const Matrix& raw) const {
  const Matrix z = space_.transform(raw);
  Matrix out(z.rows(), num_classes());
  for (Eigen::Index i = 0; i < z.rows(); ++i) out.row(i) = proba_transformed(z.row(i).transpose()).transpose();
  return out;
}

Labels TrainedClassifier::predict(const Matrix& raw) const {
  const Matrix p = predict_proba(raw);
  Labels out(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index i = 0; i < p.rows(); ++i) out[static_cast<std::size_t>(i)] = argmax(p.row(i).transpose());
  return out;
}

std::pair<Vector, double> fit_binary_logistic(const Matrix& z, const Eigen::Ref<const Vector>& labels,
                                              double c, int max_iterations) {
  require(c > 0.0, "regularisation strength must be positive");
  const Eigen::Index n = z.rows();
  const Eigen::Index d = z.cols();
  Matrix a(n, d + 1);
  a.leftCols(d) = z;
  a.col(d).setOnes();
  Vector beta = Vector::Zero(d + 1);
  Vector penalty = Vector::Constant(d + 1, 1.0 / c);
  penalty[d] = 0.0;

  auto loss = [&](const Vector& b) {
    const Vector eta = a * b;
    double value = 0.5 * (penalty.array() * b.array().square()).sum();
    for (Eigen::Index i = 0; i < n; ++i) {
      // log(1 + exp(eta)) - y * eta, evaluated stably
      const double e = eta[i];
      value += (e > 0 ? e + std::log1p(std::exp(-e)) : std::log1p(std::exp(e))) - labels[i] * e;
    }
    return value;
  };

  double current = loss(beta);
  for (int iter = 0; iter < max_iterations; ++iter) {
    const Vector eta = a * beta;
    Vector p(n), w(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      p[i] = sigmoid(eta[i]);
      w[i] = std::max(p[i] * (1.0 - p[i]), 1e-12);
    }
    const Vector grad = a.transpose() * (p - labels) + penalty.cwiseProduct(beta);
    Matrix hess = a.transpose() * w.asDiagonal() * a;
    hess.diagonal() += penalty;
    hess.diagonal().array() += 1e-9;
    const Vector step = hess.ldlt().solve(grad);
    double scale = 1.0;
    Vector next = beta - step;
    double value = loss(next);
    while (value > current + 1e-12 && scale > 1e-6) {
      scale *= 0.5;
      next = beta - scale * step;
      value = loss(next);
    }
    const double change = (next - beta).cwiseAbs().maxCoeff();
    beta = next;
    current = value;
    if (change < 1e-8) break;
  }
  return {beta.head(d), beta[d]};
}

TrainedClassifier fit_classifier(ClassifierKind kind, const Hyperparameters& hyperparameters,
                                 const LabelledDataset& train, Seed seed) {
  require(train.size() >= 1, "cannot fit a classifier on no data");
  FeatureSpace space = FeatureSpace::fit(train);
  const Matrix z = space.transform(train.features);
  const int classes = train.num_classes();
  const auto counts = train.class_counts();

  TrainedClassifier::Parameters parameters;
  switch (kind) {
    case ClassifierKind::logistic_regression: {
      const double c = get(hyperparameters, "C", 1.0);
      LogisticModel model;
      const int problems = classes == 2 ? 1 : classes;
      model.weights.resize(problems, z.cols());
      model.intercepts.resize(problems);
      for (int s = 0; s < problems; ++s) {
        const int positive = classes == 2 ? 1 : s;
        Vector target(z.rows());
        for (Eigen::Index i = 0; i < z.rows(); ++i) target[i] = train.labels[i] == positive ? 1.0 : 0.0;
        auto [w, b] = fit_binary_logistic(z, target, c);
        model.weights.row(s) = w.transpose();
        model.intercepts[s] = b;
      }
      parameters = std::move(model);
      break;
    }
    case ClassifierKind::gaussian_nb: {
      const double smoothing = get(hyperparameters, "var_smoothing", 1e-9);
      GaussianNbModel model;
      model.means = Matrix::Zero(classes, z.cols());
      model.variances = Matrix::Ones(classes, z.cols());
      model.log_priors = Vector::Constant(classes, -std::numeric_limits<double>::infinity());
      double largest_var = 0.0;
      for (Eigen::Index j = 0; j < z.cols(); ++j) {
        const double mu = z.col(j).mean();
        largest_var = std::max(largest_var, (z.col(j).array() - mu).square().mean());
      }
      const double epsilon = smoothing * std::max(largest_var, 1e-12);
      for (int c = 0; c < classes; ++c) {
        if (counts[c] == 0) continue;
        Matrix rows(counts[c], z.cols());
        int r = 0;
        for (int i = 0; i < train.size(); ++i)
          if (train.labels[i] == c) rows.row(r++) = z.row(i);
        const RowVector mu = rows.colwise().mean();
        model.means.row(c) = mu;
        model.variances.row(c) =
            (rows.rowwise() - mu).array().square().colwise().mean() + epsilon;
        model.log_priors[c] = std::log(static_cast<double>(counts[c]) / train.size());
      }
      parameters = std::move(model);
      break;
    }
    case ClassifierKind::knn_classifier: {
      const int k = static_cast<int>(std::lround(get(hyperparameters, "n_neighbors", 5)));
      require(k >= 1, "n_neighbors must be at least 1");
      parameters = KnnModel{z, train.labels, k};
      break;
    }
    case ClassifierKind::decision_tree: {
      TreeOptions options;
      options.max_depth = static_cast<int>(std::lround(get(hyperparameters, "max_depth", 0)));
      options.min_samples_leaf =
          static_cast<int>(std::lround(get(hyperparameters, "min_samples_leaf", 1)));
      parameters = TreeModel{DecisionTree::grow(z, train.labels, classes, options, seed)};
      break;
    }
  }
  return TrainedClassifier(kind, hyperparameters, std::move(space), train.classes,
                           std::move(parameters));
}

double balanced_accuracy(const Labels& truth, const Labels& predicted) {
  require(truth.size() == predicted.size(), "label vectors differ in length");
  require(!truth.empty(), "balanced accuracy of no predictions");
  const int classes = *std::max_element(truth.begin(), truth.end()) + 1;
  std::vector<double> hits(classes, 0.0), totals(classes, 0.0);
  for (std::size_t i = 0; i < truth.size(); ++i) {
    totals[truth[i]] += 1.0;
    if (truth[i] == predicted[i]) hits[truth[i]] += 1.0;
  }
  double sum = 0.0;
  int present = 0;
  for (int c = 0; c < classes; ++c) {
    if (totals[c] > 0.0) {
      sum += hits[c] / totals[c];
      ++present;
    }
  }
  return sum / present;
}

TuningResult tune(const ClassifierSpec& spec, const LabelledDataset& train, int folds, int budget,
                  Seed seed) {
  require(folds >= 2, "tuning needs at least two folds");
  require(budget >= 1, "search budget must be at least 1");
  const auto counts = train.class_counts();
  int smallest = std::numeric_limits<int>::max();
  for (int c = 0; c < counts.size(); ++c)
    if (counts[c] > 0) smallest = std::min(smallest, counts[c]);
  const int k = std::min(folds, smallest);
  require(k >= 2, "every class needs at least two members for tuning",
          ErrorCode::class_too_small);
  const FoldPlan plan = make_stratified_folds(train, k, seed.derive(1));
  std::vector<LabelledDataset> fit_parts, held_out;
  for (int f = 0; f < k; ++f) {
    fit_parts.push_back(train.subset(plan.complement({f})));
    held_out.push_back(train.subset(plan.members(f)));
  }

  std::vector<std::pair<Vector, double>> cache;
  TuningResult result;
  auto objective = [&](const Vector& point) {
    for (const auto& [p, v] : cache)
      if ((p - point).cwiseAbs().maxCoeff() < 1e-12) return v;
    const Hyperparameters h = to_hyperparameters(spec.space, point);
    double score = 0.0;
    for (int f = 0; f < k; ++f) {
      const auto model = fit_classifier(spec.kind, h, fit_parts[f], seed.derive(100 + f));
      score += balanced_accuracy(held_out[f].labels, model.predict(held_out[f].features));
    }
    score /= k;
    cache.emplace_back(point, score);
    return score;
  };
  BayesOptOptions options;
  options.budget = budget;
  options.warmup = std::min(budget, 10);
  options.candidates = 256;
  const auto search = maximize(spec.space, objective, options, seed.derive(2));
  result.best = to_hyperparameters(spec.space, search.best);
  result.best_score = search.best_value;
  for (const auto& e : search.history) result.scores.push_back(e.value);
  return result;
}

TrainedClassifier train_tuned(const ClassifierSpec& spec, const LabelledDataset& train, int folds,
                              int budget, Seed seed) {
  const auto tuned = tune(spec, train, folds, budget, seed);
  return fit_classifier(spec.kind, tuned.best, train, seed.derive(3));
}

double probability_uncertainty(const Eigen::Ref<const Vector>& probabilities) {
  return std::abs(probabilities.maxCoeff() - 0.5);
}

// ---------------------------------------------------------------------------
// Densities

double silverman_bandwidth(const Eigen::Ref<const Vector>& values) {
  const auto n = values.size();
  require(n >= 1, "bandwidth of no values");
  const double mean = values.mean();
  const double sd = n > 1 ? std::sqrt((values.array() - mean).square().sum() / (n - 1)) : 0.0;
  std::vector<double> sorted(values.data(), values.data() + n);
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&](double q) {
    const double pos = q * (n - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min<std::size_t>(lo + 1, sorted.size() - 1);
    return sorted[lo] + (pos - lo) * (sorted[hi] - sorted[lo]);
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  double spread = iqr > 0.0 ? std::min(sd, iqr / 1.34) : sd;
  const double h = 0.9 * spread * std::pow(static_cast<double>(n), -0.2);
  return h > 0.0 ? h : 1e-3 * std::max(1.0, std::abs(mean));
}

ClassConditionalDensities::ClassConditionalDensities(const LabelledDataset& reference)
    : num_classes_(reference.num_classes()) {
  const int features = reference.num_features();
  kinds_.resize(features);
  samples_.assign(features, std::vector<Vector>(num_classes_));
  widths_.assign(features, std::vector<double>(num_classes_, 1.0));
  frequency_.assign(features, std::vector<Vector>(num_classes_));
  const auto counts = reference.class_counts();
  class_sizes_.assign(counts.data(), counts.data() + counts.size());
  for (int n = 0; n < features; ++n) {
    kinds_[n] = reference.kind(n);
    const int levels = std::max(static_cast<int>(reference.levels[n].size()),
                                static_cast<int>(reference.features.col(n).maxCoeff()) + 1);
    for (int c = 0; c < num_classes_; ++c) {
      Vector values(counts[c]);
      int r = 0;
      for (int i = 0; i < reference.size(); ++i)
        if (reference.labels[i] == c) values[r++] = reference.features(i, n);
      if (kinds_[n] == FeatureKind::nominal) {
        Vector freq = Vector::Zero(std::max(levels, 1));
        for (Eigen::Index i = 0; i < values.size(); ++i) freq[static_cast<Eigen::Index>(values[i])] += 1.0;
        if (values.size() > 0) freq /= static_cast<double>(values.size());
        frequency_[n][c] = std::move(freq);
      } else if (values.size() > 0) {
        widths_[n][c] = silverman_bandwidth(values);
      }
      samples_[n][c] = std::move(values);
    }
  }
}

double ClassConditionalDensities::density(int feature, int c, double value) const {
  if (kinds_[feature] == FeatureKind::nominal) {
    const auto& freq = frequency_[feature][c];
    const auto code = static_cast<Eigen::Index>(value);
    return code >= 0 && code < freq.size() ? freq[code] : 0.0;
  }
  const auto& values = samples_[feature][c];
  if (values.size() == 0) return 0.0;
  const double h = widths_[feature][c];
  const double sum = ((values.array() - value) / h).square().unaryExpr([](double q) {
                       return std::exp(-0.5 * q);
                     }).sum();
  return sum / (static_cast<double>(values.size()) * h * std::sqrt(2.0 * M_PI));
}

double ClassConditionalDensities::log_likelihood(const Eigen::Ref<const RowVector>& raw, int c,
                                                 bool* floored) const {
  double total = 0.0;
  for (int n = 0; n < num_features(); ++n) {
    double p = density(n, c, raw[n]);
    if (!(p > 0.0)) {
      if (floored) *floored = true;
      if (kinds_[n] == FeatureKind::nominal) {
        p = 1.0 / (class_sizes_[c] + static_cast<double>(frequency_[n][c].size()));
      } else {
        p = std::numeric_limits<double>::min();
      }
    }
    total += std::log(p);
  }
  return total;
}

double fisher_ratio(const Eigen::Ref<const Vector>& values, const Labels& labels, int num_classes,
                    bool* capped) {
  require(values.size() == static_cast<Eigen::Index>(labels.size()), "values and labels differ");
  const double mu = values.mean();
  Vector n = Vector::Zero(num_classes), sum = Vector::Zero(num_classes),
         sq = Vector::Zero(num_classes);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    n[labels[i]] += 1.0;
    sum[labels[i]] += values[i];
  }
  const Vector class_mean = sum.array() / n.array().max(1.0);
  for (Eigen::Index i = 0; i < values.size(); ++i) {
    const double d = values[i] - class_mean[labels[i]];
    sq[labels[i]] += d * d;
  }
  const double between = (n.array() * (class_mean.array() - mu).square()).sum();
  const double within = sq.sum();
  constexpr double cap = 1e6;
  if (within <= 1e-12 * std::max(1.0, between)) {
    if (between <= 0.0) return 0.0;
    if (capped) *capped = true;
    return cap;
  }
  const double ratio = between / within;
  if (ratio > cap) {
    if (capped) *capped = true;
    return cap;
  }
  return ratio;
}

double fisher_ratio(const LabelledDataset& data, int feature, bool* capped) {
  const Vector column = data.features.col(feature);
  if (data.kind(feature) != FeatureKind::nominal) {
    return fisher_ratio(column, data.labels, data.num_classes(), capped);
  }
  // Nominal columns: best ratio over their category indicators.
  double best = 0.0;
  const int levels = static_cast<int>(column.maxCoeff()) + 1;
  for (int l = 0; l < levels; ++l) {
    const Vector indicator = (column.array() == l).cast<double>();
    best = std::max(best, fisher_ratio(indicator, data.labels, data.num_classes(), capped));
  }
  return best;
}

LinearSeparator::LinearSeparator(const Matrix& z, const Labels& labels, int num_classes, double c) {
  const int problems = num_classes == 2 ? 1 : num_classes;
  weights_.resize(problems, z.cols());
  intercepts_.resize(problems);
  for (int s = 0; s < problems; ++s) {
    const int positive = num_classes == 2 ? 1 : s;
    Vector target(z.rows());
    for (Eigen::Index i = 0; i < z.rows(); ++i) target[i] = labels[i] == positive ? 1.0 : 0.0;
    auto [w, b] = fit_binary_logistic(z, target, c);
    if (!(w.norm() > 1e-12)) {
      fail(ErrorCode::degenerate, "reference separator has a zero weight vector");
    }
    weights_.row(s) = w.transpose();
    intercepts_[s] = b;
  }
}

double LinearSeparator::signed_margin(int s, const Eigen::Ref<const Vector>& z) const {
  return (weights_.row(s).dot(z) + intercepts_[s]) / weights_.row(s).norm();
}

double LinearSeparator::margin(const Eigen::Ref<const Vector>& z) const {
  double best = std::numeric_limits<double>::infinity();
  for (int s = 0; s < size(); ++s) best = std::min(best, std::abs(signed_margin(s, z)));
  return best;
}

// ---------------------------------------------------------------------------
// Platt scaling

double PlattParameters::probability(double score) const {
  const double t = a * score + b;
  return t >= 0.0 ? std::exp(-t) / (1.0 + std::exp(-t)) : 1.0 / (1.0 + std::exp(t));
}

PlattParameters platt_scale(const Eigen::Ref<const Vector>& scores, const std::vector<int>& labels) {
  require(scores.size() == static_cast<Eigen::Index>(labels.size()), "scores and labels differ");
  double prior1 = 0.0, prior0 = 0.0;
  for (int y : labels) (y ? prior1 : prior0) += 1.0;
  require(prior1 > 0.0 && prior0 > 0.0, "Platt scaling needs both classes", ErrorCode::single_class);

  const double hi = (prior1 + 1.0) / (prior1 + 2.0);
  const double lo = 1.0 / (prior0 + 2.0);
  const auto n = scores.size();
  Vector t(n);
  for (Eigen::Index i = 0; i < n; ++i) t[i] = labels[i] ? hi : lo;

  double a = 0.0;
  double b = std::log((prior0 + 1.0) / (prior1 + 1.0));
  auto objective = [&](double aa, double bb) {
    double f = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double fa = scores[i] * aa + bb;
      f += fa >= 0.0 ? t[i] * fa + std::log1p(std::exp(-fa)) : (t[i] - 1.0) * fa + std::log1p(std::exp(fa));
    }
    return f;
  };
  double fval = objective(a, b);
  for (int iter = 0; iter < 100; ++iter) {
    double h11 = 1e-12, h22 = 1e-12, h21 = 0.0, g1 = 0.0, g2 = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double fa = scores[i] * a + b;
      double p, q;
      if (fa >= 0.0) {
        p = std::exp(-fa) / (1.0 + std::exp(-fa));
        q = 1.0 / (1.0 + std::exp(-fa));
      } else {
        p = 1.0 / (1.0 + std::exp(fa));
        q = std::exp(fa) / (1.0 + std::exp(fa));
      }
      const double d2 = p * q;
      h11 += scores[i] * scores[i] * d2;
      h22 += d2;
      h21 += scores[i] * d2;
      const double d1 = t[i] - p;
      g1 += scores[i] * d1;
      g2 += d1;
    }
    if (std::abs(g1) < 1e-5 && std::abs(g2) < 1e-5) break;
    const double det = h11 * h22 - h21 * h21;
    const double da = -(h22 * g1 - h21 * g2) / det;
    const double db = -(-h21 * g1 + h11 * g2) / det;
    const double gd = g1 * da + g2 * db;
    double step = 1.0;
    while (step >= 1e-10) {
      const double na = a + step * da, nb = b + step * db;
      const double nf = objective(na, nb);
      if (nf < fval + 1e-4 * step * gd) {
        a = na;
        b = nb;
        fval = nf;
        break;
      }
      step *= 0.5;
    }
    if (step < 1e-10) break;
  }
  return {a, b};
}

}  // namespace hardness
