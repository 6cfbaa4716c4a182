#pragma once

#include "hardness/bayesopt.hpp"
#include "hardness/core.hpp"
#include "hardness/tree.hpp"

#include <map>
#include <string>
#include <variant>

namespace hardness {

enum class ClassifierKind { logistic_regression, gaussian_nb, knn_classifier, decision_tree };

const char* to_string(ClassifierKind kind);
ClassifierKind classifier_kind_from_string(const std::string& text);

using Hyperparameters = std::map<std::string, double>;

struct ClassifierSpec {
  ClassifierKind kind = ClassifierKind::logistic_regression;
  SearchSpace space;

  /// Default search space for each kind.
  static ClassifierSpec defaults(ClassifierKind kind);
};

// Fitted parameter blocks. All of them operate on FeatureSpace coordinates.
struct LogisticModel {
  Matrix weights;  // one row per one-vs-rest problem (1 row when binary)
  Vector intercepts;
};

struct GaussianNbModel {
  Matrix means;      // C x D
  Matrix variances;  // C x D
  Vector log_priors;
};

struct KnnModel {
  Matrix points;
  Labels labels;
  int neighbours = 5;
};

struct TreeModel {
  DecisionTree tree;
};

/// A fitted classifier. Immutable after construction; predict_proba rows are
/// probability vectors over the class universe.
class TrainedClassifier {
 public:
  using Parameters = std::variant<LogisticModel, GaussianNbModel, KnnModel, TreeModel>;

  TrainedClassifier(ClassifierKind kind, Hyperparameters hyperparameters, FeatureSpace space,
                    std::vector<std::string> classes, Parameters parameters);

  ClassifierKind kind() const { return kind_; }
  const Hyperparameters& hyperparameters() const { return hyperparameters_; }
  const FeatureSpace& space() const { return space_; }
  const std::vector<std::string>& classes() const { return classes_; }
  int num_classes() const { return static_cast<int>(classes_.size()); }
  const Parameters& parameters() const { return parameters_; }

  /// Raw (untransformed) rows in, one probability row per instance out.
  Matrix predict_proba(const Matrix& raw) const;
  Labels predict(const Matrix& raw) const;

 private:
  Vector proba_transformed(const Eigen::Ref<const Vector>& z) const;

  ClassifierKind kind_;
  Hyperparameters hyperparameters_;
  FeatureSpace space_;
  std::vector<std::string> classes_;
  Parameters parameters_;
};

TrainedClassifier fit_classifier(ClassifierKind kind, const Hyperparameters& hyperparameters,
                                 const LabelledDataset& train, Seed seed);

/// Mean of per-class recalls over the classes present in `truth`.
double balanced_accuracy(const Labels& truth, const Labels& predicted);

struct TuningResult {
  Hyperparameters best;
  double best_score;
  std::vector<double> scores;  // every evaluated configuration, in order
};

/// Bayesian search (GP surrogate, expected improvement) for the
/// configuration with the highest mean balanced accuracy under internal
/// stratified cross-validation.
TuningResult tune(const ClassifierSpec& spec, const LabelledDataset& train, int folds, int budget,
                  Seed seed);

/// tune() followed by a refit of the winning configuration on all of `train`.
TrainedClassifier train_tuned(const ClassifierSpec& spec, const LabelledDataset& train, int folds,
                              int budget, Seed seed);

/// |p(predicted class) - 0.5|. For more than two classes the top-class
/// probability is used.
double probability_uncertainty(const Eigen::Ref<const Vector>& probabilities);

/// Gaussian product-kernel density at `x`: the average over the
/// rows of `points` plus `x` itself, with per-dimension widths `bandwidth`.
template <typename DerivedPoints, typename DerivedX, typename DerivedH>
double kde_density(const Eigen::MatrixBase<DerivedPoints>& points,
                   const Eigen::MatrixBase<DerivedX>& x,
                   const Eigen::MatrixBase<DerivedH>& bandwidth) {
  require(points.rows() >= 1, "density needs at least one point");
  require((bandwidth.array() > 0.0).all(), "kernel width must be positive");
  const auto dims = static_cast<double>(bandwidth.size());
  const double norm = std::pow(2.0 * M_PI, -0.5 * dims) / bandwidth.prod();
  double sum = 1.0;  // x's own kernel, K(0) relative to the normaliser
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const double q =
        ((points.row(i).transpose() - x).array() / bandwidth.array()).square().sum();
    sum += std::exp(-0.5 * q);
  }
  return norm * sum / static_cast<double>(points.rows() + 1);
}

template <typename DerivedPoints, typename DerivedX>
double kde_density(const Eigen::MatrixBase<DerivedPoints>& points,
                   const Eigen::MatrixBase<DerivedX>& x, double h) {
  require(h > 0.0, "kernel width must be positive");
  return kde_density(points, x, Vector::Constant(x.size(), h));
}

/// Rule-of-thumb bandwidth for a univariate Gaussian KDE.
double silverman_bandwidth(const Eigen::Ref<const Vector>& values);

/// Per-feature, per-class univariate densities: Gaussian KDE for continuous
/// and ordinal columns, category frequencies for nominal ones.
class ClassConditionalDensities {
 public:
  ClassConditionalDensities() = default;
  explicit ClassConditionalDensities(const LabelledDataset& reference);

  /// Density of class `c` for feature `n` at `value`.
  double density(int feature, int c, double value) const;
  /// Sum over features of log P(x_n | c). Zero category frequencies fall back
  /// to a Laplace (alpha = 1) estimate; `floored` is set when that happens.
  double log_likelihood(const Eigen::Ref<const RowVector>& raw, int c,
                        bool* floored = nullptr) const;

  int num_features() const { return static_cast<int>(kinds_.size()); }
  int num_classes() const { return num_classes_; }
  bool nominal(int feature) const { return kinds_[feature] == FeatureKind::nominal; }

 private:
  std::vector<FeatureKind> kinds_;
  int num_classes_ = 0;
  std::vector<std::vector<Vector>> samples_;    // [feature][class]
  std::vector<std::vector<double>> widths_;     // [feature][class]
  std::vector<std::vector<Vector>> frequency_;  // [feature][class] -> per level
  std::vector<int> class_sizes_;
};

/// Multiclass pooled Fisher discriminant ratio of one column:
/// sum_c n_c (mu_c - mu)^2 / sum_c n_c sigma_c^2, capped at 1e6.
double fisher_ratio(const Eigen::Ref<const Vector>& values, const Labels& labels, int num_classes,
                    bool* capped = nullptr);
double fisher_ratio(const LabelledDataset& data, int feature, bool* capped = nullptr);

/// L2-regularised logistic separators in FeatureSpace coordinates; one for a
/// binary task, one per class otherwise.
class LinearSeparator {
 public:
  LinearSeparator() = default;
  LinearSeparator(const Matrix& z, const Labels& labels, int num_classes, double c = 1.0);

  /// Smallest absolute geometric margin over the separators.
  double margin(const Eigen::Ref<const Vector>& z) const;
  /// Signed geometric margin of separator `s`.
  double signed_margin(int s, const Eigen::Ref<const Vector>& z) const;
  int size() const { return static_cast<int>(weights_.rows()); }

 private:
  Matrix weights_;
  Vector intercepts_;
};

/// L2-regularised binary logistic regression by Newton iterations. `labels`
/// are 0/1; returns (weights, intercept).
std::pair<Vector, double> fit_binary_logistic(const Matrix& z, const Eigen::Ref<const Vector>& labels,
                                              double c, int max_iterations = 100);

struct PlattParameters {
  double a = 0.0;
  double b = 0.0;
  double probability(double score) const;
};

/// Platt's sigmoid fit with smoothed targets (regularised maximum likelihood).
PlattParameters platt_scale(const Eigen::Ref<const Vector>& scores, const std::vector<int>& labels);

}  // namespace hardness
