#pragma once

#include "hardness/knowledgebase.hpp"

#include <string>
#include <vector>

namespace hardness {

struct EstimatorConfig {
  int min_clusters = 2;
  int max_clusters = 15;
  double weight_low = 0.0;
  double weight_high = 1.0;
  int budget = 30;  // BO evaluations
  int warmup = 10;
  double fuzzifier = 2.0;
  double tolerance = 1e-5;  // centre shift, relative to the spread of the data
  int max_iterations = 300;
  int restarts = 5;
  int outer_folds = 5;
  int inner_folds = 5;
  int tuning_splits = 0;  // inner folds used as BO validation sets; 0 = all

  void validate() const;
};

/// Rows of meta-features with their misclassification flags.
struct LabelledMeta {
  MetaMatrix meta;
  Vector flags;

  int size() const { return static_cast<int>(meta.rows()); }
  static LabelledMeta from_kb(const KnowledgeBase& kb);
  static LabelledMeta concat(const LabelledMeta& a, const LabelledMeta& b);
  LabelledMeta rows(const Indices& rows) const;
};

struct FuzzyClusterModel {
  Matrix centers;  // n_clusters x 7, weighted space
  double fuzzifier = 2.0;
  MetaFeatureVector weights = MetaFeatureVector::Ones();
  Vector rates;
  int n_clusters = 0;
  std::vector<bool> empty_clusters;  // rate fell back to the global rate
  std::vector<double> objective;     // distortion after every centre update
  int iterations = 0;
};

/// 1 - (TP + TN) / (TP + FP + TN + FN).
double misclassification_rate(long tp, long fp, long tn, long fn);

/// Fuzzy c-means on meta .* weights with k-means++ starts; the restart with
/// the lowest distortion is kept. Cluster rates come from hard assignments.
FuzzyClusterModel fcm_fit(const LabelledMeta& data, const MetaFeatureVector& weights, int n_clusters,
                          const EstimatorConfig& config, Seed seed);
FuzzyClusterModel fcm_fit(const KnowledgeBase& kb, const MetaFeatureVector& weights, int n_clusters,
                          const EstimatorConfig& config, Seed seed);

/// Membership of an already weighted point.
Vector memberships(const FuzzyClusterModel& model, const Eigen::Ref<const Vector>& weighted);

/// Sum(mu * rate) / Sum(mu).
double defuzzify(const Eigen::Ref<const Vector>& membership, const Eigen::Ref<const Vector>& rates);

double estimate_uncertainty(const FuzzyClusterModel& model, const MetaFeatureVector& meta);
Vector estimate_uncertainty_rows(const FuzzyClusterModel& model, const MetaMatrix& meta);

/// Weighted within-cluster fuzzy distortion of `data` under `model`.
double fcm_objective(const FuzzyClusterModel& model, const MetaMatrix& meta);

struct TuningSplit {
  LabelledMeta train;
  LabelledMeta validation;
};

struct EstimatorTuning {
  MetaFeatureVector weights;
  int n_clusters = 2;
  double value = 0.0;
  std::vector<Evaluation> history;
};

SearchSpace estimator_search_space(const EstimatorConfig& config);

/// OR x AUROC x AUPRC of the fitted model's uncertainty on the validation
/// rows, averaged over the splits.
double tuning_objective(const std::vector<TuningSplit>& splits, const MetaFeatureVector& weights, int n_clusters,
                        const EstimatorConfig& config, Seed seed);

/// Bayesian optimisation of the seven weights and the cluster count.
EstimatorTuning optimize(const std::vector<TuningSplit>& splits, const EstimatorConfig& config, Seed seed);
EstimatorTuning optimize(const LabelledMeta& train, const LabelledMeta& validation, const EstimatorConfig& config,
                         Seed seed);

struct NestedCvResult {
  Vector uncertainty;
  std::vector<int> misclassified;
  Vector certainty;  // |p(predicted) - 0.5| of the outer model
  MetaMatrix meta;   // test-fold meta-features
  Labels predicted;
  Indices fold;
  std::vector<EstimatorTuning> tuning;  // one per outer fold
};

/// Outer folds give test meta-features and flags from models fitted on the
/// outer training rows. Inner folds of those rows give training records;
/// the clustering is tuned on them plus the knowledge base, refitted on all
/// of them plus the knowledge base, and applied to the outer test rows.
NestedCvResult nested_cv_run(const LabelledDataset& data, const KnowledgeBase& kb, const ClassifierSpec& spec,
                             const EstimatorConfig& config, const RecordOptions& records, Seed seed);

inline constexpr int kModelFormatVersion = 1;

std::string model_to_json(const FuzzyClusterModel& model);
FuzzyClusterModel model_from_json(const std::string& text);

}  // namespace hardness
