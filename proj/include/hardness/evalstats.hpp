#pragma once

#include "hardness/learners.hpp"

#include <string>
#include <vector>

namespace hardness {

inline constexpr double kOddsRatioCap = 1e3;

struct OddsRatioResult {
  double odds_ratio = 1.0;
  double beta = 0.0;
  double intercept = 0.0;
  double std_error = 0.0;
  double ci_low = 1.0;
  double ci_high = 1.0;
  double p_value = 1.0;
  bool separated = false;   // perfect separation, OR clamped to the cap
  bool degenerate = false;  // constant predictor, OR fixed at 1
  int iterations = 0;
};

/// Logistic regression flags ~ zscore(x) by IRLS (at most 100 iterations,
/// tolerance 1e-8). OR = exp(beta) with Wald 95% interval and p-value.
OddsRatioResult univariate_or(const Eigen::Ref<const Vector>& x, const std::vector<int>& flags);

/// Midranks (1-based) of `values`.
Vector midranks(const Eigen::Ref<const Vector>& values);

/// Mann-Whitney AUROC with midranks for ties.
double auroc(const Eigen::Ref<const Vector>& scores, const std::vector<int>& flags);

struct AuprcResult {
  double area = 0.0;
  double prevalence = 0.0;
  double improvement = 0.0;  // area - prevalence
};

/// Step-wise average precision over a descending-score sweep; tied scores
/// form a single threshold.
AuprcResult auprc(const Eigen::Ref<const Vector>& scores, const std::vector<int>& flags);

struct SpearmanResult {
  Matrix rho;
  std::vector<bool> constant;  // per column; correlations with it are 0
};

SpearmanResult spearman_matrix(const Matrix& columns);

struct AbstentionCurve {
  std::vector<double> percentiles;  // 5, 10, ..., 95
  std::vector<double> cutoffs;      // uncertainty value at each percentile
  std::vector<double> misclassified_pct;
  std::vector<double> retained_pct;
};

/// Linear-interpolation percentile (0..100) of `values`.
double percentile(const Eigen::Ref<const Vector>& values, double pct);

/// Keeps instances whose uncertainty is at most each percentile cutoff and
/// reports the misclassified share among those retained.
AbstentionCurve abstention_curve(const Eigen::Ref<const Vector>& uncertainty, const std::vector<int>& flags);
std::string abstention_csv(const AbstentionCurve& curve);

/// log prod_n P(x_n | c) from per-feature class-conditional densities.
double class_likelihood(const ClassConditionalDensities& densities, const Eigen::Ref<const RowVector>& x, int c,
                        bool* floored = nullptr);
double class_likelihood(const LabelledDataset& train, const Eigen::Ref<const RowVector>& x, int c,
                        bool* floored = nullptr);

/// Same-class share of a disjunct's members.
double disjunct_class_percentage(const Eigen::Ref<const Vector>& counts, int label);

/// logCL(x, t) minus the largest logCL over the other classes.
double class_likelihood_difference(const ClassConditionalDensities& densities, const Eigen::Ref<const RowVector>& x,
                                   int label);

struct IsmVerdict {
  double dcp = 0.0;
  double cld = 0.0;
  double ds = 0.0;
  double kdn = 0.0;  // share of the k nearest neighbours with another label
  bool is_ism = false;
};

bool ism_condition(const IsmVerdict& verdict);

/// Every instance scored against the rest of the dataset.
std::vector<IsmVerdict> ism_flags(const LabelledDataset& data, int k = 5);

/// Scores, flags and their summary metrics for one uncertainty source.
/// Scores are oriented so that higher means more likely misclassified.
struct MethodSummary {
  std::string name;
  OddsRatioResult odds;
  double auroc = 0.5;
  AuprcResult auprc;
};

MethodSummary summarise_method(const std::string& name, const Eigen::Ref<const Vector>& scores,
                               const std::vector<int>& flags);

/// OR x AUROC x AUPRC with the OR capped.
double utility_product(const MethodSummary& summary);

struct EvaluationReport {
  int instances = 0;
  double misclassification_rate = 0.0;
  std::vector<MethodSummary> methods;
  std::vector<MethodSummary> meta_features;  // empty when no meta matrix is given
  SpearmanResult spearman;
};

/// `uncertainty` is the estimator output, `certainty` the |p - 0.5| baseline
/// (negated before scoring). `meta` may be empty.
EvaluationReport evaluate(const Eigen::Ref<const Vector>& uncertainty, const Eigen::Ref<const Vector>& certainty,
                          const std::vector<int>& flags, const Matrix& meta = Matrix());

std::string report_json(const EvaluationReport& report);
std::string report_table(const EvaluationReport& report);

}  // namespace hardness
