#pragma once

#include "hardness/learners.hpp"
#include "hardness/metafeatures.hpp"

#include <string>
#include <vector>

namespace hardness {

enum class Provenance { real, synthetic };

const char* to_string(Provenance provenance);
Provenance provenance_from_string(const std::string& text);

struct KBRecord {
  MetaFeatureVector meta = MetaFeatureVector::Zero();
  int misclassified = 0;
  Provenance provenance = Provenance::real;
  std::string dataset_id;
  std::string model_kind;
  int instance = -1;  // row in the source dataset
  int fold = -1;      // outer fold that validated the row
};

struct KnowledgeBase {
  std::vector<KBRecord> records;
  MetaFeatureVector means = MetaFeatureVector::Zero();
  MetaFeatureVector stdevs = MetaFeatureVector::Zero();  // population

  int size() const { return static_cast<int>(records.size()); }
  bool empty() const { return records.empty(); }
  /// Recomputes the per-column summary from the records.
  void summarise();
  MetaMatrix meta_matrix() const;
  Vector flags() const;
  double misclassification_rate() const;
  /// Canonical order: dataset id, then instance index.
  void sort();
};

/// 1 where the prediction differs from the truth.
std::vector<int> label_misclassifications(const Labels& predicted, const Labels& truth);

/// Everything one cross-validated pass over a dataset produces, aligned with
/// the dataset's rows.
struct CrossValidatedRecords {
  MetaMatrix meta;
  std::vector<int> misclassified;
  Labels predicted;
  Vector probability_baseline;  // |p(predicted) - 0.5|
  Indices fold;
  std::vector<unsigned> flags;
};

struct RecordOptions {
  int folds = 5;
  int tuning_folds = 3;
  int tuning_budget = 10;
  MetaConfig meta;
};

/// Stratified k-fold pass: for every fold the validation rows are scored
/// against a reference context and a tuned classifier built from the other
/// folds only. The same plan serves both.
CrossValidatedRecords cross_validated_records(const LabelledDataset& data, const ClassifierSpec& spec,
                                              const RecordOptions& options, Seed seed);

/// Rows used to fit one fold; kept so leakage can be audited afterwards.
struct FoldAudit {
  std::string dataset_id;
  int fold = 0;
  Indices reference_rows;
  Indices validation_rows;
};

struct BuildFailure {
  std::string dataset_id;
  ErrorCode code = ErrorCode::invalid_argument;
  std::string message;
};

struct KbSource {
  LabelledDataset data;
  Provenance provenance = Provenance::real;
};

struct KbBuildResult {
  KnowledgeBase kb;
  std::vector<BuildFailure> failures;
  std::vector<FoldAudit> audit;
};

/// Stable per-dataset seed stream so results do not depend on list order.
Seed dataset_seed(Seed seed, const std::string& dataset_id);

/// Cross-validated records for every source. Failing datasets are reported in
/// `failures` and skipped.
KbBuildResult build_kb(const std::vector<KbSource>& sources, const ClassifierSpec& spec,
                       const RecordOptions& options, Seed seed);

/// True when no validated row appears in the reference rows of its fold.
bool leakage_free(const KbBuildResult& result);

enum class Realness { real, synthetic, both };

const char* to_string(Realness realness);
Realness realness_from_string(const std::string& text);

struct SamplingPolicy {
  int m = 2000;
  double q = 100.0;  // percent
  Realness realness = Realness::both;

  void validate() const;
};

/// Filters by provenance, keeps the nearest q% of records to `anchor` in
/// z-scored meta-feature space and draws min(m, pool) of them uniformly.
KnowledgeBase sample_kb(const KnowledgeBase& kb, const MetaFeatureVector& anchor,
                        const SamplingPolicy& policy, Seed seed);

/// Uniform subsample of `count` records (all when count >= size), order kept.
KnowledgeBase truncate_kb(const KnowledgeBase& kb, int count, Seed seed);

inline constexpr int kKbFormatVersion = 1;

/// JSON lines: a header with version and column summary, then one record per line.
std::string kb_to_jsonl(const KnowledgeBase& kb);
KnowledgeBase kb_from_jsonl(const std::string& text);

}  // namespace hardness
