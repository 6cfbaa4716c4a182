#pragma once

#include "hardness/common.hpp"

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace hardness {

enum class FeatureKind { continuous, ordinal, nominal };

const char* to_string(FeatureKind kind);
FeatureKind feature_kind_from_string(const std::string& text);

struct FeatureSpec {
  std::string name;
  FeatureKind kind = FeatureKind::continuous;
  // Declared order for ordinal levels, or the category universe for nominal
  // features. Optional; inferred from the data when empty.
  std::vector<std::string> levels;
};

struct DatasetSchema {
  std::vector<FeatureSpec> features;
  std::string class_column;

  int size() const { return static_cast<int>(features.size()); }

  /// Throws schema_mismatch when names repeat or collide with the class column.
  void validate() const;

  static DatasetSchema from_json_file(const std::filesystem::path& path);
  static DatasetSchema from_json_text(const std::string& text);
  std::string to_json_text() const;

  /// All-continuous schema with columns f0..f{n-1} and class column "class".
  static DatasetSchema continuous(int num_features);
};

/// Typed, complete tabular data. Continuous values are reals, ordinal values
/// are ranks (or their numeric value when numeric), nominal values are
/// category codes into `levels[feature]`.
struct LabelledDataset {
  DatasetSchema schema;
  Matrix features;  // M x N
  Labels labels;    // class index into `classes`
  std::vector<std::string> classes;
  std::vector<std::vector<std::string>> levels;
  std::string id;
  int dropped_rows = 0;

  int size() const { return static_cast<int>(labels.size()); }
  int num_features() const { return static_cast<int>(features.cols()); }
  int num_classes() const { return static_cast<int>(classes.size()); }
  FeatureKind kind(int feature) const { return schema.features[feature].kind; }

  LabelledDataset subset(std::span<const int> rows) const;
  Eigen::VectorXi class_counts() const;

  /// Continuous dataset with classes named "0".."C-1".
  static LabelledDataset from_matrix(Matrix features, Labels labels,
                                     int num_classes, std::string id = {});

  /// Checks C >= 2, M >= C and that every class is present.
  void validate() const;
};

struct LoadOptions {
  // Replace missing cells with the column median (continuous, ordinal) or
  // mode (nominal) instead of dropping the row.
  bool impute_missing = false;
};

LabelledDataset load_dataset(const std::filesystem::path& path,
                             const DatasetSchema& schema,
                             const LoadOptions& options = {});

LabelledDataset parse_dataset(const std::string& csv_text,
                              const DatasetSchema& schema,
                              const LoadOptions& options = {},
                              std::string id = "dataset");

std::string to_csv(const LabelledDataset& data);

struct ZScore {
  Vector values;
  bool degenerate = false;
};

/// Population z-score. Zero variance yields zeros and sets `degenerate`.
template <typename Derived>
ZScore zscore(const Eigen::MatrixBase<Derived>& v) {
  require(v.size() >= 2, "zscore needs at least two values");
  const Vector x = v.template cast<double>();
  const double mean = x.mean();
  const double var = (x.array() - mean).square().mean();
  if (!(var > 1e-300)) return {Vector::Zero(x.size()), true};
  return {(x.array() - mean) / std::sqrt(var), false};
}

struct FoldPlan {
  int k = 0;
  Indices assignment;  // instance -> fold
  Seed seed;

  Indices members(int fold) const;
  /// Instances whose fold is not in `excluded`.
  Indices complement(std::initializer_list<int> excluded) const;
};

FoldPlan make_stratified_folds(const Labels& labels, int num_classes, int k,
                               Seed seed,
                               const std::vector<std::string>& class_names = {});
FoldPlan make_stratified_folds(const LabelledDataset& data, int k, Seed seed);

/// Distance space shared by every neighbour-based computation: continuous and
/// ordinal columns min-max scaled to [0, 1] on the reference data, nominal
/// columns one-hot expanded.
class FeatureSpace {
 public:
  FeatureSpace() = default;
  static FeatureSpace fit(const LabelledDataset& reference);

  int input_dimension() const { return static_cast<int>(kinds_.size()); }
  int dimension() const { return dimension_; }

  Matrix transform(const Matrix& raw) const;
  Vector transform_row(const Eigen::Ref<const RowVector>& raw) const;

  // Serialisation hooks.
  const std::vector<FeatureKind>& kinds() const { return kinds_; }
  const Vector& minimum() const { return min_; }
  const Vector& range() const { return range_; }
  const Eigen::VectorXi& cardinality() const { return cardinality_; }
  static FeatureSpace from_parts(std::vector<FeatureKind> kinds, Vector minimum,
                                 Vector range, Eigen::VectorXi cardinality);

 private:
  void finish();

  std::vector<FeatureKind> kinds_;
  Vector min_;
  Vector range_;
  Eigen::VectorXi cardinality_;  // nominal level counts, 0 otherwise
  Eigen::VectorXi offset_;
  int dimension_ = 0;
};

}  // namespace hardness
