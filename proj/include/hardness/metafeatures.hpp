#pragma once

#include "hardness/core.hpp"
#include "hardness/learners.hpp"
#include "hardness/tree.hpp"

#include <array>
#include <memory>
#include <string_view>

namespace hardness {

/// Column order of every meta-feature vector and file in the project.
namespace meta {
enum Column : int { kdn = 0, ds, dcd, ol, clol, ec, hd };
}  // namespace meta

inline constexpr int kMetaCount = 7;
inline constexpr std::array<std::string_view, kMetaCount> kMetaNames{"kdn", "ds", "dcd", "ol",
                                                                      "clol", "ec", "hd"};

using MetaFeatureVector = Eigen::Matrix<double, kMetaCount, 1>;
using MetaMatrix = Eigen::Matrix<double, Eigen::Dynamic, kMetaCount>;

enum MetaFlag : unsigned {
  kDensityCapped = 1u << 0,            // OL hit the 1e6 cap
  kClassNeighbourhoodReduced = 1u << 1,  // CL-OL used k < configured k for a class
  kZeroDensityConflict = 1u << 2,      // EC cell where both densities vanished
  kFisherCapped = 1u << 3,             // zero within-class variance
};

struct MetaConfig {
  int k = 5;
  double bandwidth = 0.0;  // OL kernel width; <= 0 selects a per-dimension rule of thumb
  int prune_folds = 3;
  double separator_c = 1.0;
  Seed seed{};
};

/// Brute-force k nearest rows of `points` to `z`; ties go to the lower index.
Indices nearest_neighbours(const Matrix& points, const Eigen::Ref<const Vector>& z, int k,
                           int exclude = -1);

struct Neighbourhood {
  Indices knn;
  Indices rnn;
  Indices snn;
  Indices all;  // sorted union, never contains the query itself
};

/// Relative-density outlierness over a fixed point set. Neighbourhoods are
/// the union of k-nearest, reverse-nearest and shared-nearest neighbours, all
/// with the same k; densities are Gaussian product-kernel averages over the
/// neighbourhood plus the point itself.
class DensityIndex {
 public:
  DensityIndex() = default;
  DensityIndex(Matrix points, int k, Vector bandwidth);

  Neighbourhood neighbourhood(const Eigen::Ref<const Vector>& z) const;
  /// Density at `z` relative to the kernel normaliser (shared by all
  /// points, so it cancels in the outlierness ratio).
  double relative_density(const Eigen::Ref<const Vector>& z, const Indices& neighbourhood) const;

  struct Score {
    double value;
    bool capped;
  };
  Score outlierness(const Eigen::Ref<const Vector>& z) const;

  int k() const { return k_; }
  int size() const { return static_cast<int>(points_.rows()); }
  const Vector& point_density() const { return density_; }

 private:
  Matrix points_;
  int k_ = 0;
  Vector bandwidth_;
  std::vector<Indices> knn_;
  Vector kdist_;
  std::vector<Indices> reverse_;
  Vector density_;
};

struct ConflictMatrix {
  Matrix entries;        // one row per contrasting class, one column per feature
  Indices classes;       // contrasting class of each row
  Vector feature_weights;
};

/// Everything the meta-heuristics need from a reference (training) set,
/// fitted once and then shared read-only.
class ReferenceContext {
 public:
  ReferenceContext(LabelledDataset reference, MetaConfig config = {});

  const LabelledDataset& reference() const { return reference_; }
  const MetaConfig& config() const { return config_; }
  const FeatureSpace& space() const { return space_; }
  const Matrix& points() const { return points_; }
  const DecisionTree& unpruned_tree() const { return unpruned_; }
  const DecisionTree& pruned_tree() const { return pruned_; }
  const DensityIndex& density_index() const { return density_; }
  /// Index over one class's members; nullptr for classes with no members.
  const DensityIndex* class_index(int c) const { return class_density_[c].get(); }
  int class_k(int c) const { return class_k_[c]; }
  const ClassConditionalDensities& densities() const { return densities_; }
  const Vector& fisher_weights() const { return fisher_weights_; }
  const LinearSeparator& separator() const { return separator_; }
  double max_margin() const { return max_margin_; }
  /// Flags raised while fitting (Fisher cap, reduced class neighbourhoods).
  unsigned flags() const { return flags_; }

  Vector embed(const Eigen::Ref<const RowVector>& raw) const { return space_.transform_row(raw); }
  /// Majority class of the k nearest reference rows (ties: lowest class).
  int neighbour_vote(const Eigen::Ref<const RowVector>& raw) const;

 private:
  LabelledDataset reference_;
  MetaConfig config_;
  FeatureSpace space_;
  Matrix points_;
  DecisionTree unpruned_;
  DecisionTree pruned_;
  DensityIndex density_;
  std::vector<std::unique_ptr<DensityIndex>> class_density_;
  std::vector<int> class_k_;
  ClassConditionalDensities densities_;
  Vector fisher_weights_;
  LinearSeparator separator_;
  double max_margin_ = 0.0;
  unsigned flags_ = 0;
};

double kdn(const ReferenceContext& context, const Eigen::Ref<const RowVector>& x);
double disjunct_size(const ReferenceContext& context, const Eigen::Ref<const RowVector>& x);
double disjunct_class_diversity(const ReferenceContext& context, const Eigen::Ref<const RowVector>& x);
DensityIndex::Score outlierness(const ReferenceContext& context, const Eigen::Ref<const RowVector>& x);
double class_level_outlierness(const ReferenceContext& context, const Eigen::Ref<const RowVector>& x);

/// Signed conflicting-evidence degree of one feature: positive when the
/// contrasting class is denser at the value, negative when the predicted
/// class is, zero when equal.
double conflicting_evidence(double predicted_density, double contrasting_density);

ConflictMatrix conflict_matrix(const ReferenceContext& context, const Eigen::Ref<const RowVector>& x,
                               int predicted_class, bool* zero_density = nullptr);
double evidence_conflict(const ReferenceContext& context, const Eigen::Ref<const RowVector>& x,
                         int predicted_class, bool* zero_density = nullptr);
double hyperplane_distance(const ReferenceContext& context, const Eigen::Ref<const RowVector>& x);

/// Fisher ratios of every feature divided by the largest (all ones when every
/// ratio is zero).
Vector fisher_weights(const LabelledDataset& data, bool* capped = nullptr);

struct MetaResult {
  MetaFeatureVector values;
  unsigned flags = 0;
};

/// All seven scores of `x` against the context. `predicted_class` is the
/// classifier's prediction for x (used by EC).
MetaResult compute_all(const ReferenceContext& context, const Eigen::Ref<const RowVector>& x,
                       int predicted_class);

}  // namespace hardness
