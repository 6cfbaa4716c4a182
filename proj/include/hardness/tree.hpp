#pragma once

#include "hardness/common.hpp"

#include <vector>

namespace hardness {

struct TreeOptions {
  int min_samples_leaf = 1;
  int max_depth = 0;  // 0 = unlimited
  bool prune = false;
  int prune_folds = 3;
};

/// CART classification tree (Gini impurity, axis-aligned thresholds) over a
/// numeric design matrix. Every node keeps the training rows it covers so
/// leaves double as disjuncts.
class DecisionTree {
 public:
  struct Node {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    Vector counts;   // class counts of covered training rows
    Indices members; // covered training rows
    bool is_leaf() const { return left < 0; }
  };

  DecisionTree() = default;

  /// Unpruned: grown until nodes are pure or unsplittable. Pruned: minimal
  /// cost-complexity pruning with the complexity parameter chosen by internal
  /// cross-validated misclassification error.
  static DecisionTree grow(const Matrix& x, const Labels& y, int num_classes,
                           const TreeOptions& options, Seed seed);

  int leaf_of(const Eigen::Ref<const Vector>& x) const;
  const Node& node(int index) const { return nodes_[index]; }
  const std::vector<Node>& nodes() const { return nodes_; }

  Indices leaves() const;
  int num_leaves() const { return static_cast<int>(leaves().size()); }
  int max_leaf_size() const;
  int num_classes() const { return num_classes_; }
  bool pruned() const { return pruned_; }
  double complexity() const { return alpha_; }

  /// Class frequencies of the covering leaf.
  Vector predict_proba(const Eigen::Ref<const Vector>& x) const;

  /// Cost-complexity values at which the weakest-link sequence collapses
  /// subtrees, ascending, starting at 0.
  std::vector<double> pruning_path() const;
  /// Smallest subtree minimising error + alpha * leaves.
  void prune(double alpha);

  static DecisionTree from_nodes(std::vector<Node> nodes, int num_classes, bool pruned);

 private:
  void split(int index, const Matrix& x, const Labels& y, const TreeOptions& options, int depth);
  int count_leaves(int index) const;
  double subtree_error(int index) const;

  std::vector<Node> nodes_;
  int num_classes_ = 0;
  bool pruned_ = false;
  double alpha_ = 0.0;
};

}  // namespace hardness
