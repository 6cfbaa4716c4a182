#include "hardness/tree.hpp"

#include "hardness/core.hpp"
#include "hardness/random.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace hardness {

namespace {

double gini(const Vector& counts, double total) {
  if (total <= 0.0) return 0.0;
  return 1.0 - (counts.array() / total).square().sum();
}

}  // namespace

DecisionTree DecisionTree::grow(const Matrix& x, const Labels& y, int num_classes,
                                const TreeOptions& options, Seed seed) {
  require(x.rows() == static_cast<Eigen::Index>(y.size()), "tree inputs differ in length");
  require(x.rows() >= 1, "cannot grow a tree on no data");
  require(options.min_samples_leaf >= 1, "min_samples_leaf must be at least 1");

  DecisionTree tree;
  tree.num_classes_ = num_classes;
  Node root;
  root.members.resize(y.size());
  std::iota(root.members.begin(), root.members.end(), 0);
  root.counts = Vector::Zero(num_classes);
  for (int label : y) root.counts[label] += 1.0;
  tree.nodes_.push_back(std::move(root));
  tree.split(0, x, y, options, 0);

  if (!options.prune || tree.num_leaves() == 1) return tree;

  const auto path = tree.pruning_path();
  std::vector<double> candidates;
  for (std::size_t k = 0; k < path.size(); ++k) {
    candidates.push_back(k + 1 < path.size() ? std::sqrt(path[k] * path[k + 1]) : path[k]);
  }

  // Internal validation folds: stratified where every class can fill them.
  const int folds = std::clamp(options.prune_folds, 2, static_cast<int>(y.size()));
  Indices assignment;
  try {
    assignment = make_stratified_folds(y, num_classes, folds, seed).assignment;
  } catch (const Error&) {
    assignment.resize(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) assignment[i] = static_cast<int>(i) % folds;
    Rng rng(seed);
    rng.shuffle(assignment);
  }

  std::vector<double> errors(candidates.size(), 0.0);
  TreeOptions unpruned = options;
  unpruned.prune = false;
  for (int f = 0; f < folds; ++f) {
    Indices train_rows, test_rows;
    for (int i = 0; i < static_cast<int>(y.size()); ++i)
      (assignment[i] == f ? test_rows : train_rows).push_back(i);
    if (train_rows.empty() || test_rows.empty()) continue;
    Matrix xt(static_cast<Eigen::Index>(train_rows.size()), x.cols());
    Labels yt(train_rows.size());
    for (std::size_t i = 0; i < train_rows.size(); ++i) {
      xt.row(static_cast<Eigen::Index>(i)) = x.row(train_rows[i]);
      yt[i] = y[train_rows[i]];
    }
    const DecisionTree full = grow(xt, yt, num_classes, unpruned, seed);
    for (std::size_t k = 0; k < candidates.size(); ++k) {
      DecisionTree candidate = full;
      candidate.prune(candidates[k]);
      for (int row : test_rows) {
        const Vector xi = x.row(row).transpose();
        const auto& leaf = candidate.nodes_[candidate.leaf_of(xi)];
        // Tied leaves share the error among their top classes.
        const double top = leaf.counts.maxCoeff();
        const double tied = static_cast<double>((leaf.counts.array() == top).count());
        errors[k] += leaf.counts[y[row]] == top ? 1.0 - 1.0 / tied : 1.0;
      }
    }
  }
  // Ties go to the larger complexity parameter (the smaller tree).
  std::size_t best = 0;
  for (std::size_t k = 1; k < errors.size(); ++k)
    if (errors[k] <= errors[best]) best = k;
  tree.prune(candidates[best]);
  return tree;
}

void DecisionTree::split(int index, const Matrix& x, const Labels& y, const TreeOptions& options,
                         int depth) {
  const Vector counts = nodes_[index].counts;
  const Indices members = nodes_[index].members;
  const auto n = static_cast<int>(members.size());
  const int classes_present = static_cast<int>((counts.array() > 0.0).count());
  if (classes_present <= 1 || n < 2 * options.min_samples_leaf ||
      (options.max_depth > 0 && depth >= options.max_depth)) {
    return;
  }

  double best_impurity = std::numeric_limits<double>::infinity();
  int best_feature = -1;
  double best_threshold = 0.0;
  Indices order(members);
  for (Eigen::Index feature = 0; feature < x.cols(); ++feature) {
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return x(a, feature) < x(b, feature); });
    Vector left = Vector::Zero(num_classes_);
    for (int i = 1; i < n; ++i) {
      left[y[order[i - 1]]] += 1.0;
      if (i < options.min_samples_leaf || n - i < options.min_samples_leaf) continue;
      const double lo = x(order[i - 1], feature);
      const double hi = x(order[i], feature);
      if (!(lo < hi)) continue;
      const Vector right = counts - left;
      const double impurity = (i * gini(left, i) + (n - i) * gini(right, n - i)) / n;
      if (impurity < best_impurity - 1e-12) {
        best_impurity = impurity;
        best_feature = static_cast<int>(feature);
        best_threshold = 0.5 * (lo + hi);
        if (!(best_threshold > lo && best_threshold <= hi)) best_threshold = hi;
      }
    }
  }
  if (best_feature < 0) return;

  Node left_node, right_node;
  left_node.counts = Vector::Zero(num_classes_);
  right_node.counts = Vector::Zero(num_classes_);
  for (int row : members) {
    Node& target = x(row, best_feature) < best_threshold ? left_node : right_node;
    target.members.push_back(row);
    target.counts[y[row]] += 1.0;
  }
  const int left_index = static_cast<int>(nodes_.size());
  nodes_.push_back(std::move(left_node));
  nodes_.push_back(std::move(right_node));
  nodes_[index].feature = best_feature;
  nodes_[index].threshold = best_threshold;
  nodes_[index].left = left_index;
  nodes_[index].right = left_index + 1;
  split(left_index, x, y, options, depth + 1);
  split(left_index + 1, x, y, options, depth + 1);
}

int DecisionTree::leaf_of(const Eigen::Ref<const Vector>& x) const {
  require(!nodes_.empty(), "tree has not been grown");
  int index = 0;
  while (!nodes_[index].is_leaf()) {
    const auto& node = nodes_[index];
    index = x[node.feature] < node.threshold ? node.left : node.right;
  }
  return index;
}

Indices DecisionTree::leaves() const {
  Indices out;
  if (nodes_.empty()) return out;
  std::vector<int> stack{0};
  while (!stack.empty()) {
    const int index = stack.back();
    stack.pop_back();
    if (nodes_[index].is_leaf()) {
      out.push_back(index);
    } else {
      stack.push_back(nodes_[index].right);
      stack.push_back(nodes_[index].left);
    }
  }
  return out;
}

int DecisionTree::max_leaf_size() const {
  int largest = 0;
  for (int leaf : leaves()) largest = std::max(largest, static_cast<int>(nodes_[leaf].counts.sum()));
  return largest;
}

Vector DecisionTree::predict_proba(const Eigen::Ref<const Vector>& x) const {
  const auto& counts = nodes_[leaf_of(x)].counts;
  const double total = counts.sum();
  if (total <= 0.0) return Vector::Constant(num_classes_, 1.0 / num_classes_);
  return counts / total;
}

int DecisionTree::count_leaves(int index) const {
  if (nodes_[index].is_leaf()) return 1;
  return count_leaves(nodes_[index].left) + count_leaves(nodes_[index].right);
}

double DecisionTree::subtree_error(int index) const {
  const auto& node = nodes_[index];
  if (node.is_leaf()) return node.counts.sum() - node.counts.maxCoeff();
  return subtree_error(node.left) + subtree_error(node.right);
}

std::vector<double> DecisionTree::pruning_path() const {
  const double total = nodes_.empty() ? 1.0 : std::max(nodes_[0].counts.sum(), 1.0);
  DecisionTree work = *this;
  std::vector<double> path{0.0};
  while (!work.nodes_[0].is_leaf()) {
    double weakest = std::numeric_limits<double>::infinity();
    std::vector<std::pair<int, double>> internal;
    std::vector<int> stack{0};
    while (!stack.empty()) {
      const int index = stack.back();
      stack.pop_back();
      const auto& node = work.nodes_[index];
      if (node.is_leaf()) continue;
      const double own = (node.counts.sum() - node.counts.maxCoeff()) / total;
      const double sub = work.subtree_error(index) / total;
      const double g = (own - sub) / (work.count_leaves(index) - 1);
      internal.emplace_back(index, g);
      weakest = std::min(weakest, g);
      stack.push_back(node.left);
      stack.push_back(node.right);
    }
    for (const auto& [index, g] : internal) {
      if (g <= weakest + 1e-12) {
        work.nodes_[index].left = -1;
        work.nodes_[index].right = -1;
      }
    }
    weakest = std::max(weakest, 0.0);
    if (weakest > path.back() + 1e-15) path.push_back(weakest);
  }
  return path;
}

void DecisionTree::prune(double alpha) {
  if (nodes_.empty()) return;
  const double total = std::max(nodes_[0].counts.sum(), 1.0);
  // Post-order dynamic programme over the optimal subtree cost.
  auto cost = [&](auto&& self, int index) -> double {
    auto& node = nodes_[index];
    const double as_leaf = (node.counts.sum() - node.counts.maxCoeff()) / total + alpha;
    if (node.is_leaf()) return as_leaf;
    const double kept = self(self, node.left) + self(self, node.right);
    if (as_leaf <= kept + 1e-12) {
      node.left = -1;
      node.right = -1;
      return as_leaf;
    }
    return kept;
  };
  cost(cost, 0);
  pruned_ = true;
  alpha_ = alpha;
}

DecisionTree DecisionTree::from_nodes(std::vector<Node> nodes, int num_classes, bool pruned) {
  require(!nodes.empty(), "a tree needs at least one node");
  DecisionTree tree;
  tree.nodes_ = std::move(nodes);
  tree.num_classes_ = num_classes;
  tree.pruned_ = pruned;
  return tree;
}

}  // namespace hardness
