#include "hardness/metafeatures.hpp"

#include "hardness/diversity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace hardness {

namespace {

constexpr double kOutliernessCap = 1e6;

Indices sorted_union(std::initializer_list<const Indices*> parts, int exclude) {
  Indices out;
  for (const Indices* part : parts) out.insert(out.end(), part->begin(), part->end());
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  if (exclude >= 0) out.erase(std::remove(out.begin(), out.end(), exclude), out.end());
  return out;
}

Vector rule_of_thumb_bandwidth(const Matrix& points) {
  const auto n = static_cast<double>(points.rows());
  const auto d = static_cast<double>(points.cols());
  const double factor = std::pow(4.0 / ((d + 2.0) * n), 1.0 / (d + 4.0));
  Vector h(points.cols());
  for (Eigen::Index j = 0; j < points.cols(); ++j) {
    const auto column = points.col(j).array();
    const double sd = std::sqrt((column - column.mean()).square().mean());
    h[j] = (sd > 1e-12 ? sd : 1.0) * factor;
  }
  return h;
}

Matrix rows_of(const Matrix& points, const Labels& labels, int c) {
  Indices rows;
  for (int i = 0; i < static_cast<int>(labels.size()); ++i)
    if (labels[i] == c) rows.push_back(i);
  Matrix out(static_cast<Eigen::Index>(rows.size()), points.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = points.row(rows[i]);
  return out;
}

}  // namespace

Indices nearest_neighbours(const Matrix& points, const Eigen::Ref<const Vector>& z, int k,
                           int exclude) {
  const auto n = static_cast<int>(points.rows());
  const int available = n - (exclude >= 0 && exclude < n ? 1 : 0);
  require(k >= 0 && k <= available, "k exceeds the number of reference instances");
  std::vector<std::pair<double, int>> distance;
  distance.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    if (i == exclude) continue;
    distance.emplace_back((points.row(i).transpose() - z).squaredNorm(), i);
  }
  std::partial_sort(distance.begin(), distance.begin() + k, distance.end());
  Indices out(static_cast<std::size_t>(k));
  for (int j = 0; j < k; ++j) out[j] = distance[j].second;
  return out;
}

DensityIndex::DensityIndex(Matrix points, int k, Vector bandwidth)
    : points_(std::move(points)), bandwidth_(std::move(bandwidth)) {
  const auto n = static_cast<int>(points_.rows());
  require(n >= 1, "density index needs at least one point");
  require(bandwidth_.size() == points_.cols(), "one kernel width per dimension is required");
  require((bandwidth_.array() > 0.0).all(), "kernel width must be positive");
  k_ = std::clamp(k, 0, n - 1);

  knn_.resize(n);
  kdist_ = Vector::Zero(n);
  reverse_.assign(n, {});
  for (int i = 0; i < n; ++i) {
    knn_[i] = nearest_neighbours(points_, points_.row(i).transpose(), k_, i);
    if (k_ > 0) kdist_[i] = (points_.row(knn_[i].back()) - points_.row(i)).squaredNorm();
    for (int j : knn_[i]) reverse_[j].push_back(i);
  }
  density_.resize(n);
  for (int i = 0; i < n; ++i) {
    Indices shared;
    for (int m : knn_[i]) shared.insert(shared.end(), reverse_[m].begin(), reverse_[m].end());
    const Indices all = sorted_union({&knn_[i], &reverse_[i], &shared}, i);
    density_[i] = relative_density(points_.row(i).transpose(), all);
  }
}

Neighbourhood DensityIndex::neighbourhood(const Eigen::Ref<const Vector>& z) const {
  Neighbourhood out;
  out.knn = nearest_neighbours(points_, z, k_);
  if (k_ > 0) {
    for (int i = 0; i < size(); ++i)
      if ((points_.row(i).transpose() - z).squaredNorm() <= kdist_[i]) out.rnn.push_back(i);
  }
  for (int m : out.knn) out.snn.insert(out.snn.end(), reverse_[m].begin(), reverse_[m].end());
  std::sort(out.snn.begin(), out.snn.end());
  out.snn.erase(std::unique(out.snn.begin(), out.snn.end()), out.snn.end());
  out.all = sorted_union({&out.knn, &out.rnn, &out.snn}, -1);
  return out;
}

double DensityIndex::relative_density(const Eigen::Ref<const Vector>& z,
                                      const Indices& neighbourhood) const {
  double sum = 1.0;
  for (int i : neighbourhood) {
    const double q = ((points_.row(i).transpose() - z).array() / bandwidth_.array()).square().sum();
    sum += std::exp(-0.5 * q);
  }
  return sum / static_cast<double>(neighbourhood.size() + 1);
}

DensityIndex::Score DensityIndex::outlierness(const Eigen::Ref<const Vector>& z) const {
  const Neighbourhood hood = neighbourhood(z);
  if (hood.all.empty()) return {1.0, false};
  double mean = 0.0;
  for (int i : hood.all) mean += density_[i];
  mean /= static_cast<double>(hood.all.size());
  const double own = relative_density(z, hood.all);
  if (!(own > 0.0) || mean / own > kOutliernessCap) return {kOutliernessCap, true};
  return {mean / own, false};
}

Vector fisher_weights(const LabelledDataset& data, bool* capped) {
  Vector ratios(data.num_features());
  bool any_capped = false;
  for (int n = 0; n < data.num_features(); ++n) {
    bool cap = false;
    ratios[n] = fisher_ratio(data, n, &cap);
    any_capped = any_capped || cap;
  }
  if (capped) *capped = any_capped;
  const double top = ratios.size() > 0 ? ratios.maxCoeff() : 0.0;
  if (!(top > 0.0)) return Vector::Ones(ratios.size());
  return ratios / top;
}

ReferenceContext::ReferenceContext(LabelledDataset reference, MetaConfig config)
    : reference_(std::move(reference)), config_(config) {
  reference_.validate();
  require(config_.k >= 1, "k must be at least 1");
  require(config_.k <= reference_.size(), "k exceeds the number of reference instances");
  const int classes = reference_.num_classes();

  space_ = FeatureSpace::fit(reference_);
  points_ = space_.transform(reference_.features);

  unpruned_ = DecisionTree::grow(points_, reference_.labels, classes, TreeOptions{}, config_.seed);
  TreeOptions prune_options;
  prune_options.prune = true;
  prune_options.prune_folds = config_.prune_folds;
  pruned_ = DecisionTree::grow(points_, reference_.labels, classes, prune_options,
                               config_.seed.derive(1));

  const Vector bandwidth = config_.bandwidth > 0.0
                               ? Vector::Constant(points_.cols(), config_.bandwidth)
                               : rule_of_thumb_bandwidth(points_);
  density_ = DensityIndex(points_, config_.k, bandwidth);

  const Eigen::VectorXi counts = reference_.class_counts();
  class_density_.resize(classes);
  class_k_.assign(classes, 0);
  for (int c = 0; c < classes; ++c) {
    if (counts[c] == 0) continue;
    if (counts[c] == 1) {
      fail(ErrorCode::class_too_small, "class '" + reference_.classes[c] + "' has a single reference member");
    }
    class_k_[c] = std::min(config_.k, counts[c] - 1);
    if (class_k_[c] < config_.k) flags_ |= kClassNeighbourhoodReduced;
    class_density_[c] =
        std::make_unique<DensityIndex>(rows_of(points_, reference_.labels, c), class_k_[c], bandwidth);
  }

  densities_ = ClassConditionalDensities(reference_);
  bool capped = false;
  fisher_weights_ = hardness::fisher_weights(reference_, &capped);
  if (capped) flags_ |= kFisherCapped;

  separator_ = LinearSeparator(points_, reference_.labels, classes, config_.separator_c);
  for (Eigen::Index i = 0; i < points_.rows(); ++i)
    max_margin_ = std::max(max_margin_, separator_.margin(points_.row(i).transpose()));
  require(max_margin_ > 0.0, "reference separator has no positive margin", ErrorCode::degenerate);
}

int ReferenceContext::neighbour_vote(const Eigen::Ref<const RowVector>& raw) const {
  const Indices nn = nearest_neighbours(points_, embed(raw), config_.k);
  Vector votes = Vector::Zero(reference_.num_classes());
  for (int i : nn) votes[reference_.labels[i]] += 1.0;
  Eigen::Index best = 0;
  votes.maxCoeff(&best);
  return static_cast<int>(best);
}

double kdn(const ReferenceContext& context, const Eigen::Ref<const RowVector>& x) {
  const Indices nn = nearest_neighbours(context.points(), context.embed(x), context.config().k);
  Labels labels;
  labels.reserve(nn.size());
  for (int i : nn) labels.push_back(context.reference().labels[i]);
  return diversity(labels, context.reference().num_classes());
}

double disjunct_size(const ReferenceContext& context, const Eigen::Ref<const RowVector>& x) {
  const auto& tree = context.unpruned_tree();
  const double size = tree.node(tree.leaf_of(context.embed(x))).counts.sum();
  const double largest = tree.max_leaf_size();
  if (largest <= 1.0) return 0.0;
  return (size - 1.0) / (largest - 1.0);
}

double disjunct_class_diversity(const ReferenceContext& context, const Eigen::Ref<const RowVector>& x) {
  const auto& tree = context.pruned_tree();
  return diversity(tree.node(tree.leaf_of(context.embed(x))).counts);
}

DensityIndex::Score outlierness(const ReferenceContext& context, const Eigen::Ref<const RowVector>& x) {
  return context.density_index().outlierness(context.embed(x));
}

double class_level_outlierness(const ReferenceContext& context, const Eigen::Ref<const RowVector>& x) {
  const Vector z = context.embed(x);
  const int classes = context.reference().num_classes();
  Vector shares = Vector::Zero(classes);
  for (int c = 0; c < classes; ++c) {
    if (const DensityIndex* index = context.class_index(c)) shares[c] = index->outlierness(z).value;
  }
  const double total = shares.sum();
  require(total > 0.0, "class outlierness is zero for every class", ErrorCode::degenerate);
  return diversity(shares / total);
}

double conflicting_evidence(double predicted_density, double contrasting_density) {
  if (contrasting_density > predicted_density) return 1.0 - predicted_density / contrasting_density;
  if (predicted_density > contrasting_density) return -(1.0 - contrasting_density / predicted_density);
  return 0.0;
}

ConflictMatrix conflict_matrix(const ReferenceContext& context, const Eigen::Ref<const RowVector>& x,
                               int predicted_class, bool* zero_density) {
  const int classes = context.reference().num_classes();
  require(classes >= 2, "evidence conflict needs at least two classes");
  require(predicted_class >= 0 && predicted_class < classes, "predicted class outside the class universe");
  const int features = context.reference().num_features();
  const auto& densities = context.densities();

  ConflictMatrix out;
  out.feature_weights = context.fisher_weights();
  out.entries = Matrix::Zero(classes - 1, features);
  bool both_zero = false;
  int row = 0;
  for (int r = 0; r < classes; ++r) {
    if (r == predicted_class) continue;
    out.classes.push_back(r);
    for (int n = 0; n < features; ++n) {
      const double fc = densities.density(n, predicted_class, x[n]);
      const double fr = densities.density(n, r, x[n]);
      if (!(fc > 0.0) && !(fr > 0.0)) {
        both_zero = true;
        continue;
      }
      out.entries(row, n) = out.feature_weights[n] * conflicting_evidence(fc, fr);
    }
    ++row;
  }
  if (zero_density) *zero_density = both_zero;
  return out;
}

double evidence_conflict(const ReferenceContext& context, const Eigen::Ref<const RowVector>& x,
                         int predicted_class, bool* zero_density) {
  const ConflictMatrix matrix = conflict_matrix(context, x, predicted_class, zero_density);
  const double total_weight = matrix.feature_weights.sum();
  if (!(total_weight > 0.0)) return 0.0;
  const double worst = matrix.entries.cwiseMax(0.0).rowwise().sum().maxCoeff();
  return std::clamp(worst / total_weight, 0.0, 1.0);
}

double hyperplane_distance(const ReferenceContext& context, const Eigen::Ref<const RowVector>& x) {
  const double margin = context.separator().margin(context.embed(x));
  return std::clamp(margin / context.max_margin(), 0.0, 1.0);
}

MetaResult compute_all(const ReferenceContext& context, const Eigen::Ref<const RowVector>& x,
                       int predicted_class) {
  MetaResult out;
  out.flags = context.flags();
  out.values[meta::kdn] = hardness::kdn(context, x);
  out.values[meta::ds] = disjunct_size(context, x);
  out.values[meta::dcd] = disjunct_class_diversity(context, x);
  const auto score = outlierness(context, x);
  out.values[meta::ol] = score.value;
  if (score.capped) out.flags |= kDensityCapped;
  out.values[meta::clol] = class_level_outlierness(context, x);
  bool zero = false;
  out.values[meta::ec] = evidence_conflict(context, x, predicted_class, &zero);
  if (zero) out.flags |= kZeroDensityConflict;
  out.values[meta::hd] = hyperplane_distance(context, x);
  require(out.values.allFinite(), "non-finite meta-feature", ErrorCode::degenerate);
  return out;
}

}  // namespace hardness
