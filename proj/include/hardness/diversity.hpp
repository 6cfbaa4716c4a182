#pragma once

#include "hardness/common.hpp"

#include <algorithm>
#include <cmath>
#include <span>

namespace hardness {

/// Likelihood-ratio imbalance degree of a class-count vector against the
/// uniform distribution over all `counts.size()` classes. Counts may be
/// fractional; zero-count classes contribute nothing.
template <typename Derived>
double lrid(const Eigen::MatrixBase<Derived>& counts) {
  const Vector m = counts.template cast<double>();
  require(m.size() >= 2, "lrid needs at least two classes");
  require((m.array() >= 0.0).all(), "class counts must be nonnegative");
  const double total = m.sum();
  require(total > 0.0, "lrid needs at least one instance");
  const double balanced = 1.0 / static_cast<double>(m.size());
  double sum = 0.0;
  for (Eigen::Index c = 0; c < m.size(); ++c) {
    if (m[c] > 0.0) sum += m[c] * std::log(balanced / (m[c] / total));
  }
  return -2.0 * sum;
}

/// Class diversity in [0, 1]: 0 when one class holds every instance, 1 when
/// the counts are exactly balanced.
template <typename Derived>
double diversity(const Eigen::MatrixBase<Derived>& counts) {
  const double observed = lrid(counts);
  const double total = counts.template cast<double>().sum();
  const double worst = 2.0 * total * std::log(static_cast<double>(counts.size()));
  return std::clamp(1.0 - observed / worst, 0.0, 1.0);
}

inline Vector count_classes(std::span<const int> labels, int num_classes) {
  Vector counts = Vector::Zero(num_classes);
  for (int y : labels) {
    require(y >= 0 && y < num_classes, "label outside the class universe");
    counts[y] += 1.0;
  }
  return counts;
}

inline double diversity(std::span<const int> labels, int num_classes) {
  require(!labels.empty(), "diversity of an empty label list is undefined");
  return diversity(count_classes(labels, num_classes));
}

}  // namespace hardness
