#pragma once

#include "hardness/core.hpp"
#include "hardness/random.hpp"

namespace testing_support {

using namespace hardness;

// Isotropic Gaussian blobs, `per_class` rows per class, centres on a line.
inline LabelledDataset blobs(int per_class, int classes, double separation, double sd, std::uint64_t seed,
                             int features = 2) {
  Rng rng(Seed{seed});
  Matrix x(per_class * classes, features);
  Labels y;
  for (int c = 0; c < classes; ++c) {
    for (int i = 0; i < per_class; ++i) {
      const int row = c * per_class + i;
      for (int j = 0; j < features; ++j) x(row, j) = rng.normal(j == 0 ? c * separation : 0.0, sd);
      y.push_back(c);
    }
  }
  return LabelledDataset::from_matrix(std::move(x), std::move(y), classes, "blobs");
}

inline Matrix row_matrix(std::initializer_list<std::initializer_list<double>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index i = 0;
  for (const auto& r : rows) {
    Eigen::Index j = 0;
    for (double v : r) m(i, j++) = v;
    ++i;
  }
  return m;
}

}  // namespace testing_support
