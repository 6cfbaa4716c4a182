#include "doctest.h"
#include "support.hpp"

#include "hardness/synthgen.hpp"

#include <algorithm>
#include <cmath>

using namespace hardness;
using testing_support::blobs;

namespace {

// Kruskal with union-find: an MST built independently of the Prim code path.
double oracle_n1(const Matrix& z, const Labels& y) {
  const int m = static_cast<int>(z.rows());
  std::vector<std::tuple<double, int, int>> edges;
  for (int i = 0; i < m; ++i)
    for (int j = i + 1; j < m; ++j) edges.emplace_back((z.row(i) - z.row(j)).norm(), i, j);
  std::sort(edges.begin(), edges.end());
  std::vector<int> root(m);
  std::iota(root.begin(), root.end(), 0);
  auto find = [&](int a) {
    while (root[a] != a) a = root[a] = root[root[a]];
    return a;
  };
  std::vector<bool> boundary(m, false);
  for (const auto& [d, i, j] : edges) {
    const int a = find(i), b = find(j);
    if (a == b) continue;
    root[a] = b;
    if (y[i] != y[j]) boundary[i] = boundary[j] = true;
  }
  return static_cast<double>(std::count(boundary.begin(), boundary.end(), true)) / m;
}

}  // namespace

TEST_CASE("f1 examples") {
  Matrix far(6, 1);
  far << 0, 0.1, 0.2, 100, 100.1, 100.2;
  CHECK(measure_f1(LabelledDataset::from_matrix(far, Labels{0, 0, 0, 1, 1, 1}, 2)) < 1e-3);
  Matrix same(4, 1);
  same << 0, 1, 0, 1;
  CHECK(measure_f1(LabelledDataset::from_matrix(same, Labels{0, 0, 1, 1}, 2)) == doctest::Approx(1.0));
  Matrix unit(4, 1);
  unit << -1, 1, 1, 3;  // Fisher ratio exactly 1
  CHECK(measure_f1(LabelledDataset::from_matrix(unit, Labels{0, 0, 1, 1}, 2)) == doctest::Approx(0.5));
}

TEST_CASE("n1 examples") {
  const auto ds = blobs(20, 2, 50.0, 1.0, 3);
  CHECK(measure_n1(ds) == doctest::Approx(2.0 / 40.0));
  Matrix line(10, 1);
  Labels alternating;
  for (int i = 0; i < 10; ++i) {
    line(i, 0) = i;
    alternating.push_back(i % 2);
  }
  CHECK(measure_n1(LabelledDataset::from_matrix(line, alternating, 2)) == 1.0);
  LabelledDataset single = LabelledDataset::from_matrix(line, Labels(10, 0), 2);
  CHECK_THROWS_AS(measure_n1(single), Error);
}

TEST_CASE("n1 matches a Kruskal oracle and is order invariant") {
  Rng rng(Seed{12});
  for (int trial = 0; trial < 20; ++trial) {
    const auto ds = blobs(15, 2 + trial % 2, 1.0, 1.0, 100 + trial);
    const Matrix z = FeatureSpace::fit(ds).transform(ds.features);
    const double n1 = measure_n1(ds);
    CHECK(n1 == doctest::Approx(oracle_n1(z, ds.labels)));
    Indices order(ds.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order);
    CHECK(measure_n1(ds.subset(order)) == doctest::Approx(n1));
    CHECK(measure_f1(ds.subset(order)) == doctest::Approx(measure_f1(ds)));
    CHECK(n1 >= 0.0);
    CHECK(n1 <= 1.0);
  }
}

TEST_CASE("targets are validated") {
  ComplexityTarget t;
  t.f1 = 0.3;
  t.n1 = 0.5;
  CHECK_THROWS_AS(t.validate(), Error);
  t.n1 = 0.2;
  t.instances = 3;
  CHECK_THROWS_AS(t.validate(), Error);
}

TEST_CASE("grid has fifteen targets with n1 not above f1") {
  const auto grid = grid_targets();
  CHECK(grid.size() == 15);
  for (const auto& [f, n] : grid) CHECK(n <= f + 1e-12);
}

TEST_CASE("generator reaches an easy target deterministically") {
  ComplexityTarget target;
  target.f1 = 0.2;
  target.n1 = 0.2;
  target.instances = 150;
  GaSettings ga;
  ga.generations = 10;
  const auto a = generate(target, ga, Seed{3});
  const auto b = generate(target, ga, Seed{3});
  CHECK(a.data.features == b.data.features);
  CHECK(a.data.labels == b.data.labels);
  CHECK(std::abs(measure_f1(a.data) - a.achieved_f1) < 1e-12);
  CHECK(std::abs(measure_n1(a.data) - a.achieved_n1) < 1e-12);
  CHECK(std::is_sorted(a.best_residuals.rbegin(), a.best_residuals.rend()));
  CHECK(a.data.size() == 150);
  CHECK(a.data.num_features() == 2);
  CHECK(std::abs(a.achieved_f1 - 0.2) <= 0.1);
  CHECK(std::abs(a.achieved_n1 - 0.2) <= 0.1);
  CHECK(sidecar_json(a).find("\"achieved_n1\"") != std::string::npos);
}

TEST_CASE("grid datasets mimic the template") {
  const auto templ = blobs(15, 3, 2.0, 1.0, 1, 3);
  GaSettings ga;
  ga.population = 4;
  ga.generations = 1;
  ga.elitism = 1;
  const auto grid = generate_grid(templ, Seed{5}, ga);
  REQUIRE(grid.size() == 15);
  for (const auto& g : grid) {
    CHECK(g.data.size() == 45);
    CHECK(g.data.num_features() == 3);
    CHECK(g.data.num_classes() == 3);
    CHECK(g.achieved_f1 == doctest::Approx(measure_f1(g.data)));
  }
}
