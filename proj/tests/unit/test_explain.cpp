#include "doctest.h"
#include "support.hpp"

#include "hardness/explain.hpp"

#include "json.hpp"

#include <algorithm>
#include <map>
#include <numeric>

using namespace hardness;

namespace {

FuzzyClusterModel random_model(Rng& rng, int clusters, const MetaFeatureVector& weights) {
  FuzzyClusterModel m;
  m.n_clusters = clusters;
  m.weights = weights;
  m.centers.resize(clusters, kMetaCount);
  m.rates.resize(clusters);
  for (int c = 0; c < clusters; ++c) {
    for (int j = 0; j < kMetaCount; ++j) m.centers(c, j) = rng.uniform() * weights[j];
    m.rates[c] = rng.uniform();
  }
  m.empty_clusters.assign(clusters, false);
  return m;
}

MetaMatrix random_rows(Rng& rng, int n) {
  MetaMatrix out(n, kMetaCount);
  for (Eigen::Index i = 0; i < out.size(); ++i) out.data()[i] = rng.uniform();
  return out;
}

// Average marginal contribution over all 7! orderings, each coalition value
// computed row by row with the single-instance estimator.
MetaFeatureVector permutation_oracle(const FuzzyClusterModel& model, const MetaFeatureVector& x, const MetaMatrix& bg) {
  std::map<int, double> cache;
  auto value = [&](int mask) {
    auto it = cache.find(mask);
    if (it != cache.end()) return it->second;
    double total = 0.0;
    for (Eigen::Index r = 0; r < bg.rows(); ++r) {
      MetaFeatureVector z = bg.row(r).transpose();
      for (int j = 0; j < kMetaCount; ++j)
        if (mask >> j & 1) z[j] = x[j];
      total += estimate_uncertainty(model, z);
    }
    return cache[mask] = total / static_cast<double>(bg.rows());
  };
  std::array<int, kMetaCount> order;
  std::iota(order.begin(), order.end(), 0);
  MetaFeatureVector phi = MetaFeatureVector::Zero();
  int count = 0;
  do {
    int mask = 0;
    for (int j : order) {
      phi[j] += value(mask | (1 << j)) - value(mask);
      mask |= 1 << j;
    }
    ++count;
  } while (std::next_permutation(order.begin(), order.end()));
  return phi / count;
}

}  // namespace

TEST_CASE("shapley matches the permutation oracle and is efficient") {
  Rng rng(Seed{1});
  for (int trial = 0; trial < 20; ++trial) {
    MetaFeatureVector w;
    for (int j = 0; j < kMetaCount; ++j) w[j] = rng.uniform(0.1, 1.0);
    const auto model = random_model(rng, 2 + rng.index(4), w);
    const MetaMatrix bg = random_rows(rng, 6);
    const MetaFeatureVector x = random_rows(rng, 1).row(0).transpose();
    const auto a = shapley(model, x, bg);
    const auto oracle = permutation_oracle(model, x, bg);
    CHECK((a.contributions - oracle).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(std::abs(a.base_value + a.contributions.sum() - a.fx) < 1e-6);
    CHECK(a.fx == doctest::Approx(estimate_uncertainty(model, x)).epsilon(1e-12));
    CHECK(a.base_value == doctest::Approx(estimate_uncertainty_rows(model, bg).mean()).epsilon(1e-12));
  }
}

TEST_CASE("dummy and symmetry axioms") {
  Rng rng(Seed{2});
  for (int trial = 0; trial < 20; ++trial) {
    MetaFeatureVector w = MetaFeatureVector::Zero();
    w[meta::kdn] = 1.0;
    const auto only_kdn = random_model(rng, 3, w);
    const MetaMatrix bg = random_rows(rng, 12);
    const MetaFeatureVector x = random_rows(rng, 1).row(0).transpose();
    const auto a = shapley(only_kdn, x, bg);
    for (int j = 1; j < kMetaCount; ++j) CHECK(std::abs(a.contributions[j]) < 1e-9);

    // Centres and background symmetric under swapping kdn and dcd.
    MetaFeatureVector ws;
    for (int j = 0; j < kMetaCount; ++j) ws[j] = rng.uniform(0.2, 1.0);
    ws[meta::dcd] = ws[meta::kdn];
    auto sym = random_model(rng, 3, ws);
    sym.centers.col(meta::dcd) = sym.centers.col(meta::kdn);
    MetaMatrix half = random_rows(rng, 8);
    MetaMatrix swapped = half;
    swapped.col(meta::kdn).swap(swapped.col(meta::dcd));
    MetaMatrix both(16, kMetaCount);
    both << half, swapped;
    MetaFeatureVector xs = random_rows(rng, 1).row(0).transpose();
    xs[meta::dcd] = xs[meta::kdn];
    const auto s = shapley(sym, xs, both);
    CHECK(std::abs(s.contributions[meta::kdn] - s.contributions[meta::dcd]) < 1e-9);
  }
}

TEST_CASE("constant background gives zero contributions") {
  Rng rng(Seed{3});
  const auto model = random_model(rng, 4, MetaFeatureVector::Ones());
  const MetaFeatureVector x = random_rows(rng, 1).row(0).transpose();
  MetaMatrix bg(5, kMetaCount);
  bg.rowwise() = x.transpose();
  const auto a = shapley(model, x, bg);
  CHECK(a.contributions.cwiseAbs().maxCoeff() < 1e-15);
  CHECK_THROWS_AS(shapley(model, x, MetaMatrix(0, kMetaCount)), Error);
}

TEST_CASE("background selection") {
  KnowledgeBase kb;
  for (int i = 0; i < 300; ++i) {
    KBRecord r;
    r.meta.setConstant(i);
    r.instance = i;
    kb.records.push_back(r);
  }
  const MetaMatrix bg = select_background(kb, Seed{1});
  CHECK(bg.rows() == kBackgroundCap);
  CHECK(select_background(kb, Seed{1}) == bg);
  CHECK(select_background(kb, Seed{1}, 500).rows() == 300);
  CHECK_THROWS_AS(select_background(KnowledgeBase{}, Seed{1}), Error);
}

TEST_CASE("force plot data") {
  Attribution a;
  a.base_value = 0.2;
  a.contributions << 0.1, 0.0, 0.00005, -0.03, 0.0, 0.0, 0.02;
  a.fx = 0.2 + a.contributions.sum();
  const auto doc = nlohmann::json::parse(force_plot_data(a));
  CHECK(doc["base_value"] == 0.2);
  REQUIRE(doc["segments"].size() == 3);
  CHECK(doc["segments"][0]["name"] == "kdn");
  CHECK(doc["segments"][0]["direction"] == "increases uncertainty");
  CHECK(doc["segments"][1]["name"] == "ol");
  CHECK(doc["segments"][1]["direction"] == "decreases uncertainty");
  double total = 0.0;
  for (const auto& s : doc["segments"]) total += s["value"].get<double>();
  CHECK(std::abs(total - (a.fx - a.base_value)) < 1e-4);
}

TEST_CASE("narration") {
  Attribution a;
  a.contributions << 0.2, 0.0, 0.01, 0.0, 0.0, -0.05, 0.0;
  const std::string text = narrate(a);
  const std::string first = text.substr(0, text.find('\n'));
  CHECK(first.find("iversity in the class outcomes of similar instances") != std::string::npos);
  CHECK(first.find("increased") != std::string::npos);
  CHECK(text.find("lowered") != std::string::npos);

  Attribution b;
  b.contributions << 0.01, 0.0, 0.0, 0.0, 0.0, -0.3, 0.0;
  const std::string second = narrate(b);
  const std::string lead = second.substr(0, second.find('\n'));
  CHECK(lead.find("onflicting evidence") != std::string::npos);
  CHECK(lead.find("lowered the uncertainty") != std::string::npos);

  const std::string none = narrate(Attribution{});
  CHECK(none.find("o factor materially changed the uncertainty") != std::string::npos);
}
