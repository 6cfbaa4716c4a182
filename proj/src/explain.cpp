#include "hardness/explain.hpp"

#include "hardness/random.hpp"

#include "json.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace hardness {

namespace {

constexpr int kCoalitions = 1 << kMetaCount;

// What each meta-heuristic measures, worded for a reader without the maths.
constexpr std::array<const char*, kMetaCount> kPhrases{
    "diversity in the class outcomes of similar instances",
    "the amount of similar training data covering the instance",
    "diversity in the class outcomes within the rule that covers the instance",
    "how unusual the instance is compared with its neighbourhood",
    "how unusual the instance is within each class",
    "conflicting evidence between the features",
    "distance from the decision boundary",
};

std::vector<int> ranked(const Attribution& a) {
  std::vector<int> order(kMetaCount);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int x, int y) {
    return std::abs(a.contributions[x]) > std::abs(a.contributions[y]);
  });
  return order;
}

std::string number(double v) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4) << v;
  return out.str();
}

}  // namespace

MetaMatrix select_background(const KnowledgeBase& kb, Seed seed, int cap) {
  require(!kb.empty(), "background is empty", ErrorCode::empty_dataset);
  require(cap >= 1, "background cap must be at least 1");
  const MetaMatrix all = kb.meta_matrix();
  if (kb.size() <= cap) return all;
  Rng rng(seed);
  const Indices rows = rng.sample_without_replacement(kb.size(), cap);
  MetaMatrix out(cap, kMetaCount);
  for (int i = 0; i < cap; ++i) out.row(i) = all.row(rows[i]);
  return out;
}

Attribution shapley(const FuzzyClusterModel& model, const MetaFeatureVector& meta, const MetaMatrix& background) {
  require(background.rows() >= 1, "background is empty", ErrorCode::empty_dataset);
  std::array<double, kCoalitions> value{};
  for (int mask = 0; mask < kCoalitions; ++mask) {
    MetaMatrix composite = background;
    for (int j = 0; j < kMetaCount; ++j)
      if (mask & (1 << j)) composite.col(j).setConstant(meta[j]);
    value[mask] = estimate_uncertainty_rows(model, composite).mean();
  }
  std::array<double, kMetaCount + 1> factorial{1.0};
  for (int i = 1; i <= kMetaCount; ++i) factorial[i] = factorial[i - 1] * i;

  Attribution out;
  out.meta = meta;
  out.base_value = value[0];
  out.fx = value[kCoalitions - 1];
  for (int j = 0; j < kMetaCount; ++j) {
    double phi = 0.0;
    for (int mask = 0; mask < kCoalitions; ++mask) {
      if (mask & (1 << j)) continue;
      const int size = std::popcount(static_cast<unsigned>(mask));
      const double weight = factorial[size] * factorial[kMetaCount - size - 1] / factorial[kMetaCount];
      phi += weight * (value[mask | (1 << j)] - value[mask]);
    }
    out.contributions[j] = phi;
  }
  return out;
}

Attribution shapley(const FuzzyClusterModel& model, const MetaFeatureVector& meta, const KnowledgeBase& background,
                    Seed seed) {
  return shapley(model, meta, select_background(background, seed));
}

std::string force_plot_data(const Attribution& a) {
  nlohmann::ordered_json j;
  j["base_value"] = a.base_value;
  j["fx"] = a.fx;
  j["segments"] = nlohmann::ordered_json::array();
  for (int f : ranked(a)) {
    const double v = a.contributions[f];
    if (std::abs(v) < kSegmentThreshold) continue;
    nlohmann::ordered_json s;
    s["name"] = std::string(kMetaNames[f]);
    s["value"] = v;
    s["direction"] = v > 0.0 ? "increases uncertainty" : "decreases uncertainty";
    j["segments"].push_back(s);
  }
  return j.dump(2) + "\n";
}

std::string narrate(const Attribution& a) {
  std::ostringstream out;
  bool any = false;
  for (int f : ranked(a)) {
    const double v = a.contributions[f];
    if (std::abs(v) < kSegmentThreshold) continue;
    std::string phrase = kPhrases[f];
    phrase[0] = static_cast<char>(std::toupper(static_cast<unsigned char>(phrase[0])));
    out << phrase << (v > 0.0 ? " increased" : " lowered") << " the uncertainty by " << number(std::abs(v)) << ".\n";
    any = true;
  }
  if (!any) out << "No factor materially changed the uncertainty.\n";
  out << "Estimated uncertainty " << number(a.fx) << " against a base of " << number(a.base_value) << ".\n";
  return out.str();
}

}  // namespace hardness
