#pragma once

#include "hardness/estimator.hpp"

#include <string>

namespace hardness {

struct Attribution {
  double base_value = 0.0;  // mean estimated uncertainty over the background
  MetaFeatureVector contributions = MetaFeatureVector::Zero();
  double fx = 0.0;
  MetaFeatureVector meta = MetaFeatureVector::Zero();
};

inline constexpr int kBackgroundCap = 256;
inline constexpr double kSegmentThreshold = 1e-4;

/// Uniform subsample of at most `cap` knowledge-base rows.
MetaMatrix select_background(const KnowledgeBase& kb, Seed seed, int cap = kBackgroundCap);

/// Exact interventional Shapley values over all 128 coalitions: features off
/// the coalition take each background row's values in turn.
Attribution shapley(const FuzzyClusterModel& model, const MetaFeatureVector& meta, const MetaMatrix& background);
Attribution shapley(const FuzzyClusterModel& model, const MetaFeatureVector& meta, const KnowledgeBase& background,
                    Seed seed);

/// {base_value, fx, segments:[{name, value, direction}]}, largest segments
/// first, negligible ones omitted.
std::string force_plot_data(const Attribution& attribution);

/// Plain-language account of the attribution, strongest factor first.
std::string narrate(const Attribution& attribution);

}  // namespace hardness
