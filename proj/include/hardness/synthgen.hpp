#pragma once

#include "hardness/core.hpp"

#include <string>
#include <vector>

namespace hardness {

struct ComplexityTarget {
  double f1 = 0.5;
  double n1 = 0.5;
  int instances = 300;
  int features = 2;
  int classes = 2;

  /// Throws invalid_argument unless 0 <= n1 <= f1 <= 1 and instances >= 2 * classes.
  void validate() const;
};

struct BoidRuleWeights {
  double class_attraction = 0.0;  // pull along feature 0 towards the class anchor
  double cohesion = 0.0;          // towards same-class neighbours
  double separation = 0.0;        // short-range push away from same-class neighbours
  double alignment = 0.0;         // towards other-class neighbours (mixing)
};

struct BoidOptions {
  int steps = 20;
  int neighbours = 5;
  double step_size = 0.1;
  double jitter = 0.005;
};

struct GaSettings {
  int population = 20;
  int generations = 30;
  int elitism = 2;
  int tournament = 2;
  double mutation_sd = 0.15;
  double mutation_rate = 0.5;
  double tolerance = 0.02;  // stop once the best residual drops below this
};

/// Ho and Basu's maximum Fisher ratio mapped to [0, 1] as 1 / (1 + ratio);
/// larger is harder.
double measure_f1(const LabelledDataset& data);

/// Fraction of instances incident to a minimum-spanning-tree edge that joins
/// two classes. Distances are taken in the shared min-max scaled space.
double measure_n1(const LabelledDataset& data);

/// Gene in [0, 1]^4 -> rule weights on a log scale (0 .. ~10).
BoidRuleWeights weights_from_genes(const Eigen::Ref<const Eigen::Vector4d>& genes);

/// Seeds M uniform points in [0, 1]^N with balanced labels and moves them by
/// the boid rules. Each point moves at its own random rate so regions of
/// differing difficulty coexist.
LabelledDataset simulate_boids(const ComplexityTarget& target, const BoidRuleWeights& weights,
                               const BoidOptions& options, Seed seed);

struct GeneratedDataset {
  LabelledDataset data;
  ComplexityTarget target;
  BoidRuleWeights weights;
  double achieved_f1 = 0.0;
  double achieved_n1 = 0.0;
  double residual = 0.0;
  bool infeasible = false;  // residual above 0.2 after the full budget
  std::vector<double> best_residuals;  // best residual after each generation
  Seed seed;
};

/// Genetic search over rule weights (tournament selection, uniform
/// crossover, Gaussian mutation, elitism) minimising |f1 - t1| + |n1 - t2|.
GeneratedDataset generate(const ComplexityTarget& target, const GaSettings& ga, Seed seed,
                          const BoidOptions& boids = {});

/// Targets on the 0.2-step grid over (0, 1] with n1 <= f1 (15 pairs).
std::vector<std::pair<double, double>> grid_targets();

/// One dataset per grid target, mimicking the template's M, N and C.
std::vector<GeneratedDataset> generate_grid(const LabelledDataset& templ, Seed seed,
                                            const GaSettings& ga = {}, const BoidOptions& boids = {});

/// {target_f1, target_n1, achieved_f1, achieved_n1, seed} plus the weights.
std::string sidecar_json(const GeneratedDataset& generated);

}  // namespace hardness
