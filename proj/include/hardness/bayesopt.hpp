#pragma once

#include "hardness/common.hpp"

#include <functional>
#include <string>
#include <vector>

namespace hardness {

enum class Scale { linear, log, integer };

struct SearchDimension {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
  Scale scale = Scale::linear;
};

using SearchSpace = std::vector<SearchDimension>;

/// Maps the unit cube onto a search space and back. Integer dimensions give
/// every integer in [lower, upper] an equal share of [0, 1].
Vector decode(const SearchSpace& space, const Vector& unit);
Vector encode(const SearchSpace& space, const Vector& point);

/// Zero-mean GP regression with a Matérn-5/2 kernel. The length scale is
/// picked from a fixed grid by marginal likelihood; targets are standardised.
class GaussianProcess {
 public:
  void fit(const Matrix& inputs, const Vector& targets);

  struct Prediction {
    double mean;
    double variance;
  };
  /// Prediction in the units of the fitted targets.
  Prediction predict(const Vector& x) const;

  double length_scale() const { return length_scale_; }

 private:
  double kernel(const Vector& a, const Vector& b) const;

  Matrix inputs_;
  Vector alpha_;
  Eigen::LLT<Matrix> chol_;
  double length_scale_ = 0.2;
  double y_mean_ = 0.0;
  double y_scale_ = 1.0;
  double noise_ = 1e-6;
};

double expected_improvement(double mean, double variance, double best, double exploration);

struct BayesOptOptions {
  int budget = 20;        // objective evaluations, warm-up included
  int warmup = 10;        // random evaluations before the surrogate kicks in
  double exploration = 0.01;
  int candidates = 1024;  // random acquisition candidates per step
};

struct Evaluation {
  Vector point;
  double value;
};

struct BayesOptResult {
  Vector best;
  double best_value;
  std::vector<Evaluation> history;
};

using Objective = std::function<double(const Vector&)>;

/// Sequential model-based maximisation with expected improvement. The
/// returned configuration is the best one actually evaluated.
BayesOptResult maximize(const SearchSpace& space, const Objective& objective,
                        const BayesOptOptions& options, Seed seed);

}  // namespace hardness
