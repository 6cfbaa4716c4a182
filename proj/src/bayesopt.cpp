#include "hardness/bayesopt.hpp"

#include "hardness/random.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <numeric>

namespace hardness {

namespace {

double normal_cdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }
double normal_pdf(double z) { return std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI); }

}  // namespace

Vector decode(const SearchSpace& space, const Vector& unit) {
  Vector point(static_cast<Eigen::Index>(space.size()));
  for (std::size_t d = 0; d < space.size(); ++d) {
    const auto& dim = space[d];
    const double u = std::clamp(unit[static_cast<Eigen::Index>(d)], 0.0, 1.0);
    double v = 0.0;
    switch (dim.scale) {
      case Scale::linear:
        v = dim.lower + u * (dim.upper - dim.lower);
        break;
      case Scale::log:
        v = std::exp(std::log(dim.lower) + u * (std::log(dim.upper) - std::log(dim.lower)));
        break;
      case Scale::integer:
        v = std::floor(dim.lower + u * (dim.upper - dim.lower + 1.0));
        v = std::clamp(v, dim.lower, dim.upper);
        break;
    }
    point[static_cast<Eigen::Index>(d)] = v;
  }
  return point;
}

Vector encode(const SearchSpace& space, const Vector& point) {
  Vector unit(static_cast<Eigen::Index>(space.size()));
  for (std::size_t d = 0; d < space.size(); ++d) {
    const auto& dim = space[d];
    const double v = point[static_cast<Eigen::Index>(d)];
    double u = 0.0;
    switch (dim.scale) {
      case Scale::linear:
        u = dim.upper > dim.lower ? (v - dim.lower) / (dim.upper - dim.lower) : 0.5;
        break;
      case Scale::log:
        u = dim.upper > dim.lower
                ? (std::log(v) - std::log(dim.lower)) / (std::log(dim.upper) - std::log(dim.lower))
                : 0.5;
        break;
      case Scale::integer:
        u = (v - dim.lower + 0.5) / (dim.upper - dim.lower + 1.0);
        break;
    }
    unit[static_cast<Eigen::Index>(d)] = std::clamp(u, 0.0, 1.0);
  }
  return unit;
}

double GaussianProcess::kernel(const Vector& a, const Vector& b) const {
  const double r = (a - b).norm() / length_scale_;
  const double s = std::sqrt(5.0) * r;
  return (1.0 + s + s * s / 3.0) * std::exp(-s);
}

void GaussianProcess::fit(const Matrix& inputs, const Vector& targets) {
  require(inputs.rows() == targets.size() && inputs.rows() > 0, "GP needs matching data");
  inputs_ = inputs;
  y_mean_ = targets.mean();
  const double sd = std::sqrt((targets.array() - y_mean_).square().mean());
  y_scale_ = sd > 1e-12 ? sd : 1.0;
  const Vector y = (targets.array() - y_mean_) / y_scale_;
  const Eigen::Index n = inputs.rows();

  constexpr std::array<double, 7> grid{0.05, 0.1, 0.2, 0.35, 0.6, 1.0, 2.0};
  double best_ll = -std::numeric_limits<double>::infinity();
  double best_scale = grid[2];
  for (double ls : grid) {
    length_scale_ = ls;
    Matrix k(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j <= i; ++j) k(i, j) = k(j, i) = kernel(inputs_.row(i), inputs_.row(j));
    k.diagonal().array() += noise_ + 1e-8;
    Eigen::LLT<Matrix> llt(k);
    if (llt.info() != Eigen::Success) continue;
    const Vector a = llt.solve(y);
    const double ll = -0.5 * y.dot(a) - Matrix(llt.matrixL()).diagonal().array().log().sum();
    if (ll > best_ll) {
      best_ll = ll;
      best_scale = ls;
    }
  }
  length_scale_ = best_scale;
  Matrix k(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) k(i, j) = k(j, i) = kernel(inputs_.row(i), inputs_.row(j));
  k.diagonal().array() += noise_ + 1e-8;
  // Duplicate inputs can leave K singular; grow the nugget until it factors.
  for (double nugget = 1e-6; nugget < 1.0; nugget *= 10.0) {
    chol_.compute(k);
    if (chol_.info() == Eigen::Success) break;
    k.diagonal().array() += nugget;
  }
  alpha_ = chol_.solve(y);
}

GaussianProcess::Prediction GaussianProcess::predict(const Vector& x) const {
  const Eigen::Index n = inputs_.rows();
  Vector ks(n);
  for (Eigen::Index i = 0; i < n; ++i) ks[i] = kernel(inputs_.row(i), x);
  const double mean = ks.dot(alpha_);
  const Vector v = chol_.matrixL().solve(ks);
  const double var = std::max(1.0 - v.squaredNorm(), 1e-12);
  return {y_mean_ + y_scale_ * mean, var * y_scale_ * y_scale_};
}

double expected_improvement(double mean, double variance, double best, double exploration) {
  const double sd = std::sqrt(std::max(variance, 0.0));
  const double gain = mean - best - exploration;
  if (sd < 1e-12) return std::max(gain, 0.0);
  const double z = gain / sd;
  return gain * normal_cdf(z) + sd * normal_pdf(z);
}

BayesOptResult maximize(const SearchSpace& space, const Objective& objective,
                        const BayesOptOptions& options, Seed seed) {
  require(!space.empty(), "empty search space");
  require(options.budget >= 1, "optimisation budget must be at least 1");
  const auto dims = static_cast<Eigen::Index>(space.size());
  Rng rng(seed);
  BayesOptResult result;

  auto random_unit = [&] {
    Vector u(dims);
    for (Eigen::Index d = 0; d < dims; ++d) u[d] = rng.uniform();
    return u;
  };
  auto already_seen = [&](const Vector& point) {
    return std::any_of(result.history.begin(), result.history.end(), [&](const Evaluation& e) {
      return (e.point - point).cwiseAbs().maxCoeff() < 1e-12;
    });
  };
  auto evaluate = [&](const Vector& point) {
    double value = objective(point);
    if (!std::isfinite(value)) value = -std::numeric_limits<double>::max() / 4;
    result.history.push_back({point, value});
  };

  const int warmup = std::clamp(options.warmup, 1, options.budget);
  for (int i = 0; i < warmup; ++i) evaluate(decode(space, random_unit()));

  for (int step = warmup; step < options.budget; ++step) {
    const auto n = static_cast<Eigen::Index>(result.history.size());
    Matrix inputs(n, dims);
    Vector targets(n);
    double floor = std::numeric_limits<double>::infinity();
    for (const auto& e : result.history)
      if (e.value > -std::numeric_limits<double>::max() / 8) floor = std::min(floor, e.value);
    if (!std::isfinite(floor)) floor = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      inputs.row(i) = encode(space, result.history[i].point).transpose();
      targets[i] = std::max(result.history[i].value, floor);
    }
    GaussianProcess gp;
    gp.fit(inputs, targets);
    const double incumbent = targets.maxCoeff();
    const double scale = std::max(std::sqrt((targets.array() - targets.mean()).square().mean()), 1e-12);

    // Candidates: uniform draws plus local moves around the three best points.
    std::vector<Vector> candidates;
    candidates.reserve(static_cast<std::size_t>(options.candidates) + 96);
    for (int c = 0; c < options.candidates; ++c) candidates.push_back(random_unit());
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return targets[a] > targets[b]; });
    for (int top = 0; top < std::min<int>(3, static_cast<int>(n)); ++top) {
      for (int c = 0; c < 32; ++c) {
        Vector u = inputs.row(order[top]).transpose();
        for (Eigen::Index d = 0; d < dims; ++d) u[d] = std::clamp(u[d] + rng.normal(0.0, 0.08), 0.0, 1.0);
        candidates.push_back(u);
      }
    }

    double best_ei = -1.0;
    Vector chosen;
    for (const auto& u : candidates) {
      const Vector point = decode(space, u);
      if (already_seen(point)) continue;
      const auto pred = gp.predict(encode(space, point));
      const double ei = expected_improvement(pred.mean, pred.variance, incumbent,
                                             options.exploration * scale);
      if (ei > best_ei) {
        best_ei = ei;
        chosen = point;
      }
    }
    if (chosen.size() == 0) chosen = decode(space, random_unit());
    evaluate(chosen);
  }

  const auto best = std::max_element(
      result.history.begin(), result.history.end(),
      [](const Evaluation& a, const Evaluation& b) { return a.value < b.value; });
  result.best = best->point;
  result.best_value = best->value;
  return result;
}

}  // namespace hardness
