#include "hardness/synthgen.hpp"

#include "hardness/learners.hpp"
#include "hardness/parallel.hpp"
#include "hardness/random.hpp"

#include "json.hpp"

#include <algorithm>
#include <cstdio>
#include <cmath>
#include <limits>
#include <numeric>

namespace hardness {

void ComplexityTarget::validate() const {
  require(f1 >= 0.0 && f1 <= 1.0 && n1 >= 0.0 && n1 <= 1.0, "complexity targets must lie in [0, 1]");
  require(n1 <= f1 + 1e-12, "target n1 must not exceed target f1");
  require(classes >= 2, "at least two classes are required");
  require(features >= 1, "at least one feature is required");
  require(instances >= 2 * classes, "need at least two instances per class");
}

double measure_f1(const LabelledDataset& data) {
  require(data.num_classes() >= 2, "f1 needs at least two classes");
  double best = 0.0;
  for (int n = 0; n < data.num_features(); ++n) best = std::max(best, fisher_ratio(data, n));
  return 1.0 / (1.0 + best);
}

double measure_n1(const LabelledDataset& data) {
  const int m = data.size();
  require(m >= 3, "n1 needs at least three instances");
  const auto first = data.labels.front();
  require(std::any_of(data.labels.begin(), data.labels.end(), [&](int y) { return y != first; }),
          "n1 needs at least two classes", ErrorCode::single_class);
  const Matrix z = FeatureSpace::fit(data).transform(data.features);

  // Prim's algorithm on the complete graph.
  std::vector<bool> in_tree(m, false);
  std::vector<double> best(m, std::numeric_limits<double>::infinity());
  std::vector<int> parent(m, -1);
  std::vector<bool> boundary(m, false);
  best[0] = 0.0;
  for (int step = 0; step < m; ++step) {
    int u = -1;
    for (int v = 0; v < m; ++v)
      if (!in_tree[v] && (u < 0 || best[v] < best[u])) u = v;
    in_tree[u] = true;
    if (parent[u] >= 0 && data.labels[u] != data.labels[parent[u]]) boundary[u] = boundary[parent[u]] = true;
    for (int v = 0; v < m; ++v) {
      if (in_tree[v]) continue;
      const double d = (z.row(u) - z.row(v)).squaredNorm();
      if (d < best[v]) {
        best[v] = d;
        parent[v] = u;
      }
    }
  }
  return static_cast<double>(std::count(boundary.begin(), boundary.end(), true)) / m;
}

BoidRuleWeights weights_from_genes(const Eigen::Ref<const Eigen::Vector4d>& genes) {
  auto w = [](double g) { return std::pow(10.0, 3.0 * std::clamp(g, 0.0, 1.0) - 2.0) - 0.01; };
  return {w(genes[0]), w(genes[1]), w(genes[2]), w(genes[3])};
}

LabelledDataset simulate_boids(const ComplexityTarget& target, const BoidRuleWeights& weights,
                               const BoidOptions& options, Seed seed) {
  target.validate();
  const int m = target.instances;
  const int n = target.features;
  const int classes = target.classes;
  Rng rng(seed);
  Matrix x(m, n);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j < n; ++j) x(i, j) = rng.uniform();
  Labels y(m);
  for (int i = 0; i < m; ++i) y[i] = i % classes;
  rng.shuffle(y);
  Vector rate(m);
  for (auto& r : rate) r = rng.uniform();

  const int k = std::min(options.neighbours, m - 1);
  // Squared typical spacing of M points in the unit cube; keeps the
  // short-range repulsion on the same scale as the other rules.
  const double spacing2 = std::pow(static_cast<double>(m), -2.0 / n);
  Matrix velocity(m, n);
  std::vector<std::pair<double, int>> distance(m);
  for (int step = 0; step < options.steps; ++step) {
    for (int i = 0; i < m; ++i) {
      distance.clear();
      for (int j = 0; j < m; ++j)
        if (j != i) distance.emplace_back((x.row(i) - x.row(j)).squaredNorm(), j);
      std::partial_sort(distance.begin(), distance.begin() + k, distance.end());
      RowVector same = RowVector::Zero(n), other = RowVector::Zero(n), repel = RowVector::Zero(n);
      int n_same = 0, n_other = 0;
      for (int j = 0; j < k; ++j) {
        const int nb = distance[j].second;
        if (y[nb] == y[i]) {
          same += x.row(nb);
          repel += (x.row(i) - x.row(nb)) * (spacing2 / (distance[j].first + 0.01 * spacing2));
          ++n_same;
        } else {
          other += x.row(nb);
          ++n_other;
        }
      }
      const RowVector self = x.row(i);
      RowVector v = RowVector::Zero(n);
      const double anchor = static_cast<double>(y[i]) / (classes - 1);
      v[0] += weights.class_attraction * (anchor - self[0]);
      if (n_same > 0) {
        v += weights.cohesion * (same / n_same - self);
        v += weights.separation * repel / n_same;
      }
      if (n_other > 0) v += weights.alignment * (other / n_other - self);
      velocity.row(i) = v;
    }
    for (int i = 0; i < m; ++i) {
      x.row(i) += options.step_size * rate[i] * velocity.row(i);
      for (Eigen::Index j = 0; j < n; ++j) x(i, j) += options.jitter * rng.normal();
    }
  }
  return LabelledDataset::from_matrix(std::move(x), std::move(y), classes, "synthetic");
}

namespace {

struct Individual {
  Eigen::Vector4d genes;
  double residual = 0.0;
  double f1 = 0.0;
  double n1 = 0.0;
};

}  // namespace

GeneratedDataset generate(const ComplexityTarget& target, const GaSettings& ga, Seed seed,
                          const BoidOptions& boids) {
  target.validate();
  require(ga.population >= 2 && ga.generations >= 0, "GA needs a population of two or more");
  require(ga.elitism >= 0 && ga.elitism < ga.population, "elitism must leave room for offspring");
  require(ga.tournament >= 1, "tournament size must be at least 1");

  const Seed data_seed = seed.derive(1);
  Rng rng(seed.derive(2));
  auto evaluate = [&](std::vector<Individual>& batch, std::size_t from) {
    parallel_for(static_cast<int>(batch.size() - from), [&](int offset) {
      auto& ind = batch[from + static_cast<std::size_t>(offset)];
      const auto data = simulate_boids(target, weights_from_genes(ind.genes), boids, data_seed);
      ind.f1 = measure_f1(data);
      ind.n1 = measure_n1(data);
      ind.residual = std::abs(ind.f1 - target.f1) + std::abs(ind.n1 - target.n1);
    });
  };
  auto by_residual = [](const Individual& a, const Individual& b) { return a.residual < b.residual; };

  std::vector<Individual> population(static_cast<std::size_t>(ga.population));
  for (auto& ind : population)
    for (int g = 0; g < 4; ++g) ind.genes[g] = rng.uniform();
  evaluate(population, 0);
  std::stable_sort(population.begin(), population.end(), by_residual);

  GeneratedDataset out;
  out.best_residuals.push_back(population.front().residual);
  for (int gen = 0; gen < ga.generations && population.front().residual >= ga.tolerance; ++gen) {
    auto pick = [&]() -> const Individual& {
      int best = rng.index(ga.population);
      for (int t = 1; t < ga.tournament; ++t) {
        const int other = rng.index(ga.population);
        if (population[other].residual < population[best].residual) best = other;
      }
      return population[best];
    };
    std::vector<Individual> next(population.begin(), population.begin() + ga.elitism);
    while (static_cast<int>(next.size()) < ga.population) {
      const Individual& a = pick();
      const Individual& b = pick();
      Individual child;
      for (int g = 0; g < 4; ++g) {
        child.genes[g] = rng.uniform() < 0.5 ? a.genes[g] : b.genes[g];
        if (rng.uniform() < ga.mutation_rate) child.genes[g] += rng.normal(0.0, ga.mutation_sd);
        child.genes[g] = std::clamp(child.genes[g], 0.0, 1.0);
      }
      next.push_back(child);
    }
    evaluate(next, static_cast<std::size_t>(ga.elitism));
    population = std::move(next);
    std::stable_sort(population.begin(), population.end(), by_residual);
    out.best_residuals.push_back(population.front().residual);
  }

  const Individual& best = population.front();
  out.target = target;
  out.weights = weights_from_genes(best.genes);
  out.data = simulate_boids(target, out.weights, boids, data_seed);
  out.achieved_f1 = best.f1;
  out.achieved_n1 = best.n1;
  out.residual = best.residual;
  out.infeasible = best.residual > 0.2;
  out.seed = seed;
  return out;
}

std::vector<std::pair<double, double>> grid_targets() {
  std::vector<std::pair<double, double>> out;
  for (int f = 1; f <= 5; ++f)
    for (int n = 1; n <= f; ++n) out.emplace_back(0.2 * f, 0.2 * n);
  return out;
}

std::vector<GeneratedDataset> generate_grid(const LabelledDataset& templ, Seed seed, const GaSettings& ga,
                                            const BoidOptions& boids) {
  templ.validate();
  std::vector<GeneratedDataset> out;
  const auto targets = grid_targets();
  for (std::size_t t = 0; t < targets.size(); ++t) {
    ComplexityTarget target;
    target.f1 = targets[t].first;
    target.n1 = targets[t].second;
    target.instances = templ.size();
    target.features = templ.num_features();
    target.classes = templ.num_classes();
    auto generated = generate(target, ga, seed.derive(t), boids);
    char id[64];
    std::snprintf(id, sizeof id, "%s-syn-f%.1f-n%.1f", templ.id.c_str(), target.f1, target.n1);
    generated.data.id = id;
    out.push_back(std::move(generated));
  }
  return out;
}

std::string sidecar_json(const GeneratedDataset& generated) {
  nlohmann::ordered_json doc;
  doc["target_f1"] = generated.target.f1;
  doc["target_n1"] = generated.target.n1;
  doc["achieved_f1"] = generated.achieved_f1;
  doc["achieved_n1"] = generated.achieved_n1;
  doc["seed"] = generated.seed.value;
  doc["infeasible"] = generated.infeasible;
  doc["weights"] = {{"class_attraction", generated.weights.class_attraction},
                    {"cohesion", generated.weights.cohesion},
                    {"separation", generated.weights.separation},
                    {"alignment", generated.weights.alignment}};
  return doc.dump(2) + "\n";
}

}  // namespace hardness
