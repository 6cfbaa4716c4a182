#include "cli.hpp"

#include "hardness/diversity.hpp"
#include "hardness/estimator.hpp"
#include "hardness/evalstats.hpp"
#include "hardness/explain.hpp"
#include "hardness/random.hpp"
#include "hardness/synthgen.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

using namespace hardness;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(double v, int digits = 3) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(digits) << v;
  return out.str();
}

// ---------------------------------------------------------------------------
// Shared fixtures

// Two classes, 2000 rows, unit-variance Gaussians whose means differ by 2 along
// the diagonal, so the Bayes error is about 16%.
LabelledDataset benchmark(std::uint64_t seed, int size = 2000, double separation = 2.0, std::string id = "benchmark") {
  Rng rng(Seed{seed});
  Matrix x(size, 2);
  Labels y(size);
  const double shift = separation / std::sqrt(2.0);
  for (int i = 0; i < size; ++i) {
    y[i] = i % 2;
    for (int j = 0; j < 2; ++j) x(i, j) = rng.normal(y[i] ? shift : 0.0, 1.0);
  }
  return LabelledDataset::from_matrix(std::move(x), std::move(y), 2, std::move(id));
}

LabelledDataset clean_blobs(std::uint64_t seed, int per_class, double separation) {
  Rng rng(Seed{seed});
  Matrix x(2 * per_class, 2);
  Labels y(2 * per_class);
  for (int i = 0; i < 2 * per_class; ++i) {
    y[i] = i < per_class ? 0 : 1;
    x(i, 0) = rng.normal(y[i] * separation, 1.0);
    x(i, 1) = rng.normal(0.0, 1.0);
  }
  return LabelledDataset::from_matrix(std::move(x), std::move(y), 2, "blobs");
}

RecordOptions benchmark_records() {
  RecordOptions options;
  options.tuning_budget = 6;
  return options;
}

EstimatorConfig benchmark_estimator() {
  EstimatorConfig config;
  config.budget = 20;
  config.warmup = 8;
  config.restarts = 2;
  config.tuning_splits = 2;
  return config;
}

const std::array<ClassifierKind, 4> kKinds{ClassifierKind::logistic_regression, ClassifierKind::gaussian_nb,
                                           ClassifierKind::knn_classifier, ClassifierKind::decision_tree};

// Knowledge base: two auxiliary "real" draws plus the synthetic grid, the
// synthetic part subsampled to the size of the real part.
KnowledgeBase benchmark_kb(const ClassifierSpec& spec) {
  static std::optional<std::vector<GeneratedDataset>> grid;
  if (!grid) {
    const auto templ = benchmark(0, 200, 2.0, "grid");
    GaSettings ga;
    ga.population = 12;
    ga.generations = 8;
    grid = generate_grid(templ, Seed{77}, ga);
  }
  const std::vector<KbSource> real{{benchmark(101, 300, 1.5, "aux-a"), Provenance::real},
                                   {benchmark(102, 300, 2.5, "aux-b"), Provenance::real}};
  std::vector<KbSource> synthetic;
  for (const auto& g : *grid) synthetic.push_back({g.data, Provenance::synthetic});
  const auto options = benchmark_records();
  KnowledgeBase kb = build_kb(real, spec, options, Seed{11}).kb;
  const KnowledgeBase syn = truncate_kb(build_kb(synthetic, spec, options, Seed{12}).kb, kb.size(), Seed{13});
  kb.records.insert(kb.records.end(), syn.records.begin(), syn.records.end());
  kb.sort();
  kb.summarise();
  return kb;
}

struct KindRun {
  ClassifierKind kind;
  NestedCvResult result;
  MethodSummary estimator;
  MethodSummary baseline;
};

std::vector<KindRun>& benchmark_runs() {
  static std::vector<KindRun> runs;
  if (runs.empty()) {
    const auto data = benchmark(0);
    for (auto kind : kKinds) {
      const auto spec = ClassifierSpec::defaults(kind);
      KindRun run{kind, nested_cv_run(data, benchmark_kb(spec), spec, benchmark_estimator(), benchmark_records(),
                                      Seed{2024}),
                  {}, {}};
      run.estimator = summarise_method("estimator", run.result.uncertainty, run.result.misclassified);
      run.baseline = summarise_method("baseline", -run.result.certainty, run.result.misclassified);
      runs.push_back(std::move(run));
    }
  }
  return runs;
}

// ---------------------------------------------------------------------------
// Independent oracles

double oracle_lrid(const std::vector<double>& counts) {
  double total = 0.0;
  for (double c : counts) total += c;
  double g = 0.0;
  for (double c : counts)
    if (c > 0) g += c * std::log((total / counts.size()) / c);
  return -2.0 * g;
}

double oracle_diversity(const std::vector<double>& counts) {
  double total = 0.0;
  for (double c : counts) total += c;
  return std::clamp(1.0 - oracle_lrid(counts) / (2.0 * total * std::log(static_cast<double>(counts.size()))), 0.0, 1.0);
}

double oracle_auroc(const Vector& s, const std::vector<int>& y) {
  double wins = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j)
      if (y[i] && !y[j]) {
        pairs += 1.0;
        wins += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
      }
  return wins / pairs;
}

double oracle_spearman(const Vector& a, const Vector& b) {
  auto ranks = [](const Vector& v) {
    Vector r(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      double less = 0.0, same = 0.0;
      for (Eigen::Index j = 0; j < v.size(); ++j) {
        less += v[j] < v[i];
        same += v[j] == v[i];
      }
      r[i] = less + (same + 1.0) / 2.0;
    }
    return r;
  };
  const Vector ra = ranks(a), rb = ranks(b);
  const Vector ca = ra.array() - ra.mean(), cb = rb.array() - rb.mean();
  return ca.dot(cb) / (ca.norm() * cb.norm());
}

// Product of per-feature Gaussian KDEs, computed in log space.
double oracle_log_cl(const LabelledDataset& train, const RowVector& x, int c) {
  double total = 0.0;
  for (int n = 0; n < train.num_features(); ++n) {
    std::vector<double> values;
    for (int i = 0; i < train.size(); ++i)
      if (train.labels[i] == c) values.push_back(train.features(i, n));
    const Vector v = Eigen::Map<const Vector>(values.data(), static_cast<Eigen::Index>(values.size()));
    const double h = silverman_bandwidth(v);
    double p = 0.0;
    for (double s : values) p += std::exp(-0.5 * std::pow((x[n] - s) / h, 2.0)) / (h * std::sqrt(2.0 * M_PI));
    total += std::log(p / values.size());
  }
  return total;
}

std::vector<int> oracle_knn(const Matrix& p, const Vector& z, int k) {
  std::vector<std::pair<double, int>> d;
  for (int i = 0; i < p.rows(); ++i) d.emplace_back((p.row(i).transpose() - z).squaredNorm(), i);
  std::sort(d.begin(), d.end());
  std::vector<int> out;
  for (int j = 0; j < k; ++j) out.push_back(d[j].second);
  return out;
}

// ---------------------------------------------------------------------------
// Criteria

Outcome criterion_1() {
  Rng rng(Seed{1});
  const int trials = 120;
  std::map<std::string, int> ok;
  for (int t = 0; t < trials; ++t) {
    const int classes = 2 + rng.index(4);
    std::vector<double> counts(classes);
    Vector cv(classes);
    for (int c = 0; c < classes; ++c) cv[c] = counts[c] = rng.index(12);
    counts[0] = cv[0] = cv[0] + 1;
    ok["lrid"] += std::abs(lrid(cv) - oracle_lrid(counts)) <= 1e-9 * std::max(1.0, std::abs(oracle_lrid(counts)));
    ok["diversity"] += std::abs(diversity(cv) - oracle_diversity(counts)) <= 1e-9;

    const long tp = rng.index(30), fp = rng.index(30), tn = rng.index(30), fn = 1 + rng.index(30);
    ok["misclassification_rate"] +=
        misclassification_rate(tp, fp, tn, fn) == static_cast<double>(fp + fn) / static_cast<double>(tp + fp + tn + fn) ||
        std::abs(misclassification_rate(tp, fp, tn, fn) - static_cast<double>(fp + fn) / (tp + fp + tn + fn)) <= 1e-15;

    const int clusters = 1 + rng.index(6);
    Vector mu(clusters), rates(clusters);
    for (int c = 0; c < clusters; ++c) {
      mu[c] = rng.uniform() + 1e-3;
      rates[c] = rng.uniform();
    }
    double num = 0.0, den = 0.0;
    for (int c = 0; c < clusters; ++c) {
      num += mu[c] * rates[c];
      den += mu[c];
    }
    ok["defuzzify"] += std::abs(defuzzify(mu, rates) - num / den) <= 1e-12;

    // DCP counts a disjunct's members directly.
    const int members = 1 + rng.index(15);
    Labels leaf(members);
    for (auto& y : leaf) y = rng.index(classes);
    const int label = rng.index(classes);
    const auto same = std::count(leaf.begin(), leaf.end(), label);
    ok["dcp"] += disjunct_class_percentage(count_classes(leaf, classes), label) ==
                 static_cast<double>(same) / static_cast<double>(members);

    // CLD against a direct per-feature KDE.
    Matrix x(30, 2);
    Labels y(30);
    for (int i = 0; i < 30; ++i) {
      y[i] = i % 2;
      x(i, 0) = rng.normal(y[i] * 1.5, 1.0);
      x(i, 1) = rng.normal(0.0, 1.0 + y[i]);
    }
    const auto train = LabelledDataset::from_matrix(x, y, 2);
    RowVector q(2);
    q << rng.uniform(-2, 4), rng.uniform(-2, 2);
    const int t0 = rng.index(2);
    const double cld = class_likelihood_difference(ClassConditionalDensities(train), q, t0);
    ok["cld"] += std::abs(cld - (oracle_log_cl(train, q, t0) - oracle_log_cl(train, q, 1 - t0))) <= 1e-9;

    const int n = 6 + rng.index(30);
    Vector s(n), other(n);
    std::vector<int> flags(n);
    for (int i = 0; i < n; ++i) {
      s[i] = std::round(rng.uniform() * 10.0);
      other[i] = std::round(rng.uniform() * 10.0);
      flags[i] = rng.uniform() < 0.4;
    }
    flags[0] = 1;
    flags[1] = 0;
    s[0] = 11.0;  // keeps the column nonconstant
    other[1] = -1.0;
    ok["auroc"] += std::abs(auroc(s, flags) - oracle_auroc(s, flags)) <= 1e-9;
    Matrix pair(n, 2);
    pair << s, other;
    ok["spearman"] += std::abs(spearman_matrix(pair).rho(0, 1) - oracle_spearman(s, other)) <= 1e-9;
  }
  bool pass = true;
  std::string detail;
  for (const auto& [name, count] : ok) {
    pass = pass && count == trials;
    detail += name + " " + std::to_string(count) + "/" + std::to_string(trials) + " ";
  }
  return {pass, detail};
}

Outcome criterion_2() {
  Rng rng(Seed{2});
  int checks = 0, failures = 0;
  auto check = [&](bool ok) {
    ++checks;
    failures += !ok;
  };
  auto random_data = [&](int m, int classes) {
    Matrix x(m, 2);
    Labels y(m);
    for (int i = 0; i < m; ++i) {
      y[i] = i % classes;
      x(i, 0) = rng.normal(y[i], 1.0);
      x(i, 1) = rng.normal(0.0, 1.0);
    }
    return LabelledDataset::from_matrix(x, y, classes);
  };
  for (int trial = 0; trial < 20; ++trial) {
    const int classes = 2 + trial % 2;
    const auto data = random_data(10 + rng.index(21), classes);
    MetaConfig config;
    config.k = 3;
    const ReferenceContext ctx(data, config);

    // Relabelled and row-permuted copies of the reference.
    Labels flipped = data.labels;
    for (auto& y : flipped) y = classes - 1 - y;
    const ReferenceContext relabelled(LabelledDataset::from_matrix(data.features, flipped, classes), config);
    Indices order(data.size());
    std::iota(order.rbegin(), order.rend(), 0);
    const ReferenceContext permuted(data.subset(order), config);

    // Brute force over the fitted trees and a direct neighbour search.
    std::map<int, int> sizes;
    std::map<int, Vector> pruned_counts;
    for (int i = 0; i < data.size(); ++i) {
      const Vector z = ctx.points().row(i).transpose();
      ++sizes[ctx.unpruned_tree().leaf_of(z)];
      auto& c = pruned_counts[ctx.pruned_tree().leaf_of(z)];
      if (c.size() == 0) c = Vector::Zero(classes);
      c[data.labels[i]] += 1.0;
    }
    int largest = 0;
    for (const auto& [leaf, size] : sizes) largest = std::max(largest, size);

    for (int q = 0; q < 6; ++q) {
      RowVector x(2);
      x << rng.normal(0.0, 2.0), rng.normal(0.0, 2.0);
      const Vector z = ctx.embed(x);
      const int predicted = rng.index(classes);
      const auto r = compute_all(ctx, x, predicted);
      check(r.values.allFinite());
      for (int j : {meta::kdn, meta::ds, meta::dcd, meta::clol, meta::ec, meta::hd})
        check(r.values[j] >= 0.0 && r.values[j] <= 1.0);
      check(r.values[meta::ol] >= 0.0);

      std::vector<double> votes(classes, 0.0);
      for (int i : oracle_knn(ctx.points(), z, 3)) votes[data.labels[i]] += 1.0;
      check(std::abs(kdn(ctx, x) - oracle_diversity(votes)) <= 1e-12);
      const int size = sizes[ctx.unpruned_tree().leaf_of(z)];
      check(disjunct_size(ctx, x) == (largest > 1 ? (size - 1.0) / (largest - 1.0) : 0.0));
      Vector counts = pruned_counts[ctx.pruned_tree().leaf_of(z)];
      if (counts.size() == 0) counts = Vector::Zero(classes);
      std::vector<double> cv(counts.data(), counts.data() + counts.size());
      check(std::abs(disjunct_class_diversity(ctx, x) - oracle_diversity(cv)) <= 1e-12);

      check(std::abs(kdn(relabelled, x) - kdn(ctx, x)) <= 1e-12);
      check(std::abs(disjunct_class_diversity(relabelled, x) - disjunct_class_diversity(ctx, x)) <= 1e-12);
      check(std::abs(class_level_outlierness(relabelled, x) - class_level_outlierness(ctx, x)) <= 1e-12);
      check(std::abs(kdn(permuted, x) - kdn(ctx, x)) <= 1e-12);
      check(std::abs(outlierness(permuted, x).value - outlierness(ctx, x).value) <=
            1e-9 * std::max(1.0, outlierness(ctx, x).value));
      check(std::abs(hyperplane_distance(permuted, x) - hyperplane_distance(ctx, x)) <= 1e-6);
    }
  }
  // Documented examples: a query inside a pure region.
  Matrix pure(6, 1);
  pure << 0.0, 0.1, 0.2, 10.0, 10.1, 10.2;
  const ReferenceContext simple(LabelledDataset::from_matrix(pure, Labels{0, 0, 0, 1, 1, 1}, 2), MetaConfig{3});
  RowVector inside(1);
  inside << 0.1;
  check(kdn(simple, inside) == 0.0);
  check(disjunct_class_diversity(simple, inside) == 0.0);
  return {failures == 0, std::to_string(checks - failures) + "/" + std::to_string(checks) + " checks"};
}

Outcome criterion_3() {
  int passing = 0;
  std::string detail;
  const auto spec = ClassifierSpec::defaults(ClassifierKind::knn_classifier);
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto data = benchmark(seed);
    const auto records = cross_validated_records(data, spec, benchmark_records(), Seed{seed});
    auto odds = [&](int column) { return univariate_or(records.meta.col(column), records.misclassified); };
    const auto kdn_or = odds(meta::kdn), ec_or = odds(meta::ec), dcd_or = odds(meta::dcd), ds_or = odds(meta::ds),
               hd_or = odds(meta::hd);
    const bool ok = kdn_or.odds_ratio > 1 && kdn_or.p_value < 0.05 && ec_or.odds_ratio > 1 && ec_or.p_value < 0.05 &&
                    dcd_or.odds_ratio > 1 && dcd_or.p_value < 0.05 && ds_or.odds_ratio < 1 && ds_or.p_value < 0.05 &&
                    hd_or.odds_ratio < 1 && hd_or.p_value < 0.05;
    passing += ok;
    detail += "seed" + std::to_string(seed) + "[kdn " + fmt(kdn_or.odds_ratio, 2) + " ec " + fmt(ec_or.odds_ratio, 2) +
              " dcd " + fmt(dcd_or.odds_ratio, 2) + " ds " + fmt(ds_or.odds_ratio, 2) + " hd " +
              fmt(hd_or.odds_ratio, 2) + "] ";
  }
  return {passing >= 4, std::to_string(passing) + "/5 seeds; " + detail};
}

Outcome criterion_4() {
  int useful = 0, competitive = 0;
  std::string detail;
  for (const auto& run : benchmark_runs()) {
    const bool u = run.estimator.auroc >= 0.65 && run.estimator.auprc.improvement >= 0.05;
    const bool c = run.estimator.auroc >= run.baseline.auroc - 0.03;
    useful += u;
    competitive += c;
    detail += std::string(to_string(run.kind)) + "[auroc " + fmt(run.estimator.auroc) + " gain " +
              fmt(run.estimator.auprc.improvement) + " baseline " + fmt(run.baseline.auroc) + "] ";
  }
  return {useful >= 3 && competitive >= 2,
          std::to_string(useful) + "/4 useful, " + std::to_string(competitive) + "/4 competitive; " + detail};
}

Outcome criterion_5() {
  Rng rng(Seed{5});
  int checks = 0, failures = 0;
  auto check = [&](bool ok) {
    ++checks;
    failures += !ok;
  };
  EstimatorConfig config;
  config.restarts = 2;
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 80 + rng.index(80);
    LabelledMeta data{MetaMatrix(n, kMetaCount), Vector(n)};
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < kMetaCount; ++j) data.meta(i, j) = rng.uniform();
      data.flags[i] = rng.uniform() < 0.3;
    }
    MetaFeatureVector w;
    for (int j = 0; j < kMetaCount; ++j) w[j] = rng.uniform(0.05, 1.0);
    const int clusters = 2 + rng.index(6);
    const Seed seed{static_cast<std::uint64_t>(trial)};
    const auto model = fcm_fit(data, w, clusters, config, seed);
    for (std::size_t t = 1; t < model.objective.size(); ++t)
      check(model.objective[t] <= model.objective[t - 1] * (1.0 + 1e-12));
    const auto single = fcm_fit(data, w, 1, config, seed);
    for (int q = 0; q < 25; ++q) {
      MetaFeatureVector x;
      for (int j = 0; j < kMetaCount; ++j) x[j] = rng.uniform(-0.2, 1.2);
      const Vector mu = memberships(model, x.cwiseProduct(w));
      check(std::abs(mu.sum() - 1.0) <= 1e-9 && mu.minCoeff() >= 0.0 && mu.maxCoeff() <= 1.0);
      const double u = estimate_uncertainty(model, x);
      check(u >= model.rates.minCoeff() - 1e-12 && u <= model.rates.maxCoeff() + 1e-12);
      check(std::abs(estimate_uncertainty(single, x) - data.flags.mean()) <= 1e-12);
    }
    const double factor = rng.uniform(0.1, 10.0);
    const auto scaled = fcm_fit(data, w * factor, clusters, config, seed);
    for (int i = 0; i < n; ++i) {
      const MetaFeatureVector x = data.meta.row(i).transpose();
      Eigen::Index a = 0, b = 0;
      memberships(model, x.cwiseProduct(w)).maxCoeff(&a);
      memberships(scaled, x.cwiseProduct(w * factor)).maxCoeff(&b);
      check(a == b);
    }
    const Vector u0 = estimate_uncertainty_rows(model, data.meta), u1 = estimate_uncertainty_rows(scaled, data.meta);
    check(midranks(u0).isApprox(midranks(u1)));
  }
  return {failures == 0, std::to_string(checks - failures) + "/" + std::to_string(checks) + " checks"};
}

Outcome criterion_6() {
  double recovered = 0.0, flipped_total = 0.0, false_pos = 0.0, clean_total = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    auto data = clean_blobs(seed, 200, 4.0);
    // Deep flips: 10 rows per class drawn uniformly from those at least two
    // standard deviations inside their own side of the boundary.
    Rng rng(Seed{seed}.derive(1));
    std::set<int> flipped;
    for (int c = 0; c < 2; ++c) {
      Indices deep;
      for (int i = 0; i < data.size(); ++i)
        if (data.labels[i] == c && (c == 0 ? data.features(i, 0) < 0.0 : data.features(i, 0) > 4.0)) deep.push_back(i);
      for (int j : rng.sample_without_replacement(static_cast<int>(deep.size()), 10)) flipped.insert(deep[j]);
    }
    for (int i : flipped) data.labels[i] = 1 - data.labels[i];
    const auto verdicts = ism_flags(data, 5);
    for (int i = 0; i < data.size(); ++i) {
      if (flipped.count(i)) {
        flipped_total += 1.0;
        recovered += verdicts[i].is_ism;
      } else {
        clean_total += 1.0;
        false_pos += verdicts[i].is_ism;
      }
    }
  }
  const double recall = recovered / flipped_total, fpr = false_pos / clean_total;

  // Remove the benchmark's ISMs and rerun the estimator for each classifier.
  const auto data = benchmark(0);
  const auto verdicts = ism_flags(data, 5);
  Indices keep;
  for (int i = 0; i < data.size(); ++i)
    if (!verdicts[i].is_ism) keep.push_back(i);
  const auto cleaned = data.subset(keep);
  int improved = 0;
  std::string detail;
  for (const auto& run : benchmark_runs()) {
    const auto spec = ClassifierSpec::defaults(run.kind);
    const auto again = nested_cv_run(cleaned, benchmark_kb(spec), spec, benchmark_estimator(), benchmark_records(),
                                     Seed{2024});
    const double after = auroc(again.uncertainty, again.misclassified);
    improved += after > run.estimator.auroc;
    detail += std::string(to_string(run.kind)) + " " + fmt(run.estimator.auroc) + "->" + fmt(after) + " ";
  }
  const bool pass = recall >= 0.70 && fpr <= 0.10 && improved == static_cast<int>(kKinds.size());
  return {pass, "recall " + fmt(recall) + ", fpr " + fmt(fpr) + ", removed " +
                    std::to_string(data.size() - cleaned.size()) + " ISMs; auroc " + detail};
}

Outcome criterion_7() {
  bool pass = true;
  std::string detail;
  for (const auto& run : benchmark_runs()) {
    const auto curve = abstention_curve(run.result.uncertainty, run.result.misclassified);
    const double at25 = curve.misclassified_pct[4], at95 = curve.misclassified_pct[18];
    Matrix pairs(static_cast<Eigen::Index>(curve.percentiles.size()), 2);
    for (std::size_t i = 0; i < curve.percentiles.size(); ++i)
      pairs.row(static_cast<Eigen::Index>(i)) << curve.percentiles[i], curve.misclassified_pct[i];
    const double rho = spearman_matrix(pairs).rho(0, 1);
    pass = pass && at25 <= at95 && rho > 0.0;
    detail += std::string(to_string(run.kind)) + "[p25 " + fmt(at25, 1) + "% p95 " + fmt(at95, 1) + "% rho " +
              fmt(rho, 2) + "] ";
  }
  return {pass, detail};
}

Outcome criterion_8() {
  Rng rng(Seed{8});
  int checks = 0, failures = 0;
  auto check = [&](bool ok) {
    ++checks;
    failures += !ok;
  };
  EstimatorConfig config;
  config.restarts = 2;
  LabelledMeta kb{MetaMatrix(300, kMetaCount), Vector(300)};
  for (int i = 0; i < 300; ++i) {
    for (int j = 0; j < kMetaCount; ++j) kb.meta(i, j) = rng.uniform();
    kb.flags[i] = rng.uniform() < kb.meta(i, 0);
  }
  MetaFeatureVector w;
  for (int j = 0; j < kMetaCount; ++j) w[j] = rng.uniform(0.2, 1.0);
  w[meta::ol] = 0.0;  // dummy feature
  w[meta::dcd] = w[meta::kdn];
  auto model = fcm_fit(kb, w, 4, config, Seed{1});
  model.centers.col(meta::dcd) = model.centers.col(meta::kdn);  // exchangeable kdn and dcd
  MetaMatrix background(16, kMetaCount);
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < kMetaCount; ++j) background(i, j) = rng.uniform();
    background.row(i + 8) = background.row(i);
    std::swap(background(i + 8, meta::kdn), background(i + 8, meta::dcd));
  }
  for (int trial = 0; trial < 20; ++trial) {
    MetaFeatureVector x;
    for (int j = 0; j < kMetaCount; ++j) x[j] = rng.uniform();
    x[meta::dcd] = x[meta::kdn];
    const auto a = shapley(model, x, background);
    check(std::abs(a.base_value + a.contributions.sum() - a.fx) <= 1e-6);
    check(std::abs(a.contributions[meta::ol]) <= 1e-9);
    check(std::abs(a.contributions[meta::kdn] - a.contributions[meta::dcd]) <= 1e-9);

    // Permutation average over all 7! orderings.
    std::map<int, double> value;
    auto v = [&](int mask) {
      if (auto it = value.find(mask); it != value.end()) return it->second;
      double total = 0.0;
      for (Eigen::Index r = 0; r < background.rows(); ++r) {
        MetaFeatureVector z = background.row(r).transpose();
        for (int j = 0; j < kMetaCount; ++j)
          if (mask >> j & 1) z[j] = x[j];
        total += estimate_uncertainty(model, z);
      }
      return value[mask] = total / static_cast<double>(background.rows());
    };
    std::array<int, kMetaCount> order;
    std::iota(order.begin(), order.end(), 0);
    MetaFeatureVector phi = MetaFeatureVector::Zero();
    double count = 0.0;
    do {
      int mask = 0;
      for (int j : order) {
        phi[j] += v(mask | (1 << j)) - v(mask);
        mask |= 1 << j;
      }
      count += 1.0;
    } while (std::next_permutation(order.begin(), order.end()));
    check(((phi / count) - a.contributions).cwiseAbs().maxCoeff() <= 1e-9);
  }
  return {failures == 0, std::to_string(checks - failures) + "/" + std::to_string(checks) + " checks"};
}

Outcome criterion_9() {
  const std::array<std::pair<double, double>, 3> targets{{{0.2, 0.2}, {0.6, 0.4}, {0.9, 0.8}}};
  bool pass = true;
  std::string detail;
  for (const auto& [f1, n1] : targets) {
    int hits = 0;
    detail += "(" + fmt(f1, 1) + "," + fmt(n1, 1) + ")[";
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      ComplexityTarget target;
      target.f1 = f1;
      target.n1 = n1;
      const auto g = generate(target, GaSettings{}, Seed{seed});
      hits += std::abs(g.achieved_f1 - f1) <= 0.1 && std::abs(g.achieved_n1 - n1) <= 0.1;
      detail += fmt(g.achieved_f1, 2) + "/" + fmt(g.achieved_n1, 2) + (seed < 2 ? " " : "");
    }
    detail += "] ";
    pass = pass && hits >= 2;
  }
  return {pass, detail};
}

std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::stringstream buffer;
    buffer << in.rdbuf();
    std::string text = buffer.str();
    if (e.path().filename().string().find(".manifest.json") != std::string::npos) {
      const auto at = text.find("\"created\"");
      if (at != std::string::npos) text.erase(at, text.find('\n', at) - at);
    }
    files[fs::relative(e.path(), dir).string()] = text;
  }
  return files;
}

Outcome criterion_10() {
  const fs::path root = fs::temp_directory_path() / "hardness-acceptance-cli";
  fs::remove_all(root);
  fs::create_directories(root);
  auto write = [&](const std::string& name, const LabelledDataset& data) {
    std::ofstream(root / name) << to_csv(data);
  };
  write("patients.csv", benchmark(5, 160, 1.8, "patients"));
  write("registry.csv", benchmark(6, 140, 1.4, "registry"));
  std::ofstream(root / "config.json") << R"({
  "seed": 17,
  "classifier": "logistic_regression",
  "records": {"tuning_budget": 3},
  "estimator": {"budget": 6, "warmup": 4, "restarts": 2, "max_clusters": 6, "tuning_splits": 2},
  "synth": {"instances": 80, "population": 6, "generations": 3}
})";
  const std::string config = (root / "config.json").string(), out = (root / "out").string();
  const std::string patients = (root / "patients.csv").string(), registry = (root / "registry.csv").string();
  const std::vector<std::vector<std::string>> pipeline{
      {"synth"},
      {"kb", "--real", registry, "--synthetic", out + "/synthetic"},
      {"metafeatures", "--dataset", patients},
      {"train", "--dataset", patients},
      {"estimate"},
      {"eval"},
      {"abstain"},
      {"explain"}};
  std::ostringstream log;
  auto run_all = [&]() -> std::string {
    for (const auto& step : pipeline) {
      std::vector<std::string> args{"--config", config, "--out-dir", out};
      args.insert(args.end(), step.begin(), step.end());
      const int code = hardness::cli::run(args, log, log);
      if (code != 0) return step.front() + " exited " + std::to_string(code) + ": " + log.str();
    }
    return {};
  };
  if (auto error = run_all(); !error.empty()) return {false, "first run: " + error};
  const auto first = snapshot(out);
  fs::rename(out, root / "first");
  if (auto error = run_all(); !error.empty()) return {false, "second run: " + error};
  const auto second = snapshot(out);
  int differing = 0;
  for (const auto& [name, bytes] : first) {
    const auto it = second.find(name);
    differing += it == second.end() || it->second != bytes;
  }
  const std::array<const char*, 9> expected{"kb.jsonl", "metafeatures.csv", "nested.csv", "model.json",
                                            "uncertainty.csv", "report.json", "report.txt", "abstention.csv",
                                            "explanation.json"};
  int missing = 0;
  for (const char* name : expected) missing += !first.count(name);
  const bool pass = differing == 0 && missing == 0 && first.size() == second.size();
  return {pass, std::to_string(first.size()) + " artifacts, " + std::to_string(differing) + " differ, " +
                    std::to_string(missing) + " expected missing"};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::function<Outcome()>> criteria{criterion_1, criterion_2, criterion_3, criterion_4,
                                                       criterion_5, criterion_6, criterion_7, criterion_8,
                                                       criterion_9, criterion_10};
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));
  int failed = 0;
  for (std::size_t c = 0; c < criteria.size(); ++c) {
    const int number = static_cast<int>(c) + 1;
    if (!selected.empty() && !selected.count(number)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = criteria[c]();
    } catch (const std::exception& e) {
      outcome = {false, std::string("threw: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    failed += !outcome.pass;
    std::cout << "criterion " << number << ' ' << (outcome.pass ? "PASS" : "FAIL") << " (" << fmt(seconds, 1)
              << "s) " << outcome.detail << std::endl;
  }
  return failed == 0 ? 0 : 1;
}
