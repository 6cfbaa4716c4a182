#include "hardness/evalstats.hpp"

#include "hardness/diversity.hpp"
#include "hardness/metafeatures.hpp"
#include "hardness/tree.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

namespace hardness {

namespace {

void check_flags(Eigen::Index n, const std::vector<int>& flags) {
  require(static_cast<Eigen::Index>(flags.size()) == n, "scores and flags differ in length");
  for (int f : flags) require(f == 0 || f == 1, "flags must be 0 or 1");
}

int positives(const std::vector<int>& flags) { return static_cast<int>(std::count(flags.begin(), flags.end(), 1)); }

void require_both_classes(const std::vector<int>& flags) {
  const int pos = positives(flags);
  require(pos > 0 && pos < static_cast<int>(flags.size()), "flags contain a single class", ErrorCode::single_class);
}

}  // namespace

OddsRatioResult univariate_or(const Eigen::Ref<const Vector>& x, const std::vector<int>& flags) {
  check_flags(x.size(), flags);
  require_both_classes(flags);
  OddsRatioResult out;
  const ZScore z = zscore(x);
  if (z.degenerate) {
    out.degenerate = true;
    return out;
  }
  const Eigen::Index n = x.size();
  Vector y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = flags[i];

  double max0 = -INFINITY, min0 = INFINITY, max1 = -INFINITY, min1 = INFINITY;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (flags[i]) {
      max1 = std::max(max1, z.values[i]);
      min1 = std::min(min1, z.values[i]);
    } else {
      max0 = std::max(max0, z.values[i]);
      min0 = std::min(min0, z.values[i]);
    }
  }
  const double log_cap = std::log(kOddsRatioCap);
  auto clamp_separated = [&](bool increasing) {
    out.separated = true;
    out.beta = increasing ? log_cap : -log_cap;
    out.odds_ratio = std::exp(out.beta);
    out.ci_low = out.ci_high = out.odds_ratio;
    out.p_value = 0.0;
    return out;
  };
  if (max0 <= min1) return clamp_separated(true);
  if (max1 <= min0) return clamp_separated(false);

  Eigen::Vector2d beta = Eigen::Vector2d::Zero();
  Eigen::Matrix2d information = Eigen::Matrix2d::Identity();
  for (out.iterations = 1; out.iterations <= 100; ++out.iterations) {
    Eigen::Vector2d gradient = Eigen::Vector2d::Zero();
    information.setZero();
    for (Eigen::Index i = 0; i < n; ++i) {
      const double eta = beta[0] + beta[1] * z.values[i];
      const double p = 1.0 / (1.0 + std::exp(-eta));
      const double w = p * (1.0 - p);
      const Eigen::Vector2d row(1.0, z.values[i]);
      gradient += (y[i] - p) * row;
      information += w * row * row.transpose();
    }
    const Eigen::Vector2d step = information.ldlt().solve(gradient);
    if (!step.allFinite()) break;
    beta += step;
    if (step.cwiseAbs().maxCoeff() < 1e-8) break;
  }
  if (!beta.allFinite() || std::abs(beta[1]) > log_cap) return clamp_separated(!(beta[1] < 0.0));
  out.intercept = beta[0];
  out.beta = beta[1];
  const Eigen::Matrix2d covariance = information.inverse();
  out.std_error = std::sqrt(std::max(covariance(1, 1), 0.0));
  out.odds_ratio = std::exp(out.beta);
  out.ci_low = std::exp(out.beta - 1.959963984540054 * out.std_error);
  out.ci_high = std::exp(out.beta + 1.959963984540054 * out.std_error);
  out.p_value = out.std_error > 0.0 ? std::erfc(std::abs(out.beta / out.std_error) / std::sqrt(2.0)) : 0.0;
  return out;
}

Vector midranks(const Eigen::Ref<const Vector>& values) {
  const Eigen::Index n = values.size();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  Vector ranks(n);
  for (Eigen::Index i = 0; i < n;) {
    Eigen::Index j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (Eigen::Index t = i; t <= j; ++t) ranks[order[t]] = rank;
    i = j + 1;
  }
  return ranks;
}

double auroc(const Eigen::Ref<const Vector>& scores, const std::vector<int>& flags) {
  check_flags(scores.size(), flags);
  require_both_classes(flags);
  const Vector ranks = midranks(scores);
  const double pos = positives(flags);
  const double neg = static_cast<double>(flags.size()) - pos;
  double sum = 0.0;
  for (std::size_t i = 0; i < flags.size(); ++i)
    if (flags[i]) sum += ranks[static_cast<Eigen::Index>(i)];
  return (sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

AuprcResult auprc(const Eigen::Ref<const Vector>& scores, const std::vector<int>& flags) {
  check_flags(scores.size(), flags);
  const int pos = positives(flags);
  require(pos > 0, "no positive flags", ErrorCode::single_class);
  const Eigen::Index n = scores.size();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return scores[a] > scores[b]; });
  AuprcResult out;
  double tp = 0.0, fp = 0.0, previous_recall = 0.0;
  for (Eigen::Index i = 0; i < n;) {
    Eigen::Index j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      (flags[order[j]] ? tp : fp) += 1.0;
      ++j;
    }
    const double recall = tp / pos;
    out.area += (recall - previous_recall) * tp / (tp + fp);
    previous_recall = recall;
    i = j;
  }
  out.prevalence = static_cast<double>(pos) / static_cast<double>(n);
  out.improvement = out.area - out.prevalence;
  return out;
}

SpearmanResult spearman_matrix(const Matrix& columns) {
  require(columns.rows() >= 3, "Spearman correlation needs at least three rows");
  const Eigen::Index p = columns.cols();
  SpearmanResult out;
  out.rho = Matrix::Identity(p, p);
  out.constant.assign(p, false);
  Matrix centred(columns.rows(), p);
  Vector norms(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const Vector r = midranks(columns.col(j));
    centred.col(j) = r.array() - r.mean();
    norms[j] = centred.col(j).norm();
    out.constant[j] = !(norms[j] > 1e-12);
  }
  for (Eigen::Index a = 0; a < p; ++a) {
    for (Eigen::Index b = a + 1; b < p; ++b) {
      double rho = 0.0;
      if (!out.constant[a] && !out.constant[b])
        rho = std::clamp(centred.col(a).dot(centred.col(b)) / (norms[a] * norms[b]), -1.0, 1.0);
      out.rho(a, b) = out.rho(b, a) = rho;
    }
  }
  return out;
}

double percentile(const Eigen::Ref<const Vector>& values, double pct) {
  require(values.size() > 0, "percentile of an empty vector");
  require(pct >= 0.0 && pct <= 100.0, "percentile outside [0, 100]");
  std::vector<double> sorted(values.data(), values.data() + values.size());
  std::sort(sorted.begin(), sorted.end());
  const double position = pct / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lower = static_cast<std::size_t>(std::floor(position));
  const std::size_t upper = std::min(lower + 1, sorted.size() - 1);
  return sorted[lower] + (position - static_cast<double>(lower)) * (sorted[upper] - sorted[lower]);
}

AbstentionCurve abstention_curve(const Eigen::Ref<const Vector>& uncertainty, const std::vector<int>& flags) {
  check_flags(uncertainty.size(), flags);
  require(uncertainty.size() > 0, "abstention curve of no instances", ErrorCode::empty_dataset);
  AbstentionCurve curve;
  const double n = static_cast<double>(uncertainty.size());
  for (int pct = 5; pct <= 95; pct += 5) {
    const double cutoff = percentile(uncertainty, pct);
    double kept = 0.0, wrong = 0.0;
    for (Eigen::Index i = 0; i < uncertainty.size(); ++i) {
      if (uncertainty[i] <= cutoff) {
        kept += 1.0;
        wrong += flags[i];
      }
    }
    curve.percentiles.push_back(pct);
    curve.cutoffs.push_back(cutoff);
    curve.misclassified_pct.push_back(kept > 0.0 ? 100.0 * wrong / kept : 0.0);
    curve.retained_pct.push_back(100.0 * kept / n);
  }
  return curve;
}

std::string abstention_csv(const AbstentionCurve& curve) {
  std::ostringstream out;
  out << std::setprecision(17) << "threshold,misclassified_pct,retained_pct\n";
  for (std::size_t i = 0; i < curve.percentiles.size(); ++i)
    out << curve.percentiles[i] << ',' << curve.misclassified_pct[i] << ',' << curve.retained_pct[i] << '\n';
  return out.str();
}

double class_likelihood(const ClassConditionalDensities& densities, const Eigen::Ref<const RowVector>& x, int c,
                        bool* floored) {
  require(c >= 0 && c < densities.num_classes(), "class outside the class universe");
  require(x.size() == densities.num_features(), "instance has the wrong number of features");
  return densities.log_likelihood(x, c, floored);
}

double class_likelihood(const LabelledDataset& train, const Eigen::Ref<const RowVector>& x, int c, bool* floored) {
  return class_likelihood(ClassConditionalDensities(train), x, c, floored);
}

double disjunct_class_percentage(const Eigen::Ref<const Vector>& counts, int label) {
  const double total = counts.sum();
  return total > 0.0 ? counts[label] / total : 0.0;
}

double class_likelihood_difference(const ClassConditionalDensities& densities, const Eigen::Ref<const RowVector>& x,
                                   int label) {
  const double own = class_likelihood(densities, x, label);
  double best_other = -INFINITY;
  for (int c = 0; c < densities.num_classes(); ++c)
    if (c != label) best_other = std::max(best_other, class_likelihood(densities, x, c));
  return own - best_other;
}

bool ism_condition(const IsmVerdict& v) {
  return v.cld < 0.0 && ((v.ds == 0.0 && v.dcp < 0.5) || v.kdn > 0.8);
}

std::vector<IsmVerdict> ism_flags(const LabelledDataset& data, int k) {
  data.validate();
  require(k >= 1 && k < data.size(), "k must lie in [1, M)");
  const FeatureSpace space = FeatureSpace::fit(data);
  const Matrix z = space.transform(data.features);
  const int m = data.size();
  const auto tree = DecisionTree::grow(z, data.labels, data.num_classes(), TreeOptions{}, Seed{});
  const double largest = tree.max_leaf_size();
  std::vector<IsmVerdict> out(m);
  for (int i = 0; i < m; ++i) {
    const int label = data.labels[i];
    IsmVerdict& v = out[i];
    // The disjunct that covers x, without x itself.
    Vector counts = tree.node(tree.leaf_of(z.row(i).transpose())).counts;
    counts[label] -= 1.0;
    v.ds = largest > 1.0 ? counts.sum() / (largest - 1.0) : 0.0;
    v.dcp = disjunct_class_percentage(counts, label);

    const Indices nn = nearest_neighbours(z, z.row(i).transpose(), k, i);
    v.kdn = static_cast<double>(std::count_if(nn.begin(), nn.end(), [&](int j) { return data.labels[j] != label; })) /
            static_cast<double>(nn.size());

    Indices rest;
    rest.reserve(m - 1);
    for (int j = 0; j < m; ++j)
      if (j != i) rest.push_back(j);
    const ClassConditionalDensities densities(data.subset(rest));
    v.cld = class_likelihood_difference(densities, data.features.row(i), label);
    v.is_ism = ism_condition(v);
  }
  return out;
}

MethodSummary summarise_method(const std::string& name, const Eigen::Ref<const Vector>& scores,
                               const std::vector<int>& flags) {
  MethodSummary s;
  s.name = name;
  s.odds = univariate_or(scores, flags);
  s.auroc = auroc(scores, flags);
  s.auprc = auprc(scores, flags);
  return s;
}

double utility_product(const MethodSummary& summary) {
  return std::min(summary.odds.odds_ratio, kOddsRatioCap) * summary.auroc * summary.auprc.area;
}

EvaluationReport evaluate(const Eigen::Ref<const Vector>& uncertainty, const Eigen::Ref<const Vector>& certainty,
                          const std::vector<int>& flags, const Matrix& meta) {
  require(uncertainty.size() == certainty.size(), "uncertainty and baseline differ in length");
  EvaluationReport report;
  report.instances = static_cast<int>(flags.size());
  report.misclassification_rate = static_cast<double>(positives(flags)) / std::max<std::size_t>(flags.size(), 1);
  report.methods.push_back(summarise_method("estimator", uncertainty, flags));
  report.methods.push_back(summarise_method("probability_baseline", -certainty, flags));
  if (meta.size() > 0) {
    require(meta.rows() == uncertainty.size(), "meta matrix and uncertainty differ in length");
    for (Eigen::Index j = 0; j < meta.cols(); ++j) {
      const std::string name = meta.cols() == kMetaCount ? std::string(kMetaNames[j]) : "column" + std::to_string(j);
      report.meta_features.push_back(summarise_method(name, meta.col(j), flags));
    }
    report.spearman = spearman_matrix(meta);
  }
  return report;
}

namespace {

nlohmann::ordered_json method_json(const MethodSummary& s) {
  nlohmann::ordered_json j;
  j["name"] = s.name;
  j["odds_ratio"] = s.odds.odds_ratio;
  j["ci_low"] = s.odds.ci_low;
  j["ci_high"] = s.odds.ci_high;
  j["p_value"] = s.odds.p_value;
  j["separated"] = s.odds.separated;
  j["auroc"] = s.auroc;
  j["auprc"] = s.auprc.area;
  j["prevalence"] = s.auprc.prevalence;
  j["auprc_improvement"] = s.auprc.improvement;
  return j;
}

}  // namespace

std::string report_json(const EvaluationReport& report) {
  nlohmann::ordered_json j;
  j["instances"] = report.instances;
  j["misclassification_rate"] = report.misclassification_rate;
  j["methods"] = nlohmann::ordered_json::array();
  for (const auto& m : report.methods) j["methods"].push_back(method_json(m));
  j["meta_features"] = nlohmann::ordered_json::array();
  for (const auto& m : report.meta_features) j["meta_features"].push_back(method_json(m));
  if (report.spearman.rho.size() > 0) {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (Eigen::Index a = 0; a < report.spearman.rho.rows(); ++a) {
      std::vector<double> row(report.spearman.rho.cols());
      for (Eigen::Index b = 0; b < report.spearman.rho.cols(); ++b) row[b] = report.spearman.rho(a, b);
      rows.push_back(row);
    }
    j["spearman"] = rows;
    j["spearman_constant"] = report.spearman.constant;
  }
  return j.dump(2) + "\n";
}

std::string report_table(const EvaluationReport& report) {
  std::ostringstream out;
  out << "instances " << report.instances << ", misclassified " << std::fixed << std::setprecision(4)
      << report.misclassification_rate << "\n\n";
  auto block = [&](const std::vector<MethodSummary>& rows) {
    out << std::left << std::setw(22) << "method" << std::right << std::setw(10) << "OR" << std::setw(20)
        << "95% CI" << std::setw(11) << "p" << std::setw(9) << "AUROC" << std::setw(9) << "AUPRC" << std::setw(9)
        << "gain" << '\n';
    for (const auto& s : rows) {
      std::ostringstream ci;
      ci << std::fixed << std::setprecision(3) << '[' << s.odds.ci_low << ", " << s.odds.ci_high << ']';
      out << std::left << std::setw(22) << s.name << std::right << std::fixed << std::setprecision(3) << std::setw(10)
          << s.odds.odds_ratio << std::setw(20) << ci.str() << std::setw(11) << std::scientific
          << std::setprecision(2) << s.odds.p_value << std::fixed << std::setprecision(3) << std::setw(9) << s.auroc
          << std::setw(9) << s.auprc.area << std::setw(9) << s.auprc.improvement << '\n';
    }
  };
  block(report.methods);
  if (!report.meta_features.empty()) {
    out << '\n';
    block(report.meta_features);
  }
  return out.str();
}

}  // namespace hardness
