#include "hardness/knowledgebase.hpp"

#include "hardness/parallel.hpp"
#include "hardness/random.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

namespace hardness {

const char* to_string(Provenance provenance) {
  return provenance == Provenance::real ? "real" : "synthetic";
}

Provenance provenance_from_string(const std::string& text) {
  if (text == "real") return Provenance::real;
  if (text == "synthetic") return Provenance::synthetic;
  fail(ErrorCode::invalid_argument, "unknown provenance '" + text + "'");
}

const char* to_string(Realness realness) {
  switch (realness) {
    case Realness::real: return "real";
    case Realness::synthetic: return "synthetic";
    case Realness::both: return "both";
  }
  return "both";
}

Realness realness_from_string(const std::string& text) {
  if (text == "real") return Realness::real;
  if (text == "synthetic") return Realness::synthetic;
  if (text == "both") return Realness::both;
  fail(ErrorCode::invalid_argument, "unknown realness '" + text + "'");
}

void KnowledgeBase::summarise() {
  means.setZero();
  stdevs.setZero();
  if (records.empty()) return;
  const MetaMatrix m = meta_matrix();
  means = m.colwise().mean().transpose();
  stdevs = ((m.rowwise() - means.transpose()).array().square().colwise().mean()).sqrt().transpose();
}

MetaMatrix KnowledgeBase::meta_matrix() const {
  MetaMatrix out(size(), kMetaCount);
  for (int i = 0; i < size(); ++i) out.row(i) = records[i].meta.transpose();
  return out;
}

Vector KnowledgeBase::flags() const {
  Vector out(size());
  for (int i = 0; i < size(); ++i) out[i] = records[i].misclassified;
  return out;
}

double KnowledgeBase::misclassification_rate() const {
  require(!records.empty(), "misclassification rate of an empty knowledge base");
  return flags().mean();
}

void KnowledgeBase::sort() {
  std::stable_sort(records.begin(), records.end(), [](const KBRecord& a, const KBRecord& b) {
    if (a.dataset_id != b.dataset_id) return a.dataset_id < b.dataset_id;
    if (a.model_kind != b.model_kind) return a.model_kind < b.model_kind;
    return a.instance < b.instance;
  });
}

std::vector<int> label_misclassifications(const Labels& predicted, const Labels& truth) {
  require(predicted.size() == truth.size(), "predictions and truth differ in length");
  std::vector<int> out(predicted.size());
  for (std::size_t i = 0; i < predicted.size(); ++i) out[i] = predicted[i] != truth[i] ? 1 : 0;
  return out;
}

CrossValidatedRecords cross_validated_records(const LabelledDataset& data, const ClassifierSpec& spec,
                                              const RecordOptions& options, Seed seed) {
  data.validate();
  const FoldPlan plan = make_stratified_folds(data, options.folds, seed.derive(1));
  const int m = data.size();
  CrossValidatedRecords out;
  out.meta.resize(m, kMetaCount);
  out.misclassified.assign(m, 0);
  out.predicted.assign(m, -1);
  out.probability_baseline.resize(m);
  out.fold = plan.assignment;
  out.flags.assign(m, 0);

  parallel_for(options.folds, [&](int f) {
    const Indices train_rows = plan.complement({f});
    const Indices test_rows = plan.members(f);
    const LabelledDataset train = data.subset(train_rows);
    MetaConfig config = options.meta;
    config.seed = seed.derive(10 + static_cast<std::uint64_t>(f));
    const ReferenceContext context(train, config);
    const auto model = train_tuned(spec, train, options.tuning_folds, options.tuning_budget,
                                   seed.derive(20 + static_cast<std::uint64_t>(f)));
    Matrix x(static_cast<Eigen::Index>(test_rows.size()), data.num_features());
    for (std::size_t i = 0; i < test_rows.size(); ++i)
      x.row(static_cast<Eigen::Index>(i)) = data.features.row(test_rows[i]);
    const Matrix proba = model.predict_proba(x);
    const Labels predicted = model.predict(x);
    for (std::size_t i = 0; i < test_rows.size(); ++i) {
      const int row = test_rows[i];
      const auto result = compute_all(context, data.features.row(row), predicted[i]);
      out.meta.row(row) = result.values.transpose();
      out.flags[row] = result.flags;
      out.predicted[row] = predicted[i];
      out.misclassified[row] = predicted[i] != data.labels[row] ? 1 : 0;
      out.probability_baseline[row] = probability_uncertainty(proba.row(static_cast<Eigen::Index>(i)).transpose());
    }
  });
  return out;
}

Seed dataset_seed(Seed seed, const std::string& dataset_id) {
  std::uint64_t h = 1469598103934665603ULL;  // FNV-1a
  for (unsigned char c : dataset_id) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return seed.derive(h);
}

KbBuildResult build_kb(const std::vector<KbSource>& sources, const ClassifierSpec& spec,
                       const RecordOptions& options, Seed seed) {
  KbBuildResult result;
  for (const auto& source : sources) {
    const auto& data = source.data;
    try {
      const Seed s = dataset_seed(seed, data.id);
      const auto records = cross_validated_records(data, spec, options, s);
      for (int i = 0; i < data.size(); ++i) {
        KBRecord r;
        r.meta = records.meta.row(i).transpose();
        r.misclassified = records.misclassified[i];
        r.provenance = source.provenance;
        r.dataset_id = data.id;
        r.model_kind = to_string(spec.kind);
        r.instance = i;
        r.fold = records.fold[i];
        result.kb.records.push_back(std::move(r));
      }
      for (int f = 0; f < options.folds; ++f) {
        FoldAudit audit;
        audit.dataset_id = data.id;
        audit.fold = f;
        for (int i = 0; i < data.size(); ++i)
          (records.fold[i] == f ? audit.validation_rows : audit.reference_rows).push_back(i);
        result.audit.push_back(std::move(audit));
      }
    } catch (const Error& e) {
      result.failures.push_back({data.id, e.code(), e.what()});
    }
  }
  result.kb.sort();
  result.kb.summarise();
  return result;
}

bool leakage_free(const KbBuildResult& result) {
  for (const auto& audit : result.audit) {
    std::vector<int> reference = audit.reference_rows;
    std::sort(reference.begin(), reference.end());
    for (int row : audit.validation_rows)
      if (std::binary_search(reference.begin(), reference.end(), row)) return false;
  }
  for (const auto& record : result.kb.records) {
    const auto it = std::find_if(result.audit.begin(), result.audit.end(), [&](const FoldAudit& a) {
      return a.dataset_id == record.dataset_id && a.fold == record.fold;
    });
    if (it == result.audit.end()) return false;
    if (std::find(it->validation_rows.begin(), it->validation_rows.end(), record.instance) ==
        it->validation_rows.end())
      return false;
  }
  return true;
}

void SamplingPolicy::validate() const {
  require(m >= 1, "sampling size m must be at least 1");
  require(q > 0.0 && q <= 100.0, "sampling percentage q must lie in (0, 100]");
}

KnowledgeBase sample_kb(const KnowledgeBase& kb, const MetaFeatureVector& anchor, const SamplingPolicy& policy,
                        Seed seed) {
  policy.validate();
  KnowledgeBase filtered;
  for (const auto& r : kb.records) {
    if (policy.realness == Realness::both ||
        (policy.realness == Realness::real) == (r.provenance == Provenance::real))
      filtered.records.push_back(r);
  }
  require(!filtered.empty(), "no knowledge-base records match the realness filter", ErrorCode::empty_dataset);
  filtered.summarise();
  const int n = filtered.size();
  MetaFeatureVector scale = filtered.stdevs;
  for (int j = 0; j < kMetaCount; ++j) scale[j] = scale[j] > 1e-12 ? 1.0 / scale[j] : 0.0;
  std::vector<std::pair<double, int>> distance(n);
  for (int i = 0; i < n; ++i)
    distance[i] = {((filtered.records[i].meta - anchor).cwiseProduct(scale)).squaredNorm(), i};
  std::stable_sort(distance.begin(), distance.end());
  const int pool = std::max(1, static_cast<int>(std::ceil(policy.q / 100.0 * n - 1e-9)));
  const int take = std::min(policy.m, pool);
  Rng rng(seed);
  Indices chosen = rng.sample_without_replacement(pool, take);
  Indices rows;
  for (int c : chosen) rows.push_back(distance[c].second);
  std::sort(rows.begin(), rows.end());
  KnowledgeBase out;
  for (int r : rows) out.records.push_back(filtered.records[r]);
  out.summarise();
  return out;
}

KnowledgeBase truncate_kb(const KnowledgeBase& kb, int count, Seed seed) {
  if (count >= kb.size()) return kb;
  Rng rng(seed);
  KnowledgeBase out;
  for (int i : rng.sample_without_replacement(kb.size(), std::max(count, 0))) out.records.push_back(kb.records[i]);
  out.summarise();
  return out;
}

std::string kb_to_jsonl(const KnowledgeBase& kb) {
  std::ostringstream out;
  nlohmann::ordered_json header;
  header["format"] = "hardness-kb";
  header["version"] = kKbFormatVersion;
  header["columns"] = std::vector<std::string>(kMetaNames.begin(), kMetaNames.end());
  header["records"] = kb.size();
  header["mean"] = std::vector<double>(kb.means.data(), kb.means.data() + kMetaCount);
  header["stdev"] = std::vector<double>(kb.stdevs.data(), kb.stdevs.data() + kMetaCount);
  out << header.dump() << '\n';
  for (const auto& r : kb.records) {
    nlohmann::ordered_json line;
    line["dataset_id"] = r.dataset_id;
    line["instance"] = r.instance;
    line["fold"] = r.fold;
    line["model_kind"] = r.model_kind;
    line["provenance"] = to_string(r.provenance);
    line["misclassified"] = r.misclassified;
    line["meta"] = std::vector<double>(r.meta.data(), r.meta.data() + kMetaCount);
    out << line.dump() << '\n';
  }
  return out.str();
}

KnowledgeBase kb_from_jsonl(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), "knowledge base file is empty", ErrorCode::empty_dataset);
  KnowledgeBase kb;
  try {
    const auto header = nlohmann::json::parse(line);
    if (header.value("format", "") != "hardness-kb")
      fail(ErrorCode::schema_mismatch, "not a knowledge-base file");
    if (header.value("version", -1) != kKbFormatVersion)
      fail(ErrorCode::version_mismatch, "knowledge-base format version " +
                                            std::to_string(header.value("version", -1)) + " is not supported");
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const auto doc = nlohmann::json::parse(line);
      KBRecord r;
      r.dataset_id = doc.at("dataset_id").get<std::string>();
      r.instance = doc.at("instance").get<int>();
      r.fold = doc.at("fold").get<int>();
      r.model_kind = doc.at("model_kind").get<std::string>();
      r.provenance = provenance_from_string(doc.at("provenance").get<std::string>());
      r.misclassified = doc.at("misclassified").get<int>();
      const auto meta = doc.at("meta").get<std::vector<double>>();
      require(static_cast<int>(meta.size()) == kMetaCount, "record has the wrong number of meta-features",
              ErrorCode::schema_mismatch);
      for (int j = 0; j < kMetaCount; ++j) r.meta[j] = meta[j];
      kb.records.push_back(std::move(r));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::unparseable_cell, std::string("malformed knowledge-base line: ") + e.what());
  }
  kb.summarise();
  return kb;
}

}  // namespace hardness
