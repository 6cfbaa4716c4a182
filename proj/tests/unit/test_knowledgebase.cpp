#include "doctest.h"
#include "support.hpp"

#include "hardness/knowledgebase.hpp"

#include <set>

using namespace hardness;
using testing_support::blobs;

namespace {

RecordOptions fast_options() {
  RecordOptions options;
  options.tuning_budget = 3;
  return options;
}

KBRecord record(const std::string& id, int instance, double value, Provenance provenance) {
  KBRecord r;
  r.dataset_id = id;
  r.instance = instance;
  r.meta = MetaFeatureVector::Constant(value);
  r.provenance = provenance;
  r.misclassified = instance % 2;
  r.model_kind = "knn_classifier";
  return r;
}

KnowledgeBase ladder(int n) {
  KnowledgeBase kb;
  for (int i = 0; i < n; ++i)
    kb.records.push_back(record("d", i, i, i % 2 == 0 ? Provenance::real : Provenance::synthetic));
  kb.summarise();
  return kb;
}

}  // namespace

TEST_CASE("label misclassifications") {
  CHECK(label_misclassifications({0, 1}, {0, 0}) == std::vector<int>{0, 1});
  CHECK_THROWS_AS(label_misclassifications({0, 1, 1}, {0, 0}), Error);
}

TEST_CASE("cross-validated records cover every instance once") {
  const auto data = blobs(50, 2, 2.0, 1.0, 5);
  const auto spec = ClassifierSpec::defaults(ClassifierKind::knn_classifier);
  const auto out = cross_validated_records(data, spec, fast_options(), Seed{1});
  REQUIRE(out.meta.rows() == 100);
  for (int i = 0; i < 100; ++i) {
    CHECK(out.fold[i] >= 0);
    CHECK(out.fold[i] < 5);
    CHECK(out.misclassified[i] == (out.predicted[i] != data.labels[i] ? 1 : 0));
    CHECK(out.meta.row(i).allFinite());
    CHECK(out.probability_baseline[i] >= 0.0);
    CHECK(out.probability_baseline[i] <= 0.5);
  }
}

TEST_CASE("build_kb is leakage free, sorted and deterministic") {
  const auto spec = ClassifierSpec::defaults(ClassifierKind::gaussian_nb);
  auto a = blobs(30, 2, 2.0, 1.0, 1);
  a.id = "alpha";
  auto b = blobs(20, 2, 3.0, 1.0, 2);
  b.id = "beta";
  LabelledDataset broken = blobs(1, 2, 1.0, 1.0, 3);
  broken.id = "broken";
  const std::vector<KbSource> sources{{b, Provenance::synthetic}, {broken, Provenance::real}, {a, Provenance::real}};
  const auto result = build_kb(sources, spec, fast_options(), Seed{9});
  CHECK(result.kb.size() == 100);
  REQUIRE(result.failures.size() == 1);
  CHECK(result.failures[0].dataset_id == "broken");
  CHECK(leakage_free(result));
  CHECK(result.kb.records.front().dataset_id == "alpha");
  CHECK(result.kb.records.back().dataset_id == "beta");
  CHECK(result.kb.records.back().provenance == Provenance::synthetic);
  CHECK(result.kb.records[0].model_kind == "gaussian_nb");

  auto tampered = result;
  tampered.audit[0].reference_rows.push_back(tampered.audit[0].validation_rows[0]);
  CHECK_FALSE(leakage_free(tampered));

  // Order of the source list does not matter.
  const std::vector<KbSource> reordered{{a, Provenance::real}, {b, Provenance::synthetic}};
  const auto again = build_kb(reordered, spec, fast_options(), Seed{9});
  CHECK(kb_to_jsonl(again.kb) == kb_to_jsonl(result.kb));
}

TEST_CASE("sampling sizes and locality") {
  const auto kb = ladder(40);
  const MetaFeatureVector anchor = MetaFeatureVector::Constant(0.0);
  for (int m : {1, 5, 20, 100}) {
    for (double q : {10.0, 25.0, 50.0, 100.0}) {
      const auto out = sample_kb(kb, anchor, {m, q, Realness::both}, Seed{3});
      const int pool = static_cast<int>(std::ceil(q / 100.0 * 40));
      CHECK(out.size() == std::min(m, pool));
      for (const auto& r : out.records) CHECK(r.instance < pool);
    }
  }
  const auto real = sample_kb(kb, anchor, {100, 100.0, Realness::real}, Seed{3});
  CHECK(real.size() == 20);
  for (const auto& r : real.records) CHECK(r.provenance == Provenance::real);
  const auto near = sample_kb(kb, anchor, {100, 25.0, Realness::synthetic}, Seed{3});
  CHECK(near.size() == 5);
  for (const auto& r : near.records) CHECK(r.instance < 10);

  KnowledgeBase only_real;
  only_real.records.push_back(record("d", 0, 1.0, Provenance::real));
  CHECK_THROWS_AS(sample_kb(only_real, anchor, {10, 100.0, Realness::synthetic}, Seed{1}), Error);
  CHECK_THROWS_AS(sample_kb(kb, anchor, {0, 100.0, Realness::both}, Seed{1}), Error);
  CHECK_THROWS_AS(sample_kb(kb, anchor, {5, 0.0, Realness::both}, Seed{1}), Error);
  CHECK(kb_to_jsonl(sample_kb(kb, anchor, {7, 50.0, Realness::both}, Seed{4})) ==
        kb_to_jsonl(sample_kb(kb, anchor, {7, 50.0, Realness::both}, Seed{4})));
}

TEST_CASE("truncate keeps a subset") {
  const auto kb = ladder(30);
  const auto out = truncate_kb(kb, 10, Seed{2});
  CHECK(out.size() == 10);
  std::set<int> seen;
  for (const auto& r : out.records) seen.insert(r.instance);
  CHECK(seen.size() == 10);
  CHECK(truncate_kb(kb, 50, Seed{2}).size() == 30);
}

TEST_CASE("jsonl round trip and version check") {
  auto kb = ladder(6);
  kb.records[2].meta[meta::ec] = -0.125;
  kb.summarise();
  const std::string text = kb_to_jsonl(kb);
  const auto back = kb_from_jsonl(text);
  REQUIRE(back.size() == kb.size());
  for (int i = 0; i < kb.size(); ++i) {
    CHECK(back.records[i].meta == kb.records[i].meta);
    CHECK(back.records[i].dataset_id == kb.records[i].dataset_id);
    CHECK(back.records[i].provenance == kb.records[i].provenance);
    CHECK(back.records[i].misclassified == kb.records[i].misclassified);
  }
  CHECK(kb_to_jsonl(back) == text);

  std::string future = text;
  future.replace(future.find("\"version\":1"), 11, "\"version\":9");
  try {
    kb_from_jsonl(future);
    FAIL("expected a version mismatch");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::version_mismatch);
  }
  CHECK_THROWS_AS(kb_from_jsonl("{\"format\":\"hardness-kb\",\"version\":1}\n{bad"), Error);
}
