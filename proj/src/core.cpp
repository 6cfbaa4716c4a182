#include "hardness/core.hpp"

#include "hardness/random.hpp"
#include "json.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace hardness {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        field.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  fields.push_back(std::move(field));
  for (auto& f : fields) {
    const auto first = f.find_first_not_of(" \t");
    const auto last = f.find_last_not_of(" \t");
    f = first == std::string::npos ? std::string() : f.substr(first, last - first + 1);
  }
  return fields;
}

bool is_missing(const std::string& cell) {
  if (cell.empty() || cell == "?") return true;
  std::string lower(cell);
  std::transform(lower.begin(), lower.end(), lower.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return lower == "na" || lower == "nan" || lower == "null";
}

std::optional<double> parse_real(const std::string& cell) {
  double value = 0.0;
  const char* begin = cell.data();
  const char* end = begin + cell.size();
  if (!cell.empty() && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

// Sorted distinct values; numeric order when every value parses as a number.
std::vector<std::string> ordered_levels(const std::set<std::string>& distinct) {
  std::vector<std::string> levels(distinct.begin(), distinct.end());
  const bool numeric = std::all_of(levels.begin(), levels.end(),
                                   [](const auto& s) { return parse_real(s).has_value(); });
  if (numeric) {
    std::stable_sort(levels.begin(), levels.end(), [](const auto& a, const auto& b) {
      return *parse_real(a) < *parse_real(b);
    });
  }
  return levels;
}

std::string format_real(double v) {
  char buffer[32];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof buffer, v);
  return std::string(buffer, ptr);
}

}  // namespace

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid argument";
    case ErrorCode::schema_mismatch: return "schema mismatch";
    case ErrorCode::unparseable_cell: return "unparseable cell";
    case ErrorCode::empty_dataset: return "empty dataset";
    case ErrorCode::single_class: return "single-class dataset";
    case ErrorCode::missing_value: return "missing value";
    case ErrorCode::class_too_small: return "class too small";
    case ErrorCode::degenerate: return "degenerate input";
    case ErrorCode::io: return "i/o error";
    case ErrorCode::missing_artifact: return "missing artifact";
    case ErrorCode::version_mismatch: return "version mismatch";
  }
  return "error";
}

Seed Seed::derive(std::uint64_t stream) const {
  return Seed{splitmix64(value ^ splitmix64(stream + 0x632be59bd9b4e019ULL))};
}

const char* to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::continuous: return "continuous";
    case FeatureKind::ordinal: return "ordinal";
    case FeatureKind::nominal: return "nominal";
  }
  return "continuous";
}

FeatureKind feature_kind_from_string(const std::string& text) {
  if (text == "continuous") return FeatureKind::continuous;
  if (text == "ordinal") return FeatureKind::ordinal;
  if (text == "nominal") return FeatureKind::nominal;
  fail(ErrorCode::schema_mismatch, "unknown feature kind '" + text + "'");
}

// ---------------------------------------------------------------------------
// Schema

void DatasetSchema::validate() const {
  require(!class_column.empty(), "schema has no class column", ErrorCode::schema_mismatch);
  std::set<std::string> names;
  for (const auto& f : features) {
    require(!f.name.empty(), "schema feature with empty name", ErrorCode::schema_mismatch);
    require(names.insert(f.name).second, "duplicate feature name '" + f.name + "'",
            ErrorCode::schema_mismatch);
  }
  require(!names.contains(class_column),
          "class column '" + class_column + "' is also listed as a feature",
          ErrorCode::schema_mismatch);
}

DatasetSchema DatasetSchema::from_json_text(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::schema_mismatch, std::string("schema is not valid JSON: ") + e.what());
  }
  DatasetSchema schema;
  try {
    schema.class_column = doc.at("class_column").get<std::string>();
    for (const auto& f : doc.at("features")) {
      FeatureSpec spec;
      spec.name = f.at("name").get<std::string>();
      spec.kind = feature_kind_from_string(f.value("kind", std::string("continuous")));
      if (f.contains("levels")) spec.levels = f.at("levels").get<std::vector<std::string>>();
      schema.features.push_back(std::move(spec));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::schema_mismatch, std::string("malformed schema: ") + e.what());
  }
  schema.validate();
  return schema;
}

DatasetSchema DatasetSchema::from_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::missing_artifact, "cannot open schema " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return from_json_text(buffer.str());
}

std::string DatasetSchema::to_json_text() const {
  nlohmann::json doc;
  doc["class_column"] = class_column;
  doc["features"] = nlohmann::json::array();
  for (const auto& f : features) {
    nlohmann::json item{{"name", f.name}, {"kind", to_string(f.kind)}};
    if (!f.levels.empty()) item["levels"] = f.levels;
    doc["features"].push_back(std::move(item));
  }
  return doc.dump(2) + "\n";
}

DatasetSchema DatasetSchema::continuous(int num_features) {
  DatasetSchema schema;
  schema.class_column = "class";
  for (int n = 0; n < num_features; ++n) {
    schema.features.push_back({"f" + std::to_string(n), FeatureKind::continuous, {}});
  }
  return schema;
}

// ---------------------------------------------------------------------------
// Dataset

LabelledDataset LabelledDataset::subset(std::span<const int> rows) const {
  LabelledDataset out;
  out.schema = schema;
  out.classes = classes;
  out.levels = levels;
  out.id = id;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  out.labels.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.features.row(static_cast<Eigen::Index>(i)) = features.row(rows[i]);
    out.labels[i] = labels[rows[i]];
  }
  return out;
}

Eigen::VectorXi LabelledDataset::class_counts() const {
  Eigen::VectorXi counts = Eigen::VectorXi::Zero(num_classes());
  for (int y : labels) ++counts[y];
  return counts;
}

LabelledDataset LabelledDataset::from_matrix(Matrix features, Labels labels,
                                             int num_classes, std::string id) {
  require(features.rows() == static_cast<Eigen::Index>(labels.size()),
          "feature rows and labels differ in length");
  LabelledDataset data;
  data.schema = DatasetSchema::continuous(static_cast<int>(features.cols()));
  data.features = std::move(features);
  data.labels = std::move(labels);
  for (int c = 0; c < num_classes; ++c) data.classes.push_back(std::to_string(c));
  data.levels.assign(static_cast<std::size_t>(data.features.cols()), {});
  data.id = std::move(id);
  for (int y : data.labels) require(y >= 0 && y < num_classes, "label out of range");
  return data;
}

void LabelledDataset::validate() const {
  if (size() == 0) fail(ErrorCode::empty_dataset, "dataset '" + id + "' has no instances");
  const auto counts = class_counts();
  int present = 0;
  for (int c = 0; c < counts.size(); ++c) present += counts[c] > 0 ? 1 : 0;
  if (present < 2) {
    fail(ErrorCode::single_class, "dataset '" + id + "' contains a single class");
  }
  require(size() >= num_classes(), "dataset '" + id + "' has fewer instances than classes");
}

LabelledDataset parse_dataset(const std::string& csv_text, const DatasetSchema& schema,
                              const LoadOptions& options, std::string id) {
  schema.validate();
  std::istringstream in(csv_text);
  std::string line;
  // Header, skipping blank lines and a UTF-8 byte-order mark.
  while (std::getline(in, line) && line.find_first_not_of(" \t\r") == std::string::npos) {
  }
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  if (line.empty()) fail(ErrorCode::empty_dataset, "dataset '" + id + "' is empty");
  const auto header = split_csv_line(line);

  std::map<std::string, int> column;
  for (int i = 0; i < static_cast<int>(header.size()); ++i) {
    if (!column.emplace(header[i], i).second) {
      fail(ErrorCode::schema_mismatch, "duplicate column '" + header[i] + "'");
    }
  }
  std::set<std::string> expected{schema.class_column};
  for (const auto& f : schema.features) expected.insert(f.name);
  for (const auto& name : header) {
    if (!expected.contains(name)) fail(ErrorCode::schema_mismatch, "unknown column '" + name + "'");
  }
  for (const auto& name : expected) {
    if (!column.contains(name)) fail(ErrorCode::schema_mismatch, "missing column '" + name + "'");
  }

  const int n_features = schema.size();
  std::vector<std::vector<std::string>> cells;  // row -> feature cells, class last
  int row_number = 1;
  int dropped = 0;
  while (std::getline(in, line)) {
    ++row_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split_csv_line(line);
    if (fields.size() != header.size()) {
      fail(ErrorCode::unparseable_cell, "row " + std::to_string(row_number) + " has " +
                                            std::to_string(fields.size()) + " fields, expected " +
                                            std::to_string(header.size()));
    }
    std::vector<std::string> row;
    row.reserve(n_features + 1);
    bool missing = false;
    for (const auto& f : schema.features) {
      row.push_back(fields[column[f.name]]);
      missing = missing || is_missing(row.back());
    }
    row.push_back(fields[column[schema.class_column]]);
    if (is_missing(row.back()) || (missing && !options.impute_missing)) {
      ++dropped;
      continue;
    }
    cells.push_back(std::move(row));
  }
  if (cells.empty()) fail(ErrorCode::empty_dataset, "dataset '" + id + "' has no complete rows");

  const int m = static_cast<int>(cells.size());
  LabelledDataset data;
  data.schema = schema;
  data.id = std::move(id);
  data.dropped_rows = dropped;
  data.features.resize(m, n_features);
  data.levels.resize(n_features);

  for (int n = 0; n < n_features; ++n) {
    const auto& spec = schema.features[n];
    std::vector<std::optional<double>> values(m);
    if (spec.kind == FeatureKind::continuous ||
        (spec.kind == FeatureKind::ordinal && spec.levels.empty())) {
      bool numeric = true;
      for (int i = 0; i < m && numeric; ++i) {
        if (!is_missing(cells[i][n]) && !parse_real(cells[i][n])) {
          numeric = false;
          if (spec.kind == FeatureKind::continuous) {
            fail(ErrorCode::unparseable_cell, "cannot parse '" + cells[i][n] + "' in column '" +
                                                  spec.name + "' as a number");
          }
        }
      }
      if (numeric) {
        for (int i = 0; i < m; ++i) {
          if (!is_missing(cells[i][n])) values[i] = *parse_real(cells[i][n]);
        }
      } else {
        std::set<std::string> distinct;
        for (int i = 0; i < m; ++i)
          if (!is_missing(cells[i][n])) distinct.insert(cells[i][n]);
        data.levels[n] = ordered_levels(distinct);
      }
    } else if (!spec.levels.empty()) {
      data.levels[n] = spec.levels;
    } else {
      std::set<std::string> distinct;
      for (int i = 0; i < m; ++i)
        if (!is_missing(cells[i][n])) distinct.insert(cells[i][n]);
      data.levels[n] = ordered_levels(distinct);
    }
    if (!data.levels[n].empty()) {
      std::map<std::string, int> code;
      for (int l = 0; l < static_cast<int>(data.levels[n].size()); ++l) code[data.levels[n][l]] = l;
      for (int i = 0; i < m; ++i) {
        if (is_missing(cells[i][n])) continue;
        const auto it = code.find(cells[i][n]);
        if (it == code.end()) {
          fail(ErrorCode::unparseable_cell,
               "value '" + cells[i][n] + "' is not a declared level of '" + spec.name + "'");
        }
        values[i] = it->second;
      }
    }
    // Imputation: median for ordered columns, mode for nominal ones.
    std::vector<double> present;
    for (const auto& v : values)
      if (v) present.push_back(*v);
    double fill = 0.0;
    if (present.size() < values.size()) {
      if (present.empty()) {
        fail(ErrorCode::missing_value, "column '" + spec.name + "' has no observed values");
      }
      std::sort(present.begin(), present.end());
      if (spec.kind == FeatureKind::nominal) {
        std::map<double, int> freq;
        for (double v : present) ++freq[v];
        fill = std::max_element(freq.begin(), freq.end(), [](const auto& a, const auto& b) {
                 return a.second < b.second;
               })->first;
      } else {
        const std::size_t mid = present.size() / 2;
        fill = present.size() % 2 ? present[mid] : 0.5 * (present[mid - 1] + present[mid]);
      }
    }
    for (int i = 0; i < m; ++i) data.features(i, n) = values[i].value_or(fill);
  }

  std::set<std::string> distinct_labels;
  for (const auto& row : cells) distinct_labels.insert(row.back());
  data.classes = ordered_levels(distinct_labels);
  std::map<std::string, int> class_code;
  for (int c = 0; c < data.num_classes(); ++c) class_code[data.classes[c]] = c;
  data.labels.resize(m);
  for (int i = 0; i < m; ++i) data.labels[i] = class_code[cells[i].back()];

  data.validate();
  return data;
}

LabelledDataset load_dataset(const std::filesystem::path& path, const DatasetSchema& schema,
                             const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::missing_artifact, "cannot open dataset " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_dataset(buffer.str(), schema, options, path.stem().string());
}

std::string to_csv(const LabelledDataset& data) {
  std::ostringstream out;
  for (const auto& f : data.schema.features) out << f.name << ',';
  out << data.schema.class_column << '\n';
  for (int i = 0; i < data.size(); ++i) {
    for (int n = 0; n < data.num_features(); ++n) {
      const double v = data.features(i, n);
      if (!data.levels[n].empty()) {
        out << data.levels[n][static_cast<std::size_t>(v)];
      } else {
        out << format_real(v);
      }
      out << ',';
    }
    out << data.classes[data.labels[i]] << '\n';
  }
  return out.str();
}

// ---------------------------------------------------------------------------
// Folds

Indices FoldPlan::members(int fold) const {
  Indices out;
  for (int i = 0; i < static_cast<int>(assignment.size()); ++i)
    if (assignment[i] == fold) out.push_back(i);
  return out;
}

Indices FoldPlan::complement(std::initializer_list<int> excluded) const {
  Indices out;
  for (int i = 0; i < static_cast<int>(assignment.size()); ++i) {
    if (std::find(excluded.begin(), excluded.end(), assignment[i]) == excluded.end()) {
      out.push_back(i);
    }
  }
  return out;
}

FoldPlan make_stratified_folds(const Labels& labels, int num_classes, int k, Seed seed,
                               const std::vector<std::string>& class_names) {
  require(k >= 2, "fold count must be at least 2");
  std::vector<Indices> by_class(num_classes);
  for (int i = 0; i < static_cast<int>(labels.size()); ++i) by_class[labels[i]].push_back(i);
  for (int c = 0; c < num_classes; ++c) {
    const int size = static_cast<int>(by_class[c].size());
    if (size > 0 && size < k) {
      const std::string name =
          c < static_cast<int>(class_names.size()) ? class_names[c] : std::to_string(c);
      fail(ErrorCode::class_too_small, "class '" + name + "' has " + std::to_string(size) +
                                           " members, fewer than " + std::to_string(k) +
                                           " folds");
    }
  }
  FoldPlan plan{k, Indices(labels.size(), -1), seed};
  Rng rng(seed);
  // Members are dealt round-robin; the starting fold carries over between
  // classes so fold totals stay balanced too. Classes are visited in order
  // of first appearance, which keeps the plan independent of class naming.
  std::sort(by_class.begin(), by_class.end(), [](const Indices& a, const Indices& b) {
    if (a.empty() || b.empty()) return !a.empty() && b.empty();
    return a.front() < b.front();
  });
  int next = 0;
  for (auto& members : by_class) {
    rng.shuffle(members);
    for (int idx : members) {
      plan.assignment[idx] = next;
      next = (next + 1) % k;
    }
  }
  return plan;
}

FoldPlan make_stratified_folds(const LabelledDataset& data, int k, Seed seed) {
  return make_stratified_folds(data.labels, data.num_classes(), k, seed, data.classes);
}

// ---------------------------------------------------------------------------
// Feature space

FeatureSpace FeatureSpace::fit(const LabelledDataset& reference) {
  require(reference.size() > 0, "cannot fit a feature space on no data");
  FeatureSpace space;
  const int n = reference.num_features();
  space.kinds_.resize(n);
  space.min_ = Vector::Zero(n);
  space.range_ = Vector::Ones(n);
  space.cardinality_ = Eigen::VectorXi::Zero(n);
  for (int j = 0; j < n; ++j) {
    space.kinds_[j] = reference.kind(j);
    const auto col = reference.features.col(j);
    if (space.kinds_[j] == FeatureKind::nominal) {
      const int declared = static_cast<int>(reference.levels[j].size());
      space.cardinality_[j] = std::max(declared, static_cast<int>(col.maxCoeff()) + 1);
    } else {
      space.min_[j] = col.minCoeff();
      const double range = col.maxCoeff() - col.minCoeff();
      space.range_[j] = range > 0.0 ? range : 1.0;
    }
  }
  space.finish();
  return space;
}

FeatureSpace FeatureSpace::from_parts(std::vector<FeatureKind> kinds, Vector minimum, Vector range,
                                      Eigen::VectorXi cardinality) {
  FeatureSpace space;
  space.kinds_ = std::move(kinds);
  space.min_ = std::move(minimum);
  space.range_ = std::move(range);
  space.cardinality_ = std::move(cardinality);
  space.finish();
  return space;
}

void FeatureSpace::finish() {
  const int n = static_cast<int>(kinds_.size());
  offset_.resize(n);
  dimension_ = 0;
  for (int j = 0; j < n; ++j) {
    offset_[j] = dimension_;
    dimension_ += kinds_[j] == FeatureKind::nominal ? std::max(cardinality_[j], 1) : 1;
  }
}

Matrix FeatureSpace::transform(const Matrix& raw) const {
  require(raw.cols() == input_dimension(), "feature count does not match the fitted space",
          ErrorCode::schema_mismatch);
  Matrix out = Matrix::Zero(raw.rows(), dimension_);
  for (int j = 0; j < input_dimension(); ++j) {
    if (kinds_[j] == FeatureKind::nominal) {
      for (Eigen::Index i = 0; i < raw.rows(); ++i) {
        const int code = static_cast<int>(raw(i, j));
        if (code >= 0 && code < cardinality_[j]) out(i, offset_[j] + code) = 1.0;
      }
    } else {
      out.col(offset_[j]) = (raw.col(j).array() - min_[j]) / range_[j];
    }
  }
  return out;
}

Vector FeatureSpace::transform_row(const Eigen::Ref<const RowVector>& raw) const {
  return transform(Matrix(raw)).row(0).transpose();
}

}  // namespace hardness
