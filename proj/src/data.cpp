#include "proxyaudit/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

#include <json.hpp>

#include "proxyaudit/digest.hpp"
#include "proxyaudit/error.hpp"
#include "proxyaudit/random.hpp"

namespace proxyaudit {

namespace {

using Record = std::vector<std::string>;

// RFC-4180 subset: comma separator, double-quote escaping, LF or CRLF records.
std::vector<Record> parse_csv(std::string_view text) {
  std::vector<Record> records;
  Record record;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  long line = 1;

  auto end_field = [&] {
    record.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_record = [&] {
    end_field();
    records.push_back(std::move(record));
    record.clear();
  };

  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        field.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (field_started || !field.empty()) {
          throw InputError("stray quote inside unquoted field on line " + std::to_string(line));
        }
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        end_field();
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') break;
        end_record();
        ++line;
        break;
      case '\n':
        end_record();
        ++line;
        break;
      default:
        field.push_back(c);
        field_started = true;
    }
  }
  if (in_quotes) throw InputError("unterminated quoted field at end of input");
  if (field_started || !field.empty() || !record.empty()) end_record();
  return records;
}

bool needs_quoting(std::string_view s) {
  return s.find_first_of(",\"\r\n") != std::string_view::npos;
}

void append_field(std::string& out, std::string_view s) {
  if (!needs_quoting(s)) {
    out.append(s);
    return;
  }
  out.push_back('"');
  for (char c : s) {
    if (c == '"') out.push_back('"');
    out.push_back(c);
  }
  out.push_back('"');
}

std::optional<double> parse_number(std::string_view s) {
  double value = 0.0;
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (!s.empty() && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

std::string format_number(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::string_view to_string(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::continuous: return "continuous";
    case ColumnKind::binary: return "binary";
    case ColumnKind::categorical: return "categorical";
  }
  return "?";
}

std::string_view to_string(ColumnRole role) {
  switch (role) {
    case ColumnRole::outcome: return "outcome";
    case ColumnRole::predictor: return "predictor";
    case ColumnRole::protected_attribute: return "protected";
    case ColumnRole::ignored: return "ignored";
  }
  return "?";
}

ColumnKind parse_column_kind(std::string_view text) {
  if (text == "continuous") return ColumnKind::continuous;
  if (text == "binary") return ColumnKind::binary;
  if (text == "categorical") return ColumnKind::categorical;
  throw InputError("unknown column kind '" + std::string(text) + "'");
}

ColumnRole parse_column_role(std::string_view text) {
  if (text == "outcome") return ColumnRole::outcome;
  if (text == "predictor") return ColumnRole::predictor;
  if (text == "protected") return ColumnRole::protected_attribute;
  if (text == "ignored") return ColumnRole::ignored;
  throw InputError("unknown column role '" + std::string(text) + "'");
}

// ---------------------------------------------------------------- Schema

Schema::Schema(std::vector<ColumnSchema> columns) : columns_(std::move(columns)) {
  std::set<std::string> names;
  std::optional<std::size_t> outcome;
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    const auto& c = columns_[i];
    if (c.name.empty()) throw InputError("schema column " + std::to_string(i) + " has an empty name");
    if (!names.insert(c.name).second) throw InputError("duplicate schema column '" + c.name + "'");
    if (c.role == ColumnRole::outcome) {
      if (outcome) throw InputError("schema declares more than one outcome column ('" + c.name + "')");
      outcome = i;
    }
    const std::set<std::string> distinct(c.categories.begin(), c.categories.end());
    if (distinct.size() != c.categories.size()) {
      throw InputError("column '" + c.name + "' lists a category twice");
    }
    switch (c.kind) {
      case ColumnKind::categorical:
        if (c.categories.size() < 2) {
          throw InputError("categorical column '" + c.name + "' needs at least 2 categories");
        }
        break;
      case ColumnKind::binary:
        if (!c.categories.empty() && c.categories.size() != 2) {
          throw InputError("binary column '" + c.name + "' must list exactly 2 categories");
        }
        break;
      case ColumnKind::continuous:
        if (!c.categories.empty()) {
          throw InputError("continuous column '" + c.name + "' cannot list categories");
        }
        break;
    }
  }
  if (!outcome) throw InputError("schema declares no outcome column");
  outcome_ = *outcome;
}

std::optional<std::size_t> Schema::find(std::string_view name) const {
  for (std::size_t i = 0; i < columns_.size(); ++i) {
    if (columns_[i].name == name) return i;
  }
  return std::nullopt;
}

std::size_t Schema::index_of(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw InputError("unknown column '" + std::string(name) + "'");
}

std::vector<std::string> Schema::names_with_role(ColumnRole role) const {
  std::vector<std::string> out;
  for (const auto& c : columns_) {
    if (c.role == role) out.push_back(c.name);
  }
  return out;
}

Schema Schema::from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("schema JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("columns") || !j["columns"].is_array()) {
    throw InputError("schema JSON must be an object with a \"columns\" array");
  }
  std::vector<ColumnSchema> columns;
  try {
    for (const auto& c : j["columns"]) {
      ColumnSchema col;
      col.name = c.at("name").get<std::string>();
      col.kind = parse_column_kind(c.at("kind").get<std::string>());
      col.role = parse_column_role(c.at("role").get<std::string>());
      if (c.contains("categories") && !c["categories"].is_null()) {
        col.categories = c["categories"].get<std::vector<std::string>>();
      }
      columns.push_back(std::move(col));
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("schema JSON: ") + e.what());
  }
  return Schema(std::move(columns));
}

std::string Schema::to_json() const {
  nlohmann::json cols = nlohmann::json::array();
  for (const auto& c : columns_) {
    nlohmann::json col = {{"name", c.name},
                          {"kind", std::string(to_string(c.kind))},
                          {"role", std::string(to_string(c.role))}};
    if (!c.categories.empty()) col["categories"] = c.categories;
    cols.push_back(std::move(col));
  }
  return nlohmann::json{{"columns", cols}}.dump(2) + "\n";
}

// ---------------------------------------------------------------- Dataset

Dataset::Dataset(Schema schema, std::vector<Eigen::VectorXd> columns)
    : schema_(std::move(schema)), columns_(std::move(columns)) {
  if (columns_.size() != schema_.size()) {
    throw InputError("dataset has " + std::to_string(columns_.size()) + " columns but schema has " +
                     std::to_string(schema_.size()));
  }
  rows_ = columns_.empty() ? 0 : columns_.front().size();
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    const auto& spec = schema_[j];
    const auto& col = columns_[j];
    if (col.size() != rows_) throw InputError("column '" + spec.name + "' has a different length");
    for (Index i = 0; i < rows_; ++i) {
      const double v = col[i];
      if (!std::isfinite(v)) throw DataError("missing or non-finite value", i + 1, spec.name);
      if (spec.kind == ColumnKind::binary && v != 0.0 && v != 1.0) {
        throw DataError("binary value must be 0 or 1", i + 1, spec.name);
      }
      if (spec.kind == ColumnKind::categorical &&
          (v != std::floor(v) || v < 0 || v >= static_cast<double>(spec.categories.size()))) {
        throw DataError("category code out of range", i + 1, spec.name);
      }
    }
  }
  if (rows_ < 2) throw InputError("dataset needs at least 2 rows");
}

std::vector<int> Dataset::codes(std::string_view name) const {
  const auto j = schema_.index_of(name);
  if (schema_[j].kind == ColumnKind::continuous) {
    throw InputError("column '" + std::string(name) + "' is continuous, not coded");
  }
  std::vector<int> out(static_cast<std::size_t>(rows_));
  for (Index i = 0; i < rows_; ++i) out[static_cast<std::size_t>(i)] = static_cast<int>(columns_[j][i]);
  return out;
}

std::string Dataset::cell_text(Index row, std::size_t col) const {
  const auto& spec = schema_[col];
  const double v = columns_[col][row];
  if (spec.kind == ColumnKind::categorical) return spec.categories[static_cast<std::size_t>(v)];
  return format_number(v);
}

Dataset Dataset::subset(std::span<const Index> rows) const {
  std::vector<Eigen::VectorXd> cols;
  cols.reserve(columns_.size());
  for (const auto& c : columns_) {
    Eigen::VectorXd sub(static_cast<Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (rows[i] < 0 || rows[i] >= rows_) throw InputError("row index out of range in subset");
      sub[static_cast<Index>(i)] = c[rows[i]];
    }
    cols.push_back(std::move(sub));
  }
  return Dataset(schema_, std::move(cols));
}

std::string Dataset::to_csv() const {
  std::vector<Index> all(static_cast<std::size_t>(rows_));
  std::iota(all.begin(), all.end(), Index{0});
  return to_csv(all);
}

std::string Dataset::to_csv(std::span<const Index> rows) const {
  std::string out;
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    if (j) out.push_back(',');
    append_field(out, schema_[j].name);
  }
  out.push_back('\n');
  for (Index i : rows) {
    for (std::size_t j = 0; j < columns_.size(); ++j) {
      if (j) out.push_back(',');
      append_field(out, cell_text(i, j));
    }
    out.push_back('\n');
  }
  return out;
}

bool Dataset::operator==(const Dataset& other) const {
  if (!(schema_ == other.schema_) || rows_ != other.rows_) return false;
  for (std::size_t j = 0; j < columns_.size(); ++j) {
    if (columns_[j] != other.columns_[j]) return false;
  }
  return true;
}

Dataset load_dataset(std::string_view csv_text, const Schema& schema) {
  const auto records = parse_csv(csv_text);
  if (records.empty()) throw InputError("CSV has no header row");

  const auto& header = records.front();
  std::vector<std::size_t> target(header.size());
  std::vector<bool> present(schema.size(), false);
  for (std::size_t h = 0; h < header.size(); ++h) {
    const auto name = trim(header[h]);
    const auto j = schema.find(name);
    if (!j) throw InputError("CSV column '" + name + "' is not in the schema");
    if (present[*j]) throw InputError("duplicate CSV header '" + name + "'");
    present[*j] = true;
    target[h] = *j;
  }
  for (std::size_t j = 0; j < schema.size(); ++j) {
    if (!present[j]) throw InputError("CSV is missing schema column '" + schema[j].name + "'");
  }

  const auto n = static_cast<Index>(records.size() - 1);
  std::vector<Eigen::VectorXd> columns(schema.size(), Eigen::VectorXd(n));
  for (Index i = 0; i < n; ++i) {
    const auto& rec = records[static_cast<std::size_t>(i) + 1];
    const long row = static_cast<long>(i) + 1;
    if (rec.size() != header.size()) {
      throw DataError("expected " + std::to_string(header.size()) + " fields, found " +
                          std::to_string(rec.size()),
                      row, rec.size() < header.size() ? schema[target[rec.size()]].name : "<extra>");
    }
    for (std::size_t h = 0; h < rec.size(); ++h) {
      const auto& spec = schema[target[h]];
      const auto cell = trim(rec[h]);
      if (cell.empty()) throw DataError("missing value", row, spec.name);
      double value = 0.0;
      if (spec.kind == ColumnKind::categorical) {
        auto it = std::find(spec.categories.begin(), spec.categories.end(), cell);
        if (it == spec.categories.end()) {
          throw DataError("unknown category label '" + cell + "'", row, spec.name);
        }
        value = static_cast<double>(it - spec.categories.begin());
      } else if (spec.kind == ColumnKind::binary && !spec.categories.empty() &&
                 (cell == spec.categories[0] || cell == spec.categories[1])) {
        value = cell == spec.categories[0] ? 0.0 : 1.0;
      } else {
        auto parsed = parse_number(cell);
        if (!parsed) throw DataError("non-numeric value '" + cell + "'", row, spec.name);
        value = *parsed;
        if (spec.kind == ColumnKind::binary && value != 0.0 && value != 1.0) {
          throw DataError("binary value must be 0 or 1, got '" + cell + "'", row, spec.name);
        }
      }
      columns[target[h]][i] = value;
    }
  }
  return Dataset(schema, std::move(columns));
}

// ---------------------------------------------------------------- design

std::vector<std::string> DesignEncoding::names() const {
  std::vector<std::string> out;
  out.reserve(columns.size());
  for (const auto& c : columns) out.push_back(c.name);
  return out;
}

Eigen::MatrixXd DesignEncoding::apply(const Dataset& d) const {
  for (const auto& [name, levels] : seen_levels) {
    const auto& col = d.column(name);
    for (Index i = 0; i < d.rows(); ++i) {
      const int code = static_cast<int>(col[i]);
      if (!std::binary_search(levels.begin(), levels.end(), code)) {
        const auto& spec = d.schema().at(name);
        throw DataError("unseen category level '" + spec.categories[static_cast<std::size_t>(code)] + "'",
                        i + 1, name);
      }
    }
  }
  Eigen::MatrixXd X(d.rows(), static_cast<Index>(columns.size()));
  for (std::size_t k = 0; k < columns.size(); ++k) {
    const auto& c = columns[k];
    const auto kk = static_cast<Index>(k);
    if (c.source.empty()) {
      X.col(kk).setOnes();
    } else if (c.level >= 0) {
      X.col(kk) = (d.column(c.source).array() == static_cast<double>(c.level)).cast<double>();
    } else {
      X.col(kk) = d.column(c.source);
    }
  }
  return X;
}

DesignMatrix encode_design(const Dataset& d, std::span<const std::string> predictors) {
  const auto& schema = d.schema();
  std::set<std::size_t> wanted;
  for (const auto& p : predictors) {
    const auto j = schema.index_of(p);
    const auto role = schema[j].role;
    if (role != ColumnRole::predictor && role != ColumnRole::protected_attribute) {
      throw InputError("column '" + p + "' has role " + std::string(to_string(role)) +
                       "; only predictor or protected columns can enter a design");
    }
    wanted.insert(j);
  }

  DesignEncoding enc;
  enc.columns.push_back({"(intercept)", "", -1});
  for (std::size_t j : wanted) {  // std::set iterates in schema order
    const auto& spec = schema[j];
    const auto& col = d.column(j);
    if (spec.kind != ColumnKind::categorical) {
      if ((col.array() == col[0]).all()) {
        enc.excluded_constant.push_back(spec.name);
      } else {
        enc.columns.push_back({spec.name, spec.name, -1});
      }
      continue;
    }
    std::vector<Index> counts(spec.categories.size(), 0);
    for (Index i = 0; i < col.size(); ++i) ++counts[static_cast<std::size_t>(col[i])];
    std::vector<int> seen;
    std::size_t ref = 0;
    for (std::size_t l = 0; l < counts.size(); ++l) {
      if (counts[l] == 0) continue;
      seen.push_back(static_cast<int>(l));
      if (counts[l] > counts[ref] ||
          (counts[l] == counts[ref] && spec.categories[l] < spec.categories[ref]) || counts[ref] == 0) {
        ref = l;
      }
    }
    enc.seen_levels[spec.name] = seen;
    enc.reference_levels[spec.name] = spec.categories[ref];
    if (seen.size() < 2) {
      enc.excluded_constant.push_back(spec.name);
      continue;
    }
    for (std::size_t l = 0; l < counts.size(); ++l) {
      if (l == ref) continue;
      const auto name = spec.name + "=" + spec.categories[l];
      if (counts[l] == 0) {
        enc.excluded_constant.push_back(name);
      } else {
        enc.columns.push_back({name, spec.name, static_cast<int>(l)});
      }
    }
  }
  DesignMatrix out{std::move(enc), {}};
  out.matrix = out.encoding.apply(d);
  return out;
}

// ---------------------------------------------------------------- lock-box

std::string lockbox_digest(const Dataset& d, std::span<const Index> test_indices) {
  std::vector<Index> sorted(test_indices.begin(), test_indices.end());
  std::sort(sorted.begin(), sorted.end());
  return sha256_hex(d.to_csv(sorted));
}

LockBoxSplit lockbox_split(const Dataset& d, double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw InputError("lock-box test fraction must lie strictly between 0 and 1");
  }
  const Index n = d.rows();
  if (n < 2) throw InputError("lock-box split needs at least 2 rows");

  const Index m = std::clamp<Index>(std::llround(static_cast<double>(n) * test_fraction), 1, n - 1);
  std::vector<Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Index{0});
  SplitMix64 rng(seed);
  for (Index i = n - 1; i > 0; --i) {
    const auto j = static_cast<Index>(rng.below(static_cast<std::uint64_t>(i) + 1));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }

  LockBoxSplit split;
  split.seed = seed;
  split.test_fraction = test_fraction;
  split.test_indices.assign(order.begin(), order.begin() + m);
  split.train_indices.assign(order.begin() + m, order.end());
  std::sort(split.test_indices.begin(), split.test_indices.end());
  std::sort(split.train_indices.begin(), split.train_indices.end());
  split.digest = lockbox_digest(d, split.test_indices);
  return split;
}

bool verify_lockbox(const Dataset& d, const LockBoxSplit& split) {
  return lockbox_digest(d, split.test_indices) == split.digest;
}

}  // namespace proxyaudit
