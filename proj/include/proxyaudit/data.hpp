#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace proxyaudit {

using Index = Eigen::Index;

enum class ColumnKind { continuous, binary, categorical };
enum class ColumnRole { outcome, predictor, protected_attribute, ignored };

std::string_view to_string(ColumnKind kind);
std::string_view to_string(ColumnRole role);
ColumnKind parse_column_kind(std::string_view text);
ColumnRole parse_column_role(std::string_view text);

/// One column of a dataset.
///
/// Binary columns hold 0/1 values; `categories` optionally names the two
/// levels (label of 0, label of 1). Categorical columns hold level codes into
/// `categories` and are read and written by label.
struct ColumnSchema {
  std::string name;
  ColumnKind kind = ColumnKind::continuous;
  ColumnRole role = ColumnRole::predictor;
  std::vector<std::string> categories;

  bool operator==(const ColumnSchema&) const = default;
};

/// Validated, ordered list of columns with exactly one outcome.
class Schema {
 public:
  Schema() = default;
  explicit Schema(std::vector<ColumnSchema> columns);

  const std::vector<ColumnSchema>& columns() const { return columns_; }
  std::size_t size() const { return columns_.size(); }
  const ColumnSchema& operator[](std::size_t i) const { return columns_[i]; }

  std::optional<std::size_t> find(std::string_view name) const;
  /// Throws InputError naming the column when absent.
  std::size_t index_of(std::string_view name) const;
  const ColumnSchema& at(std::string_view name) const { return columns_[index_of(name)]; }

  const ColumnSchema& outcome() const { return columns_[outcome_]; }
  std::vector<std::string> names_with_role(ColumnRole role) const;

  /// `{"columns":[{"name":..,"kind":..,"role":..,"categories":[..]}]}`
  static Schema from_json(std::string_view text);
  std::string to_json() const;

  bool operator==(const Schema& other) const { return columns_ == other.columns_; }

 private:
  std::vector<ColumnSchema> columns_;
  std::size_t outcome_ = 0;
};

/// Immutable rectangular table; one Eigen vector per column.
/// Categorical cells store the level index as a double.
class Dataset {
 public:
  Dataset(Schema schema, std::vector<Eigen::VectorXd> columns);

  const Schema& schema() const { return schema_; }
  Index rows() const { return rows_; }
  std::size_t cols() const { return columns_.size(); }

  const Eigen::VectorXd& column(std::size_t i) const { return columns_[i]; }
  const Eigen::VectorXd& column(std::string_view name) const { return columns_[schema_.index_of(name)]; }
  const Eigen::VectorXd& outcome() const { return column(schema_.outcome().name); }

  /// Integer codes of a binary or categorical column.
  std::vector<int> codes(std::string_view name) const;

  /// Text of one cell as written by to_csv().
  std::string cell_text(Index row, std::size_t col) const;

  Dataset subset(std::span<const Index> rows) const;

  /// Canonical CSV: header plus rows in the given (or natural) order, numbers
  /// with 17 significant digits, '\n' line ends, RFC-4180 quoting when needed.
  std::string to_csv() const;
  std::string to_csv(std::span<const Index> rows) const;

  bool operator==(const Dataset& other) const;

 private:
  Schema schema_;
  std::vector<Eigen::VectorXd> columns_;
  Index rows_ = 0;
};

/// Parses CSV text against a schema; columns are reordered to schema order.
/// Every failure carries the offending row and column.
Dataset load_dataset(std::string_view csv_text, const Schema& schema);

/// One encoded column of a design matrix.
struct DesignColumn {
  std::string name;    // "(intercept)", "<column>" or "<column>=<level>"
  std::string source;  // originating dataset column; empty for the intercept
  int level = -1;      // category index for one-hot columns
};

/// Column layout learned from one dataset and replayable on another.
struct DesignEncoding {
  std::vector<DesignColumn> columns;
  std::vector<std::string> excluded_constant;
  std::map<std::string, std::string> reference_levels;
  std::map<std::string, std::vector<int>> seen_levels;

  std::vector<std::string> names() const;
  /// Builds the matrix for `d`; throws InputError on a category level the
  /// encoding never saw or a missing column.
  Eigen::MatrixXd apply(const Dataset& d) const;
};

struct DesignMatrix {
  DesignEncoding encoding;
  Eigen::MatrixXd matrix;
};

/// Intercept first, then predictors in schema order. Continuous and binary
/// columns pass through; categorical columns become indicators for every
/// level but the reference (most frequent, ties alphabetical). Constant
/// columns are dropped and listed in `excluded_constant`.
DesignMatrix encode_design(const Dataset& d, std::span<const std::string> predictors);

struct LockBoxSplit {
  std::uint64_t seed = 0;
  double test_fraction = 0.3;
  std::vector<Index> train_indices;
  std::vector<Index> test_indices;
  std::string digest;
};

/// Test size is round(n * fraction) clamped to [1, n-1]. Indices are shuffled
/// by Fisher-Yates driven by SplitMix64(seed): for i = n-1 .. 1, swap i with
/// below(i + 1). The first test-size shuffled indices form the test set; both
/// index sets are returned sorted ascending.
LockBoxSplit lockbox_split(const Dataset& d, double test_fraction, std::uint64_t seed);

/// SHA-256 of the canonical CSV of the given rows (ascending order).
std::string lockbox_digest(const Dataset& d, std::span<const Index> test_indices);
bool verify_lockbox(const Dataset& d, const LockBoxSplit& split);

/// Formats with 17 significant digits ("%.17g").
std::string format_number(double value);

}  // namespace proxyaudit
