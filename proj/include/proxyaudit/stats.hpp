#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "proxyaudit/data.hpp"

namespace proxyaudit {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

struct ContingencyTable {
  std::vector<std::string> row_labels;
  std::vector<std::string> col_labels;
  CountMatrix counts;

  ContingencyTable() = default;
  /// Validates dimensions (at least 2x2), non-negative counts and total >= 1.
  ContingencyTable(std::vector<std::string> rows, std::vector<std::string> cols, CountMatrix counts);
  /// Unlabelled table; labels default to "0", "1", ...
  explicit ContingencyTable(CountMatrix counts);

  std::int64_t total() const { return counts.sum(); }

  /// Cross-tabulation of two coded series; levels with no observations are dropped.
  static ContingencyTable cross(std::span<const int> a, std::span<const int> b,
                                std::span<const std::string> a_labels, std::span<const std::string> b_labels);
};

enum class AssociationMeasure { pearson, cramers_v, correlation_ratio };
enum class TestKind { t, chi_square, anova, fisher_exact, none };

std::string_view to_string(AssociationMeasure m);
std::string_view to_string(TestKind t);

struct AssociationResult {
  AssociationMeasure measure = AssociationMeasure::pearson;
  double value = 0.0;
  TestKind test = TestKind::none;
  double statistic = 0.0;
  double p_value = 1.0;
  Index n = 0;
};

/// Sample correlation; p-value from a two-sided t test with n - 2 df.
AssociationResult pearson_r(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y);

/// sqrt(chi2 / (n (min(r, c) - 1))), plain Pearson chi-square (no Yates correction).
AssociationResult cramers_v(const ContingencyTable& t);

/// Eta = sqrt(SS_between / SS_total) with a one-way ANOVA F test.
AssociationResult correlation_ratio(std::span<const int> groups, const Eigen::Ref<const Eigen::VectorXd>& y);

/// Dispatch by column kinds: continuous x continuous -> Pearson; coded x coded
/// -> Cramer's V on the cross-tabulation; mixed -> correlation ratio.
AssociationResult assoc_auto(const Dataset& d, std::string_view a, std::string_view b);

/// Two-sided Fisher exact test: sum of hypergeometric probabilities of every
/// table with the observed margins that is no more likely than the observed one.
AssociationResult fisher_exact_2x2(const ContingencyTable& t);

/// Welch's unequal-variance t test, two-sided.
AssociationResult two_sample_t(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y);

/// Selection-rate ratio of the lower-rate group to the higher-rate group, in [0, 1].
/// Both rates zero counts as parity (1.0).
double selection_rate_ratio(std::span<const int> selected, std::span<const int> group);

}  // namespace proxyaudit
