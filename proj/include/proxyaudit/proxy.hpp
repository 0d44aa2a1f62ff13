#pragma once

#include <Eigen/Core>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "proxyaudit/data.hpp"
#include "proxyaudit/glm.hpp"

namespace proxyaudit {

// Every measure below fits on `train` and scores on `eval`. The single-dataset
// overloads use the same rows for both.

/// Added-last importance of `v`: fit statistic of the full spec minus that of
/// the model spec without `v`, both evaluated on `eval`.
double variable_importance(const Dataset& train, const Dataset& eval, const ModelSpec& spec, std::string_view v);
double variable_importance(const Dataset& d, const ModelSpec& spec, std::string_view v);

/// Semi-partial (cumulative) R^2 of the protected set: gain in R^2 (or
/// McFadden) from adding `protected_columns` to `spec`.
double semi_partial_r2(const Dataset& train, const Dataset& eval, const ModelSpec& spec,
                       std::span<const std::string> protected_columns);
double semi_partial_r2(const Dataset& d, const ModelSpec& spec, std::span<const std::string> protected_columns);

/// Per protected attribute p: sum over predictors v of |assoc(v, p)| x importance(v).
/// Diagnostic only; semi_partial_r2 is the measure rules act on.
std::map<std::string, double> intuitive_total_proxy_power(const Dataset& train, const Dataset& eval,
                                                          const ModelSpec& spec,
                                                          std::span<const std::string> protected_columns);
std::map<std::string, double> intuitive_total_proxy_power(const Dataset& d, const ModelSpec& spec,
                                                          std::span<const std::string> protected_columns);

enum class EvaluationSet { train, lockbox };
std::string_view to_string(EvaluationSet e);

struct VariableProxyEntry {
  std::string variable;
  std::map<std::string, double> association_to_protected;  // |value| of assoc_auto
  std::map<std::string, std::string> association_measure;
  double importance = 0.0;  // clamped at 0 for reporting
  std::map<std::string, double> intuitive_product;
};

struct ProxyPowerReport {
  std::string model_id;
  Family family = Family::ols;
  std::size_t predictor_count = 0;
  double base_fit = 0.0;  // fit statistic of the model itself on the evaluation set
  std::vector<VariableProxyEntry> per_variable;
  std::map<std::string, double> semi_partial;      // clamped at 0 for reporting
  std::map<std::string, double> semi_partial_raw;  // as measured
  std::map<std::string, double> total_intuitive;
  double average_proxy_power = 0.0;
  std::optional<std::map<std::string, double>> weights;
  EvaluationSet evaluation_set = EvaluationSet::train;
};

/// Mean of report.semi_partial, optionally weighted (weights need not sum to 1
/// but must be non-negative with a positive total).
double average_proxy_power(const ProxyPowerReport& report,
                           const std::optional<std::map<std::string, double>>& weights = std::nullopt);

ProxyPowerReport build_proxy_report(const Dataset& train, const Dataset& eval, const ModelSpec& spec,
                                    std::span<const std::string> protected_columns, EvaluationSet evaluation_set,
                                    const std::optional<std::map<std::string, double>>& weights = std::nullopt);

struct SubstituteFinding {
  std::string variable;
  std::string protected_attribute;
  double forward_rate = 0.0;  // accuracy of the majority map variable -> protected
  double reverse_rate = 0.0;  // accuracy of the majority map protected -> variable
  bool symmetric = false;
  bool near_perfect = false;
  double affected_fraction = 0.0;  // rows whose variable value co-occurs with one protected value
  bool binned = false;             // continuous variable cut into deciles first
  double threshold = 0.95;
};

SubstituteFinding detect_substitute(const Dataset& d, std::string_view v, std::string_view p, double threshold = 0.95);

/// Decile codes for a continuous series: cut points at sorted[floor(k n / 10)],
/// k = 1..9; a value's bin is the number of cut points <= it.
std::vector<int> decile_codes(const Eigen::Ref<const Eigen::VectorXd>& x);

struct PopeSydnorResult {
  Eigen::VectorXd full_predictions;
  Eigen::VectorXd zeroed_predictions;
  Eigen::VectorXd omitted_predictions;
  double indirect_gap = 0.0;  // mean |zeroed - omitted|
};

PopeSydnorResult pope_sydnor_decomposition(const Dataset& train, const Dataset& eval, const ModelSpec& spec,
                                           std::span<const std::string> protected_columns);
PopeSydnorResult pope_sydnor_decomposition(const Dataset& d, const ModelSpec& spec,
                                           std::span<const std::string> protected_columns);

}  // namespace proxyaudit
