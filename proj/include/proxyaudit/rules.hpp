#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "proxyaudit/data.hpp"
#include "proxyaudit/glm.hpp"
#include "proxyaudit/proxy.hpp"
#include "proxyaudit/stats.hpp"

namespace proxyaudit {

enum class RuleKind { no_proxy, min_proxy, capped, lexicographic };

std::string_view to_string(RuleKind r);
RuleKind parse_rule_kind(std::string_view text);

/// Thresholds every rule reads. Boundaries are inclusive: a model exactly at
/// the cap is compliant, an accuracy gap exactly equal to the band is equivalent.
struct Policy {
  static constexpr double kDefaultCap = 0.05;

  double equivalence_band = 0.005;
  std::optional<double> cap;
  double substitute_threshold = 0.95;
  std::vector<std::string> protected_columns;
  std::optional<std::map<std::string, double>> weights;
  std::optional<RuleKind> rule;

  void validate() const;
  double cap_or_default() const { return cap.value_or(kDefaultCap); }
};

/// A model's lock-box score: the inputs every comparison works from.
struct ScoredModel {
  std::string id;
  Accuracy accuracy;
  std::optional<double> average_proxy_power;  // empty when unmeasurable
  std::size_t predictor_count = 0;
  std::map<std::string, double> semi_partial;
};

/// One auditable decision step: which criterion, over which models, on which values.
struct TrailStep {
  std::string criterion;
  std::vector<std::string> models;
  std::vector<double> values;
  std::string result;
};

struct Violation {
  std::string variable;
  std::string protected_attribute;  // empty for superfluous predictors
  std::string kind;                 // "prohibited_substitute" or "superfluous"
  double importance = 0.0;
  double forward_rate = 0.0;
  double reverse_rate = 0.0;
  double affected_fraction = 0.0;
};

struct Margins {
  std::optional<double> accuracy_gap;
  std::optional<double> proxy_gap;
  std::optional<double> variable_count_gap;
};

struct Verdict {
  RuleKind rule = RuleKind::min_proxy;
  std::string winner;  // a model id or "tie"
  Margins margins;
  std::vector<TrailStep> trail;
  std::vector<Violation> violations;
  std::vector<std::string> non_compliant;
  std::vector<ScoredModel> scored;
};

/// Superfluous-proxy screen of a single model. A predictor is prohibited when it
/// substitutes for a protected attribute (near-perfect overall, or perfectly for
/// some sub-population) and still carries decision weight; it is superfluous
/// when its added-last importance is at most 1e-6. A single-model check never
/// has a winner, so `winner` is always "tie"; read `violations`.
Verdict no_proxy_rule_check(const Dataset& d, const ModelSpec& spec, const Policy& policy);

/// Fits every spec on `train`, scores accuracy and average proxy power on `eval`.
std::vector<ScoredModel> score_models(const Dataset& train, const Dataset& eval, std::span<const ModelSpec> specs,
                                      const Policy& policy);

/// Among models within the band of the best accuracy, lowest average proxy
/// power wins; proxy ties within 1e-6 fall through to lexicographic_compare.
Verdict select_min_proxy_power(std::span<const ScoredModel> scored, const Policy& policy);

/// Scores on the lock-box rows of `split` (fitting on its train rows) or, when
/// `split` is null, in-sample on `d`.
Verdict compare_min_proxy_power(const Dataset& d, std::span<const ModelSpec> specs, const Policy& policy,
                                const LockBoxSplit* split = nullptr);

struct ProxyMeasurement {
  std::string model_id;
  double semi_partial = 0.0;
};

/// Under the cap every model is compliant and differences are ignored. Over-cap
/// models are flagged; when fewer than two models are compliant the lowest
/// measurement wins.
Verdict capped_rule(std::span<const ProxyMeasurement> measurements, const Policy& policy);

enum class Preference { first, second, equal };

struct LexDecision {
  Preference preference = Preference::equal;
  TrailStep step;
};

/// Total order on scored models: (1) accuracy, compared on cells of width
/// `equivalence_band`; (2) average proxy power on cells of width 1e-6;
/// (3) fewer predictors; (4) smaller id. Comparing cells rather than raw gaps
/// keeps the relation transitive.
LexDecision lexicographic_compare(const ScoredModel& a, const ScoredModel& b, const Policy& policy);

struct ScreeningReport {
  std::string group_label;
  double selection_rate_0 = 0.0;
  double selection_rate_1 = 0.0;
  std::int64_t members_0 = 0;
  std::int64_t members_1 = 0;
  double ratio = 1.0;
  TestKind test = TestKind::none;
  double statistic = 0.0;
  double p_value = 1.0;
  bool flagged = false;
  std::string caveat;
};

/// Four-fifths screen plus an independence test (Fisher exact when any
/// expected cell is below 5, chi-square otherwise).
ScreeningReport disparate_impact_screen(std::span<const int> selected, std::span<const int> group, const Policy& policy);

/// Binary decisions from predictions: p >= 0.5 (logistic) or above the median (ols).
std::vector<int> binary_decisions(const Eigen::Ref<const Eigen::VectorXd>& predictions, Family family);

/// One screen per binary protected attribute and per level (vs the rest) of
/// each categorical one; continuous protected attributes are skipped.
std::vector<ScreeningReport> screen_by_protected(const Dataset& d, std::span<const int> selected,
                                                 const Policy& policy);

/// Indices of the k largest predictions, ties to the lower index.
std::vector<Index> select_top(const Eigen::Ref<const Eigen::VectorXd>& predictions, std::size_t k);

}  // namespace proxyaudit
