#include "proxyaudit/proxy.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "proxyaudit/error.hpp"
#include "proxyaudit/stats.hpp"

namespace proxyaudit {

namespace {

void require_disjoint(const ModelSpec& spec, std::span<const std::string> protected_columns) {
  if (protected_columns.empty()) throw InputError("no protected attributes given");
  for (const auto& p : protected_columns) {
    if (std::find(spec.predictors.begin(), spec.predictors.end(), p) != spec.predictors.end()) {
      throw InputError("protected attribute '" + p + "' is already a predictor of model '" + spec.id + "'");
    }
  }
}

double fitted_statistic(const Dataset& train, const Dataset& eval, const ModelSpec& spec) {
  const auto m = fit(train, spec);
  return &train == &eval ? m.fit_statistic() : goodness_of_fit(m, eval);
}

double augmented_statistic(const Dataset& train, const Dataset& eval, const ModelSpec& spec,
                           std::span<const std::string> protected_columns) {
  try {
    return fitted_statistic(train, eval, with_predictors(spec, protected_columns));
  } catch (const SeparationError& e) {
    throw SeparationError(std::string("protected attribute separates outcome: ") + e.what());
  }
}

std::vector<int> coded(const Dataset& d, std::string_view name, bool& binned) {
  const auto& spec = d.schema().at(name);
  if (spec.kind == ColumnKind::continuous) {
    binned = true;
    return decile_codes(d.column(name));
  }
  binned = false;
  return d.codes(name);
}

// Row-weighted accuracy of the majority map from `from` values to `to` values.
double majority_map_accuracy(const std::vector<int>& from, const std::vector<int>& to) {
  std::map<int, std::map<int, Index>> table;
  for (std::size_t i = 0; i < from.size(); ++i) ++table[from[i]][to[i]];
  Index hits = 0;
  for (const auto& [value, counts] : table) {
    Index best = 0;
    for (const auto& [target, c] : counts) best = std::max(best, c);
    hits += best;
  }
  return static_cast<double>(hits) / static_cast<double>(from.size());
}

}  // namespace

std::string_view to_string(EvaluationSet e) { return e == EvaluationSet::train ? "train" : "lockbox"; }

double variable_importance(const Dataset& train, const Dataset& eval, const ModelSpec& spec, std::string_view v) {
  if (std::find(spec.predictors.begin(), spec.predictors.end(), v) == spec.predictors.end()) {
    throw InputError("'" + std::string(v) + "' is not a predictor of model '" + spec.id + "'");
  }
  return fitted_statistic(train, eval, spec) - fitted_statistic(train, eval, without_predictor(spec, v));
}

double variable_importance(const Dataset& d, const ModelSpec& spec, std::string_view v) {
  return variable_importance(d, d, spec, v);
}

double semi_partial_r2(const Dataset& train, const Dataset& eval, const ModelSpec& spec,
                       std::span<const std::string> protected_columns) {
  require_disjoint(spec, protected_columns);
  return augmented_statistic(train, eval, spec, protected_columns) - fitted_statistic(train, eval, spec);
}

double semi_partial_r2(const Dataset& d, const ModelSpec& spec, std::span<const std::string> protected_columns) {
  return semi_partial_r2(d, d, spec, protected_columns);
}

std::map<std::string, double> intuitive_total_proxy_power(const Dataset& train, const Dataset& eval,
                                                          const ModelSpec& spec,
                                                          std::span<const std::string> protected_columns) {
  require_disjoint(spec, protected_columns);
  std::map<std::string, double> totals;
  for (const auto& p : protected_columns) totals[p] = 0.0;
  for (const auto& v : spec.predictors) {
    const double importance = std::max(0.0, variable_importance(train, eval, spec, v));
    for (const auto& p : protected_columns) totals[p] += std::abs(assoc_auto(eval, v, p).value) * importance;
  }
  return totals;
}

std::map<std::string, double> intuitive_total_proxy_power(const Dataset& d, const ModelSpec& spec,
                                                          std::span<const std::string> protected_columns) {
  return intuitive_total_proxy_power(d, d, spec, protected_columns);
}

double average_proxy_power(const ProxyPowerReport& report, const std::optional<std::map<std::string, double>>& weights) {
  if (report.semi_partial.empty()) throw InputError("average_proxy_power: no protected attribute was measured");
  if (!weights) {
    double sum = 0.0;
    for (const auto& [p, v] : report.semi_partial) sum += v;
    return sum / static_cast<double>(report.semi_partial.size());
  }
  double num = 0.0;
  double den = 0.0;
  for (const auto& [p, v] : report.semi_partial) {
    auto it = weights->find(p);
    if (it == weights->end()) throw InputError("average_proxy_power: no weight for protected attribute '" + p + "'");
    if (it->second < 0.0) throw InputError("average_proxy_power: negative weight for '" + p + "'");
    num += it->second * v;
    den += it->second;
  }
  if (den <= 0.0) throw InputError("average_proxy_power: weights sum to zero");
  return num / den;
}

ProxyPowerReport build_proxy_report(const Dataset& train, const Dataset& eval, const ModelSpec& spec,
                                    std::span<const std::string> protected_columns, EvaluationSet evaluation_set,
                                    const std::optional<std::map<std::string, double>>& weights) {
  require_disjoint(spec, protected_columns);
  ProxyPowerReport r;
  r.model_id = spec.id;
  r.family = spec.family;
  r.predictor_count = spec.predictors.size();
  r.evaluation_set = evaluation_set;
  r.weights = weights;

  const double full = fitted_statistic(train, eval, spec);
  r.base_fit = full;
  for (const auto& p : protected_columns) {
    const double gain = augmented_statistic(train, eval, spec, std::span(&p, 1)) - full;
    r.semi_partial_raw[p] = gain;
    r.semi_partial[p] = std::max(0.0, gain);
    r.total_intuitive[p] = 0.0;
  }
  for (const auto& v : spec.predictors) {
    VariableProxyEntry e;
    e.variable = v;
    e.importance = std::max(0.0, full - fitted_statistic(train, eval, without_predictor(spec, v)));
    for (const auto& p : protected_columns) {
      double strength = 0.0;
      std::string measure = "undefined";
      try {
        const auto a = assoc_auto(eval, v, p);
        strength = std::abs(a.value);
        measure = std::string(to_string(a.measure));
      } catch (const NumericalError&) {
        // constant column on the evaluation rows: no measurable association
      }
      e.association_to_protected[p] = strength;
      e.association_measure[p] = measure;
      e.intuitive_product[p] = strength * e.importance;
      r.total_intuitive[p] += e.intuitive_product[p];
    }
    r.per_variable.push_back(std::move(e));
  }
  r.average_proxy_power = average_proxy_power(r, weights);
  return r;
}

std::vector<int> decile_codes(const Eigen::Ref<const Eigen::VectorXd>& x) {
  const auto n = static_cast<std::size_t>(x.size());
  std::vector<double> sorted(x.begin(), x.end());
  std::sort(sorted.begin(), sorted.end());
  std::vector<double> cuts;
  for (std::size_t k = 1; k < 10; ++k) cuts.push_back(sorted[std::min(n - 1, k * n / 10)]);
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = static_cast<int>(std::upper_bound(cuts.begin(), cuts.end(), x[static_cast<Index>(i)]) - cuts.begin());
  }
  return out;
}

SubstituteFinding detect_substitute(const Dataset& d, std::string_view v, std::string_view p, double threshold) {
  if (d.rows() == 0) throw InputError("detect_substitute: empty column");
  if (d.schema().at(p).kind == ColumnKind::continuous) {
    throw InputError("detect_substitute: protected attribute '" + std::string(p) + "' must be binary or categorical");
  }
  SubstituteFinding f;
  f.variable = std::string(v);
  f.protected_attribute = std::string(p);
  f.threshold = threshold;
  const auto vc = coded(d, v, f.binned);
  const auto pc = d.codes(p);

  f.forward_rate = majority_map_accuracy(vc, pc);
  f.reverse_rate = majority_map_accuracy(pc, vc);
  f.symmetric = f.forward_rate >= threshold && f.reverse_rate >= threshold;
  f.near_perfect = std::max(f.forward_rate, f.reverse_rate) >= threshold;

  std::map<int, std::pair<std::set<int>, Index>> groups;
  for (std::size_t i = 0; i < vc.size(); ++i) {
    auto& [targets, count] = groups[vc[i]];
    targets.insert(pc[i]);
    ++count;
  }
  Index deterministic = 0;
  for (const auto& [value, g] : groups) {
    if (g.first.size() == 1) deterministic += g.second;
  }
  f.affected_fraction = static_cast<double>(deterministic) / static_cast<double>(vc.size());
  return f;
}

PopeSydnorResult pope_sydnor_decomposition(const Dataset& train, const Dataset& eval, const ModelSpec& spec,
                                           std::span<const std::string> protected_columns) {
  require_disjoint(spec, protected_columns);
  const auto full = fit(train, with_predictors(spec, protected_columns));
  const auto zeroed = zero_coefficients(full, protected_columns);
  const auto omitted = fit(train, spec);

  PopeSydnorResult out;
  out.full_predictions = predict(full, eval);
  out.zeroed_predictions = predict(zeroed, eval);
  out.omitted_predictions = predict(omitted, eval);
  out.indirect_gap = (out.zeroed_predictions - out.omitted_predictions).cwiseAbs().mean();
  return out;
}

PopeSydnorResult pope_sydnor_decomposition(const Dataset& d, const ModelSpec& spec,
                                           std::span<const std::string> protected_columns) {
  return pope_sydnor_decomposition(d, d, spec, protected_columns);
}

}  // namespace proxyaudit
