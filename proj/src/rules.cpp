#include "proxyaudit/rules.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

#include "proxyaudit/error.hpp"

namespace proxyaudit {

namespace {

constexpr double kProxyResolution = 1e-6;
constexpr double kImportanceFloor = 1e-6;
constexpr double kBoundarySlack = 1e-12;

double oriented(const Accuracy& a) { return a.orientation == Orientation::higher_is_better ? a.value : -a.value; }

long long cell(double value, double width) { return static_cast<long long>(std::floor(value / width + 1e-9)); }

void require_protected(const Policy& policy) {
  if (policy.protected_columns.empty()) throw InputError("policy lists no protected attributes");
}

}  // namespace

std::string_view to_string(RuleKind r) {
  switch (r) {
    case RuleKind::no_proxy: return "no_proxy";
    case RuleKind::min_proxy: return "min_proxy";
    case RuleKind::capped: return "capped";
    case RuleKind::lexicographic: return "lexicographic";
  }
  return "min_proxy";
}

RuleKind parse_rule_kind(std::string_view text) {
  if (text == "no_proxy") return RuleKind::no_proxy;
  if (text == "min_proxy") return RuleKind::min_proxy;
  if (text == "capped") return RuleKind::capped;
  if (text == "lexicographic") return RuleKind::lexicographic;
  throw InputError("unknown rule '" + std::string(text) + "'");
}

void Policy::validate() const {
  if (!std::isfinite(equivalence_band) || equivalence_band < 0.0) {
    throw InputError("equivalence_band must be a non-negative number");
  }
  if (cap && !(*cap > 0.0 && *cap <= 1.0)) throw InputError("cap must lie in (0, 1]");
  if (!(substitute_threshold > 0.0 && substitute_threshold <= 1.0)) {
    throw InputError("substitute_threshold must lie in (0, 1]");
  }
  std::set<std::string> seen;
  for (const auto& p : protected_columns) {
    if (!seen.insert(p).second) throw InputError("protected attribute '" + p + "' listed twice");
  }
  if (weights) {
    double sum = 0.0;
    for (const auto& [name, w] : *weights) {
      if (!std::isfinite(w) || w < 0.0) throw InputError("weight for '" + name + "' must be non-negative");
      sum += w;
    }
    if (sum <= 0.0) throw InputError("weights sum to zero");
  }
}

Verdict no_proxy_rule_check(const Dataset& d, const ModelSpec& spec, const Policy& policy) {
  policy.validate();
  require_protected(policy);
  validate(spec, d.schema());

  Verdict v;
  v.rule = RuleKind::no_proxy;
  for (const auto& p : policy.protected_columns) {
    if (std::find(spec.predictors.begin(), spec.predictors.end(), p) != spec.predictors.end()) {
      throw InputError("model '" + spec.id + "' uses protected attribute '" + p + "' directly");
    }
    d.schema().at(p);
  }

  for (const auto& var : spec.predictors) {
    const double importance = variable_importance(d, spec, var);
    v.trail.push_back({"importance", {spec.id}, {importance}, var});
    if (importance <= kImportanceFloor) {
      Violation s;
      s.variable = var;
      s.kind = "superfluous";
      s.importance = importance;
      v.violations.push_back(std::move(s));
      continue;
    }
    for (const auto& p : policy.protected_columns) {
      if (d.schema().at(p).kind == ColumnKind::continuous) {
        v.trail.push_back({"substitute_check", {spec.id}, {}, "skipped: '" + p + "' is continuous"});
        continue;
      }
      const auto f = detect_substitute(d, var, p, policy.substitute_threshold);
      const bool prohibited = f.near_perfect || f.affected_fraction > 0.0;
      v.trail.push_back({"substitute_check",
                         {spec.id},
                         {f.forward_rate, f.reverse_rate, f.affected_fraction},
                         var + " vs " + p + (prohibited ? ": substitute" : ": clear")});
      if (prohibited) {
        Violation s;
        s.variable = var;
        s.protected_attribute = p;
        s.kind = "prohibited_substitute";
        s.importance = importance;
        s.forward_rate = f.forward_rate;
        s.reverse_rate = f.reverse_rate;
        s.affected_fraction = f.affected_fraction;
        v.violations.push_back(std::move(s));
      }
    }
  }
  v.winner = "tie";
  if (!v.violations.empty()) v.non_compliant.push_back(spec.id);
  if (v.trail.empty()) v.trail.push_back({"importance", {spec.id}, {}, "no predictors"});
  return v;
}

std::vector<ScoredModel> score_models(const Dataset& train, const Dataset& eval, std::span<const ModelSpec> specs,
                                      const Policy& policy) {
  policy.validate();
  require_protected(policy);
  if (specs.empty()) throw InputError("no models to compare");
  const auto evaluation = &train == &eval ? EvaluationSet::train : EvaluationSet::lockbox;
  std::vector<ScoredModel> out;
  for (const auto& spec : specs) {
    validate(spec, train.schema());
    if (spec.family != specs.front().family || spec.outcome != specs.front().outcome) {
      throw InputError("models '" + specs.front().id + "' and '" + spec.id + "' differ in outcome or family");
    }
    const auto m = fit(train, spec);
    const auto report = build_proxy_report(train, eval, spec, policy.protected_columns, evaluation, policy.weights);
    ScoredModel s;
    s.id = spec.id;
    s.accuracy = mean_accuracy(m, eval);
    s.average_proxy_power = report.average_proxy_power;
    s.predictor_count = spec.predictors.size();
    s.semi_partial = report.semi_partial;
    out.push_back(std::move(s));
  }
  return out;
}

LexDecision lexicographic_compare(const ScoredModel& a, const ScoredModel& b, const Policy& policy) {
  if (a.accuracy.orientation != b.accuracy.orientation) {
    throw InputError("models '" + a.id + "' and '" + b.id + "' use different accuracy metrics");
  }
  LexDecision out;
  const auto decide = [&](std::string criterion, double va, double vb, bool a_wins, bool b_wins) {
    out.step = {std::move(criterion), {a.id, b.id}, {va, vb}, a_wins ? a.id : b_wins ? b.id : "equal"};
    out.preference = a_wins ? Preference::first : b_wins ? Preference::second : Preference::equal;
    return a_wins || b_wins;
  };

  const double oa = oriented(a.accuracy);
  const double ob = oriented(b.accuracy);
  if (policy.equivalence_band > 0.0) {
    const auto ca = cell(oa, policy.equivalence_band);
    const auto cb = cell(ob, policy.equivalence_band);
    if (decide("accuracy", a.accuracy.value, b.accuracy.value, ca > cb, cb > ca)) return out;
  } else if (decide("accuracy", a.accuracy.value, b.accuracy.value, oa > ob, ob > oa)) {
    return out;
  }

  if (a.average_proxy_power && b.average_proxy_power) {
    const auto pa = cell(*a.average_proxy_power, kProxyResolution);
    const auto pb = cell(*b.average_proxy_power, kProxyResolution);
    if (decide("proxy_power", *a.average_proxy_power, *b.average_proxy_power, pa < pb, pb < pa)) return out;
  }

  const auto na = static_cast<double>(a.predictor_count);
  const auto nb = static_cast<double>(b.predictor_count);
  if (decide("predictor_count", na, nb, na < nb, nb < na)) return out;

  decide("id", 0.0, 0.0, a.id < b.id, b.id < a.id);
  return out;
}

Verdict select_min_proxy_power(std::span<const ScoredModel> scored, const Policy& policy) {
  policy.validate();
  if (scored.empty()) throw InputError("no models to compare");
  Verdict v;
  v.rule = RuleKind::min_proxy;
  v.scored.assign(scored.begin(), scored.end());

  double best = -std::numeric_limits<double>::infinity();
  for (const auto& s : scored) {
    if (s.accuracy.orientation != scored.front().accuracy.orientation) {
      throw InputError("models use different accuracy metrics");
    }
    if (!s.average_proxy_power) throw InputError("model '" + s.id + "' has no proxy power measurement");
    best = std::max(best, oriented(s.accuracy));
  }

  std::vector<const ScoredModel*> eligible;
  TrailStep band{"accuracy_band", {}, {}, ""};
  for (const auto& s : scored) {
    band.models.push_back(s.id);
    band.values.push_back(s.accuracy.value);
    if (best - oriented(s.accuracy) <= policy.equivalence_band + kBoundarySlack) eligible.push_back(&s);
  }
  std::string outside;
  for (const auto& s : scored) {
    if (std::find(eligible.begin(), eligible.end(), &s) == eligible.end()) outside += (outside.empty() ? "" : ",") + s.id;
  }
  band.result = outside.empty() ? "all within equivalence band" : "outside equivalence band: " + outside;
  v.trail.push_back(std::move(band));

  double lowest = std::numeric_limits<double>::infinity();
  for (const auto* s : eligible) lowest = std::min(lowest, *s->average_proxy_power);
  TrailStep proxy{"proxy_power", {}, {}, ""};
  std::vector<const ScoredModel*> finalists;
  for (const auto* s : eligible) {
    proxy.models.push_back(s->id);
    proxy.values.push_back(*s->average_proxy_power);
    if (*s->average_proxy_power - lowest <= kProxyResolution) finalists.push_back(s);
  }

  std::stable_sort(finalists.begin(), finalists.end(), [&](const ScoredModel* x, const ScoredModel* y) {
    return lexicographic_compare(*x, *y, policy).preference == Preference::first;
  });
  const ScoredModel* winner = finalists.front();
  proxy.result = finalists.size() == 1 ? winner->id : std::to_string(finalists.size()) + " tied";
  v.trail.push_back(std::move(proxy));

  if (finalists.size() > 1) {
    const auto d = lexicographic_compare(*finalists[0], *finalists[1], policy);
    v.trail.push_back(d.step);
    if (d.preference == Preference::equal) {
      v.winner = "tie";
      return v;
    }
    if (d.step.criterion == "predictor_count") v.margins.variable_count_gap = d.step.values[1] - d.step.values[0];
  }
  v.winner = winner->id;
  v.margins.accuracy_gap = best - oriented(winner->accuracy);
  std::optional<double> runner_up;
  for (const auto* s : eligible) {
    if (s == winner) continue;
    const double gap = *s->average_proxy_power - *winner->average_proxy_power;
    runner_up = runner_up ? std::min(*runner_up, gap) : gap;
  }
  v.margins.proxy_gap = runner_up;
  return v;
}

Verdict compare_min_proxy_power(const Dataset& d, std::span<const ModelSpec> specs, const Policy& policy,
                                const LockBoxSplit* split) {
  if (specs.size() < 2) throw InputError("compare needs at least two models");
  if (!split) return select_min_proxy_power(score_models(d, d, specs, policy), policy);
  if (!verify_lockbox(d, *split)) throw InputError("lock-box digest does not match the data");
  const auto train = d.subset(split->train_indices);
  const auto test = d.subset(split->test_indices);
  return select_min_proxy_power(score_models(train, test, specs, policy), policy);
}

Verdict capped_rule(std::span<const ProxyMeasurement> measurements, const Policy& policy) {
  policy.validate();
  if (measurements.empty()) throw InputError("no measurements to compare");
  const double cap = policy.cap_or_default();
  Verdict v;
  v.rule = RuleKind::capped;

  TrailStep step{"cap", {}, {}, ""};
  std::vector<const ProxyMeasurement*> compliant;
  for (const auto& m : measurements) {
    if (!std::isfinite(m.semi_partial)) throw InputError("measurement for '" + m.model_id + "' is not finite");
    step.models.push_back(m.model_id);
    step.values.push_back(m.semi_partial);
    if (m.semi_partial <= cap) {
      compliant.push_back(&m);
    } else {
      v.non_compliant.push_back(m.model_id);
    }
  }
  step.result = std::to_string(compliant.size()) + " at or under cap " + format_number(cap);
  v.trail.push_back(std::move(step));

  if (compliant.size() >= 2) {
    v.winner = "tie";
    return v;
  }
  if (compliant.size() == 1) {
    v.winner = compliant.front()->model_id;
    return v;
  }
  const auto lowest = std::min_element(measurements.begin(), measurements.end(), [](const auto& a, const auto& b) {
    return a.semi_partial < b.semi_partial || (a.semi_partial == b.semi_partial && a.model_id < b.model_id);
  });
  v.trail.push_back({"lowest_over_cap", {lowest->model_id}, {lowest->semi_partial}, lowest->model_id});
  v.winner = lowest->model_id;
  return v;
}

ScreeningReport disparate_impact_screen(std::span<const int> selected, std::span<const int> group, const Policy& policy) {
  (void)policy;
  if (selected.size() != group.size()) throw InputError("selection and group vectors differ in length");
  CountMatrix counts = CountMatrix::Zero(2, 2);
  for (std::size_t i = 0; i < selected.size(); ++i) {
    if ((selected[i] != 0 && selected[i] != 1) || (group[i] != 0 && group[i] != 1)) {
      throw InputError("selection and group values must be 0 or 1");
    }
    ++counts(group[i], selected[i]);
  }
  ScreeningReport r;
  r.members_0 = counts.row(0).sum();
  r.members_1 = counts.row(1).sum();
  if (r.members_0 == 0 || r.members_1 == 0) throw InputError("screening needs members of both groups");
  r.selection_rate_0 = static_cast<double>(counts(0, 1)) / static_cast<double>(r.members_0);
  r.selection_rate_1 = static_cast<double>(counts(1, 1)) / static_cast<double>(r.members_1);
  r.ratio = selection_rate_ratio(selected, group);
  r.flagged = r.ratio < 0.8;

  const auto n = static_cast<double>(counts.sum());
  bool degenerate = false;
  double min_expected = std::numeric_limits<double>::infinity();
  for (Index i = 0; i < 2; ++i) {
    for (Index j = 0; j < 2; ++j) {
      const double e = static_cast<double>(counts.row(i).sum()) * static_cast<double>(counts.col(j).sum()) / n;
      if (e == 0.0) degenerate = true;
      min_expected = std::min(min_expected, e);
    }
  }
  if (!degenerate) {
    const ContingencyTable table(counts);
    const auto a = min_expected < 5.0 ? fisher_exact_2x2(table) : cramers_v(table);
    r.test = a.test;
    r.statistic = a.statistic;
    r.p_value = a.p_value;
  }
  r.caveat =
      "selection-rate ratio below 0.8 is a screening signal only; it is unstable for small groups and does not "
      "establish that a proxy is at work";
  return r;
}

std::vector<int> binary_decisions(const Eigen::Ref<const Eigen::VectorXd>& predictions, Family family) {
  std::vector<int> out(static_cast<std::size_t>(predictions.size()));
  if (out.empty()) return out;
  double threshold = 0.5;
  if (family == Family::ols) {
    std::vector<double> sorted(predictions.begin(), predictions.end());
    std::sort(sorted.begin(), sorted.end());
    const auto m = sorted.size();
    threshold = m % 2 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]);
  }
  for (Index i = 0; i < predictions.size(); ++i) {
    const bool chosen = family == Family::ols ? predictions[i] > threshold : predictions[i] >= threshold;
    out[static_cast<std::size_t>(i)] = chosen ? 1 : 0;
  }
  return out;
}

std::vector<ScreeningReport> screen_by_protected(const Dataset& d, std::span<const int> selected,
                                                 const Policy& policy) {
  std::vector<ScreeningReport> out;
  for (const auto& p : policy.protected_columns) {
    const auto& col = d.schema().at(p);
    if (col.kind == ColumnKind::continuous) continue;
    const auto codes = d.codes(p);
    const int levels = col.kind == ColumnKind::binary ? 2 : static_cast<int>(col.categories.size());
    for (int level = col.kind == ColumnKind::binary ? 1 : 0; level < levels; ++level) {
      std::vector<int> group(codes.size());
      std::size_t members = 0;
      for (std::size_t i = 0; i < codes.size(); ++i) members += group[i] = codes[i] == level ? 1 : 0;
      if (members == 0 || members == codes.size()) continue;
      auto r = disparate_impact_screen(selected, group, policy);
      const std::string label = col.categories.empty() ? std::to_string(level) : col.categories[static_cast<std::size_t>(level)];
      r.group_label = p + "=" + label;
      out.push_back(std::move(r));
    }
  }
  return out;
}

std::vector<Index> select_top(const Eigen::Ref<const Eigen::VectorXd>& predictions, std::size_t k) {
  std::vector<Index> idx(static_cast<std::size_t>(predictions.size()));
  std::iota(idx.begin(), idx.end(), Index{0});
  k = std::min(k, idx.size());
  std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(k), idx.end(), [&](Index a, Index b) {
    return predictions[a] > predictions[b] || (predictions[a] == predictions[b] && a < b);
  });
  idx.resize(k);
  return idx;
}

}  // namespace proxyaudit
