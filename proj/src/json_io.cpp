#include "proxyaudit/json_io.hpp"

#include <cmath>
#include <initializer_list>
#include <set>
#include <sstream>

#include "proxyaudit/error.hpp"

namespace proxyaudit {

namespace {

void require_object(const Json& j, std::string_view what) {
  if (!j.is_object()) throw InputError(std::string(what) + ": expected a JSON object");
}

void reject_unknown(const Json& j, std::initializer_list<std::string_view> allowed, std::string_view what) {
  for (const auto& [key, value] : j.items()) {
    bool known = false;
    for (auto a : allowed) known = known || a == key;
    if (!known) throw InputError(std::string(what) + ": unknown key '" + key + "'");
  }
}

template <typename T>
T get(const Json& j, const char* key, std::string_view what) {
  if (!j.contains(key)) throw InputError(std::string(what) + ": missing key '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InputError(std::string(what) + ": key '" + key + "' has the wrong type");
  }
}

template <typename T>
std::optional<T> get_optional(const Json& j, const char* key, std::string_view what) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return get<T>(j, key, what);
}

template <typename T>
Json optional_json(const std::optional<T>& v) {
  return v ? Json(*v) : Json(nullptr);
}

Json number(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

Json number_map(const std::map<std::string, double>& m) {
  Json out = Json::object();
  for (const auto& [k, v] : m) out[k] = number(v);
  return out;
}

std::string cell_text(const Json& v) {
  if (v.is_string()) return v.get<std::string>();
  if (v.is_null()) return "none";
  std::string s = v.dump();
  for (auto& c : s) {
    if (c == '|') c = '/';
  }
  return s;
}

bool is_flat(const Json& obj) {
  for (const auto& [k, v] : obj.items()) {
    if (v.is_object() || (v.is_array() && !v.empty() && (v.front().is_object() || v.front().is_array()))) return false;
  }
  return true;
}

void render(std::ostringstream& out, const Json& v, int depth);

void render_table(std::ostringstream& out, const Json& rows) {
  std::vector<std::string> columns;
  std::set<std::string> seen;
  for (const auto& row : rows) {
    for (const auto& [k, value] : row.items()) {
      if (seen.insert(k).second) columns.push_back(k);
    }
  }
  out << "|";
  for (const auto& c : columns) out << ' ' << c << " |";
  out << "\n|";
  for (std::size_t i = 0; i < columns.size(); ++i) out << " --- |";
  out << "\n";
  for (const auto& row : rows) {
    out << "|";
    for (const auto& c : columns) out << ' ' << (row.contains(c) ? cell_text(row.at(c)) : "") << " |";
    out << "\n";
  }
  out << "\n";
}

void render(std::ostringstream& out, const Json& v, int depth) {
  if (v.is_object()) {
    if (is_flat(v)) {
      for (const auto& [k, value] : v.items()) out << "- **" << k << "**: " << cell_text(value) << "\n";
      out << "\n";
      return;
    }
    for (const auto& [k, value] : v.items()) {
      if (value.is_object() || value.is_array()) {
        out << std::string(static_cast<std::size_t>(std::min(depth + 2, 6)), '#') << ' ' << k << "\n\n";
        render(out, value, depth + 1);
      } else {
        out << "- **" << k << "**: " << cell_text(value) << "\n\n";
      }
    }
    return;
  }
  if (v.is_array()) {
    if (v.empty()) {
      out << "(none)\n\n";
      return;
    }
    bool all_flat_objects = true;
    for (const auto& e : v) all_flat_objects = all_flat_objects && e.is_object() && is_flat(e);
    if (all_flat_objects) {
      render_table(out, v);
      return;
    }
    std::size_t i = 0;
    for (const auto& e : v) {
      if (e.is_object() || e.is_array()) {
        out << std::string(static_cast<std::size_t>(std::min(depth + 2, 6)), '#') << " item " << ++i << "\n\n";
        render(out, e, depth + 1);
      } else {
        out << "- " << cell_text(e) << "\n";
      }
    }
    out << "\n";
    return;
  }
  out << cell_text(v) << "\n\n";
}

}  // namespace

Json parse_json(std::string_view text, std::string_view what) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string(what) + ": invalid JSON: " + e.what());
  }
}

ModelSpec spec_from_json(const Json& j) {
  constexpr std::string_view what = "model spec";
  require_object(j, what);
  reject_unknown(j, {"id", "family", "outcome", "predictors"}, what);
  ModelSpec s;
  s.id = get<std::string>(j, "id", what);
  s.family = parse_family(get<std::string>(j, "family", what));
  s.outcome = get<std::string>(j, "outcome", what);
  s.predictors = get<std::vector<std::string>>(j, "predictors", what);
  return s;
}

Json to_json(const ModelSpec& spec) {
  return {{"id", spec.id}, {"family", to_string(spec.family)}, {"outcome", spec.outcome}, {"predictors", spec.predictors}};
}

Policy policy_from_json(const Json& j) {
  constexpr std::string_view what = "policy";
  require_object(j, what);
  reject_unknown(j, {"band", "cap", "substitute_threshold", "protected", "weights", "rule"}, what);
  Policy p;
  if (auto band = get_optional<double>(j, "band", what)) p.equivalence_band = *band;
  p.cap = get_optional<double>(j, "cap", what);
  if (auto t = get_optional<double>(j, "substitute_threshold", what)) p.substitute_threshold = *t;
  if (auto prot = get_optional<std::vector<std::string>>(j, "protected", what)) p.protected_columns = *prot;
  p.weights = get_optional<std::map<std::string, double>>(j, "weights", what);
  if (auto rule = get_optional<std::string>(j, "rule", what)) p.rule = parse_rule_kind(*rule);
  p.validate();
  return p;
}

Json to_json(const Policy& p) {
  return {{"band", p.equivalence_band},
          {"cap", optional_json(p.cap)},
          {"substitute_threshold", p.substitute_threshold},
          {"protected", p.protected_columns},
          {"weights", p.weights ? Json(*p.weights) : Json(nullptr)},
          {"rule", p.rule ? Json(to_string(*p.rule)) : Json(nullptr)}};
}

ProxyMeasurement measurement_from_json(const Json& j) {
  constexpr std::string_view what = "measurement";
  require_object(j, what);
  reject_unknown(j, {"model_id", "semi_partial"}, what);
  return {get<std::string>(j, "model_id", what), get<double>(j, "semi_partial", what)};
}

Commitment commitment_from_json(const Json& j) {
  constexpr std::string_view what = "commitment";
  require_object(j, what);
  reject_unknown(j, {"model_id", "digest", "timestamp"}, what);
  Commitment c;
  c.model_id = get<std::string>(j, "model_id", what);
  c.digest = get<std::string>(j, "digest", what);
  c.timestamp = get_optional<std::string>(j, "timestamp", what).value_or("");
  return c;
}

Json to_json(const Commitment& c) { return {{"model_id", c.model_id}, {"digest", c.digest}, {"timestamp", c.timestamp}}; }

Json to_json(const Accuracy& a) { return {{"metric", a.metric()}, {"value", number(a.value)}}; }

Json to_json(const ScoredModel& s) {
  return {{"id", s.id},
          {"accuracy", to_json(s.accuracy)},
          {"average_proxy_power", s.average_proxy_power ? number(*s.average_proxy_power) : Json("unmeasurable")},
          {"predictor_count", s.predictor_count},
          {"semi_partial", number_map(s.semi_partial)}};
}

Json to_json(const TrailStep& t) {
  Json values = Json::array();
  for (double v : t.values) values.push_back(number(v));
  return {{"criterion", t.criterion}, {"models", t.models}, {"values", values}, {"result", t.result}};
}

Json to_json(const Violation& v) {
  return {{"variable", v.variable},
          {"protected_attribute", v.protected_attribute.empty() ? Json(nullptr) : Json(v.protected_attribute)},
          {"kind", v.kind},
          {"importance", number(v.importance)},
          {"forward_rate", number(v.forward_rate)},
          {"reverse_rate", number(v.reverse_rate)},
          {"affected_fraction", number(v.affected_fraction)}};
}

Json to_json(const Verdict& v) {
  Json trail = Json::array();
  for (const auto& t : v.trail) trail.push_back(to_json(t));
  Json violations = Json::array();
  for (const auto& x : v.violations) violations.push_back(to_json(x));
  Json scored = Json::array();
  for (const auto& s : v.scored) scored.push_back(to_json(s));
  return {{"rule", to_string(v.rule)},
          {"winner", v.winner},
          {"margins",
           {{"accuracy_gap", optional_json(v.margins.accuracy_gap)},
            {"proxy_gap", optional_json(v.margins.proxy_gap)},
            {"variable_count_gap", optional_json(v.margins.variable_count_gap)}}},
          {"trail", trail},
          {"violations", violations},
          {"non_compliant", v.non_compliant},
          {"scored", scored}};
}

Json to_json(const ProxyPowerReport& r) {
  Json vars = Json::array();
  for (const auto& e : r.per_variable) {
    vars.push_back({{"variable", e.variable},
                    {"importance", number(e.importance)},
                    {"association", number_map(e.association_to_protected)},
                    {"association_measure", e.association_measure},
                    {"intuitive_product", number_map(e.intuitive_product)}});
  }
  return {{"model_id", r.model_id},
          {"family", to_string(r.family)},
          {"predictor_count", r.predictor_count},
          {"base_fit", number(r.base_fit)},
          {"per_variable", vars},
          {"semi_partial", number_map(r.semi_partial)},
          {"semi_partial_raw", number_map(r.semi_partial_raw)},
          {"total_intuitive", number_map(r.total_intuitive)},
          {"average_proxy_power", number(r.average_proxy_power)},
          {"weights", r.weights ? number_map(*r.weights) : Json(nullptr)},
          {"evaluation_set", to_string(r.evaluation_set)}};
}

Json to_json(const SubstituteFinding& f) {
  return {{"variable", f.variable},
          {"protected_attribute", f.protected_attribute},
          {"forward_rate", number(f.forward_rate)},
          {"reverse_rate", number(f.reverse_rate)},
          {"symmetric", f.symmetric},
          {"near_perfect", f.near_perfect},
          {"affected_fraction", number(f.affected_fraction)},
          {"binned", f.binned},
          {"threshold", f.threshold}};
}

Json to_json(const ScreeningReport& r) {
  return {{"group", r.group_label},
          {"selection_rate_0", number(r.selection_rate_0)},
          {"selection_rate_1", number(r.selection_rate_1)},
          {"members_0", r.members_0},
          {"members_1", r.members_1},
          {"ratio", number(r.ratio)},
          {"test", to_string(r.test)},
          {"statistic", number(r.statistic)},
          {"p_value", number(r.p_value)},
          {"flagged", r.flagged},
          {"caveat", r.caveat}};
}

Json to_json(const CompetitionResult& r) {
  Json ranked = Json::array();
  for (const auto& e : r.ranked) {
    ranked.push_back({{"party", e.party},
                      {"model_id", e.model_id},
                      {"accuracy", to_json(e.accuracy)},
                      {"average_proxy_power", e.average_proxy_power ? number(*e.average_proxy_power) : Json("unmeasurable")},
                      {"predictor_count", e.predictor_count},
                      {"semi_partial", number_map(e.semi_partial)},
                      {"coefficients", number_map(e.coefficients)}});
  }
  Json trail = Json::array();
  for (const auto& t : r.trail) trail.push_back(to_json(t));
  Json dq = Json::array();
  for (const auto& d : r.disqualified) dq.push_back({{"party", d.party}, {"model_id", d.model_id}, {"reason", d.reason}});
  return {{"lockbox_digest", r.lockbox_digest}, {"ranked", ranked}, {"winner", r.winner}, {"trail", trail},
          {"disqualified", dq}};
}

Json to_json(const OpaqueCompetitionResult& r) {
  Json ranked = Json::array();
  for (const auto& e : r.ranked) {
    Json screening = Json::array();
    for (const auto& s : e.screening) screening.push_back(to_json(s));
    ranked.push_back({{"party", e.party},
                      {"model_id", e.model_id},
                      {"accuracy", to_json(e.accuracy)},
                      {"average_proxy_power", "unmeasurable"},
                      {"worst_selection_rate_ratio", number(e.worst_ratio)},
                      {"screening", screening}});
  }
  Json trail = Json::array();
  for (const auto& t : r.trail) trail.push_back(to_json(t));
  return {{"lockbox_digest", r.lockbox_digest}, {"ranked", ranked}, {"winner", r.winner}, {"trail", trail}};
}

Json to_json(const LockBoxSplit& s) {
  return {{"seed", s.seed},
          {"test_fraction", s.test_fraction},
          {"train_rows", s.train_indices.size()},
          {"test_rows", s.test_indices.size()},
          {"digest", s.digest}};
}

Json wrap_report(Json report, std::string generated_at) {
  return {{"envelope", {{"generated_at", std::move(generated_at)}}}, {"report", std::move(report)}};
}

std::string render_markdown(const Json& document) {
  std::ostringstream out;
  const Json& report = document.contains("report") ? document.at("report") : document;
  const std::string title = report.contains("command") ? report.at("command").get<std::string>() : "report";
  out << "# proxyaudit " << title << "\n\n";
  if (document.contains("envelope")) out << "Generated " << cell_text(document.at("envelope").value("generated_at", Json(""))) << "\n\n";
  if (report.is_object()) {
    for (const auto& [k, v] : report.items()) {
      if (k == "command") continue;
      out << "## " << k << "\n\n";
      render(out, v, 1);
    }
  } else {
    render(out, report, 1);
  }
  std::string text = out.str();
  while (text.size() > 1 && text[text.size() - 1] == '\n' && text[text.size() - 2] == '\n') text.pop_back();
  return text;
}

}  // namespace proxyaudit
