#pragma once

#include <string>
#include <string_view>

#include <json.hpp>

#include "proxyaudit/competition.hpp"
#include "proxyaudit/data.hpp"
#include "proxyaudit/glm.hpp"
#include "proxyaudit/proxy.hpp"
#include "proxyaudit/rules.hpp"

namespace proxyaudit {

using Json = nlohmann::json;

/// Parses JSON text; syntax errors become InputError naming `what`.
Json parse_json(std::string_view text, std::string_view what);

// Readers reject unknown keys and wrong types with InputError.

/// {"id", "family": "ols"|"logistic", "outcome", "predictors": [..]}
ModelSpec spec_from_json(const Json& j);
Json to_json(const ModelSpec& spec);

/// {"band", "cap", "substitute_threshold", "protected", "weights", "rule"}; every key optional.
Policy policy_from_json(const Json& j);
Json to_json(const Policy& policy);

/// {"model_id", "semi_partial"}
ProxyMeasurement measurement_from_json(const Json& j);

/// {"model_id", "digest", "timestamp"}
Commitment commitment_from_json(const Json& j);
Json to_json(const Commitment& c);

Json to_json(const Accuracy& a);
Json to_json(const ScoredModel& s);
Json to_json(const TrailStep& t);
Json to_json(const Violation& v);
Json to_json(const Verdict& v);
Json to_json(const ProxyPowerReport& r);
Json to_json(const SubstituteFinding& f);
Json to_json(const ScreeningReport& r);
Json to_json(const CompetitionResult& r);
Json to_json(const OpaqueCompetitionResult& r);
/// Seed, fraction, sizes and digest; the index lists are left out.
Json to_json(const LockBoxSplit& s);

/// {"envelope": {"generated_at": ..}, "report": report}. Only the envelope
/// varies between runs on identical inputs.
Json wrap_report(Json report, std::string generated_at);

/// Markdown view of a wrapped report, derived from the JSON alone.
std::string render_markdown(const Json& document);

}  // namespace proxyaudit
