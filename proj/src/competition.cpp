#include "proxyaudit/competition.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <limits>
#include <set>

#include "json.hpp"

#include "proxyaudit/digest.hpp"
#include "proxyaudit/error.hpp"
#include "proxyaudit/proxy.hpp"

namespace proxyaudit {

namespace {

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

void require_well_formed(const ModelSpec& spec) {
  if (spec.id.empty()) throw InputError("model spec has an empty id");
  if (spec.outcome.empty()) throw InputError("model '" + spec.id + "' has no outcome");
  std::set<std::string> seen;
  for (const auto& p : spec.predictors) {
    if (p.empty()) throw InputError("model '" + spec.id + "' has an empty predictor name");
    if (p == spec.outcome) throw InputError("model '" + spec.id + "' uses its outcome as a predictor");
    if (!seen.insert(p).second) throw InputError("model '" + spec.id + "' lists predictor '" + p + "' twice");
  }
}

double oriented(const Accuracy& a) { return a.orientation == Orientation::higher_is_better ? a.value : -a.value; }

long long cell(double value, double width) { return static_cast<long long>(std::floor(value / width + 1e-9)); }

}  // namespace

std::string canonical_spec_json(const ModelSpec& spec) {
  auto predictors = spec.predictors;
  std::sort(predictors.begin(), predictors.end());
  nlohmann::json j;
  j["family"] = std::string(to_string(spec.family));
  j["id"] = spec.id;
  j["outcome"] = spec.outcome;
  j["predictors"] = predictors;
  return j.dump();
}

Commitment commit_model(const ModelSpec& spec) {
  require_well_formed(spec);
  return {spec.id, sha256_hex(canonical_spec_json(spec)), utc_now()};
}

bool verify_commitment(const ModelSpec& spec, const Commitment& c) {
  return sha256_hex(canonical_spec_json(spec)) == c.digest;
}

CompetitionResult run_competition(const Dataset& d, const LockBoxSplit& split, std::span<const Submission> submissions,
                                  const Policy& policy) {
  policy.validate();
  if (submissions.size() < 2) throw InputError("a competition needs at least two submissions");
  if (!verify_lockbox(d, split)) throw InputError("lock-box tampered: digest does not match the data");

  // Canonical processing order keeps the result independent of input order.
  std::vector<const Submission*> order;
  for (const auto& s : submissions) order.push_back(&s);
  std::sort(order.begin(), order.end(), [](const Submission* a, const Submission* b) {
    return std::tie(a->party, a->spec.id) < std::tie(b->party, b->spec.id);
  });
  const std::string& outcome = order.front()->spec.outcome;
  const Family family = order.front()->spec.family;

  const auto train = d.subset(split.train_indices);
  const auto lockbox = d.subset(split.test_indices);

  CompetitionResult result;
  result.lockbox_digest = split.digest;
  std::vector<std::pair<RankedEntry, ScoredModel>> scored;
  for (const auto* s : order) {
    const auto disqualify = [&](std::string reason) {
      result.disqualified.push_back({s->party, s->spec.id, std::move(reason)});
    };
    if (s->commitment && !verify_commitment(s->spec, *s->commitment)) {
      disqualify("retrofit suspected: commitment mismatch");
      continue;
    }
    if (s->spec.outcome != outcome || s->spec.family != family) {
      disqualify("outcome or family differs from the competition's ('" + outcome + "', " +
                 std::string(to_string(family)) + ")");
      continue;
    }
    try {
      validate(s->spec, d.schema());
      const auto m = fit(train, s->spec);
      const auto report =
          build_proxy_report(train, lockbox, s->spec, policy.protected_columns, EvaluationSet::lockbox, policy.weights);
      RankedEntry e;
      e.party = s->party;
      e.model_id = s->spec.id;
      e.accuracy = mean_accuracy(m, lockbox);
      e.average_proxy_power = report.average_proxy_power;
      e.predictor_count = s->spec.predictors.size();
      e.semi_partial = report.semi_partial;
      e.coefficients = m.coefficient_map();
      ScoredModel sm{e.model_id, e.accuracy, e.average_proxy_power, e.predictor_count, e.semi_partial};
      scored.emplace_back(std::move(e), std::move(sm));
    } catch (const std::exception& ex) {
      disqualify(std::string("fit failed: ") + ex.what());
    }
  }

  std::stable_sort(scored.begin(), scored.end(), [&](const auto& a, const auto& b) {
    const auto pref = lexicographic_compare(a.second, b.second, policy).preference;
    if (pref != Preference::equal) return pref == Preference::first;
    return a.first.party < b.first.party;
  });
  for (std::size_t i = 0; i + 1 < scored.size(); ++i) {
    const auto& a = scored[i];
    const auto& b = scored[i + 1];
    auto decision = lexicographic_compare(a.second, b.second, policy);
    result.trail.push_back(decision.step);
    if (decision.preference == Preference::equal) {
      result.trail.push_back({"party", {a.first.party, b.first.party}, {}, a.first.party});
    }
  }
  for (auto& [entry, sm] : scored) result.ranked.push_back(std::move(entry));
  result.winner = result.ranked.empty() ? "none" : result.ranked.front().party;
  return result;
}

OpaqueCompetitionResult run_opaque_competition(const Dataset& d, const LockBoxSplit& split,
                                               std::span<const OpaqueSubmission> submissions, Family family,
                                               const Policy& policy) {
  policy.validate();
  if (submissions.size() < 2) throw InputError("a competition needs at least two submissions");
  if (!verify_lockbox(d, split)) throw InputError("lock-box tampered: digest does not match the data");
  const auto lockbox = d.subset(split.test_indices);
  const Eigen::VectorXd& y = lockbox.outcome();

  OpaqueCompetitionResult result;
  result.lockbox_digest = split.digest;
  for (const auto& s : submissions) {
    if (s.predictions.size() != lockbox.rows()) {
      throw InputError("submission '" + s.model_id + "' has " + std::to_string(s.predictions.size()) +
                       " predictions for " + std::to_string(lockbox.rows()) + " lock-box rows");
    }
    if (!s.predictions.allFinite()) throw InputError("submission '" + s.model_id + "' has non-finite predictions");
    OpaqueEntry e;
    e.party = s.party;
    e.model_id = s.model_id;
    if (family == Family::ols) {
      e.accuracy = {(y - s.predictions).cwiseAbs().mean(), Orientation::lower_is_better};
    } else {
      const Eigen::ArrayXd cls = (s.predictions.array() >= 0.5).cast<double>();
      e.accuracy = {(cls == y.array()).cast<double>().mean(), Orientation::higher_is_better};
    }
    const auto decisions = binary_decisions(s.predictions, family);
    e.screening = screen_by_protected(lockbox, decisions, policy);
    for (const auto& r : e.screening) e.worst_ratio = std::min(e.worst_ratio, r.ratio);
    result.ranked.push_back(std::move(e));
  }

  const auto rank_key = [&](const OpaqueEntry& e) {
    const long long acc = policy.equivalence_band > 0.0 ? cell(oriented(e.accuracy), policy.equivalence_band) : 0;
    return std::make_tuple(-acc, policy.equivalence_band > 0.0 ? 0.0 : -oriented(e.accuracy),
                           -cell(e.worst_ratio, 1e-6), e.model_id, e.party);
  };
  std::sort(result.ranked.begin(), result.ranked.end(),
            [&](const OpaqueEntry& a, const OpaqueEntry& b) { return rank_key(a) < rank_key(b); });
  for (std::size_t i = 0; i + 1 < result.ranked.size(); ++i) {
    const auto& a = result.ranked[i];
    const auto& b = result.ranked[i + 1];
    const auto ka = rank_key(a);
    const auto kb = rank_key(b);
    std::string criterion = "party";
    std::vector<double> values;
    if (std::get<0>(ka) != std::get<0>(kb) || std::get<1>(ka) != std::get<1>(kb)) {
      criterion = "accuracy";
      values = {a.accuracy.value, b.accuracy.value};
    } else if (std::get<2>(ka) != std::get<2>(kb)) {
      criterion = "selection_rate_ratio";
      values = {a.worst_ratio, b.worst_ratio};
    } else if (std::get<3>(ka) != std::get<3>(kb)) {
      criterion = "id";
    }
    result.trail.push_back({criterion, {a.model_id, b.model_id}, values, a.model_id});
  }
  result.winner = result.ranked.front().party;
  return result;
}

}  // namespace proxyaudit
