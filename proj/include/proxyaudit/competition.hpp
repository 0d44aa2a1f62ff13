#pragma once

#include <Eigen/Core>

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "proxyaudit/data.hpp"
#include "proxyaudit/glm.hpp"
#include "proxyaudit/rules.hpp"

namespace proxyaudit {

/// Published digest of a model spec. The timestamp is informational and not hashed.
struct Commitment {
  std::string model_id;
  std::string digest;  // SHA-256, lowercase hex
  std::string timestamp;
};

/// {"family":..,"id":..,"outcome":..,"predictors":[sorted]} with sorted keys
/// and no whitespace.
std::string canonical_spec_json(const ModelSpec& spec);

Commitment commit_model(const ModelSpec& spec);
bool verify_commitment(const ModelSpec& spec, const Commitment& c);

struct Submission {
  std::string party;
  ModelSpec spec;
  std::optional<Commitment> commitment;
};

struct RankedEntry {
  std::string party;
  std::string model_id;
  Accuracy accuracy;
  std::optional<double> average_proxy_power;
  std::size_t predictor_count = 0;
  std::map<std::string, double> semi_partial;
  std::map<std::string, double> coefficients;  // as fitted on the train rows
};

struct Disqualification {
  std::string party;
  std::string model_id;
  std::string reason;
};

struct CompetitionResult {
  std::string lockbox_digest;
  std::vector<RankedEntry> ranked;
  std::string winner;  // party, or "none" when every submission was disqualified
  std::vector<TrailStep> trail;
  std::vector<Disqualification> disqualified;
};

/// Fits each submission on the split's train rows and scores it on the
/// lock-box rows. Throws InputError "lock-box tampered" when the split digest
/// does not match `d`. Commitment mismatches and fit failures disqualify.
/// Ranking is lexicographic_compare, then party name.
CompetitionResult run_competition(const Dataset& d, const LockBoxSplit& split, std::span<const Submission> submissions,
                                  const Policy& policy);

/// Accuracy-only variant for parties that submit lock-box predictions instead
/// of specs. Proxy power is unmeasurable; entries within the accuracy band are
/// ordered by their worst selection-rate ratio across protected groups.
struct OpaqueSubmission {
  std::string party;
  std::string model_id;
  Eigen::VectorXd predictions;  // one per lock-box row, ascending row order
};

struct OpaqueEntry {
  std::string party;
  std::string model_id;
  Accuracy accuracy;
  double worst_ratio = 1.0;
  std::vector<ScreeningReport> screening;
};

struct OpaqueCompetitionResult {
  std::string lockbox_digest;
  std::vector<OpaqueEntry> ranked;
  std::string winner;
  std::vector<TrailStep> trail;
};

OpaqueCompetitionResult run_opaque_competition(const Dataset& d, const LockBoxSplit& split,
                                               std::span<const OpaqueSubmission> submissions, Family family,
                                               const Policy& policy);

}  // namespace proxyaudit
