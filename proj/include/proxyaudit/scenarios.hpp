#pragma once

#include <cstdint>
#include <optional>
#include <string_view>

#include "proxyaudit/data.hpp"

namespace proxyaudit {

enum class ScenarioName { marital_lending, accent_origin, segregated_school, hiring_major, digital_footprint };

std::string_view to_string(ScenarioName s);
ScenarioName parse_scenario_name(std::string_view text);

/// Unset fields take the scenario's default (see default_rows / default_noise).
///
/// `noise` is the proxy flip probability in marital_lending and is ignored by
/// the other generators. `segregated_share` is the fraction of rows attending
/// single-race schools in segregated_school.
struct ScenarioConfig {
  ScenarioName name = ScenarioName::marital_lending;
  std::optional<Index> n;
  std::uint64_t seed = 42;
  std::optional<double> noise;
  std::optional<double> segregated_share;
};

Index default_rows(ScenarioName s);
double default_noise(ScenarioName s);
Index minimum_rows(ScenarioName s);

/// marital_status (protected, binary married/divorced), name_change and
/// joint_accounts (copies of marital status, each independently flipped with
/// probability `noise`), default (binary outcome, 30% if divorced, 5% otherwise).
Dataset gen_marital_lending(const ScenarioConfig& cfg);

/// accent (categorical: six regional levels 95% native-born, three foreign
/// levels 95% foreign-born) and national_origin (binary outcome). The foreign
/// accent share is set so the population McFadden R^2 of accent is 0.22.
Dataset gen_accent_origin(const ScenarioConfig& cfg);

/// race (protected), high_school (20 mixed schools plus single-race schools
/// holding exactly round(n * segregated_share) rows), sat and gpa (shifted by
/// race), admit (binary outcome driven by sat and gpa only).
Dataset gen_segregated_school(const ScenarioConfig& cfg);

/// sex (protected, binary female/male), undergrad_major (engineering for 90%
/// of men and 10% of women), skill_a, skill_b, profit (outcome, mean near 200).
/// Applicants come in male/female pairs sharing one skill profile, so a
/// skill-only ranking is sex-balanced.
Dataset gen_hiring_major(const ScenarioConfig& cfg);

/// race (protected, five groups), income, credit_score (group means
/// 745/734/732/701/677), age, device, email_host, default (binary outcome
/// driven by device alone: 0.74% desktop, 0.91% tablet, 2.14% mobile).
Dataset gen_digital_footprint(const ScenarioConfig& cfg);

Dataset generate(const ScenarioConfig& cfg);

}  // namespace proxyaudit
