#include "proxyaudit/scenarios.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "proxyaudit/error.hpp"
#include "proxyaudit/random.hpp"

namespace proxyaudit {

namespace {

using Eigen::VectorXd;

template <typename T>
void shuffle(std::vector<T>& v, SplitMix64& rng) {
  for (std::size_t i = v.size(); i-- > 1;) std::swap(v[i], v[rng.below(i + 1)]);
}

template <std::size_t K>
int draw_category(SplitMix64& rng, const std::array<double, K>& probs) {
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t k = 0; k + 1 < K; ++k) {
    acc += probs[k];
    if (u < acc) return static_cast<int>(k);
  }
  return static_cast<int>(K - 1);
}

double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }

double binary_entropy(double p) { return -(p * std::log(p) + (1.0 - p) * std::log(1.0 - p)); }

Index rows_for(const ScenarioConfig& cfg) {
  const Index n = cfg.n.value_or(default_rows(cfg.name));
  if (n < minimum_rows(cfg.name)) {
    throw InputError(std::string(to_string(cfg.name)) + " needs at least " + std::to_string(minimum_rows(cfg.name)) +
                     " rows, got " + std::to_string(n));
  }
  return n;
}

ColumnSchema column(std::string name, ColumnKind kind, ColumnRole role, std::vector<std::string> categories = {}) {
  return {std::move(name), kind, role, std::move(categories)};
}

// Share of rows whose binary outcome should be the rare class so that a
// predictor with 5% within-level error attains McFadden R^2 = target.
double calibrated_prevalence(double error_rate, double target) {
  const double goal = binary_entropy(error_rate) / (1.0 - target);
  double lo = error_rate;
  double hi = 0.5;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    (binary_entropy(mid) < goal ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

std::string_view to_string(ScenarioName s) {
  switch (s) {
    case ScenarioName::marital_lending: return "marital_lending";
    case ScenarioName::accent_origin: return "accent_origin";
    case ScenarioName::segregated_school: return "segregated_school";
    case ScenarioName::hiring_major: return "hiring_major";
    case ScenarioName::digital_footprint: return "digital_footprint";
  }
  return "marital_lending";
}

ScenarioName parse_scenario_name(std::string_view text) {
  for (auto s : {ScenarioName::marital_lending, ScenarioName::accent_origin, ScenarioName::segregated_school,
                 ScenarioName::hiring_major, ScenarioName::digital_footprint}) {
    if (to_string(s) == text) return s;
  }
  throw InputError("unknown scenario '" + std::string(text) + "'");
}

Index default_rows(ScenarioName s) {
  switch (s) {
    case ScenarioName::marital_lending: return 5000;
    case ScenarioName::accent_origin: return 20000;
    case ScenarioName::segregated_school: return 10000;
    case ScenarioName::hiring_major: return 2000;
    case ScenarioName::digital_footprint: return 100000;
  }
  return 1000;
}

double default_noise(ScenarioName s) { return s == ScenarioName::marital_lending ? 0.02 : 0.0; }

Index minimum_rows(ScenarioName s) {
  switch (s) {
    case ScenarioName::marital_lending: return 100;
    case ScenarioName::digital_footprint: return 10000;
    default: return 1000;
  }
}

Dataset gen_marital_lending(const ScenarioConfig& cfg) {
  const Index n = rows_for(cfg);
  const double noise = cfg.noise.value_or(default_noise(cfg.name));
  if (!(noise >= 0.0)) throw InputError("noise must be non-negative");
  const double flip = std::min(noise, 1.0);

  auto marital_rng = substream(cfg.seed, "marital_status");
  auto name_rng = substream(cfg.seed, "name_change");
  auto joint_rng = substream(cfg.seed, "joint_accounts");
  auto default_rng = substream(cfg.seed, "default");

  VectorXd marital(n), name_change(n), joint(n), defaulted(n);
  for (Index i = 0; i < n; ++i) {
    const int m = marital_rng.bernoulli(0.35) ? 1 : 0;
    marital[i] = m;
    name_change[i] = m ^ (name_rng.bernoulli(flip) ? 1 : 0);
    joint[i] = 2.0 * (1 - (m ^ (joint_rng.bernoulli(flip) ? 1 : 0)));
    defaulted[i] = default_rng.bernoulli(m ? 0.30 : 0.05) ? 1.0 : 0.0;
  }
  Schema schema({
      column("marital_status", ColumnKind::binary, ColumnRole::protected_attribute, {"married", "divorced"}),
      column("name_change", ColumnKind::binary, ColumnRole::predictor, {"no", "yes"}),
      column("joint_accounts", ColumnKind::continuous, ColumnRole::predictor),
      column("default", ColumnKind::binary, ColumnRole::outcome, {"repaid", "defaulted"}),
  });
  return Dataset(std::move(schema), {marital, name_change, joint, defaulted});
}

Dataset gen_accent_origin(const ScenarioConfig& cfg) {
  const Index n = rows_for(cfg);
  constexpr double kError = 0.05;
  const std::vector<std::string> regional = {"boston", "californian", "midwestern", "new_york", "southern", "texan"};
  const std::vector<std::string> foreign = {"hindi", "mandarin", "spanish"};

  const double prevalence = calibrated_prevalence(kError, 0.22);
  const double foreign_share = (prevalence - kError) / (1.0 - 2.0 * kError);
  const Index accented = std::llround(static_cast<double>(n) * foreign_share);

  std::vector<std::string> levels = regional;
  levels.insert(levels.end(), foreign.begin(), foreign.end());

  // Exact per-level counts, then exactly round(5%) of each level on the minority side.
  std::vector<std::pair<int, int>> rows;
  rows.reserve(static_cast<std::size_t>(n));
  const auto fill = [&](int first_level, int level_count, Index total, int majority) {
    for (int k = 0; k < level_count; ++k) {
      const Index count = total / level_count + (k < total % level_count ? 1 : 0);
      const Index minority = std::llround(kError * static_cast<double>(count));
      for (Index r = 0; r < count; ++r) rows.emplace_back(first_level + k, r < minority ? 1 - majority : majority);
    }
  };
  fill(0, static_cast<int>(regional.size()), n - accented, 0);
  fill(static_cast<int>(regional.size()), static_cast<int>(foreign.size()), accented, 1);

  auto row_rng = substream(cfg.seed, "rows");
  shuffle(rows, row_rng);

  VectorXd accent(n), origin(n);
  for (Index i = 0; i < n; ++i) {
    accent[i] = rows[static_cast<std::size_t>(i)].first;
    origin[i] = rows[static_cast<std::size_t>(i)].second;
  }
  Schema schema({
      column("accent", ColumnKind::categorical, ColumnRole::predictor, levels),
      column("national_origin", ColumnKind::binary, ColumnRole::outcome, {"native_born", "foreign_born"}),
  });
  return Dataset(std::move(schema), {accent, origin});
}

Dataset gen_segregated_school(const ScenarioConfig& cfg) {
  const Index n = rows_for(cfg);
  const double share = cfg.segregated_share.value_or(0.20);
  if (!(share >= 0.0 && share <= 1.0)) throw InputError("segregated_share must lie in [0, 1]");

  const std::vector<std::string> races = {"asian", "black", "hispanic", "white"};
  constexpr std::array<double, 4> kRaceShare = {0.08, 0.20, 0.12, 0.60};
  constexpr std::array<double, 4> kSatShift = {60.0, -60.0, -30.0, 40.0};
  constexpr std::array<double, 4> kGpaShift = {0.12, -0.15, -0.08, 0.10};
  constexpr int kBlack = 1;
  constexpr int kWhite = 3;
  constexpr int kMixedSchools = 20;

  const Index segregated = std::llround(static_cast<double>(n) * share);
  const Index seg_schools = segregated == 0 ? 0 : std::min<Index>(segregated, std::clamp<Index>(segregated / 10, 2, 10));
  const Index white_only = (seg_schools + 1) / 2;

  std::vector<std::string> schools;
  for (int k = 1; k <= kMixedSchools; ++k) schools.push_back((k < 10 ? "mixed_0" : "mixed_") + std::to_string(k));
  for (Index k = 0; k < seg_schools; ++k) {
    const bool white = k < white_only;
    const Index number = (white ? k : k - white_only) + 1;
    schools.push_back(std::string(white ? "white_only_" : "black_only_") + (number < 10 ? "0" : "") +
                      std::to_string(number));
  }

  auto race_rng = substream(cfg.seed, "race");
  auto school_rng = substream(cfg.seed, "high_school");
  std::vector<std::pair<int, int>> rows;  // (race, school)
  rows.reserve(static_cast<std::size_t>(n));
  for (Index r = 0; r < segregated; ++r) {
    const Index school = r % seg_schools;
    rows.emplace_back(school < white_only ? kWhite : kBlack, static_cast<int>(kMixedSchools + school));
  }
  for (Index r = segregated; r < n; ++r) {
    rows.emplace_back(draw_category(race_rng, kRaceShare), static_cast<int>(school_rng.below(kMixedSchools)));
  }
  auto row_rng = substream(cfg.seed, "rows");
  shuffle(rows, row_rng);

  auto sat_rng = substream(cfg.seed, "sat");
  auto gpa_rng = substream(cfg.seed, "gpa");
  auto admit_rng = substream(cfg.seed, "admit");
  VectorXd race(n), school(n), sat(n), gpa(n), admit(n);
  for (Index i = 0; i < n; ++i) {
    const auto [r, s] = rows[static_cast<std::size_t>(i)];
    race[i] = r;
    school[i] = s;
    sat[i] = sat_rng.normal(1050.0 + kSatShift[static_cast<std::size_t>(r)], 120.0);
    gpa[i] = std::clamp(gpa_rng.normal(3.1 + kGpaShift[static_cast<std::size_t>(r)], 0.35), 0.0, 4.0);
    admit[i] = admit_rng.bernoulli(logistic((sat[i] - 1050.0) / 80.0 + 2.5 * (gpa[i] - 3.1))) ? 1.0 : 0.0;
  }
  Schema schema({
      column("race", ColumnKind::categorical, ColumnRole::protected_attribute, races),
      column("high_school", ColumnKind::categorical, ColumnRole::predictor, schools),
      column("sat", ColumnKind::continuous, ColumnRole::predictor),
      column("gpa", ColumnKind::continuous, ColumnRole::predictor),
      column("admit", ColumnKind::binary, ColumnRole::outcome, {"rejected", "admitted"}),
  });
  return Dataset(std::move(schema), {race, school, sat, gpa, admit});
}

Dataset gen_hiring_major(const ScenarioConfig& cfg) {
  const Index n = rows_for(cfg);
  if (n % 2 != 0) throw InputError("hiring_major needs an even row count (applicants come in pairs)");
  const Index pairs = n / 2;

  auto a_rng = substream(cfg.seed, "skill_a");
  auto b_rng = substream(cfg.seed, "skill_b");
  auto major_rng = substream(cfg.seed, "undergrad_major");
  auto profit_rng = substream(cfg.seed, "profit");

  VectorXd sex(n), major(n), skill_a(n), skill_b(n), profit(n);
  for (Index p = 0; p < pairs; ++p) {
    const double a = a_rng.normal();
    const double b = b_rng.normal();
    for (Index j = 0; j < 2; ++j) {
      sex[2 * p + j] = j == 0 ? 1.0 : 0.0;
      skill_a[2 * p + j] = a;
      skill_b[2 * p + j] = b;
    }
  }
  // Exact engineering counts per sex: 90% of men, 10% of women. Level 0 is engineering.
  for (int male = 1; male >= 0; --male) {
    std::vector<Index> members;
    for (Index p = 0; p < pairs; ++p) members.push_back(2 * p + (male ? 0 : 1));
    shuffle(members, major_rng);
    const Index engineers = std::llround((male ? 0.9 : 0.1) * static_cast<double>(pairs));
    for (std::size_t k = 0; k < members.size(); ++k) major[members[k]] = static_cast<Index>(k) < engineers ? 0.0 : 1.0;
  }
  for (Index i = 0; i < n; ++i) {
    const double engineering = major[i] == 0.0 ? 1.0 : 0.0;
    profit[i] = 194.5 + 40.0 * skill_a[i] + 20.0 * skill_b[i] + 11.0 * engineering + profit_rng.normal(0.0, 20.0);
  }
  Schema schema({
      column("sex", ColumnKind::binary, ColumnRole::protected_attribute, {"female", "male"}),
      column("undergrad_major", ColumnKind::categorical, ColumnRole::predictor, {"engineering", "humanities"}),
      column("skill_a", ColumnKind::continuous, ColumnRole::predictor),
      column("skill_b", ColumnKind::continuous, ColumnRole::predictor),
      column("profit", ColumnKind::continuous, ColumnRole::outcome),
  });
  return Dataset(std::move(schema), {sex, major, skill_a, skill_b, profit});
}

Dataset gen_digital_footprint(const ScenarioConfig& cfg) {
  const Index n = rows_for(cfg);
  const std::vector<std::string> races = {"asian", "white", "other", "hispanic", "black"};
  constexpr std::array<double, 5> kRaceShare = {0.06, 0.60, 0.04, 0.18, 0.12};
  constexpr std::array<double, 5> kCreditMean = {745.0, 734.0, 732.0, 701.0, 677.0};
  constexpr std::array<double, 5> kIncomeMedian = {75.0, 70.0, 60.0, 50.0, 45.0};
  constexpr std::array<double, 5> kMobileBase = {0.12, 0.15, 0.30, 0.60, 0.75};
  constexpr std::array<double, 3> kDefaultRate = {0.0074, 0.0091, 0.0214};  // desktop, tablet, mobile

  auto race_rng = substream(cfg.seed, "race");
  auto income_rng = substream(cfg.seed, "income");
  auto credit_rng = substream(cfg.seed, "credit_score");
  auto age_rng = substream(cfg.seed, "age");
  auto device_rng = substream(cfg.seed, "device");
  auto email_rng = substream(cfg.seed, "email_host");
  auto default_rng = substream(cfg.seed, "default");

  VectorXd race(n), income(n), credit(n), age(n), device(n), email(n), defaulted(n);
  for (Index i = 0; i < n; ++i) {
    const int r = draw_category(race_rng, kRaceShare);
    const auto ri = static_cast<std::size_t>(r);
    const double z = income_rng.normal();  // within-group income position
    race[i] = r;
    income[i] = kIncomeMedian[ri] * std::exp(0.35 * z);
    credit[i] = kCreditMean[ri] + 15.0 * z + credit_rng.normal(0.0, 15.0);
    age[i] = 21.0 + 49.0 * age_rng.uniform();

    const double mobile = std::clamp(kMobileBase[ri] - 0.08 * z, 0.02, 0.95);
    const double u = device_rng.uniform();
    const int dev = u < mobile ? 2 : (u < mobile + 0.10 ? 1 : 0);
    device[i] = dev;

    const double premium = std::clamp(0.20 + 0.10 * z, 0.02, 0.60);
    const double e = email_rng.uniform();
    email[i] = e < premium ? 3 : (e < premium + 0.30 ? 0 : (e < premium + 0.55 ? 1 : 2));

    defaulted[i] = default_rng.bernoulli(kDefaultRate[static_cast<std::size_t>(dev)]) ? 1.0 : 0.0;
  }
  Schema schema({
      column("race", ColumnKind::categorical, ColumnRole::protected_attribute, races),
      column("income", ColumnKind::continuous, ColumnRole::predictor),
      column("credit_score", ColumnKind::continuous, ColumnRole::predictor),
      column("age", ColumnKind::continuous, ColumnRole::predictor),
      column("device", ColumnKind::categorical, ColumnRole::predictor, {"desktop", "tablet", "mobile"}),
      column("email_host", ColumnKind::categorical, ColumnRole::predictor, {"gmail", "gmx", "web", "t-online"}),
      column("default", ColumnKind::binary, ColumnRole::outcome, {"repaid", "defaulted"}),
  });
  return Dataset(std::move(schema), {race, income, credit, age, device, email, defaulted});
}

Dataset generate(const ScenarioConfig& cfg) {
  switch (cfg.name) {
    case ScenarioName::marital_lending: return gen_marital_lending(cfg);
    case ScenarioName::accent_origin: return gen_accent_origin(cfg);
    case ScenarioName::segregated_school: return gen_segregated_school(cfg);
    case ScenarioName::hiring_major: return gen_hiring_major(cfg);
    case ScenarioName::digital_footprint: return gen_digital_footprint(cfg);
  }
  throw InputError("unknown scenario");
}

}  // namespace proxyaudit
