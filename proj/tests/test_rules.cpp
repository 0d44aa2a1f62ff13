#include <doctest.h>

#include <algorithm>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "proxyaudit/error.hpp"
#include "proxyaudit/rules.hpp"
#include "proxyaudit/scenarios.hpp"

using namespace proxyaudit;
using doctest::Approx;

namespace {

ScoredModel scored(std::string id, double accuracy, double proxy, std::size_t count) {
  ScoredModel s;
  s.id = std::move(id);
  s.accuracy.value = accuracy;
  s.average_proxy_power = proxy;
  s.predictor_count = count;
  return s;
}

bool contains(const std::vector<std::string>& v, const std::string& x) {
  return std::find(v.begin(), v.end(), x) != v.end();
}

}  // namespace

TEST_CASE("policy validation") {
  Policy p;
  CHECK_NOTHROW(p.validate());
  p.cap = 0.0;
  CHECK_THROWS_AS(p.validate(), InputError);
  p.cap = 1.0;
  CHECK_NOTHROW(p.validate());
  p.equivalence_band = -0.1;
  CHECK_THROWS_AS(p.validate(), InputError);
  p.equivalence_band = 0.0;
  p.protected_columns = {"race", "race"};
  CHECK_THROWS_AS(p.validate(), InputError);
  p.protected_columns = {"race"};
  p.weights = std::map<std::string, double>{{"race", -1.0}};
  CHECK_THROWS_AS(p.validate(), InputError);
  CHECK(parse_rule_kind("capped") == RuleKind::capped);
  CHECK_THROWS_AS(parse_rule_kind("strict"), InputError);
}

TEST_CASE("capped rule") {
  Policy p;
  p.cap = 0.05;
  SUBCASE("one model over the cap loses") {
    const std::vector<ProxyMeasurement> m = {{"a", 0.04}, {"b", 0.06}};
    const auto v = capped_rule(m, p);
    CHECK(v.winner == "a");
    CHECK(v.non_compliant == std::vector<std::string>{"b"});
  }
  SUBCASE("differences under the cap are ignored") {
    const std::vector<ProxyMeasurement> m = {{"a", 0.03}, {"b", 0.04}};
    CHECK(capped_rule(m, p).winner == "tie");
  }
  SUBCASE("the cap itself is compliant") {
    const std::vector<ProxyMeasurement> m = {{"a", 0.05}, {"b", 0.02}};
    const auto v = capped_rule(m, p);
    CHECK(v.winner == "tie");
    CHECK(v.non_compliant.empty());
  }
  SUBCASE("all over the cap: lowest wins and all are flagged") {
    const std::vector<ProxyMeasurement> m = {{"a", 0.09}, {"b", 0.07}};
    const auto v = capped_rule(m, p);
    CHECK(v.winner == "b");
    CHECK(v.non_compliant.size() == 2);
    CHECK(v.trail.back().criterion == "lowest_over_cap");
  }
  SUBCASE("default cap") {
    Policy q;
    const std::vector<ProxyMeasurement> m = {{"a", 0.049}, {"b", 0.051}};
    CHECK(capped_rule(m, q).winner == "a");
  }
}

TEST_CASE("minimum proxy power among equivalent models") {
  const Policy p;
  SUBCASE("lower proxy power wins inside the band") {
    const std::vector<ScoredModel> s = {scored("a", 0.900, 0.08, 4), scored("b", 0.897, 0.05, 4)};
    const auto v = select_min_proxy_power(s, p);
    CHECK(v.winner == "b");
    CHECK(*v.margins.proxy_gap == Approx(0.03));
    CHECK(*v.margins.accuracy_gap == Approx(0.003));
    CHECK(v.trail.front().result == "all within equivalence band");
  }
  SUBCASE("models outside the band are excluded") {
    const std::vector<ScoredModel> s = {scored("a", 0.900, 0.08, 4), scored("b", 0.890, 0.01, 4)};
    const auto v = select_min_proxy_power(s, p);
    CHECK(v.winner == "a");
    CHECK(v.trail.front().result == "outside equivalence band: b");
  }
  SUBCASE("a gap exactly equal to the band is equivalent") {
    const std::vector<ScoredModel> s = {scored("a", 0.900, 0.08, 4), scored("b", 0.895, 0.01, 4)};
    CHECK(select_min_proxy_power(s, p).winner == "b");
  }
  SUBCASE("proxy ties fall to the smaller model") {
    const std::vector<ScoredModel> s = {scored("ten", 0.9, 0.05, 10), scored("five", 0.9, 0.05 + 1e-8, 5)};
    const auto v = select_min_proxy_power(s, p);
    CHECK(v.winner == "five");
    CHECK(*v.margins.variable_count_gap == Approx(5.0));
  }
  SUBCASE("full ties fall to the id") {
    const std::vector<ScoredModel> s = {scored("zeta", 0.9, 0.05, 5), scored("alpha", 0.9, 0.05, 5)};
    CHECK(select_min_proxy_power(s, p).winner == "alpha");
  }
  SUBCASE("lower-is-better accuracy") {
    auto a = scored("a", 10.0, 0.08, 3);
    auto b = scored("b", 10.004, 0.02, 3);
    a.accuracy.orientation = b.accuracy.orientation = Orientation::lower_is_better;
    const std::vector<ScoredModel> s = {a, b};
    CHECK(select_min_proxy_power(s, p).winner == "b");
  }
  SUBCASE("missing measurement is an input error") {
    auto a = scored("a", 0.9, 0.0, 3);
    a.average_proxy_power.reset();
    const std::vector<ScoredModel> s = {a, scored("b", 0.9, 0.01, 3)};
    CHECK_THROWS_AS(select_min_proxy_power(s, p), InputError);
  }
}

TEST_CASE("lexicographic comparison") {
  const Policy p;
  const auto a = scored("a", 0.9012, 0.05, 5);
  const auto b = scored("b", 0.9031, 0.05, 5);
  // Same accuracy cell, so the id decides.
  CHECK(lexicographic_compare(a, b, p).step.criterion == "id");
  CHECK(lexicographic_compare(a, scored("c", 0.91, 0.05, 5), p).preference == Preference::second);
  CHECK(lexicographic_compare(a, scored("c", 0.9012, 0.04, 9), p).preference == Preference::second);
  CHECK(lexicographic_compare(a, scored("c", 0.9012, 0.05, 4), p).step.criterion == "predictor_count");
  CHECK(lexicographic_compare(a, a, p).preference == Preference::equal);
  auto c = scored("c", 0.9, 0.05, 5);
  c.accuracy.orientation = Orientation::lower_is_better;
  CHECK_THROWS_AS(lexicographic_compare(a, c, p), InputError);
}

TEST_CASE("in-sample comparison requires two specs") {
  const auto d = oracle::random_regression(4, 3, 200);
  Policy p;
  p.protected_columns = {"g"};
  const std::vector<ModelSpec> one = {{"m", Family::ols, "y", {"x1"}}};
  CHECK_THROWS_AS(compare_min_proxy_power(d, one, p), InputError);
  const std::vector<ModelSpec> two = {{"m", Family::ols, "y", {"x1", "x2"}}, {"n", Family::ols, "y", {"x1", "b"}}};
  const auto v = compare_min_proxy_power(d, two, p);
  CHECK(v.scored.size() == 2);
  const auto split = lockbox_split(d, 0.3, 3);
  const auto held = compare_min_proxy_power(d, two, p, &split);
  CHECK(held.scored.size() == 2);
  auto bad = split;
  bad.digest[0] = bad.digest[0] == 'a' ? 'b' : 'a';
  CHECK_THROWS_AS(compare_min_proxy_power(d, two, p, &bad), InputError);
}

TEST_CASE("no-proxy rule on the segregated school scenario") {
  const auto d = gen_segregated_school({ScenarioName::segregated_school, std::nullopt, 42, std::nullopt, std::nullopt});
  Policy p;
  p.protected_columns = {"race"};
  const auto v = no_proxy_rule_check(d, ModelSpec{"s", Family::logistic, "admit", {"high_school", "sat", "gpa"}}, p);
  CHECK(v.winner == "tie");
  REQUIRE_FALSE(v.violations.empty());
  bool flagged_school = false;
  for (const auto& x : v.violations) {
    if (x.variable == "high_school" && x.kind == "prohibited_substitute") {
      flagged_school = true;
      CHECK(x.affected_fraction == Approx(0.2).epsilon(0.1));
    }
  }
  CHECK(flagged_school);
  CHECK(contains(v.non_compliant, "s"));
  CHECK_THROWS_AS(no_proxy_rule_check(d, ModelSpec{"r", Family::logistic, "admit", {"race", "sat"}}, p), InputError);
}

TEST_CASE("no-proxy rule marks weightless predictors superfluous") {
  const auto d = gen_marital_lending({ScenarioName::marital_lending, 2000, 42, 0.0, std::nullopt});
  Policy p;
  p.protected_columns = {"marital_status"};
  // joint_accounts duplicates name_change exactly, so one of them carries no weight.
  const auto v = no_proxy_rule_check(d, ModelSpec{"m", Family::logistic, "default", {"name_change", "joint_accounts"}}, p);
  bool superfluous = false;
  for (const auto& x : v.violations) superfluous = superfluous || x.kind == "superfluous";
  CHECK(superfluous);
}

TEST_CASE("disparate impact screen") {
  SUBCASE("60/40 rates flag at 0.667") {
    std::vector<int> sel, grp;
    for (int i = 0; i < 100; ++i) {
      grp.push_back(i < 50 ? 0 : 1);
      sel.push_back(i < 50 ? (i < 30 ? 1 : 0) : (i < 70 ? 1 : 0));
    }
    const auto r = disparate_impact_screen(sel, grp, Policy{});
    CHECK(r.ratio == Approx(2.0 / 3.0));
    CHECK(r.flagged);
    CHECK(r.test == TestKind::chi_square);
  }
  SUBCASE("small groups use Fisher exact") {
    const std::vector<int> grp = {0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
    const std::vector<int> sel = {1, 1, 1, 1, 0, 1, 0, 0, 0, 0};
    const auto r = disparate_impact_screen(sel, grp, Policy{});
    CHECK(r.test == TestKind::fisher_exact);
    CHECK(r.ratio == Approx(0.25));
    CHECK(r.p_value == Approx(oracle::fisher_enumeration(4, 1, 1, 4)));
  }
  SUBCASE("ratio at 0.8 is not flagged") {
    std::vector<int> sel, grp;
    for (int i = 0; i < 20; ++i) {
      grp.push_back(i < 10 ? 0 : 1);
      sel.push_back(i < 10 ? (i < 5 ? 1 : 0) : (i < 14 ? 1 : 0));
    }
    const auto r = disparate_impact_screen(sel, grp, Policy{});
    CHECK(r.ratio == Approx(0.8));
    CHECK_FALSE(r.flagged);
  }
  SUBCASE("nobody selected") {
    const std::vector<int> grp = {0, 0, 1, 1};
    const std::vector<int> sel = {0, 0, 0, 0};
    const auto r = disparate_impact_screen(sel, grp, Policy{});
    CHECK(r.test == TestKind::none);
    CHECK(r.ratio == 1.0);
  }
}

TEST_CASE("decisions and top-k selection") {
  Eigen::VectorXd p(5);
  p << 0.2, 0.5, 0.9, 0.5, 0.1;
  CHECK(binary_decisions(p, Family::logistic) == std::vector<int>{0, 1, 1, 1, 0});
  CHECK(binary_decisions(p, Family::ols) == std::vector<int>{0, 0, 1, 0, 0});
  CHECK(select_top(p, 3) == std::vector<Index>{2, 1, 3});
}

TEST_CASE("screening by categorical protected attribute") {
  const auto d = gen_segregated_school({ScenarioName::segregated_school, 2000, 3, std::nullopt, std::nullopt});
  const auto admit = d.codes("admit");
  Policy p;
  p.protected_columns = {"race"};
  const auto reports = screen_by_protected(d, admit, p);
  CHECK(reports.size() == 4);
  CHECK(reports.front().group_label.rfind("race=", 0) == 0);
}
