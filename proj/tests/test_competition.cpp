#include <doctest.h>

#include <string>
#include <vector>

#include "oracles.hpp"
#include "properties.hpp"
#include "proxyaudit/competition.hpp"
#include "proxyaudit/digest.hpp"
#include "proxyaudit/error.hpp"

using namespace proxyaudit;

TEST_CASE("canonical spec JSON sorts keys and predictors") {
  const ModelSpec a{"m1", Family::logistic, "default", {"zip", "age", "income"}};
  const ModelSpec b{"m1", Family::logistic, "default", {"income", "zip", "age"}};
  CHECK(canonical_spec_json(a) ==
        R"({"family":"logistic","id":"m1","outcome":"default","predictors":["age","income","zip"]})");
  CHECK(commit_model(a).digest == commit_model(b).digest);
  CHECK(commit_model(a).digest == sha256_hex(canonical_spec_json(a)));
}

TEST_CASE("commitments detect retrofitting") {
  const ModelSpec s{"m", Family::ols, "y", {"x1", "b"}};
  const auto c = commit_model(s);
  CHECK(c.model_id == "m");
  CHECK(c.digest.size() == 64);
  CHECK(c.timestamp.back() == 'Z');
  CHECK(verify_commitment(s, c));
  CHECK_FALSE(verify_commitment(ModelSpec{"m", Family::ols, "y", {"x1", "b", "x2"}}, c));
  CHECK_FALSE(verify_commitment(ModelSpec{"m", Family::logistic, "y", {"x1", "b"}}, c));
  CHECK_THROWS_AS(commit_model(ModelSpec{"", Family::ols, "y", {}}), InputError);
  CHECK_THROWS_AS(commit_model(ModelSpec{"m", Family::ols, "y", {"a", "a"}}), InputError);
}

TEST_CASE("competition ranks on the lock-box and disqualifies cheaters") {
  const auto d = oracle::random_regression(31337, 4, 400);
  const auto split = lockbox_split(d, 0.3, 5);
  Policy policy;
  policy.protected_columns = {"g"};
  auto subs = props::sample_submissions();
  subs.push_back({"mallory", ModelSpec{"sneaky", Family::ols, "y", {"x1", "x2", "x3"}},
                  commit_model(ModelSpec{"sneaky", Family::ols, "y", {"x1"}})});
  subs.push_back({"oscar", ModelSpec{"other", Family::ols, "x3", {"x1"}}, std::nullopt});
  subs.push_back({"trent", ModelSpec{"broken", Family::ols, "y", {"missing"}}, std::nullopt});
  const auto r = run_competition(d, split, subs, policy);
  CHECK(r.lockbox_digest == split.digest);
  CHECK(r.ranked.size() == 5);
  REQUIRE(r.disqualified.size() == 3);
  CHECK(r.disqualified[0].party == "mallory");
  CHECK(r.disqualified[0].reason.find("retrofit") != std::string::npos);
  CHECK(r.disqualified[1].party == "oscar");
  CHECK(r.disqualified[2].reason.find("fit failed") != std::string::npos);
  CHECK(r.winner == r.ranked.front().party);
  // Identical specs tie on every criterion and fall back to the party name.
  std::size_t beta = 0, gamma = 0;
  for (std::size_t i = 0; i < r.ranked.size(); ++i) {
    if (r.ranked[i].party == "beta") beta = i;
    if (r.ranked[i].party == "gamma") gamma = i;
  }
  CHECK(gamma == beta + 1);
  for (std::size_t i = 0; i + 1 < r.ranked.size(); ++i) {
    ScoredModel a{r.ranked[i].model_id, r.ranked[i].accuracy, r.ranked[i].average_proxy_power, r.ranked[i].predictor_count, {}};
    ScoredModel b{r.ranked[i + 1].model_id, r.ranked[i + 1].accuracy, r.ranked[i + 1].average_proxy_power,
                  r.ranked[i + 1].predictor_count, {}};
    CHECK(lexicographic_compare(a, b, policy).preference != Preference::second);
  }
}

TEST_CASE("competition refuses a tampered lock-box") {
  const auto d = oracle::random_regression(8, 3, 100);
  auto split = lockbox_split(d, 0.3, 5);
  split.digest = std::string(64, '0');
  const auto subs = props::sample_submissions();
  CHECK_THROWS_WITH_AS(run_competition(d, split, subs, Policy{}), doctest::Contains("lock-box tampered"), InputError);
  CHECK_THROWS_AS(run_competition(d, lockbox_split(d, 0.3, 5), std::span(subs).first(1), Policy{}), InputError);
}

TEST_CASE("lock-box outcomes never reach the fit") {
  const auto d = oracle::random_regression(99, 4, 300);
  const auto split = lockbox_split(d, 0.3, 5);
  Eigen::VectorXd y = d.column("y");
  for (Index i : split.test_indices) y[i] = -y[i] + 50.0;
  const auto corrupted = props::with_column(d, "y", y);
  auto corrupted_split = split;
  corrupted_split.digest = lockbox_digest(corrupted, split.test_indices);
  Policy policy;
  policy.protected_columns = {"g"};
  const auto subs = props::sample_submissions();
  const auto clean = run_competition(d, split, subs, policy);
  const auto dirty = run_competition(corrupted, corrupted_split, subs, policy);
  REQUIRE(clean.ranked.size() == dirty.ranked.size());
  for (const auto& entry : clean.ranked) {
    for (const auto& other : dirty.ranked) {
      if (other.party != entry.party) continue;
      CHECK(other.coefficients == entry.coefficients);
      CHECK(other.accuracy.value != entry.accuracy.value);
    }
  }
}

TEST_CASE("opaque competition ranks by accuracy then selection ratio") {
  const auto d = oracle::random_regression(12, 3, 400, true);
  const auto split = lockbox_split(d, 0.25, 9);
  Policy policy;
  policy.protected_columns = {"g"};
  const auto test = d.subset(split.test_indices);
  const Eigen::VectorXd truth = test.outcome();
  const Eigen::VectorXd g = test.column("g");
  // Perfect predictions beat everything; the two identical-accuracy entries
  // differ only in which group gets their errors.
  Eigen::VectorXd perfect = truth;
  Eigen::VectorXd flip_g = truth, flip_other = truth;
  int flipped_g = 0, flipped_o = 0;
  for (Index i = 0; i < truth.size() && (flipped_g < 10 || flipped_o < 10); ++i) {
    if (truth[i] == 1.0 && g[i] == 1.0 && flipped_g < 10) {
      flip_g[i] = 0.0;
      ++flipped_g;
    } else if (truth[i] == 1.0 && g[i] == 0.0 && flipped_o < 10) {
      flip_other[i] = 0.0;
      ++flipped_o;
    }
  }
  REQUIRE(flipped_g == 10);
  REQUIRE(flipped_o == 10);
  const std::vector<OpaqueSubmission> subs = {
      {"p1", "flip_g", flip_g}, {"p2", "perfect", perfect}, {"p3", "flip_other", flip_other}};
  const auto r = run_opaque_competition(d, split, subs, Family::logistic, policy);
  REQUIRE(r.ranked.size() == 3);
  CHECK(r.winner == "p2");
  CHECK(r.ranked[0].accuracy.value == 1.0);
  CHECK(r.ranked[1].worst_ratio >= r.ranked[2].worst_ratio);

  std::vector<OpaqueSubmission> short_subs = subs;
  short_subs[0].predictions.conservativeResize(3);
  CHECK_THROWS_AS(run_opaque_competition(d, split, short_subs, Family::logistic, policy), InputError);
}

TEST_CASE("competition result is permutation invariant") { CHECK(props::competition_permutation(10).empty()); }
