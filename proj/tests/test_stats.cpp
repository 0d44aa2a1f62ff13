#include <doctest.h>

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "proxyaudit/error.hpp"
#include "proxyaudit/special.hpp"
#include "proxyaudit/stats.hpp"

using namespace proxyaudit;
using doctest::Approx;

// Reference values below were computed with scipy.special / scipy.stats.

TEST_CASE("incomplete gamma and beta") {
  CHECK(special::gamma_p(2.5, 1.7) == Approx(0.36143007689620493).epsilon(1e-10));
  CHECK(special::gamma_q(3.0, 10.0) == Approx(0.0027693957155115775).epsilon(1e-10));
  CHECK(special::gamma_p(1.0, 0.0) == 0.0);
  CHECK(special::beta_inc(2.0, 3.5, 0.4) == Approx(0.5984490866652151).epsilon(1e-10));
  CHECK(special::beta_inc(0.5, 0.5, 0.9) == Approx(0.7951672353008665).epsilon(1e-10));
  CHECK(special::beta_inc(2.0, 2.0, 0.0) == 0.0);
  CHECK(special::beta_inc(2.0, 2.0, 1.0) == 1.0);
}

TEST_CASE("distribution tails") {
  CHECK(special::chi_square_sf(3.84, 1.0) == Approx(0.05004352124870519).epsilon(1e-10));
  CHECK(special::chi_square_sf(12.0, 5.0) == Approx(0.03478778050624185).epsilon(1e-10));
  CHECK(special::student_t_two_sided(2.1, 7.0) == Approx(0.0738711962129226).epsilon(1e-10));
  CHECK(special::student_t_two_sided(-2.1, 7.0) == Approx(0.0738711962129226).epsilon(1e-10));
  CHECK(special::f_sf(4.2, 3.0, 20.0) == Approx(0.018557419834826214).epsilon(1e-10));
}

TEST_CASE("pearson correlation") {
  Eigen::VectorXd x(4), y(4);
  x << 1, 2, 3, 4;
  y << 2, 1, 4, 3;
  const auto r = pearson_r(x, y);
  CHECK(r.value == Approx(0.6));
  CHECK(r.p_value == Approx(0.4).epsilon(1e-10));
  CHECK(r.test == TestKind::t);
}

TEST_CASE("chi-square and Cramer's V without continuity correction") {
  CountMatrix c(2, 2);
  c << 10, 20, 30, 40;
  const auto v = cramers_v(ContingencyTable(c));
  CHECK(v.statistic == Approx(0.7936507936507936).epsilon(1e-12));
  CHECK(v.p_value == Approx(0.37299848361348686).epsilon(1e-10));
  CHECK(v.value == Approx(std::sqrt(0.7936507936507936 / 100.0)).epsilon(1e-12));
  CHECK(v.test == TestKind::chi_square);
}

TEST_CASE("Welch t test") {
  Eigen::VectorXd x(3), y(3);
  x << 1, 2, 3;
  y << 4, 5, 6;
  const auto t = two_sample_t(x, y);
  CHECK(t.statistic == Approx(-3.6742346141747673).epsilon(1e-12));
  CHECK(t.p_value == Approx(0.021311641128756727).epsilon(1e-10));
}

TEST_CASE("correlation ratio with one-way ANOVA") {
  const std::vector<int> g = {0, 0, 1, 1};
  Eigen::VectorXd y(4);
  y << 1, 2, 3, 4;
  const auto eta = correlation_ratio(g, y);
  CHECK(eta.value == Approx(std::sqrt(0.8)).epsilon(1e-12));
  CHECK(eta.statistic == Approx(8.0).epsilon(1e-12));
  CHECK(eta.p_value == Approx(0.10557280900008414).epsilon(1e-10));
}

TEST_CASE("Fisher exact against reference values") {
  const auto p = [](std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d) {
    CountMatrix m(2, 2);
    m << a, b, c, d;
    return fisher_exact_2x2(ContingencyTable(m)).p_value;
  };
  CHECK(p(3, 1, 1, 3) == Approx(0.48571428571428565).epsilon(1e-12));
  CHECK(p(8, 2, 1, 5) == Approx(0.034965034965034975).epsilon(1e-12));
  CHECK(p(10, 20, 30, 40) == Approx(0.5044757698516285).epsilon(1e-10));
  // Above the exact-weight range the lgamma path takes over.
  CHECK(p(40, 10, 12, 38) == Approx(p(38, 12, 10, 40)).epsilon(1e-12));
  CHECK(p(40, 10, 12, 38) < 1e-6);
}

TEST_CASE("Fisher exact equals exhaustive enumeration for small totals") {
  for (int n = 1; n <= 16; ++n) {
    for (int a = 0; a <= n; ++a) {
      for (int b = 0; a + b <= n; ++b) {
        for (int c = 0; a + b + c <= n; ++c) {
          const int d = n - a - b - c;
          CountMatrix m(2, 2);
          m << a, b, c, d;
          CHECK(fisher_exact_2x2(ContingencyTable(m)).p_value == oracle::fisher_enumeration(a, b, c, d));
        }
      }
    }
  }
}

TEST_CASE("association dispatch by column kind") {
  const auto d = oracle::random_regression(5, 3, 200);
  CHECK(assoc_auto(d, "x1", "x2").measure == AssociationMeasure::pearson);
  CHECK(assoc_auto(d, "b", "g").measure == AssociationMeasure::cramers_v);
  CHECK(assoc_auto(d, "x1", "g").measure == AssociationMeasure::correlation_ratio);
  CHECK(assoc_auto(d, "g", "x1").measure == AssociationMeasure::correlation_ratio);
}

TEST_CASE("contingency tables") {
  CountMatrix bad(2, 2);
  bad << 1, -1, 0, 0;
  CHECK_THROWS_AS(ContingencyTable{bad}, InputError);
  CountMatrix empty = CountMatrix::Zero(2, 2);
  CHECK_THROWS_AS(ContingencyTable{empty}, InputError);
  const std::vector<int> a = {0, 0, 2, 2};
  const std::vector<int> b = {0, 1, 0, 1};
  const std::vector<std::string> al = {"x", "unused", "z"};
  const std::vector<std::string> bl = {"p", "q"};
  const auto t = ContingencyTable::cross(a, b, al, bl);
  CHECK(t.row_labels == std::vector<std::string>{"x", "z"});
  CHECK(t.counts.sum() == 4);
}

TEST_CASE("selection-rate ratio") {
  const std::vector<int> group = {0, 0, 0, 0, 0, 1, 1, 1, 1, 1};
  const std::vector<int> sel = {1, 1, 1, 0, 0, 1, 1, 0, 0, 0};
  CHECK(selection_rate_ratio(sel, group) == Approx(2.0 / 3.0));
  const std::vector<int> none(10, 0);
  CHECK(selection_rate_ratio(none, group) == 1.0);
}
