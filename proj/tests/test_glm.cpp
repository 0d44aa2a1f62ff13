#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "proxyaudit/error.hpp"
#include "proxyaudit/glm.hpp"

using namespace proxyaudit;
using doctest::Approx;

namespace {

Dataset eight_rows(bool with_z) {
  Eigen::VectorXd x(8), z(8), y(8);
  x << 1, 2, 3, 4, 5, 6, 7, 8;
  z << 0, 1, 0, 1, 1, 0, 0, 1;
  y << 0, 0, 1, 0, 1, 0, 1, 1;
  if (!with_z) return Dataset(Schema({oracle::continuous("x"), oracle::binary("y", ColumnRole::outcome)}), {x, y});
  return Dataset(Schema({oracle::continuous("x"), oracle::binary("z"), oracle::binary("y", ColumnRole::outcome)}),
                 {x, z, y});
}

}  // namespace

TEST_CASE("ols coefficients match the normal equations") {
  for (int k = 1; k <= 6; ++k) {
    const auto d = oracle::random_regression(static_cast<std::uint64_t>(k) + 70, k, 35);
    std::vector<std::string> predictors;
    for (int j = 1; j < k; ++j) predictors.push_back("x" + std::to_string(j));
    predictors.insert(predictors.end(), {"b", "g"});
    const ModelSpec spec{"m", Family::ols, "y", predictors};
    const auto m = fit_ols(d, spec);
    const auto X = encode_design(d, predictors).matrix;
    const Eigen::VectorXd ref = oracle::ols_normal_equations(X, d.outcome());
    CHECK((m.coefficients - ref).cwiseAbs().maxCoeff() < 1e-8);
    const Eigen::VectorXd resid = d.outcome() - X * ref;
    const double sst = (d.outcome().array() - d.outcome().mean()).square().sum();
    CHECK(m.r_squared == Approx(1.0 - resid.squaredNorm() / sst).epsilon(1e-10));
  }
}

TEST_CASE("collinear ols predictors are dropped and reported") {
  auto base = oracle::random_regression(3, 3, 50);
  std::vector<Eigen::VectorXd> cols;
  std::vector<ColumnSchema> schema = base.schema().columns();
  for (std::size_t i = 0; i < base.cols(); ++i) cols.push_back(base.column(i));
  schema.insert(schema.begin(), oracle::continuous("x1_copy"));
  cols.insert(cols.begin(), base.column("x1") * 3.0 + Eigen::VectorXd::Ones(50));
  const Dataset d(Schema(schema), cols);
  const auto m = fit_ols(d, ModelSpec{"m", Family::ols, "y", {"x1", "x2", "x1_copy"}});
  CHECK(m.dropped_collinear == std::vector<std::string>{"x1_copy"});
  CHECK(m.coefficient_map().at("x1_copy") == 0.0);
  const auto clean = fit_ols(d, ModelSpec{"c", Family::ols, "y", {"x1", "x2"}});
  CHECK(m.r_squared == Approx(clean.r_squared).epsilon(1e-12));
}

TEST_CASE("logistic coefficients match the grid-search MLE") {
  for (bool with_z : {false, true}) {
    const auto d = eight_rows(with_z);
    const std::vector<std::string> preds = with_z ? std::vector<std::string>{"x", "z"} : std::vector<std::string>{"x"};
    const ModelSpec spec{"l", Family::logistic, "y", preds};
    const auto m = fit_logistic(d, spec);
    CHECK(m.converged);
    const auto X = encode_design(d, preds).matrix;
    const auto grid = oracle::logistic_grid_mle(X, d.outcome(), with_z ? 6 : 10);
    CHECK((m.coefficients - grid).cwiseAbs().maxCoeff() < 1e-3);
    CHECK(m.log_likelihood == Approx(oracle::bernoulli_log_likelihood(X, d.outcome(), m.coefficients)).epsilon(1e-10));
    CHECK(m.null_log_likelihood == Approx(8.0 * std::log(0.5)).epsilon(1e-12));
    CHECK(m.mcfadden_r2 == Approx(1.0 - m.log_likelihood / m.null_log_likelihood).epsilon(1e-12));
  }
}

TEST_CASE("separation and degenerate inputs raise typed errors") {
  Eigen::VectorXd x(6), y(6);
  x << 1, 2, 3, 4, 5, 6;
  y << 0, 0, 0, 1, 1, 1;
  const Dataset sep(Schema({oracle::continuous("x"), oracle::binary("y", ColumnRole::outcome)}), {x, y});
  CHECK_THROWS_AS(fit_logistic(sep, ModelSpec{"s", Family::logistic, "y", {"x"}}), SeparationError);

  Eigen::VectorXd ones = Eigen::VectorXd::Ones(6);
  const Dataset single(Schema({oracle::continuous("x"), oracle::binary("y", ColumnRole::outcome)}), {x, ones});
  CHECK_THROWS_AS(fit_logistic(single, ModelSpec{"s", Family::logistic, "y", {"x"}}), InputError);

  const Dataset flat(Schema({oracle::continuous("x"), oracle::continuous("y", ColumnRole::outcome)}), {x, ones});
  CHECK_THROWS_AS(fit_ols(flat, ModelSpec{"f", Family::ols, "y", {"x"}}), NumericalError);

  const auto d = oracle::random_regression(1, 3, 30);
  CHECK_THROWS_AS(fit(d, ModelSpec{"m", Family::ols, "y", {"x1", "x1"}}), InputError);
  CHECK_THROWS_AS(fit(d, ModelSpec{"m", Family::ols, "y", {"nope"}}), InputError);
  CHECK_THROWS_AS(fit(d, ModelSpec{"m", Family::ols, "y", {"y"}}), InputError);
  CHECK_THROWS_AS(fit(d, ModelSpec{"", Family::ols, "y", {"x1"}}), InputError);
  CHECK_THROWS_AS(fit(d, ModelSpec{"m", Family::logistic, "y", {"x1"}}), InputError);
  CHECK_THROWS_AS(parse_family("probit"), InputError);
}

TEST_CASE("null model and accuracy metrics") {
  const auto d = oracle::random_regression(8, 3, 60);
  const auto null = fit(d, ModelSpec{"null", Family::ols, "y", {}});
  CHECK(null.coefficients.size() == 1);
  CHECK(null.intercept() == Approx(d.outcome().mean()));
  CHECK(std::abs(null.r_squared) < 1e-12);

  const auto m = fit(d, ModelSpec{"m", Family::ols, "y", {"x1", "x2", "b"}});
  const auto acc = mean_accuracy(m, d);
  CHECK(acc.orientation == Orientation::lower_is_better);
  CHECK(acc.value == Approx((predict(m, d) - d.outcome()).cwiseAbs().mean()));
  CHECK(goodness_of_fit(m, d) == Approx(m.r_squared).epsilon(1e-12));

  const auto lg = oracle::random_regression(8, 3, 300, true);
  const auto lm = fit(lg, ModelSpec{"l", Family::logistic, "y", {"x1", "x2"}});
  const auto la = mean_accuracy(lm, lg);
  CHECK(la.orientation == Orientation::higher_is_better);
  CHECK(la.metric() == "classification_accuracy");
  CHECK(la.value > 0.5);
  CHECK(goodness_of_fit(lm, lg) == Approx(lm.mcfadden_r2).epsilon(1e-10));
}

TEST_CASE("zeroing coefficients by source or design name") {
  const auto d = oracle::random_regression(2, 3, 80);
  const auto m = fit(d, ModelSpec{"m", Family::ols, "y", {"x1", "b", "g"}});
  const std::vector<std::string> victims = {"g"};
  const auto z = zero_coefficients(m, victims);
  CHECK(z.stale);
  CHECK(z.coefficient_map().at("g") == 0.0);
  CHECK(z.coefficient_map().at("x1") == m.coefficient_map().at("x1"));
  const Eigen::VectorXd diff = predict(m, d) - predict(z, d);
  CHECK((diff - m.coefficient_map().at("g") * d.column("g")).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("spec helpers") {
  const ModelSpec s{"m", Family::ols, "y", {"a"}};
  const std::vector<std::string> extra = {"a", "b"};
  CHECK(with_predictors(s, extra).predictors == std::vector<std::string>{"a", "b"});
  CHECK(without_predictor(with_predictors(s, extra), "a").predictors == std::vector<std::string>{"b"});
}
