#include <doctest.h>

#include <algorithm>

#include "oracles.hpp"
#include "proxyaudit/linalg.hpp"
#include "proxyaudit/random.hpp"

using namespace proxyaudit;

namespace {

Eigen::MatrixXd random_design(std::uint64_t seed, Index n, Index p) {
  SplitMix64 rng(seed);
  Eigen::MatrixXd X(n, p);
  for (Index i = 0; i < n; ++i) {
    X(i, 0) = 1.0;
    for (Index j = 1; j < p; ++j) X(i, j) = rng.normal(static_cast<double>(j), 1.0 + static_cast<double>(j));
  }
  return X;
}

}  // namespace

TEST_CASE("splitmix64 reference outputs") {
  SplitMix64 rng(0);
  CHECK(rng.next() == 0xE220A8397B1DCDAFULL);
  CHECK(rng.next() == 0x6E789E6AA1B965F4ULL);
  CHECK(fnv1a64("") == 0xCBF29CE484222325ULL);
  CHECK(fnv1a64("a") == 0xAF63DC4C8601EC8CULL);
}

TEST_CASE("pivoted QR matches the normal equations on full-rank designs") {
  for (Index p = 1; p <= 8; ++p) {
    const auto X = random_design(static_cast<std::uint64_t>(p), 30, p);
    SplitMix64 rng(500 + static_cast<std::uint64_t>(p));
    Eigen::VectorXd y(30);
    for (Index i = 0; i < 30; ++i) y[i] = rng.normal();
    const PivotedQR<double> qr(X);
    CHECK(qr.rank() == p);
    CHECK(qr.dependent().empty());
    CHECK((qr.solve(y) - oracle::ols_normal_equations(X, y)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("dependent columns are pinned to zero and the earlier duplicate survives") {
  auto X = random_design(9, 25, 4);
  Eigen::MatrixXd Z(25, 6);
  Z << X, X.col(2), X.col(1) * 2.0 - X.col(3);
  SplitMix64 rng(1);
  Eigen::VectorXd y(25);
  for (Index i = 0; i < 25; ++i) y[i] = rng.normal();
  const PivotedQR<double> qr(Z);
  CHECK(qr.rank() == 4);
  REQUIRE(qr.dependent().size() == 2);
  CHECK(std::find(qr.dependent().begin(), qr.dependent().end(), 4) != qr.dependent().end());
  const Eigen::VectorXd beta = qr.solve(y);
  CHECK(beta[4] == 0.0);
  // Fitted values agree with the full-rank fit.
  const Eigen::VectorXd reference = X * oracle::ols_normal_equations(X, y);
  CHECK((Z * beta - reference).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("zero columns are dependent from the start") {
  Eigen::MatrixXd X = random_design(4, 10, 3);
  X.col(1).setZero();
  const PivotedQR<double> qr(X);
  CHECK(qr.rank() == 2);
  CHECK(qr.dependent() == std::vector<Eigen::Index>{1});
}

TEST_CASE("least squares is invariant to column scaling") {
  const auto X = random_design(12, 40, 5);
  SplitMix64 rng(2);
  Eigen::VectorXd y(40);
  for (Index i = 0; i < 40; ++i) y[i] = rng.normal();
  Eigen::MatrixXd S = X;
  S.col(3) *= 1e6;
  const Eigen::VectorXd a = least_squares(X, y);
  const Eigen::VectorXd b = least_squares(S, y);
  CHECK(std::abs(a[3] - b[3] * 1e6) < 1e-9 * std::abs(a[3]) + 1e-12);
  CHECK((X * a - S * b).cwiseAbs().maxCoeff() < 1e-9);
}
