#pragma once

#include <Eigen/Core>

#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "proxyaudit/data.hpp"

namespace proxyaudit {

enum class Family { ols, logistic };

std::string_view to_string(Family f);
Family parse_family(std::string_view text);

/// Declarative model: which columns predict which outcome, and how.
/// An empty predictor list is the intercept-only null model.
struct ModelSpec {
  std::string id;
  Family family = Family::ols;
  std::string outcome;
  std::vector<std::string> predictors;

  bool operator==(const ModelSpec&) const = default;
};

/// Checks a model spec against a schema: outcome exists and is not a predictor,
/// predictors exist, are distinct, and have role predictor or protected.
void validate(const ModelSpec& spec, const Schema& schema);

/// Returns `spec` with `extra` appended (skipping names already present).
ModelSpec with_predictors(ModelSpec spec, std::span<const std::string> extra);
/// Returns `spec` without `name`.
ModelSpec without_predictor(ModelSpec spec, std::string_view name);

struct FitOptions {
  double collinearity_tolerance = 1e-10;
  double score_tolerance = 1e-8;
  double loglik_tolerance = 1e-10;
  int max_iterations = 100;
  double separation_limit = 15.0;  // on |coefficient| x sd(column)
};

struct FittedModel {
  ModelSpec spec;
  DesignEncoding encoding;
  Eigen::VectorXd coefficients;  // aligned with encoding.columns; [0] is the intercept
  std::vector<std::string> dropped_collinear;
  Index n = 0;

  double r_squared = 0.0;         // ols
  double mcfadden_r2 = 0.0;       // logistic
  double log_likelihood = 0.0;    // logistic
  double null_log_likelihood = 0.0;
  int iterations = 0;
  bool converged = false;
  bool stale = false;  // coefficients edited after fitting; stored statistics no longer apply

  double intercept() const { return coefficients[0]; }
  std::vector<std::string> design_names() const { return encoding.names(); }
  std::map<std::string, double> coefficient_map() const;
  /// Primary fit statistic: R^2 for ols, McFadden's pseudo-R^2 for logistic.
  double fit_statistic() const { return spec.family == Family::ols ? r_squared : mcfadden_r2; }
};

/// Least squares through PivotedQR; exactly collinear design columns are
/// dropped (coefficient 0) and listed.
FittedModel fit_ols(const Dataset& d, const ModelSpec& spec, const FitOptions& options = {});

/// Maximum likelihood by iteratively reweighted least squares with step halving.
/// Throws SeparationError when a standardized slope exceeds the separation limit
/// and ConvergenceError when the iteration cap is reached.
FittedModel fit_logistic(const Dataset& d, const ModelSpec& spec, const FitOptions& options = {});

/// Dispatches on spec.family.
FittedModel fit(const Dataset& d, const ModelSpec& spec, const FitOptions& options = {});

/// Linear predictor (ols) or probability (logistic) for every row of `d`.
Eigen::VectorXd predict(const FittedModel& m, const Dataset& d);

/// R^2 (ols) or McFadden pseudo-R^2 (logistic) of `m` evaluated on `d`.
/// The logistic null model is the intercept-only fit to `d` itself.
double goodness_of_fit(const FittedModel& m, const Dataset& d);

/// Bernoulli log-likelihood of outcomes `y` under probabilities from linear predictor `eta`.
double logistic_log_likelihood(const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::Ref<const Eigen::VectorXd>& eta);

enum class Orientation { lower_is_better, higher_is_better };

struct Accuracy {
  double value = 0.0;
  Orientation orientation = Orientation::higher_is_better;
  std::string_view metric() const {
    return orientation == Orientation::lower_is_better ? "mean_absolute_error" : "classification_accuracy";
  }
};

/// Mean absolute error (ols, lower is better) or accuracy of p >= 0.5 (logistic).
Accuracy mean_accuracy(const FittedModel& m, const Dataset& test);

/// Copy of `m` with the named coefficients set to zero. Names may be design
/// columns ("race=black") or source columns (zeroing every indicator of it).
FittedModel zero_coefficients(const FittedModel& m, std::span<const std::string> victims);

}  // namespace proxyaudit
