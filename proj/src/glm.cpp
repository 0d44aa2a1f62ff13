#include "proxyaudit/glm.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "proxyaudit/error.hpp"
#include "proxyaudit/linalg.hpp"

namespace proxyaudit {

namespace {

Eigen::VectorXd logistic(const Eigen::VectorXd& eta) {
  return eta.unaryExpr([](double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
  });
}

double null_log_likelihood(const Eigen::VectorXd& y) {
  const double n = static_cast<double>(y.size());
  const double p = y.mean();
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return n * (p * std::log(p) + (1.0 - p) * std::log1p(-p));
}

void require_outcome(const ModelSpec& spec, const Schema& schema, Family family) {
  const auto& out = schema.at(spec.outcome);
  if (family == Family::logistic && out.kind != ColumnKind::binary) {
    throw InputError("logistic model '" + spec.id + "' needs a binary outcome; '" + spec.outcome + "' is " +
                     std::string(to_string(out.kind)));
  }
  if (family == Family::ols && out.kind == ColumnKind::categorical) {
    throw InputError("ols model '" + spec.id + "' cannot use categorical outcome '" + spec.outcome + "'");
  }
}

std::vector<std::string> names_at(const DesignEncoding& enc, const std::vector<Index>& idx) {
  std::vector<std::string> out;
  for (Index i : idx) out.push_back(enc.columns[static_cast<std::size_t>(i)].name);
  return out;
}

}  // namespace

std::string_view to_string(Family f) { return f == Family::ols ? "ols" : "logistic"; }

Family parse_family(std::string_view text) {
  if (text == "ols") return Family::ols;
  if (text == "logistic") return Family::logistic;
  throw InputError("unknown model family '" + std::string(text) + "'");
}

void validate(const ModelSpec& spec, const Schema& schema) {
  if (spec.id.empty()) throw InputError("model spec needs a non-empty id");
  if (!schema.find(spec.outcome)) {
    throw InputError("model '" + spec.id + "': unknown outcome column '" + spec.outcome + "'");
  }
  std::set<std::string> seen;
  for (const auto& p : spec.predictors) {
    if (p == spec.outcome) throw InputError("model '" + spec.id + "': outcome '" + p + "' listed as a predictor");
    if (!seen.insert(p).second) throw InputError("model '" + spec.id + "': predictor '" + p + "' listed twice");
    const auto j = schema.find(p);
    if (!j) throw InputError("model '" + spec.id + "': unknown predictor column '" + p + "'");
    const auto role = schema[*j].role;
    if (role != ColumnRole::predictor && role != ColumnRole::protected_attribute) {
      throw InputError("model '" + spec.id + "': column '" + p + "' has role " + std::string(to_string(role)));
    }
  }
}

ModelSpec with_predictors(ModelSpec spec, std::span<const std::string> extra) {
  for (const auto& e : extra) {
    if (std::find(spec.predictors.begin(), spec.predictors.end(), e) == spec.predictors.end()) {
      spec.predictors.push_back(e);
    }
  }
  return spec;
}

ModelSpec without_predictor(ModelSpec spec, std::string_view name) {
  std::erase(spec.predictors, std::string(name));
  return spec;
}

std::map<std::string, double> FittedModel::coefficient_map() const {
  std::map<std::string, double> out;
  for (std::size_t k = 0; k < encoding.columns.size(); ++k) {
    out[encoding.columns[k].name] = coefficients[static_cast<Index>(k)];
  }
  return out;
}

double logistic_log_likelihood(const Eigen::Ref<const Eigen::VectorXd>& y, const Eigen::Ref<const Eigen::VectorXd>& eta) {
  double ll = 0.0;
  for (Index i = 0; i < y.size(); ++i) {
    const double e = eta[i];
    // log(1 + exp(e)) without overflow
    const double softplus = std::max(e, 0.0) + std::log1p(std::exp(-std::abs(e)));
    ll += y[i] * e - softplus;
  }
  return ll;
}

FittedModel fit_ols(const Dataset& d, const ModelSpec& spec, const FitOptions& options) {
  if (spec.family != Family::ols) throw InputError("fit_ols called with a non-ols spec '" + spec.id + "'");
  validate(spec, d.schema());
  require_outcome(spec, d.schema(), Family::ols);

  auto design = encode_design(d, spec.predictors);
  const Eigen::MatrixXd& X = design.matrix;
  const Eigen::VectorXd& y = d.column(spec.outcome);
  if (d.rows() <= X.cols()) {
    throw InputError("model '" + spec.id + "': " + std::to_string(d.rows()) + " rows cannot fit " +
                     std::to_string(X.cols()) + " design columns");
  }
  const double sst = (y.array() - y.mean()).square().sum();
  if (sst == 0.0) throw NumericalError("model '" + spec.id + "': outcome is constant (SST = 0)");

  PivotedQR<double> qr(X, options.collinearity_tolerance);

  FittedModel m;
  m.spec = spec;
  m.n = d.rows();
  m.coefficients = qr.solve(y);
  m.dropped_collinear = names_at(design.encoding, qr.dependent());
  m.encoding = std::move(design.encoding);
  const double ssr = (y - X * m.coefficients).squaredNorm();
  m.r_squared = std::clamp(1.0 - ssr / sst, 0.0, 1.0);
  m.iterations = 1;
  m.converged = true;
  return m;
}

FittedModel fit_logistic(const Dataset& d, const ModelSpec& spec, const FitOptions& options) {
  if (spec.family != Family::logistic) {
    throw InputError("fit_logistic called with a non-logistic spec '" + spec.id + "'");
  }
  validate(spec, d.schema());
  require_outcome(spec, d.schema(), Family::logistic);

  auto design = encode_design(d, spec.predictors);
  const Eigen::MatrixXd& X = design.matrix;
  const Eigen::VectorXd& y = d.column(spec.outcome);
  const double ybar = y.mean();
  if (ybar <= 0.0 || ybar >= 1.0) {
    throw InputError("model '" + spec.id + "': outcome '" + spec.outcome + "' has a single class");
  }
  if (d.rows() <= X.cols()) {
    throw InputError("model '" + spec.id + "': " + std::to_string(d.rows()) + " rows cannot fit " +
                     std::to_string(X.cols()) + " design columns");
  }

  // Structural collinearity is settled once on the unweighted design.
  const PivotedQR<double> structure(X, options.collinearity_tolerance);
  std::vector<Index> kept;
  for (Index j = 0; j < X.cols(); ++j) {
    if (!std::binary_search(structure.dependent().begin(), structure.dependent().end(), j)) kept.push_back(j);
  }
  const Eigen::MatrixXd Xk = X(Eigen::all, kept);
  Eigen::VectorXd sd(Xk.cols());
  for (Index j = 0; j < Xk.cols(); ++j) {
    const double mu = Xk.col(j).mean();
    sd[j] = std::sqrt((Xk.col(j).array() - mu).square().sum() / static_cast<double>(Xk.rows()));
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(Xk.cols());
  for (std::size_t j = 0; j < kept.size(); ++j) {
    if (kept[j] == 0) beta[static_cast<Index>(j)] = std::log(ybar / (1.0 - ybar));
  }
  Eigen::VectorXd eta = Xk * beta;
  double ll = logistic_log_likelihood(y, eta);

  auto check_separation = [&](const Eigen::VectorXd& b) {
    for (Index j = 0; j < b.size(); ++j) {
      if (kept[static_cast<std::size_t>(j)] == 0 || sd[j] == 0.0) continue;
      if (std::abs(b[j]) * sd[j] > options.separation_limit) {
        throw SeparationError("model '" + spec.id + "': complete or quasi-complete separation on '" +
                              design.encoding.columns[static_cast<std::size_t>(kept[static_cast<std::size_t>(j)])].name +
                              "'");
      }
    }
  };

  bool converged = false;
  int it = 0;
  while (it < options.max_iterations) {
    ++it;
    const Eigen::VectorXd mu = logistic(eta);
    const Eigen::VectorXd w = (mu.array() * (1.0 - mu.array())).max(1e-12);
    const Eigen::VectorXd z = eta.array() + (y - mu).array() / w.array();
    const Eigen::VectorXd sw = w.array().sqrt();
    const Eigen::MatrixXd Xw = sw.asDiagonal() * Xk;
    const Eigen::VectorXd zw = sw.cwiseProduct(z);
    const Eigen::VectorXd proposal = PivotedQR<double>(Xw, options.collinearity_tolerance).solve(zw);

    // Step halving guards against the rare overshoot far from the optimum.
    Eigen::VectorXd step = proposal - beta;
    Eigen::VectorXd next = proposal;
    Eigen::VectorXd next_eta = Xk * next;
    double next_ll = logistic_log_likelihood(y, next_eta);
    for (int h = 0; h < 30 && next_ll < ll - 1e-12 * std::abs(ll); ++h) {
      step *= 0.5;
      next = beta + step;
      next_eta = Xk * next;
      next_ll = logistic_log_likelihood(y, next_eta);
    }
    check_separation(next);

    const double change = std::abs(next_ll - ll);
    beta = std::move(next);
    eta = std::move(next_eta);
    const double prev = ll;
    ll = next_ll;
    const Eigen::VectorXd score = Xk.transpose() * (y - logistic(eta));
    if (score.cwiseAbs().maxCoeff() < options.score_tolerance ||
        change < options.loglik_tolerance * std::abs(prev)) {
      converged = true;
      break;
    }
  }
  if (!converged) {
    throw ConvergenceError("model '" + spec.id + "': IRLS did not converge in " +
                           std::to_string(options.max_iterations) + " iterations");
  }

  FittedModel m;
  m.spec = spec;
  m.n = d.rows();
  m.coefficients = Eigen::VectorXd::Zero(X.cols());
  for (std::size_t j = 0; j < kept.size(); ++j) m.coefficients[kept[j]] = beta[static_cast<Index>(j)];
  m.dropped_collinear = names_at(design.encoding, structure.dependent());
  m.encoding = std::move(design.encoding);
  m.log_likelihood = ll;
  m.null_log_likelihood = null_log_likelihood(y);
  m.mcfadden_r2 = std::clamp(1.0 - m.log_likelihood / m.null_log_likelihood, 0.0, 1.0);
  m.iterations = it;
  m.converged = true;
  return m;
}

FittedModel fit(const Dataset& d, const ModelSpec& spec, const FitOptions& options) {
  return spec.family == Family::ols ? fit_ols(d, spec, options) : fit_logistic(d, spec, options);
}

Eigen::VectorXd predict(const FittedModel& m, const Dataset& d) {
  const Eigen::VectorXd eta = m.encoding.apply(d) * m.coefficients;
  return m.spec.family == Family::ols ? eta : logistic(eta);
}

double goodness_of_fit(const FittedModel& m, const Dataset& d) {
  const Eigen::VectorXd& y = d.column(m.spec.outcome);
  const Eigen::VectorXd eta = m.encoding.apply(d) * m.coefficients;
  if (m.spec.family == Family::ols) {
    const double sst = (y.array() - y.mean()).square().sum();
    if (sst == 0.0) throw NumericalError("goodness_of_fit: outcome is constant on the evaluation data");
    return 1.0 - (y - eta).squaredNorm() / sst;
  }
  const double ll0 = null_log_likelihood(y);
  if (ll0 == 0.0) throw NumericalError("goodness_of_fit: outcome has a single class on the evaluation data");
  return 1.0 - logistic_log_likelihood(y, eta) / ll0;
}

Accuracy mean_accuracy(const FittedModel& m, const Dataset& test) {
  if (test.rows() == 0) throw InputError("mean_accuracy: empty test set");
  const Eigen::VectorXd& y = test.column(m.spec.outcome);
  const Eigen::VectorXd yhat = predict(m, test);
  if (m.spec.family == Family::ols) {
    return {(y - yhat).cwiseAbs().mean(), Orientation::lower_is_better};
  }
  const Eigen::ArrayXd cls = (yhat.array() >= 0.5).cast<double>();
  return {(cls == y.array()).cast<double>().mean(), Orientation::higher_is_better};
}

FittedModel zero_coefficients(const FittedModel& m, std::span<const std::string> victims) {
  FittedModel out = m;
  for (const auto& v : victims) {
    bool matched = std::find(m.spec.predictors.begin(), m.spec.predictors.end(), v) != m.spec.predictors.end();
    for (std::size_t k = 0; k < out.encoding.columns.size(); ++k) {
      const auto& c = out.encoding.columns[k];
      if (c.source.empty()) continue;
      if (c.name == v || c.source == v) {
        out.coefficients[static_cast<Index>(k)] = 0.0;
        matched = true;
      }
    }
    if (!matched) throw InputError("zero_coefficients: '" + v + "' is not a design column of model '" + m.spec.id + "'");
  }
  out.stale = true;
  return out;
}

}  // namespace proxyaudit
