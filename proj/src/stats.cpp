#include "proxyaudit/stats.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "proxyaudit/error.hpp"
#include "proxyaudit/special.hpp"

namespace proxyaudit {

namespace {

std::vector<std::string> numbered_labels(Index n) {
  std::vector<std::string> out;
  for (Index i = 0; i < n; ++i) out.push_back(std::to_string(i));
  return out;
}

std::vector<std::string> column_labels(const ColumnSchema& spec) {
  if (!spec.categories.empty()) return spec.categories;
  return {"0", "1"};
}

using u128 = unsigned __int128;

u128 binomial(std::int64_t n, std::int64_t k) {
  if (k < 0 || k > n) return 0;
  k = std::min(k, n - k);
  u128 c = 1;
  for (std::int64_t i = 0; i < k; ++i) c = c * static_cast<u128>(n - i) / static_cast<u128>(i + 1);
  return c;
}

double log_binomial(double n, double k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

}  // namespace

std::string_view to_string(AssociationMeasure m) {
  switch (m) {
    case AssociationMeasure::pearson: return "pearson";
    case AssociationMeasure::cramers_v: return "cramers_v";
    case AssociationMeasure::correlation_ratio: return "correlation_ratio";
  }
  return "?";
}

std::string_view to_string(TestKind t) {
  switch (t) {
    case TestKind::t: return "t";
    case TestKind::chi_square: return "chi_square";
    case TestKind::anova: return "anova";
    case TestKind::fisher_exact: return "fisher_exact";
    case TestKind::none: return "none";
  }
  return "?";
}

ContingencyTable::ContingencyTable(std::vector<std::string> rows, std::vector<std::string> cols, CountMatrix c)
    : row_labels(std::move(rows)), col_labels(std::move(cols)), counts(std::move(c)) {
  if (counts.rows() < 2 || counts.cols() < 2) throw InputError("contingency table must be at least 2x2");
  if (static_cast<Index>(row_labels.size()) != counts.rows() ||
      static_cast<Index>(col_labels.size()) != counts.cols()) {
    throw InputError("contingency table labels do not match its dimensions");
  }
  if ((counts.array() < 0).any()) throw InputError("contingency table has a negative count");
  if (total() < 1) throw InputError("contingency table is empty");
}

ContingencyTable::ContingencyTable(CountMatrix c)
    : ContingencyTable(numbered_labels(c.rows()), numbered_labels(c.cols()), c) {}

ContingencyTable ContingencyTable::cross(std::span<const int> a, std::span<const int> b,
                                         std::span<const std::string> a_labels,
                                         std::span<const std::string> b_labels) {
  if (a.size() != b.size()) throw InputError("cross-tabulation of series with different lengths");
  std::map<int, Index> ra;
  std::map<int, Index> rb;
  for (int v : a) ra.emplace(v, 0);
  for (int v : b) rb.emplace(v, 0);
  Index k = 0;
  for (auto& [v, idx] : ra) idx = k++;
  k = 0;
  for (auto& [v, idx] : rb) idx = k++;
  CountMatrix counts = CountMatrix::Zero(static_cast<Index>(ra.size()), static_cast<Index>(rb.size()));
  for (std::size_t i = 0; i < a.size(); ++i) ++counts(ra[a[i]], rb[b[i]]);
  std::vector<std::string> rl;
  std::vector<std::string> cl;
  for (const auto& [v, idx] : ra) {
    rl.push_back(static_cast<std::size_t>(v) < a_labels.size() ? a_labels[static_cast<std::size_t>(v)]
                                                                : std::to_string(v));
  }
  for (const auto& [v, idx] : rb) {
    cl.push_back(static_cast<std::size_t>(v) < b_labels.size() ? b_labels[static_cast<std::size_t>(v)]
                                                                : std::to_string(v));
  }
  if (counts.rows() < 2 || counts.cols() < 2) {
    throw NumericalError("degenerate table: a variable takes a single observed value");
  }
  return ContingencyTable(std::move(rl), std::move(cl), std::move(counts));
}

AssociationResult pearson_r(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (x.size() != y.size()) throw InputError("pearson_r: series lengths differ");
  const Index n = x.size();
  if (n < 3) throw InputError("pearson_r: need at least 3 observations");
  const Eigen::ArrayXd dx = x.array() - x.mean();
  const Eigen::ArrayXd dy = y.array() - y.mean();
  const double sxx = dx.square().sum();
  const double syy = dy.square().sum();
  if (sxx == 0.0 || syy == 0.0) throw NumericalError("undefined correlation: constant input");
  const double r = std::clamp((dx * dy).sum() / std::sqrt(sxx * syy), -1.0, 1.0);

  AssociationResult out;
  out.measure = AssociationMeasure::pearson;
  out.value = r;
  out.test = TestKind::t;
  out.n = n;
  const double df = static_cast<double>(n - 2);
  if (std::abs(r) >= 1.0) {
    out.statistic = r > 0 ? INFINITY : -INFINITY;
    out.p_value = 0.0;
  } else {
    out.statistic = r * std::sqrt(df / (1.0 - r * r));
    out.p_value = special::student_t_two_sided(out.statistic, df);
  }
  return out;
}

AssociationResult cramers_v(const ContingencyTable& t) {
  const Eigen::MatrixXd obs = t.counts.cast<double>();
  const Eigen::VectorXd rows = obs.rowwise().sum();
  const Eigen::RowVectorXd cols = obs.colwise().sum();
  const double n = obs.sum();
  if ((rows.array() == 0.0).any() || (cols.array() == 0.0).any()) {
    throw NumericalError("degenerate table: a row or column marginal is zero");
  }
  const Eigen::MatrixXd expected = rows * cols / n;
  const double chi2 = ((obs - expected).array().square() / expected.array()).sum();
  const double k = static_cast<double>(std::min(obs.rows(), obs.cols()) - 1);

  AssociationResult out;
  out.measure = AssociationMeasure::cramers_v;
  out.value = std::clamp(std::sqrt(chi2 / (n * k)), 0.0, 1.0);
  out.test = TestKind::chi_square;
  out.statistic = chi2;
  out.p_value = special::chi_square_sf(chi2, static_cast<double>((obs.rows() - 1) * (obs.cols() - 1)));
  out.n = static_cast<Index>(n);
  return out;
}

AssociationResult correlation_ratio(std::span<const int> groups, const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (static_cast<Index>(groups.size()) != y.size()) throw InputError("correlation_ratio: series lengths differ");
  std::map<int, std::pair<double, Index>> acc;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    auto& [sum, count] = acc[groups[i]];
    sum += y[static_cast<Index>(i)];
    ++count;
  }
  if (acc.size() < 2) throw NumericalError("correlation_ratio: need at least two groups");
  const double mean = y.mean();
  const double ss_total = (y.array() - mean).square().sum();
  if (ss_total == 0.0) throw NumericalError("correlation_ratio: outcome is constant");
  double ss_between = 0.0;
  for (const auto& [g, sc] : acc) {
    const double gm = sc.first / static_cast<double>(sc.second);
    ss_between += static_cast<double>(sc.second) * (gm - mean) * (gm - mean);
  }
  const double ss_within = std::max(0.0, ss_total - ss_between);
  const double k = static_cast<double>(acc.size());
  const double n = static_cast<double>(y.size());

  AssociationResult out;
  out.measure = AssociationMeasure::correlation_ratio;
  out.value = std::clamp(std::sqrt(ss_between / ss_total), 0.0, 1.0);
  out.test = TestKind::anova;
  out.n = y.size();
  if (n - k <= 0.0) {
    out.statistic = std::numeric_limits<double>::quiet_NaN();
    out.p_value = 1.0;
  } else if (ss_within == 0.0) {
    out.statistic = INFINITY;
    out.p_value = 0.0;
  } else {
    out.statistic = (ss_between / (k - 1.0)) / (ss_within / (n - k));
    out.p_value = special::f_sf(out.statistic, k - 1.0, n - k);
  }
  return out;
}

AssociationResult assoc_auto(const Dataset& d, std::string_view a, std::string_view b) {
  const auto& sa = d.schema().at(a);
  const auto& sb = d.schema().at(b);
  const bool ca = sa.kind == ColumnKind::continuous;
  const bool cb = sb.kind == ColumnKind::continuous;
  if (ca && cb) return pearson_r(d.column(a), d.column(b));
  if (!ca && !cb) {
    const auto la = column_labels(sa);
    const auto lb = column_labels(sb);
    return cramers_v(ContingencyTable::cross(d.codes(a), d.codes(b), la, lb));
  }
  if (ca) return correlation_ratio(d.codes(b), d.column(a));
  return correlation_ratio(d.codes(a), d.column(b));
}

AssociationResult fisher_exact_2x2(const ContingencyTable& t) {
  if (t.counts.rows() != 2 || t.counts.cols() != 2) throw InputError("fisher_exact_2x2 needs a 2x2 table");
  const std::int64_t a = t.counts(0, 0);
  const std::int64_t r1 = t.counts.row(0).sum();
  const std::int64_t r2 = t.counts.row(1).sum();
  const std::int64_t c1 = t.counts.col(0).sum();
  const std::int64_t n = r1 + r2;
  const std::int64_t lo = std::max<std::int64_t>(0, c1 - r2);
  const std::int64_t hi = std::min(r1, c1);

  AssociationResult out;
  out.measure = AssociationMeasure::cramers_v;
  out.test = TestKind::fisher_exact;
  out.n = static_cast<Index>(n);
  out.statistic = static_cast<double>(a);

  if (n <= 60) {
    // Integer weights C(r1, x) C(r2, c1 - x) are exact here; comparisons and
    // the sum are exact and only the final ratio is rounded.
    const u128 observed = binomial(r1, a) * binomial(r2, c1 - a);
    u128 tail = 0;
    u128 total = 0;
    for (std::int64_t x = lo; x <= hi; ++x) {
      const u128 w = binomial(r1, x) * binomial(r2, c1 - x);
      total += w;
      if (w <= observed) tail += w;
    }
    out.p_value = static_cast<double>(tail) / static_cast<double>(total);
  } else {
    const auto logw = [&](std::int64_t x) {
      return log_binomial(static_cast<double>(r1), static_cast<double>(x)) +
             log_binomial(static_cast<double>(r2), static_cast<double>(c1 - x)) -
             log_binomial(static_cast<double>(n), static_cast<double>(c1));
    };
    const double observed = logw(a);
    double p = 0.0;
    for (std::int64_t x = lo; x <= hi; ++x) {
      const double lw = logw(x);
      if (lw <= observed + 1e-7) p += std::exp(lw);
    }
    out.p_value = p;
  }
  out.p_value = std::clamp(out.p_value, 0.0, 1.0);

  // Phi magnitude as the accompanying effect size; zero when a margin is empty.
  const double c2 = static_cast<double>(n - c1);
  const double den = std::sqrt(static_cast<double>(r1) * static_cast<double>(r2) * static_cast<double>(c1) * c2);
  const double ad_bc = static_cast<double>(t.counts(0, 0)) * static_cast<double>(t.counts(1, 1)) -
                       static_cast<double>(t.counts(0, 1)) * static_cast<double>(t.counts(1, 0));
  out.value = den > 0.0 ? std::min(1.0, std::abs(ad_bc) / den) : 0.0;
  return out;
}

AssociationResult two_sample_t(const Eigen::Ref<const Eigen::VectorXd>& x, const Eigen::Ref<const Eigen::VectorXd>& y) {
  if (x.size() < 2 || y.size() < 2) throw InputError("two_sample_t: each sample needs at least 2 values");
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  const double mx = x.mean();
  const double my = y.mean();
  const double vx = (x.array() - mx).square().sum() / (nx - 1.0);
  const double vy = (y.array() - my).square().sum() / (ny - 1.0);
  const double se2 = vx / nx + vy / ny;
  if (se2 == 0.0) throw NumericalError("two_sample_t: degenerate variance");

  AssociationResult out;
  out.measure = AssociationMeasure::pearson;
  out.value = std::numeric_limits<double>::quiet_NaN();
  out.test = TestKind::t;
  out.n = x.size() + y.size();
  out.statistic = (mx - my) / std::sqrt(se2);
  const double df = se2 * se2 / ((vx / nx) * (vx / nx) / (nx - 1.0) + (vy / ny) * (vy / ny) / (ny - 1.0));
  out.p_value = std::clamp(special::student_t_two_sided(out.statistic, df), 0.0, 1.0);
  return out;
}

double selection_rate_ratio(std::span<const int> selected, std::span<const int> group) {
  if (selected.size() != group.size()) throw InputError("selection_rate_ratio: series lengths differ");
  double hits[2] = {0.0, 0.0};
  double sizes[2] = {0.0, 0.0};
  for (std::size_t i = 0; i < selected.size(); ++i) {
    if ((group[i] != 0 && group[i] != 1) || (selected[i] != 0 && selected[i] != 1)) {
      throw InputError("selection_rate_ratio: series must be 0/1");
    }
    sizes[group[i]] += 1.0;
    hits[group[i]] += selected[i];
  }
  if (sizes[0] == 0.0 || sizes[1] == 0.0) throw InputError("selection_rate_ratio: a group has no members");
  const double r0 = hits[0] / sizes[0];
  const double r1 = hits[1] / sizes[1];
  const double high = std::max(r0, r1);
  if (high == 0.0) return 1.0;
  return std::min(r0, r1) / high;
}

}  // namespace proxyaudit
