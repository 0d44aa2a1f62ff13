#pragma once

#include <Eigen/Core>
#include <Eigen/Householder>

#include <algorithm>
#include <vector>

namespace proxyaudit {

/// Rank-revealing Householder QR with greedy column pivoting on an
/// equilibrated copy of `X` (every column scaled to unit Euclidean norm).
///
/// At step k the remaining column with the largest residual norm is pivoted
/// in (ties go to the lowest original index). Decomposition stops when that
/// norm falls below `tolerance` times the leading pivot; the remaining columns
/// are reported as linearly dependent. All-zero columns are dependent from
/// the start.
template <typename Scalar>
class PivotedQR {
 public:
  using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  template <typename Derived>
  explicit PivotedQR(const Eigen::MatrixBase<Derived>& X, Scalar tolerance = Scalar(1e-10))
      : cols_(X.cols()), scale_(X.cols()) {
    Matrix work = X;
    const Eigen::Index n = work.rows();
    const Eigen::Index p = work.cols();
    for (Eigen::Index j = 0; j < p; ++j) {
      scale_[j] = work.col(j).norm();
      if (scale_[j] > Scalar(0)) work.col(j) /= scale_[j];
    }
    std::vector<Eigen::Index> remaining;
    for (Eigen::Index j = 0; j < p; ++j) {
      if (scale_[j] > Scalar(0)) {
        remaining.push_back(j);
      } else {
        dependent_.push_back(j);
      }
    }

    Scalar lead = Scalar(0);
    Eigen::Index k = 0;
    for (; k < std::min(n, p) && !remaining.empty(); ++k) {
      // Near-ties (relative 1e-12) resolve to the lowest original index so
      // that which of two duplicated columns survives does not hinge on ulps.
      std::vector<Scalar> norms(remaining.size());
      Scalar max_norm = Scalar(0);
      for (std::size_t r = 0; r < remaining.size(); ++r) {
        norms[r] = work.col(remaining[r]).tail(n - k).norm();
        max_norm = std::max(max_norm, norms[r]);
      }
      std::size_t best = 0;
      while (norms[best] < max_norm * (Scalar(1) - Scalar(1e-12))) ++best;
      const Scalar best_norm = norms[best];
      if (k == 0) lead = best_norm;
      if (best_norm <= tolerance * lead) break;

      const Eigen::Index col = remaining[best];
      remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(best));
      pivots_.push_back(col);

      Scalar tau;
      Scalar beta;
      auto v = work.col(col).tail(n - k);
      v.makeHouseholderInPlace(tau, beta);
      Vector essential = v.tail(n - k - 1);
      v.setZero();
      v[0] = beta;
      Scalar ws;
      for (Eigen::Index other : remaining) {
        work.col(other).tail(n - k).applyHouseholderOnTheLeft(essential, tau, &ws);
      }
      reflectors_.push_back({std::move(essential), tau});
    }
    for (Eigen::Index col : remaining) dependent_.push_back(col);
    std::sort(dependent_.begin(), dependent_.end());

    const auto rank = static_cast<Eigen::Index>(pivots_.size());
    r_ = Matrix::Zero(rank, rank);
    for (Eigen::Index a = 0; a < rank; ++a) {
      for (Eigen::Index b = 0; b <= a; ++b) r_(b, a) = work(b, pivots_[static_cast<std::size_t>(a)]);
    }
  }

  Eigen::Index rank() const { return static_cast<Eigen::Index>(pivots_.size()); }

  /// Original indices of columns judged linearly dependent, ascending.
  const std::vector<Eigen::Index>& dependent() const { return dependent_; }

  /// Least-squares coefficients for the original (unscaled) columns; dependent
  /// columns get exactly zero.
  template <typename DerivedY>
  Vector solve(const Eigen::MatrixBase<DerivedY>& y) const {
    Vector rhs = y;
    const Eigen::Index n = rhs.size();
    for (std::size_t k = 0; k < reflectors_.size(); ++k) {
      const auto kk = static_cast<Eigen::Index>(k);
      Scalar ws;
      rhs.tail(n - kk).applyHouseholderOnTheLeft(reflectors_[k].essential, reflectors_[k].tau, &ws);
    }
    const Eigen::Index rank = this->rank();
    Vector z = r_.template triangularView<Eigen::Upper>().solve(rhs.head(rank));
    Vector beta = Vector::Zero(cols_);
    for (Eigen::Index a = 0; a < rank; ++a) {
      const auto col = pivots_[static_cast<std::size_t>(a)];
      beta[col] = z[a] / scale_[col];
    }
    return beta;
  }

 private:
  struct Reflector {
    Vector essential;
    Scalar tau;
  };

  Eigen::Index cols_;
  Vector scale_;
  Matrix r_;
  std::vector<Eigen::Index> pivots_;
  std::vector<Eigen::Index> dependent_;
  std::vector<Reflector> reflectors_;
};

/// Solves min ||X b - y|| with dependent columns pinned to zero.
template <typename DerivedX, typename DerivedY>
auto least_squares(const Eigen::MatrixBase<DerivedX>& X, const Eigen::MatrixBase<DerivedY>& y,
                   typename DerivedX::Scalar tolerance = typename DerivedX::Scalar(1e-10)) {
  return PivotedQR<typename DerivedX::Scalar>(X, tolerance).solve(y);
}

}  // namespace proxyaudit
