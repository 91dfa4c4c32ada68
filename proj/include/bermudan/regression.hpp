#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "bermudan/error.hpp"

namespace bermudan {

/// Relative singular-value cutoff below which a direction gets zero weight.
inline constexpr double kRankTolerance = 1e-10;

/// All monomials of total degree <= degree in `dim` variables. Each variable
/// is divided by its scale before exponentiation to keep high orders
/// well conditioned.
struct PolynomialBasis {
  std::size_t degree = 0;
  std::size_t dim = 1;
  std::vector<std::vector<unsigned>> exponents;
  std::vector<double> scale;

  std::size_t size() const { return exponents.size(); }
};

inline PolynomialBasis build_polynomial_basis(std::size_t degree, std::size_t dim,
                                              std::vector<double> scale = {}) {
  detail::require(dim >= 1, "polynomial basis: dimension must be >= 1");
  if (scale.empty()) scale.assign(dim, 1.0);
  detail::require(scale.size() == dim, "polynomial basis: one scale per dimension");
  for (double s : scale) detail::require(s > 0.0, "polynomial basis: scales must be positive");

  PolynomialBasis basis{degree, dim, {}, std::move(scale)};
  // Graded order: constant first, then by total degree.
  std::vector<unsigned> current(dim, 0);
  for (std::size_t total = 0; total <= degree; ++total) {
    // Compositions of `total` into `dim` parts, first exponent descending.
    auto emit = [&](auto&& self, std::size_t k, std::size_t remaining) -> void {
      if (k + 1 == dim) {
        current[k] = static_cast<unsigned>(remaining);
        basis.exponents.push_back(current);
        return;
      }
      for (std::size_t e = remaining + 1; e-- > 0;) {
        current[k] = static_cast<unsigned>(e);
        self(self, k + 1, remaining - e);
      }
    };
    emit(emit, 0, total);
  }
  return basis;
}

/// Per-dimension indicator cells. Cell p of dimension k is
/// [breakpoints[k][p-1], breakpoints[k][p]); a state equal to a threshold
/// belongs to the cell on its right.
struct LocalBasis {
  std::size_t bins = 1;
  std::vector<std::vector<double>> breakpoints;

  std::size_t dim() const { return breakpoints.size(); }
  std::size_t size() const { return bins * dim(); }

  std::size_t cell(std::size_t k, double x) const {
    const auto& b = breakpoints[k];
    return static_cast<std::size_t>(std::upper_bound(b.begin(), b.end(), x) - b.begin());
  }

  void validate() const {
    detail::require(bins >= 1, "local basis: need at least one bin");
    detail::require(!breakpoints.empty(), "local basis: dimension must be >= 1");
    for (const auto& b : breakpoints) {
      detail::require(b.size() + 1 == bins, "local basis: need bins - 1 thresholds");
      for (std::size_t p = 0; p < b.size(); ++p) {
        detail::require(std::isfinite(b[p]), "local basis: thresholds must be finite");
        detail::require(p == 0 || b[p - 1] < b[p],
                        "local basis: thresholds must be strictly increasing");
      }
    }
  }
};

/// Equal-occupancy cells: threshold p sits at the sorted sample of rank
/// floor(p q / P). `samples` is row-major, q rows of `dim` values. Repeated
/// quantiles are nudged upward so thresholds stay strictly increasing.
inline LocalBasis build_local_basis(std::span<const double> samples, std::size_t dim,
                                    std::size_t bins) {
  detail::require(dim >= 1 && bins >= 1, "local basis: dimension and bins must be >= 1");
  detail::require(samples.size() % dim == 0, "local basis: ragged samples");
  const std::size_t q = samples.size() / dim;
  detail::require(q >= bins, "local basis: need at least P samples per dimension");

  LocalBasis basis{bins, std::vector<std::vector<double>>(dim)};
  std::vector<double> column(q);
  for (std::size_t k = 0; k < dim; ++k) {
    for (std::size_t i = 0; i < q; ++i) column[i] = samples[i * dim + k];
    std::sort(column.begin(), column.end());
    if (bins > 1) {
      detail::require(column.front() < column.back(),
                      "local basis: degenerate samples (all values equal)");
    }
    auto& b = basis.breakpoints[k];
    b.reserve(bins - 1);
    for (std::size_t p = 1; p < bins; ++p) {
      double threshold = column[p * q / bins];
      if (!b.empty() && threshold <= b.back()) {
        threshold = std::nextafter(b.back(), std::numeric_limits<double>::infinity());
      }
      b.push_back(threshold);
    }
  }
  return basis;
}

/// Cells placed so that every state at or below `value` falls in cell 0.
/// Used where the state is deterministic (e.g. at t = 0).
inline LocalBasis point_mass_basis(std::span<const double> value, std::size_t bins) {
  LocalBasis basis{bins, std::vector<std::vector<double>>(value.size())};
  for (std::size_t k = 0; k < value.size(); ++k) {
    double threshold = value[k];
    for (std::size_t p = 1; p < bins; ++p) {
      threshold = std::nextafter(threshold, std::numeric_limits<double>::infinity());
      basis.breakpoints[k].push_back(threshold);
    }
  }
  return basis;
}

using RegressionBasis = std::variant<PolynomialBasis, LocalBasis>;

inline std::size_t feature_count(const RegressionBasis& basis) {
  return std::visit([](const auto& b) { return b.size(); }, basis);
}

inline std::size_t state_dimension(const RegressionBasis& basis) {
  return std::visit(
      [](const auto& b) -> std::size_t {
        if constexpr (std::is_same_v<std::decay_t<decltype(b)>, PolynomialBasis>) {
          return b.dim;
        } else {
          return b.dim();
        }
      },
      basis);
}

inline void evaluate_features(const PolynomialBasis& basis, std::span<const double> state,
                              std::span<double> out) {
  detail::require(state.size() == basis.dim, "features: state dimension mismatch");
  // powers[k][e] = (x_k / scale_k)^e
  thread_local std::vector<double> powers;
  const std::size_t stride = basis.degree + 1;
  powers.resize(basis.dim * stride);
  for (std::size_t k = 0; k < basis.dim; ++k) {
    const double x = state[k] / basis.scale[k];
    powers[k * stride] = 1.0;
    for (std::size_t e = 1; e <= basis.degree; ++e) {
      powers[k * stride + e] = powers[k * stride + e - 1] * x;
    }
  }
  for (std::size_t f = 0; f < basis.size(); ++f) {
    double value = 1.0;
    for (std::size_t k = 0; k < basis.dim; ++k) value *= powers[k * stride + basis.exponents[f][k]];
    out[f] = value;
  }
}

inline void evaluate_features(const LocalBasis& basis, std::span<const double> state,
                              std::span<double> out) {
  detail::require(state.size() == basis.dim(), "features: state dimension mismatch");
  std::fill(out.begin(), out.begin() + static_cast<std::ptrdiff_t>(basis.size()), 0.0);
  for (std::size_t k = 0; k < basis.dim(); ++k) {
    out[k * basis.bins + basis.cell(k, state[k])] = 1.0;
  }
}

inline void evaluate_features(const RegressionBasis& basis, std::span<const double> state,
                              std::span<double> out) {
  std::visit([&](const auto& b) { evaluate_features(b, state, out); }, basis);
}

inline std::vector<double> evaluate_features(const RegressionBasis& basis,
                                             std::span<const double> state) {
  std::vector<double> out(feature_count(basis));
  evaluate_features(basis, state, out);
  return out;
}

struct LeastSquaresResult {
  Eigen::VectorXd coefficients;
  std::size_t rank = 0;
  double residual_norm = 0.0;
};

/// Minimum-norm minimizer of sum_i w_i (y_i - x_i . beta)^2 via SVD;
/// singular values below kRankTolerance * max get zero weight.
inline LeastSquaresResult least_squares_fit(const Eigen::MatrixXd& features,
                                            std::span<const double> targets,
                                            std::span<const double> weights = {}) {
  const auto q = features.rows();
  detail::require(q >= 1 && features.cols() >= 1, "least squares: empty problem");
  detail::require(static_cast<std::size_t>(q) == targets.size(),
                  "least squares: target count does not match rows");
  detail::require(weights.empty() || weights.size() == targets.size(),
                  "least squares: weight count does not match rows");
  detail::require(features.allFinite(), "least squares: non-finite features");

  Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(targets.data(), q);
  detail::require(y.allFinite(), "least squares: non-finite targets");
  Eigen::MatrixXd a = features;
  if (!weights.empty()) {
    for (Eigen::Index i = 0; i < q; ++i) {
      detail::require(weights[i] >= 0.0 && std::isfinite(weights[i]),
                      "least squares: weights must be finite and non-negative");
      const double root = std::sqrt(weights[i]);
      a.row(i) *= root;
      y[i] *= root;
    }
  }

  Eigen::JacobiSVD<Eigen::MatrixXd, Eigen::ColPivHouseholderQRPreconditioner> svd(
      a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  svd.setThreshold(kRankTolerance);
  LeastSquaresResult result;
  result.coefficients = svd.solve(y);
  result.rank = static_cast<std::size_t>(svd.rank());
  result.residual_norm = (y - a * result.coefficients).norm();
  return result;
}

/// Accumulates X^T W X and X^T W y from sparse rows. Used where the design
/// matrix is too large to hold (one row per path, few non-zeros per row).
class NormalEquations {
 public:
  explicit NormalEquations(std::size_t features)
      : gram_(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(features),
                                    static_cast<Eigen::Index>(features))),
        rhs_(Eigen::VectorXd::Zero(static_cast<Eigen::Index>(features))) {}

  std::size_t features() const { return static_cast<std::size_t>(rhs_.size()); }

  void add(std::span<const std::size_t> index, std::span<const double> value, double target,
           double weight = 1.0) {
    for (std::size_t a = 0; a < index.size(); ++a) {
      const double wa = weight * value[a];
      rhs_[index[a]] += wa * target;
      for (std::size_t b = 0; b < index.size(); ++b) {
        gram_(index[a], index[b]) += wa * value[b];
      }
    }
    target_sq_ += weight * target * target;
    ++rows_;
  }

  void merge(const NormalEquations& other) {
    gram_ += other.gram_;
    rhs_ += other.rhs_;
    target_sq_ += other.target_sq_;
    rows_ += other.rows_;
  }

  /// Pseudo-inverse solve through the eigendecomposition of the Gram matrix.
  /// Its eigenvalues are squared singular values of the design, so the cutoff
  /// is the square of the dense one, floored at the Gram's rounding level.
  LeastSquaresResult solve() const {
    detail::require(gram_.allFinite() && rhs_.allFinite(),
                    "normal equations: non-finite accumulation");
    LeastSquaresResult result;
    const auto n = rhs_.size();
    result.coefficients = Eigen::VectorXd::Zero(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram_);
    const Eigen::VectorXd& lambda = eig.eigenvalues();
    const double top = lambda.cwiseAbs().maxCoeff();
    if (top > 0.0) {
      const double floor = std::max(kRankTolerance * kRankTolerance,
                                    static_cast<double>(n) *
                                        std::numeric_limits<double>::epsilon());
      const Eigen::VectorXd projected = eig.eigenvectors().transpose() * rhs_;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (lambda[i] > floor * top) {
          result.coefficients += eig.eigenvectors().col(i) * (projected[i] / lambda[i]);
          ++result.rank;
        }
      }
    }
    const double rss = target_sq_ - 2.0 * result.coefficients.dot(rhs_) +
                       result.coefficients.dot(gram_ * result.coefficients);
    result.residual_norm = std::sqrt(std::max(0.0, rss));
    return result;
  }

  const Eigen::MatrixXd& gram() const { return gram_; }
  const Eigen::VectorXd& rhs() const { return rhs_; }
  std::size_t rows() const { return rows_; }

 private:
  Eigen::MatrixXd gram_;
  Eigen::VectorXd rhs_;
  double target_sq_ = 0.0;
  std::size_t rows_ = 0;
};

}  // namespace bermudan
