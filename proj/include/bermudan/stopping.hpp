#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "bermudan/dual_martingale.hpp"
#include "bermudan/error.hpp"
#include "bermudan/market.hpp"
#include "bermudan/parallel.hpp"
#include "bermudan/regression.hpp"

namespace bermudan {

/// Longstaff-Schwartz flavours.
///   LS1      regress Z_{tau_{n+1}},                          exercise if Z_n >= estimate
///   LS2      regress Z_{tau_{n+1}} - M_{tau_{n+1}} + M_n,    exercise if Z_n >= estimate
///   LS2Prime regress Z_{tau_{n+1}} - M_{tau_{n+1}},          exercise if Z_n - M_n >= estimate
enum class PolicyVariant { LS1, LS2, LS2Prime };

inline std::string_view to_string(PolicyVariant v) {
  switch (v) {
    case PolicyVariant::LS1: return "LS1";
    case PolicyVariant::LS2: return "LS2";
    case PolicyVariant::LS2Prime: return "LS2prime";
  }
  return "unknown";
}

inline PolicyVariant parse_policy_variant(std::string_view name) {
  if (name == "LS1" || name == "ls1") return PolicyVariant::LS1;
  if (name == "LS2" || name == "ls2") return PolicyVariant::LS2;
  if (name == "LS2prime" || name == "ls2prime") return PolicyVariant::LS2Prime;
  throw ValidationError("unknown policy variant '" + std::string(name) + "'");
}

inline bool needs_martingale(PolicyVariant v) { return v != PolicyVariant::LS1; }

/// Regression basis per exercise date; either one basis for all dates or one
/// entry per date 0..N.
class PolicyBasis {
 public:
  PolicyBasis(RegressionBasis uniform) : bases_{std::move(uniform)} {}  // NOLINT
  explicit PolicyBasis(std::vector<RegressionBasis> per_date) : bases_(std::move(per_date)) {
    detail::require(!bases_.empty(), "policy basis: empty");
  }

  const RegressionBasis& at(std::size_t n) const {
    return bases_.size() == 1 ? bases_.front() : bases_.at(n);
  }
  bool uniform() const { return bases_.size() == 1; }
  std::size_t size() const { return bases_.size(); }

 private:
  std::vector<RegressionBasis> bases_;
};

struct PolicyOptions {
  /// Regress on, and only consider exercising, paths with Z_n > 0.
  bool itm_only = false;
  /// Optional per-path weights for the regressions (exact enumerations).
  std::span<const double> weights{};
};

/// Frozen continuation-value regressions for dates 1..N-1, plus the
/// constant estimate used at the deterministic date 0.
struct PolicyRegressors {
  PolicyVariant variant = PolicyVariant::LS1;
  std::size_t last_date = 1;  // N
  std::vector<Eigen::VectorXd> coefficients;  // index n; empty at 0 and N
  double date0_estimate = 0.0;
  PolicyBasis basis = PolicyBasis(RegressionBasis(PolynomialBasis{}));
  bool itm_only = false;

  double continuation(std::size_t n, std::span<const double> state,
                      std::span<double> scratch) const {
    const RegressionBasis& b = basis.at(n);
    evaluate_features(b, state, scratch);
    const Eigen::VectorXd& beta = coefficients[n];
    double value = 0.0;
    for (Eigen::Index f = 0; f < beta.size(); ++f) value += beta[f] * scratch[f];
    return value;
  }
};

/// Exercise index per path.
struct StopTimes {
  std::vector<std::size_t> tau;
  std::size_t last_date = 0;

  std::size_t size() const { return tau.size(); }
  std::size_t operator[](std::size_t i) const { return tau[i]; }
};

namespace detail {

inline double regressand(PolicyVariant v, double z_tau, double m_tau, double m_n) {
  switch (v) {
    case PolicyVariant::LS1: return z_tau;
    case PolicyVariant::LS2: return z_tau - m_tau + m_n;
    case PolicyVariant::LS2Prime: return z_tau - m_tau;
  }
  return z_tau;
}

// Ties exercise. A zero payoff never does: stopping for nothing cannot beat
// continuing on a non-negative claim.
inline bool exercise(PolicyVariant v, double z_n, double m_n, double estimate) {
  if (!(z_n > 0.0)) return false;
  const double own = v == PolicyVariant::LS2Prime ? z_n - m_n : z_n;
  return own >= estimate;
}

inline void check_policy_inputs(const PayoffMatrix& z, const MartingaleMatrix* m,
                                const PathBatch& paths, PolicyVariant variant) {
  detail::require(z.paths() == paths.paths(), "policy: payoff/path count mismatch");
  detail::require(z.dates() == paths.model().exercise_dates + 1,
                  "policy: payoff/date count mismatch");
  if (needs_martingale(variant)) {
    detail::require(m != nullptr, "policy: variant " + std::string(to_string(variant)) +
                                      " needs a martingale matrix");
  }
  if (m != nullptr) {
    detail::require(m->paths() == z.paths() && m->dates() == z.dates(),
                    "policy: martingale matrix shape mismatch");
  }
}

inline double martingale_at(const MartingaleMatrix* m, std::size_t i, std::size_t n) {
  return m == nullptr ? 0.0 : (*m)(i, n);
}

}  // namespace detail

/// Backward Longstaff-Schwartz regressions on the exercise-date states.
inline PolicyRegressors fit_policy(const PayoffMatrix& z, const MartingaleMatrix* m,
                                   const PathBatch& paths, const PolicyBasis& basis,
                                   PolicyVariant variant, const PolicyOptions& options = {}) {
  detail::check_policy_inputs(z, m, paths, variant);
  const std::size_t q = z.paths();
  const std::size_t big_n = z.last_date();
  detail::require(options.weights.empty() || options.weights.size() == q,
                  "fit_policy: one weight per path");
  if (!basis.uniform()) {
    detail::require(basis.size() == big_n + 1, "fit_policy: need one basis per date");
  }

  PolicyRegressors reg{variant, big_n, std::vector<Eigen::VectorXd>(big_n + 1), 0.0, basis,
                       options.itm_only};
  std::vector<std::size_t> tau(q, big_n);
  auto target = [&](std::size_t i, std::size_t n) {
    return detail::regressand(variant, z(i, tau[i]), detail::martingale_at(m, i, tau[i]),
                              detail::martingale_at(m, i, n));
  };

  for (std::size_t n = big_n; n-- > 1;) {
    const RegressionBasis& b = basis.at(n);
    detail::require(state_dimension(b) == paths.assets(), "fit_policy: basis dimension mismatch");
    const std::size_t width = feature_count(b);

    std::vector<std::size_t> rows;
    rows.reserve(q);
    for (std::size_t i = 0; i < q; ++i) {
      if (!options.itm_only || z(i, n) > 0.0) rows.push_back(i);
    }
    if (rows.empty()) {
      reg.coefficients[n] = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(width));
      continue;
    }

    Eigen::MatrixXd features(static_cast<Eigen::Index>(rows.size()),
                             static_cast<Eigen::Index>(width));
    std::vector<double> targets(rows.size());
    std::vector<double> weights;
    if (!options.weights.empty()) weights.resize(rows.size());
    parallel_for_chunks(rows.size(), [&](std::size_t begin, std::size_t end, std::size_t) {
      std::vector<double> phi(width);
      for (std::size_t r = begin; r < end; ++r) {
        const std::size_t i = rows[r];
        evaluate_features(b, paths.exercise_state(i, n), phi);
        for (std::size_t f = 0; f < width; ++f) {
          features(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(f)) = phi[f];
        }
        targets[r] = target(i, n);
        if (!weights.empty()) weights[r] = options.weights[i];
      }
    });
    reg.coefficients[n] = least_squares_fit(features, targets, weights).coefficients;

    parallel_for_chunks(rows.size(), [&](std::size_t begin, std::size_t end, std::size_t) {
      std::vector<double> scratch(width);
      for (std::size_t r = begin; r < end; ++r) {
        const std::size_t i = rows[r];
        const double estimate = reg.continuation(n, paths.exercise_state(i, n), scratch);
        if (detail::exercise(variant, z(i, n), detail::martingale_at(m, i, n), estimate)) {
          tau[i] = n;
        }
      }
    });
  }

  // Date 0: S_0 is deterministic, so the projection is onto constants.
  double total = 0.0, mass = 0.0;
  for (std::size_t i = 0; i < q; ++i) {
    const double w = options.weights.empty() ? 1.0 : options.weights[i];
    total += w * target(i, 0);
    mass += w;
  }
  reg.date0_estimate = total / mass;
  return reg;
}

/// Out-of-sample stopping with frozen regressors: the first date whose
/// payoff beats the continuation estimate, else N.
inline StopTimes apply_policy(const PolicyRegressors& reg, const PayoffMatrix& z,
                              const MartingaleMatrix* m, const PathBatch& paths) {
  detail::check_policy_inputs(z, m, paths, reg.variant);
  detail::require(z.last_date() == reg.last_date, "apply_policy: exercise date count mismatch");
  for (std::size_t n = 1; n < reg.last_date; ++n) {
    const RegressionBasis& b = reg.basis.at(n);
    detail::require(state_dimension(b) == paths.assets(),
                    "apply_policy: basis dimension mismatch");
    detail::require(static_cast<std::size_t>(reg.coefficients[n].size()) == feature_count(b),
                    "apply_policy: coefficient length mismatch");
  }

  StopTimes result{std::vector<std::size_t>(z.paths(), reg.last_date), reg.last_date};
  std::size_t widest = 1;
  for (std::size_t n = 1; n < reg.last_date; ++n) {
    widest = std::max(widest, feature_count(reg.basis.at(n)));
  }
  parallel_for_chunks(z.paths(), [&](std::size_t begin, std::size_t end, std::size_t) {
    std::vector<double> scratch(widest);
    for (std::size_t i = begin; i < end; ++i) {
      if (detail::exercise(reg.variant, z(i, 0), detail::martingale_at(m, i, 0),
                           reg.date0_estimate)) {
        result.tau[i] = 0;
        continue;
      }
      for (std::size_t n = 1; n < reg.last_date; ++n) {
        if (reg.itm_only && !(z(i, n) > 0.0)) continue;
        const double estimate = reg.continuation(n, paths.exercise_state(i, n), scratch);
        if (detail::exercise(reg.variant, z(i, n), detail::martingale_at(m, i, n), estimate)) {
          result.tau[i] = n;
          break;
        }
      }
    }
  });
  return result;
}

/// Random time driven by a martingale, together with the pathwise quantities
/// it attains.
struct ProxyResult {
  StopTimes tau0;
  std::vector<double> u0hat;    // U_hat_0 per path
  std::vector<double> pathmax;  // max_n (Z_n - M_n) per path
};

/// U_hat_N = Z_N, U_hat_n = max(Z_n, U_hat_{n+1} + M_n - M_{n+1}); tau_hat
/// stops at n when Z_n >= U_hat_{n+1} + M_n - M_{n+1}. Both are evaluated
/// after subtracting M_n, where U_hat_n - M_n is the running maximum of
/// Z - M, so the attained value equals the pathwise maximum bit for bit.
inline ProxyResult proxy_policy(const PayoffMatrix& z, const MartingaleMatrix& m) {
  detail::require(z.paths() == m.paths() && z.dates() == m.dates(),
                  "proxy_policy: payoff/martingale shape mismatch");
  const std::size_t q = z.paths();
  const std::size_t big_n = z.last_date();
  ProxyResult out{StopTimes{std::vector<std::size_t>(q, big_n), big_n},
                  std::vector<double>(q), std::vector<double>(q)};
  parallel_for_chunks(q, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t i = begin; i < end; ++i) {
      double envelope = z(i, big_n) - m(i, big_n);  // U_hat_{n} - M_{n}
      std::size_t tau = big_n;
      for (std::size_t n = big_n; n-- > 0;) {
        const double own = z(i, n) - m(i, n);
        if (own >= envelope) {
          tau = n;
          envelope = own;
        }
      }
      out.tau0.tau[i] = tau;
      out.pathmax[i] = envelope;
      out.u0hat[i] = envelope + m(i, 0);
    }
  });
  return out;
}

/// U_hat_0..U_hat_N along one path by the recursion exactly as written.
inline std::vector<double> proxy_envelope(std::span<const double> z, std::span<const double> m) {
  detail::require(z.size() == m.size() && !z.empty(), "proxy_envelope: length mismatch");
  std::vector<double> u(z.size());
  const std::size_t big_n = z.size() - 1;
  u[big_n] = z[big_n];
  for (std::size_t n = big_n; n-- > 0;) u[n] = std::max(z[n], u[n + 1] + m[n] - m[n + 1]);
  return u;
}

/// Counts of a_i - b_i over the values -N..N.
struct PolicyHistogram {
  std::size_t last_date = 0;
  std::vector<std::size_t> counts;  // counts[diff + N]

  std::size_t count(long diff) const {
    const long n = static_cast<long>(last_date);
    if (diff < -n || diff > n) return 0;
    return counts[static_cast<std::size_t>(diff + n)];
  }
  std::size_t total() const {
    std::size_t t = 0;
    for (auto c : counts) t += c;
    return t;
  }

  /// Two columns, `difference,count`, one row per value in -N..N.
  void write_csv(std::ostream& out) const {
    out << "difference,count\n";
    const long n = static_cast<long>(last_date);
    for (long diff = -n; diff <= n; ++diff) out << diff << ',' << count(diff) << '\n';
  }
};

inline PolicyHistogram policy_histogram(const StopTimes& a, const StopTimes& b) {
  detail::require(a.size() == b.size(), "policy_histogram: path count mismatch");
  detail::require(a.last_date == b.last_date, "policy_histogram: date count mismatch");
  PolicyHistogram h{a.last_date, std::vector<std::size_t>(2 * a.last_date + 1, 0)};
  for (std::size_t i = 0; i < a.size(); ++i) {
    const long diff = static_cast<long>(a[i]) - static_cast<long>(b[i]);
    ++h.counts[static_cast<std::size_t>(diff + static_cast<long>(a.last_date))];
  }
  return h;
}

}  // namespace bermudan
