#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "bermudan/dual_martingale.hpp"
#include "bermudan/error.hpp"
#include "bermudan/market.hpp"
#include "bermudan/stopping.hpp"

namespace bermudan {

/// Monte-Carlo price with the standard deviation of the estimator
/// (sample standard deviation / sqrt(q)).
struct PriceEstimate {
  double mean = 0.0;
  std::optional<double> std_error;  // absent when q < 2
  std::size_t q = 0;
  std::optional<double> lambda;     // control-variate coefficient, when used
};

struct SampleMoments {
  double mean = 0.0;
  double variance = 0.0;  // unbiased; 0 when fewer than two samples
};

/// Two-pass mean and unbiased variance, summed in index order.
inline SampleMoments sample_moments(std::span<const double> x) {
  SampleMoments out;
  if (x.empty()) return out;
  double sum = 0.0;
  for (double v : x) sum += v;
  out.mean = sum / static_cast<double>(x.size());
  if (x.size() < 2) return out;
  double sq = 0.0;
  for (double v : x) sq += (v - out.mean) * (v - out.mean);
  out.variance = sq / static_cast<double>(x.size() - 1);
  return out;
}

inline PriceEstimate estimate_from_samples(std::span<const double> samples) {
  detail::require(!samples.empty(), "estimator: no samples");
  const auto mom = sample_moments(samples);
  PriceEstimate est{mom.mean, std::nullopt, samples.size(), std::nullopt};
  if (samples.size() >= 2) est.std_error = std::sqrt(mom.variance / static_cast<double>(samples.size()));
  return est;
}

/// Z_{tau} per path.
inline std::vector<double> stopped_values(const PayoffMatrix& z, const StopTimes& tau) {
  detail::require(z.paths() == tau.size(), "stopped_values: path count mismatch");
  std::vector<double> out(z.paths());
  for (std::size_t i = 0; i < out.size(); ++i) {
    detail::require(tau[i] < z.dates(), "stopped_values: stopping index out of range");
    out[i] = z(i, tau[i]);
  }
  return out;
}

/// M_{tau} per path.
inline std::vector<double> stopped_values(const MartingaleMatrix& m, const StopTimes& tau) {
  detail::require(m.paths() == tau.size(), "stopped_values: path count mismatch");
  std::vector<double> out(m.paths());
  for (std::size_t i = 0; i < out.size(); ++i) {
    detail::require(tau[i] < m.dates(), "stopped_values: stopping index out of range");
    out[i] = m(i, tau[i]);
  }
  return out;
}

/// Plain estimator (1/Q) sum Z_{tau}.
inline PriceEstimate mc_price(const PayoffMatrix& z, const StopTimes& tau) {
  return estimate_from_samples(stopped_values(z, tau));
}

/// Control-variate samples Z_tau - lambda M_tau with the uncentred
/// lambda = sum Z_tau M_tau / sum M_tau^2.
inline PriceEstimate cv_price(const PayoffMatrix& z, const MartingaleMatrix& m,
                              const StopTimes& tau) {
  detail::require(z.paths() == m.paths() && z.dates() == m.dates(),
                  "cv_price: payoff/martingale shape mismatch");
  const auto payoff = stopped_values(z, tau);
  const auto hedge = stopped_values(m, tau);
  double cross = 0.0, square = 0.0;
  for (std::size_t i = 0; i < payoff.size(); ++i) {
    cross += payoff[i] * hedge[i];
    square += hedge[i] * hedge[i];
  }
  if (!(square > 0.0)) return estimate_from_samples(payoff);

  const double lambda = cross / square;
  std::vector<double> samples(payoff.size());
  for (std::size_t i = 0; i < samples.size(); ++i) samples[i] = payoff[i] - lambda * hedge[i];
  auto est = estimate_from_samples(samples);
  est.lambda = lambda;
  return est;
}

/// max_n (Z_n - M_n) per path.
inline std::vector<double> pathwise_maxima(const PayoffMatrix& z, const MartingaleMatrix& m) {
  detail::require(z.paths() == m.paths() && z.dates() == m.dates(),
                  "dual_price: payoff/martingale shape mismatch");
  std::vector<double> out(z.paths());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double best = z(i, 0) - m(i, 0);
    for (std::size_t n = 1; n < z.dates(); ++n) best = std::max(best, z(i, n) - m(i, n));
    out[i] = best;
  }
  return out;
}

/// Upper-bound estimator (1/Q) sum max_n (Z_n - M_n).
inline PriceEstimate dual_price(const PayoffMatrix& z, const MartingaleMatrix& m) {
  return estimate_from_samples(pathwise_maxima(z, m));
}

/// Within-run against across-run dispersion of repeated LS runs.
struct VarianceDecomposition {
  double within_run_var = 0.0;  // mean per-run sample variance, estimates Var(G1)
  double total_var = 0.0;       // q * variance of the run means, estimates Var(G1 + G2)
  std::size_t runs = 0;
  std::size_t q = 0;

  /// Estimator-scale standard deviations.
  double within_stddev() const { return std::sqrt(within_run_var / static_cast<double>(q)); }
  double total_stddev() const { return std::sqrt(total_var / static_cast<double>(q)); }
  /// Approximate standard error of total_stddev() (Gaussian run means).
  double total_stddev_error() const {
    return total_stddev() / std::sqrt(2.0 * static_cast<double>(runs - 1));
  }
};

inline VarianceDecomposition variance_decomposition(
    std::span<const std::vector<double>> run_samples) {
  detail::require(run_samples.size() >= 2, "variance_decomposition: need at least two runs");
  const std::size_t q = run_samples.front().size();
  detail::require(q >= 2, "variance_decomposition: need at least two samples per run");
  std::vector<double> means;
  means.reserve(run_samples.size());
  double within = 0.0;
  for (const auto& run : run_samples) {
    detail::require(run.size() == q, "variance_decomposition: runs must have equal size");
    const auto mom = sample_moments(run);
    means.push_back(mom.mean);
    within += mom.variance;
  }
  VarianceDecomposition out;
  out.runs = run_samples.size();
  out.q = q;
  out.within_run_var = within / static_cast<double>(out.runs);
  out.total_var = static_cast<double>(q) * sample_moments(means).variance;
  return out;
}

}  // namespace bermudan
