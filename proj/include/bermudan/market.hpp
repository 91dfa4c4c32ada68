#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "bermudan/error.hpp"
#include "bermudan/parallel.hpp"
#include "bermudan/rng.hpp"

namespace bermudan {

/// Multi-asset Black-Scholes market with independent drivers, observed on a
/// fine grid of `subticks` regular steps per exercise interval.
struct ModelSpec {
  std::size_t assets = 1;
  std::vector<double> s0{100.0};
  double rate = 0.0;
  std::vector<double> dividend{0.0};
  std::vector<double> sigma{0.2};
  double maturity = 1.0;
  std::size_t exercise_dates = 1;  // N; dates T_0 = 0, ..., T_N = maturity
  std::size_t subticks = 1;        // sub-steps per exercise interval

  void validate() const {
    detail::require(assets >= 1, "model: asset count must be >= 1");
    detail::require(s0.size() == assets, "model: s0 must have one entry per asset");
    detail::require(dividend.size() == assets,
                    "model: dividend must have one entry per asset");
    detail::require(sigma.size() == assets, "model: sigma must have one entry per asset");
    for (std::size_t k = 0; k < assets; ++k) {
      detail::require(std::isfinite(s0[k]) && s0[k] > 0.0, "model: s0 must be positive");
      detail::require(std::isfinite(sigma[k]) && sigma[k] >= 0.0,
                      "model: sigma must be non-negative");
      detail::require(std::isfinite(dividend[k]), "model: dividend must be finite");
    }
    detail::require(std::isfinite(rate), "model: rate must be finite");
    detail::require(std::isfinite(maturity) && maturity > 0.0,
                    "model: maturity must be positive");
    detail::require(exercise_dates >= 1, "model: exercise date count must be >= 1");
    detail::require(subticks >= 1, "model: subticks must be >= 1");
  }

  std::size_t fine_steps() const { return exercise_dates * subticks; }
  double fine_time(std::size_t index) const {
    return maturity * static_cast<double>(index) / static_cast<double>(fine_steps());
  }
  double exercise_time(std::size_t n) const { return fine_time(n * subticks); }
  double fine_step() const { return maturity / static_cast<double>(fine_steps()); }
};

/// Returns a one-asset model with the scalar parameters broadcast.
inline ModelSpec single_asset_model(double s0, double rate, double sigma, double maturity,
                                    std::size_t dates, std::size_t subticks = 1,
                                    double dividend = 0.0) {
  return ModelSpec{1, {s0}, rate, {dividend}, {sigma}, maturity, dates, subticks};
}

enum class PayoffKind { Put, Butterfly, BasketPut, MaxCall, MinButterfly };

inline std::string_view to_string(PayoffKind kind) {
  switch (kind) {
    case PayoffKind::Put: return "put";
    case PayoffKind::Butterfly: return "butterfly";
    case PayoffKind::BasketPut: return "basket_put";
    case PayoffKind::MaxCall: return "max_call";
    case PayoffKind::MinButterfly: return "min_butterfly";
  }
  return "unknown";
}

inline PayoffKind parse_payoff_kind(std::string_view name) {
  for (auto kind : {PayoffKind::Put, PayoffKind::Butterfly, PayoffKind::BasketPut,
                    PayoffKind::MaxCall, PayoffKind::MinButterfly}) {
    if (name == to_string(kind)) return kind;
  }
  throw ValidationError("unknown payoff kind '" + std::string(name) + "'");
}

/// Contract payoff. Single-strike kinds use `strike`; butterflies use
/// `strike` as K1 and `strike_high` as K2.
struct PayoffSpec {
  PayoffKind kind = PayoffKind::Put;
  double strike = 100.0;
  double strike_high = 0.0;

  static PayoffSpec put(double k) { return {PayoffKind::Put, k, 0.0}; }
  static PayoffSpec butterfly(double k1, double k2) { return {PayoffKind::Butterfly, k1, k2}; }
  static PayoffSpec basket_put(double k) { return {PayoffKind::BasketPut, k, 0.0}; }
  static PayoffSpec max_call(double k) { return {PayoffKind::MaxCall, k, 0.0}; }
  static PayoffSpec min_butterfly(double k1, double k2) {
    return {PayoffKind::MinButterfly, k1, k2};
  }

  bool two_strikes() const {
    return kind == PayoffKind::Butterfly || kind == PayoffKind::MinButterfly;
  }
  bool single_asset_only() const {
    return kind == PayoffKind::Put || kind == PayoffKind::Butterfly;
  }

  void validate() const {
    detail::require(std::isfinite(strike) && strike > 0.0, "payoff: strike must be positive");
    if (two_strikes()) {
      detail::require(std::isfinite(strike_high) && strike < strike_high,
                      "payoff: butterflies require K1 < K2");
    }
  }

  void validate_for(std::size_t assets) const {
    validate();
    detail::require(!single_asset_only() || assets == 1,
                    "payoff: " + std::string(to_string(kind)) + " needs exactly one asset");
  }
};

namespace detail {

inline double positive_part(double x) { return x > 0.0 ? x : 0.0; }

// Put butterfly: tent supported on [K1, K2] with apex (K2 - K1)/2 at the
// midpoint.
inline double butterfly(double s, double k1, double k2) {
  const double mid = 0.5 * (k1 + k2);
  return positive_part(k1 - s) + positive_part(k2 - s) - 2.0 * positive_part(mid - s);
}

}  // namespace detail

/// Undiscounted payoff at state `s`.
inline double payoff_value(const PayoffSpec& payoff, std::span<const double> s) {
  detail::require(!s.empty(), "payoff: empty state");
  detail::require(!payoff.single_asset_only() || s.size() == 1,
                  "payoff: dimension mismatch, " + std::string(to_string(payoff.kind)) +
                      " expects a single asset");
  switch (payoff.kind) {
    case PayoffKind::Put:
      return detail::positive_part(payoff.strike - s[0]);
    case PayoffKind::Butterfly:
      return detail::butterfly(s[0], payoff.strike, payoff.strike_high);
    case PayoffKind::BasketPut: {
      const double mean =
          std::accumulate(s.begin(), s.end(), 0.0) / static_cast<double>(s.size());
      return detail::positive_part(payoff.strike - mean);
    }
    case PayoffKind::MaxCall:
      return detail::positive_part(*std::max_element(s.begin(), s.end()) - payoff.strike);
    case PayoffKind::MinButterfly: {
      double worst = detail::butterfly(s[0], payoff.strike, payoff.strike_high);
      for (std::size_t k = 1; k < s.size(); ++k) {
        worst = std::min(worst, detail::butterfly(s[k], payoff.strike, payoff.strike_high));
      }
      return worst;
    }
  }
  return 0.0;
}

/// Dense per-path, per-exercise-date values. The tag keeps payoff and
/// martingale matrices from being mixed up.
template <class Tag>
class DateMatrix {
 public:
  DateMatrix() = default;
  DateMatrix(std::size_t paths, std::size_t dates, std::vector<double> values)
      : paths_(paths), dates_(dates), values_(std::move(values)) {
    detail::require(values_.size() == paths_ * dates_, "date matrix: size mismatch");
  }
  DateMatrix(std::size_t paths, std::size_t dates)
      : DateMatrix(paths, dates, std::vector<double>(paths * dates, 0.0)) {}

  std::size_t paths() const { return paths_; }
  /// Number of exercise dates including date 0, i.e. N + 1.
  std::size_t dates() const { return dates_; }
  std::size_t last_date() const { return dates_ - 1; }

  double operator()(std::size_t path, std::size_t n) const {
    return values_[path * dates_ + n];
  }
  double& operator()(std::size_t path, std::size_t n) { return values_[path * dates_ + n]; }
  std::span<const double> row(std::size_t path) const {
    return {values_.data() + path * dates_, dates_};
  }
  std::span<double> row(std::size_t path) { return {values_.data() + path * dates_, dates_}; }
  std::span<const double> data() const { return values_; }

 private:
  std::size_t paths_ = 0;
  std::size_t dates_ = 0;
  std::vector<double> values_;
};

struct PayoffTag {};
/// Discounted payoffs Z_n = payoff(S_{T_n}) / S^0_{T_n}.
using PayoffMatrix = DateMatrix<PayoffTag>;

/// Simulated prices on the fine grid, with S^0 = exp(rate * t).
class PathBatch {
 public:
  /// `values` is laid out [path][fine time][asset].
  PathBatch(ModelSpec model, std::size_t paths, std::vector<double> values,
            std::uint64_t seed = 0)
      : model_(std::move(model)), paths_(paths), seed_(seed), values_(std::move(values)) {
    model_.validate();
    detail::require(paths_ >= 1, "path batch: need at least one path");
    detail::require(values_.size() == paths_ * times() * model_.assets,
                    "path batch: value count does not match the grid");
    for (double v : values_) {
      detail::require(std::isfinite(v) && v > 0.0, "path batch: prices must be positive");
    }
    discount_.resize(times());
    for (std::size_t t = 0; t < times(); ++t) {
      discount_[t] = std::exp(model_.rate * model_.fine_time(t));
    }
  }

  const ModelSpec& model() const { return model_; }
  std::size_t paths() const { return paths_; }
  std::size_t assets() const { return model_.assets; }
  /// Fine-grid point count, N * subticks + 1.
  std::size_t times() const { return model_.fine_steps() + 1; }
  std::uint64_t seed() const { return seed_; }
  std::size_t exercise_index(std::size_t n) const { return n * model_.subticks; }

  double price(std::size_t path, std::size_t t, std::size_t asset) const {
    return values_[(path * times() + t) * assets() + asset];
  }
  std::span<const double> state(std::size_t path, std::size_t t) const {
    return {values_.data() + (path * times() + t) * assets(), assets()};
  }
  std::span<const double> exercise_state(std::size_t path, std::size_t n) const {
    return state(path, exercise_index(n));
  }
  /// S^0 on the fine grid; discount()[0] == 1.
  std::span<const double> discount() const { return discount_; }

  /// Discounted tradable exp((dividend - rate) t) S_t, a martingale under the
  /// simulation measure.
  double discounted_tradable(std::size_t path, std::size_t t, std::size_t asset) const {
    return std::exp((model_.dividend[asset] - model_.rate) * model_.fine_time(t)) *
           price(path, t, asset);
  }

 private:
  ModelSpec model_;
  std::size_t paths_;
  std::uint64_t seed_;
  std::vector<double> values_;
  std::vector<double> discount_;
};

/// Exact log-normal steps on the fine grid. Path i uses the stream
/// (seed, i) alone, drawing one normal per (fine step, asset) in that order.
inline PathBatch simulate_paths(const ModelSpec& model, std::size_t paths, std::uint64_t seed) {
  model.validate();
  detail::require(paths >= 1, "simulate_paths: need at least one path");
  const std::size_t d = model.assets;
  const std::size_t times = model.fine_steps() + 1;
  const double h = model.fine_step();

  std::vector<double> drift(d), vol(d);
  for (std::size_t k = 0; k < d; ++k) {
    drift[k] = (model.rate - model.dividend[k] - 0.5 * model.sigma[k] * model.sigma[k]) * h;
    vol[k] = model.sigma[k] * std::sqrt(h);
  }

  std::vector<double> values(paths * times * d);
  parallel_for_chunks(paths, [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t i = begin; i < end; ++i) {
      rng::PathStream stream(seed, i);
      double* row = values.data() + i * times * d;
      std::copy(model.s0.begin(), model.s0.end(), row);
      for (std::size_t t = 1; t < times; ++t) {
        for (std::size_t k = 0; k < d; ++k) {
          const double prev = row[(t - 1) * d + k];
          row[t * d + k] = prev * std::exp(drift[k] + vol[k] * stream.normal());
        }
      }
    }
  });
  return PathBatch(model, paths, std::move(values), seed);
}

/// z(i, n) = payoff(S_{T_n}) / exp(rate * T_n).
inline PayoffMatrix discounted_payoffs(const PathBatch& paths, const PayoffSpec& payoff) {
  payoff.validate_for(paths.assets());
  const std::size_t dates = paths.model().exercise_dates + 1;
  PayoffMatrix z(paths.paths(), dates);
  const auto discount = paths.discount();
  parallel_for_chunks(paths.paths(), [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t i = begin; i < end; ++i) {
      for (std::size_t n = 0; n < dates; ++n) {
        const std::size_t t = paths.exercise_index(n);
        z(i, n) = payoff_value(payoff, paths.state(i, t)) / discount[t];
      }
    }
  });
  return z;
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Black-Scholes European put without dividends.
inline double european_put_closed_form(double s0, double strike, double rate, double sigma,
                                       double maturity) {
  detail::require(s0 > 0.0 && strike > 0.0 && sigma > 0.0 && maturity > 0.0,
                  "european_put_closed_form: inputs must be positive");
  const double vol = sigma * std::sqrt(maturity);
  const double d1 = (std::log(s0 / strike) + (rate + 0.5 * sigma * sigma) * maturity) / vol;
  const double d2 = d1 - vol;
  return strike * std::exp(-rate * maturity) * normal_cdf(-d2) - s0 * normal_cdf(-d1);
}

}  // namespace bermudan
