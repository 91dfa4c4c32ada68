#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "bermudan/estimators.hpp"
#include "bermudan/market.hpp"
#include "bermudan/parallel.hpp"

using namespace bermudan;

namespace {

// Straightforward tabulation of the put butterfly tent.
double tent(double s, double k1, double k2) {
  const double mid = 0.5 * (k1 + k2);
  if (s <= k1 || s >= k2) return 0.0;
  return s <= mid ? s - k1 : k2 - s;
}

}  // namespace

TEST(Model, RejectsBadInputs) {
  auto m = single_asset_model(100, 0.05, 0.2, 1.0, 10);
  EXPECT_NO_THROW(m.validate());
  auto bad = m;
  bad.s0 = {-1.0};
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = m;
  bad.maturity = 0.0;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = m;
  bad.subticks = 0;
  EXPECT_THROW(bad.validate(), ValidationError);
  bad = m;
  bad.sigma = {0.2, 0.3};
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(Model, FineGrid) {
  const auto m = single_asset_model(100, 0.05, 0.2, 0.5, 10, 5);
  EXPECT_EQ(m.fine_steps(), 50u);
  EXPECT_DOUBLE_EQ(m.fine_time(0), 0.0);
  EXPECT_DOUBLE_EQ(m.fine_time(50), 0.5);
  EXPECT_DOUBLE_EQ(m.exercise_time(3), 0.15);
  const auto paths = simulate_paths(m, 3, 1);
  EXPECT_EQ(paths.times(), 51u);
  EXPECT_EQ(paths.exercise_index(4), 20u);
}

TEST(Payoff, PutAndBasket) {
  const double s = 90.0;
  EXPECT_DOUBLE_EQ(payoff_value(PayoffSpec::put(100), std::span(&s, 1)), 10.0);
  const std::vector<double> basket{90.0, 100.0, 80.0};
  EXPECT_DOUBLE_EQ(payoff_value(PayoffSpec::basket_put(100), basket), 10.0);
}

TEST(Payoff, MaxCall) {
  const std::vector<double> x{95.0, 112.0};
  EXPECT_DOUBLE_EQ(payoff_value(PayoffSpec::max_call(100), x), 12.0);
  const std::vector<double> y{95.0, 99.0};
  EXPECT_DOUBLE_EQ(payoff_value(PayoffSpec::max_call(100), y), 0.0);
}

TEST(Payoff, ButterflyMatchesTabulation) {
  const auto p = PayoffSpec::butterfly(90, 110);
  for (double s = 50.0; s <= 150.0; s += 0.25) {
    EXPECT_NEAR(payoff_value(p, std::span(&s, 1)), tent(s, 90, 110), 1e-12) << s;
  }
  const double apex = 100.0;
  EXPECT_DOUBLE_EQ(payoff_value(p, std::span(&apex, 1)), 10.0);
}

TEST(Payoff, MinButterflyIsMinimumOfTents) {
  const auto p = PayoffSpec::min_butterfly(90, 110);
  for (double a = 80.0; a <= 120.0; a += 1.5) {
    for (double b = 80.0; b <= 120.0; b += 1.5) {
      const std::vector<double> x{a, b};
      EXPECT_NEAR(payoff_value(p, x), std::min(tent(a, 90, 110), tent(b, 90, 110)), 1e-12);
    }
  }
}

TEST(Payoff, AllKindsNonNegativeOnGrid) {
  const std::vector<PayoffSpec> specs{PayoffSpec::put(100), PayoffSpec::butterfly(90, 110),
                                      PayoffSpec::basket_put(100), PayoffSpec::max_call(100),
                                      PayoffSpec::min_butterfly(90, 110)};
  for (const auto& p : specs) {
    const std::size_t d = p.single_asset_only() ? 1 : 2;
    for (double a = 1.0; a < 300.0; a += 3.7) {
      for (double b = 1.0; b < 300.0; b += 11.3) {
        const std::vector<double> x{a, b};
        EXPECT_GE(payoff_value(p, std::span(x.data(), d)), 0.0);
      }
    }
  }
}

TEST(Payoff, ParseRoundTrip) {
  for (auto k : {PayoffKind::Put, PayoffKind::Butterfly, PayoffKind::BasketPut,
                 PayoffKind::MaxCall, PayoffKind::MinButterfly}) {
    EXPECT_EQ(parse_payoff_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_payoff_kind("straddle"), ValidationError);
  EXPECT_THROW(PayoffSpec::butterfly(110, 90).validate(), ValidationError);
}

TEST(Simulation, SigmaZeroIsDeterministicForward) {
  auto m = single_asset_model(100, 0.05, 0.0, 1.0, 4, 2, 0.01);
  const auto paths = simulate_paths(m, 5, 3);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t t = 0; t < paths.times(); ++t) {
      EXPECT_NEAR(paths.price(i, t, 0), 100.0 * std::exp(0.04 * m.fine_time(t)), 1e-9);
    }
  }
}

TEST(Simulation, PathDependsOnlyOnSeedAndIndex) {
  const auto m = single_asset_model(100, 0.05, 0.3, 1.0, 6, 3);
  const auto small = simulate_paths(m, 10, 77);
  const auto large = simulate_paths(m, 10000, 77);
  for (std::size_t i = 0; i < 10; ++i) {
    for (std::size_t t = 0; t < small.times(); ++t) {
      EXPECT_EQ(small.price(i, t, 0), large.price(i, t, 0));
    }
  }
}

TEST(Simulation, BitIdenticalAcrossThreadCounts) {
  ModelSpec m{2, {90, 95}, 0.05, {0.1, 0.0}, {0.2, 0.3}, 1.0, 5, 2};
  set_thread_count(1);
  const auto one = simulate_paths(m, 20000, 5);
  set_thread_count(4);
  const auto four = simulate_paths(m, 20000, 5);
  set_thread_count(0);
  for (std::size_t i = 0; i < 20000; ++i) {
    for (std::size_t t = 0; t < one.times(); ++t) {
      ASSERT_EQ(one.price(i, t, 1), four.price(i, t, 1));
    }
  }
}

TEST(Simulation, DiscountedTradableIncrementsHaveMeanZero) {
  ModelSpec m{2, {100, 90}, 0.06, {0.0, 0.1}, {0.4, 0.2}, 1.0, 4, 2};
  const std::size_t q = 100000;
  const auto paths = simulate_paths(m, q, 2024);
  for (std::size_t k = 0; k < 2; ++k) {
    for (std::size_t t = 0; t + 1 < paths.times(); ++t) {
      std::vector<double> inc(q);
      for (std::size_t i = 0; i < q; ++i) {
        inc[i] = paths.discounted_tradable(i, t + 1, k) - paths.discounted_tradable(i, t, k);
      }
      const auto est = estimate_from_samples(inc);
      EXPECT_LE(std::abs(est.mean), 3.0 * *est.std_error) << "asset " << k << " step " << t;
    }
  }
}

TEST(Simulation, PayoffMatrixDateZeroIsConstant) {
  const auto m = single_asset_model(100, 0.06, 0.4, 0.5, 10);
  const auto paths = simulate_paths(m, 1000, 1);
  const auto z = discounted_payoffs(paths, PayoffSpec::put(110));
  for (std::size_t i = 0; i < z.paths(); ++i) EXPECT_EQ(z(i, 0), 10.0);
  EXPECT_NEAR(z(0, 10), std::max(0.0, 110.0 - paths.price(0, 10, 0)) * std::exp(-0.03), 1e-12);
}

TEST(Simulation, EuropeanPutAgreesWithClosedForm) {
  const auto m = single_asset_model(100, 0.06, 0.4, 0.5, 10);
  const auto paths = simulate_paths(m, 100000, 8);
  const auto z = discounted_payoffs(paths, PayoffSpec::put(100));
  const auto est = mc_price(z, StopTimes{std::vector<std::size_t>(z.paths(), 10), 10});
  const double exact = european_put_closed_form(100, 100, 0.06, 0.4, 0.5);
  EXPECT_NEAR(exact, 9.6642, 5e-5);
  EXPECT_LE(std::abs(est.mean - exact), 3.0 * *est.std_error);
}
