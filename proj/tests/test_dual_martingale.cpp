#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <string>
#include <vector>

#include "bermudan/dual_martingale.hpp"
#include "bermudan/estimators.hpp"

using namespace bermudan;

namespace {

std::string dump(const DualMartingale& dm) {
  std::ostringstream os;
  save_martingale(dm, os);
  return os.str();
}

DualMartingale small_fit(CellLayout layout = CellLayout::PerCoordinate) {
  ModelSpec m{2, {100, 95}, 0.05, {0.0, 0.02}, {0.2, 0.3}, 1.0, 3, 2};
  const auto paths = simulate_paths(m, 4000, 17);
  const auto z = discounted_payoffs(paths, PayoffSpec::max_call(100));
  return fit_dual_coefficients(paths, z, build_increment_basis(paths, 3, layout));
}

std::string replace_line(const std::string& text, const std::string& key,
                         const std::string& line) {
  std::istringstream in(text);
  std::ostringstream out;
  std::string l;
  while (std::getline(in, l)) {
    out << (l == key || l.rfind(key + " ", 0) == 0 ? line : l) << '\n';
  }
  return out.str();
}

}  // namespace

TEST(Increments, ZeroVolatilityGivesZeroIncrements) {
  const auto m = single_asset_model(100, 0.05, 0.0, 1.0, 4, 3);
  const auto paths = simulate_paths(m, 20, 1);
  const auto basis = build_increment_basis(paths, 4);
  for (std::size_t n = 0; n < 4; ++n) {
    const auto dx = elementary_increments(paths, basis, n);
    EXPECT_LE(dx.cwiseAbs().maxCoeff(), 1e-10);
  }
}

TEST(Increments, SingleCellSingleTickIsTradableIncrement) {
  const auto m = single_asset_model(100, 0.06, 0.3, 1.0, 5, 1, 0.02);
  const auto paths = simulate_paths(m, 50, 2);
  const auto basis = build_increment_basis(paths, 1);
  EXPECT_EQ(basis.increments_per_interval(), 1u);
  for (std::size_t n = 0; n < 5; ++n) {
    const auto dx = elementary_increments(paths, basis, n);
    ASSERT_EQ(dx.cols(), 1);
    for (std::size_t i = 0; i < 50; ++i) {
      const double expected =
          paths.discounted_tradable(i, n + 1, 0) - paths.discounted_tradable(i, n, 0);
      EXPECT_NEAR(dx(static_cast<Eigen::Index>(i), 0), expected, 1e-11);
    }
  }
}

TEST(Increments, EachElementaryIncrementHasMeanZero) {
  ModelSpec m{2, {100, 100}, 0.05, {0.0, 0.05}, {0.3, 0.2}, 1.0, 2, 2};
  const std::size_t q = 60000;
  const auto paths = simulate_paths(m, q, 31);
  const auto basis = build_increment_basis(paths, 4);
  for (std::size_t n = 0; n < 2; ++n) {
    const auto dx = elementary_increments(paths, basis, n);
    ASSERT_EQ(dx.cols(), 4 * 2 * 2);
    for (Eigen::Index c = 0; c < dx.cols(); ++c) {
      std::vector<double> col(dx.col(c).data(), dx.col(c).data() + q);
      const auto est = estimate_from_samples(col);
      EXPECT_LE(std::abs(est.mean), 4.0 * *est.std_error) << "interval " << n << " column " << c;
    }
  }
}

TEST(Increments, OneActiveCellPerTickAndAsset) {
  ModelSpec m{2, {100, 100}, 0.05, {0.0, 0.0}, {0.3, 0.2}, 1.0, 2, 3};
  const auto paths = simulate_paths(m, 500, 4);
  for (auto layout : {CellLayout::PerCoordinate, CellLayout::Tensor}) {
    const auto basis = build_increment_basis(paths, 3, layout);
    EXPECT_EQ(basis.cells(), layout == CellLayout::Tensor ? 9u : 3u);
    const auto dx = elementary_increments(paths, basis, 1);
    for (Eigen::Index i = 0; i < dx.rows(); ++i) {
      for (std::size_t j = 0; j < 3; ++j) {
        for (std::size_t k = 0; k < 2; ++k) {
          int active = 0;
          for (std::size_t c = 0; c < basis.cells(); ++c) {
            if (dx(i, static_cast<Eigen::Index>(basis.index(j, c, k))) != 0.0) ++active;
          }
          EXPECT_EQ(active, 1);
        }
      }
    }
  }
}

TEST(Increments, TensorEqualsPerCoordinateForOneAsset) {
  const auto m = single_asset_model(100, 0.05, 0.25, 1.0, 3, 2);
  const auto paths = simulate_paths(m, 2000, 6);
  const auto a = build_increment_basis(paths, 5, CellLayout::PerCoordinate);
  const auto b = build_increment_basis(paths, 5, CellLayout::Tensor);
  for (std::size_t n = 0; n < 3; ++n) {
    EXPECT_EQ(elementary_increments(paths, a, n), elementary_increments(paths, b, n));
  }
}

TEST(DualFit, ConstantPayoffGivesZeroCoefficients) {
  const auto m = single_asset_model(100, 0.05, 0.2, 1.0, 4, 2);
  const auto paths = simulate_paths(m, 3000, 8);
  PayoffMatrix z(3000, 5);
  for (std::size_t i = 0; i < 3000; ++i) {
    for (std::size_t n = 0; n < 5; ++n) z(i, n) = 3.0;
  }
  const auto basis = build_increment_basis(paths, 5);
  const auto excess = fit_dual_coefficients(paths, z, basis);
  for (std::size_t n = 1; n <= 4; ++n) EXPECT_EQ(excess.alpha(n).cwiseAbs().maxCoeff(), 0.0);
  const auto running = fit_dual_coefficients(paths, z, basis, {}, DualTarget::RunningMax);
  for (std::size_t n = 1; n <= 4; ++n) EXPECT_LT(running.alpha(n).cwiseAbs().maxCoeff(), 0.05);
}

TEST(DualFit, ZeroCoefficientsGiveZeroMartingale) {
  const auto m = single_asset_model(100, 0.05, 0.2, 1.0, 4, 2);
  const auto paths = simulate_paths(m, 500, 8);
  const auto basis = build_increment_basis(paths, 3);
  std::vector<Eigen::VectorXd> alpha(4, Eigen::VectorXd::Zero(6));
  const DualMartingale dm(MartingaleGrid::of(m, 3), basis, alpha);
  const auto mm = evaluate_martingale(dm, paths);
  for (double v : mm.data()) EXPECT_EQ(v, 0.0);
}

TEST(DualFit, MartingaleTelescopesOverIncrements) {
  const auto dm = small_fit();
  ModelSpec m{2, {100, 95}, 0.05, {0.0, 0.02}, {0.2, 0.3}, 1.0, 3, 2};
  const auto paths = simulate_paths(m, 300, 99);
  const auto mm = evaluate_martingale(dm, paths);
  std::vector<double> level(300, 0.0);
  for (std::size_t n = 0; n < 3; ++n) {
    const Eigen::VectorXd step = elementary_increments(paths, dm.basis(), n) * dm.alpha(n + 1);
    for (std::size_t i = 0; i < 300; ++i) {
      level[i] += step[static_cast<Eigen::Index>(i)];
      EXPECT_NEAR(mm(i, n + 1), level[i], 1e-9);
    }
  }
  for (std::size_t i = 0; i < 300; ++i) EXPECT_EQ(mm(i, 0), 0.0);
}

TEST(DualFit, OutOfSampleMartingaleHasMeanZero) {
  const auto m = single_asset_model(100, 0.06, 0.4, 0.5, 10, 2);
  const auto fit_paths = simulate_paths(m, 20000, 1);
  const auto z = discounted_payoffs(fit_paths, PayoffSpec::put(100));
  const auto dm = fit_dual_coefficients(fit_paths, z, build_increment_basis(fit_paths, 20));
  const auto eval = simulate_paths(m, 40000, 2);
  const auto mm = evaluate_martingale(dm, eval);
  for (std::size_t n = 1; n <= 10; ++n) {
    std::vector<double> col(40000);
    for (std::size_t i = 0; i < col.size(); ++i) col[i] = mm(i, n);
    const auto est = estimate_from_samples(col);
    EXPECT_LE(std::abs(est.mean), 4.0 * *est.std_error) << "date " << n;
  }
}

TEST(DualFit, RequiresEnoughPaths) {
  const auto m = single_asset_model(100, 0.05, 0.2, 1.0, 2, 5);
  const auto paths = simulate_paths(m, 40, 1);
  const auto z = discounted_payoffs(paths, PayoffSpec::put(100));
  EXPECT_THROW(fit_dual_coefficients(paths, z, build_increment_basis(paths, 10)),
               ValidationError);
}

TEST(MartingaleFile, SaveLoadSaveIsByteIdentical) {
  for (auto layout : {CellLayout::PerCoordinate, CellLayout::Tensor}) {
    const auto dm = small_fit(layout);
    const std::string first = dump(dm);
    std::istringstream in(first);
    const auto loaded = load_martingale(in);
    EXPECT_EQ(dump(loaded), first);
    EXPECT_EQ(loaded.grid(), dm.grid());
    EXPECT_EQ(loaded.basis().layout, layout);
    EXPECT_EQ(loaded.fit_paths(), 4000u);
    EXPECT_EQ(loaded.fit_seed(), 17u);

    ModelSpec m{2, {100, 95}, 0.05, {0.0, 0.02}, {0.2, 0.3}, 1.0, 3, 2};
    const auto paths = simulate_paths(m, 200, 5);
    const auto a = evaluate_martingale(dm, paths);
    const auto b = evaluate_martingale(loaded, paths);
    for (std::size_t k = 0; k < a.data().size(); ++k) ASSERT_EQ(a.data()[k], b.data()[k]);
  }
}

TEST(MartingaleFile, GridMismatchIsRejected) {
  const auto dm = small_fit();
  ModelSpec other{2, {100, 95}, 0.05, {0.0, 0.02}, {0.2, 0.3}, 1.0, 3, 4};
  EXPECT_THROW(evaluate_martingale(dm, simulate_paths(other, 10, 1)), ValidationError);
  other.subticks = 2;
  other.rate = 0.04;
  EXPECT_THROW(evaluate_martingale(dm, simulate_paths(other, 10, 1)), ValidationError);
  other.rate = 0.05;
  other.s0 = {80, 120};
  other.sigma = {0.5, 0.1};
  EXPECT_NO_THROW(evaluate_martingale(dm, simulate_paths(other, 10, 1)));
}

TEST(MartingaleFile, CorruptFilesAreRejected) {
  const std::string good = dump(small_fit());
  auto load = [](const std::string& text) {
    std::istringstream in(text);
    return load_martingale(in);
  };
  EXPECT_NO_THROW(load(good));
  EXPECT_THROW(load(good.substr(0, good.size() / 2)), FormatError);
  EXPECT_THROW(load(""), FormatError);
  EXPECT_THROW(load(replace_line(good, "bermudan-dual-martingale", "bermudan-dual-martingale 2")),
               FormatError);
  EXPECT_THROW(load(replace_line(good, "fingerprint", "fingerprint 0123456789abcdef")),
               FormatError);
  EXPECT_THROW(load(replace_line(good, "fingerprint", "fingerprint zz")), FormatError);
  EXPECT_THROW(load(replace_line(good, "subticks", "subticks 3")), FormatError);
  EXPECT_THROW(load(replace_line(good, "layout", "layout diagonal")), FormatError);
  EXPECT_THROW(load(replace_line(good, "end", "fin")), FormatError);
  EXPECT_THROW(load(good + "trailing\n"), FormatError);
}

TEST(MartingaleFile, NamesRoundTrip) {
  for (auto l : {CellLayout::PerCoordinate, CellLayout::Tensor}) {
    EXPECT_EQ(parse_cell_layout(to_string(l)), l);
  }
  for (auto t : {DualTarget::ExcessOverPayoff, DualTarget::RunningMax}) {
    EXPECT_EQ(parse_dual_target(to_string(t)), t);
  }
  EXPECT_THROW(parse_cell_layout("diagonal"), ValidationError);
  EXPECT_THROW(parse_dual_target("mean"), ValidationError);
}
