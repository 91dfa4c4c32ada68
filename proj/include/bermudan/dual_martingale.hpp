#pragma once

// Approximate Doob martingale built from elementary hedging increments
//
//   dX^{p,k}_{j} = 1{S^k_{t_{n,j}} in cell p} * (A^k_{t_{n,j+1}} - A^k_{t_{n,j}}),
//
// where A^k = exp((dividend_k - rate) t) S^k is the discounted tradable and
// t_{n,j} are the sub-ticks of exercise interval [T_n, T_{n+1}]. The
// coefficients alpha_{n+1} of each interval are fitted backward by
// regressing the running pathwise maximum
//
//   V_{n+1} = max_{n+1 <= j <= N} ( Z_j - sum_{i=n+2}^{j} alpha_i . dX_i )
//
// (by default minus Z_n) onto dX_{n+1}, with
// V_n = max(Z_n, V_{n+1} - alpha_{n+1} . dX_{n+1}). Subtracting the
// F_n-measurable Z_n leaves the population coefficients unchanged and removes
// much of the sampling noise.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "bermudan/error.hpp"
#include "bermudan/market.hpp"
#include "bermudan/parallel.hpp"
#include "bermudan/regression.hpp"

namespace bermudan {

/// How the state at a sub-tick selects the indicator paired with asset k.
/// PerCoordinate: the bin of coordinate k alone (P cells). Tensor: the joint
/// bin of all coordinates (P^d cells), shared by every asset.
enum class CellLayout { PerCoordinate, Tensor };

inline std::string_view to_string(CellLayout layout) {
  return layout == CellLayout::Tensor ? "tensor" : "per_coordinate";
}

inline CellLayout parse_cell_layout(std::string_view name) {
  if (name == "per_coordinate") return CellLayout::PerCoordinate;
  if (name == "tensor") return CellLayout::Tensor;
  throw ValidationError("unknown cell layout '" + std::string(name) + "'");
}

inline constexpr std::size_t kMaxTensorCells = 1u << 20;

/// Local bases for every sub-tick start time. Coefficients of interval n are
/// laid out as index(j, c, k) = (j * cells + c) * assets + k.
struct IncrementBasis {
  std::size_t assets = 1;
  std::size_t exercise_dates = 1;
  std::size_t subticks = 1;
  std::size_t bins = 1;
  std::vector<LocalBasis> local;  // one per fine time t < exercise_dates * subticks
  CellLayout layout = CellLayout::PerCoordinate;

  std::size_t cells() const {
    if (layout == CellLayout::PerCoordinate) return bins;
    std::size_t c = 1;
    for (std::size_t k = 0; k < assets; ++k) {
      detail::require(c <= kMaxTensorCells / bins, "increment basis: too many tensor cells");
      c *= bins;
    }
    return c;
  }
  std::size_t increments_per_interval() const { return cells() * assets * subticks; }
  std::size_t index(std::size_t j, std::size_t c, std::size_t k) const {
    return (j * cells() + c) * assets + k;
  }
  const LocalBasis& at(std::size_t interval, std::size_t j) const {
    return local[interval * subticks + j];
  }

  void validate() const {
    detail::require(assets >= 1 && exercise_dates >= 1 && subticks >= 1 && bins >= 1,
                    "increment basis: sizes must be >= 1");
    detail::require(local.size() == exercise_dates * subticks,
                    "increment basis: need one local basis per sub-tick");
    for (const auto& b : local) {
      b.validate();
      detail::require(b.bins == bins && b.dim() == assets,
                      "increment basis: local basis shape mismatch");
    }
  }

  void check_grid(const ModelSpec& model) const {
    if (model.assets != assets || model.exercise_dates != exercise_dates ||
        model.subticks != subticks) {
      throw ValidationError("increment basis: grid mismatch (basis d=" +
                            std::to_string(assets) + " N=" + std::to_string(exercise_dates) +
                            " Nbar=" + std::to_string(subticks) + ", paths d=" +
                            std::to_string(model.assets) + " N=" +
                            std::to_string(model.exercise_dates) +
                            " Nbar=" + std::to_string(model.subticks) + ")");
    }
  }
};

/// Equal-occupancy cells from the sample states at each sub-tick start time,
/// per coordinate. Coordinates that are deterministic at a time (t = 0) get a
/// single occupied cell.
inline IncrementBasis build_increment_basis(const PathBatch& paths, std::size_t bins,
                                            CellLayout layout = CellLayout::PerCoordinate) {
  const ModelSpec& model = paths.model();
  IncrementBasis basis{model.assets, model.exercise_dates, model.subticks, bins, {}, layout};
  (void)basis.cells();
  detail::require(bins >= 1, "increment basis: bins must be >= 1");
  detail::require(paths.paths() >= bins, "increment basis: need at least P paths");
  const std::size_t d = model.assets;
  std::vector<double> column(paths.paths());
  for (std::size_t t = 0; t < model.fine_steps(); ++t) {
    LocalBasis local{bins, std::vector<std::vector<double>>(d)};
    for (std::size_t k = 0; k < d; ++k) {
      for (std::size_t i = 0; i < paths.paths(); ++i) column[i] = paths.price(i, t, k);
      const auto [lo, hi] = std::minmax_element(column.begin(), column.end());
      if (bins > 1 && *lo == *hi) {
        const double value = *lo;
        local.breakpoints[k] = point_mass_basis(std::span(&value, 1), bins).breakpoints[0];
      } else {
        local.breakpoints[k] = build_local_basis(column, 1, bins).breakpoints[0];
      }
    }
    basis.local.push_back(std::move(local));
  }
  return basis;
}

namespace detail {

/// Sparse increments of one path over one exercise interval: subticks * assets
/// entries, one active cell per (sub-tick, asset).
class IncrementEvaluator {
 public:
  IncrementEvaluator(const PathBatch& paths, const IncrementBasis& basis)
      : paths_(paths), basis_(basis), cells_(basis.cells()) {
    basis_.validate();
    basis_.check_grid(paths.model());
    const ModelSpec& model = paths.model();
    factor_.resize(paths.times() * model.assets);
    for (std::size_t t = 0; t < paths.times(); ++t) {
      for (std::size_t k = 0; k < model.assets; ++k) {
        factor_[t * model.assets + k] =
            std::exp((model.dividend[k] - model.rate) * model.fine_time(t));
      }
    }
  }

  std::size_t entries() const { return basis_.subticks * basis_.assets; }

  void operator()(std::size_t path, std::size_t interval, std::span<std::size_t> index,
                  std::span<double> value) const {
    const std::size_t d = basis_.assets;
    const bool tensor = basis_.layout == CellLayout::Tensor;
    std::size_t e = 0;
    for (std::size_t j = 0; j < basis_.subticks; ++j) {
      const std::size_t t0 = interval * basis_.subticks + j;
      const LocalBasis& cells = basis_.local[t0];
      std::size_t joint = 0;
      if (tensor) {
        for (std::size_t k = 0; k < d; ++k) {
          joint = joint * basis_.bins + cells.cell(k, paths_.price(path, t0, k));
        }
      }
      for (std::size_t k = 0; k < d; ++k, ++e) {
        const double s0 = paths_.price(path, t0, k);
        const double s1 = paths_.price(path, t0 + 1, k);
        const std::size_t c = tensor ? joint : cells.cell(k, s0);
        index[e] = (j * cells_ + c) * d + k;
        value[e] = factor_[(t0 + 1) * d + k] * s1 - factor_[t0 * d + k] * s0;
      }
    }
  }

 private:
  const PathBatch& paths_;
  const IncrementBasis& basis_;
  std::size_t cells_;
  std::vector<double> factor_;
};

}  // namespace detail

/// Dense q x L matrix of the elementary increments dX_{interval+1}.
inline Eigen::MatrixXd elementary_increments(const PathBatch& paths, const IncrementBasis& basis,
                                             std::size_t interval) {
  detail::require(interval < basis.exercise_dates, "elementary_increments: interval out of range");
  detail::IncrementEvaluator increments(paths, basis);
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(paths.paths()),
                                              static_cast<Eigen::Index>(
                                                  basis.increments_per_interval()));
  std::vector<std::size_t> index(increments.entries());
  std::vector<double> value(increments.entries());
  for (std::size_t i = 0; i < paths.paths(); ++i) {
    increments(i, interval, index, value);
    for (std::size_t e = 0; e < index.size(); ++e) {
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(index[e])) += value[e];
    }
  }
  return out;
}

/// Grid and market parameters a fitted martingale is only valid for.
struct MartingaleGrid {
  std::size_t assets = 1;
  std::size_t exercise_dates = 1;
  std::size_t subticks = 1;
  std::size_t bins = 1;
  double maturity = 1.0;
  double rate = 0.0;
  std::vector<double> dividend{0.0};
  CellLayout layout = CellLayout::PerCoordinate;

  static MartingaleGrid of(const ModelSpec& model, std::size_t bins,
                           CellLayout layout = CellLayout::PerCoordinate) {
    return {model.assets, model.exercise_dates, model.subticks, bins,
            model.maturity, model.rate, model.dividend, layout};
  }

  bool operator==(const MartingaleGrid&) const = default;

  /// FNV-1a over the canonical hexfloat rendering of every field.
  std::uint64_t fingerprint() const {
    std::ostringstream os;
    os << std::hexfloat << assets << ' ' << exercise_dates << ' ' << subticks << ' ' << bins
       << ' ' << maturity << ' ' << rate;
    for (double q : dividend) os << ' ' << q;
    os << ' ' << to_string(layout);
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (unsigned char c : os.str()) {
      hash ^= c;
      hash *= 0x100000001b3ull;
    }
    return hash;
  }
};

struct MartingaleTag {};
/// M_hat(i, n) along each path; column 0 is identically zero.
using MartingaleMatrix = DateMatrix<MartingaleTag>;

class DualMartingale {
 public:
  DualMartingale(MartingaleGrid grid, IncrementBasis basis, std::vector<Eigen::VectorXd> alpha,
                 std::size_t fit_paths = 0, std::uint64_t fit_seed = 0)
      : grid_(std::move(grid)),
        basis_(std::move(basis)),
        alpha_(std::move(alpha)),
        fit_paths_(fit_paths),
        fit_seed_(fit_seed) {
    basis_.validate();
    detail::require(grid_.assets == basis_.assets &&
                        grid_.exercise_dates == basis_.exercise_dates &&
                        grid_.subticks == basis_.subticks && grid_.bins == basis_.bins &&
                        grid_.layout == basis_.layout,
                    "dual martingale: grid does not match basis");
    detail::require(alpha_.size() == grid_.exercise_dates,
                    "dual martingale: need one coefficient vector per interval");
    for (const auto& a : alpha_) {
      detail::require(static_cast<std::size_t>(a.size()) == basis_.increments_per_interval(),
                      "dual martingale: coefficient length mismatch");
      detail::require(a.allFinite(), "dual martingale: non-finite coefficients");
    }
  }

  const MartingaleGrid& grid() const { return grid_; }
  const IncrementBasis& basis() const { return basis_; }
  /// Coefficients of dX_n, n in 1..N.
  const Eigen::VectorXd& alpha(std::size_t n) const { return alpha_.at(n - 1); }
  std::uint64_t fingerprint() const { return grid_.fingerprint(); }
  std::size_t fit_paths() const { return fit_paths_; }
  std::uint64_t fit_seed() const { return fit_seed_; }

  void check_compatible(const PathBatch& paths) const {
    const auto other = MartingaleGrid::of(paths.model(), grid_.bins, grid_.layout);
    if (!(other == grid_)) {
      std::ostringstream os;
      os << "dual martingale: fingerprint mismatch, fitted on d=" << grid_.assets
         << " N=" << grid_.exercise_dates << " Nbar=" << grid_.subticks
         << " T=" << grid_.maturity << " r=" << grid_.rate << " but paths have d="
         << other.assets << " N=" << other.exercise_dates << " Nbar=" << other.subticks
         << " T=" << other.maturity << " r=" << other.rate;
      throw ValidationError(os.str());
    }
  }

 private:
  MartingaleGrid grid_;
  IncrementBasis basis_;
  std::vector<Eigen::VectorXd> alpha_;
  std::size_t fit_paths_;
  std::uint64_t fit_seed_;
};

/// Regression target of the backward fit.
enum class DualTarget {
  ExcessOverPayoff,  // V_{n+1} - Z_n
  RunningMax,        // V_{n+1}
};

inline std::string_view to_string(DualTarget target) {
  return target == DualTarget::RunningMax ? "running_max" : "excess";
}

inline DualTarget parse_dual_target(std::string_view name) {
  if (name == "excess") return DualTarget::ExcessOverPayoff;
  if (name == "running_max") return DualTarget::RunningMax;
  throw ValidationError("unknown dual target '" + std::string(name) + "'");
}

/// Backward least-squares fit of alpha_N, ..., alpha_1. Optional per-path
/// weights turn sample averages into weighted expectations (used on exact
/// enumerations).
inline DualMartingale fit_dual_coefficients(const PathBatch& paths, const PayoffMatrix& z,
                                            const IncrementBasis& basis,
                                            std::span<const double> weights = {},
                                            DualTarget target = DualTarget::ExcessOverPayoff) {
  const std::size_t q = paths.paths();
  const std::size_t big_n = basis.exercise_dates;
  const std::size_t width = basis.increments_per_interval();
  detail::IncrementEvaluator increments(paths, basis);
  detail::require(z.paths() == q && z.dates() == big_n + 1,
                  "fit_dual_coefficients: payoff matrix does not match paths");
  detail::require(weights.empty() || weights.size() == q,
                  "fit_dual_coefficients: one weight per path");
  detail::require(q >= width, "fit_dual_coefficients: need at least L = P*d*Nbar paths");

  // Fixed by q only, and capped so at most 32 Gram partials are alive.
  const std::size_t chunk = std::max(kChunkSize, (q + 31) / 32);
  std::vector<double> running(q);
  for (std::size_t i = 0; i < q; ++i) running[i] = z(i, big_n);

  std::vector<Eigen::VectorXd> alpha(big_n);
  for (std::size_t interval = big_n; interval-- > 0;) {
    const NormalEquations system = parallel_reduce(
        q, NormalEquations(width),
        [&](std::size_t begin, std::size_t end) {
          NormalEquations part(width);
          std::vector<std::size_t> index(increments.entries());
          std::vector<double> value(increments.entries());
          for (std::size_t i = begin; i < end; ++i) {
            increments(i, interval, index, value);
            const double y = target == DualTarget::ExcessOverPayoff
                                 ? running[i] - z(i, interval)
                                 : running[i];
            part.add(index, value, y, weights.empty() ? 1.0 : weights[i]);
          }
          return part;
        },
        [](NormalEquations& acc, const NormalEquations& part) { acc.merge(part); }, chunk);
    alpha[interval] = system.solve().coefficients;

    const Eigen::VectorXd& a = alpha[interval];
    parallel_for_chunks(q, [&](std::size_t begin, std::size_t end, std::size_t) {
      std::vector<std::size_t> index(increments.entries());
      std::vector<double> value(increments.entries());
      for (std::size_t i = begin; i < end; ++i) {
        increments(i, interval, index, value);
        double hedge = 0.0;
        for (std::size_t e = 0; e < index.size(); ++e) hedge += a[index[e]] * value[e];
        running[i] = std::max(z(i, interval), running[i] - hedge);
      }
    });
  }
  return DualMartingale(MartingaleGrid::of(paths.model(), basis.bins, basis.layout), basis,
                        std::move(alpha),
                        q, paths.seed());
}

/// M_hat_0 = 0, M_hat_{n+1} = M_hat_n + alpha_{n+1} . dX_{n+1}.
inline MartingaleMatrix evaluate_martingale(const DualMartingale& dm, const PathBatch& paths) {
  dm.check_compatible(paths);
  detail::IncrementEvaluator increments(paths, dm.basis());
  const std::size_t big_n = dm.grid().exercise_dates;
  MartingaleMatrix m(paths.paths(), big_n + 1);
  parallel_for_chunks(paths.paths(), [&](std::size_t begin, std::size_t end, std::size_t) {
    std::vector<std::size_t> index(increments.entries());
    std::vector<double> value(increments.entries());
    for (std::size_t i = begin; i < end; ++i) {
      double level = 0.0;
      m(i, 0) = 0.0;
      for (std::size_t interval = 0; interval < big_n; ++interval) {
        increments(i, interval, index, value);
        const Eigen::VectorXd& a = dm.alpha(interval + 1);
        double step = 0.0;
        for (std::size_t e = 0; e < index.size(); ++e) step += a[index[e]] * value[e];
        level += step;
        m(i, interval + 1) = level;
      }
    }
  });
  return m;
}

// Coefficient file, version 1. Line-oriented text; every real number is a
// C99 hexfloat so the round trip is bit-exact:
//
//   bermudan-dual-martingale 1
//   fingerprint <16 hex digits>
//   assets <d>
//   exercise_dates <N>
//   subticks <Nbar>
//   bins <P>
//   layout per_coordinate|tensor
//   maturity <x>
//   rate <x>
//   dividend <x_1> ... <x_d>
//   fit_paths <q>
//   fit_seed <u64>
//   breakpoints
//   <t> <k> <P-1 thresholds>          for t < N*Nbar, k < d (t-major)
//   alpha
//   <n> <L coefficients>              for n = 1..N, index (j*P + p)*d + k
//   end

inline constexpr int kMartingaleFormatVersion = 1;

inline void save_martingale(const DualMartingale& dm, std::ostream& out) {
  const auto& g = dm.grid();
  const auto& basis = dm.basis();
  out << "bermudan-dual-martingale " << kMartingaleFormatVersion << '\n';
  out << "fingerprint " << std::hex << std::setw(16) << std::setfill('0') << dm.fingerprint()
      << std::dec << std::setfill(' ') << '\n';
  out << "assets " << g.assets << '\n'
      << "exercise_dates " << g.exercise_dates << '\n'
      << "subticks " << g.subticks << '\n'
      << "bins " << g.bins << '\n'
      << "layout " << to_string(g.layout) << '\n';
  out << std::hexfloat;
  out << "maturity " << g.maturity << '\n' << "rate " << g.rate << '\n' << "dividend";
  for (double q : g.dividend) out << ' ' << q;
  out << '\n';
  out << std::defaultfloat << "fit_paths " << dm.fit_paths() << '\n'
      << "fit_seed " << dm.fit_seed() << '\n';
  out << "breakpoints\n" << std::hexfloat;
  for (std::size_t t = 0; t < basis.local.size(); ++t) {
    for (std::size_t k = 0; k < basis.assets; ++k) {
      out << t << ' ' << k;
      for (double b : basis.local[t].breakpoints[k]) out << ' ' << b;
      out << '\n';
    }
  }
  out << "alpha\n";
  for (std::size_t n = 1; n <= g.exercise_dates; ++n) {
    out << n;
    for (double a : dm.alpha(n)) out << ' ' << a;
    out << '\n';
  }
  out << std::defaultfloat << "end\n";
  if (!out) throw FormatError("save_martingale: write failed");
}

inline void save_martingale(const DualMartingale& dm, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("save_martingale: cannot open '" + path + "'");
  save_martingale(dm, out);
}

namespace detail {

class LineReader {
 public:
  explicit LineReader(std::istream& in) : in_(in) {}

  std::istringstream next(const std::string& expected_key = {}) {
    std::string line;
    if (!std::getline(in_, line)) fail("unexpected end of file");
    ++line_no_;
    std::istringstream fields(line);
    if (!expected_key.empty()) {
      std::string key;
      fields >> key;
      if (key != expected_key) fail("expected '" + expected_key + "', found '" + key + "'");
    }
    return fields;
  }

  template <class T>
  T value(const std::string& key) {
    auto fields = next(key);
    T v = read<T>(fields);
    expect_end(fields);
    return v;
  }

  template <class T>
  T read(std::istringstream& fields) {
    std::string token;
    if (!(fields >> token)) fail("missing value");
    if constexpr (std::is_floating_point_v<T>) {
      char* end = nullptr;
      const double v = std::strtod(token.c_str(), &end);
      if (end == token.c_str() || *end != '\0') fail("bad number '" + token + "'");
      return v;
    } else {
      T v{};
      std::istringstream parse(token);
      if (!(parse >> v) || !parse.eof()) fail("bad integer '" + token + "'");
      return v;
    }
  }

  void expect_end(std::istringstream& fields) {
    std::string extra;
    if (fields >> extra) fail("unexpected trailing field '" + extra + "'");
  }

  void expect_eof() {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (line.find_first_not_of(" \t\r") != std::string::npos) fail("content after 'end'");
    }
  }

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError("load_martingale: line " + std::to_string(line_no_) + ": " + what);
  }

 private:
  std::istream& in_;
  std::size_t line_no_ = 0;
};

}  // namespace detail

inline DualMartingale load_martingale(std::istream& in) {
  detail::LineReader reader(in);
  const int version = reader.value<int>("bermudan-dual-martingale");
  if (version != kMartingaleFormatVersion) {
    reader.fail("unsupported format version " + std::to_string(version));
  }
  std::uint64_t stored_fingerprint = 0;
  {
    auto fields = reader.next("fingerprint");
    std::string hex;
    fields >> hex;
    reader.expect_end(fields);
    std::size_t used = 0;
    try {
      stored_fingerprint = std::stoull(hex, &used, 16);
    } catch (const std::exception&) {
      reader.fail("bad fingerprint");
    }
    if (used != hex.size() || hex.size() != 16) reader.fail("bad fingerprint");
  }
  MartingaleGrid grid;
  grid.assets = reader.value<std::size_t>("assets");
  grid.exercise_dates = reader.value<std::size_t>("exercise_dates");
  grid.subticks = reader.value<std::size_t>("subticks");
  grid.bins = reader.value<std::size_t>("bins");
  if (grid.assets == 0 || grid.exercise_dates == 0 || grid.subticks == 0 || grid.bins == 0) {
    reader.fail("grid sizes must be positive");
  }
  {
    auto fields = reader.next("layout");
    std::string name;
    fields >> name;
    reader.expect_end(fields);
    try {
      grid.layout = parse_cell_layout(name);
    } catch (const ValidationError&) {
      reader.fail("unknown layout '" + name + "'");
    }
  }
  grid.maturity = reader.value<double>("maturity");
  grid.rate = reader.value<double>("rate");
  {
    auto fields = reader.next("dividend");
    grid.dividend.assign(grid.assets, 0.0);
    for (auto& q : grid.dividend) q = reader.read<double>(fields);
    reader.expect_end(fields);
  }
  if (grid.fingerprint() != stored_fingerprint) {
    reader.fail("fingerprint does not match the grid metadata");
  }
  const auto fit_paths = reader.value<std::size_t>("fit_paths");
  const auto fit_seed = reader.value<std::uint64_t>("fit_seed");

  IncrementBasis basis{grid.assets, grid.exercise_dates, grid.subticks, grid.bins, {},
                       grid.layout};
  try {
    (void)basis.cells();
  } catch (const ValidationError& e) {
    reader.fail(e.what());
  }
  {
    auto header = reader.next("breakpoints");
    reader.expect_end(header);
  }
  const std::size_t times = grid.exercise_dates * grid.subticks;
  basis.local.assign(times, LocalBasis{grid.bins,
                                       std::vector<std::vector<double>>(grid.assets)});
  for (std::size_t t = 0; t < times; ++t) {
    for (std::size_t k = 0; k < grid.assets; ++k) {
      auto fields = reader.next();
      if (reader.read<std::size_t>(fields) != t || reader.read<std::size_t>(fields) != k) {
        reader.fail("breakpoint rows out of order");
      }
      auto& b = basis.local[t].breakpoints[k];
      b.resize(grid.bins - 1);
      for (auto& x : b) x = reader.read<double>(fields);
      reader.expect_end(fields);
    }
  }
  {
    auto header = reader.next("alpha");
    reader.expect_end(header);
  }
  std::vector<Eigen::VectorXd> alpha(grid.exercise_dates,
                                     Eigen::VectorXd(basis.increments_per_interval()));
  for (std::size_t n = 1; n <= grid.exercise_dates; ++n) {
    auto fields = reader.next();
    if (reader.read<std::size_t>(fields) != n) reader.fail("alpha rows out of order");
    for (auto& a : alpha[n - 1]) a = reader.read<double>(fields);
    reader.expect_end(fields);
  }
  {
    auto tail = reader.next("end");
    reader.expect_end(tail);
    reader.expect_eof();
  }
  try {
    return DualMartingale(std::move(grid), std::move(basis), std::move(alpha), fit_paths,
                          fit_seed);
  } catch (const ValidationError& e) {
    throw FormatError(std::string("load_martingale: ") + e.what());
  }
}

inline DualMartingale load_martingale(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("load_martingale: cannot open '" + path + "'");
  return load_martingale(in);
}

}  // namespace bermudan
