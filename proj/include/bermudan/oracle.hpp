#pragma once

// Exact ground truth on a recombining binomial tree: Snell envelope by
// backward induction, the optimal stopping time, and the Doob decomposition
// U = U_0 + M* - A*. Every conditional expectation is a two-point sum, and
// small trees can be enumerated path by path.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "bermudan/dual_martingale.hpp"
#include "bermudan/error.hpp"
#include "bermudan/market.hpp"
#include "bermudan/stopping.hpp"

namespace bermudan::oracle {

inline constexpr std::size_t kMaxEnumerationSteps = 20;

struct TreeModel {
  std::size_t steps = 1;  // N
  double up = 1.1;
  double down = 0.9;
  double prob_up = 0.5;
  double s0 = 100.0;
  double growth = 1.0;  // S^0_{n+1} / S^0_n
  double dt = 1.0;      // calendar length of a step, only used to build paths

  /// Cox-Ross-Rubinstein tree for a Black-Scholes asset.
  static TreeModel crr(double s0, double rate, double sigma, double maturity, std::size_t steps) {
    const double dt = maturity / static_cast<double>(steps);
    const double up = std::exp(sigma * std::sqrt(dt));
    const double down = 1.0 / up;
    const double growth = std::exp(rate * dt);
    return {steps, up, down, (growth - down) / (up - down), s0, growth, dt};
  }

  void validate() const {
    detail::require(steps >= 1, "tree: need at least one step");
    detail::require(up > down && down > 0.0, "tree: need up > down > 0");
    detail::require(prob_up > 0.0 && prob_up < 1.0, "tree: need 0 < p < 1");
    detail::require(s0 > 0.0 && growth > 0.0 && dt > 0.0, "tree: s0, growth, dt must be positive");
  }

  std::size_t node_count() const { return (steps + 1) * (steps + 2) / 2; }
  static std::size_t node_index(std::size_t n, std::size_t ups) { return n * (n + 1) / 2 + ups; }
  double price(std::size_t n, std::size_t ups) const {
    return s0 * std::pow(up, static_cast<double>(ups)) *
           std::pow(down, static_cast<double>(n - ups));
  }
  double numeraire(std::size_t n) const { return std::pow(growth, static_cast<double>(n)); }
};

struct TreeNode {
  double price = 0.0;
  double z = 0.0;             // discounted payoff
  double u = 0.0;             // Snell envelope
  double continuation = 0.0;  // E[U_{n+1} | node]; equals z at maturity
  bool exercise = false;      // U == Z
  double compensator_step = 0.0;  // A*_{n+1} - A*_n = U_n - E[U_{n+1} | node]
  double martingale_up = 0.0;     // M*_{n+1} - M*_n after an up move
  double martingale_down = 0.0;   // ... after a down move
};

struct TreeSolution {
  TreeModel tree;
  std::vector<TreeNode> nodes;

  const TreeNode& node(std::size_t n, std::size_t ups) const {
    return nodes[TreeModel::node_index(n, ups)];
  }
  double u0() const { return nodes.front().u; }
};

inline TreeSolution solve_tree(const TreeModel& tree, const PayoffSpec& payoff) {
  tree.validate();
  payoff.validate_for(1);
  TreeSolution sol{tree, std::vector<TreeNode>(tree.node_count())};
  const double p = tree.prob_up;
  for (std::size_t n = tree.steps + 1; n-- > 0;) {
    for (std::size_t i = 0; i <= n; ++i) {
      TreeNode& node = sol.nodes[TreeModel::node_index(n, i)];
      node.price = tree.price(n, i);
      node.z = payoff_value(payoff, std::span(&node.price, 1)) / tree.numeraire(n);
      if (n == tree.steps) {
        node.u = node.z;
        node.continuation = node.z;
        node.exercise = true;
        continue;
      }
      const TreeNode& hi = sol.node(n + 1, i + 1);
      const TreeNode& lo = sol.node(n + 1, i);
      node.continuation = p * hi.u + (1.0 - p) * lo.u;
      node.exercise = node.z >= node.continuation;
      node.u = node.exercise ? node.z : node.continuation;
      node.compensator_step = node.u - node.continuation;
      node.martingale_up = hi.u - node.continuation;
      node.martingale_down = lo.u - node.continuation;
    }
  }
  return sol;
}

/// One enumerated path: ups[n] is the number of up moves after n steps.
struct TreePath {
  std::vector<std::size_t> ups;
  double probability = 1.0;
};

inline std::vector<TreePath> enumerate_paths(const TreeModel& tree) {
  tree.validate();
  if (tree.steps > kMaxEnumerationSteps) {
    throw ValidationError("enumerate_paths: " + std::to_string(tree.steps) +
                          " steps exceeds the enumeration bound of " +
                          std::to_string(kMaxEnumerationSteps));
  }
  const std::size_t count = std::size_t{1} << tree.steps;
  std::vector<TreePath> out(count);
  for (std::size_t code = 0; code < count; ++code) {
    TreePath& path = out[code];
    path.ups.assign(tree.steps + 1, 0);
    for (std::size_t n = 0; n < tree.steps; ++n) {
      const bool up = (code >> n) & 1u;
      path.ups[n + 1] = path.ups[n] + (up ? 1 : 0);
      path.probability *= up ? tree.prob_up : 1.0 - tree.prob_up;
    }
  }
  return out;
}

/// Z, U, M*, A* and the optimal stopping index along one path.
struct PathProcesses {
  std::vector<double> z, u, m, a;
  std::size_t tau_star = 0;
};

inline PathProcesses path_processes(const TreeSolution& sol, const TreePath& path) {
  const std::size_t big_n = sol.tree.steps;
  PathProcesses out{std::vector<double>(big_n + 1), std::vector<double>(big_n + 1),
                    std::vector<double>(big_n + 1, 0.0), std::vector<double>(big_n + 1, 0.0),
                    big_n};
  bool stopped = false;
  for (std::size_t n = 0; n <= big_n; ++n) {
    const TreeNode& node = sol.node(n, path.ups[n]);
    out.z[n] = node.z;
    out.u[n] = node.u;
    if (!stopped && node.exercise) {
      out.tau_star = n;
      stopped = true;
    }
    if (n < big_n) {
      const bool up = path.ups[n + 1] > path.ups[n];
      out.m[n + 1] = out.m[n] + (up ? node.martingale_up : node.martingale_down);
      out.a[n + 1] = out.a[n] + node.compensator_step;
    }
  }
  return out;
}

/// Enumerated paths as a one-asset PathBatch with a single sub-tick, plus the
/// path probabilities to use as regression weights.
struct EnumeratedBatch {
  PathBatch paths;
  std::vector<double> weights;
};

inline EnumeratedBatch enumerated_batch(const TreeModel& tree, const std::vector<TreePath>& all) {
  ModelSpec model = single_asset_model(
      tree.s0, std::log(tree.growth) / tree.dt,
      std::log(tree.up / tree.down) / (2.0 * std::sqrt(tree.dt)),
      tree.dt * static_cast<double>(tree.steps), tree.steps, 1);
  std::vector<double> values;
  values.reserve(all.size() * (tree.steps + 1));
  std::vector<double> weights;
  for (const TreePath& path : all) {
    for (std::size_t n = 0; n <= tree.steps; ++n) values.push_back(tree.price(n, path.ups[n]));
    weights.push_back(path.probability);
  }
  return {PathBatch(std::move(model), all.size(), std::move(values)), std::move(weights)};
}

/// Per-date cells isolating every tree node: at date n the thresholds sit
/// between consecutive node prices, so cell i holds the node with i up moves.
/// `bins` must be at least N.
inline IncrementBasis node_indicator_basis(const TreeModel& tree, std::size_t bins) {
  detail::require(bins >= tree.steps, "node_indicator_basis: need bins >= N");
  IncrementBasis basis{1, tree.steps, 1, bins, {}};
  for (std::size_t n = 0; n < tree.steps; ++n) {
    std::vector<double> thresholds;
    for (std::size_t i = 0; i + 1 < bins; ++i) {
      if (i < n) {
        thresholds.push_back(std::sqrt(tree.price(n, i) * tree.price(n, i + 1)));
      } else {
        const double last = thresholds.empty() ? tree.price(n, n) : thresholds.back();
        thresholds.push_back(std::max(last, tree.price(n, n)) * tree.up);
      }
    }
    basis.local.push_back(LocalBasis{bins, {std::move(thresholds)}});
  }
  return basis;
}

/// Same cells as a per-date policy basis (date n uses the date-n cells).
inline PolicyBasis node_indicator_policy_basis(const TreeModel& tree) {
  const IncrementBasis cells = node_indicator_basis(tree, std::max<std::size_t>(tree.steps, 1));
  std::vector<RegressionBasis> per_date;
  for (std::size_t n = 0; n < tree.steps; ++n) per_date.emplace_back(cells.local[n]);
  per_date.emplace_back(cells.local.back());
  return PolicyBasis(std::move(per_date));
}

struct IdentityCheck {
  std::string name;
  bool passed = true;
  double max_error = 0.0;
  std::optional<std::size_t> offending_path;
};

struct IdentityReport {
  std::vector<IdentityCheck> checks;

  bool all_passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const auto& c) { return c.passed; });
  }
  const IdentityCheck& find(const std::string& name) const {
    for (const auto& c : checks) {
      if (c.name == name) return c;
    }
    throw ValidationError("identity report: no check named '" + name + "'");
  }
};

namespace detail {

class CheckBuilder {
 public:
  CheckBuilder(std::string name, double tolerance) : check_{std::move(name), true, 0.0, std::nullopt}, tol_(tolerance) {}

  void observe(double error, std::optional<std::size_t> path = std::nullopt) {
    error = std::abs(error);
    if (!(error <= check_.max_error)) {
      check_.max_error = std::isnan(error) ? INFINITY : error;
      if (!(error <= tol_) && !check_.offending_path) check_.offending_path = path;
    }
    if (!(error <= tol_)) check_.passed = false;
  }
  /// Records a one-sided violation: `excess` > 0 fails.
  void observe_excess(double excess, std::optional<std::size_t> path = std::nullopt) {
    observe(excess > 0.0 ? excess : 0.0, path);
  }
  IdentityCheck done() { return std::move(check_); }

 private:
  IdentityCheck check_;
  double tol_;
};

}  // namespace detail

/// Exhaustive verification of the Snell/Doob identities on every path.
inline IdentityReport exact_identity_checks(const TreeModel& tree, const TreeSolution& sol,
                                            double tolerance = 1e-10) {
  const auto all = enumerate_paths(tree);
  const std::size_t big_n = tree.steps;
  const double u0 = sol.u0();

  detail::CheckBuilder dominates("snell_dominates_payoff", tolerance);
  detail::CheckBuilder terminal("terminal_condition", tolerance);
  detail::CheckBuilder supermart("snell_supermartingale", tolerance);
  detail::CheckBuilder compensator_sign("compensator_nondecreasing", tolerance);
  for (std::size_t n = 0; n <= big_n; ++n) {
    for (std::size_t i = 0; i <= n; ++i) {
      const TreeNode& node = sol.node(n, i);
      dominates.observe_excess(node.z - node.u);
      if (n == big_n) {
        terminal.observe(node.u - node.z);
      } else {
        supermart.observe_excess(node.continuation - node.u);
        compensator_sign.observe_excess(-node.compensator_step);
      }
    }
  }

  detail::CheckBuilder doob("doob_reconstruction", tolerance);
  detail::CheckBuilder a_at_tau("compensator_zero_at_optimum", tolerance);
  detail::CheckBuilder z_minus_m("optimal_stopped_payoff_minus_martingale", tolerance);
  detail::CheckBuilder dual_path("dual_pathwise_maximum", tolerance);
  detail::CheckBuilder dual_mean("dual_expectation", tolerance);
  detail::CheckBuilder stopped("stopped_snell_martingale", tolerance);
  detail::CheckBuilder mean_zero("doob_martingale_mean_zero", tolerance);

  std::vector<double> stopped_mean(big_n + 1, 0.0), m_mean(big_n + 1, 0.0);
  double dual = 0.0, mass = 0.0;
  for (std::size_t idx = 0; idx < all.size(); ++idx) {
    const auto proc = path_processes(sol, all[idx]);
    const double w = all[idx].probability;
    mass += w;
    double best = -INFINITY;
    for (std::size_t n = 0; n <= big_n; ++n) {
      doob.observe(u0 + proc.m[n] - proc.a[n] - proc.u[n], idx);
      best = std::max(best, proc.z[n] - proc.m[n]);
      stopped_mean[n] += w * proc.u[std::min(n, proc.tau_star)];
      m_mean[n] += w * proc.m[n];
    }
    a_at_tau.observe(proc.a[proc.tau_star], idx);
    z_minus_m.observe(proc.z[proc.tau_star] - proc.m[proc.tau_star] - u0, idx);
    dual_path.observe(best - u0, idx);
    dual += w * best;
  }
  dual_mean.observe(dual - u0);
  dual_mean.observe(mass - 1.0);
  for (std::size_t n = 0; n <= big_n; ++n) {
    stopped.observe(stopped_mean[n] - u0);
    mean_zero.observe(m_mean[n]);
  }

  IdentityReport report;
  for (auto* b : {&dominates, &terminal, &supermart, &compensator_sign, &doob, &a_at_tau,
                  &z_minus_m, &dual_path, &dual_mean, &stopped, &mean_zero}) {
    report.checks.push_back(b->done());
  }
  return report;
}

/// Z and M* of the enumerated paths, as the matrices the Monte-Carlo
/// estimators consume.
struct TreeMatrices {
  PayoffMatrix z;
  MartingaleMatrix m;
  StopTimes tau_star;
};

inline TreeMatrices tree_matrices(const TreeSolution& sol, const std::vector<TreePath>& all) {
  const std::size_t dates = sol.tree.steps + 1;
  TreeMatrices out{PayoffMatrix(all.size(), dates), MartingaleMatrix(all.size(), dates),
                   StopTimes{std::vector<std::size_t>(all.size()), sol.tree.steps}};
  for (std::size_t idx = 0; idx < all.size(); ++idx) {
    const auto proc = path_processes(sol, all[idx]);
    for (std::size_t n = 0; n < dates; ++n) {
      out.z(idx, n) = proc.z[n];
      out.m(idx, n) = proc.m[n];
    }
    out.tau_star.tau[idx] = proc.tau_star;
  }
  return out;
}

}  // namespace bermudan::oracle
