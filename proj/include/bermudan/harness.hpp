#pragma once

// Experiment orchestration: fit the martingale on sample set 1, fit
// Longstaff-Schwartz policies on set 2, price out of sample on set 3, and
// repeat over runs to measure the across-run dispersion of every estimator.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <iomanip>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "bermudan/dual_martingale.hpp"
#include "bermudan/error.hpp"
#include "bermudan/estimators.hpp"
#include "bermudan/market.hpp"
#include "bermudan/oracle.hpp"
#include "bermudan/regression.hpp"
#include "bermudan/rng.hpp"
#include "bermudan/stopping.hpp"

namespace bermudan::harness {

/// Tags mixed into derived seeds so the three sample sets never share a stream.
enum class SampleSet : std::uint64_t { Martingale = 1, Policy = 2, Evaluation = 3 };

struct SeedConfig {
  std::uint64_t q1 = 1;
  std::uint64_t q2 = 2;
  std::uint64_t q3 = 3;
};

struct ExperimentConfig {
  std::string id = "experiment";
  ModelSpec model;  // model.subticks is the martingale sub-tick count
  PayoffSpec payoff;
  std::size_t q1 = 100000;
  std::size_t q2 = 50000;
  std::size_t q3 = 50000;
  std::size_t p_local = 50;
  CellLayout cells = CellLayout::PerCoordinate;
  DualTarget dual_target = DualTarget::ExcessOverPayoff;
  std::size_t ls_degree = 6;
  std::vector<PolicyVariant> variants{PolicyVariant::LS2, PolicyVariant::LS1};
  std::size_t runs = 1;
  SeedConfig seeds;
  bool itm_only = false;
  bool include_ls2prime = false;
  bool refresh_q1 = false;     // refit the martingale on a fresh set 1 every run
  bool freeze_policy = false;  // fit policies once (run 0) and reuse them

  void validate() const {
    model.validate();
    payoff.validate_for(model.assets);
    detail::require(q1 >= 1 && q2 >= 1 && q3 >= 1, "config: sample counts must be >= 1");
    detail::require(p_local >= 1, "config: p_local must be >= 1");
    detail::require(runs >= 1, "config: runs must be >= 1");
    detail::require(!variants.empty(), "config: need at least one policy variant");
  }

  /// Variants priced with the control variate, in output order.
  std::vector<PolicyVariant> cv_variants() const {
    auto out = variants;
    if (include_ls2prime &&
        std::find(out.begin(), out.end(), PolicyVariant::LS2Prime) == out.end()) {
      out.push_back(PolicyVariant::LS2Prime);
    }
    return out;
  }

  std::uint64_t seed(SampleSet set, std::size_t run) const {
    switch (set) {
      case SampleSet::Martingale:
        return rng::derive_seed(seeds.q1, 1, refresh_q1 ? run : 0);
      case SampleSet::Policy:
        return rng::derive_seed(seeds.q2, 2, freeze_policy ? 0 : run);
      case SampleSet::Evaluation:
        return rng::derive_seed(seeds.q3, 3, run);
    }
    return 0;
  }
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double parse_double(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (t.empty() || *end != '\0') {
    throw ValidationError("config: '" + key + "' expects a number, got '" + text + "'");
  }
  return v;
}

inline std::uint64_t parse_unsigned(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  // Accept 1e5 style counts when they are exact integers.
  const double v = parse_double(key, t);
  if (!(v >= 0.0) || v != std::floor(v) || v > 1.8e19) {
    throw ValidationError("config: '" + key + "' expects a non-negative integer, got '" + text +
                          "'");
  }
  if (t.find_first_not_of("0123456789") == std::string::npos) return std::stoull(t);
  return static_cast<std::uint64_t>(v);
}

inline bool parse_bool(const std::string& key, const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ValidationError("config: '" + key + "' expects true/false, got '" + text + "'");
}

inline std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

inline std::vector<double> parse_list(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& item : split_list(text)) out.push_back(parse_double(key, item));
  if (out.empty()) throw ValidationError("config: '" + key + "' is empty");
  return out;
}

using Setter = std::function<void(ExperimentConfig&, const std::string&, const std::string&)>;

inline const std::map<std::string, Setter>& config_keys() {
  static const std::map<std::string, Setter> keys = {
      {"experiment.id", [](auto& c, auto&, auto& v) { c.id = trim(v); }},
      {"model.assets",
       [](auto& c, auto& k, auto& v) { c.model.assets = parse_unsigned(k, v); }},
      {"model.s0", [](auto& c, auto& k, auto& v) { c.model.s0 = parse_list(k, v); }},
      {"model.rate", [](auto& c, auto& k, auto& v) { c.model.rate = parse_double(k, v); }},
      {"model.dividend",
       [](auto& c, auto& k, auto& v) { c.model.dividend = parse_list(k, v); }},
      {"model.sigma", [](auto& c, auto& k, auto& v) { c.model.sigma = parse_list(k, v); }},
      {"model.maturity",
       [](auto& c, auto& k, auto& v) { c.model.maturity = parse_double(k, v); }},
      {"model.dates",
       [](auto& c, auto& k, auto& v) { c.model.exercise_dates = parse_unsigned(k, v); }},
      {"payoff.kind", [](auto& c, auto&, auto& v) { c.payoff.kind = parse_payoff_kind(trim(v)); }},
      {"payoff.strike", [](auto& c, auto& k, auto& v) { c.payoff.strike = parse_double(k, v); }},
      {"payoff.strike_high",
       [](auto& c, auto& k, auto& v) { c.payoff.strike_high = parse_double(k, v); }},
      {"algorithm.q1", [](auto& c, auto& k, auto& v) { c.q1 = parse_unsigned(k, v); }},
      {"algorithm.q2", [](auto& c, auto& k, auto& v) { c.q2 = parse_unsigned(k, v); }},
      {"algorithm.q3", [](auto& c, auto& k, auto& v) { c.q3 = parse_unsigned(k, v); }},
      {"algorithm.nbar",
       [](auto& c, auto& k, auto& v) { c.model.subticks = parse_unsigned(k, v); }},
      {"algorithm.p_local", [](auto& c, auto& k, auto& v) { c.p_local = parse_unsigned(k, v); }},
      {"algorithm.cells",
       [](auto& c, auto&, auto& v) { c.cells = parse_cell_layout(trim(v)); }},
      {"algorithm.dual_target",
       [](auto& c, auto&, auto& v) { c.dual_target = parse_dual_target(trim(v)); }},
      {"algorithm.ls_degree",
       [](auto& c, auto& k, auto& v) { c.ls_degree = parse_unsigned(k, v); }},
      {"algorithm.variants",
       [](auto& c, auto&, auto& v) {
         c.variants.clear();
         for (const auto& name : split_list(v)) c.variants.push_back(parse_policy_variant(name));
       }},
      {"algorithm.runs", [](auto& c, auto& k, auto& v) { c.runs = parse_unsigned(k, v); }},
      {"algorithm.itm_only", [](auto& c, auto& k, auto& v) { c.itm_only = parse_bool(k, v); }},
      {"algorithm.include_ls2prime",
       [](auto& c, auto& k, auto& v) { c.include_ls2prime = parse_bool(k, v); }},
      {"algorithm.refresh_q1",
       [](auto& c, auto& k, auto& v) { c.refresh_q1 = parse_bool(k, v); }},
      {"algorithm.freeze_policy",
       [](auto& c, auto& k, auto& v) { c.freeze_policy = parse_bool(k, v); }},
      {"seeds.q1", [](auto& c, auto& k, auto& v) { c.seeds.q1 = parse_unsigned(k, v); }},
      {"seeds.q2", [](auto& c, auto& k, auto& v) { c.seeds.q2 = parse_unsigned(k, v); }},
      {"seeds.q3", [](auto& c, auto& k, auto& v) { c.seeds.q3 = parse_unsigned(k, v); }},
  };
  return keys;
}

inline void broadcast(std::vector<double>& v, std::size_t assets, const char* name) {
  if (v.size() == 1 && assets > 1) v.assign(assets, v.front());
  if (v.size() != assets) {
    throw ValidationError(std::string("config: model.") + name + " needs 1 or " +
                          std::to_string(assets) + " values");
  }
}

}  // namespace detail

/// Sets one `section.key` entry; unknown keys are errors.
inline void apply_setting(ExperimentConfig& config, const std::string& key,
                          const std::string& value) {
  const auto& keys = detail::config_keys();
  const auto it = keys.find(key);
  if (it == keys.end()) throw ValidationError("config: unknown key '" + key + "'");
  it->second(config, key, value);
}

/// Broadcasts scalar per-asset entries and validates.
inline void finalize(ExperimentConfig& config) {
  detail::broadcast(config.model.s0, config.model.assets, "s0");
  detail::broadcast(config.model.sigma, config.model.assets, "sigma");
  detail::broadcast(config.model.dividend, config.model.assets, "dividend");
  config.validate();
}

/// Parses an INI-style config and applies `overrides` ("section.key=value")
/// on top of it.
inline ExperimentConfig parse_config(std::istream& in,
                                     const std::vector<std::string>& overrides = {}) {
  boost::property_tree::ptree tree;
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  ExperimentConfig config;
  for (const auto& [section, entries] : tree) {
    if (entries.empty()) {
      throw ValidationError("config: key '" + section + "' must live in a section");
    }
    for (const auto& [key, value] : entries) {
      apply_setting(config, section + "." + key, value.data());
    }
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("override '" + o + "' must look like section.key=value");
    }
    apply_setting(config, detail::trim(o.substr(0, eq)), o.substr(eq + 1));
  }
  finalize(config);
  return config;
}

inline ExperimentConfig load_config(const std::string& path,
                                    const std::vector<std::string>& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open '" + path + "'");
  try {
    return parse_config(in, overrides);
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

/// One estimator in one run.
struct MethodEstimate {
  std::string method;  // "LS1" (plain) or "<variant>+CV"
  PriceEstimate price;
};

struct RunRecord {
  std::size_t index = 0;
  std::uint64_t seed_q1 = 0, seed_q2 = 0, seed_q3 = 0;
  std::vector<MethodEstimate> methods;  // plain LS1 first
  PriceEstimate dual;
  std::vector<double> plain_samples;    // Z_tau under the LS1 policy

  const PriceEstimate& method(const std::string& name) const {
    for (const auto& m : methods) {
      if (m.method == name) return m.price;
    }
    throw ValidationError("run record: no method '" + name + "'");
  }
};

/// One output line: across-run statistics of one method.
struct ResultRow {
  std::string experiment_id;
  std::string method;
  double price = 0.0;
  std::optional<double> stddev;  // across runs
  std::optional<double> lambda;
  double dual_price = 0.0;
  std::optional<double> dual_stddev;
  std::size_t q1 = 0, q2 = 0, q3 = 0, nbar = 0, p_local = 0, runs = 0;
  double seconds = 0.0;
  double within_stderr = 0.0;  // mean within-run standard error
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<RunRecord> runs;
  std::vector<ResultRow> rows;
  std::vector<DualMartingale> martingales;  // one, or one per run with refresh_q1
  double seconds = 0.0;

  const ResultRow& row(const std::string& method) const {
    for (const auto& r : rows) {
      if (r.method == method) return r;
    }
    throw ValidationError("experiment result: no row '" + method + "'");
  }

  VarianceDecomposition plain_decomposition() const {
    std::vector<std::vector<double>> samples;
    for (const auto& r : runs) samples.push_back(r.plain_samples);
    return variance_decomposition(samples);
  }
};

struct RunOptions {
  bool record_timing = true;
  /// Checked margin for dual >= CV - k * combined standard error.
  double duality_sigmas = 3.0;
};

inline std::string method_name(PolicyVariant v, bool control_variate) {
  return std::string(to_string(v)) + (control_variate ? "+CV" : "");
}

/// Simulates set 1 and fits the dual martingale on it.
inline DualMartingale fit_martingale(const ExperimentConfig& config, std::size_t run = 0) {
  const auto paths = simulate_paths(config.model, config.q1,
                                    config.seed(SampleSet::Martingale, run));
  const auto z = discounted_payoffs(paths, config.payoff);
  const auto basis = build_increment_basis(paths, config.p_local, config.cells);
  return fit_dual_coefficients(paths, z, basis, {}, config.dual_target);
}

inline PolicyBasis policy_basis(const ExperimentConfig& config) {
  return PolicyBasis(build_polynomial_basis(config.ls_degree, config.model.assets,
                                            config.model.s0));
}

namespace detail {

inline double combined_stderr(const PriceEstimate& a, const PriceEstimate& b) {
  const double sa = a.std_error.value_or(0.0), sb = b.std_error.value_or(0.0);
  return std::sqrt(sa * sa + sb * sb);
}

inline void check_seed_disjointness(const ExperimentConfig& config) {
  std::map<std::uint64_t, std::string> owner;
  auto claim = [&](std::uint64_t seed, const std::string& who) {
    auto [it, inserted] = owner.emplace(seed, who);
    if (!inserted && it->second.substr(0, 2) != who.substr(0, 2)) {
      throw ValidationError("seed bookkeeping: " + who + " reuses the stream of " + it->second);
    }
  };
  for (std::size_t r = 0; r < config.runs; ++r) {
    claim(config.seed(SampleSet::Martingale, r), "q1 run " + std::to_string(r));
    claim(config.seed(SampleSet::Policy, r), "q2 run " + std::to_string(r));
    claim(config.seed(SampleSet::Evaluation, r), "q3 run " + std::to_string(r));
  }
}

inline std::optional<double> across_run_stddev(const std::vector<double>& values) {
  if (values.size() < 2) return std::nullopt;
  return std::sqrt(sample_moments(values).variance);
}

}  // namespace detail

/// Three-sample protocol repeated over config.runs runs. A supplied
/// martingale replaces the set-1 fit (and must match the grid).
inline ExperimentResult run_experiment(const ExperimentConfig& config,
                                       const DualMartingale* preloaded = nullptr,
                                       const RunOptions& options = {}) {
  config.validate();
  detail::check_seed_disjointness(config);
  const auto start = std::chrono::steady_clock::now();

  ExperimentResult result{config, {}, {}, {}, 0.0};
  if (preloaded != nullptr) {
    result.martingales.push_back(*preloaded);
  } else {
    result.martingales.push_back(fit_martingale(config, 0));
  }

  const auto basis = policy_basis(config);
  const auto cv_variants = config.cv_variants();
  std::vector<PolicyVariant> fitted{PolicyVariant::LS1};
  for (auto v : cv_variants) {
    if (std::find(fitted.begin(), fitted.end(), v) == fitted.end()) fitted.push_back(v);
  }
  const PolicyOptions policy_options{config.itm_only, {}};
  std::map<PolicyVariant, PolicyRegressors> frozen;

  for (std::size_t r = 0; r < config.runs; ++r) {
    try {
      if (config.refresh_q1 && preloaded == nullptr && r > 0) {
        result.martingales.push_back(fit_martingale(config, r));
      }
      const DualMartingale& dm = result.martingales.back();
      RunRecord record;
      record.index = r;
      record.seed_q1 = config.seed(SampleSet::Martingale, r);
      record.seed_q2 = config.seed(SampleSet::Policy, r);
      record.seed_q3 = config.seed(SampleSet::Evaluation, r);

      std::map<PolicyVariant, PolicyRegressors> policies;
      if (config.freeze_policy && !frozen.empty()) {
        policies = frozen;
      } else {
        const auto fit_paths = simulate_paths(config.model, config.q2, record.seed_q2);
        const auto z2 = discounted_payoffs(fit_paths, config.payoff);
        const auto m2 = evaluate_martingale(dm, fit_paths);
        for (auto v : fitted) {
          policies.emplace(v, fit_policy(z2, &m2, fit_paths, basis, v, policy_options));
        }
        if (config.freeze_policy) frozen = policies;
      }

      const auto eval_paths = simulate_paths(config.model, config.q3, record.seed_q3);
      const auto z3 = discounted_payoffs(eval_paths, config.payoff);
      const auto m3 = evaluate_martingale(dm, eval_paths);
      record.dual = dual_price(z3, m3);

      const auto plain_tau = apply_policy(policies.at(PolicyVariant::LS1), z3, &m3, eval_paths);
      record.plain_samples = stopped_values(z3, plain_tau);
      record.methods.push_back({"LS1", estimate_from_samples(record.plain_samples)});
      for (auto v : cv_variants) {
        const auto tau =
            v == PolicyVariant::LS1 ? plain_tau : apply_policy(policies.at(v), z3, &m3, eval_paths);
        const auto cv = cv_price(z3, m3, tau);
        const double margin = options.duality_sigmas * detail::combined_stderr(record.dual, cv);
        if (record.dual.mean < cv.mean - margin) {
          std::ostringstream os;
          os << std::setprecision(10) << "weak duality violated: dual " << record.dual.mean
             << " < " << method_name(v, true) << ' ' << cv.mean << " - " << margin;
          throw WeakDualityViolation(os.str());
        }
        record.methods.push_back({method_name(v, true), cv});
      }
      result.runs.push_back(std::move(record));
    } catch (const WeakDualityViolation& e) {
      throw WeakDualityViolation(config.id + " run " + std::to_string(r) + ": " + e.what());
    } catch (const ValidationError& e) {
      throw ValidationError(config.id + " run " + std::to_string(r) + ": " + e.what());
    }
  }

  result.seconds = options.record_timing
                       ? std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
                             .count()
                       : 0.0;

  std::vector<double> duals;
  for (const auto& run : result.runs) duals.push_back(run.dual.mean);
  const double dual_mean = sample_moments(duals).mean;
  const auto dual_dispersion = detail::across_run_stddev(duals);

  for (const auto& first : result.runs.front().methods) {
    ResultRow row;
    row.experiment_id = config.id;
    row.method = first.method;
    std::vector<double> prices, lambdas;
    double within = 0.0;
    for (const auto& run : result.runs) {
      const auto& est = run.method(first.method);
      prices.push_back(est.mean);
      if (est.lambda) lambdas.push_back(*est.lambda);
      within += est.std_error.value_or(0.0);
    }
    row.price = sample_moments(prices).mean;
    row.stddev = detail::across_run_stddev(prices);
    if (!lambdas.empty()) row.lambda = sample_moments(lambdas).mean;
    row.dual_price = dual_mean;
    row.dual_stddev = dual_dispersion;
    row.q1 = result.martingales.front().fit_paths();
    row.q2 = config.q2;
    row.q3 = config.q3;
    row.nbar = config.model.subticks;
    row.p_local = config.p_local;
    row.runs = config.runs;
    row.seconds = result.seconds;
    row.within_stderr = within / static_cast<double>(result.runs.size());
    result.rows.push_back(std::move(row));
  }
  return result;
}

/// Column layout of the results CSV (version 1).
inline constexpr const char* kResultsHeader =
    "experiment_id,method,price,stddev,lambda,dual_price,dual_stddev,q1,q2,q3,nbar,p_local,"
    "runs,seconds,within_stderr";

inline void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows,
                              bool header = true) {
  auto opt = [&](const std::optional<double>& v) {
    if (v) {
      out << *v;
    } else {
      out << "NA";
    }
  };
  if (header) out << kResultsHeader << '\n';
  const auto flags = out.flags();
  const auto precision = out.precision();
  out << std::setprecision(12);
  for (const auto& r : rows) {
    out << r.experiment_id << ',' << r.method << ',' << r.price << ',';
    opt(r.stddev);
    out << ',';
    opt(r.lambda);
    out << ',' << r.dual_price << ',';
    opt(r.dual_stddev);
    out << ',' << r.q1 << ',' << r.q2 << ',' << r.q3 << ',' << r.nbar << ',' << r.p_local << ','
        << r.runs << ',' << std::setprecision(4) << r.seconds << std::setprecision(12) << ','
        << r.within_stderr << '\n';
  }
  out.flags(flags);
  out.precision(precision);
}

/// Human-readable table: Q1 Nbar P | CV prices with stddev and lambda | dual.
inline void write_table_layout(std::ostream& out, const std::vector<ExperimentResult>& results) {
  auto cell = [&](const std::optional<double>& v, int precision) {
    std::ostringstream os;
    if (v) {
      os << std::fixed << std::setprecision(precision) << *v;
    } else {
      os << "NA";
    }
    return os.str();
  };
  out << std::left << std::setw(14) << "experiment" << std::right << std::setw(9) << "Q1"
      << std::setw(5) << "Nbar" << std::setw(5) << "P" << std::setw(12) << "method"
      << std::setw(10) << "price" << std::setw(9) << "stddev" << std::setw(8) << "lambda"
      << std::setw(10) << "dual" << std::setw(9) << "stddev" << '\n';
  for (const auto& res : results) {
    for (const auto& r : res.rows) {
      out << std::left << std::setw(14) << r.experiment_id << std::right << std::setw(9) << r.q1
          << std::setw(5) << r.nbar << std::setw(5) << r.p_local << std::setw(12) << r.method
          << std::setw(10) << cell(r.price, 4) << std::setw(9) << cell(r.stddev, 4)
          << std::setw(8) << cell(r.lambda, 4) << std::setw(10) << cell(r.dual_price, 4)
          << std::setw(9) << cell(r.dual_stddev, 4) << '\n';
    }
  }
}

/// Differences between the martingale-driven random time and the LS1
/// stopping time on evaluation set 3 of run 0.
inline PolicyHistogram run_histogram(const ExperimentConfig& config,
                                     const DualMartingale* preloaded = nullptr) {
  config.validate();
  const DualMartingale dm = preloaded != nullptr ? *preloaded : fit_martingale(config, 0);
  const auto fit_paths = simulate_paths(config.model, config.q2, config.seed(SampleSet::Policy, 0));
  const auto z2 = discounted_payoffs(fit_paths, config.payoff);
  const auto policy = fit_policy(z2, nullptr, fit_paths, policy_basis(config), PolicyVariant::LS1,
                                 {config.itm_only, {}});
  const auto eval_paths =
      simulate_paths(config.model, config.q3, config.seed(SampleSet::Evaluation, 0));
  const auto z3 = discounted_payoffs(eval_paths, config.payoff);
  const auto m3 = evaluate_martingale(dm, eval_paths);
  const auto proxy = proxy_policy(z3, m3);
  return policy_histogram(proxy.tau0, apply_policy(policy, z3, nullptr, eval_paths));
}

struct SuiteItem {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct OracleSuiteReport {
  std::vector<SuiteItem> items;

  bool all_passed() const {
    return std::all_of(items.begin(), items.end(), [](const auto& i) { return i.passed; });
  }
  /// One `PASS|FAIL name detail` line per item.
  void write(std::ostream& out) const {
    for (const auto& i : items) {
      out << (i.passed ? "PASS " : "FAIL ") << i.name;
      if (!i.detail.empty()) out << "  " << i.detail;
      out << '\n';
    }
  }
};

/// Tree whose up probability is exactly 1/2, so plain sample averages over
/// the enumerated paths are exact expectations.
inline oracle::TreeModel symmetric_tree(double s0, double rate, double sigma, double maturity,
                                        std::size_t steps) {
  const double dt = maturity / static_cast<double>(steps);
  const double up = std::exp(sigma * std::sqrt(dt));
  const double growth = std::exp(rate * dt);
  return {steps, up, 2.0 * growth - up, 0.5, s0, growth, dt};
}

namespace detail {

inline std::string format_error(double e) {
  std::ostringstream os;
  os << "max_error=" << std::setprecision(3) << e;
  return os.str();
}

/// Martingale on the enumerated paths with node-dependent random
/// coefficients times the mean-zero one-step move.
inline MartingaleMatrix random_tree_martingale(const oracle::TreeModel& tree,
                                               const std::vector<oracle::TreePath>& all,
                                               std::uint64_t seed, double scale) {
  MartingaleMatrix m(all.size(), tree.steps + 1);
  rng::PathStream stream(seed, 0);
  std::vector<double> coefficient(tree.node_count());
  for (auto& c : coefficient) c = scale * stream.normal();
  for (std::size_t idx = 0; idx < all.size(); ++idx) {
    for (std::size_t n = 0; n < tree.steps; ++n) {
      const bool up = all[idx].ups[n + 1] > all[idx].ups[n];
      const double move = up ? 1.0 - tree.prob_up : -tree.prob_up;
      m(idx, n + 1) =
          m(idx, n) + coefficient[oracle::TreeModel::node_index(n, all[idx].ups[n])] * move;
    }
  }
  return m;
}

}  // namespace detail

/// Exact-world checks on small trees: Snell/Doob identities, the pathwise
/// identities of the martingale-driven random time, zero-variance control
/// variate and dual estimators under the Doob martingale, and recovery of the
/// Doob martingale and optimal policy by the least-squares fits.
inline OracleSuiteReport run_oracle_suite() {
  OracleSuiteReport report;
  constexpr double kTol = 1e-10;
  auto add = [&](std::string name, bool passed, std::string detail = {}) {
    report.items.push_back({std::move(name), passed, std::move(detail)});
  };

  for (std::size_t steps : {3, 5}) {
    const std::string tag = "put_N" + std::to_string(steps);
    const auto tree = symmetric_tree(100.0, 0.06, 0.4, 0.5, steps);
    const auto payoff = PayoffSpec::put(100.0);
    const auto sol = oracle::solve_tree(tree, payoff);
    for (const auto& c : oracle::exact_identity_checks(tree, sol, kTol).checks) {
      add(tag + "/" + c.name, c.passed, detail::format_error(c.max_error));
    }

    const auto all = oracle::enumerate_paths(tree);
    const auto exact = oracle::tree_matrices(sol, all);

    // Dual and CV estimators with the Doob martingale have zero variance.
    const auto dual = dual_price(exact.z, exact.m);
    add(tag + "/dual_zero_variance",
        std::abs(dual.mean - sol.u0()) <= kTol && dual.std_error.value_or(1.0) <= kTol,
        detail::format_error(std::abs(dual.mean - sol.u0())));
    const auto cv = cv_price(exact.z, exact.m, exact.tau_star);
    add(tag + "/cv_zero_variance",
        std::abs(cv.mean - sol.u0()) <= kTol && cv.std_error.value_or(1.0) <= kTol &&
            std::abs(cv.lambda.value_or(0.0) - 1.0) <= kTol,
        detail::format_error(std::abs(cv.mean - sol.u0())));

    // The random time with M* is the optimal stopping time.
    const auto proxy_exact = proxy_policy(exact.z, exact.m);
    add(tag + "/proxy_with_doob_is_optimal", proxy_exact.tau0.tau == exact.tau_star.tau);

    // Pathwise identities for an arbitrary martingale; the dual bound is
    // strictly above U_0 once M* is corrupted.
    for (std::uint64_t seed : {11u, 12u, 13u}) {
      auto noise = detail::random_tree_martingale(tree, all, seed, 5.0);
      MartingaleMatrix corrupted(all.size(), steps + 1);
      for (std::size_t i = 0; i < all.size(); ++i) {
        for (std::size_t n = 0; n <= steps; ++n) corrupted(i, n) = exact.m(i, n) + noise(i, n);
      }
      for (const auto* m : {&noise, &corrupted}) {
        const auto proxy = proxy_policy(exact.z, *m);
        double worst = 0.0;
        bool same_tau = true;
        for (std::size_t i = 0; i < all.size(); ++i) {
          const auto u = proxy_envelope(exact.z.row(i), m->row(i));
          double running = -INFINITY;
          std::vector<double> suffix_max(steps + 1);
          for (std::size_t n = steps + 1; n-- > 0;) {
            running = std::max(running, exact.z(i, n) - (*m)(i, n));
            suffix_max[n] = running;
          }
          for (std::size_t n = 0; n <= steps; ++n) {
            worst = std::max(worst, std::abs(u[n] - (*m)(i, n) - suffix_max[n]));
          }
          const std::size_t t = proxy.tau0[i];
          worst = std::max(worst, std::abs(exact.z(i, t) - (*m)(i, t) - suffix_max[0]));
          worst = std::max(worst, std::abs(proxy.u0hat[i] - u[0]));
          std::size_t first = steps;
          for (std::size_t n = 0; n <= steps; ++n) {
            if (std::abs(u[n] - exact.z(i, n)) <= kTol) {
              first = n;
              break;
            }
          }
          same_tau = same_tau && first == t;
        }
        const std::string which = m == &noise ? "random" : "corrupted_doob";
        add(tag + "/proxy_identities_" + which + "_seed" + std::to_string(seed),
            worst <= kTol && same_tau, detail::format_error(worst));
      }
      double expected_max = 0.0;
      for (std::size_t i = 0; i < all.size(); ++i) {
        double best = -INFINITY;
        for (std::size_t n = 0; n <= steps; ++n) best = std::max(best, exact.z(i, n) - corrupted(i, n));
        expected_max += all[i].probability * best;
      }
      std::ostringstream os;
      os << std::setprecision(10) << "dual=" << expected_max << " U0=" << sol.u0();
      add(tag + "/corrupted_doob_dual_exceeds_u0_seed" + std::to_string(seed),
          expected_max > sol.u0() + kTol, os.str());
    }

    // Least squares on exact expectations recovers M* and the optimal policy.
    const auto batch = oracle::enumerated_batch(tree, all);
    const auto z = discounted_payoffs(batch.paths, payoff);
    const auto dm = fit_dual_coefficients(batch.paths, z, oracle::node_indicator_basis(tree, steps),
                                          batch.weights);
    const auto m_fit = evaluate_martingale(dm, batch.paths);
    double m_error = 0.0;
    for (std::size_t i = 0; i < all.size(); ++i) {
      for (std::size_t n = 0; n <= steps; ++n) {
        m_error = std::max(m_error, std::abs(m_fit(i, n) - exact.m(i, n)));
      }
    }
    add(tag + "/dual_fit_recovers_doob_martingale", m_error <= 1e-8,
        detail::format_error(m_error));

    for (auto variant : {PolicyVariant::LS1, PolicyVariant::LS2}) {
      const auto reg = fit_policy(z, &m_fit, batch.paths, oracle::node_indicator_policy_basis(tree),
                                  variant, {false, batch.weights});
      const auto tau = apply_policy(reg, z, &m_fit, batch.paths);
      double value = 0.0;
      bool decisions_match = true;
      for (std::size_t i = 0; i < all.size(); ++i) {
        value += all[i].probability * z(i, tau[i]);
        // Node-by-node agreement wherever stopping pays something.
        for (std::size_t n = 0; n < steps; ++n) {
          const auto& node = sol.node(n, all[i].ups[n]);
          if (node.z > 0.0 && n <= tau[i]) {
            decisions_match = decisions_match && (node.exercise == (tau[i] == n));
          }
        }
      }
      add(tag + "/policy_fit_" + std::string(to_string(variant)) + "_matches_dp",
          decisions_match && std::abs(value - sol.u0()) <= kTol,
          detail::format_error(std::abs(value - sol.u0())));
    }
  }

  // Zero payoff: every identity degenerates to 0 = 0.
  {
    const auto tree = symmetric_tree(100.0, 0.06, 0.4, 0.5, 3);
    const auto sol = oracle::solve_tree(tree, PayoffSpec::put(1e-6));
    const auto checks = oracle::exact_identity_checks(tree, sol, kTol);
    add("zero_payoff/identities", checks.all_passed() && sol.u0() == 0.0);
  }
  return report;
}

}  // namespace bermudan::harness
