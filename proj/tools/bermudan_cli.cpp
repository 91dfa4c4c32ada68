// Command-line driver: price experiments, reproduce tables, dump the policy
// histogram, fit and save martingales, and run the exact oracle suite.

#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bermudan/bermudan.hpp"

namespace {

using namespace bermudan;

struct CommonOptions {
  std::vector<std::string> overrides;
  std::string martingale_file;
  std::string output;
  std::optional<std::size_t> runs;
  bool refresh_q1 = false;
  bool no_timing = false;
};

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--set", opts.overrides, "Override a config entry, section.key=value");
  cmd->add_option("--martingale-file", opts.martingale_file,
                  "Use a saved martingale instead of fitting on set 1");
  cmd->add_option("--output,-o", opts.output, "Write CSV here instead of stdout");
  cmd->add_option("--runs", opts.runs, "Number of independent runs");
  cmd->add_flag("--refresh-q1", opts.refresh_q1, "Refit the martingale every run");
  cmd->add_flag("--no-timing", opts.no_timing, "Write 0 in the seconds column");
}

harness::ExperimentConfig load(const std::string& path, const CommonOptions& opts) {
  auto overrides = opts.overrides;
  if (opts.runs) overrides.push_back("algorithm.runs=" + std::to_string(*opts.runs));
  if (opts.refresh_q1) overrides.push_back("algorithm.refresh_q1=true");
  return harness::load_config(path, overrides);
}

std::optional<DualMartingale> preloaded(const CommonOptions& opts) {
  if (opts.martingale_file.empty()) return std::nullopt;
  return load_martingale(opts.martingale_file);
}

template <class Write>
void emit(const std::string& output, Write write) {
  if (output.empty()) {
    write(std::cout);
    return;
  }
  std::ofstream out(output);
  if (!out) throw ValidationError("cannot write '" + output + "'");
  write(out);
}

int run_tables(const std::vector<std::string>& configs, const CommonOptions& opts) {
  const auto dm = preloaded(opts);
  std::vector<harness::ExperimentResult> results;
  for (const auto& path : configs) {
    const auto config = load(path, opts);
    std::cerr << "running " << config.id << " (" << config.runs << " run"
              << (config.runs == 1 ? "" : "s") << ")\n";
    results.push_back(
        harness::run_experiment(config, dm ? &*dm : nullptr, {!opts.no_timing, 3.0}));
  }
  emit(opts.output, [&](std::ostream& out) {
    bool header = true;
    for (const auto& r : results) {
      harness::write_results_csv(out, r.rows, header);
      header = false;
    }
  });
  harness::write_table_layout(opts.output.empty() ? std::cerr : std::cout, results);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bermudan option pricing with dual martingales and control variates"};
  app.require_subcommand(1);
  std::size_t threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = hardware concurrency)");

  CommonOptions price_opts;
  std::string price_config;
  auto* price = app.add_subcommand("price", "Run one experiment config");
  price->add_option("config", price_config, "Experiment config (.ini)")->required();
  add_common(price, price_opts);

  CommonOptions table_opts;
  std::vector<std::string> table_configs;
  auto* table = app.add_subcommand("table", "Run several configs into one results table");
  table->add_option("configs", table_configs, "Experiment configs (.ini)")->required();
  add_common(table, table_opts);

  CommonOptions hist_opts;
  std::string hist_config;
  auto* hist = app.add_subcommand(
      "histogram", "Stopping-time differences of the martingale-driven rule against LS1");
  hist->add_option("config", hist_config, "Experiment config (.ini)")->required();
  add_common(hist, hist_opts);

  CommonOptions fit_opts;
  std::string fit_config;
  auto* fit = app.add_subcommand("fit-martingale", "Fit the dual martingale on set 1 and save it");
  fit->add_option("config", fit_config, "Experiment config (.ini)")->required();
  fit->add_option("--set", fit_opts.overrides, "Override a config entry, section.key=value");
  fit->add_option("--output,-o", fit_opts.output, "Martingale file")->required();

  auto* oracle_cmd = app.add_subcommand("oracle", "Exact binomial-tree oracle suite");

  CLI11_PARSE(app, argc, argv);
  set_thread_count(threads);

  try {
    if (*price) return run_tables({price_config}, price_opts);
    if (*table) return run_tables(table_configs, table_opts);
    if (*hist) {
      const auto config = load(hist_config, hist_opts);
      const auto dm = preloaded(hist_opts);
      const auto h = harness::run_histogram(config, dm ? &*dm : nullptr);
      emit(hist_opts.output, [&](std::ostream& out) { h.write_csv(out); });
      return 0;
    }
    if (*fit) {
      const auto config = load(fit_config, fit_opts);
      save_martingale(harness::fit_martingale(config), fit_opts.output);
      return 0;
    }
    if (*oracle_cmd) {
      const auto report = harness::run_oracle_suite();
      report.write(std::cout);
      return report.all_passed() ? 0 : 1;
    }
  } catch (const WeakDualityViolation& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
