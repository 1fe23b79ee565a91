#pragma once

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "dfdr/analysis.hpp"
#include "dfdr/io.hpp"
#include "dfdr/oracle.hpp"
#include "dfdr/procedures.hpp"
#include "dfdr/simulation.hpp"

namespace dfdr {

namespace cli_detail {

inline std::vector<Method> parse_method_list(const std::string& csv) {
  std::vector<Method> methods;
  try {
    for (const auto& name : io_detail::split(csv, ','))
      if (!name.empty()) methods.push_back(parse_method(name));
  } catch (const std::domain_error& e) {
    throw std::invalid_argument(e.what());
  }
  if (methods.empty()) throw std::invalid_argument("no methods requested");
  return methods;
}

inline Sidedness parse_sidedness(const std::string& s) {
  const auto low = io_detail::lower(s);
  if (low == "one" || low == "one-sided") return Sidedness::one;
  if (low == "two" || low == "two-sided") return Sidedness::two;
  throw std::invalid_argument("--sided must be 'one' or 'two'");
}

/// Runs `body` with the chosen output stream: a file when path is set,
/// stdout otherwise. Returns whether a file was used.
template <typename Fn>
bool with_output(const std::string& path, Fn&& body) {
  if (path.empty()) {
    body(std::cout);
    return false;
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open output file: " + path);
  body(out);
  return true;
}

inline void warn_dbh(const std::vector<Method>& methods) {
  for (const Method m : methods)
    if (m == Method::dbh) {
      std::cerr << "note: DBH (Heyse) does not guarantee FDR control; "
                   "the other methods here do under their stated assumptions\n";
      return;
    }
}

inline void print_warnings(const std::vector<std::string>& warnings) {
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
}

struct AnalyzeArgs {
  std::string input, out, dists_out, pvalues_out;
  std::string methods = "by,dby,sarkar,dsarkar,bh,dbh";
  std::string sided = "one";
  double alpha = 0.05;
  bool full_precision = false;
};

inline int cmd_analyze(const AnalyzeArgs& args) {
  std::ifstream in(args.input);
  if (!in) throw std::runtime_error("cannot open input file: " + args.input);
  std::vector<CountRecord> records;
  try {
    records = read_count_csv(in);
  } catch (const std::exception& e) {
    throw std::runtime_error(args.input + ": " + e.what());
  }
  const auto methods = parse_method_list(args.methods);
  warn_dbh(methods);
  const auto analysis =
      build_count_analysis(records, parse_sidedness(args.sided));
  const auto adjusted = compute_adjusted(analysis.pvalues, methods, &analysis.g);
  const auto counts = rejection_counts(adjusted, args.alpha);

  const bool to_file = with_output(args.out, [&](std::ostream& os) {
    write_outcome_csv(os, analysis.ids, analysis.pvalues, methods, adjusted,
                      args.alpha, args.full_precision);
  });
  if (!args.dists_out.empty()) {
    std::ofstream dout(args.dists_out);
    if (!dout) throw std::runtime_error("cannot open: " + args.dists_out);
    std::vector<DistRecord> recs;
    recs.reserve(analysis.ids.size());
    for (std::size_t i = 0; i < analysis.ids.size(); ++i)
      recs.push_back({analysis.ids[i], analysis.dists[i], true});
    write_distribution_stream(dout, recs);
  }
  if (!args.pvalues_out.empty()) {
    std::ofstream pout(args.pvalues_out);
    if (!pout) throw std::runtime_error("cannot open: " + args.pvalues_out);
    pout << "id,pvalue\n";
    for (std::size_t i = 0; i < analysis.ids.size(); ++i)
      pout << analysis.ids[i] << ","
           << io_detail::format_full(analysis.pvalues[i]) << "\n";
  }

  std::ostream& summary = to_file ? std::cout : std::cerr;
  summary << "n=" << analysis.ids.size() << " events=" << analysis.total_events
          << " rejections at alpha=" << args.alpha << ":";
  for (std::size_t mi = 0; mi < methods.size(); ++mi)
    summary << " " << method_label(methods[mi]) << "=" << counts[mi];
  summary << "\n";
  return 0;
}

struct AdjustArgs {
  std::string pvalues, dists, out;
  std::string methods;
  double alpha = 0.05;
  bool full_precision = false;
};

inline int cmd_adjust(const AdjustArgs& args) {
  std::ifstream in(args.pvalues);
  if (!in) throw std::runtime_error("cannot open p-value file: " + args.pvalues);
  std::vector<PValueRecord> records;
  try {
    records = read_pvalue_csv(in);
  } catch (const std::exception& e) {
    throw std::runtime_error(args.pvalues + ": " + e.what());
  }
  std::vector<double> pvalues;
  std::vector<std::string> ids;
  for (const auto& r : records) {
    ids.push_back(r.id);
    pvalues.push_back(r.pvalue);
  }

  std::optional<StepFunction> g;
  if (!args.dists.empty()) {
    std::vector<std::string> warnings;
    const auto dist_records = read_distribution_file(args.dists, &warnings);
    print_warnings(warnings);
    if (dist_records.size() != pvalues.size())
      throw std::invalid_argument(
          "distribution file has " + std::to_string(dist_records.size()) +
          " records for " + std::to_string(pvalues.size()) + " p-values");
    std::vector<DiscretePValueDist> dists;
    dists.reserve(dist_records.size());
    for (const auto& r : dist_records) dists.push_back(r.dist);
    g = aggregate(dists);
  }
  const std::string default_methods =
      g.has_value() ? "by,dby,sarkar,dsarkar,bh,dbh" : "by,sarkar,bh";
  const auto methods =
      parse_method_list(args.methods.empty() ? default_methods : args.methods);
  warn_dbh(methods);
  const auto adjusted =
      compute_adjusted(pvalues, methods, g.has_value() ? &*g : nullptr);
  const auto counts = rejection_counts(adjusted, args.alpha);

  const bool to_file = with_output(args.out, [&](std::ostream& os) {
    write_outcome_csv(os, ids, pvalues, methods, adjusted, args.alpha,
                      args.full_precision);
  });
  std::ostream& summary = to_file ? std::cout : std::cerr;
  summary << "n=" << ids.size() << " rejections at alpha=" << args.alpha << ":";
  for (std::size_t mi = 0; mi < methods.size(); ++mi)
    summary << " " << method_label(methods[mi]) << "=" << counts[mi];
  summary << "\n";
  return 0;
}

struct SimulateArgs {
  std::string config, out;
  int trials = 0;           // 0 = take from file
  long long seed = -1;      // <0 = take from file
  unsigned threads = 1;
  std::string metric = "power";
};

inline int cmd_simulate(const SimulateArgs& args) {
  SimFileConfig file = read_sim_config_file(args.config);
  for (auto& cfg : file.grid) {
    if (args.trials > 0) cfg.trials = args.trials;
    if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
  }
  const SimMetric metric = io_detail::lower(args.metric) == "fdr"
                               ? SimMetric::fdr
                               : SimMetric::power;
  warn_dbh(file.methods);
  const auto results =
      run_suite(file.grid, file.methods, args.threads,
                file.plugin.has_value() ? &*file.plugin : nullptr);
  with_output(args.out, [&](std::ostream& os) {
    write_sim_results_csv(os, results, metric);
  });
  return 0;
}

struct OracleArgs {
  std::string dists, method = "dbh", trace;
  double alpha = 0.05;
  std::uint64_t cap = std::uint64_t{1} << 24;
  long long mc_trials = 0;
  long long mc_seed = 1;
};

inline int cmd_oracle(const OracleArgs& args) {
  std::vector<std::string> warnings;
  const auto records = read_distribution_file(args.dists, &warnings);
  print_warnings(warnings);
  const auto dists = to_point_masses(records);
  const StepFunction g = aggregate(dists);
  const Method method = parse_method(args.method);
  const auto procedure = make_method_procedure(method, dists, args.alpha, g);

  char buf[160];
  if (args.mc_trials > 0) {
    const auto mc = monte_carlo_error_rates(
        dists, procedure, static_cast<std::size_t>(args.mc_trials),
        static_cast<std::uint64_t>(args.mc_seed));
    std::snprintf(buf, sizeof buf, "FDR  = %.8f (se %.2e, %zu trials)\nFWER = %.8f\n",
                  mc.fdr, mc.fdr_std_error, mc.trials, mc.fwer);
    std::cout << buf;
    return 0;
  }
  EnumerationOptions options;
  options.cap = args.cap;
  options.with_trace = !args.trace.empty();
  const auto rates = exact_error_rates(dists, procedure, options);
  std::snprintf(buf, sizeof buf,
                "FDR  = %.8f\nFWER = %.8f\noutcomes = %llu, enumerated mass = %.12f\n",
                rates.fdr, rates.fwer,
                static_cast<unsigned long long>(rates.outcomes),
                rates.total_mass);
  std::cout << buf;
  if (!args.trace.empty()) {
    std::ofstream tout(args.trace);
    if (!tout) throw std::runtime_error("cannot open: " + args.trace);
    write_trace_csv(tout, rates, dists.size());
  }
  return 0;
}

struct GfunArgs {
  std::string input, dists, out;
  std::string sided = "one";
  double lo = 0.0, hi = 1.0;
  std::size_t points = 512;
};

inline int cmd_gfun(const GfunArgs& args) {
  if (args.input.empty() == args.dists.empty())
    throw std::invalid_argument("gfun needs exactly one of --input / --dists");
  StepFunction g;
  if (!args.input.empty()) {
    std::ifstream in(args.input);
    if (!in) throw std::runtime_error("cannot open input file: " + args.input);
    std::vector<CountRecord> records;
    try {
      records = read_count_csv(in);
    } catch (const std::exception& e) {
      throw std::runtime_error(args.input + ": " + e.what());
    }
    g = build_count_analysis(records, parse_sidedness(args.sided)).g;
  } else {
    std::vector<std::string> warnings;
    const auto records = read_distribution_file(args.dists, &warnings);
    print_warnings(warnings);
    std::vector<DiscretePValueDist> dists;
    dists.reserve(records.size());
    for (const auto& r : records) dists.push_back(r.dist);
    g = aggregate(dists);
  }
  const auto rows = ratio_grid(g, args.lo, args.hi, args.points);
  const bool to_file = with_output(args.out, [&](std::ostream& os) {
    write_grid_csv(os, rows);
  });
  std::ostream& summary = to_file ? std::cout : std::cerr;
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", mean_ratio(rows));
  summary << "n=" << g.n << " mean G/Gunif on (" << args.lo << ", " << args.hi
          << "] = " << buf << "\n";
  return 0;
}

}  // namespace cli_detail

/// Command-line front end; returns the process exit code.
inline int run_cli(int argc, const char* const* argv) {
  CLI::App app{
      "Discrete false-discovery-rate step-up procedures for tests with known "
      "null p-value distributions"};
  app.require_subcommand(1);

  cli_detail::AnalyzeArgs analyze_args;
  auto* analyze = app.add_subcommand(
      "analyze", "Exact tests and FDR adjustment for a count table");
  analyze->add_option("--input", analyze_args.input, "CSV: id,event_count,total_count")
      ->required();
  analyze->add_option("--alpha", analyze_args.alpha, "nominal FDR level");
  analyze->add_option("--methods", analyze_args.methods, "comma-separated methods");
  analyze->add_option("--sided", analyze_args.sided, "one|two");
  analyze->add_option("--out", analyze_args.out, "report CSV path (default stdout)");
  analyze->add_option("--dists-out", analyze_args.dists_out,
                      "export per-hypothesis null distributions");
  analyze->add_option("--pvalues-out", analyze_args.pvalues_out,
                      "export p-values at full precision");
  analyze->add_flag("--full-precision", analyze_args.full_precision,
                    "print 17 significant digits instead of 4 decimals");

  cli_detail::AdjustArgs adjust_args;
  auto* adjust = app.add_subcommand(
      "adjust", "Adjust precomputed p-values, optionally with distributions");
  adjust->add_option("--pvalues", adjust_args.pvalues, "CSV: id,pvalue")->required();
  adjust->add_option("--dists", adjust_args.dists,
                     "distribution file (required for discrete methods)");
  adjust->add_option("--methods", adjust_args.methods, "comma-separated methods");
  adjust->add_option("--alpha", adjust_args.alpha, "nominal FDR level");
  adjust->add_option("--out", adjust_args.out, "report CSV path (default stdout)");
  adjust->add_flag("--full-precision", adjust_args.full_precision,
                   "print 17 significant digits instead of 4 decimals");

  cli_detail::SimulateArgs simulate_args;
  auto* simulate = app.add_subcommand("simulate", "Run a power-study grid");
  simulate->add_option("--config", simulate_args.config, "simulation config file")
      ->required();
  simulate->add_option("--out", simulate_args.out, "results CSV path (default stdout)");
  simulate->add_option("--trials", simulate_args.trials, "override trial count");
  simulate->add_option("--seed", simulate_args.seed, "override master seed");
  simulate->add_option("--threads", simulate_args.threads, "worker threads");
  simulate->add_option("--metric", simulate_args.metric, "power|fdr");

  cli_detail::OracleArgs oracle_args;
  auto* oracle = app.add_subcommand(
      "oracle", "Exact FDR/FWER by enumeration of a distribution file");
  oracle->add_option("--dists", oracle_args.dists, "distribution file")->required();
  oracle->add_option("--method", oracle_args.method, "procedure to evaluate");
  oracle->add_option("--alpha", oracle_args.alpha, "nominal level");
  oracle->add_option("--trace", oracle_args.trace, "write the per-outcome trace CSV");
  oracle->add_option("--cap", oracle_args.cap, "enumeration cap (outcome count)");
  oracle->add_option("--mc-trials", oracle_args.mc_trials,
                     "Monte Carlo trials instead of exact enumeration");
  oracle->add_option("--seed", oracle_args.mc_seed, "Monte Carlo seed");

  cli_detail::GfunArgs gfun_args;
  auto* gfun = app.add_subcommand(
      "gfun", "Export the aggregated step function G against n*x");
  gfun->add_option("--input", gfun_args.input, "counts CSV to build G from");
  gfun->add_option("--dists", gfun_args.dists, "distribution file to build G from");
  gfun->add_option("--sided", gfun_args.sided, "one|two (with --input)");
  gfun->add_option("--lo", gfun_args.lo, "grid lower end");
  gfun->add_option("--hi", gfun_args.hi, "grid upper end");
  gfun->add_option("--points", gfun_args.points, "grid size");
  gfun->add_option("--out", gfun_args.out, "grid CSV path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*analyze) return cli_detail::cmd_analyze(analyze_args);
    if (*adjust) return cli_detail::cmd_adjust(adjust_args);
    if (*simulate) return cli_detail::cmd_simulate(simulate_args);
    if (*oracle) return cli_detail::cmd_oracle(oracle_args);
    if (*gfun) return cli_detail::cmd_gfun(gfun_args);
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace dfdr
