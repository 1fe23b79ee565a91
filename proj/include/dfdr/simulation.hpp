#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "dfdr/fisher.hpp"
#include "dfdr/procedures.hpp"
#include "dfdr/step_function.hpp"

namespace dfdr {

/// One cell of the two-sample binary power study. Positions split into m1
/// sparse true nulls (both groups Bernoulli(sparse_prob)), m2 dense true
/// nulls (both groups Bernoulli(dense_prob)) and m3 alternatives (group 1
/// dense_prob, group 2 effect_prob).
struct SimConfig {
  int group_size = 25;        // N per group
  int positions = 800;        // m
  int false_nulls = 80;       // m3
  int sparse_true_nulls = 144;  // m1
  double effect_prob = 0.4;   // q3
  int trials = 500;
  std::uint64_t seed = 1;
  double alpha = 0.05;
  double sparse_prob = 0.01;
  double dense_prob = 0.10;

  int dense_true_nulls() const {
    return positions - sparse_true_nulls - false_nulls;
  }
};

inline void validate_config(const SimConfig& cfg) {
  if (cfg.group_size < 1) throw std::domain_error("sim: group size >= 1");
  if (cfg.positions < 1) throw std::domain_error("sim: positions >= 1");
  if (cfg.false_nulls < 0 || cfg.sparse_true_nulls < 0 ||
      cfg.dense_true_nulls() < 0)
    throw std::domain_error("sim: position counts must be non-negative and sum to m");
  if (cfg.trials < 1) throw std::domain_error("sim: trials >= 1");
  if (!(cfg.alpha > 0.0) || !(cfg.alpha < 1.0))
    throw std::domain_error("sim: alpha in (0, 1)");
  for (const double p : {cfg.effect_prob, cfg.sparse_prob, cfg.dense_prob})
    if (!(p > 0.0) || !(p < 1.0))
      throw std::domain_error("sim: success probabilities in (0, 1)");
}

/// Externally supplied fixed critical constants (e.g. a step-down sequence
/// published elsewhere); reported as an extra column.
struct PluginProcedure {
  std::string label = "plugin";
  std::vector<double> critical;
  bool use_step_down = true;
};

struct MethodStats {
  double power = 0.0;
  double power_se = 0.0;
  double fdr = 0.0;
  double fdr_se = 0.0;
};

struct SimResult {
  SimConfig config;
  std::vector<Method> methods;
  std::vector<MethodStats> stats;  // parallel to methods
  bool has_plugin = false;
  std::string plugin_label;
  MethodStats plugin_stats;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

/// Trial t of configuration c draws from a generator seeded with
/// splitmix64(splitmix64(master ^ splitmix64(c)) ^ t).
inline std::uint64_t trial_seed(std::uint64_t master, std::uint64_t config_index,
                                std::uint64_t trial) {
  return splitmix64(splitmix64(master ^ splitmix64(config_index)) ^ trial);
}

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// CDF of Binomial(n, p) over 0..n for inverse sampling.
inline std::vector<double> binomial_cdf(int n, double p) {
  std::vector<double> cdf(static_cast<std::size_t>(n) + 1);
  double pmf = std::pow(1.0 - p, n);
  double run = pmf;
  cdf[0] = run;
  const double odds = p / (1.0 - p);
  for (int k = 0; k < n; ++k) {
    pmf *= odds * static_cast<double>(n - k) / static_cast<double>(k + 1);
    run += pmf;
    cdf[static_cast<std::size_t>(k) + 1] = run;
  }
  cdf.back() = 1.0;
  return cdf;
}

inline int sample_binomial(const std::vector<double>& cdf, double u) {
  const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
  return static_cast<int>(std::min<std::ptrdiff_t>(it - cdf.begin(),
                                                   cdf.size() - 1));
}

/// Everything about one margin class (N, N, s): positions sharing the column
/// total s share the conditional null distribution of their p-value. Atom
/// positions index into the merged jump grid of the whole config.
struct MarginClass {
  long long lo = 0;
  std::vector<double> pvalue_by_x;          // two-sided p at x - lo
  std::vector<std::pair<std::size_t, double>> atoms;  // (grid index, mass)
};

struct TrialWorkspace {
  std::vector<int> class_count;
  std::vector<double> pvalues;
  std::vector<double> grid_mass;
  std::vector<double> grid_values;
  std::vector<std::size_t> order;
  std::vector<double> sorted_pv;
  std::vector<double> sorted_gpv;
  std::vector<int> alt_prefix;  // alternatives among the r smallest p-values
};

/// Per-configuration tables shared by all trials.
struct ConfigTables {
  std::vector<MarginClass> classes;  // by column total s = 0 .. 2N
  std::vector<double> grid;          // merged attainable p-values, ascending
  std::vector<double> cdf_sparse, cdf_dense, cdf_effect;
  // Step-up comparisons per method, precomputed at the config's alpha.
  std::vector<std::vector<double>> continuous_c;  // per continuous method
  std::vector<std::vector<double>> discrete_y;    // per discrete shape method
};

inline ConfigTables build_tables(const SimConfig& cfg,
                                 const std::vector<Method>& methods) {
  ConfigTables t;
  const int n = cfg.group_size;
  const auto m = static_cast<std::size_t>(cfg.positions);
  t.classes.resize(static_cast<std::size_t>(2 * n) + 1);
  std::vector<DiscretePValueDist> dists(t.classes.size());
  for (int s = 0; s <= 2 * n; ++s) {
    auto& cls = t.classes[static_cast<std::size_t>(s)];
    cls.lo = std::max(0, s - n);
    cls.pvalue_by_x = two_sided_pvalues(n, n, s);
    dists[static_cast<std::size_t>(s)] = pvalue_support(n, n, s, Sidedness::two);
  }
  for (const auto& d : dists)
    t.grid.insert(t.grid.end(), d.support.begin(), d.support.end());
  std::sort(t.grid.begin(), t.grid.end());
  t.grid.erase(std::unique(t.grid.begin(), t.grid.end()), t.grid.end());
  for (std::size_t s = 0; s < t.classes.size(); ++s) {
    const auto& d = dists[s];
    auto& cls = t.classes[s];
    cls.atoms.reserve(d.size());
    for (std::size_t k = 0; k < d.size(); ++k) {
      const auto it =
          std::lower_bound(t.grid.begin(), t.grid.end(), d.support[k]);
      cls.atoms.emplace_back(static_cast<std::size_t>(it - t.grid.begin()),
                             d.mass(k));
    }
  }
  t.cdf_sparse = binomial_cdf(n, cfg.sparse_prob);
  t.cdf_dense = binomial_cdf(n, cfg.dense_prob);
  t.cdf_effect = binomial_cdf(n, cfg.effect_prob);
  t.continuous_c.resize(methods.size());
  t.discrete_y.resize(methods.size());
  for (std::size_t i = 0; i < methods.size(); ++i) {
    switch (methods[i]) {
      case Method::bh: t.continuous_c[i] = bh_constants(m, cfg.alpha); break;
      case Method::by: t.continuous_c[i] = by_constants(m, cfg.alpha); break;
      case Method::sarkar:
        t.continuous_c[i] = sarkar_constants(m, cfg.alpha);
        break;
      case Method::dby:
        t.discrete_y[i] = ProcedureSpec::by_shape(m, cfg.alpha).targets();
        break;
      case Method::dsarkar:
        t.discrete_y[i] = ProcedureSpec::sarkar_shape(m, cfg.alpha).targets();
        break;
      case Method::dbh:
        break;  // Heyse thresholds are computed in the scan
    }
  }
  return t;
}

struct TrialStats {
  double power_frac;
  double fdp;
};

/// One Monte Carlo trial: draw the per-position counts, build the trial's G
/// from the observed margins, and apply every method.
inline void run_trial(const SimConfig& cfg, const ConfigTables& t,
                      const std::vector<Method>& methods,
                      const PluginProcedure* plugin, std::uint64_t seed,
                      TrialWorkspace& ws, TrialStats* out,
                      TrialStats* plugin_out) {
  const auto m = static_cast<std::size_t>(cfg.positions);
  const int m1 = cfg.sparse_true_nulls;
  const int m2 = cfg.dense_true_nulls();
  const int m3 = cfg.false_nulls;
  const bool alt_is_null = cfg.effect_prob == cfg.dense_prob;

  std::mt19937_64 rng(seed);
  ws.class_count.assign(t.classes.size(), 0);
  ws.pvalues.resize(m);
  for (std::size_t i = 0; i < m; ++i) {
    const bool sparse = i < static_cast<std::size_t>(m1);
    const bool alt = i >= static_cast<std::size_t>(m1 + m2);
    const auto& cdf1 = sparse ? t.cdf_sparse : t.cdf_dense;
    const auto& cdf2 = sparse ? t.cdf_sparse : (alt ? t.cdf_effect : t.cdf_dense);
    const int x1 = sample_binomial(cdf1, uniform01(rng));
    const int x2 = sample_binomial(cdf2, uniform01(rng));
    const auto s = static_cast<std::size_t>(x1 + x2);
    ++ws.class_count[s];
    const auto& cls = t.classes[s];
    ws.pvalues[i] = cls.pvalue_by_x[static_cast<std::size_t>(x1 - cls.lo)];
  }

  // G over the merged grid, weighted by how many positions landed in each
  // margin class. Compensated prefix sum; G(1) is pinned to exactly m.
  ws.grid_mass.assign(t.grid.size(), 0.0);
  for (std::size_t s = 0; s < t.classes.size(); ++s) {
    const int count = ws.class_count[s];
    if (count == 0) continue;
    const auto w = static_cast<double>(count);
    for (const auto& [idx, mass] : t.classes[s].atoms)
      ws.grid_mass[idx] += w * mass;
  }
  ws.grid_values.resize(t.grid.size());
  CompensatedSum run;
  for (std::size_t i = 0; i < t.grid.size(); ++i) {
    run.add(ws.grid_mass[i]);
    ws.grid_values[i] = run.value();
  }
  ws.grid_values.back() = static_cast<double>(m);

  ws.order.resize(m);
  std::iota(ws.order.begin(), ws.order.end(), std::size_t{0});
  std::sort(ws.order.begin(), ws.order.end(), [&](std::size_t l, std::size_t r) {
    return ws.pvalues[l] < ws.pvalues[r];
  });
  ws.sorted_pv.resize(m);
  ws.sorted_gpv.resize(m);
  ws.alt_prefix.assign(m + 1, 0);
  std::size_t gi = 0;
  for (std::size_t r = 0; r < m; ++r) {
    const std::size_t i = ws.order[r];
    ws.sorted_pv[r] = ws.pvalues[i];
    while (gi < t.grid.size() && t.grid[gi] <= ws.sorted_pv[r]) ++gi;
    ws.sorted_gpv[r] = gi == 0 ? 0.0 : ws.grid_values[gi - 1];
    const bool alt = i >= static_cast<std::size_t>(m1 + m2);
    ws.alt_prefix[r + 1] = ws.alt_prefix[r] + (alt ? 1 : 0);
  }

  const auto stats_for_k = [&](std::size_t k) {
    const int alt_rejected = ws.alt_prefix[k];
    const int v = static_cast<int>(k) - (alt_is_null ? 0 : alt_rejected);
    TrialStats s;
    s.power_frac = m3 > 0 ? static_cast<double>(alt_rejected) /
                                static_cast<double>(m3)
                          : 0.0;
    s.fdp = k > 0 ? static_cast<double>(v) / static_cast<double>(k) : 0.0;
    return s;
  };

  for (std::size_t mi = 0; mi < methods.size(); ++mi) {
    std::size_t k = 0;
    switch (methods[mi]) {
      case Method::bh:
      case Method::by:
      case Method::sarkar: {
        const auto& c = t.continuous_c[mi];
        for (std::size_t r = m; r-- > 0;)
          if (ws.sorted_pv[r] <= c[r]) {
            k = r + 1;
            break;
          }
        break;
      }
      case Method::dby:
      case Method::dsarkar: {
        const auto& y = t.discrete_y[mi];
        for (std::size_t r = m; r-- > 0;)
          if (ws.sorted_gpv[r] <= y[r]) {
            k = r + 1;
            break;
          }
        break;
      }
      case Method::dbh: {
        // Heyse: top rank fires on the raw p-value, the rest on G(pv)/r.
        for (std::size_t r = m; r-- > 0;) {
          const bool fires =
              r + 1 == m ? ws.sorted_pv[r] <= cfg.alpha
                         : ws.sorted_gpv[r] <=
                               cfg.alpha * static_cast<double>(r + 1);
          if (fires) {
            k = r + 1;
            break;
          }
        }
        break;
      }
    }
    out[mi] = stats_for_k(k);
  }

  if (plugin != nullptr && plugin_out != nullptr) {
    std::size_t k = 0;
    if (plugin->use_step_down) {
      while (k < m && ws.sorted_pv[k] <= plugin->critical[k]) ++k;
    } else {
      for (std::size_t r = m; r-- > 0;)
        if (ws.sorted_pv[r] <= plugin->critical[r]) {
          k = r + 1;
          break;
        }
    }
    *plugin_out = stats_for_k(k);
  }
}

inline MethodStats reduce_stats(const std::vector<TrialStats>& per_trial) {
  MethodStats s;
  const auto tt = static_cast<double>(per_trial.size());
  double pw = 0.0, pw2 = 0.0, fd = 0.0, fd2 = 0.0;
  for (const auto& v : per_trial) {
    pw += v.power_frac;
    pw2 += v.power_frac * v.power_frac;
    fd += v.fdp;
    fd2 += v.fdp * v.fdp;
  }
  s.power = pw / tt;
  s.fdr = fd / tt;
  if (per_trial.size() > 1) {
    const double vp = std::max(0.0, (pw2 - tt * s.power * s.power) / (tt - 1.0));
    const double vf = std::max(0.0, (fd2 - tt * s.fdr * s.fdr) / (tt - 1.0));
    s.power_se = std::sqrt(vp / tt);
    s.fdr_se = std::sqrt(vf / tt);
  }
  return s;
}

}  // namespace detail

/// Runs one configuration. Trials are independent work units; per-trial
/// seeds derive from (seed, config_index, trial), and the reduction follows
/// trial order, so the result does not depend on the thread count.
inline SimResult run_config(const SimConfig& cfg,
                            const std::vector<Method>& methods,
                            unsigned threads = 1, std::size_t config_index = 0,
                            const PluginProcedure* plugin = nullptr) {
  validate_config(cfg);
  if (methods.empty()) throw std::domain_error("sim: no methods requested");
  if (plugin != nullptr &&
      plugin->critical.size() != static_cast<std::size_t>(cfg.positions))
    throw std::domain_error("sim: plugin constants must have length m");
  const auto tables = detail::build_tables(cfg, methods);
  const auto trials = static_cast<std::size_t>(cfg.trials);

  std::vector<std::vector<detail::TrialStats>> per_method(
      methods.size(), std::vector<detail::TrialStats>(trials));
  std::vector<detail::TrialStats> plugin_trials(plugin ? trials : 0);

  const auto worker = [&](std::size_t lo, std::size_t hi) {
    detail::TrialWorkspace ws;
    std::vector<detail::TrialStats> row(methods.size());
    for (std::size_t t = lo; t < hi; ++t) {
      detail::run_trial(cfg, tables, methods, plugin,
                        detail::trial_seed(cfg.seed, config_index, t), ws,
                        row.data(), plugin ? &plugin_trials[t] : nullptr);
      for (std::size_t mi = 0; mi < methods.size(); ++mi)
        per_method[mi][t] = row[mi];
    }
  };

  const unsigned nthreads =
      std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(trials)));
  if (nthreads == 1) {
    worker(0, trials);
  } else {
    std::vector<std::thread> pool;
    const std::size_t chunk = (trials + nthreads - 1) / nthreads;
    for (unsigned w = 0; w < nthreads; ++w) {
      const std::size_t lo = w * chunk;
      const std::size_t hi = std::min(trials, lo + chunk);
      if (lo >= hi) break;
      pool.emplace_back(worker, lo, hi);
    }
    for (auto& th : pool) th.join();
  }

  SimResult result;
  result.config = cfg;
  result.methods = methods;
  result.stats.reserve(methods.size());
  for (const auto& column : per_method)
    result.stats.push_back(detail::reduce_stats(column));
  if (plugin != nullptr) {
    result.has_plugin = true;
    result.plugin_label = plugin->label;
    result.plugin_stats = detail::reduce_stats(plugin_trials);
  }
  return result;
}

/// Runs every configuration of a grid; config_index follows grid order.
inline std::vector<SimResult> run_suite(const std::vector<SimConfig>& grid,
                                        const std::vector<Method>& methods,
                                        unsigned threads = 1,
                                        const PluginProcedure* plugin = nullptr) {
  if (grid.empty()) throw std::domain_error("sim: empty grid");
  std::vector<SimResult> results;
  results.reserve(grid.size());
  for (std::size_t c = 0; c < grid.size(); ++c)
    results.push_back(run_config(grid[c], methods, threads, c, plugin));
  return results;
}

/// The 54-cell study grid for one group size: m in {800, 2000}, m3 at 10%,
/// 30%, 60% of m, m1 at 20%, 50%, 80% of the true nulls, and weak, moderate
/// and strong effects.
inline std::vector<SimConfig> study_grid(int group_size, int trials,
                                         std::uint64_t seed,
                                         double alpha = 0.05) {
  std::vector<SimConfig> grid;
  for (const int m : {800, 2000}) {
    for (const double f3 : {0.10, 0.30, 0.60}) {
      const int m3 = static_cast<int>(std::lround(m * f3));
      for (const double f1 : {0.20, 0.50, 0.80}) {
        const int m1 = static_cast<int>(std::lround((m - m3) * f1));
        for (const double q : {0.15, 0.25, 0.4}) {
          SimConfig cfg;
          cfg.group_size = group_size;
          cfg.positions = m;
          cfg.false_nulls = m3;
          cfg.sparse_true_nulls = m1;
          cfg.effect_prob = q;
          cfg.trials = trials;
          cfg.seed = seed;
          cfg.alpha = alpha;
          grid.push_back(cfg);
        }
      }
    }
  }
  return grid;
}

}  // namespace dfdr
