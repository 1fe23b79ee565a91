#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "dfdr/fisher.hpp"
#include "dfdr/procedures.hpp"
#include "dfdr/step_function.hpp"

namespace dfdr {

/// A finitely supported null p-value distribution plus the ground truth of
/// its hypothesis. The truth flags are what the error rates are measured
/// against; only the oracle and the simulator ever know them.
struct PointMassDist {
  std::vector<double> pvalues;  // strictly increasing, in (0, 1]
  std::vector<double> probs;    // positive, sum to 1
  bool true_null = true;

  std::size_t size() const { return pvalues.size(); }
};

inline void validate_point_mass(const PointMassDist& d) {
  if (d.pvalues.empty()) throw std::domain_error("point-mass dist: empty");
  if (d.pvalues.size() != d.probs.size())
    throw std::domain_error("point-mass dist: atom/prob length mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (!(d.pvalues[i] > 0.0) || d.pvalues[i] > 1.0)
      throw std::domain_error("point-mass dist: atom outside (0, 1]");
    if (i > 0 && !(d.pvalues[i] > d.pvalues[i - 1]))
      throw std::domain_error("point-mass dist: atoms not strictly increasing");
    if (!(d.probs[i] > 0.0))
      throw std::domain_error("point-mass dist: non-positive probability");
    total += d.probs[i];
  }
  if (std::abs(total - 1.0) > 1e-12)
    throw std::domain_error("point-mass dist: probabilities do not sum to 1");
}

inline DiscretePValueDist to_pvalue_dist(const PointMassDist& d) {
  DiscretePValueDist out;
  out.support = d.pvalues;
  out.cdf.resize(d.size());
  double run = 0.0;
  for (std::size_t i = 0; i < d.size(); ++i) {
    run += d.probs[i];
    out.cdf[i] = run;
  }
  out.cdf.back() = 1.0;
  return out;
}

inline PointMassDist to_point_mass(const DiscretePValueDist& d,
                                   bool true_null = true) {
  PointMassDist out;
  out.pvalues = d.support;
  out.probs.resize(d.size());
  for (std::size_t i = 0; i < d.size(); ++i) out.probs[i] = d.mass(i);
  out.true_null = true_null;
  return out;
}

inline StepFunction aggregate(const std::vector<PointMassDist>& dists) {
  std::vector<DiscretePValueDist> converted;
  converted.reserve(dists.size());
  for (const auto& d : dists) converted.push_back(to_pvalue_dist(d));
  return aggregate(converted);
}

/// What a procedure reports for one p-value vector. `adjusted_sorted` is
/// optional and, when present, follows the sorted order (for traces).
struct MethodResult {
  std::vector<bool> rejected;
  std::vector<double> adjusted_sorted;
};

using ProcedureFn = std::function<MethodResult(const std::vector<double>&)>;

/// Step-up with fixed critical constants.
inline ProcedureFn make_step_up_procedure(std::vector<double> critical) {
  return [critical = std::move(critical)](const std::vector<double>& pv) {
    auto outcome = step_up(pv, critical);
    return MethodResult{std::move(outcome.rejected), {}};
  };
}

/// Heyse's DBH: threshold the recursive adjusted p-values at alpha. Fills
/// the adjusted values, so traces show the full recursion.
inline ProcedureFn make_heyse_procedure(const StepFunction& g, double alpha) {
  return [&g, alpha](const std::vector<double>& pv) {
    const auto adj = adjusted_heyse(g, pv);
    MethodResult r;
    r.rejected.resize(pv.size());
    for (std::size_t i = 0; i < pv.size(); ++i) r.rejected[i] = adj[i] <= alpha;
    auto s = detail::sort_pvalues(pv);
    r.adjusted_sorted.resize(pv.size());
    for (std::size_t i = 0; i < pv.size(); ++i)
      r.adjusted_sorted[i] = adj[s.order[i]];
    return r;
  };
}

/// Step-up procedure of a named method against the G aggregated from the
/// supplied null distributions.
inline ProcedureFn make_method_procedure(Method m,
                                         const std::vector<PointMassDist>& dists,
                                         double alpha,
                                         const StepFunction& g) {
  if (m == Method::dbh) return make_heyse_procedure(g, alpha);
  return make_step_up_procedure(method_constants(m, g, dists.size(), alpha));
}

struct TraceRow {
  std::vector<double> pvalues;     // input order
  std::vector<double> sorted;      // order statistics
  std::vector<double> adjusted;    // sorted order; empty if not provided
  std::vector<double> atom_probs;  // P(PV_j = pvalues[j]) per hypothesis
  double joint_prob = 0.0;
  std::size_t rejections = 0;
};

struct ExactRates {
  double fdr = 0.0;
  double fwer = 0.0;
  double total_mass = 0.0;  // enumerated probability; 1 up to rounding
  std::uint64_t outcomes = 0;
  std::vector<TraceRow> trace;
};

class enumeration_cap_error : public std::runtime_error {
 public:
  explicit enumeration_cap_error(std::uint64_t required, std::uint64_t cap)
      : std::runtime_error("exact enumeration needs " +
                           std::to_string(required) +
                           " outcomes, above the cap of " +
                           std::to_string(cap)),
        required_(required) {}

  std::uint64_t required() const { return required_; }

 private:
  std::uint64_t required_;
};

struct EnumerationOptions {
  std::uint64_t cap = std::uint64_t{1} << 24;
  bool with_trace = false;
  double prune_below = 1e-300;  // skip subtrees whose prefix mass underflows
};

namespace detail {

/// Product of atom counts, saturating at the cap; long double sidecar keeps
/// an honest figure for the error message when the product is astronomical.
inline std::pair<std::uint64_t, long double> outcome_count(
    const std::vector<PointMassDist>& dists, std::uint64_t cap) {
  std::uint64_t count = 1;
  long double exact = 1.0L;
  bool saturated = false;
  for (const auto& d : dists) {
    const std::uint64_t k = d.size();
    exact *= static_cast<long double>(k);
    if (saturated || count > cap / k + 1) {
      saturated = true;
      continue;
    }
    count *= k;
    if (count > cap) saturated = true;
  }
  if (saturated && exact < static_cast<long double>(UINT64_MAX))
    count = static_cast<std::uint64_t>(exact);
  return {saturated ? std::max(count, cap + 1) : count, exact};
}

}  // namespace detail

/// Exact FDR and FWER of `procedure` under independent sampling of the given
/// point-mass distributions, by full enumeration of the joint outcome space.
/// FDP is V / max(R, 1). Hypothesis 1 varies fastest, so trace rows follow
/// the natural tabulation order.
inline ExactRates exact_error_rates(const std::vector<PointMassDist>& dists,
                                    const ProcedureFn& procedure,
                                    const EnumerationOptions& options = {}) {
  if (dists.empty()) throw std::domain_error("exact_error_rates: no distributions");
  for (const auto& d : dists) validate_point_mass(d);
  const auto [needed, exact_needed] = detail::outcome_count(dists, options.cap);
  if (needed > options.cap) throw enumeration_cap_error(needed, options.cap);
  (void)exact_needed;

  const std::size_t n = dists.size();
  ExactRates rates;
  std::vector<double> pvalues(n);
  std::vector<double> atom_probs(n);

  // Recurse from the last hypothesis down so that the first one is the
  // innermost (fastest-varying) index.
  auto walk = [&](auto&& self, std::size_t level, double prefix) -> void {
    if (prefix <= options.prune_below) return;
    if (level == 0) {
      const MethodResult res = procedure(pvalues);
      std::size_t v = 0, r = 0;
      for (std::size_t j = 0; j < n; ++j) {
        if (!res.rejected[j]) continue;
        ++r;
        if (dists[j].true_null) ++v;
      }
      const double fdp =
          r == 0 ? 0.0 : static_cast<double>(v) / static_cast<double>(r);
      rates.fdr += prefix * fdp;
      if (v > 0) rates.fwer += prefix;
      rates.total_mass += prefix;
      ++rates.outcomes;
      if (options.with_trace) {
        TraceRow row;
        row.pvalues = pvalues;
        row.sorted = pvalues;
        std::sort(row.sorted.begin(), row.sorted.end());
        row.adjusted = res.adjusted_sorted;
        row.atom_probs = atom_probs;
        row.joint_prob = prefix;
        row.rejections = r;
        rates.trace.push_back(std::move(row));
      }
      return;
    }
    const auto& d = dists[level - 1];
    for (std::size_t a = 0; a < d.size(); ++a) {
      pvalues[level - 1] = d.pvalues[a];
      atom_probs[level - 1] = d.probs[a];
      self(self, level - 1, prefix * d.probs[a]);
    }
  };
  walk(walk, n, 1.0);
  return rates;
}

/// The four-distribution counterexample for which the Heyse procedure is
/// anticonservative: P1 = 0.05 d_{0.05} + 0.95 d_1, P2 = 0.025 d_{0.10} +
/// 0.975 d_1, P3 = 0.025 d_{0.15} + 0.975 d_1, P4 = d_1.
inline std::vector<PointMassDist> counterexample_n4_dists() {
  std::vector<PointMassDist> dists;
  dists.push_back({{0.05, 1.0}, {0.05, 0.95}, true});
  dists.push_back({{0.10, 1.0}, {0.025, 0.975}, true});
  dists.push_back({{0.15, 1.0}, {0.025, 0.975}, true});
  dists.push_back({{1.0}, {1.0}, true});
  return dists;
}

/// Ten-hypothesis extension: P1 as above, P10 = d_1, and P2..P9 each with
/// mass 0.00621 at 0.10, 0.15, ..., 0.45 (remainder at 1).
inline std::vector<PointMassDist> counterexample_n10_dists() {
  std::vector<PointMassDist> dists;
  dists.push_back({{0.05, 1.0}, {0.05, 0.95}, true});
  for (int k = 0; k < 8; ++k) {
    const double loc = 0.10 + 0.05 * k;
    dists.push_back({{loc, 1.0}, {0.00621, 1.0 - 0.00621}, true});
  }
  dists.push_back({{1.0}, {1.0}, true});
  return dists;
}

struct CounterexampleResult {
  std::vector<PointMassDist> dists;
  double fwer = 0.0;
  double fdr = 0.0;
};

/// Runs the n=10 extension under DBH at level 0.05; the exact FWER (= FDR,
/// all nulls true) is 0.05100062.
inline CounterexampleResult counterexample_n10_example() {
  CounterexampleResult res;
  res.dists = counterexample_n10_dists();
  const StepFunction g = aggregate(res.dists);
  const auto rates = exact_error_rates(res.dists, make_heyse_procedure(g, 0.05));
  res.fwer = rates.fwer;
  res.fdr = rates.fdr;
  return res;
}

struct MonteCarloRates {
  double fdr = 0.0;
  double fdr_std_error = 0.0;
  double fwer = 0.0;
  std::size_t trials = 0;
};

/// Monte Carlo estimate of the same error rates, for configurations beyond
/// the enumeration cap. Deterministic for a fixed seed.
inline MonteCarloRates monte_carlo_error_rates(
    const std::vector<PointMassDist>& dists, const ProcedureFn& procedure,
    std::size_t trials, std::uint64_t seed) {
  if (dists.empty()) throw std::domain_error("monte_carlo_error_rates: no distributions");
  if (trials < 1) throw std::domain_error("monte_carlo_error_rates: trials >= 1");
  for (const auto& d : dists) validate_point_mass(d);
  const std::size_t n = dists.size();
  std::vector<std::vector<double>> cum(n);
  for (std::size_t j = 0; j < n; ++j) {
    double run = 0.0;
    cum[j].reserve(dists[j].size());
    for (const double p : dists[j].probs) {
      run += p;
      cum[j].push_back(run);
    }
    cum[j].back() = 1.0;
  }
  std::mt19937_64 rng(seed);
  const auto uniform01 = [&rng]() {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
  };
  std::vector<double> pvalues(n);
  double sum_fdp = 0.0, sum_fdp_sq = 0.0, fwer_hits = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    for (std::size_t j = 0; j < n; ++j) {
      const double u = uniform01();
      const auto it = std::upper_bound(cum[j].begin(), cum[j].end(), u);
      const auto a = std::min<std::size_t>(
          static_cast<std::size_t>(it - cum[j].begin()), dists[j].size() - 1);
      pvalues[j] = dists[j].pvalues[a];
    }
    const MethodResult res = procedure(pvalues);
    std::size_t v = 0, r = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (!res.rejected[j]) continue;
      ++r;
      if (dists[j].true_null) ++v;
    }
    const double fdp =
        r == 0 ? 0.0 : static_cast<double>(v) / static_cast<double>(r);
    sum_fdp += fdp;
    sum_fdp_sq += fdp * fdp;
    if (v > 0) fwer_hits += 1.0;
  }
  MonteCarloRates out;
  out.trials = trials;
  const auto tt = static_cast<double>(trials);
  out.fdr = sum_fdp / tt;
  out.fwer = fwer_hits / tt;
  if (trials > 1) {
    const double var = std::max(0.0, (sum_fdp_sq - tt * out.fdr * out.fdr) /
                                         (tt - 1.0));
    out.fdr_std_error = std::sqrt(var / tt);
  }
  return out;
}

}  // namespace dfdr
