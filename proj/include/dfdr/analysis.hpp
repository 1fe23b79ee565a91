#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "dfdr/fisher.hpp"
#include "dfdr/io.hpp"
#include "dfdr/procedures.hpp"
#include "dfdr/step_function.hpp"

namespace dfdr {

/// Per-record exact-test results for a count table: each unit is tested
/// against the pooled complement of all other units, i.e. the 2x2 table
/// (a, A - a; n_i - a, B - (n_i - a)) with A the grand event total and B the
/// grand non-event total. Records sharing a total share margins, hence a
/// null distribution.
struct CountAnalysis {
  std::vector<std::string> ids;
  std::vector<double> pvalues;            // per record
  std::vector<DiscretePValueDist> dists;  // per record, same order
  StepFunction g;
  long long total_events = 0;     // A
  long long total_nonevents = 0;  // B
};

inline CountAnalysis build_count_analysis(const std::vector<CountRecord>& records,
                                          Sidedness sided) {
  if (records.empty()) throw std::domain_error("analysis: no records");
  long long a_total = 0, b_total = 0;
  for (const auto& r : records) {
    a_total += r.event_count;
    b_total += r.total_count - r.event_count;
  }
  if (a_total == 0)
    throw std::domain_error("analysis: no events anywhere; tests are degenerate");

  struct MarginData {
    long long lo = 0;
    std::vector<double> pvalue_by_x;
    DiscretePValueDist dist;
  };
  std::unordered_map<long long, MarginData> by_total;

  CountAnalysis out;
  out.total_events = a_total;
  out.total_nonevents = b_total;
  out.ids.reserve(records.size());
  out.pvalues.reserve(records.size());
  out.dists.reserve(records.size());
  for (const auto& r : records) {
    auto [it, fresh] = by_total.try_emplace(r.total_count);
    MarginData& md = it->second;
    if (fresh) {
      md.lo = std::max<long long>(0, r.total_count - b_total);
      md.pvalue_by_x = sided == Sidedness::one
                           ? one_sided_pvalues(a_total, b_total, r.total_count)
                           : two_sided_pvalues(a_total, b_total, r.total_count);
      md.dist = pvalue_support(a_total, b_total, r.total_count, sided);
    }
    out.ids.push_back(r.id);
    out.pvalues.push_back(
        md.pvalue_by_x[static_cast<std::size_t>(r.event_count - md.lo)]);
    out.dists.push_back(md.dist);
  }

  // Aggregate in record order so that a round trip through the exported
  // distribution file rebuilds G bit for bit.
  out.g = aggregate(out.dists);
  return out;
}

/// Adjusted p-values for every requested method; discrete methods need the
/// aggregated step function, so g == nullptr restricts to continuous ones.
inline std::vector<std::vector<double>> compute_adjusted(
    const std::vector<double>& pvalues, const std::vector<Method>& methods,
    const StepFunction* g) {
  std::vector<std::vector<double>> adjusted;
  adjusted.reserve(methods.size());
  for (const Method m : methods) {
    if (is_discrete(m) && g == nullptr)
      throw std::invalid_argument(
          std::string("method ") + std::string(method_label(m)) +
          " needs per-hypothesis null distributions (--dists)");
    static const StepFunction empty{};
    adjusted.push_back(method_adjusted(m, g != nullptr ? *g : empty, pvalues));
  }
  return adjusted;
}

inline std::vector<std::size_t> rejection_counts(
    const std::vector<std::vector<double>>& adjusted, double alpha) {
  std::vector<std::size_t> counts;
  counts.reserve(adjusted.size());
  for (const auto& column : adjusted) {
    std::size_t k = 0;
    for (const double v : column)
      if (v <= alpha) ++k;
    counts.push_back(k);
  }
  return counts;
}

}  // namespace dfdr
