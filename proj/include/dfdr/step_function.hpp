#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <utility>
#include <vector>

#include "dfdr/fisher.hpp"

namespace dfdr {

namespace detail {

/// Neumaier compensated accumulator; thousands of small CDF increments must
/// not drift.
struct CompensatedSum {
  double sum = 0.0;
  double comp = 0.0;

  void add(double v) {
    const double t = sum + v;
    if (std::abs(sum) >= std::abs(v))
      comp += (sum - t) + v;
    else
      comp += (v - t) + sum;
    sum = t;
  }
  double value() const { return sum + comp; }
};

}  // namespace detail

/// The aggregated null CDF G(x) = F_1(x) + ... + F_n(x) as a right-continuous
/// step function, together with the hypothesis count n for the uniform
/// reference n*x.
struct StepFunction {
  std::vector<double> jumps;   // strictly increasing p-values in (0, 1]
  std::vector<double> values;  // cumulative mass after each jump
  std::size_t n = 0;

  /// Right-continuous evaluation; G(0) = 0, G(1) = n.
  double operator()(double x) const {
    if (x < 0.0 || x > 1.0)
      throw std::domain_error("StepFunction: argument outside [0, 1]");
    const auto it = std::upper_bound(jumps.begin(), jumps.end(), x);
    if (it == jumps.begin()) return 0.0;
    return values[static_cast<std::size_t>(it - jumps.begin()) - 1];
  }

  double gunif(double x) const { return static_cast<double>(n) * x; }
};

inline double evaluate(const StepFunction& g, double x) { return g(x); }

/// Sum of per-hypothesis CDFs, each weighted by a positive multiplicity.
/// Equal support points merge exactly (upstream construction guarantees that
/// equal p-values compare equal bitwise).
inline StepFunction aggregate_counted(
    const std::vector<DiscretePValueDist>& dists,
    const std::vector<long long>& counts) {
  if (dists.empty()) throw std::domain_error("aggregate: empty distribution list");
  if (dists.size() != counts.size())
    throw std::domain_error("aggregate: counts length mismatch");
  std::size_t total_atoms = 0;
  long long total_n = 0;
  for (std::size_t i = 0; i < dists.size(); ++i) {
    if (counts[i] <= 0) throw std::domain_error("aggregate: non-positive count");
    total_atoms += dists[i].size();
    total_n += counts[i];
  }
  std::vector<std::pair<double, double>> atoms;  // (p, weighted mass)
  atoms.reserve(total_atoms);
  for (std::size_t i = 0; i < dists.size(); ++i) {
    const auto& d = dists[i];
    const auto w = static_cast<double>(counts[i]);
    for (std::size_t k = 0; k < d.size(); ++k)
      atoms.emplace_back(d.support[k], w * d.mass(k));
  }
  std::sort(atoms.begin(), atoms.end(),
            [](const auto& l, const auto& r) { return l.first < r.first; });
  StepFunction g;
  g.n = static_cast<std::size_t>(total_n);
  g.jumps.reserve(atoms.size());
  g.values.reserve(atoms.size());
  detail::CompensatedSum running;
  for (const auto& [p, mass] : atoms) {
    running.add(mass);
    if (!g.jumps.empty() && p == g.jumps.back())
      g.values.back() = running.value();
    else {
      g.jumps.push_back(p);
      g.values.push_back(running.value());
    }
  }
  // Every CDF ends at 1, so the terminal value is n exactly.
  const auto total = static_cast<double>(g.n);
  if (!g.values.empty() && std::abs(g.values.back() - total) <= total * 1e-9)
    g.values.back() = total;
  return g;
}

/// G(x) = F_1(x) + ... + F_n(x).
inline StepFunction aggregate(const std::vector<DiscretePValueDist>& dists) {
  return aggregate_counted(dists,
                           std::vector<long long>(dists.size(), 1));
}

struct GridRow {
  double x;
  double g;
  double gunif;
};

/// Evenly spaced samples of (x, G(x), n*x) on [lo, hi] for export.
inline std::vector<GridRow> ratio_grid(const StepFunction& g, double lo,
                                       double hi, std::size_t points) {
  if (!(lo >= 0.0) || !(lo < hi) || !(hi <= 1.0))
    throw std::domain_error("ratio_grid: need 0 <= lo < hi <= 1");
  if (points < 2) throw std::domain_error("ratio_grid: need at least 2 points");
  std::vector<GridRow> rows;
  rows.reserve(points);
  const double step = (hi - lo) / static_cast<double>(points - 1);
  for (std::size_t k = 0; k < points; ++k) {
    const double x = k + 1 == points ? hi : lo + step * static_cast<double>(k);
    rows.push_back({x, g(x), g.gunif(x)});
  }
  return rows;
}

/// Mean of G(x) / (n*x) over the grid points with x > 0.
inline double mean_ratio(const std::vector<GridRow>& rows) {
  double sum = 0.0;
  std::size_t count = 0;
  for (const auto& r : rows) {
    if (r.gunif <= 0.0) continue;
    sum += r.g / r.gunif;
    ++count;
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

}  // namespace dfdr
