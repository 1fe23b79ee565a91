#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace dfdr {

/// Relative tie tolerance for the minimum-likelihood two-sided p-value,
/// matching the convention of R's fisher.test (relErr = 1 + 1e-7).
inline constexpr double kTwoSidedTieTol = 1e-7;

enum class Sidedness { one, two };

/// 2x2 contingency table. Rows are groups, columns are event / non-event.
struct Table2x2 {
  long long a = 0;
  long long b = 0;
  long long c = 0;
  long long d = 0;

  long long row1() const { return a + b; }
  long long row2() const { return c + d; }
  long long col1() const { return a + c; }
  long long total() const { return a + b + c + d; }
};

inline void validate_table(const Table2x2& t) {
  if (t.a < 0 || t.b < 0 || t.c < 0 || t.d < 0)
    throw std::domain_error("Table2x2: negative cell count");
  if (t.total() == 0) throw std::domain_error("Table2x2: all cells are zero");
}

namespace detail {

/// log(k!) from a lazily grown per-thread table. Entries are running sums of
/// log(i), so differences between entries share their low-index rounding
/// error and cancel.
inline double log_factorial(long long k) {
  thread_local std::vector<double> table(1, 0.0);
  if (k < 0) throw std::domain_error("log_factorial: negative argument");
  const auto idx = static_cast<std::size_t>(k);
  if (idx >= table.size()) {
    table.reserve(idx + 1);
    for (std::size_t i = table.size(); i <= idx; ++i)
      table.push_back(table.back() + std::log(static_cast<double>(i)));
  }
  return table[idx];
}

inline void validate_margins(long long row1, long long row2, long long col1) {
  if (row1 < 0 || row2 < 0)
    throw std::domain_error("hypergeometric margins: negative row total");
  if (col1 < 0 || col1 > row1 + row2)
    throw std::domain_error(
        "hypergeometric margins: column total outside [0, row1+row2]");
}

struct SupportRange {
  long long lo;
  long long hi;
};

inline SupportRange attainable_range(long long row1, long long row2,
                                     long long col1) {
  return {std::max<long long>(0, col1 - row2), std::min(row1, col1)};
}

}  // namespace detail

/// P(X = x) for X hypergeometric with margins (row1, row2, col1): the count
/// falling in cell (1,1) when col1 items are assigned to rows at random.
inline double hypergeom_pmf(long long x, long long row1, long long row2,
                            long long col1) {
  detail::validate_margins(row1, row2, col1);
  const auto [lo, hi] = detail::attainable_range(row1, row2, col1);
  if (x < lo || x > hi) return 0.0;
  using detail::log_factorial;
  const double log_den = log_factorial(row1 + row2) - log_factorial(col1) -
                         log_factorial(row1 + row2 - col1);
  const double log_num = log_factorial(row1) - log_factorial(x) -
                         log_factorial(row1 - x) + log_factorial(row2) -
                         log_factorial(col1 - x) -
                         log_factorial(row2 - col1 + x);
  return std::exp(log_num - log_den);
}

/// pmf over the attainable range, indexed by x - lo.
inline std::vector<double> hypergeom_pmf_range(long long row1, long long row2,
                                               long long col1) {
  detail::validate_margins(row1, row2, col1);
  const auto [lo, hi] = detail::attainable_range(row1, row2, col1);
  std::vector<double> pmf(static_cast<std::size_t>(hi - lo + 1));
  for (long long x = lo; x <= hi; ++x)
    pmf[static_cast<std::size_t>(x - lo)] = hypergeom_pmf(x, row1, row2, col1);
  return pmf;
}

/// Upper-tail p-values P(X >= x) for every attainable x, indexed by x - lo.
/// The bottom entry is snapped to exactly 1 (it is the whole tail).
inline std::vector<double> one_sided_pvalues(long long row1, long long row2,
                                             long long col1) {
  const auto pmf = hypergeom_pmf_range(row1, row2, col1);
  std::vector<double> tail(pmf.size());
  double run = 0.0;
  for (std::size_t i = pmf.size(); i-- > 0;) {
    run += pmf[i];
    tail[i] = run;
  }
  if (std::abs(run - 1.0) > 1e-9)
    throw std::runtime_error("hypergeometric pmf failed to normalize");
  tail[0] = 1.0;
  return tail;
}

/// Minimum-likelihood two-sided p-values for every attainable x, indexed by
/// x - lo: the total mass of outcomes no more likely than x, with ties
/// detected at relative tolerance kTwoSidedTieTol. When every outcome
/// qualifies the value is exactly 1.
inline std::vector<double> two_sided_pvalues(long long row1, long long row2,
                                             long long col1) {
  const auto pmf = hypergeom_pmf_range(row1, row2, col1);
  const std::size_t k = pmf.size();
  std::vector<double> sorted_pmf(pmf);
  std::sort(sorted_pmf.begin(), sorted_pmf.end());
  std::vector<double> prefix(k + 1, 0.0);
  for (std::size_t i = 0; i < k; ++i) prefix[i + 1] = prefix[i] + sorted_pmf[i];
  std::vector<double> out(k);
  for (std::size_t i = 0; i < k; ++i) {
    const double cutoff = pmf[i] * (1.0 + kTwoSidedTieTol);
    const auto ub = std::upper_bound(sorted_pmf.begin(), sorted_pmf.end(), cutoff);
    const auto count = static_cast<std::size_t>(ub - sorted_pmf.begin());
    out[i] = count == k ? 1.0 : std::min(prefix[count], 1.0);
  }
  return out;
}

/// One-sided Fisher exact p-value P(X >= a): evidence for association in the
/// event direction for row 1.
inline double fisher_one_sided(const Table2x2& t) {
  validate_table(t);
  const auto [lo, hi] = detail::attainable_range(t.row1(), t.row2(), t.col1());
  const auto tail = one_sided_pvalues(t.row1(), t.row2(), t.col1());
  return tail[static_cast<std::size_t>(t.a - lo)];
}

/// Two-sided Fisher exact p-value, minimum-likelihood definition.
inline double fisher_two_sided(const Table2x2& t) {
  validate_table(t);
  const auto [lo, hi] = detail::attainable_range(t.row1(), t.row2(), t.col1());
  const auto pv = two_sided_pvalues(t.row1(), t.row2(), t.col1());
  return pv[static_cast<std::size_t>(t.a - lo)];
}

/// Null distribution of a discrete p-value: the attainable values and their
/// cumulative probabilities.
struct DiscretePValueDist {
  std::vector<double> support;  // strictly increasing, in (0, 1]
  std::vector<double> cdf;      // P(PV <= support[i]); final entry 1

  std::size_t size() const { return support.size(); }

  /// Right-continuous CDF evaluation F(x); F(0) = 0.
  double operator()(double x) const {
    const auto it = std::upper_bound(support.begin(), support.end(), x);
    if (it == support.begin()) return 0.0;
    return cdf[static_cast<std::size_t>(it - support.begin()) - 1];
  }

  /// Probability mass of the i-th support point.
  double mass(std::size_t i) const {
    return i == 0 ? cdf[0] : cdf[i] - cdf[i - 1];
  }
};

inline void validate_dist(const DiscretePValueDist& d) {
  if (d.support.empty()) throw std::domain_error("p-value dist: empty support");
  if (d.support.size() != d.cdf.size())
    throw std::domain_error("p-value dist: support/cdf length mismatch");
  for (std::size_t i = 0; i < d.support.size(); ++i) {
    if (!(d.support[i] > 0.0) || d.support[i] > 1.0)
      throw std::domain_error("p-value dist: support point outside (0, 1]");
    if (!(d.cdf[i] > 0.0))
      throw std::domain_error("p-value dist: non-positive cdf entry");
    if (i > 0 && !(d.support[i] > d.support[i - 1]))
      throw std::domain_error("p-value dist: support not strictly increasing");
    if (i > 0 && !(d.cdf[i] > d.cdf[i - 1]))
      throw std::domain_error("p-value dist: cdf not strictly increasing");
  }
  if (std::abs(d.cdf.back() - 1.0) > 1e-12)
    throw std::domain_error("p-value dist: cdf does not end at 1");
}

/// Whether F(u) <= u at every support point. Exact p-values satisfy this;
/// mid-p variants may not, which downstream code tolerates with a warning.
inline bool is_superuniform(const DiscretePValueDist& d, double tol = 1e-12) {
  for (std::size_t i = 0; i < d.support.size(); ++i)
    if (d.cdf[i] > d.support[i] + tol) return false;
  return true;
}

/// Full null p-value distribution of Fisher's exact test for fixed margins.
/// Attainable outcomes with equal p-values are merged into one support point.
inline DiscretePValueDist pvalue_support(long long row1, long long row2,
                                         long long col1, Sidedness sided) {
  DiscretePValueDist out;
  if (sided == Sidedness::one) {
    // The upper-tail p-value is its own CDF: P(PV <= tail(x)) = P(X >= x).
    const auto tail = one_sided_pvalues(row1, row2, col1);
    out.support.reserve(tail.size());
    out.cdf.reserve(tail.size());
    for (std::size_t i = tail.size(); i-- > 0;) {
      const double p = tail[i];
      if (!(p > 0.0)) continue;  // underflowed atom, zero probability
      if (!out.support.empty() && p == out.support.back()) continue;
      out.support.push_back(p);
      out.cdf.push_back(p);
    }
    return out;
  }
  const auto pmf = hypergeom_pmf_range(row1, row2, col1);
  const auto pv = two_sided_pvalues(row1, row2, col1);
  std::vector<std::size_t> order(pmf.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t l, std::size_t r) { return pv[l] < pv[r]; });
  double run = 0.0;
  for (const std::size_t i : order) {
    if (pmf[i] == 0.0) continue;
    run += pmf[i];
    if (!out.support.empty() && pv[i] == out.support.back())
      out.cdf.back() = run;
    else {
      out.support.push_back(pv[i]);
      out.cdf.push_back(run);
    }
  }
  if (out.cdf.empty() || std::abs(out.cdf.back() - 1.0) > 1e-9)
    throw std::runtime_error("p-value support failed to normalize");
  out.cdf.back() = 1.0;
  return out;
}

}  // namespace dfdr
