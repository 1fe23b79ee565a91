#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "dfdr/fisher.hpp"
#include "dfdr/step_function.hpp"

namespace dfdr {

inline double harmonic_number(std::size_t n) {
  double h = 0.0;
  for (std::size_t i = 1; i <= n; ++i) h += 1.0 / static_cast<double>(i);
  return h;
}

/// A step-up procedure shape: the nondecreasing targets ytilde_1 <= ... <=
/// ytilde_n (ytilde_0 = 0 implied) together with the rescaling constant
/// D = sum (ytilde_i - ytilde_{i-1}) / i that guarantees FDR control under
/// arbitrary dependence, and the nominal level alpha.
struct ProcedureSpec {
  std::vector<double> shape;  // ytilde_1 .. ytilde_n
  double alpha = 0.05;
  double rescale = 1.0;       // D

  std::size_t size() const { return shape.size(); }

  /// y_i = (alpha / D) * ytilde_i.
  std::vector<double> targets() const {
    std::vector<double> y(shape.size());
    const double scale = alpha / rescale;
    for (std::size_t i = 0; i < shape.size(); ++i) y[i] = scale * shape[i];
    return y;
  }

  /// Linear shape ytilde_i = i; D is the harmonic sum, recovering the
  /// Benjamini-Yekutieli constants when G is uniform.
  static ProcedureSpec by_shape(std::size_t n, double alpha) {
    ProcedureSpec s;
    s.shape.resize(n);
    for (std::size_t i = 0; i < n; ++i) s.shape[i] = static_cast<double>(i + 1);
    s.alpha = alpha;
    s.rescale = harmonic_number(n);
    return s;
  }

  /// Quadratic shape ytilde_i = i(i+1); D = 2n, recovering Sarkar's
  /// constants when G is uniform.
  static ProcedureSpec sarkar_shape(std::size_t n, double alpha) {
    ProcedureSpec s;
    s.shape.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<double>(i + 1);
      s.shape[i] = k * (k + 1.0);
    }
    s.alpha = alpha;
    s.rescale = rescale_constant(s.shape);
    return s;
  }

  /// Linear shape with D fixed to 1: Heyse's discrete BH procedure. More
  /// powerful than the rescaled shapes but without a general FDR guarantee.
  static ProcedureSpec heyse(std::size_t n, double alpha) {
    ProcedureSpec s = by_shape(n, alpha);
    s.rescale = 1.0;
    return s;
  }

  /// Arbitrary nondecreasing shape; D computed from the definition.
  static ProcedureSpec custom(std::vector<double> shape, double alpha) {
    ProcedureSpec s;
    s.shape = std::move(shape);
    s.alpha = alpha;
    s.rescale = rescale_constant(s.shape);
    return s;
  }

  static double rescale_constant(const std::vector<double>& shape) {
    double d = 0.0;
    double prev = 0.0;
    for (std::size_t i = 0; i < shape.size(); ++i) {
      if (shape[i] < prev)
        throw std::domain_error("procedure shape must be nondecreasing from 0");
      d += (shape[i] - prev) / static_cast<double>(i + 1);
      prev = shape[i];
    }
    if (!(d > 0.0)) throw std::domain_error("procedure shape has zero mass");
    return d;
  }
};

/// Benjamini-Yekutieli constants c_i = i * alpha / (n * sum_j 1/j).
inline std::vector<double> by_constants(std::size_t n, double alpha) {
  const double d = harmonic_number(n);
  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i)
    c[i] = static_cast<double>(i + 1) * alpha / (static_cast<double>(n) * d);
  return c;
}

/// Sarkar constants c_i = i(i+1) * alpha / (2 n^2).
inline std::vector<double> sarkar_constants(std::size_t n, double alpha) {
  std::vector<double> c(n);
  const auto nn = static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = static_cast<double>(i + 1);
    c[i] = k * (k + 1.0) * alpha / (2.0 * nn * nn);
  }
  return c;
}

/// Benjamini-Hochberg constants c_i = i * alpha / n.
inline std::vector<double> bh_constants(std::size_t n, double alpha) {
  std::vector<double> c(n);
  for (std::size_t i = 0; i < n; ++i)
    c[i] = static_cast<double>(i + 1) * alpha / static_cast<double>(n);
  return c;
}

/// Discrete critical constants: c_i is the largest attainable jump of G with
/// G(c_i) <= y_i, or 0 when even the smallest jump is too heavy. A p-value
/// can never fall at or below a zero constant since F(0) = 0.
inline std::vector<double> discrete_constants(const StepFunction& g,
                                              const ProcedureSpec& spec) {
  if (g.n != spec.size())
    throw std::domain_error("discrete_constants: G aggregates a different n");
  const auto y = spec.targets();
  std::vector<double> c(y.size());
  std::size_t j = 0;  // first jump with mass above the current target
  for (std::size_t i = 0; i < y.size(); ++i) {
    while (j < g.values.size() && g.values[j] <= y[i]) ++j;
    c[i] = j == 0 ? 0.0 : g.jumps[j - 1];
  }
  return c;
}

/// Result of applying a step-up or step-down procedure.
struct TestOutcome {
  std::vector<std::size_t> order;      // sorted rank -> input index
  std::vector<double> sorted_pvalues;  // PV_(1) <= ... <= PV_(n)
  std::vector<double> critical_values;
  std::size_t rejection_count = 0;     // k
  std::vector<bool> rejected;          // input order
  std::vector<double> adjusted;        // input order; empty unless computed
};

namespace detail {

struct SortedPValues {
  std::vector<std::size_t> order;
  std::vector<double> sorted;
};

inline SortedPValues sort_pvalues(const std::vector<double>& pvalues) {
  for (const double p : pvalues)
    if (!(p >= 0.0) || p > 1.0)
      throw std::domain_error("p-value outside [0, 1]");
  SortedPValues s;
  s.order.resize(pvalues.size());
  std::iota(s.order.begin(), s.order.end(), std::size_t{0});
  std::stable_sort(s.order.begin(), s.order.end(),
                   [&](std::size_t l, std::size_t r) {
                     return pvalues[l] < pvalues[r];
                   });
  s.sorted.resize(pvalues.size());
  for (std::size_t i = 0; i < pvalues.size(); ++i)
    s.sorted[i] = pvalues[s.order[i]];
  return s;
}

inline void validate_critical(const std::vector<double>& critical) {
  for (std::size_t i = 0; i < critical.size(); ++i) {
    if (critical[i] < 0.0 || critical[i] > 1.0)
      throw std::domain_error("critical value outside [0, 1]");
    if (i > 0 && critical[i] < critical[i - 1])
      throw std::domain_error("critical values must be nondecreasing");
  }
}

inline TestOutcome finish_outcome(SortedPValues&& s,
                                  const std::vector<double>& critical,
                                  std::size_t k) {
  TestOutcome out;
  out.order = std::move(s.order);
  out.sorted_pvalues = std::move(s.sorted);
  out.critical_values = critical;
  out.rejection_count = k;
  out.rejected.assign(out.order.size(), false);
  for (std::size_t i = 0; i < k; ++i) out.rejected[out.order[i]] = true;
  return out;
}

}  // namespace detail

/// Step-up: reject the k smallest p-values where k = max{i : PV_(i) <= c_i}.
/// Equal p-values never straddle k (the constants are nondecreasing), so tie
/// groups are rejected or retained as a block.
inline TestOutcome step_up(const std::vector<double>& pvalues,
                           const std::vector<double>& critical) {
  if (pvalues.size() != critical.size())
    throw std::domain_error("step_up: p-value / critical length mismatch");
  if (pvalues.empty()) throw std::domain_error("step_up: empty input");
  detail::validate_critical(critical);
  auto s = detail::sort_pvalues(pvalues);
  std::size_t k = 0;
  for (std::size_t i = pvalues.size(); i-- > 0;) {
    if (s.sorted[i] <= critical[i]) {
      k = i + 1;
      break;
    }
  }
  return detail::finish_outcome(std::move(s), critical, k);
}

/// Step-down: reject the k smallest where every order statistic up to k
/// clears its constant; if PV_(1) > c_1 nothing is rejected.
inline TestOutcome step_down(const std::vector<double>& pvalues,
                             const std::vector<double>& critical) {
  if (pvalues.size() != critical.size())
    throw std::domain_error("step_down: p-value / critical length mismatch");
  if (pvalues.empty()) throw std::domain_error("step_down: empty input");
  detail::validate_critical(critical);
  auto s = detail::sort_pvalues(pvalues);
  std::size_t k = 0;
  while (k < pvalues.size() && s.sorted[k] <= critical[k]) ++k;
  return detail::finish_outcome(std::move(s), critical, k);
}

namespace detail {

/// Smallest level at which each sorted rank can fire, then the running
/// minimum from the right: adjusted_(i) = min_{j >= i} term_j.
inline std::vector<double> suffix_min_adjust(std::vector<double> terms) {
  if (terms.empty()) throw std::domain_error("adjustment: empty input");
  for (std::size_t i = terms.size() - 1; i-- > 0;)
    terms[i] = std::min(terms[i], terms[i + 1]);
  return terms;
}

inline std::vector<double> to_input_order(const std::vector<std::size_t>& order,
                                          const std::vector<double>& sorted_adj) {
  std::vector<double> adj(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) adj[order[i]] = sorted_adj[i];
  return adj;
}

}  // namespace detail

/// Adjusted p-values for the shape-based step-up procedure:
/// min_{j >= i} min(D * G(pv_(j)) / ytilde_j, 1). For the linear shape this
/// is min_{j >= i} min((D/j) G(pv_(j)), 1); the same telescoping argument
/// justifies the quadratic shape. Returned in input order; thresholding at
/// alpha reproduces the step-up rejection set of discrete_constants.
inline std::vector<double> adjusted_shape(const StepFunction& g,
                                          const ProcedureSpec& spec,
                                          const std::vector<double>& pvalues) {
  if (g.n != spec.size() || pvalues.size() != spec.size())
    throw std::domain_error("adjusted_shape: dimension mismatch");
  auto s = detail::sort_pvalues(pvalues);
  std::vector<double> terms(pvalues.size());
  for (std::size_t j = 0; j < pvalues.size(); ++j) {
    const double gj = g(s.sorted[j]);
    if (spec.shape[j] > 0.0)
      terms[j] = std::min(spec.rescale * gj / spec.shape[j], 1.0);
    else
      terms[j] = gj > 0.0 ? 1.0 : 0.0;
  }
  return detail::to_input_order(s.order, detail::suffix_min_adjust(std::move(terms)));
}

/// Adjusted p-values against the uniform reference G(x) = n*x: the classic
/// continuous BH / BY / Sarkar adjustments, depending on the shape.
inline std::vector<double> adjusted_continuous(const ProcedureSpec& spec,
                                               const std::vector<double>& pvalues) {
  if (pvalues.size() != spec.size())
    throw std::domain_error("adjusted_continuous: dimension mismatch");
  auto s = detail::sort_pvalues(pvalues);
  const auto n = static_cast<double>(pvalues.size());
  std::vector<double> terms(pvalues.size());
  for (std::size_t j = 0; j < pvalues.size(); ++j) {
    const double gj = n * s.sorted[j];
    if (spec.shape[j] > 0.0)
      terms[j] = std::min(spec.rescale * gj / spec.shape[j], 1.0);
    else
      terms[j] = gj > 0.0 ? 1.0 : 0.0;
  }
  return detail::to_input_order(s.order, detail::suffix_min_adjust(std::move(terms)));
}

/// Heyse's recursive adjustment: p~_(n) = pv_(n), then
/// p~_(i) = min(p~_(i+1), G(pv_(i)) / i). This is the DBH procedure; it does
/// not carry a general FDR guarantee (see guarantees_fdr_control).
inline std::vector<double> adjusted_heyse(const StepFunction& g,
                                          const std::vector<double>& pvalues) {
  if (g.n != pvalues.size())
    throw std::domain_error("adjusted_heyse: dimension mismatch");
  if (pvalues.empty()) throw std::domain_error("adjusted_heyse: empty input");
  auto s = detail::sort_pvalues(pvalues);
  const std::size_t n = pvalues.size();
  std::vector<double> adj(n);
  adj[n - 1] = s.sorted[n - 1];
  for (std::size_t i = n - 1; i-- > 0;)
    adj[i] = std::min(adj[i + 1], g(s.sorted[i]) / static_cast<double>(i + 1));
  return detail::to_input_order(s.order, adj);
}

/// The two FDR upper bounds of the step-up procedure with constants c
/// (c_0 = 0 implied): the telescoped sum over the true-null CDFs alone, and
/// the weaker variant over the full aggregate G. The first never exceeds the
/// second.
struct FdrBounds {
  double true_null = 0.0;  // sum_r (1/r) (G_I(c_r) - G_I(c_{r-1}))
  double aggregate = 0.0;  // sum_r (1/r) (G(c_r) - G(c_{r-1}))
};

inline FdrBounds fdr_bound(const std::vector<DiscretePValueDist>& dists,
                           const std::vector<bool>& true_null,
                           const std::vector<double>& critical) {
  if (dists.size() != critical.size() || dists.size() != true_null.size())
    throw std::domain_error("fdr_bound: dimension mismatch");
  detail::validate_critical(critical);
  FdrBounds b;
  for (std::size_t j = 0; j < dists.size(); ++j) {
    double contribution = 0.0;
    double prev = 0.0;  // F_j(c_0) = F_j(0) = 0
    for (std::size_t r = 0; r < critical.size(); ++r) {
      const double cur = dists[j](critical[r]);
      contribution += (cur - prev) / static_cast<double>(r + 1);
      prev = cur;
    }
    b.aggregate += contribution;
    if (true_null[j]) b.true_null += contribution;
  }
  return b;
}

/// Bound with every hypothesis treated as a true null (the complete-null
/// case, where both bounds coincide).
inline FdrBounds fdr_bound(const std::vector<DiscretePValueDist>& dists,
                           const std::vector<double>& critical) {
  return fdr_bound(dists, std::vector<bool>(dists.size(), true), critical);
}

/// The procedures exposed through the CLI and the simulation study.
enum class Method { bh, by, sarkar, dbh, dby, dsarkar };

inline constexpr Method kAllMethods[] = {Method::dbh, Method::bh, Method::dby,
                                         Method::by, Method::dsarkar,
                                         Method::sarkar};

inline bool is_discrete(Method m) {
  return m == Method::dbh || m == Method::dby || m == Method::dsarkar;
}

/// BH controls FDR only under independence / PRDS; DBH (Heyse) carries no
/// general guarantee at all. The remaining four are valid under arbitrary
/// dependence.
inline bool guarantees_fdr_under_dependence(Method m) {
  return m == Method::by || m == Method::dby || m == Method::sarkar ||
         m == Method::dsarkar;
}

inline std::string_view method_label(Method m) {
  switch (m) {
    case Method::bh: return "BH";
    case Method::by: return "BY";
    case Method::sarkar: return "Sarkar";
    case Method::dbh: return "DBH";
    case Method::dby: return "DBY";
    case Method::dsarkar: return "DSarkar";
  }
  return "?";
}

inline Method parse_method(std::string_view name) {
  std::string low(name);
  std::transform(low.begin(), low.end(), low.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (low == "bh") return Method::bh;
  if (low == "by") return Method::by;
  if (low == "sarkar") return Method::sarkar;
  if (low == "dbh" || low == "heyse") return Method::dbh;
  if (low == "dby") return Method::dby;
  if (low == "dsarkar") return Method::dsarkar;
  throw std::domain_error("unknown method: " + std::string(name));
}

/// Critical constants of a method at level alpha for n hypotheses; discrete
/// methods read them off the aggregated step function.
inline std::vector<double> method_constants(Method m, const StepFunction& g,
                                            std::size_t n, double alpha) {
  switch (m) {
    case Method::bh: return bh_constants(n, alpha);
    case Method::by: return by_constants(n, alpha);
    case Method::sarkar: return sarkar_constants(n, alpha);
    case Method::dbh: return discrete_constants(g, ProcedureSpec::heyse(n, alpha));
    case Method::dby: return discrete_constants(g, ProcedureSpec::by_shape(n, alpha));
    case Method::dsarkar:
      return discrete_constants(g, ProcedureSpec::sarkar_shape(n, alpha));
  }
  throw std::domain_error("unknown method");
}

/// Adjusted p-values of a method; discrete shapes use G, continuous ones the
/// uniform reference, DBH the Heyse recursion.
inline std::vector<double> method_adjusted(Method m, const StepFunction& g,
                                           const std::vector<double>& pvalues) {
  const std::size_t n = pvalues.size();
  switch (m) {
    case Method::bh:
      return adjusted_continuous(ProcedureSpec::heyse(n, 0.05), pvalues);
    case Method::by:
      return adjusted_continuous(ProcedureSpec::by_shape(n, 0.05), pvalues);
    case Method::sarkar:
      return adjusted_continuous(ProcedureSpec::sarkar_shape(n, 0.05), pvalues);
    case Method::dbh: return adjusted_heyse(g, pvalues);
    case Method::dby:
      return adjusted_shape(g, ProcedureSpec::by_shape(n, 0.05), pvalues);
    case Method::dsarkar:
      return adjusted_shape(g, ProcedureSpec::sarkar_shape(n, 0.05), pvalues);
  }
  throw std::domain_error("unknown method");
}

}  // namespace dfdr
