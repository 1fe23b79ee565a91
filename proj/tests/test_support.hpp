#pragma once

// Shared helpers for the test suites: random distribution generators and an
// integer-exact Fisher oracle independent of the library's floating-point
// path.

#include <algorithm>
#include <cstdint>
#include <random>
#include <set>
#include <vector>

#include "dfdr/fisher.hpp"
#include "dfdr/oracle.hpp"

namespace testsupport {

inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Random discrete p-value distribution. When `superuniform` is set the
/// result satisfies F(u) <= u with final support point 1; otherwise only
/// F(0) = 0 is guaranteed.
inline dfdr::DiscretePValueDist random_dist(std::mt19937_64& rng, int max_atoms,
                                            bool superuniform) {
  const int k = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(max_atoms));
  std::set<double> points;
  while (static_cast<int>(points.size()) < k) {
    const double u = 0.01 + 0.99 * uniform01(rng);
    points.insert(u);
  }
  dfdr::DiscretePValueDist d;
  d.support.assign(points.begin(), points.end());
  d.cdf.resize(d.support.size());
  if (superuniform) {
    d.support.back() = 1.0;
    double next = 1.0;
    d.cdf.back() = 1.0;
    for (std::size_t i = d.support.size() - 1; i-- > 0;) {
      const double cap = std::min(d.support[i], next);
      d.cdf[i] = cap * (0.05 + 0.9 * uniform01(rng));
      next = d.cdf[i];
    }
  } else {
    double total = 0.0;
    std::vector<double> mass(d.support.size());
    for (auto& m : mass) {
      m = 0.05 + uniform01(rng);
      total += m;
    }
    double run = 0.0;
    for (std::size_t i = 0; i < mass.size(); ++i) {
      run += mass[i] / total;
      d.cdf[i] = run;
    }
    d.cdf.back() = 1.0;
  }
  return d;
}

inline dfdr::PointMassDist random_point_mass(std::mt19937_64& rng, int max_atoms,
                                             bool superuniform, bool true_null) {
  auto pm = dfdr::to_point_mass(random_dist(rng, max_atoms, superuniform));
  pm.true_null = true_null;
  return pm;
}

/// Draws one p-value vector from independent point-mass distributions.
inline std::vector<double> sample_outcome(const std::vector<dfdr::PointMassDist>& dists,
                                          std::mt19937_64& rng) {
  std::vector<double> pv(dists.size());
  for (std::size_t j = 0; j < dists.size(); ++j) {
    double u = uniform01(rng);
    std::size_t a = 0;
    while (a + 1 < dists[j].size() && u > dists[j].probs[a]) {
      u -= dists[j].probs[a];
      ++a;
    }
    pv[j] = dists[j].pvalues[a];
  }
  return pv;
}

// ---------------------------------------------------------------------------
// Integer-exact Fisher oracle for margins with row totals <= 30 (N <= 60):
// binomial coefficients fit in 64 bits and tail sums are exact rationals.
// ---------------------------------------------------------------------------

inline unsigned long long binom_exact(int n, int k) {
  static const auto table = [] {
    std::vector<std::vector<unsigned long long>> t(61);
    for (int i = 0; i <= 60; ++i) {
      t[i].resize(i + 1);
      t[i][0] = t[i][i] = 1;
      for (int j = 1; j < i; ++j) t[i][j] = t[i - 1][j - 1] + t[i - 1][j];
    }
    return t;
  }();
  if (k < 0 || k > n) return 0;
  return table[n][k];
}

struct ExactFisherTables {
  int lo = 0;
  std::vector<unsigned long long> weight;  // C(r1,x) * C(r2,c1-x)
  unsigned long long denom = 1;            // C(r1+r2, c1)
};

inline ExactFisherTables exact_fisher_tables(int r1, int r2, int c1) {
  ExactFisherTables t;
  t.lo = std::max(0, c1 - r2);
  const int hi = std::min(r1, c1);
  t.denom = binom_exact(r1 + r2, c1);
  for (int x = t.lo; x <= hi; ++x)
    t.weight.push_back(binom_exact(r1, x) * binom_exact(r2, c1 - x));
  return t;
}

/// One-sided upper-tail p-values by exact integer suffix sums.
inline std::vector<double> exact_one_sided(int r1, int r2, int c1) {
  const auto t = exact_fisher_tables(r1, r2, c1);
  std::vector<double> out(t.weight.size());
  unsigned long long run = 0;
  for (std::size_t i = t.weight.size(); i-- > 0;) {
    run += t.weight[i];
    out[i] = static_cast<double>(static_cast<long double>(run) /
                                 static_cast<long double>(t.denom));
  }
  return out;
}

/// Two-sided minimum-likelihood p-values with the same tie rule as the
/// implementation, evaluated in exact integer arithmetic:
/// include x' iff 10^7 * w(x') <= (10^7 + 1) * w(x).
inline std::vector<double> exact_two_sided(int r1, int r2, int c1) {
  const auto t = exact_fisher_tables(r1, r2, c1);
  const std::size_t k = t.weight.size();
  std::vector<double> out(k);
  for (std::size_t i = 0; i < k; ++i) {
    const unsigned __int128 cutoff =
        static_cast<unsigned __int128>(t.weight[i]) * 10000001u;
    unsigned long long sum = 0;
    std::size_t included = 0;
    for (std::size_t j = 0; j < k; ++j) {
      if (static_cast<unsigned __int128>(t.weight[j]) * 10000000u <= cutoff) {
        sum += t.weight[j];
        ++included;
      }
    }
    out[i] = included == k
                 ? 1.0
                 : static_cast<double>(static_cast<long double>(sum) /
                                       static_cast<long double>(t.denom));
  }
  return out;
}

}  // namespace testsupport
