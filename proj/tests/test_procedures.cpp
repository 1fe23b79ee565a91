#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "dfdr/procedures.hpp"
#include "dfdr/step_function.hpp"
#include "test_support.hpp"

using namespace dfdr;

namespace {

std::vector<DiscretePValueDist> counterexample_dists() {
  std::vector<DiscretePValueDist> d;
  d.push_back({{0.05, 1.0}, {0.05, 1.0}});
  d.push_back({{0.10, 1.0}, {0.025, 1.0}});
  d.push_back({{0.15, 1.0}, {0.025, 1.0}});
  d.push_back({{1.0}, {1.0}});
  return d;
}

StepFunction uniform_grid(std::size_t n, std::size_t points) {
  StepFunction g;
  g.n = n;
  g.jumps.reserve(points);
  g.values.reserve(points);
  for (std::size_t k = 1; k <= points; ++k) {
    const double x = static_cast<double>(k) / static_cast<double>(points);
    g.jumps.push_back(x);
    g.values.push_back(static_cast<double>(n) * x);
  }
  return g;
}

}  // namespace

TEST_CASE("BY constants") {
  CHECK(by_constants(1, 0.05) == std::vector<double>{0.05});
  const auto c = by_constants(4, 0.05);
  // harmonic sum 25/12: c_i = 0.006 i
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(c[i] == Catch::Approx(0.006 * static_cast<double>(i + 1)).epsilon(1e-12));
  // large-n harmonic approximation
  const double d2446 = harmonic_number(2446);
  CHECK(d2446 == Catch::Approx(std::log(2446.0) + 0.57721).epsilon(1e-3));
}

TEST_CASE("Sarkar constants") {
  CHECK(sarkar_constants(1, 0.05) == std::vector<double>{0.05});
  const auto c2 = sarkar_constants(2, 0.05);
  CHECK(c2[0] == Catch::Approx(0.0125).epsilon(1e-12));
  CHECK(c2[1] == Catch::Approx(0.0375).epsilon(1e-12));
  CHECK(sarkar_constants(4, 0.05)[3] == Catch::Approx(0.03125).epsilon(1e-12));
}

TEST_CASE("BH constants") {
  CHECK(bh_constants(1, 0.05) == std::vector<double>{0.05});
  CHECK(bh_constants(10, 0.05)[4] == Catch::Approx(0.025).epsilon(1e-12));
  // BH equals BY scaled back up by the harmonic sum
  const auto bh = bh_constants(4, 0.05);
  const auto by = by_constants(4, 0.05);
  const double d = harmonic_number(4);
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(bh[i] == Catch::Approx(by[i] * d).epsilon(1e-12));
}

TEST_CASE("shape rescaling constants") {
  const auto by = ProcedureSpec::by_shape(10, 0.05);
  CHECK(by.rescale == Catch::Approx(harmonic_number(10)).epsilon(1e-14));
  const auto sk = ProcedureSpec::sarkar_shape(10, 0.05);
  CHECK(sk.rescale == 20.0);  // telescoping gives exactly 2n
  const auto hy = ProcedureSpec::heyse(10, 0.05);
  CHECK(hy.rescale == 1.0);
  CHECK_THROWS_AS(ProcedureSpec::custom({2.0, 1.0}, 0.05), std::domain_error);
}

TEST_CASE("discrete constants recover the continuous ones on a uniform grid") {
  const std::size_t n = 20, points = 100000;
  const auto g = uniform_grid(n, points);
  const double step = 1.0 / static_cast<double>(points);

  const auto dby = discrete_constants(g, ProcedureSpec::by_shape(n, 0.05));
  const auto by = by_constants(n, 0.05);
  const auto dsk = discrete_constants(g, ProcedureSpec::sarkar_shape(n, 0.05));
  const auto sk = sarkar_constants(n, 0.05);
  for (std::size_t i = 0; i < n; ++i) {
    CHECK(dby[i] <= by[i] + 1e-12);
    CHECK(by[i] - dby[i] <= step + 1e-12);
    CHECK(dsk[i] <= sk[i] + 1e-12);
    CHECK(sk[i] - dsk[i] <= step + 1e-12);
  }
}

TEST_CASE("discrete constants on the counterexample G") {
  const auto g = aggregate(counterexample_dists());
  const auto c = discrete_constants(g, ProcedureSpec::heyse(4, 0.05));
  CHECK(c == std::vector<double>{0.05, 0.15, 0.15, 0.15});
  // mass above every target: all constants zero
  const auto tiny = discrete_constants(g, ProcedureSpec::heyse(4, 1e-9));
  CHECK(tiny == std::vector<double>{0.0, 0.0, 0.0, 0.0});
  CHECK_THROWS_AS(discrete_constants(g, ProcedureSpec::heyse(3, 0.05)),
                  std::domain_error);
}

TEST_CASE("step-up basics") {
  const auto out = step_up({0.01, 0.5}, {0.02, 0.04});
  CHECK(out.rejection_count == 1);
  CHECK(out.rejected == std::vector<bool>{true, false});

  const auto none = step_up({1.0, 1.0, 1.0}, {0.1, 0.2, 0.3});
  CHECK(none.rejection_count == 0);

  CHECK_THROWS_AS(step_up({0.5}, {0.1, 0.2}), std::domain_error);
  CHECK_THROWS_AS(step_up({0.5, 0.1}, {0.2, 0.1}), std::domain_error);
  CHECK_THROWS_AS(step_up({1.5}, {0.5}), std::domain_error);
}

TEST_CASE("step-up on the counterexample row") {
  const auto g = aggregate(counterexample_dists());
  const auto c = discrete_constants(g, ProcedureSpec::heyse(4, 0.05));
  const auto out = step_up({0.05, 0.10, 0.15, 1.0}, c);
  CHECK(out.rejection_count == 3);
}

TEST_CASE("step-down basics") {
  const auto out = step_down({0.01, 0.5}, {0.02, 0.04});
  CHECK(out.rejection_count == 1);
  // first hurdle fails
  const auto none = step_down({0.03, 0.035}, {0.02, 0.04});
  CHECK(none.rejection_count == 0);
}

TEST_CASE("step-down rejections are a subset of step-up rejections") {
  std::mt19937_64 rng(23);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 1 + rng() % 8;
    std::vector<double> pv(n), c(n);
    for (auto& p : pv) p = testsupport::uniform01(rng);
    for (auto& x : c) x = testsupport::uniform01(rng);
    std::sort(c.begin(), c.end());
    const auto up = step_up(pv, c);
    const auto down = step_down(pv, c);
    CHECK(down.rejection_count <= up.rejection_count);
    for (std::size_t i = 0; i < n; ++i)
      if (down.rejected[i]) CHECK(up.rejected[i]);
  }
}

TEST_CASE("adjusted values reduce to the classical ones under a uniform G") {
  std::mt19937_64 rng(29);
  const std::size_t n = 12;
  const auto g = uniform_grid(n, 1u << 20);
  std::vector<double> pv(n);
  for (auto& p : pv) p = std::ceil(testsupport::uniform01(rng) * (1 << 20)) /
                         static_cast<double>(1 << 20);
  const auto spec = ProcedureSpec::by_shape(n, 0.05);
  const auto discrete = adjusted_shape(g, spec, pv);
  const auto classical = adjusted_continuous(spec, pv);
  for (std::size_t i = 0; i < n; ++i)
    CHECK(discrete[i] == Catch::Approx(classical[i]).epsilon(1e-9));
}

TEST_CASE("single hypothesis adjustment") {
  StepFunction g;
  g.n = 1;
  g.jumps = {0.3, 1.0};
  g.values = {0.2, 1.0};
  const auto adj = adjusted_shape(g, ProcedureSpec::by_shape(1, 0.05), {0.3});
  CHECK(adj == std::vector<double>{0.2});  // D = 1, G(pv) = 0.2
}

TEST_CASE("Heyse adjustment reproduces the counterexample rows") {
  const auto g = aggregate(counterexample_dists());
  // all three small p-values observed
  const auto row1 = adjusted_heyse(g, {0.05, 0.10, 0.15, 1.0});
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(row1[i] == Catch::Approx(0.10 / 3.0).epsilon(1e-12));
  CHECK(row1[3] == 1.0);
  // first hypothesis at 1: sorted adjusted 0.05, 0.05, 1, 1
  const auto row2 = adjusted_heyse(g, {1.0, 0.10, 0.15, 1.0});
  CHECK(row2[1] == Catch::Approx(0.05).epsilon(1e-12));
  CHECK(row2[2] == Catch::Approx(0.05).epsilon(1e-12));
  CHECK(row2[0] == 1.0);
  CHECK(row2[3] == 1.0);
  // everything at 1
  const auto row8 = adjusted_heyse(g, {1.0, 1.0, 1.0, 1.0});
  CHECK(row8 == std::vector<double>(4, 1.0));
}

TEST_CASE("adjusted thresholding equals the discrete step-up") {
  std::mt19937_64 rng(31);
  for (int rep = 0; rep < 300; ++rep) {
    const std::size_t n = 1 + rng() % 8;
    std::vector<PointMassDist> dists;
    for (std::size_t j = 0; j < n; ++j)
      dists.push_back(testsupport::random_point_mass(rng, 5, true, true));
    const auto g = aggregate(dists);
    const auto spec = rep % 2 == 0 ? ProcedureSpec::by_shape(n, 0.02 + 0.2 * testsupport::uniform01(rng))
                                   : ProcedureSpec::sarkar_shape(n, 0.02 + 0.2 * testsupport::uniform01(rng));
    const auto pv = testsupport::sample_outcome(dists, rng);
    const auto outcome = step_up(pv, discrete_constants(g, spec));
    const auto adj = adjusted_shape(g, spec, pv);
    for (std::size_t i = 0; i < n; ++i)
      CHECK(outcome.rejected[i] == (adj[i] <= spec.alpha));
  }
}

TEST_CASE("adjusted sequences are monotone along the sorted order") {
  std::mt19937_64 rng(37);
  for (int rep = 0; rep < 50; ++rep) {
    const std::size_t n = 2 + rng() % 7;
    std::vector<PointMassDist> dists;
    for (std::size_t j = 0; j < n; ++j)
      dists.push_back(testsupport::random_point_mass(rng, 4, true, true));
    const auto g = aggregate(dists);
    const auto pv = testsupport::sample_outcome(dists, rng);
    for (const auto& adj :
         {adjusted_shape(g, ProcedureSpec::by_shape(n, 0.05), pv),
          adjusted_heyse(g, pv)}) {
      auto s = detail::sort_pvalues(pv);
      double prev = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double cur = adj[s.order[i]];
        CHECK(cur >= prev - 1e-15);
        CHECK(cur >= 0.0);
        CHECK(cur <= 1.0);
        prev = cur;
      }
    }
  }
}

TEST_CASE("raising alpha never removes a rejection") {
  std::mt19937_64 rng(41);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 1 + rng() % 6;
    std::vector<PointMassDist> dists;
    for (std::size_t j = 0; j < n; ++j)
      dists.push_back(testsupport::random_point_mass(rng, 4, true, true));
    const auto g = aggregate(dists);
    const auto pv = testsupport::sample_outcome(dists, rng);
    const double a1 = 0.02 + 0.1 * testsupport::uniform01(rng);
    const double a2 = a1 + 0.2 * testsupport::uniform01(rng);
    const auto r1 = step_up(pv, discrete_constants(g, ProcedureSpec::by_shape(n, a1)));
    const auto r2 = step_up(pv, discrete_constants(g, ProcedureSpec::by_shape(n, a2)));
    for (std::size_t i = 0; i < n; ++i)
      if (r1.rejected[i]) CHECK(r2.rejected[i]);
  }
}

TEST_CASE("adjusted p-values are permutation equivariant") {
  std::mt19937_64 rng(43);
  const std::size_t n = 7;
  std::vector<PointMassDist> dists;
  for (std::size_t j = 0; j < n; ++j)
    dists.push_back(testsupport::random_point_mass(rng, 4, true, true));
  const auto g = aggregate(dists);
  const auto pv = testsupport::sample_outcome(dists, rng);
  std::vector<std::size_t> perm(n);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<double> pv_perm(n);
  for (std::size_t i = 0; i < n; ++i) pv_perm[i] = pv[perm[i]];
  for (const auto which : {0, 1}) {
    const auto base = which == 0
                          ? adjusted_shape(g, ProcedureSpec::by_shape(n, 0.05), pv)
                          : adjusted_heyse(g, pv);
    const auto permuted =
        which == 0 ? adjusted_shape(g, ProcedureSpec::by_shape(n, 0.05), pv_perm)
                   : adjusted_heyse(g, pv_perm);
    for (std::size_t i = 0; i < n; ++i) CHECK(permuted[i] == base[perm[i]]);
  }
}

TEST_CASE("appending a point mass at 1 leaves sub-1 Heyse adjustments alone") {
  std::mt19937_64 rng(47);
  for (int rep = 0; rep < 100; ++rep) {
    const std::size_t n = 2 + rng() % 5;
    std::vector<PointMassDist> dists;
    for (std::size_t j = 0; j < n; ++j)
      dists.push_back(testsupport::random_point_mass(rng, 4, true, true));
    const auto g = aggregate(dists);
    auto pv = testsupport::sample_outcome(dists, rng);
    pv.back() = 1.0;  // anchor: at least one observed p-value equals 1
    const auto base = adjusted_heyse(g, pv);

    auto extended = dists;
    extended.push_back(PointMassDist{{1.0}, {1.0}, true});
    const auto g2 = aggregate(extended);
    auto pv2 = pv;
    pv2.push_back(1.0);
    const auto grown = adjusted_heyse(g2, pv2);
    for (std::size_t i = 0; i < n; ++i)
      if (pv[i] < 1.0) CHECK(grown[i] == base[i]);
  }
}

TEST_CASE("fdr bounds") {
  SECTION("zero constants give a zero bound") {
    std::mt19937_64 rng(53);
    std::vector<DiscretePValueDist> dists;
    for (int j = 0; j < 4; ++j) dists.push_back(testsupport::random_dist(rng, 4, true));
    const auto b = fdr_bound(dists, std::vector<double>(4, 0.0));
    CHECK(b.true_null == 0.0);
    CHECK(b.aggregate == 0.0);
  }
  SECTION("single hypothesis with c = 1 telescopes to F(1) = 1") {
    std::mt19937_64 rng(59);
    const auto d = testsupport::random_dist(rng, 4, true);
    const auto b = fdr_bound({d}, std::vector<double>{1.0});
    CHECK(b.true_null == Catch::Approx(1.0).margin(1e-12));
    CHECK(b.aggregate == Catch::Approx(1.0).margin(1e-12));
  }
  SECTION("discrete constants keep the bound at or below alpha") {
    std::mt19937_64 rng(61);
    for (int rep = 0; rep < 100; ++rep) {
      const std::size_t n = 1 + rng() % 6;
      std::vector<DiscretePValueDist> dists;
      for (std::size_t j = 0; j < n; ++j)
        dists.push_back(testsupport::random_dist(rng, 4, false));
      const auto g = aggregate(dists);
      const double alpha = 0.02 + 0.2 * testsupport::uniform01(rng);
      const auto c = discrete_constants(g, ProcedureSpec::by_shape(n, alpha));
      const auto b = fdr_bound(dists, c);
      CHECK(b.true_null <= b.aggregate + 1e-12);
      CHECK(b.aggregate <= alpha + 1e-12);
    }
  }
  SECTION("unsorted constants rejected") {
    std::mt19937_64 rng(67);
    const auto d = testsupport::random_dist(rng, 4, true);
    CHECK_THROWS_AS(fdr_bound({d, d}, std::vector<double>{0.5, 0.2}),
                    std::domain_error);
  }
}

TEST_CASE("method helpers") {
  CHECK(parse_method("dby") == Method::dby);
  CHECK(parse_method("Heyse") == Method::dbh);
  CHECK_THROWS_AS(parse_method("nope"), std::domain_error);
  CHECK(is_discrete(Method::dbh));
  CHECK_FALSE(is_discrete(Method::bh));
  CHECK(guarantees_fdr_under_dependence(Method::dby));
  CHECK_FALSE(guarantees_fdr_under_dependence(Method::dbh));
  CHECK_FALSE(guarantees_fdr_under_dependence(Method::bh));
}
