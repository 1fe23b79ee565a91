#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "dfdr/oracle.hpp"
#include "dfdr/step_function.hpp"
#include "test_support.hpp"

using namespace dfdr;

namespace {

// The four point-mass null distributions of the DBH counterexample.
std::vector<DiscretePValueDist> counterexample_dists() {
  std::vector<DiscretePValueDist> d;
  d.push_back({{0.05, 1.0}, {0.05, 1.0}});
  d.push_back({{0.10, 1.0}, {0.025, 1.0}});
  d.push_back({{0.15, 1.0}, {0.025, 1.0}});
  d.push_back({{1.0}, {1.0}});
  return d;
}

DiscretePValueDist uniform_grid_dist(std::size_t points) {
  DiscretePValueDist d;
  for (std::size_t k = 1; k <= points; ++k) {
    const double u = static_cast<double>(k) / static_cast<double>(points);
    d.support.push_back(u);
    d.cdf.push_back(u);
  }
  return d;
}

}  // namespace

TEST_CASE("aggregate of the counterexample point masses") {
  const auto g = aggregate(counterexample_dists());
  CHECK(g.n == 4);
  CHECK(g(0.05) == Catch::Approx(0.05).margin(1e-15));
  CHECK(g(0.10) == Catch::Approx(0.075).margin(1e-15));
  CHECK(g(0.15) == Catch::Approx(0.10).margin(1e-15));
  CHECK(g(0.12) == Catch::Approx(0.075).margin(1e-15));  // between jumps
  CHECK(g(1.0) == 4.0);
  CHECK(g(0.0) == 0.0);
  CHECK(g(0.049) == 0.0);  // below the first jump
}

TEST_CASE("uniform grids aggregate to the uniform reference") {
  std::vector<DiscretePValueDist> dists(5, uniform_grid_dist(100));
  const auto g = aggregate(dists);
  for (std::size_t k = 0; k < g.jumps.size(); ++k)
    CHECK(g.values[k] == Catch::Approx(g.gunif(g.jumps[k])).epsilon(1e-12));
}

TEST_CASE("single distribution aggregates to its own cdf") {
  std::mt19937_64 rng(3);
  const auto d = testsupport::random_dist(rng, 6, true);
  const auto g = aggregate({d});
  REQUIRE(g.jumps == d.support);
  for (std::size_t i = 0; i < d.size(); ++i)
    CHECK(g.values[i] == Catch::Approx(d.cdf[i]).margin(1e-15));
}

TEST_CASE("empty aggregate rejected") {
  CHECK_THROWS_AS(aggregate(std::vector<DiscretePValueDist>{}), std::domain_error);
}

TEST_CASE("evaluation domain checked") {
  const auto g = aggregate(counterexample_dists());
  CHECK_THROWS_AS(g(-0.1), std::domain_error);
  CHECK_THROWS_AS(g(1.1), std::domain_error);
}

TEST_CASE("aggregate is order independent") {
  std::mt19937_64 rng(11);
  std::vector<DiscretePValueDist> dists;
  for (int i = 0; i < 40; ++i) dists.push_back(testsupport::random_dist(rng, 5, true));
  const auto g1 = aggregate(dists);
  std::shuffle(dists.begin(), dists.end(), rng);
  const auto g2 = aggregate(dists);
  const auto tol = static_cast<double>(dists.size()) * 1e-12;
  for (int rep = 0; rep < 200; ++rep) {
    const double x = testsupport::uniform01(rng);
    CHECK(g1(x) == Catch::Approx(g2(x)).margin(tol));
  }
}

TEST_CASE("evaluate agrees with naive per-distribution summation") {
  std::mt19937_64 rng(13);
  std::vector<DiscretePValueDist> dists;
  for (int i = 0; i < 25; ++i) dists.push_back(testsupport::random_dist(rng, 5, false));
  const auto g = aggregate(dists);
  for (int rep = 0; rep < 300; ++rep) {
    const double x = testsupport::uniform01(rng);
    double naive = 0.0;
    for (const auto& d : dists) naive += d(x);
    CHECK(g(x) == Catch::Approx(naive).margin(25 * 1e-12));
  }
}

TEST_CASE("superuniform inputs keep G below the uniform reference") {
  std::mt19937_64 rng(17);
  std::vector<DiscretePValueDist> dists;
  for (int i = 0; i < 30; ++i) dists.push_back(testsupport::random_dist(rng, 5, true));
  const auto g = aggregate(dists);
  for (int k = 0; k <= 1000; ++k) {
    const double x = static_cast<double>(k) / 1000.0;
    CHECK(g(x) <= g.gunif(x) + 1e-9);
  }
}

TEST_CASE("terminal value is the hypothesis count") {
  std::mt19937_64 rng(19);
  std::vector<DiscretePValueDist> dists;
  for (int i = 0; i < 1000; ++i) dists.push_back(testsupport::random_dist(rng, 4, true));
  const auto g = aggregate(dists);
  CHECK(g(1.0) == 1000.0);
  CHECK(std::abs(g.values.back() - 1000.0) <= 1000.0 * 1e-9);
}

TEST_CASE("ratio grid") {
  std::vector<DiscretePValueDist> dists(3, uniform_grid_dist(100));
  const auto g = aggregate(dists);
  const auto rows = ratio_grid(g, 0.0, 1.0, 101);
  REQUIRE(rows.size() == 101);
  CHECK(rows.front().x == 0.0);
  CHECK(rows.back().x == 1.0);
  CHECK(rows.back().g == 3.0);
  // grid points align with the jumps, so the ratio is exactly 1 beyond the
  // first jump
  for (std::size_t k = 1; k < rows.size(); ++k)
    CHECK(rows[k].g == Catch::Approx(rows[k].gunif).epsilon(1e-12));
}

TEST_CASE("ratio grid is zero below the first jump") {
  const auto g = aggregate(counterexample_dists());
  const auto rows = ratio_grid(g, 0.0, 0.049, 50);
  for (const auto& r : rows) CHECK(r.g == 0.0);
}

TEST_CASE("ratio grid argument validation") {
  const auto g = aggregate(counterexample_dists());
  CHECK_THROWS_AS(ratio_grid(g, 0.5, 0.5, 10), std::domain_error);
  CHECK_THROWS_AS(ratio_grid(g, -0.1, 0.5, 10), std::domain_error);
  CHECK_THROWS_AS(ratio_grid(g, 0.0, 1.5, 10), std::domain_error);
  CHECK_THROWS_AS(ratio_grid(g, 0.0, 1.0, 1), std::domain_error);
}
