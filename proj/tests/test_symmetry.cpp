#include <catch_amalgamated.hpp>

#include <algorithm>
#include <random>

#include "rdepth/simgen.hpp"
#include "rdepth/symmetry.hpp"

using namespace rdepth;

namespace {

CurveSet constants(std::vector<double> levels, std::size_t G = 3) {
  std::vector<Curve> rows;
  for (double v : levels) rows.emplace_back(G, v);
  std::vector<double> g(G);
  for (std::size_t i = 0; i < G; ++i) g[i] = static_cast<double>(i);
  return CurveSet::from_rows(Grid(g), rows);
}

CurveSet random_set(std::mt19937_64& eng, std::size_t N, std::size_t G) {
  std::normal_distribution<double> nd(0, 1);
  std::vector<double> g(G), v(N * G);
  for (std::size_t i = 0; i < G; ++i) g[i] = static_cast<double>(i + 1);
  for (auto& x : v) x = nd(eng);
  return CurveSet(Grid(g), v);
}

}  // namespace

TEST_CASE("hset_mass examples") {
  auto set = constants({0, 1, 2, 3, 4});
  CurveMetric sup(MetricKind::grid_sup, set.grid());
  auto all = all_indices(5);
  CHECK(hset_mass(set, sup, 2, 0, all) == Catch::Approx(3.0 / 5.0));
  CHECK(hset_mass(set, sup, 1, 4, all) == Catch::Approx(2.0 / 5.0));
  for (Index x = 0; x < 5; ++x) CHECK(hset_mass(set, sup, x, x, all) == 1.0);
  CHECK_THROWS(hset_mass(set, sup, 0, 1, IndexList{}));
}

TEST_CASE("hset_mass of z = x is 1 on random sets") {
  std::mt19937_64 eng(3);
  for (int rep = 0; rep < 30; ++rep) {
    auto set = random_set(eng, 7, 4);
    CurveMetric l2(MetricKind::grid_l2_unweighted, set.grid());
    for (Index x = 0; x < set.size(); ++x) CHECK(hset_mass(set, l2, x, x, all_indices(set.size())) == 1.0);
  }
}

TEST_CASE("theta_set examples") {
  auto set = constants({0, 1, 2, 3, 4});
  CurveMetric sup(MetricKind::grid_sup, set.grid());
  auto all = all_indices(5);
  CHECK(theta_set(set, sup, all, all, all, 0.5) == IndexList{2});
  CHECK(theta_set(set, sup, all, all, all, 0.0) == all);

  auto one = constants({7});
  CurveMetric sup1(MetricKind::grid_sup, one.grid());
  CHECK(theta_set(one, sup1, IndexList{0}, IndexList{0}, IndexList{0}, 0.5) == IndexList{0});
  CHECK_THROWS(theta_set(set, sup, IndexList{}, all, all, 0.5));
}

TEST_CASE("theta_set is monotone in threshold and in probes") {
  std::mt19937_64 eng(8);
  for (int rep = 0; rep < 40; ++rep) {
    auto set = random_set(eng, 8, 3);
    CurveMetric l2(MetricKind::grid_l2_unweighted, set.grid());
    auto all = all_indices(8);
    auto subset_of = [](IndexList a, IndexList b) {
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      return std::includes(b.begin(), b.end(), a.begin(), a.end());
    };
    IndexList prev = all;
    for (double thr : {0.0, 0.25, 0.375, 0.5, 0.625, 0.75}) {
      auto cur = theta_set(set, l2, all, all, all, thr);
      CHECK(subset_of(cur, prev));
      prev = cur;
    }
    IndexList probes;
    prev = all;
    for (Index p : all) {
      probes.push_back(p);
      auto cur = theta_set(set, l2, all, probes, all, 0.5);
      CHECK(subset_of(cur, prev));
      prev = cur;
    }
  }
}

TEST_CASE("random_center examples") {
  SECTION("identical curves") {
    auto set = constants({2, 2, 2, 2});
    auto sol = random_center(set, MetricKind::grid_l2_unweighted, {3, 2, 1});
    CHECK(sol.delta == 0.0);
    CHECK(std::find(sol.center_indices.begin(), sol.center_indices.end(), sol.selected) != sol.center_indices.end());
  }
  SECTION("constants 0..4, full") {
    auto set = constants({0, 1, 2, 3, 4});
    auto sol = random_center(set, MetricKind::grid_sup, {5, 5, 77});
    CHECK(sol.selected == 2);
    CHECK(sol.delta == 0.0);
    CHECK(sol.center_indices == IndexList{2});
  }
  SECTION("two curves") {
    auto set = constants({0, 1});
    auto sol = random_center(set, MetricKind::grid_sup, {2, 2, 5});
    CHECK(sol.delta == 0.0);
    CHECK(sol.center_indices == IndexList{0, 1});
    CHECK(sol.selected == 0);
  }
  SECTION("echoes its inputs") {
    auto set = constants({0, 1, 2, 3, 4, 5, 6});
    auto sol = random_center(set, MetricKind::grid_sup, {4, 3, 9});
    CHECK(sol.n_used == 4);
    CHECK(sol.m_used == 3);
    CHECK(sol.seed == 9);
    CHECK(sol.mass_indices.size() == 4);
    CHECK(sol.probe_indices.size() == 3);
    CHECK(sol.metric == MetricKind::grid_sup);
  }
  SECTION("invalid spec") {
    auto set = constants({0, 1});
    CHECK_THROWS_AS(random_center(set, MetricKind::grid_sup, {3, 1, 0}), std::invalid_argument);
  }
}

TEST_CASE("random_center invariants on random sets") {
  std::mt19937_64 eng(17);
  for (int rep = 0; rep < 100; ++rep) {
    auto set = random_set(eng, 12, 4);
    CurveMetric l2(MetricKind::grid_l2_unweighted, set.grid());
    const std::size_t n = 1 + rep % 12, m = 1 + (rep * 5) % 12;
    auto sol = random_center(set, l2, {n, m, static_cast<std::uint64_t>(rep)});
    REQUIRE_FALSE(sol.center_indices.empty());
    CHECK(std::is_sorted(sol.center_indices.begin(), sol.center_indices.end()));
    CHECK(std::binary_search(sol.center_indices.begin(), sol.center_indices.end(), sol.selected));
    CHECK(sol.delta >= 0.0);
    CHECK(sol.delta <= 0.5);
    // delta = 0 iff the half-mass condition holds at every probe for each center
    for (Index z : sol.center_indices) {
      double worst = 1.0;
      for (Index x : sol.probe_indices) worst = std::min(worst, hset_mass(set, l2, z, x, sol.mass_indices));
      if (sol.delta == 0.0)
        CHECK(worst >= 0.5);
      else
        CHECK(worst == Catch::Approx(0.5 - sol.delta));
    }
  }
}

TEST_CASE("random_center does not depend on thread count") {
  std::mt19937_64 eng(23);
  auto set = random_set(eng, 300, 6);
  CurveMetric l2(MetricKind::grid_l2_unweighted, set.grid());
  set_thread_count(1);
  auto a = random_center(set, l2, {40, 30, 5}, {true});
  set_thread_count(7);
  auto b = random_center(set, l2, {40, 30, 5}, {true});
  set_thread_count(0);
  CHECK(a.center_indices == b.center_indices);
  CHECK(a.selected == b.selected);
  CHECK(a.delta == b.delta);
}

TEST_CASE("noiseless family: exact center is the median curve(s)") {
  for (std::size_t N : {10u, 11u, 30u, 31u}) {
    SimConfig cfg;
    cfg.N = N;
    auto set = mean_curves(cfg);
    auto sol = random_center(set, MetricKind::grid_l2_unweighted, {N, N, 1});
    auto truth = true_deepest_indices(N);
    CHECK(std::find(truth.begin(), truth.end(), sol.selected + 1) != truth.end());
    for (Index c : sol.center_indices) CHECK(std::find(truth.begin(), truth.end(), c + 1) != truth.end());
  }
}

TEST_CASE("convergence_probe examples") {
  std::mt19937_64 eng(2);
  auto set = random_set(eng, 20, 3);
  CurveMetric l2(MetricKind::grid_l2_unweighted, set.grid());
  CHECK(convergence_probe(set, l2, {5, 5, 3}, {5, 5, 3}) == 0.0);
  auto same = constants({1, 1, 1, 1});
  CurveMetric l2s(MetricKind::grid_l2_unweighted, same.grid());
  CHECK(convergence_probe(same, l2s, {2, 2, 1}, {3, 3, 2}) == 0.0);
  SimConfig cfg;
  cfg.N = 21;
  auto fam = mean_curves(cfg);
  CurveMetric l2f(MetricKind::grid_l2_unweighted, fam.grid());
  CHECK(convergence_probe(fam, l2f, {21, 21, 1}, {21, 21, 2}) == 0.0);
}

TEST_CASE("delta shrinks on average as n grows") {
  std::mt19937_64 eng(31);
  auto set = random_set(eng, 200, 5);
  CurveMetric l2(MetricKind::grid_l2_unweighted, set.grid());
  auto mean_delta = [&](std::size_t n) {
    double s = 0;
    for (std::uint64_t seed = 0; seed < 30; ++seed) s += random_center(set, l2, {n, 50, seed}).delta;
    return s / 30;
  };
  const double d5 = mean_delta(5), d50 = mean_delta(50), d200 = mean_delta(200);
  CHECK(d50 <= d5);
  CHECK(d200 <= d50);
}
