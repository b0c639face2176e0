#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numeric>
#include <random>

#include "eigopt/adapt.hpp"
#include "eigopt/csv.hpp"

using namespace eigopt;
using Eigen::VectorXd;

namespace {

IndicatorField make_field(std::vector<double> eta) {
  IndicatorField f;
  f.per_element = Eigen::Map<VectorXd>(eta.data(), eta.size());
  f.global = std::sqrt(f.per_element.squaredNorm());
  return f;
}

RunConfig small_config() {
  RunConfig cfg = parse_config(R"(
[domain]
kind = "unit_square"
resolution = 4

[objective]
indices = [1]
weights = [1.0]
epsilon = 5e-2
gamma = 5e-3
alpha = 10.21
volume_fraction = 0.5

[afem]
K = 3
theta = [0.8, 0.1]

[inner]
N = 3
M = 3
mu0 = -5.0
beta0 = 100.0
gamma_tilde = 20.0
xi = 0.9
zeta = 2.0

[init]
kind = "random"
seed = 3
)");
  return cfg;
}

}  // namespace

TEST_CASE("dorfler marking picks the minimal prefix") {
  auto f = make_field({4.0, 3.0, 2.0, 1.0});  // eta^2 = 16, 9, 4, 1
  auto m = dorfler_mark(f, 0.7);              // need >= 0.49 * 30 = 14.7
  REQUIRE(m.size() == 1);
  CHECK(m[0] == 0);

  auto all = dorfler_mark(f, 1.0);
  CHECK(all == std::vector<int>{0, 1, 2, 3});

  auto zero = dorfler_mark(make_field({0.0, 0.0}), 0.5);
  CHECK(zero.empty());

  auto with_zero = dorfler_mark(make_field({0.0, 2.0, 0.0}), 1.0);
  CHECK(with_zero == std::vector<int>{1});

  CHECK_THROWS_AS(dorfler_mark(f, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(dorfler_mark(f, 1.5), std::invalid_argument);
}

TEST_CASE("dorfler marking contains the argmax and ties break by index") {
  auto f = make_field({2.0, 5.0, 5.0, 1.0});
  auto m = dorfler_mark(f, 0.5);
  CHECK(std::find(m.begin(), m.end(), 1) != m.end());  // first argmax by index
  REQUIRE(!m.empty());
  CHECK(m[0] == 1);
}

TEST_CASE("greedy dorfler equals the brute-force minimal subset") {
  std::mt19937 rng(2024);
  for (int trial = 0; trial < 30; ++trial) {
    int n = 5 + static_cast<int>(rng() % 8);  // up to 12 elements
    std::vector<double> eta(n);
    for (auto& e : eta) e = (rng() >> 11) * (1.0 / (1ull << 53)) * 3.0;
    double theta = 0.3 + 0.65 * ((rng() >> 11) * (1.0 / (1ull << 53)));
    auto f = make_field(eta);
    auto greedy = dorfler_mark(f, theta);

    double total = 0.0;
    for (double e : eta) total += e * e;
    double target = theta * theta * total;
    int best = n + 1;
    for (int mask = 0; mask < (1 << n); ++mask) {
      double s = 0.0;
      for (int i = 0; i < n; ++i)
        if (mask & (1 << i)) s += eta[i] * eta[i];
      if (s >= target) best = std::min(best, __builtin_popcount(mask));
    }
    double gs = 0.0;
    for (int t : greedy) gs += eta[t] * eta[t];
    CHECK(gs >= target - 1e-12 * total);
    CHECK(static_cast<int>(greedy.size()) == best);
  }
}

TEST_CASE("union marking combines per-estimator sets") {
  auto f = make_field({4.0, 3.0, 2.0, 1.0});
  auto ms = mark_union({f, f}, {0.7, 0.7});
  CHECK(ms.union_set == ms.per_estimator[0]);

  auto zero = make_field({0.0, 0.0, 0.0, 0.0});
  auto ms2 = mark_union({f, zero}, {0.7, 0.7});
  CHECK(ms2.union_set == ms2.per_estimator[0]);
  CHECK(ms2.per_estimator[1].empty());

  auto a = make_field({9.0, 0.0, 0.0, 0.0});
  auto b = make_field({0.0, 0.0, 0.0, 9.0});
  auto ms3 = mark_union({a, b}, {0.5, 0.5});
  CHECK(ms3.union_set.size() == ms3.per_estimator[0].size() + ms3.per_estimator[1].size());

  auto other = make_field({1.0, 2.0});
  CHECK_THROWS_AS(mark_union({f, other}, {0.5, 0.5}), std::invalid_argument);
}

TEST_CASE("a single-level loop does one fixed-mesh solve") {
  RunConfig cfg = small_config();
  cfg.afem.K = 1;
  AdaptiveRun run = adaptive_loop(cfg);
  REQUIRE(run.levels.size() == 1);
  CHECK(run.history.size() == 3);
  CHECK(run.levels[0].phi.minCoeff() >= 0.0);
  CHECK(run.levels[0].phi.maxCoeff() <= 1.0);
}

TEST_CASE("adaptive meshes are nested with strictly increasing vertex counts") {
  RunConfig cfg = small_config();
  AdaptiveRun run = adaptive_loop(cfg);
  REQUIRE(run.levels.size() == 3);
  for (size_t k = 0; k + 1 < run.levels.size(); ++k) {
    CHECK(run.levels[k + 1].mesh.num_vertices() > run.levels[k].mesh.num_vertices());
    validate_mesh(run.levels[k].mesh);
  }
}

TEST_CASE("logged marked sets satisfy the marking contract") {
  RunConfig cfg = small_config();
  AdaptiveRun run = adaptive_loop(cfg);
  for (const auto& lv : run.levels) {
    REQUIRE(lv.marks.per_estimator.size() == lv.indicators.size());
    for (size_t j = 0; j < lv.indicators.size(); ++j) {
      const auto& ind = lv.indicators[j];
      const auto& mj = lv.marks.per_estimator[j];
      double total = ind.per_element.squaredNorm();
      if (total == 0.0) {
        CHECK(mj.empty());
        continue;
      }
      // argmax containment
      int argmax = 0;
      for (int t = 1; t < ind.per_element.size(); ++t)
        if (ind.per_element[t] > ind.per_element[argmax]) argmax = t;
      CHECK(std::find(mj.begin(), mj.end(), argmax) != mj.end());
      // bulk condition
      double s = 0.0;
      for (int t : mj) s += ind.per_element[t] * ind.per_element[t];
      CHECK(s >= lv.marks.thetas[j] * lv.marks.thetas[j] * total - 1e-12 * total);
    }
  }
}

TEST_CASE("warm start preserves the box and the design volume across meshes") {
  RunConfig cfg = small_config();
  AdaptiveRun run = adaptive_loop(cfg);
  for (size_t k = 0; k + 1 < run.levels.size(); ++k) {
    const auto& lv = run.levels[k];
    double V = cfg.objective.volume_fraction * lv.mesh.total_area();
    double g_final = lumped_mass(lv.mesh).dot(lv.phi) - V;
    // first recorded iterate on the next mesh sees the prolongated design
    const HistoryRow* first_next = nullptr;
    for (const auto& row : run.history)
      if (row.mesh_k == static_cast<int>(k + 1)) {
        first_next = &row;
        break;
      }
    REQUIRE(first_next != nullptr);
    CHECK(first_next->absG == Catch::Approx(std::abs(g_final)).margin(1e-12));
  }
}

TEST_CASE("runs are deterministic for a fixed seed") {
  RunConfig cfg = small_config();
  AdaptiveRun a = adaptive_loop(cfg);
  AdaptiveRun b = adaptive_loop(cfg);
  CHECK(convergence_csv(a, cfg) == convergence_csv(b, cfg));

  cfg.init.seed = 4;
  AdaptiveRun c = adaptive_loop(cfg);
  CHECK(convergence_csv(a, cfg) != convergence_csv(c, cfg));
}

TEST_CASE("uniform loop with a budget below the initial mesh does not refine") {
  RunConfig cfg = small_config();
  cfg.afem.vertex_budget = 10;  // initial mesh has 25 vertices
  AdaptiveRun run = uniform_loop(cfg);
  CHECK(run.levels.size() == 1);
}

TEST_CASE("uniform loop quadruples elements and stops at the budget") {
  RunConfig cfg = small_config();
  cfg.afem.K = 5;
  cfg.afem.vertex_budget = 300;
  AdaptiveRun run = uniform_loop(cfg);
  REQUIRE(run.levels.size() >= 2);
  for (size_t k = 0; k + 1 < run.levels.size(); ++k)
    CHECK(run.levels[k + 1].mesh.num_elements() == 4 * run.levels[k].mesh.num_elements());
  CHECK(run.levels.back().mesh.num_vertices() <= 300);
  for (const auto& lv : run.levels) CHECK(lv.marks.union_set.empty());
}

TEST_CASE("adaptive and uniform runs share the mesh-0 history for one seed") {
  RunConfig cfg = small_config();
  AdaptiveRun a = adaptive_loop(cfg);
  AdaptiveRun u = uniform_loop(cfg);
  size_t rows0 = 0;
  for (const auto& row : a.history) rows0 += (row.mesh_k == 0);
  REQUIRE(rows0 > 0);
  for (size_t i = 0; i < rows0; ++i) {
    CHECK(a.history[i].J == u.history[i].J);
    CHECK(a.history[i].lambdas[0] == u.history[i].lambdas[0]);
  }
}

TEST_CASE("sandwich bracket holds on every recorded solve") {
  RunConfig cfg = small_config();
  AdaptiveRun run = adaptive_loop(cfg);
  for (const auto& lv : run.levels) CHECK(lv.sandwich_violations == 0);
}
