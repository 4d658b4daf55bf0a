#include <doctest.h>

#include "mlta/selection.hpp"
#include "mlta/simulate.hpp"
#include "oracles.hpp"

#include <cmath>

using namespace mlta;

TEST_CASE("parameter counts") {
  CHECK(n_free_params({3, 1, 2, true}, 7, 2) == 34);
  CHECK(n_free_params({1, 1, 1, true}, 7, 2) == 14);
  CHECK(n_free_params({1, 1, 1, false}, 7, 19) == 14);
  CHECK(n_free_params({3, 2, 2, true}, 7, 2) - n_free_params({3, 1, 2, true}, 7, 2) == 6);
  // Free loadings: one rotation deduction per group.
  CHECK(n_free_params({3, 2, 1, false}, 7, 2) == 2 * 2 + 21 + 3 * (14 - 1));
  CHECK(n_free_params({2, 3, 3, true}, 5, 1) == 1 + 10 + (15 - 3) + 2 + 2);
}

TEST_CASE("BIC arithmetic and monotonicity") {
  CHECK(std::abs(bic(0.0, {1, 1, 1, true}, 7, 2, 100) - 64.472) < 1e-3);
  CHECK(std::abs(bic(0.0, {1, 1, 1, true}, 7, 2, 100) - 14.0 * std::log(100.0)) < 1e-12);
  CHECK(bic(-10.0, {3, 1, 2, true}, 7, 2, 500) < bic(-11.0, {3, 1, 2, true}, 7, 2, 500));
}

TEST_CASE("range parsing") {
  const IntRange r = parse_range("1..5");
  CHECK(r.lo == 1);
  CHECK(r.hi == 5);
  CHECK(r.size() == 5);
  CHECK(parse_range("3").size() == 1);
  for (const char* bad : {"", "0", "3..1", "a..b", "1..", "..2", "1...3", "-1..2", "1.5"})
    CHECK_THROWS_AS(parse_range(bad), Error);
}

TEST_CASE("grid search: table shape, ordering and the argmin") {
  SimSpec spec;
  spec.N = 300;
  spec.R = 6;
  spec.H = 10;
  spec.seed = 9;
  const SimResult sim = simulate_network(spec);
  FitConfig cfg;
  cfg.n_starts = 2;
  cfg.threads = 2;
  const GridSpec grid{parse_range("1..3"), parse_range("1"), parse_range("1..2"), true};
  const SelectionResult sel = select_model(sim.data, grid, cfg);
  REQUIRE(sel.table.size() == 6u);
  double best = std::numeric_limits<double>::infinity();
  int idx = 0;
  for (int G = 1; G <= 3; ++G)
    for (int Q = 1; Q <= 2; ++Q) {
      const GridCell& c = sel.table[idx++];
      CHECK(c.dims.G == G);
      CHECK(c.dims.Q == Q);
      CHECK(c.n_params == n_free_params(c.dims, 6, 2));
      if (c.ok) {
        CHECK(std::abs(c.bic - bic(c.loglik, c.dims, 6, 2, 300)) < 1e-9);
        best = std::min(best, c.bic);
      }
    }
  CHECK(sel.best.bic == best);

  // A single-cell grid is plain multistart fitting.
  const GridSpec one{parse_range("2"), parse_range("1"), parse_range("2"), true};
  const SelectionResult s1 = select_model(sim.data, one, cfg);
  const FitResult direct = fit_multistart(sim.data, {2, 1, 2, true}, cfg);
  CHECK(s1.best.loglik == direct.loglik);

  const std::string csv = format_bic_table(sel.table);
  CHECK(csv.rfind("G,D,Q,loglik,bic,converged,n_params\n", 0) == 0);
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 7);
}

TEST_CASE("grid search: more layer groups than layers is rejected") {
  std::mt19937_64 rng(1);
  const NetworkData d = oracle::random_network({5, 5}, 3, 1, rng);
  const GridSpec grid{parse_range("1"), parse_range("1"), parse_range("3"), false};
  FitConfig cfg;
  cfg.n_starts = 1;
  CHECK_THROWS_AS(select_model(d, grid, cfg), Error);
}
