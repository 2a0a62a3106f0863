#include <catch2/catch.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <vector>

#include "smw/measure.hpp"
#include "smw/rng.hpp"
#include "smw/slicing.hpp"
#include "smw/solvers.hpp"

using namespace smw;

namespace {

std::vector<double> sorted_copy(const DiscreteMeasure& m) {
  std::vector<double> v = m.data();
  std::sort(v.begin(), v.end());
  return v;
}

double max_mutual_sw(const std::vector<DiscreteMeasure>& ms, const ProjectionSet& ps) {
  double worst = 0.0;
  for (std::size_t a = 0; a < ms.size(); ++a)
    for (std::size_t b = a + 1; b < ms.size(); ++b)
      worst = std::max(worst, sw_squared(ms[a], ms[b], ps).estimate);
  return worst;
}

}  // namespace

TEST_CASE("barycenter of singletons is the euclidean mean", "[solvers]") {
  Rng g(41);
  const std::size_t p_count = 5, d = 3;
  std::vector<DiscreteMeasure> targets;
  std::vector<double> mean(d, 0.0);
  for (std::size_t p = 0; p < p_count; ++p) {
    std::vector<double> z(d);
    for (std::size_t c = 0; c < d; ++c) {
      z[c] = g.normal();
      mean[c] += z[c] / static_cast<double>(p_count);
    }
    targets.emplace_back(std::move(z), 1, d);
  }

  SolverConfig cfg;
  cfg.iters = 800;
  cfg.step_size = 1.0;
  cfg.k_per_step = 32;
  cfg.seed = 7;
  const auto trace = barycenter_solve(MeasureSet(targets), 1, cfg);
  REQUIRE(trace.final_measures.size() == 1);
  for (std::size_t c = 0; c < d; ++c)
    REQUIRE(trace.final_measures[0].data()[c] == Approx(mean[c]).margin(1e-3));

  const auto pairwise = pairwise_barycenter_solve(MeasureSet(targets), 1, cfg);
  for (std::size_t c = 0; c < d; ++c)
    REQUIRE(pairwise.final_measures[0].data()[c] == Approx(mean[c]).margin(1e-3));
}

TEST_CASE("barycenter of identical targets recovers the common measure", "[solvers]") {
  const auto base = generate_gaussians(2, 12, 2, 1.0, 0.8, 3)[0];
  std::vector<DiscreteMeasure> targets(3, base);

  SolverConfig cfg;
  cfg.iters = 800;
  cfg.step_size = 15.0;
  cfg.k_per_step = 24;
  cfg.seed = 11;
  const auto trace = barycenter_solve(MeasureSet(targets), base.n_atoms(), cfg);

  const auto eval = sample_directions(2, 128, 1000);
  REQUIRE(std::sqrt(sw_squared(trace.final_measures[0], base, eval).estimate) <= 1e-2);
  REQUIRE(trace.objective_history.back().objective <= 1e-4);
}

TEST_CASE("1D barycenter converges to rank-wise means", "[solvers]") {
  Rng g(17);
  const std::size_t p_count = 3, n = 6;
  std::vector<DiscreteMeasure> targets;
  for (std::size_t p = 0; p < p_count; ++p) {
    std::vector<double> atoms(n);
    for (auto& a : atoms) a = g.uniform(-2.0, 2.0);
    targets.push_back(DiscreteMeasure::from_values(std::move(atoms)));
  }

  std::vector<double> rank_means(n, 0.0);
  for (const auto& t : targets) {
    const auto s = sorted_copy(t);
    for (std::size_t i = 0; i < n; ++i) rank_means[i] += s[i] / static_cast<double>(p_count);
  }

  SolverConfig cfg;
  cfg.iters = 800;
  cfg.step_size = 8.0;
  cfg.k_per_step = 4;
  cfg.seed = 29;
  const auto trace = barycenter_solve(MeasureSet(targets), n, cfg);
  const auto got = sorted_copy(trace.final_measures[0]);
  for (std::size_t i = 0; i < n; ++i) REQUIRE(got[i] == Approx(rank_means[i]).margin(1e-3));
}

TEST_CASE("the two barycentric objectives land on the same measure", "[solvers]") {
  const auto targets = generate_gaussians(3, 10, 2, 1.0, 0.6, 19);

  SolverConfig cfg;
  cfg.iters = 1500;
  cfg.step_size = 6.0;
  cfg.seed = 5;
  cfg.fixed_projections = sample_directions(2, 64, 555);

  const auto a = barycenter_solve(targets, 10, cfg);
  const auto b = pairwise_barycenter_solve(targets, 10, cfg);
  const auto eval = sample_directions(2, 256, 777);
  REQUIRE(sw_squared(a.final_measures[0], b.final_measures[0], eval).estimate <= 1e-3);
}

TEST_CASE("objective descends and the trace has the declared length", "[solvers]") {
  const auto targets = generate_gaussians(4, 30, 2, 1.0, 0.5, 23);

  SolverConfig cfg;
  cfg.iters = 400;
  cfg.step_size = 5.0;
  cfg.k_per_step = 16;
  cfg.seed = 31;
  cfg.log_every = 10;
  const auto trace = barycenter_solve(targets, 30, cfg);
  REQUIRE(trace.objective_history.size() == (cfg.iters + cfg.log_every - 1) / cfg.log_every);

  const std::size_t tenth = std::max<std::size_t>(trace.objective_history.size() / 10, 1);
  auto median_of = [&](std::size_t lo, std::size_t hi) {
    std::vector<double> v;
    for (std::size_t i = lo; i < hi; ++i) v.push_back(trace.objective_history[i].objective);
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  const double head = median_of(0, tenth);
  const double tail =
      median_of(trace.objective_history.size() - tenth, trace.objective_history.size());
  REQUIRE(tail < head);
}

TEST_CASE("trace serializes as iteration,objective lines", "[solvers]") {
  SolveTrace trace;
  trace.objective_history = {{0, 1.5}, {10, 0.25}};
  const std::string path = "solver_trace_test.csv";
  save_trace(trace, path);
  std::ifstream is(path);
  std::string line;
  std::getline(is, line);
  REQUIRE(line == "0,1.5");
  std::getline(is, line);
  REQUIRE(line == "10,0.25");
  std::remove(path.c_str());
}

TEST_CASE("unregularized multi-task fit converges per task", "[solvers]") {
  const auto targets = generate_gaussians(3, 30, 2, 1.0, 0.4, 47);

  SolverConfig cfg;
  cfg.iters = 600;
  cfg.step_size = 8.0;
  cfg.k_per_step = 16;
  cfg.seed = 53;
  const auto trace = mtde_fit(targets, 30, 0.0, cfg);
  REQUIRE(trace.final_measures.size() == 3);
  const auto eval = sample_directions(2, 128, 999);
  for (std::size_t p = 0; p < 3; ++p)
    REQUIRE(sw_squared(trace.final_measures[p], targets[p], eval).estimate <= 1e-3);
}

TEST_CASE("with gamma zero each task ignores the other tasks' data", "[solvers]") {
  const auto a0 = generate_gaussians(2, 12, 2, 1.0, 0.5, 61)[0];
  const auto b1 = generate_gaussians(2, 12, 2, 2.0, 0.7, 62)[1];
  const auto b2 = generate_gaussians(2, 12, 2, 2.0, 0.7, 63)[1];

  SolverConfig cfg;
  cfg.iters = 50;
  cfg.step_size = 2.0;
  cfg.k_per_step = 8;
  cfg.seed = 71;

  std::vector<DiscreteMeasure> first{a0, b1};
  std::vector<DiscreteMeasure> second{a0, b2};
  const auto run1 = mtde_fit(MeasureSet(std::move(first)), 12, 0.0, cfg);
  const auto run2 = mtde_fit(MeasureSet(std::move(second)), 12, 0.0, cfg);
  REQUIRE(run1.final_measures[0].data() == run2.final_measures[0].data());
  REQUIRE(run1.final_measures[1].data() != run2.final_measures[1].data());
}

TEST_CASE("strong regularization collapses the learned measures", "[solvers]") {
  const auto targets = generate_gaussians(4, 24, 2, 2.0, 0.3, 83);
  const auto eval = sample_directions(2, 128, 888);

  SolverConfig cfg;
  cfg.iters = 800;
  cfg.step_size = 3.0;
  cfg.k_per_step = 16;
  cfg.seed = 89;

  const auto loose = mtde_fit(targets, 24, 0.0, cfg);
  const auto tight = mtde_fit(targets, 24, 25.0, cfg);
  const double spread_loose = max_mutual_sw(loose.final_measures, eval);
  const double spread_tight = max_mutual_sw(tight.final_measures, eval);
  REQUIRE(spread_tight * 10.0 <= spread_loose);
}

TEST_CASE("subsampled batches handle unequal support sizes", "[solvers]") {
  const auto targets = generate_gaussians(2, 60, 2, 1.0, 0.4, 97);

  SolverConfig cfg;
  cfg.iters = 400;
  cfg.step_size = 6.0;
  cfg.k_per_step = 12;
  cfg.batch = 30;
  cfg.seed = 101;
  const auto trace = mtde_fit(targets, 40, 0.0, cfg);
  REQUIRE(trace.final_measures[0].n_atoms() == 40);

  // The learned 40-atom measure should still sit on the target cloud: compare
  // against a 40-atom subsample scale rather than demanding exact overlap.
  const auto eval = sample_directions(2, 64, 777);
  for (std::size_t p = 0; p < 2; ++p) {
    std::vector<double> head(targets[p].data().begin(), targets[p].data().begin() + 40 * 2);
    const DiscreteMeasure ref(std::move(head), 40, 2);
    REQUIRE(sw_squared(trace.final_measures[p], ref, eval).estimate <= 0.1);
  }
}

TEST_CASE("multitask score on fixed instances", "[solvers]") {
  const auto clean = generate_gaussians(3, 10, 2, 1.0, 0.5, 151);
  std::vector<DiscreteMeasure> learned(clean.begin(), clean.end());
  const auto ps = sample_directions(2, 32, 3);
  REQUIRE(multitask_score(learned, clean, ps) == 0.0);

  std::vector<DiscreteMeasure> a{DiscreteMeasure::from_values({0.0})};
  std::vector<DiscreteMeasure> b{DiscreteMeasure::from_values({3.0})};
  const auto line = sample_directions(1, 8, 4);
  REQUIRE(multitask_score(a, b, line) == Approx(3.0).epsilon(1e-12));

  // Moving a learned measure further from its reference raises the score.
  std::vector<DiscreteMeasure> close_by{DiscreteMeasure::from_values({2.5})};
  std::vector<DiscreteMeasure> far_off{DiscreteMeasure::from_values({0.5})};
  REQUIRE(multitask_score(close_by, b, line) < multitask_score(far_off, b, line));

  std::vector<DiscreteMeasure> wrong_len;
  REQUIRE_THROWS_AS(multitask_score(wrong_len, clean, ps), ShapeError);
}

TEST_CASE("corrupted ellipse tasks", "[solvers]") {
  const auto [zero_corrupt, zero_clean] = generate_corrupted_ellipses(3, 40, 0.0, 5);
  for (std::size_t p = 0; p < 3; ++p)
    REQUIRE(zero_corrupt[p].data() == zero_clean[p].data());

  const auto [corrupt, clean] = generate_corrupted_ellipses(3, 40, 0.25, 5);
  const std::size_t removed = 10;  // ceil(0.25 * 40)
  for (std::size_t p = 0; p < 3; ++p) {
    std::size_t missing = 0;
    for (std::size_t i = 0; i < 40; ++i) {
      const auto a = clean[p].atom(i);
      bool found = false;
      for (std::size_t j = 0; j < 40 && !found; ++j) {
        const auto b = corrupt[p].atom(j);
        found = a[0] == b[0] && a[1] == b[1];
      }
      if (!found) ++missing;
    }
    REQUIRE(missing == removed);
  }

  const auto [again, _] = generate_corrupted_ellipses(3, 40, 0.25, 5);
  for (std::size_t p = 0; p < 3; ++p) REQUIRE(again[p].data() == corrupt[p].data());

  REQUIRE_THROWS_AS(generate_corrupted_ellipses(3, 40, 1.0, 5), std::invalid_argument);
}

TEST_CASE("solver configuration is validated", "[solvers]") {
  const auto targets = generate_gaussians(2, 6, 2, 1.0, 0.5, 1);
  SolverConfig bad;
  bad.iters = 0;
  REQUIRE_THROWS_AS(barycenter_solve(targets, 4, bad), std::invalid_argument);
  SolverConfig neg;
  neg.step_size = -1.0;
  REQUIRE_THROWS_AS(mtde_fit(targets, 4, 0.0, neg), std::invalid_argument);
  SolverConfig ok;
  REQUIRE_THROWS_AS(mtde_fit(targets, 4, -0.5, ok), std::invalid_argument);
}
