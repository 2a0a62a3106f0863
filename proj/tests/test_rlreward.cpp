#include <catch2/catch.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "smw/measure.hpp"
#include "smw/rlreward.hpp"
#include "smw/rng.hpp"
#include "smw/slicing.hpp"

using namespace smw;

namespace {

TrajectoryBatch random_batch(std::size_t p_count, std::size_t horizon, std::size_t dim,
                             std::uint64_t seed) {
  Rng g(seed);
  std::vector<DiscreteMeasure> agents;
  for (std::size_t p = 0; p < p_count; ++p) {
    std::vector<double> states(horizon * dim);
    for (auto& s : states) s = g.normal();
    agents.emplace_back(std::move(states), horizon, dim);
  }
  return TrajectoryBatch(std::move(agents));
}

}  // namespace

TEST_CASE("alignment indices are the identity for identical agents", "[rlreward]") {
  const auto one = random_batch(1, 12, 3, 5).agent(0);
  std::vector<DiscreteMeasure> agents(4, one);
  const TrajectoryBatch batch(std::move(agents));
  const auto ps = sample_directions(3, 6, 9);
  const auto eta = eta_indices(batch, ps);
  for (std::size_t k = 0; k < 6; ++k)
    for (std::size_t p = 0; p < 4; ++p)
      for (std::size_t j = 0; j < 4; ++j)
        for (std::size_t t = 0; t < 12; ++t) REQUIRE(eta.at(k, p, j, t) == t);
}

TEST_CASE("alignment on a hand-worked 1D pair", "[rlreward]") {
  std::vector<DiscreteMeasure> agents;
  agents.push_back(DiscreteMeasure::from_values({0.0, 1.0}));
  agents.push_back(DiscreteMeasure::from_values({5.0, 2.0}));
  const TrajectoryBatch batch(std::move(agents));
  const auto ps = ProjectionSet::from_directions({1.0}, 1, 1);
  const auto eta = eta_indices(batch, ps);

  // Agent 0 at t=0 has rank 0; agent 1's rank-0 value is 2, recorded at t=1.
  REQUIRE(eta.at(0, 0, 1, 0) == 1);
  REQUIRE(eta.at(0, 0, 1, 1) == 0);
  REQUIRE(eta.at(0, 1, 0, 0) == 1);
  REQUIRE(eta.at(0, 0, 0, 0) == 0);
}

TEST_CASE("time reversal preserves the aligned pairs", "[rlreward]") {
  const auto batch = random_batch(3, 10, 1, 17);
  const auto ps = ProjectionSet::from_directions({1.0}, 1, 1);
  const auto eta = eta_indices(batch, ps);

  std::vector<DiscreteMeasure> reversed;
  for (std::size_t p = 0; p < 3; ++p) {
    std::vector<double> states = batch.agent(p).data();
    std::reverse(states.begin(), states.end());
    reversed.push_back(DiscreteMeasure::from_values(std::move(states)));
  }
  const TrajectoryBatch rbatch(std::move(reversed));
  const auto reta = eta_indices(rbatch, ps);

  for (std::size_t p = 0; p < 3; ++p)
    for (std::size_t j = 0; j < 3; ++j) {
      std::vector<std::pair<double, double>> pairs, rpairs;
      for (std::size_t t = 0; t < 10; ++t) {
        pairs.emplace_back(batch.agent(p).value1d(t),
                           batch.agent(j).value1d(eta.at(0, p, j, t)));
        rpairs.emplace_back(rbatch.agent(p).value1d(t),
                            rbatch.agent(j).value1d(reta.at(0, p, j, t)));
      }
      std::sort(pairs.begin(), pairs.end());
      std::sort(rpairs.begin(), rpairs.end());
      REQUIRE(pairs == rpairs);
    }
}

TEST_CASE("multi-task reward on fixed instances", "[rlreward]") {
  const auto one = random_batch(1, 8, 2, 3).agent(0);
  std::vector<DiscreteMeasure> same(3, one);
  const TrajectoryBatch identical(std::move(same));
  const auto ps = sample_directions(2, 5, 11);
  for (std::size_t p = 0; p < 3; ++p)
    for (std::size_t t = 0; t < 8; ++t) REQUIRE(multitask_reward(identical, p, t, ps) == 0.0);

  std::vector<DiscreteMeasure> singles;
  singles.push_back(DiscreteMeasure::from_values({0.0}));
  singles.push_back(DiscreteMeasure::from_values({4.0}));
  const TrajectoryBatch pair(std::move(singles));
  const auto line = sample_directions(1, 7, 13);
  REQUIRE(multitask_reward(pair, 0, 0, line) == Approx(2.0).epsilon(1e-12));
  REQUIRE(multitask_reward(pair, 1, 0, line) == Approx(2.0).epsilon(1e-12));

  REQUIRE_THROWS_AS(multitask_reward(pair, 2, 0, line), std::out_of_range);
  REQUIRE_THROWS_AS(multitask_reward(pair, 0, 1, line), std::out_of_range);
}

TEST_CASE("summed rewards equal the horizon-scaled sliced distance", "[rlreward]") {
  const std::size_t p_count = 5, horizon = 50, dim = 3;
  const auto batch = random_batch(p_count, horizon, dim, 29);
  const auto ps = sample_directions(dim, 16, 31);

  const auto rewards = multitask_reward_matrix(batch, ps);
  double total = 0.0;
  for (const auto& row : rewards)
    for (double r : row) total += r;

  std::vector<DiscreteMeasure> as_measures;
  for (std::size_t p = 0; p < p_count; ++p) as_measures.push_back(batch.agent(p));
  const auto smw = smw_squared(MeasureSet(std::move(as_measures)),
                               SimplexWeights::uniform(p_count), ps);
  REQUIRE(total == Approx(static_cast<double>(horizon) * smw.estimate).margin(1e-9));
}

TEST_CASE("composite reward shapes and scales", "[rlreward]") {
  const auto batch = random_batch(3, 6, 2, 37);
  const auto ps = sample_directions(2, 8, 39);
  std::vector<std::vector<double>> canonical(3, std::vector<double>(6));
  Rng g(43);
  for (auto& row : canonical)
    for (auto& v : row) v = g.uniform(-1.0, 1.0);

  // gamma = 0: canonical rewards pass through unchanged.
  RewardConfig off{ps, 0.0, RewardScale::exp, 5.0};
  REQUIRE(composite_reward(batch, canonical, off) == canonical);

  // Identical agents with the exponential scale: flat bonus gamma.
  std::vector<DiscreteMeasure> same(3, batch.agent(0));
  const TrajectoryBatch identical(std::move(same));
  RewardConfig bonus{ps, 0.7, RewardScale::exp, 5.0};
  const auto shaped = composite_reward(identical, canonical, bonus);
  for (std::size_t p = 0; p < 3; ++p)
    for (std::size_t t = 0; t < 6; ++t)
      REQUIRE(shaped[p][t] == Approx(canonical[p][t] + 0.7).epsilon(1e-12));

  // Negative scale: the summed shaping equals -gamma * T * the sliced
  // multi-marginal distance of the trajectory measures.
  RewardConfig neg{ps, 1.3, RewardScale::neg, 5.0};
  const auto shaped_neg = composite_reward(batch, canonical, neg);
  double delta = 0.0;
  for (std::size_t p = 0; p < 3; ++p)
    for (std::size_t t = 0; t < 6; ++t) delta += shaped_neg[p][t] - canonical[p][t];
  std::vector<DiscreteMeasure> as_measures;
  for (std::size_t p = 0; p < 3; ++p) as_measures.push_back(batch.agent(p));
  const auto smw =
      smw_squared(MeasureSet(std::move(as_measures)), SimplexWeights::uniform(3), ps);
  REQUIRE(delta == Approx(-1.3 * 6.0 * smw.estimate).margin(1e-9));

  std::vector<std::vector<double>> ragged(3, std::vector<double>(5));
  REQUIRE_THROWS_AS(composite_reward(batch, ragged, off), ShapeError);
}

TEST_CASE("exponential scale decreases in the reward", "[rlreward]") {
  const auto batch = random_batch(2, 10, 2, 47);
  const auto ps = sample_directions(2, 8, 49);
  const auto rewards = multitask_reward_matrix(batch, ps);

  std::vector<std::vector<double>> zero(2, std::vector<double>(10, 0.0));
  RewardConfig cfg{ps, 1.0, RewardScale::exp, 5.0};
  const auto shaped = composite_reward(batch, zero, cfg);  // = exp(-5 r)
  for (std::size_t t = 1; t < 10; ++t) {
    if (rewards[0][t] > rewards[0][t - 1])
      REQUIRE(shaped[0][t] < shaped[0][t - 1]);
    else if (rewards[0][t] < rewards[0][t - 1])
      REQUIRE(shaped[0][t] > shaped[0][t - 1]);
  }
}

TEST_CASE("relabeling agents permutes the reward rows", "[rlreward]") {
  const auto batch = random_batch(3, 7, 2, 53);
  const auto ps = sample_directions(2, 6, 57);
  std::vector<std::vector<double>> canonical(3, std::vector<double>(7, 0.0));
  RewardConfig cfg{ps, 0.9, RewardScale::exp, 5.0};
  const auto base = composite_reward(batch, canonical, cfg);

  const std::vector<std::size_t> perm{2, 0, 1};
  std::vector<DiscreteMeasure> relabeled;
  for (std::size_t p : perm) relabeled.push_back(batch.agent(p));
  const auto permuted =
      composite_reward(TrajectoryBatch(std::move(relabeled)), canonical, cfg);
  for (std::size_t p = 0; p < 3; ++p)
    for (std::size_t t = 0; t < 7; ++t)
      REQUIRE(permuted[p][t] == Approx(base[perm[p]][t]).margin(1e-12));
}

TEST_CASE("trajectories load from per-agent measure files", "[rlreward]") {
  const auto batch = random_batch(2, 9, 3, 59);
  std::vector<std::string> paths{"traj_agent0.csv", "traj_agent1.csv"};
  save_measure(batch.agent(0), paths[0], MeasureFormat::csv);
  save_measure(batch.agent(1), paths[1], MeasureFormat::csv);
  const auto loaded = load_trajectory_batch(paths, MeasureFormat::csv);
  REQUIRE(loaded.p_count() == 2);
  REQUIRE(loaded.horizon() == 9);
  REQUIRE(loaded.agent(0).data() == batch.agent(0).data());
  REQUIRE(loaded.agent(1).data() == batch.agent(1).data());
  for (const auto& p : paths) std::remove(p.c_str());

  // Reward matrices round-trip through the csv emitter.
  const auto ps = sample_directions(3, 4, 61);
  const auto rewards = multitask_reward_matrix(batch, ps);
  save_reward_csv(rewards, "rewards_test.csv");
  const auto back = load_measure("rewards_test.csv", MeasureFormat::csv);
  REQUIRE(back.n_atoms() == 2);
  REQUIRE(back.dim() == 9);
  for (std::size_t p = 0; p < 2; ++p)
    for (std::size_t t = 0; t < 9; ++t) REQUIRE(back.data()[p * 9 + t] == rewards[p][t]);
  std::remove("rewards_test.csv");
}

TEST_CASE("trajectory batches are validated", "[rlreward]") {
  std::vector<DiscreteMeasure> uneven;
  uneven.push_back(DiscreteMeasure::from_values({0.0, 1.0}));
  uneven.push_back(DiscreteMeasure::from_values({0.0, 1.0, 2.0}));
  REQUIRE_THROWS_AS(TrajectoryBatch(std::move(uneven)), AtomCountMismatch);

  std::vector<DiscreteMeasure> bad;
  bad.push_back(DiscreteMeasure::from_values({0.0, std::nan("")}));
  bad.push_back(DiscreteMeasure::from_values({0.0, 1.0}));
  REQUIRE_THROWS_AS(TrajectoryBatch(std::move(bad)), NonFinite);

  const auto batch = random_batch(2, 5, 2, 67);
  REQUIRE_THROWS_AS(eta_indices(batch, sample_directions(3, 4, 1)), DimensionMismatch);
}
