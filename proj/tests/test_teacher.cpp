#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

#include "brtrl/envs.hpp"
#include "brtrl/errors.hpp"
#include "brtrl/rng.hpp"
#include "brtrl/teacher.hpp"

#include "oracles.hpp"

using namespace brtrl;

// ============================================================================
// Tile coding
// ============================================================================

TEST_CASE("teacher: single unshifted tiling bins by tile width") {
  TileCoding tc(1, {2}, {0.0}, {1.0});
  CHECK(tc.total_tiles() == 3);  // 2 tiles plus the spill cell
  CHECK(tc.encode({0.25}) == std::vector<int>{0});
  CHECK(tc.encode({0.75}) == std::vector<int>{1});
  CHECK(tc.encode({0.0}) == std::vector<int>{0});   // lower bound stays in cell 0
  CHECK(tc.encode({-5.0}) == std::vector<int>{0});  // clamped below
  CHECK(tc.encode({5.0}) == std::vector<int>{2});   // clamped above lands past the last edge

  CHECK_THROWS_AS(tc.encode({0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("teacher: nearby states share cells, distant states do not") {
  TileCoding tc(4, {8, 8}, {-1.0, -1.0}, {1.0, 1.0});
  const auto a = tc.encode({0.101, 0.101});
  const auto b = tc.encode({0.102, 0.102});
  CHECK(a == b);  // same cell in every tiling
  const auto far = tc.encode({-0.9, -0.9});
  int shared = 0;
  for (std::size_t t = 0; t < a.size(); ++t) shared += a[t] == far[t] ? 1 : 0;
  CHECK(shared == 0);
}

TEST_CASE("teacher: encode emits one in-range index per tiling") {
  TileCoding tc(8, {5, 7}, {-2.0, 0.5}, {3.0, 2.5});
  CHECK(tc.n_tilings() == 8);
  CHECK(tc.dims() == 2);
  const int per_tiling = (5 + 1) * (7 + 1);
  CHECK(tc.total_tiles() == 8 * per_tiling);

  std::mt19937_64 rng(20260818ULL);
  for (int i = 0; i < 100000; ++i) {
    // Half the draws wander far outside the box to exercise clamping.
    const double scale = i % 2 == 0 ? 1.0 : 10.0;
    const State s{uniform_range(rng, -2.0 * scale, 3.0 * scale),
                  uniform_range(rng, 0.5 * scale, 2.5 * scale)};
    const auto active = tc.encode(s);
    REQUIRE(active.size() == 8);
    for (std::size_t t = 0; t < active.size(); ++t) {
      CHECK(active[t] >= static_cast<int>(t) * per_tiling);
      CHECK(active[t] < static_cast<int>(t + 1) * per_tiling);
    }
  }
}

TEST_CASE("teacher: tile coding rejects malformed configs") {
  CHECK_THROWS_AS(TileCoding(0, {2}, {0.0}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(TileCoding(1, {}, {}, {}), std::invalid_argument);
  CHECK_THROWS_AS(TileCoding(1, {2, 2}, {0.0}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(TileCoding(1, {0}, {0.0}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(TileCoding(1, {2}, {1.0}, {1.0}), std::invalid_argument);
}

// ============================================================================
// Q function
// ============================================================================

TEST_CASE("teacher: q_value sums the active tiles' weights") {
  QFunction q(6, 2);
  const std::vector<int> active{1, 4};
  CHECK(q.q_value(active, 0) == 0.0);

  q.bump(std::vector<int>{1}, 1, -0.5);
  CHECK(q.q_value(active, 1) == -0.5);
  CHECK(q.q_value(active, 0) == 0.0);  // other action untouched

  q.bump(active, 1, 0.25);  // both tiles move
  CHECK(q.q_value(active, 1) == doctest::Approx(-0.5 + 0.5).epsilon(1e-12));

  CHECK_THROWS_AS(q.q_value(active, 2), std::invalid_argument);
  CHECK_THROWS_AS(QFunction(0, 2), std::invalid_argument);
  CHECK_THROWS_AS(QFunction(4, 1), std::invalid_argument);
}

TEST_CASE("teacher: greedy_action prefers the highest q and breaks ties low") {
  TileCoding tc(1, {2}, {0.0}, {1.0});
  QFunction q(tc.total_tiles(), 3);
  CHECK(greedy_action(q, tc, {0.25}) == 0);  // all zero: lowest index

  q.bump(tc.encode({0.25}), 2, 1.0);
  CHECK(greedy_action(q, tc, {0.25}) == 2);
  CHECK(greedy_action(q, tc, {0.75}) == 0);  // other cell unaffected
}

// ============================================================================
// SARSA updates
// ============================================================================

TEST_CASE("teacher: terminal update matches the hand formula") {
  TileCoding tc(1, {2}, {0.0}, {1.0});
  QFunction q(tc.total_tiles(), 2);
  const double delta = sarsa_step_update(q, tc, {0.25}, 0, -1.0, nullptr, 0, 0.5, 0.99);
  CHECK(delta == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(q.q_value(tc.encode({0.25}), 0) == doctest::Approx(-0.5).epsilon(1e-12));
}

TEST_CASE("teacher: sarsa deltas match the oracle over random transitions") {
  TileCoding tc(4, {4, 4}, {-1.0, -1.0}, {1.0, 1.0});
  QFunction q(tc.total_tiles(), 3);
  std::mt19937_64 rng(20260818ULL);
  for (int i = 0; i < 500; ++i) {
    const State s{uniform_range(rng, -1.0, 1.0), uniform_range(rng, -1.0, 1.0)};
    const State s2{uniform_range(rng, -1.0, 1.0), uniform_range(rng, -1.0, 1.0)};
    const Action a = static_cast<Action>(rng() % 3);
    const Action a2 = static_cast<Action>(rng() % 3);
    const double reward = uniform_range(rng, -2.0, 2.0);
    const bool terminal = rng() % 4 == 0;
    const double gamma = 0.97;

    const double q_sa = q_value(q, tc, s, a);
    const double q_next = terminal ? 0.0 : q_value(q, tc, s2, a2);
    const double expected = oracle::sarsa_delta(reward, gamma, q_next, q_sa, terminal);

    const double before = q_sa;
    const double delta =
        sarsa_step_update(q, tc, s, a, reward, terminal ? nullptr : &s2, a2, 0.3, gamma);
    CHECK(std::abs(delta - expected) <= 1e-12);
    // All n_tilings active tiles moved by (alpha / n_tilings) * delta.
    CHECK(std::abs(q_value(q, tc, s, a) - (before + 0.3 * delta)) <= 1e-12);
  }
}

TEST_CASE("teacher: zero alpha freezes the weights") {
  TileCoding tc(2, {3}, {0.0}, {1.0});
  QFunction q(tc.total_tiles(), 2);
  q.bump(tc.encode({0.5}), 1, 0.7);
  const auto before = q.weights();
  sarsa_step_update(q, tc, {0.5}, 1, -1.0, nullptr, 0, 0.0, 0.99);
  CHECK(q.weights() == before);
}

TEST_CASE("teacher: epsilon_greedy explores uniformly at epsilon = 1") {
  TileCoding tc(1, {2}, {0.0}, {1.0});
  QFunction q(tc.total_tiles(), 3);
  q.bump(tc.encode({0.25}), 1, 5.0);  // greedy would always say 1

  std::mt19937_64 rng(20260818ULL);
  std::vector<int> counts(3, 0);
  const int n = 10000;
  for (int i = 0; i < n; ++i) counts[epsilon_greedy(q, tc, {0.25}, 1.0, rng)]++;
  for (int k = 0; k < 3; ++k) {
    const double freq = static_cast<double>(counts[k]) / n;
    const double sigma = std::sqrt((1.0 / 3.0) * (2.0 / 3.0) / n);
    CHECK(std::abs(freq - 1.0 / 3.0) <= 3.0 * sigma);
  }

  // epsilon = 0 is pure greedy yet still consumes the explore coin.
  std::mt19937_64 r2(1u);
  for (int i = 0; i < 20; ++i) CHECK(epsilon_greedy(q, tc, {0.25}, 0.0, r2) == 1);
}

// ============================================================================
// Training loop
// ============================================================================

TEST_CASE("teacher: sarsa_train is reproducible and improves on mountain car") {
  SarsaParams params;
  params.episodes = 60;
  params.gamma = 1.0;

  MountainCar env1, env2;
  const SarsaResult a = sarsa_train(env1, default_tile_coding("mountaincar", 8, 8), params, 5);
  const SarsaResult b = sarsa_train(env2, default_tile_coding("mountaincar", 8, 8), params, 5);
  CHECK(a.teacher == b.teacher);
  CHECK(a.episode_rewards == b.episode_rewards);
  CHECK(a.episode_rewards.size() == 60);
  for (double r : a.episode_rewards) {
    CHECK(r <= 0.0);
    CHECK(r >= -200.0);
  }

  MountainCar env3;
  const SarsaResult c = sarsa_train(env3, default_tile_coding("mountaincar", 8, 8), params, 6);
  CHECK(c.episode_rewards != a.episode_rewards);

  CHECK_THROWS_AS(sarsa_train(env3, default_tile_coding("mountaincar", 8, 8), SarsaParams{.episodes = 0}, 1),
                  std::invalid_argument);
}

// ============================================================================
// Serialization and defaults
// ============================================================================

TEST_CASE("teacher: save/load round-trips bit-exactly") {
  SarsaParams params;
  params.episodes = 20;
  MountainCar env;
  std::mt19937_64 rng(2u);
  SarsaResult result = sarsa_train(env, default_tile_coding("mountaincar", 4, 4), params, 9);

  std::ostringstream first;
  result.teacher.save(first);
  std::istringstream in(first.str());
  const SarsaTeacher loaded = SarsaTeacher::load(in);
  CHECK(loaded == result.teacher);
  std::ostringstream second;
  loaded.save(second);
  CHECK(second.str() == first.str());

  std::istringstream junk("SARSA v2 actions=3 tilings=1 dims=2\n");
  CHECK_THROWS_AS(SarsaTeacher::load(junk), IoError);
  std::istringstream bad_int("SARSA v1 actions=x tilings=1 dims=2\n");
  CHECK_THROWS_AS(SarsaTeacher::load(bad_int), IoError);
}

TEST_CASE("teacher: default tile codings cover both environments") {
  const TileCoding cp = default_tile_coding("cartpole", 8, 8);
  CHECK(cp.dims() == 4);
  CHECK(cp.n_tilings() == 8);
  const TileCoding mc = default_tile_coding("mountaincar", 8, 8);
  CHECK(mc.dims() == 2);
  CHECK(mc.lows() == std::vector<double>{-1.2, -0.07});
  CHECK(mc.highs() == std::vector<double>{0.6, 0.07});
  CHECK_THROWS_AS(default_tile_coding("pendulum", 8, 8), std::invalid_argument);
}
