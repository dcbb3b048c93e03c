#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "brtrl/envs.hpp"

namespace brtrl {

// Overlapping uniform grids over a bounded box. Tiling t is shifted by
// t/n_tilings of a tile width, staggered across dimensions by the odd
// multipliers 1, 3, 5, ... States outside the bounds are clamped first.
class TileCoding {
 public:
  TileCoding(int n_tilings, std::vector<int> tiles_per_dim, std::vector<double> lows,
             std::vector<double> highs);

  // Exactly n_tilings global tile indices, one per tiling.
  std::vector<int> encode(const State& state) const;

  int n_tilings() const { return n_tilings_; }
  int dims() const { return static_cast<int>(tiles_per_dim_.size()); }
  int total_tiles() const { return n_tilings_ * tiles_per_tiling_; }
  const std::vector<int>& tiles_per_dim() const { return tiles_per_dim_; }
  const std::vector<double>& lows() const { return lows_; }
  const std::vector<double>& highs() const { return highs_; }

  bool operator==(const TileCoding& other) const;

 private:
  int n_tilings_;
  std::vector<int> tiles_per_dim_;
  std::vector<double> lows_;
  std::vector<double> highs_;
  std::vector<double> widths_;                       // per-dim tile width
  std::vector<std::vector<double>> offset_fracs_;    // [tiling][dim], in [0,1)
  int tiles_per_tiling_ = 0;                         // product of (tiles_d + 1)
};

// Linear action-value function over tile features: q(s,a) is the sum of the
// active tiles' weights for a. Weights are laid out tile-major: [tile][action].
class QFunction {
 public:
  QFunction(int total_tiles, int n_actions);

  double q_value(std::span<const int> active, Action action) const;
  void bump(std::span<const int> active, Action action, double amount);

  int n_actions() const { return n_actions_; }
  const std::vector<double>& weights() const { return weights_; }
  std::vector<double>& weights() { return weights_; }

  bool operator==(const QFunction& other) const;

 private:
  std::vector<double> weights_;
  int n_actions_;
};

struct SarsaParams {
  double alpha = 0.3;
  double gamma = 0.99;
  double epsilon_start = 0.1;
  double epsilon_end = 0.01;
  int episodes = 2000;
  int max_steps = Environment::kMaxEpisodeSteps;
};

struct SarsaTeacher {
  TileCoding coding;
  QFunction q;

  // "SARSA v1" + tiling config + flat weights.
  void save(std::ostream& out) const;
  static SarsaTeacher load(std::istream& in);
  bool operator==(const SarsaTeacher& other) const;
};

struct SarsaResult {
  SarsaTeacher teacher;
  std::vector<double> episode_rewards;
};

double q_value(const QFunction& q, const TileCoding& tc, const State& state, Action action);

// One SARSA update: computes delta (terminal form when next is null), bumps
// every active tile's weight for `action` by (alpha / n_tilings) * delta, and
// returns delta. Exposed separately so single transitions can be checked
// against the hand formula.
double sarsa_step_update(QFunction& q, const TileCoding& tc, const State& state, Action action,
                         double reward, const State* next_state, Action next_action,
                         double alpha, double gamma);

SarsaResult sarsa_train(Environment& env, TileCoding coding, const SarsaParams& params,
                        std::uint64_t seed);

// argmax_a q(s,a), lowest index on ties.
Action greedy_action(const QFunction& q, const TileCoding& tc, const State& state);
std::function<Action(const State&)> greedy_policy(const SarsaTeacher& teacher);

// Behavior policy used during training: explore-coin first, uniform action
// draw only when exploring, greedy otherwise.
Action epsilon_greedy(const QFunction& q, const TileCoding& tc, const State& state,
                      double epsilon, std::mt19937_64& rng);

// Ready-made bounds for the two built-in environments (velocity-style
// dimensions use practical ranges, not the infinite observation bounds).
TileCoding default_tile_coding(const std::string& env_id, int n_tilings, int tiles_per_dim);

}  // namespace brtrl
