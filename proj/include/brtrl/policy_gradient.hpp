#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <vector>

#include "brtrl/envs.hpp"
#include "brtrl/trees.hpp"

namespace brtrl {

// Stochastic softmax-of-preferences policy over a growing tree ensemble.
// Each group holds one scalar tree per action; the preference vector is
// f(s) = sum over groups of eta * tree_k(s), and an empty ensemble is the
// uniform policy.
class PreferenceEnsemble {
 public:
  PreferenceEnsemble() = default;
  PreferenceEnsemble(int n_actions, double learning_rate);

  std::vector<double> preferences(const State& state) const;
  std::vector<double> probs(const State& state) const;

  void add_group(std::vector<RegressionTree> group);
  void drop_oldest_group();

  int n_actions() const { return n_actions_; }
  double learning_rate() const { return learning_rate_; }
  int group_count() const { return static_cast<int>(groups_.size()); }
  const std::vector<std::vector<RegressionTree>>& groups() const { return groups_; }
  int total_node_count() const;

  // "PGE v1 actions=<K> eta=<v> groups=<G>" + TREE blocks group-major.
  void save(std::ostream& out) const;
  static PreferenceEnsemble load(std::istream& in);

  bool operator==(const PreferenceEnsemble& other) const;

 private:
  std::vector<std::vector<RegressionTree>> groups_;  // [group][action]
  int n_actions_ = 2;
  double learning_rate_ = 0.1;
};

struct PgConfig {
  int batch_episodes = 100;
  double gamma = 0.99;
  int total_batches = 100;
  TreeParams tree_params;
  double learning_rate = 0.1;          // eta, scales policy tree outputs
  double baseline_step = 0.5;          // beta, scales value tree outputs
  TreeParams baseline_tree_params;
  std::optional<int> capacity;         // group cap; set for the recycling variant
  double recycle_blend = 0.5;          // lambda
  int max_steps = Environment::kMaxEpisodeSteps;
};

// Gradient-boosted scalar value ensemble used purely to reduce variance.
// v(s) = sum of step * tree(s); capped at kMaxTrees with the oldest dropped.
class ValueBaseline {
 public:
  ValueBaseline() = default;
  explicit ValueBaseline(double step) : step_(step) {}

  double value(const State& state) const;
  double step_size() const { return step_; }
  int tree_count() const { return static_cast<int>(trees_.size()); }

  void append(RegressionTree tree);

  static constexpr int kMaxTrees = 200;

 private:
  std::vector<RegressionTree> trees_;
  double step_ = 0.5;
};

struct AdvantageRecord {
  State state;
  Action action = 0;
  double advantage = 0.0;                 // G_i - v(s_i)
  std::vector<double> probs_at_decision;  // action probabilities when a_i was drawn
};

// softmax(1/|A| + f(s)); the constant offset is shift-invariant.
std::vector<double> policy_probs(const PreferenceEnsemble& ensemble, const State& state);

// Inverse-CDF sampling over action indices in order. The probability vector
// must be non-negative and sum to 1 within 1e-9.
Action sample_action(std::span<const double> probs, std::mt19937_64& rng);

// G_i = sum_{k>=i} gamma^{k-i} r_k, computed by a backward pass.
std::vector<double> discounted_returns(std::span<const double> rewards, double gamma);

// Per episode: discounted returns, baseline subtraction, and the action
// probabilities in force at decision time (the ensemble is frozen during a
// batch, so recomputing them here reproduces the rollout's vectors).
std::vector<AdvantageRecord> compute_advantages(const std::vector<EpisodeLog>& batch,
                                                const PreferenceEnsemble& ensemble,
                                                const ValueBaseline& baseline, double gamma);

// Appends one tree fit on the residuals G_i - v(s_i).
ValueBaseline update_baseline(ValueBaseline baseline, const std::vector<State>& states,
                              const std::vector<double>& returns,
                              const TreeParams& tree_params);

// One policy-gradient boosting round: per action k, fits a tree on targets
// advantage * (1{a_i = k} - probs_at_decision[k]) and appends the group.
PreferenceEnsemble train_round(PreferenceEnsemble ensemble,
                               const std::vector<AdvantageRecord>& records,
                               const TreeParams& tree_params);

// Fixed-capacity variant: below capacity identical to train_round; at
// capacity the targets gain lambda * eta * (oldest group's prediction) and
// the oldest group is dropped after the new one is appended.
PreferenceEnsemble train_round_recycled(PreferenceEnsemble ensemble,
                                        const std::vector<AdvantageRecord>& records,
                                        const TreeParams& tree_params, int capacity,
                                        double blend);

struct CurvePoint {
  int episode = 0;
  double total_reward = 0.0;
  int ensemble_groups = 0;
  int total_nodes = 0;
};

struct PgResult {
  PreferenceEnsemble ensemble;
  std::vector<CurvePoint> curve;
};

// Full training loop: batches of {rollout, advantages, baseline update,
// boosting round}. Episode i uses the stream derived from (seed, i), so the
// curve and final model are determined by (seed, config).
PgResult train_policy_gradient(Environment& env, const PgConfig& config, std::uint64_t seed);

// Learning curve CSV: episode,total_reward,ensemble_groups,total_nodes.
void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve);

}  // namespace brtrl
