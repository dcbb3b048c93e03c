#pragma once

#include <functional>
#include <iosfwd>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "brtrl/trees.hpp"  // State

namespace brtrl {

using Action = int;

struct StepOutcome {
  State next_state;
  double reward = 0.0;
  bool done = false;
};

struct StepRecord {
  State state;
  Action action = 0;
  double reward = 0.0;
  int timestep = 0;
};

struct EpisodeLog {
  std::vector<StepRecord> records;
  double total_reward = 0.0;

  int length() const { return static_cast<int>(records.size()); }
};

// Episodic MDP with a fixed-length real-valued state and a small discrete
// action set. Instances are single-threaded mutable state; run one per
// rollout worker.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual State reset(std::mt19937_64& rng) = 0;
  // Stepping a finished or never-reset environment throws std::logic_error.
  virtual StepOutcome step(Action action) = 0;

  virtual int state_dim() const = 0;
  virtual int action_count() const = 0;
  virtual std::vector<std::string> feature_names() const = 0;
  virtual std::string id() const = 0;

  bool done() const { return done_; }
  int steps_taken() const { return steps_; }

  // Both benchmarks cap episodes at this many steps.
  static constexpr int kMaxEpisodeSteps = 200;

 protected:
  bool done_ = true;  // not yet reset
  int steps_ = 0;
};

// Pole balancing on a pushed cart. Reward +1 per surviving step; the episode
// ends when the pole tips past 12 degrees, the cart leaves +-2.4, or 200
// steps elapse, so total reward equals survival time.
class CartPole final : public Environment {
 public:
  State reset(std::mt19937_64& rng) override;
  StepOutcome step(Action action) override;

  int state_dim() const override { return 4; }
  int action_count() const override { return 2; }
  std::vector<std::string> feature_names() const override;
  std::string id() const override { return "cartpole"; }

  static constexpr double kGravity = 9.8;
  static constexpr double kCartMass = 1.0;
  static constexpr double kPoleMass = 0.1;
  static constexpr double kPoleHalfLength = 0.5;
  static constexpr double kForceMagnitude = 10.0;
  static constexpr double kTimestep = 0.02;
  static constexpr double kAngleLimitRadians = 12.0 * 3.14159265358979323846 / 180.0;
  static constexpr double kPositionLimit = 2.4;

 private:
  double position_ = 0.0;
  double velocity_ = 0.0;
  double angle_ = 0.0;
  double angular_velocity_ = 0.0;
};

// Underpowered car in a valley. Reward -1 per step until the goal position
// is reached, where the reward is 0 and the episode ends; also ends after
// 200 steps.
class MountainCar final : public Environment {
 public:
  State reset(std::mt19937_64& rng) override;
  StepOutcome step(Action action) override;

  int state_dim() const override { return 2; }
  int action_count() const override { return 3; }  // reverse / idle / forward
  std::vector<std::string> feature_names() const override;
  std::string id() const override { return "mountaincar"; }

  static constexpr double kPositionMin = -1.2;
  static constexpr double kPositionMax = 0.6;
  static constexpr double kVelocityLimit = 0.07;
  static constexpr double kGoalPosition = 0.5;

 private:
  double position_ = 0.0;
  double velocity_ = 0.0;
};

// Environment selected by string id ("cartpole", "mountaincar").
std::unique_ptr<Environment> make_environment(const std::string& id);

// Action sampler queried once per step; deterministic policies ignore the rng.
using PolicyFn = std::function<Action(const State&, std::mt19937_64&)>;

// Resets the environment and runs the policy until the episode finishes or
// max_steps records have been collected.
EpisodeLog run_episode(Environment& env, const PolicyFn& policy, std::mt19937_64& rng,
                       int max_steps = Environment::kMaxEpisodeSteps);

// CSV block `episode,timestep,state_0..state_{d-1},action,reward` for one or
// more episodes. Values print as shortest round-trippable decimals.
void write_episode_csv(std::ostream& out, const std::vector<EpisodeLog>& episodes, int state_dim);

}  // namespace brtrl
