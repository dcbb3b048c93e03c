#include "brtrl/envs.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "brtrl/rng.hpp"

namespace brtrl {

State CartPole::reset(std::mt19937_64& rng) {
  position_ = uniform_range(rng, -0.05, 0.05);
  velocity_ = uniform_range(rng, -0.05, 0.05);
  angle_ = uniform_range(rng, -0.05, 0.05);
  angular_velocity_ = uniform_range(rng, -0.05, 0.05);
  steps_ = 0;
  done_ = false;
  return {position_, velocity_, angle_, angular_velocity_};
}

StepOutcome CartPole::step(Action action) {
  if (done_) throw std::logic_error("cartpole: step on finished environment");
  if (action < 0 || action >= action_count())
    throw std::invalid_argument("cartpole: invalid action");

  const double force = action == 1 ? kForceMagnitude : -kForceMagnitude;
  const double total_mass = kCartMass + kPoleMass;
  const double pole_mass_length = kPoleMass * kPoleHalfLength;
  const double cos_theta = std::cos(angle_);
  const double sin_theta = std::sin(angle_);

  const double temp =
      (force + pole_mass_length * angular_velocity_ * angular_velocity_ * sin_theta) / total_mass;
  const double angular_accel =
      (kGravity * sin_theta - cos_theta * temp) /
      (kPoleHalfLength * (4.0 / 3.0 - kPoleMass * cos_theta * cos_theta / total_mass));
  const double linear_accel = temp - pole_mass_length * angular_accel * cos_theta / total_mass;

  // Positions advance with the pre-step velocities, then velocities update.
  position_ += kTimestep * velocity_;
  angle_ += kTimestep * angular_velocity_;
  velocity_ += kTimestep * linear_accel;
  angular_velocity_ += kTimestep * angular_accel;

  ++steps_;
  const bool failed =
      std::abs(position_) > kPositionLimit || std::abs(angle_) > kAngleLimitRadians;
  done_ = failed || steps_ >= kMaxEpisodeSteps;

  return {{position_, velocity_, angle_, angular_velocity_}, 1.0, done_};
}

std::vector<std::string> CartPole::feature_names() const {
  return {"cart_position", "cart_velocity", "pole_angle", "pole_angular_velocity"};
}

State MountainCar::reset(std::mt19937_64& rng) {
  position_ = uniform_range(rng, -0.6, -0.4);
  velocity_ = 0.0;
  steps_ = 0;
  done_ = false;
  return {position_, velocity_};
}

StepOutcome MountainCar::step(Action action) {
  if (done_) throw std::logic_error("mountaincar: step on finished environment");
  if (action < 0 || action >= action_count())
    throw std::invalid_argument("mountaincar: invalid action");

  velocity_ += 0.001 * (action - 1) - 0.0025 * std::cos(3.0 * position_);
  velocity_ = std::clamp(velocity_, -kVelocityLimit, kVelocityLimit);
  position_ += velocity_;
  position_ = std::clamp(position_, kPositionMin, kPositionMax);

  ++steps_;
  const bool at_goal = position_ >= kGoalPosition;
  done_ = at_goal || steps_ >= kMaxEpisodeSteps;

  return {{position_, velocity_}, at_goal ? 0.0 : -1.0, done_};
}

std::vector<std::string> MountainCar::feature_names() const { return {"position", "velocity"}; }

std::unique_ptr<Environment> make_environment(const std::string& id) {
  if (id == "cartpole") return std::make_unique<CartPole>();
  if (id == "mountaincar") return std::make_unique<MountainCar>();
  throw std::invalid_argument("unknown environment id '" + id + "'");
}

EpisodeLog run_episode(Environment& env, const PolicyFn& policy, std::mt19937_64& rng,
                       int max_steps) {
  if (max_steps < 1) throw std::invalid_argument("run_episode: max_steps must be >= 1");
  EpisodeLog log;
  State state = env.reset(rng);
  for (int t = 0; t < max_steps; ++t) {
    const Action action = policy(state, rng);
    StepOutcome outcome = env.step(action);
    log.records.push_back({state, action, outcome.reward, t});
    log.total_reward += outcome.reward;
    state = std::move(outcome.next_state);
    if (outcome.done) break;
  }
  return log;
}

void write_episode_csv(std::ostream& out, const std::vector<EpisodeLog>& episodes, int state_dim) {
  out << "episode,timestep";
  for (int d = 0; d < state_dim; ++d) out << ",state_" << d;
  out << ",action,reward\n";
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    for (const StepRecord& rec : episodes[e].records) {
      out << e << "," << rec.timestep;
      for (double feature : rec.state) out << "," << format_double(feature);
      out << "," << rec.action << "," << format_double(rec.reward) << "\n";
    }
  }
}

}  // namespace brtrl
